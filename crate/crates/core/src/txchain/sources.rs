//! Bit sources and differential coding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BitOrigin {
    DeBruijn { order: u32 },
    Prbs { order: u32, seed: u64 },
    Explicit,
}

/// An ordered sequence of bits (each element is 0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
    origin: BitOrigin,
}

impl BitStream {
    pub fn explicit(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InputShape(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self {
            bits,
            origin: BitOrigin::Explicit,
        })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn origin(&self) -> BitOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Lexicographically least binary de Bruijn sequence of the given order,
/// built by concatenating Lyndon words whose length divides `order`.
pub fn de_bruijn_sequence(order: u32) -> Result<BitStream> {
    if !(1..=24).contains(&order) {
        return Err(Error::Parameter(format!("de Bruijn order must be in 1..=24, got {order}")));
    }
    let n = order as usize;
    let mut a = vec![0u8; n + 1];
    let mut out = Vec::with_capacity(1 << n);
    fkm(1, 1, n, &mut a, &mut out);
    debug_assert_eq!(out.len(), 1 << n);
    Ok(BitStream {
        bits: out,
        origin: BitOrigin::DeBruijn { order },
    })
}

fn fkm(t: usize, p: usize, n: usize, a: &mut [u8], out: &mut Vec<u8>) {
    if t > n {
        if n % p == 0 {
            out.extend_from_slice(&a[1..=p]);
        }
        return;
    }
    a[t] = a[t - p];
    fkm(t + 1, p, n, a, out);
    if a[t - p] == 0 {
        a[t] = 1;
        fkm(t + 1, t, n, a, out);
    }
}

/// Feedback taps `(order, second tap)` of the ITU-T O.150 style polynomials
/// `x^order + x^tap + 1`.
fn prbs_tap(order: u32) -> Option<u32> {
    match order {
        7 => Some(6),
        9 => Some(5),
        11 => Some(9),
        15 => Some(14),
        23 => Some(18),
        _ => None,
    }
}

/// One period (`2^order − 1` bits) of a maximal-length LFSR sequence.
pub fn prbs(order: u32, seed: u64) -> Result<BitStream> {
    let tap = prbs_tap(order)
        .ok_or_else(|| Error::Parameter(format!("unsupported PRBS order {order}")))?;
    let mask = (1u64 << order) - 1;
    let mut state = seed & mask;
    if state == 0 {
        return Err(Error::Parameter("PRBS seed must have a non-zero state".into()));
    }
    let period = (1usize << order) - 1;
    let mut bits = Vec::with_capacity(period);
    for _ in 0..period {
        let fb = ((state >> (order - 1)) ^ (state >> (tap - 1))) & 1;
        state = ((state << 1) | fb) & mask;
        bits.push(fb as u8);
    }
    Ok(BitStream {
        bits,
        origin: BitOrigin::Prbs { order, seed },
    })
}

/// `d_k = b_k XOR d_{k-1}` with `d_{-1} = 0`.
pub fn differential_encode(bits: &[u8]) -> Vec<u8> {
    let mut prev = 0u8;
    bits.iter()
        .map(|&b| {
            prev ^= b & 1;
            prev
        })
        .collect()
}

/// `b_k = d_k XOR d_{k-1}` with `d_{-1} = 0`.
pub fn differential_decode(bits: &[u8]) -> Vec<u8> {
    let mut prev = 0u8;
    bits.iter()
        .map(|&d| {
            let b = (d & 1) ^ prev;
            prev = d & 1;
            b
        })
        .collect()
}
