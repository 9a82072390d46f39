//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use simplexlink_core::channel::{apply_cd, ssfm_span, FiberSpec};
use simplexlink_core::constellation::{
    asymptotic_gain_db, avg_power, dpbpsk_codebook, mc_ber_awgn, min_distance, osnr_to_sigma, simplex_codebook,
    union_bound_ber, Format, NoiseSigma,
};
use simplexlink_core::dsp::q_function;
use simplexlink_core::txchain::{de_bruijn_sequence, generate_drive, modulate};

use crate::config::Scenario;
use crate::link::TxFrame;
use crate::output::write_outputs;
use crate::run::{run_scenario, RunOptions};
use crate::theory::{parse_range, theory_ber};

#[derive(Debug, Parser)]
#[command(name = "simplexlink", version, about = "Dual-polarization 3D-simplex link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Simplex3d,
    Dpbpsk,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Simplex3d => Format::Simplex3d,
            FormatArg::Dpbpsk => Format::DpBpsk,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file and write CSV and JSON results.
    Run {
        config: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-stage symbol dumps of the first frame of each point.
        #[arg(long)]
        dump_constellations: bool,
    },
    /// Print reference BER curves over an OSNR grid.
    Theory {
        #[arg(long, value_enum)]
        format: FormatArg,
        /// Inclusive grid a:b:step in dB.
        #[arg(long)]
        osnr_range: String,
        #[arg(long, default_value_t = 16e9)]
        symbol_rate: f64,
        /// Monte-Carlo symbols per point at one sample per symbol (0 = off).
        #[arg(long, default_value_t = 0)]
        mc_symbols: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print codebook points and figures of merit.
    Codebook {
        #[arg(long, value_enum)]
        format: FormatArg,
    },
    /// Run a quick invariant suite.
    Selftest,
}

const USAGE: u8 = 2;

pub fn main_with(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
            dump_constellations,
        } => {
            let scenario = match Scenario::load(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: config: {e:#}");
                    return ExitCode::from(USAGE);
                }
            };
            let result = run_scenario(
                &scenario,
                RunOptions {
                    workers,
                    capture: dump_constellations,
                },
            )
            .and_then(|r| {
                let files = write_outputs(&r, &out, dump_constellations)?;
                Ok((r, files))
            });
            match result {
                Ok((r, files)) => {
                    for f in &r.result.formats {
                        let req = f
                            .required_osnr
                            .as_ref()
                            .map_or("n/a".to_string(), |q| format!("{:.2} dB", q.value));
                        eprintln!("{}: required OSNR at 1e-3 {req}", f.format);
                        if let Some(p) = f.optimum_launch_dbm {
                            eprintln!("{}: optimum launch power {p:.2} dBm", f.format);
                        }
                    }
                    for f in files {
                        println!("{}", f.display());
                    }
                    eprintln!("finished in {:.1} s", r.result.wall_time.as_secs_f64());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: run: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Theory {
            format,
            osnr_range,
            symbol_rate,
            mc_symbols,
            seed,
        } => {
            let grid = match parse_range(&osnr_range) {
                Ok(g) => g,
                Err(e) => {
                    eprintln!("error: --osnr-range: {e:#}");
                    return ExitCode::from(USAGE);
                }
            };
            match print_theory(format.into(), &grid, symbol_rate, mc_symbols, seed) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: theory: {e:#}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Codebook { format } => {
            print_codebook(format.into());
            ExitCode::SUCCESS
        }
        Command::Selftest => {
            let mut ok = true;
            for (name, res) in selftest() {
                match res {
                    Ok(detail) => println!("PASS {name}: {detail}"),
                    Err(e) => {
                        ok = false;
                        println!("FAIL {name}: {e:#}");
                    }
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn print_theory(format: Format, grid: &[f64], rs: f64, mc_symbols: usize, seed: u64) -> Result<()> {
    let cb = format.codebook();
    if mc_symbols > 0 {
        println!("osnr_db,union_bound,reference,mc_ber,mc_errors,mc_bits");
    } else {
        println!("osnr_db,union_bound,reference");
    }
    for (k, &o) in grid.iter().enumerate() {
        let sigma = osnr_to_sigma(o, rs, &cb)?;
        let ub = union_bound_ber(&cb, sigma)?;
        let reference = theory_ber(format, o, rs)?;
        if mc_symbols > 0 {
            let mc = mc_ber_awgn(&cb, sigma, mc_symbols, seed.wrapping_add(k as u64))?;
            println!("{o},{ub:e},{reference:e},{:e},{},{}", mc.ber, mc.errors, mc.bits);
        } else {
            println!("{o},{ub:e},{reference:e}");
        }
    }
    Ok(())
}

fn print_codebook(format: Format) {
    let cb = format.codebook();
    let bps = cb.bits_per_symbol();
    println!("{} codebook ({} points, {bps} bits/symbol)", cb.name(), cb.len());
    println!("label  Ix  Qx  Iy  Qy");
    for (p, &l) in cb.points().iter().zip(cb.labels()) {
        let bits: String = cb.label_bits(l).iter().map(|b| char::from(b'0' + b)).collect();
        println!("{bits:>5} {:>3} {:>3} {:>3} {:>3}", p.ix, p.qx, p.iy, p.qy);
    }
    println!("D_min = {:.4}", min_distance(&cb));
    println!("P_avg = {:.4}", avg_power(&cb));
    if format == Format::Simplex3d {
        let g = asymptotic_gain_db(&cb, &dpbpsk_codebook()).expect("both codebooks are valid");
        println!("asymptotic gain vs dpbpsk = {g:.4} dB");
    }
}

type Check = (&'static str, Result<String>);

/// Fast subset of the invariant suite, for checking an installed binary.
pub fn selftest() -> Vec<Check> {
    vec![
        ("codebook geometry", check_geometry()),
        ("de Bruijn windows", check_de_bruijn()),
        ("Monte-Carlo vs Q", check_mc()),
        ("SSFM linear limit", check_ssfm()),
        ("frame layout", check_frames()),
    ]
}

fn check_geometry() -> Result<String> {
    let s = simplex_codebook();
    let b = dpbpsk_codebook();
    let (d, p) = (min_distance(&s), avg_power(&s));
    let g = asymptotic_gain_db(&s, &b)?;
    anyhow::ensure!((d - 8f64.sqrt()).abs() < 1e-12 && (p - 3.0).abs() < 1e-12, "D_min {d}, P_avg {p}");
    anyhow::ensure!((min_distance(&b) - 2.0).abs() < 1e-12 && (avg_power(&b) - 2.0).abs() < 1e-12);
    anyhow::ensure!((g - 1.2494).abs() < 1e-4, "gain {g}");
    Ok(format!("D_min={d:.4} P_avg={p} gain={g:.4} dB"))
}

fn check_de_bruijn() -> Result<String> {
    let s = de_bruijn_sequence(11)?;
    let b = s.bits();
    let mut seen = vec![false; 1 << 11];
    for k in 0..b.len() {
        let w = (0..11).fold(0usize, |acc, j| (acc << 1) | b[(k + j) % b.len()] as usize);
        anyhow::ensure!(!seen[w], "window {w:011b} repeats");
        seen[w] = true;
    }
    Ok(format!("{} bits, all windows unique", b.len()))
}

fn check_mc() -> Result<String> {
    let n = 200_000;
    let mc = mc_ber_awgn(&dpbpsk_codebook(), NoiseSigma::new(0.5)?, n, 11)?;
    let p = q_function(2.0);
    let sd = (p * (1.0 - p) / mc.bits as f64).sqrt();
    anyhow::ensure!((mc.ber - p).abs() < 4.0 * sd, "MC {} vs {p}", mc.ber);
    Ok(format!("{:.5} vs {p:.5}", mc.ber))
}

fn check_ssfm() -> Result<String> {
    let frame = TxFrame::new(Format::Simplex3d, 1)?;
    let drive = generate_drive(&frame.period[..512], 4, Some(13e9), 16e9)?;
    let tx = modulate(&drive, 0.0)?;
    let mut f = FiberSpec::ssmf_300km();
    f.length_km = 20.0;
    f.attenuation = 0.0;
    f.gamma = 0.0;
    f.raman_gain_db = 0.0;
    let a = ssfm_span(&tx, &f)?;
    let b = apply_cd(&tx, f.total_dispersion());
    let e = a.relative_rms_to(&b);
    anyhow::ensure!(e < 1e-6, "relative RMS {e}");
    Ok(format!("relative RMS {e:.1e}"))
}

fn check_frames() -> Result<String> {
    let f = TxFrame::blind(Format::DpBpsk, 2048)?;
    anyhow::ensure!(f.reference.len() == 4096 && f.period.len() == 2048 && f.periods == 3);
    Ok(format!("{} periods of {} symbols", f.periods, f.period.len()))
}
