//! Scenario engine: sweep points × frames on a worker pool.

use std::time::Duration;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use simplexlink_core::channel::LumpedLoss;
use simplexlink_core::constellation::Format;
use simplexlink_core::metrics::{fit_curve_in, required_osnr, BerCurve, BerPoint, RequiredOsnr};
use simplexlink_core::rxdsp::DspReport;
use simplexlink_core::waveform::{DualPolWaveform, LaneDump};

use crate::config::{ReceiverKind, Scenario, ScenarioKind};
use crate::link::{impair, receive, transmit, FrameOutcome, Receiver, TxFrame};
use crate::theory::{theory_ber, theory_osnr_for_ber};

pub const RESULT_SCHEMA_VERSION: u32 = 1;
pub const TARGET_BER: f64 = 1e-3;
/// Position of the variable attenuator in span-loss sweeps, km.
pub const ATTENUATOR_POSITION_KM: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub sweep_value: f64,
    pub osnr_db: f64,
    pub launch_power_dbm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_loss_db: Option<f64>,
    pub theory_ber: f64,
    /// OSNR at which the reference curve gives the measured BER.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_osnr_db: Option<f64>,
    pub frames_converged: usize,
    /// Frames the blind receiver could not lock onto, counted at BER 0.5.
    pub frames_lost: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_loss: Option<String>,
    /// Mean over the frames that locked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_snr_db: Option<f64>,
    pub min_sync_agreement: f64,
    /// Receiver report of frame 0 (blind receiver only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_frame: Option<DspReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatResult {
    pub format: Format,
    pub curve: BerCurve,
    pub points: Vec<PointDiagnostics>,
    /// Interpolated OSNR at BER 1e-3 (OSNR-axis scenarios).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_osnr: Option<RequiredOsnr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_required_osnr: Option<f64>,
    /// Vertex of a parabola through log10 BER vs launch power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum_launch_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub software_version: String,
    pub scenario: Scenario,
    pub formats: Vec<FormatResult>,
    /// Excluded from the JSON so output files stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Dump {
    pub stem: String,
    pub data: LaneDump,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub dumps: Vec<Dump>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the available parallelism.
    pub workers: usize,
    pub capture: bool,
}

/// Operating point of one sweep value.
#[derive(Debug, Clone, Copy)]
struct Point {
    index: usize,
    sweep_value: f64,
    osnr_db: f64,
    launch_power_dbm: f64,
    added_loss_db: Option<f64>,
}

pub fn frame_seed(base_seed: u64, point: usize, frame: usize) -> u64 {
    base_seed
        .wrapping_add(point as u64 * 1000)
        .wrapping_add(frame as u64)
}

fn points(s: &Scenario, format: Format) -> Result<Vec<Point>> {
    s.sweep_for(format)
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            let (osnr_db, launch_power_dbm, added_loss_db) = match s.kind {
                ScenarioKind::BackToBack => (v, s.link.launch_power_dbm, None),
                ScenarioKind::LaunchPowerSweep => {
                    let at_ref = s.link.osnr_at_reference.context("link.osnr_at_reference")?;
                    (at_ref + (v - s.link.reference_launch_dbm), v, None)
                }
                ScenarioKind::SpanLossSweep => {
                    let base = *s.link.baseline_osnr.get(&format).context("link.baseline_osnr")?;
                    (base - v, s.link.span_launch_power(format), Some(v))
                }
            };
            Ok(Point {
                index,
                sweep_value: v,
                osnr_db,
                launch_power_dbm,
                added_loss_db,
            })
        })
        .collect()
}

fn x_value(kind: ScenarioKind, p: &Point) -> f64 {
    match kind {
        ScenarioKind::LaunchPowerSweep => p.launch_power_dbm,
        ScenarioKind::BackToBack | ScenarioKind::SpanLossSweep => p.osnr_db,
    }
}

fn propagate(s: &Scenario, frame: &TxFrame, p: &Point) -> Result<DualPolWaveform> {
    let fiber = s.fiber.as_ref().map(|f| {
        let mut f = f.clone();
        if let Some(loss) = p.added_loss_db {
            f.attenuator = Some(LumpedLoss {
                position_km: ATTENUATOR_POSITION_KM,
                loss_db: loss,
            });
        }
        f
    });
    transmit(
        frame,
        s.symbol_rate,
        s.transmitter.samples_per_symbol,
        s.transmitter.dac_bandwidth,
        p.launch_power_dbm,
        fiber.as_ref(),
    )
}

pub fn run_scenario(s: &Scenario, opts: RunOptions) -> Result<RunOutput> {
    s.validate()?;
    let start = std::time::Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .context("worker pool")?;
    let mut formats = Vec::new();
    let mut dumps = Vec::new();
    for &format in &s.formats {
        let (fr, d) = pool.install(|| run_format(s, format, opts.capture))?;
        formats.push(fr);
        dumps.extend(d);
    }
    Ok(RunOutput {
        result: RunResult {
            schema_version: RESULT_SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: s.clone(),
            formats,
            wall_time: start.elapsed(),
        },
        dumps,
    })
}

fn run_format(s: &Scenario, format: Format, capture: bool) -> Result<(FormatResult, Vec<Dump>)> {
    let frame = match s.dsp.receiver {
        ReceiverKind::Blind => TxFrame::blind(format, s.dsp.convergence_symbols)?,
        ReceiverKind::Ideal => TxFrame::new(format, 1)?,
    };
    let dispersion = s.fiber.as_ref().map_or(0.0, |f| f.total_dispersion());
    let chain = s.dsp.chain_config(format, dispersion);
    let receiver = match s.dsp.receiver {
        ReceiverKind::Blind => Receiver::Blind(&chain),
        ReceiverKind::Ideal => Receiver::Ideal,
    };
    let pts = points(s, format)?;
    let fields: Vec<DualPolWaveform> = pts
        .par_iter()
        .map(|p| propagate(s, &frame, p).with_context(|| format!("{format} point {}", p.index)))
        .collect::<Result<_>>()?;
    let work: Vec<(usize, usize)> = (0..pts.len())
        .flat_map(|i| (0..s.frames_per_point).map(move |f| (i, f)))
        .collect();
    let outcomes: Vec<FrameOutcome> = work
        .par_iter()
        .map(|&(i, f)| {
            let p = &pts[i];
            let seed = frame_seed(s.base_seed, p.index, f);
            let rx = impair(&fields[i], &s.impairments, Some(p.osnr_db), s.symbol_rate, seed)?;
            receive(&rx, &frame, s.symbol_rate, receiver, capture && f == 0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .zip(&work)
        .map(|(r, &(i, f))| r.with_context(|| format!("{format} point {i} (sweep value {}) frame {f}", pts[i].sweep_value)))
        .collect::<Result<_>>()?;

    let mut ber_points = Vec::new();
    let mut diags = Vec::new();
    let mut dumps = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let frames = &outcomes[i * s.frames_per_point..(i + 1) * s.frames_per_point];
        let x = x_value(s.kind, p);
        let acc = BerPoint::new(
            x,
            frames.iter().map(|o| o.errors).sum(),
            frames.iter().map(|o| o.bits).sum(),
        )?;
        let theory = theory_ber(format, p.osnr_db, s.symbol_rate)?;
        let effective_osnr_db = if acc.ber > 0.0 && acc.ber < 0.5 {
            theory_osnr_for_ber(format, acc.ber, s.symbol_rate).ok()
        } else {
            None
        };
        diags.push(PointDiagnostics {
            sweep_value: p.sweep_value,
            osnr_db: p.osnr_db,
            launch_power_dbm: p.launch_power_dbm,
            added_loss_db: p.added_loss_db,
            theory_ber: theory,
            effective_osnr_db,
            frames_converged: frames
                .iter()
                .filter(|o| o.failure.is_none() && o.report.as_ref().is_none_or(|r| r.converged))
                .count(),
            frames_lost: frames.iter().filter(|o| o.failure.is_some()).count(),
            first_loss: frames.iter().find_map(|o| o.failure.clone()),
            mean_snr_db: {
                let v: Vec<f64> = frames.iter().filter_map(|o| o.snr_db).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            },
            min_sync_agreement: frames.iter().map(|o| o.sync.agreement).fold(f64::INFINITY, f64::min),
            first_frame: frames[0].report.clone(),
        });
        ber_points.push(acc);
        for st in &frames[0].stages {
            let mut data = LaneDump::from_symbols(&st.x, &st.y, s.symbol_rate);
            if st.stage == "clock" {
                data.sample_rate = 2.0 * s.symbol_rate;
            }
            dumps.push(Dump {
                stem: format!("{}_{}_p{:03}_{}", s.name, format.name(), p.index, st.stage),
                data,
            });
        }
    }
    let curve = match fit_curve_in(&ber_points, s.dsp.fit_domain) {
        Ok(c) => c,
        Err(_) => BerCurve::from_points(ber_points),
    };
    let osnr_axis = s.kind != ScenarioKind::LaunchPowerSweep;
    let required = if osnr_axis && curve.regression.is_some() {
        required_osnr(&curve, TARGET_BER).ok()
    } else {
        None
    };
    let optimum = if s.kind == ScenarioKind::LaunchPowerSweep {
        parabola_vertex(&curve.points)
    } else {
        None
    };
    Ok((
        FormatResult {
            format,
            theory_required_osnr: if osnr_axis {
                theory_osnr_for_ber(format, TARGET_BER, s.symbol_rate).ok()
            } else {
                None
            },
            curve,
            points: diags,
            required_osnr: required,
            optimum_launch_dbm: optimum,
        },
        dumps,
    ))
}

/// Least-squares parabola through log10 BER of the nonzero points; returns
/// the vertex when the fit opens upward.
pub fn parabola_vertex(points: &[BerPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ber > 0.0)
        .map(|p| (p.x_value, p.ber.log10()))
        .collect();
    if xy.len() < 3 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    // normal equations in centered x
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for &(x, y) in &xy {
        let u = x - mx;
        let mut pw = 1.0;
        for k in 0..5 {
            s[k] += pw;
            if k < 3 {
                t[k] += pw * y;
            }
            pw *= u;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let solve = |col: usize| {
        let mut a = m;
        for r in 0..3 {
            a[r][col] = t[r];
        }
        det(a) / d
    };
    let (b, c) = (solve(1), solve(2));
    (c > 0.0).then(|| mx - b / (2.0 * c))
}

/// Fails unless every point carries the bit count it was measured with.
pub fn check_auditable(r: &RunResult) -> Result<()> {
    for f in &r.formats {
        if f.curve.points.len() != r.scenario.sweep_for(f.format).len() {
            bail!("{}: one point per sweep value expected", f.format);
        }
        if f.curve.points.iter().any(|p| p.bits_counted == 0) {
            bail!("{}: point without counted bits", f.format);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_follow_contract() {
        assert_eq!(frame_seed(7, 0, 0), 7);
        assert_eq!(frame_seed(7, 3, 5), 7 + 3000 + 5);
    }

    #[test]
    fn vertex_of_exact_parabola() {
        let pts: Vec<BerPoint> = (0..7)
            .map(|k| {
                let x = 10.0 + k as f64;
                BerPoint {
                    x_value: x,
                    ber: 10f64.powf(-5.0 + 0.1 * (x - 15.5).powi(2)),
                    bits_counted: 1,
                    errors: 0,
                }
            })
            .collect();
        assert!((parabola_vertex(&pts).unwrap() - 15.5).abs() < 1e-9);
        let decreasing: Vec<BerPoint> = pts
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.ber = 10f64.powf(-0.1 * p.x_value * p.x_value);
                q
            })
            .collect();
        assert!(parabola_vertex(&decreasing).is_none());
    }
}
