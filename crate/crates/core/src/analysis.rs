//! Monte Carlo envelopes, accuracy indices and method comparison tables.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{bus_phases, solve_iterative_wls, EstimatorError};
use crate::interval::{Interval, IntervalVector};
use crate::measurement::{build_weights, Measurement, MeasurementModel, MeasurementSet};
use crate::network::{Feeder, Phase};
use crate::rng;

/// Containment slack in p.u.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty interval vector")]
    Empty,
    #[error("every one of the {0} Monte Carlo trials failed")]
    AllTrialsFailed(usize),
    #[error("reports come from different cases: {0:?} and {1:?}")]
    MismatchedCase(String, String),
    #[error("Monte Carlo setup: {0}")]
    Setup(#[from] crate::measurement::MeasurementError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Mean interval width.
pub fn q1(x: &IntervalVector) -> Result<f64, AnalysisError> {
    if x.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(x.iter().map(Interval::width).sum::<f64>() / x.len() as f64)
}

/// Largest distance from a true value to either endpoint of its interval,
/// over all entries.
pub fn q2(x: &IntervalVector, truth: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != truth.len() {
        return Err(AnalysisError::Dimension(format!(
            "{} intervals against {} true values",
            x.len(),
            truth.len()
        )));
    }
    if x.is_empty() {
        return Err(AnalysisError::Empty);
    }
    Ok(x.iter()
        .zip(truth)
        .map(|(v, t)| (v.hi() - t).abs().max((t - v.lo()).abs()))
        .fold(0.0, f64::max))
}

/// Per-entry containment of points, with slack.
pub fn contains_with_slack(x: &IntervalVector, pts: &[f64], slack: f64) -> Vec<bool> {
    x.iter()
        .zip(pts)
        .map(|(v, p)| v.lo() - slack <= *p && *p <= v.hi() + slack)
        .collect()
}

/// Per-entry containment of `[lo_i, hi_i]`, with slack.
pub fn contains_range_with_slack(
    x: &IntervalVector,
    lo: &[f64],
    hi: &[f64],
    slack: f64,
) -> Vec<bool> {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| v.lo() - slack <= *l && *h <= v.hi() + slack)
        .collect()
}

/// Inputs of one Monte Carlo study: the estimator's feeder (line entries may
/// be intervals) and the measurement set whose intervals the trials sample.
#[derive(Debug, Clone)]
pub struct McSetup {
    pub feeder: Feeder,
    pub measurements: MeasurementSet,
    pub wls_tol: f64,
}

/// Componentwise extremes over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEnvelope {
    pub state_min: Vec<f64>,
    pub state_max: Vec<f64>,
    /// Voltage magnitudes in `bus_phases` order.
    pub vmag_min: Vec<f64>,
    pub vmag_max: Vec<f64>,
    pub trials: usize,
    pub failed: usize,
    pub seed: u64,
    #[serde(skip)]
    pub trial_times: Vec<Duration>,
}

impl McEnvelope {
    pub fn total_time(&self) -> Duration {
        self.trial_times.iter().sum()
    }
}

/// Draw one point inside every measurement interval: Gaussian noise
/// truncated at three sigma around the reported value, DG output uniform
/// over its interval. All phases of one DG unit share the draw.
pub fn perturb_measurements(ms: &MeasurementSet, seed: u64) -> MeasurementSet {
    let z = |label: String| rng::normal(&mut rng::stream(seed, &label), true);
    let entries = ms
        .entries
        .iter()
        .map(|m| match m.clone() {
            Measurement::PmuV {
                bus,
                phase,
                mag,
                angle,
                sigma_mag,
                sigma_angle,
            } => Measurement::PmuV {
                mag: mag + sigma_mag * z(format!("pmuV/{bus}/{phase:?}/mag")),
                angle: angle + sigma_angle * z(format!("pmuV/{bus}/{phase:?}/ang")),
                bus,
                phase,
                sigma_mag,
                sigma_angle,
            },
            Measurement::PmuI {
                branch,
                phase,
                mag,
                angle,
                sigma_mag,
                sigma_angle,
            } => Measurement::PmuI {
                mag: mag + sigma_mag * z(format!("pmuI/{branch}/{phase:?}/mag")),
                angle: angle + sigma_angle * z(format!("pmuI/{branch}/{phase:?}/ang")),
                branch,
                phase,
                sigma_mag,
                sigma_angle,
            },
            Measurement::ScadaFlow {
                branch,
                phase,
                p,
                q,
                sigma_p,
                sigma_q,
            } => Measurement::ScadaFlow {
                p: p + sigma_p * z(format!("scada/{branch}/{phase:?}/p")),
                q: q + sigma_q * z(format!("scada/{branch}/{phase:?}/q")),
                branch,
                phase,
                sigma_p,
                sigma_q,
            },
            Measurement::InjPseudo {
                bus,
                phase,
                p,
                q,
                sigma_p,
                sigma_q,
            } => Measurement::InjPseudo {
                p: p + sigma_p * z(format!("pseudo/{bus}/{phase:?}/p")),
                q: q + sigma_q * z(format!("pseudo/{bus}/{phase:?}/q")),
                bus,
                phase,
                sigma_p,
                sigma_q,
            },
            Measurement::DgMeter {
                dg,
                bus,
                phase,
                p,
                q,
                sigma_p,
                sigma_q,
            } => Measurement::DgMeter {
                p: p + sigma_p * z(format!("dg/{dg}/{phase:?}/p")),
                q: q + sigma_q * z(format!("dg/{dg}/{phase:?}/q")),
                dg,
                bus,
                phase,
                sigma_p,
                sigma_q,
            },
            Measurement::DgInterval {
                dg,
                bus,
                phase,
                p,
                q,
            } => {
                let t: f64 = rng::stream(seed, &format!("dg/{dg}")).random();
                let ps = p.lo() + t * p.width();
                // Q tracks P at a fixed power factor, so it moves along the
                // same fraction of its interval (reversed when leading).
                let qs = if q.midpoint() * p.midpoint() >= 0.0 {
                    q.lo() + t * q.width()
                } else {
                    q.hi() - t * q.width()
                };
                Measurement::DgInterval {
                    p: Interval::point(ps.clamp(p.lo(), p.hi())),
                    q: Interval::point(qs.clamp(q.lo(), q.hi())),
                    dg,
                    bus,
                    phase,
                }
            }
            z @ Measurement::ZeroInjection { .. } => z,
        })
        .collect();
    MeasurementSet {
        v_ref: ms.v_ref,
        zero_injection_sigma: ms.zero_injection_sigma,
        entries,
    }
}

/// Point feeder with every interval line entry drawn uniformly; the
/// `(a, b)` and `(b, a)` entries share a draw.
pub fn sample_lines(f: &Feeder, seed: u64) -> Feeder {
    let mut out = f.clone();
    for br in out.branches.iter_mut() {
        if br.is_thin() {
            continue;
        }
        let mut r = rng::stream(seed, &format!("line/{}", br.id));
        for a in 0..3 {
            for b in a..3 {
                for m in [&mut br.r, &mut br.x] {
                    let v = m[a][b];
                    if v.is_thin() {
                        continue;
                    }
                    let s = Interval::point(
                        (v.lo() + r.random::<f64>() * v.width()).clamp(v.lo(), v.hi()),
                    );
                    m[a][b] = s;
                    m[b][a] = s;
                }
            }
        }
    }
    out
}

/// One trial: states and voltage magnitudes in `bus_phases` order.
pub fn mc_trial(setup: &McSetup, seed: u64) -> Result<(Vec<f64>, Vec<f64>), EstimatorError> {
    let f = sample_lines(&setup.feeder, seed);
    let ms = perturb_measurements(&setup.measurements, seed);
    let model = MeasurementModel::new(&f, &ms)?;
    let w = build_weights(&model)?;
    let sol = solve_iterative_wls(&f, &model, &w, setup.wls_tol)?;
    let vm = bus_phases(&f)
        .iter()
        .map(|&(b, p)| sol.voltages[b][p.index()].norm())
        .collect();
    Ok((sol.x, vm))
}

/// Envelope over `trials` independent trials seeded by `trial_seed(seed, k)`.
/// Failed trials are counted and left out.
pub fn mc_envelope(setup: &McSetup, trials: usize, seed: u64) -> Result<McEnvelope, AnalysisError> {
    let results: Vec<(Result<(Vec<f64>, Vec<f64>), EstimatorError>, Duration)> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let t0 = Instant::now();
            let r = mc_trial(setup, rng::trial_seed(seed, k));
            (r, t0.elapsed())
        })
        .collect();
    let mut env: Option<McEnvelope> = None;
    let mut failed = 0;
    let mut trial_times = Vec::with_capacity(trials);
    for (r, dt) in results {
        trial_times.push(dt);
        let Ok((x, vm)) = r else {
            failed += 1;
            continue;
        };
        match env.as_mut() {
            None => {
                env = Some(McEnvelope {
                    state_min: x.clone(),
                    state_max: x,
                    vmag_min: vm.clone(),
                    vmag_max: vm,
                    trials,
                    failed: 0,
                    seed,
                    trial_times: Vec::new(),
                })
            }
            Some(e) => {
                for (k, v) in x.iter().enumerate() {
                    e.state_min[k] = e.state_min[k].min(*v);
                    e.state_max[k] = e.state_max[k].max(*v);
                }
                for (k, v) in vm.iter().enumerate() {
                    e.vmag_min[k] = e.vmag_min[k].min(*v);
                    e.vmag_max[k] = e.vmag_max[k].max(*v);
                }
            }
        }
    }
    let mut env = env.ok_or(AnalysisError::AllTrialsFailed(trials))?;
    env.failed = failed;
    env.trial_times = trial_times;
    Ok(env)
}

/// Widths summed per phase, separately for real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WidthSums {
    pub re: [f64; 3],
    pub im: [f64; 3],
}

pub fn width_sums(at: &[(usize, Phase)], re: &IntervalVector, im: &IntervalVector) -> WidthSums {
    let mut s = WidthSums::default();
    for ((_, p), (r, i)) in at.iter().zip(re.iter().zip(im.iter())) {
        s.re[p.index()] += r.width();
        s.im[p.index()] += i.width();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Mean width of the voltage magnitude intervals.
    pub q1: f64,
    /// Largest deviation of a magnitude bound from the true magnitude
    /// (max over states).
    pub q2: f64,
    pub width_sums: WidthSums,
    /// Truth inside each magnitude interval.
    pub truth_contained: Vec<bool>,
}

impl AccuracyReport {
    pub fn new(
        at: &[(usize, Phase)],
        re: &IntervalVector,
        im: &IntervalVector,
        mag: &IntervalVector,
        truth_mag: &[f64],
    ) -> Result<Self, AnalysisError> {
        Ok(AccuracyReport {
            q1: q1(mag)?,
            q2: q2(mag, truth_mag)?,
            width_sums: width_sums(at, re, im),
            truth_contained: contains_with_slack(mag, truth_mag, CONTAINMENT_SLACK),
        })
    }

    pub fn all_truth_contained(&self) -> bool {
        self.truth_contained.iter().all(|&b| b)
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub case_id: String,
    pub method: String,
    pub accuracy: Option<AccuracyReport>,
    pub iterations: usize,
    pub time_initial: Duration,
    pub time_per_iteration: Duration,
    pub time_total: Duration,
    pub truth_contained: Option<bool>,
    pub mc_contained: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub case_id: String,
    pub rows: Vec<MethodSummary>,
    /// Monte Carlo total time over each method's total time.
    pub speedup_vs_mc: Vec<(String, f64)>,
}

pub fn compare_methods(rows: &[MethodSummary]) -> Result<Comparison, AnalysisError> {
    let first = rows.first().ok_or(AnalysisError::Empty)?;
    if let Some(r) = rows.iter().find(|r| r.case_id != first.case_id) {
        return Err(AnalysisError::MismatchedCase(
            first.case_id.clone(),
            r.case_id.clone(),
        ));
    }
    let mc = rows.iter().find(|r| r.method.starts_with("mc"));
    let speedup_vs_mc = match mc {
        Some(mc) => rows
            .iter()
            .filter(|r| !r.method.starts_with("mc") && r.time_total > Duration::ZERO)
            .map(|r| {
                (
                    r.method.clone(),
                    mc.time_total.as_secs_f64() / r.time_total.as_secs_f64(),
                )
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(Comparison {
        case_id: first.case_id.clone(),
        rows: rows.to_vec(),
        speedup_vs_mc,
    })
}

impl Comparison {
    /// Fixed-width text table.
    pub fn render(&self) -> String {
        let mut s = format!(
            "case {}\n{:<10} {:>10} {:>10} {:>6} {:>12} {:>12} {:>12} {:>7} {:>7}\n",
            self.case_id,
            "method",
            "Q1",
            "Q2",
            "iter",
            "t_init[s]",
            "t_iter[s]",
            "t_total[s]",
            "truth",
            "mc"
        );
        let flag = |b: Option<bool>| match b {
            Some(true) => "yes",
            Some(false) => "NO",
            None => "-",
        };
        for r in &self.rows {
            let (a, b) = r.accuracy.as_ref().map_or(("-".into(), "-".into()), |a| {
                (format!("{:.5}", a.q1), format!("{:.5}", a.q2))
            });
            s += &format!(
                "{:<10} {:>10} {:>10} {:>6} {:>12.6} {:>12.6} {:>12.6} {:>7} {:>7}\n",
                r.method,
                a,
                b,
                r.iterations,
                r.time_initial.as_secs_f64(),
                r.time_per_iteration.as_secs_f64(),
                r.time_total.as_secs_f64(),
                flag(r.truth_contained),
                flag(r.mc_contained),
            );
        }
        for (m, x) in &self.speedup_vs_mc {
            s += &format!("speedup of {m} over Monte Carlo: {x:.1}x\n");
        }
        s
    }
}

/// One line of the per-bus bound series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub bus: String,
    pub phase: Phase,
    pub lo: f64,
    pub hi: f64,
    pub truth: f64,
    pub mc_min: Option<f64>,
    pub mc_max: Option<f64>,
}

pub fn bound_rows(
    f: &Feeder,
    at: &[(usize, Phase)],
    mag: &IntervalVector,
    truth: &[f64],
    mc: Option<&McEnvelope>,
) -> Vec<BoundRow> {
    at.iter()
        .enumerate()
        .map(|(k, &(b, p))| BoundRow {
            bus: f.buses[b].id.clone(),
            phase: p,
            lo: mag[k].lo(),
            hi: mag[k].hi(),
            truth: truth[k],
            mc_min: mc.map(|e| e.vmag_min[k]),
            mc_max: mc.map(|e| e.vmag_max[k]),
        })
        .collect()
}

/// CSV with columns bus, phase, lo, hi, truth, mc_min, mc_max.
pub fn write_bounds_csv<W: Write>(out: W, rows: &[BoundRow]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One bus-phase of an envelope-only report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub bus: String,
    pub phase: Phase,
    pub truth: f64,
    pub mc_min: f64,
    pub mc_max: f64,
}

/// CSV with columns bus, phase, truth, mc_min, mc_max.
pub fn write_envelope_csv<W: Write>(
    out: W,
    f: &Feeder,
    at: &[(usize, Phase)],
    truth: &[f64],
    env: &McEnvelope,
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    for (k, &(b, p)) in at.iter().enumerate() {
        w.serialize(EnvelopeRow {
            bus: f.buses[b].id.clone(),
            phase: p,
            truth: truth[k],
            mc_min: env.vmag_min[k],
            mc_max: env.vmag_max[k],
        })?;
    }
    w.flush()?;
    Ok(())
}
