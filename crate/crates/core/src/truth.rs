//! Ground truth by backward/forward sweep power flow, and synthetic
//! measurements drawn around it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::measurement::{Measurement, MeasurementSet};
use crate::network::{dg_power_intervals, Feeder, Phase};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TruthError {
    #[error(
        "power flow did not converge after {sweeps} sweeps (last voltage change {delta:e} p.u.)"
    )]
    Divergence { sweeps: usize, delta: f64 },
    #[error("power flow needs point line parameters; branch {0} has interval impedance")]
    IntervalLines(String),
    #[error("expected {expected} DG outputs, got {got}")]
    DgCount { expected: usize, got: usize },
    #[error("DG {id}: output {value} kW outside its interval [{lo}, {hi}]")]
    DgOutOfRange {
        id: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("placement references unknown {kind} {id:?}")]
    UnknownPlacement { kind: &'static str, id: String },
    #[error("error specification entries must be finite and non-negative")]
    BadSpec,
}

/// Solved operating point in per-unit. Absent phases hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueState {
    pub v: Vec<[Complex64; 3]>,
    /// Branch currents, from-bus to to-bus.
    pub i: Vec<[Complex64; 3]>,
    /// DG outputs used, (kW, kvar) per unit.
    pub dg: Vec<(f64, f64)>,
    pub v_slack: [Complex64; 3],
    pub sweeps: usize,
    /// Net consumed power per bus and phase (load minus DG).
    pub consumption: Vec<[Complex64; 3]>,
}

impl TrueState {
    /// Complex power entering branch `k` at its sending end.
    pub fn flow(&self, f: &Feeder, k: usize, p: Phase) -> Complex64 {
        let b = &f.branches[k];
        self.v[b.from][p.index()] * self.i[k][p.index()].conj()
    }

    /// Largest KCL mismatch over all buses and phases.
    pub fn kcl_residual(&self, f: &Feeder) -> f64 {
        let mut worst: f64 = 0.0;
        for (bus, b) in f.buses.iter().enumerate() {
            if bus == f.slack {
                continue;
            }
            for p in b.phases.iter() {
                let a = p.index();
                let mut r = self.i[f.inflow(bus).expect("non-slack bus has inflow")][a];
                for &k in f.outflows(bus) {
                    r -= self.i[k][a];
                }
                let drawn = (self.consumption[bus][a] / self.v[bus][a]).conj();
                worst = worst.max((r - drawn).norm());
            }
        }
        worst
    }

    pub fn voltage_magnitude(&self, bus: usize, p: Phase) -> f64 {
        self.v[bus][p.index()].norm()
    }
}

/// Balanced slack phasors of magnitude `mag` at 0, -120 and +120 degrees.
pub fn slack_phasors(mag: f64) -> [Complex64; 3] {
    let d = 2.0 * std::f64::consts::PI / 3.0;
    [
        Complex64::from_polar(mag, 0.0),
        Complex64::from_polar(mag, -d),
        Complex64::from_polar(mag, d),
    ]
}

/// DG outputs at the middle of their intervals.
pub fn dg_midpoints(f: &Feeder) -> Vec<(f64, f64)> {
    f.dg.iter()
        .map(|u| {
            let (p, q) = dg_power_intervals(u);
            (p.midpoint(), q.midpoint())
        })
        .collect()
}

/// Reactive output matching `p_kw` at the unit's power factor.
pub fn dg_output_at(f: &Feeder, unit: usize, p_kw: f64) -> (f64, f64) {
    let u = &f.dg[unit];
    let t = crate::network::reactive_ratio(u.power_factor);
    (p_kw, if u.lagging { p_kw * t } else { -p_kw * t })
}

/// Net consumption per bus and phase in per-unit for the given DG outputs.
pub fn net_consumption(f: &Feeder, dg: &[(f64, f64)]) -> Vec<[Complex64; 3]> {
    let s_base = f.s_base_kva();
    let mut s: Vec<[Complex64; 3]> = f
        .buses
        .iter()
        .map(|b| {
            let mut row = [Complex64::new(0.0, 0.0); 3];
            for p in b.phases.iter() {
                let (pl, ql) = b.load[p.index()];
                row[p.index()] = Complex64::new(pl, ql) / s_base;
            }
            row
        })
        .collect();
    for (u, &(p, q)) in f.dg.iter().zip(dg) {
        let share = Complex64::new(p, q) / (u.phases.len() as f64 * s_base);
        for ph in u.phases.iter() {
            s[u.bus][ph.index()] -= share;
        }
    }
    s
}

const PF_TOL: f64 = 1e-8;
const PF_MAX_SWEEPS: usize = 100;

/// Three-phase backward/forward sweep with constant-power loads.
pub fn solve_power_flow(
    f: &Feeder,
    dg: &[(f64, f64)],
    v_slack: [Complex64; 3],
) -> Result<TrueState, TruthError> {
    if let Some(b) = f.branches.iter().find(|b| !b.is_thin()) {
        return Err(TruthError::IntervalLines(b.id.clone()));
    }
    if dg.len() != f.dg.len() {
        return Err(TruthError::DgCount {
            expected: f.dg.len(),
            got: dg.len(),
        });
    }
    for (u, &(p, _)) in f.dg.iter().zip(dg) {
        if !u.p_kw.contains_point(p) {
            return Err(TruthError::DgOutOfRange {
                id: u.id.clone(),
                value: p,
                lo: u.p_kw.lo(),
                hi: u.p_kw.hi(),
            });
        }
    }
    let s = net_consumption(f, dg);
    let z: Vec<_> = f.branches.iter().map(|b| b.z_mid()).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut v: Vec<[Complex64; 3]> = f
        .buses
        .iter()
        .map(|b| {
            let mut row = [zero; 3];
            for p in b.phases.iter() {
                row[p.index()] = v_slack[p.index()];
            }
            row
        })
        .collect();
    let mut i = vec![[zero; 3]; f.branches.len()];
    let order = f.bfs_order();
    let mut delta = f64::INFINITY;
    for sweep in 1..=PF_MAX_SWEEPS {
        // Backward: accumulate load currents towards the slack.
        for cur in i.iter_mut() {
            *cur = [zero; 3];
        }
        for &bus in order.iter().rev() {
            let Some(k) = f.inflow(bus) else { continue };
            let mut acc = [zero; 3];
            for p in f.buses[bus].phases.iter() {
                let a = p.index();
                acc[a] = (s[bus][a] / v[bus][a]).conj();
                for &c in f.outflows(bus) {
                    acc[a] += i[c][a];
                }
            }
            i[k] = acc;
        }
        // Forward: voltage drops away from the slack.
        delta = 0.0;
        for &bus in order {
            let Some(k) = f.inflow(bus) else { continue };
            let br = &f.branches[k];
            for p in br.phases.iter() {
                let a = p.index();
                let mut drop = zero;
                for q in br.phases.iter() {
                    drop += z[k][a][q.index()] * i[k][q.index()];
                }
                let new = v[br.from][a] - drop;
                delta = delta.max((new - v[bus][a]).norm());
                v[bus][a] = new;
            }
        }
        if delta < PF_TOL {
            return Ok(TrueState {
                v,
                i,
                dg: dg.to_vec(),
                v_slack,
                sweeps: sweep,
                consumption: s,
            });
        }
    }
    Err(TruthError::Divergence {
        sweeps: PF_MAX_SWEEPS,
        delta,
    })
}

/// Maximum measurement errors by class, as percentages (angles in crad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub pmu_mag_maxpct: f64,
    pub pmu_angle_max_crad: f64,
    pub scada_power_maxpct: f64,
    pub pseudo_power_maxpct: f64,
}

impl Default for ErrorSpec {
    fn default() -> Self {
        ErrorSpec {
            pmu_mag_maxpct: 0.7,
            pmu_angle_max_crad: 0.7,
            scada_power_maxpct: 2.0,
            pseudo_power_maxpct: 10.0,
        }
    }
}

impl ErrorSpec {
    fn valid(&self) -> bool {
        [
            self.pmu_mag_maxpct,
            self.pmu_angle_max_crad,
            self.scada_power_maxpct,
            self.pseudo_power_maxpct,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Relative sigma of PMU magnitudes.
    pub fn pmu_mag_rel_sigma(&self) -> f64 {
        self.pmu_mag_maxpct / 300.0
    }

    /// Sigma of PMU angles in radians.
    pub fn pmu_angle_sigma(&self) -> f64 {
        self.pmu_angle_max_crad / 300.0
    }

    pub fn scada_rel_sigma(&self) -> f64 {
        self.scada_power_maxpct / 300.0
    }

    pub fn pseudo_rel_sigma(&self) -> f64 {
        self.pseudo_power_maxpct / 300.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Gaussian,
    /// Gaussian rejected outside three sigma.
    Truncated,
    /// Exact values; sigmas are still reported for weighting.
    None,
}

/// How DG units enter the measurement set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DgMode {
    /// Metered units get a SCADA-class meter, the rest an output interval.
    #[default]
    Documented,
    /// Every unit is metered.
    Metered,
    /// Every unit gets a forecast with pseudo-measurement error.
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Placements {
    /// Buses with a voltage PMU (all phases).
    #[serde(default)]
    pub pmu_v: Vec<String>,
    /// Branches with a current PMU (all phases).
    #[serde(default)]
    pub pmu_i: Vec<String>,
    /// Branches with a SCADA power-flow meter (all phases).
    #[serde(default)]
    pub scada_flow: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub spec: ErrorSpec,
    pub noise: NoiseMode,
    pub seed: u64,
    pub dg_mode: DgMode,
    /// Sigma (current, p.u.) of the virtual zero-injection rows.
    pub zero_injection_sigma: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            spec: ErrorSpec::default(),
            noise: NoiseMode::Gaussian,
            seed: 0,
            dg_mode: DgMode::Documented,
            zero_injection_sigma: 1e-3,
        }
    }
}

struct Noise {
    mode: NoiseMode,
    seed: u64,
}

impl Noise {
    fn draw(&self, label: &str) -> f64 {
        match self.mode {
            NoiseMode::None => 0.0,
            NoiseMode::Gaussian => rng::normal(&mut rng::stream(self.seed, label), false),
            NoiseMode::Truncated => rng::normal(&mut rng::stream(self.seed, label), true),
        }
    }
}

fn polar_entry(
    truth: Complex64,
    rel: f64,
    ang: f64,
    noise: &Noise,
    label: &str,
) -> (f64, f64, f64, f64) {
    let (mag, theta) = truth.to_polar();
    let sigma_mag = rel * mag.max(POWER_SIGMA_FLOOR);
    let m = mag + sigma_mag * noise.draw(&format!("{label}/mag"));
    let a = theta + ang * noise.draw(&format!("{label}/ang"));
    (m, a, sigma_mag, ang)
}

/// Smallest magnitude (p.u.) a relative error is taken of, so that meters
/// reading zero still carry a positive sigma.
pub const POWER_SIGMA_FLOOR: f64 = 1e-3;

fn power_entry(truth: Complex64, rel: f64, noise: &Noise, label: &str) -> (f64, f64, f64, f64) {
    let sp = rel * truth.re.abs().max(POWER_SIGMA_FLOOR);
    let sq = rel * truth.im.abs().max(POWER_SIGMA_FLOOR);
    let p = truth.re + sp * noise.draw(&format!("{label}/p"));
    let q = truth.im + sq * noise.draw(&format!("{label}/q"));
    (p, q, sp, sq)
}

/// Draw a measurement set around the true state.
pub fn synthesize_measurements(
    f: &Feeder,
    t: &TrueState,
    placements: &Placements,
    opts: &SynthesisOptions,
) -> Result<MeasurementSet, TruthError> {
    if !opts.spec.valid() || !(opts.zero_injection_sigma > 0.0) {
        return Err(TruthError::BadSpec);
    }
    let noise = Noise {
        mode: opts.noise,
        seed: opts.seed,
    };
    let spec = &opts.spec;
    let s_base = f.s_base_kva();
    let mut entries = Vec::new();

    for id in &placements.pmu_v {
        let bus = f
            .bus_index(id)
            .ok_or_else(|| TruthError::UnknownPlacement {
                kind: "bus",
                id: id.clone(),
            })?;
        for p in f.buses[bus].phases.iter() {
            let label = format!("pmuV/{id}/{p}");
            let (mag, angle, sigma_mag, sigma_angle) = polar_entry(
                t.v[bus][p.index()],
                spec.pmu_mag_rel_sigma(),
                spec.pmu_angle_sigma(),
                &noise,
                &label,
            );
            entries.push(Measurement::PmuV {
                bus: id.clone(),
                phase: p,
                mag,
                angle,
                sigma_mag,
                sigma_angle,
            });
        }
    }
    for id in &placements.pmu_i {
        let k = f
            .branch_index(id)
            .ok_or_else(|| TruthError::UnknownPlacement {
                kind: "branch",
                id: id.clone(),
            })?;
        for p in f.branches[k].phases.iter() {
            let label = format!("pmuI/{id}/{p}");
            let (mag, angle, sigma_mag, sigma_angle) = polar_entry(
                t.i[k][p.index()],
                spec.pmu_mag_rel_sigma(),
                spec.pmu_angle_sigma(),
                &noise,
                &label,
            );
            entries.push(Measurement::PmuI {
                branch: id.clone(),
                phase: p,
                mag,
                angle,
                sigma_mag,
                sigma_angle,
            });
        }
    }
    for id in &placements.scada_flow {
        let k = f
            .branch_index(id)
            .ok_or_else(|| TruthError::UnknownPlacement {
                kind: "branch",
                id: id.clone(),
            })?;
        for p in f.branches[k].phases.iter() {
            let label = format!("scada/{id}/{p}");
            let (pv, qv, sigma_p, sigma_q) =
                power_entry(t.flow(f, k, p), spec.scada_rel_sigma(), &noise, &label);
            entries.push(Measurement::ScadaFlow {
                branch: id.clone(),
                phase: p,
                p: pv,
                q: qv,
                sigma_p,
                sigma_q,
            });
        }
    }

    let mut has_dg = vec![[false; 3]; f.buses.len()];
    for (k, u) in f.dg.iter().enumerate() {
        let n = u.phases.len() as f64;
        let (p_true, q_true) = t.dg[k];
        for ph in u.phases.iter() {
            has_dg[u.bus][ph.index()] = true;
            let truth = Complex64::new(p_true, q_true) / (n * s_base);
            let metered = match opts.dg_mode {
                DgMode::Documented => u.metered,
                DgMode::Metered | DgMode::Pseudo => true,
            };
            let bus = f.buses[u.bus].id.clone();
            if metered {
                let rel = if opts.dg_mode == DgMode::Pseudo {
                    spec.pseudo_rel_sigma()
                } else {
                    spec.scada_rel_sigma()
                };
                let label = format!("dg/{}/{ph}", u.id);
                let (p, q, sigma_p, sigma_q) = power_entry(truth, rel, &noise, &label);
                entries.push(Measurement::DgMeter {
                    dg: u.id.clone(),
                    bus,
                    phase: ph,
                    p,
                    q,
                    sigma_p,
                    sigma_q,
                });
            } else {
                let (pi, qi) = dg_power_intervals(u);
                let scale = 1.0 / (n * s_base);
                entries.push(Measurement::DgInterval {
                    dg: u.id.clone(),
                    bus,
                    phase: ph,
                    p: pi.scale(scale),
                    q: qi.scale(scale),
                });
            }
        }
    }

    for (bus, b) in f.buses.iter().enumerate() {
        if bus == f.slack {
            continue;
        }
        for p in b.phases.iter() {
            let (pl, ql) = b.load[p.index()];
            if pl != 0.0 || ql != 0.0 {
                let label = format!("pseudo/{}/{p}", b.id);
                let truth = Complex64::new(pl, ql) / s_base;
                let (pv, qv, sigma_p, sigma_q) =
                    power_entry(truth, spec.pseudo_rel_sigma(), &noise, &label);
                entries.push(Measurement::InjPseudo {
                    bus: b.id.clone(),
                    phase: p,
                    p: pv,
                    q: qv,
                    sigma_p,
                    sigma_q,
                });
            } else if !has_dg[bus][p.index()] {
                entries.push(Measurement::ZeroInjection {
                    bus: b.id.clone(),
                    phase: p,
                });
            }
        }
    }

    Ok(MeasurementSet {
        v_ref: t.v_slack,
        zero_injection_sigma: opts.zero_injection_sigma,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_feeder;

    fn toy2() -> Feeder {
        load_feeder(
            r#"{"base_kV": 1.0, "base_MVA": 3.0, "slack": "1",
                "buses": [{"id": "1", "phases": "A"},
                          {"id": "2", "phases": "A", "load": {"A": [100, 50]}}],
                "branches": [{"id": "1-2", "from": "1", "to": "2", "phases": "A", "units": "pu",
                   "r": [[0.01,0,0],[0,0,0],[0,0,0]], "x": [[0.02,0,0],[0,0,0],[0,0,0]]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_matches_scalar_fixed_point() {
        // Per-phase base is 1000 kVA, so the load is 0.1 + j0.05 p.u.
        let f = toy2();
        let t = solve_power_flow(&f, &[], slack_phasors(1.0)).unwrap();
        let (s, z) = (Complex64::new(0.1, 0.05), Complex64::new(0.01, 0.02));
        let mut v = Complex64::new(1.0, 0.0);
        for _ in 0..200 {
            v = Complex64::new(1.0, 0.0) - z * (s / v).conj();
        }
        assert!((t.v[1][0] - v).norm() < 1e-8, "{:?} vs {v:?}", t.v[1][0]);
        assert!(t.kcl_residual(&f) < 1e-8);
    }

    #[test]
    fn unloaded_feeder_is_flat() {
        let mut f = toy2();
        f.buses[1].load = [(0.0, 0.0); 3];
        let vs = slack_phasors(1.02);
        let t = solve_power_flow(&f, &[], vs).unwrap();
        assert_eq!(t.v[1][0], vs[0]);
        assert_eq!(t.i[0][0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn divergence_is_reported() {
        let mut f = toy2();
        f.buses[1].load = [(1.0e5, 5.0e4), (0.0, 0.0), (0.0, 0.0)];
        assert!(matches!(
            solve_power_flow(&f, &[], slack_phasors(1.0)),
            Err(TruthError::Divergence { .. })
        ));
    }

    #[test]
    fn synthesis_is_deterministic_and_exact_without_noise() {
        let f = toy2();
        let t = solve_power_flow(&f, &[], slack_phasors(1.0)).unwrap();
        let pl = Placements {
            pmu_v: vec!["1".into()],
            pmu_i: vec!["1-2".into()],
            scada_flow: vec![],
        };
        let opts = SynthesisOptions {
            seed: 9,
            ..Default::default()
        };
        let a = synthesize_measurements(&f, &t, &pl, &opts).unwrap();
        let b = synthesize_measurements(&f, &t, &pl, &opts).unwrap();
        assert_eq!(a, b);
        let exact = synthesize_measurements(
            &f,
            &t,
            &pl,
            &SynthesisOptions {
                noise: NoiseMode::None,
                ..opts
            },
        )
        .unwrap();
        match &exact.entries[0] {
            Measurement::PmuV { mag, sigma_mag, .. } => {
                assert_eq!(*mag, 1.0);
                assert!((sigma_mag - 0.7 / 300.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = Placements {
            pmu_v: vec!["nope".into()],
            ..Default::default()
        };
        assert!(synthesize_measurements(&f, &t, &bad, &opts).is_err());
    }
}
