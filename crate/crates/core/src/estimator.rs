//! Branch-current WLS state estimator.
//!
//! The state is the slack voltage and every branch current in rectangular
//! form. With equivalent currents at a fixed reference voltage every
//! measurement is linear in the state, `z = Hx`, and `H` does not depend on
//! `x`.

use num_complex::Complex64;

use crate::interval::{box_magnitude, Interval, IntervalMatrix, IntervalVector};
use crate::measurement::{MeasurementError, MeasurementModel, RowSpec, Target, WeightMatrix};
use crate::network::{path_indices, Feeder, Phase, PhaseSet};
use crate::truth::TrueState;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("network is unobservable with these measurements; deficient states: {}", columns.join(", "))]
    Unobservable { columns: Vec<String> },
    #[error("point estimator needs point line parameters")]
    NotThin,
    #[error("iterative WLS did not converge in {iterations} iterations (last step {delta:e})")]
    Divergence { iterations: usize, delta: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("voltage target on bus {0} outside the slack phases")]
    Internal(String),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Position of every state variable.
///
/// Order: slack `v_r` per phase, slack `v_x` per phase, then the real parts
/// of all branch currents (branch order, phase order), then their imaginary
/// parts.
#[derive(Debug, Clone, PartialEq)]
pub struct StateIndex {
    slack_phases: PhaseSet,
    offsets: Vec<usize>,
    phases: Vec<PhaseSet>,
    nb: usize,
}

impl StateIndex {
    pub fn new(f: &Feeder) -> StateIndex {
        let mut offsets = Vec::with_capacity(f.branches.len());
        let mut nb = 0;
        for b in &f.branches {
            offsets.push(nb);
            nb += b.phases.len();
        }
        StateIndex {
            slack_phases: f.buses[f.slack].phases,
            offsets,
            phases: f.branches.iter().map(|b| b.phases).collect(),
            nb,
        }
    }

    fn ns(&self) -> usize {
        self.slack_phases.len()
    }

    pub fn n(&self) -> usize {
        2 * self.ns() + 2 * self.nb
    }

    fn pos(set: PhaseSet, p: Phase) -> Option<usize> {
        set.contains(p)
            .then(|| set.iter().take_while(|q| *q != p).count())
    }

    pub fn vr(&self, p: Phase) -> Option<usize> {
        Self::pos(self.slack_phases, p)
    }

    pub fn vx(&self, p: Phase) -> Option<usize> {
        Self::pos(self.slack_phases, p).map(|k| self.ns() + k)
    }

    pub fn ir(&self, branch: usize, p: Phase) -> Option<usize> {
        Self::pos(self.phases[branch], p).map(|k| 2 * self.ns() + self.offsets[branch] + k)
    }

    pub fn ix(&self, branch: usize, p: Phase) -> Option<usize> {
        Self::pos(self.phases[branch], p)
            .map(|k| 2 * self.ns() + self.nb + self.offsets[branch] + k)
    }

    /// Human-readable name of state `j`.
    pub fn label(&self, f: &Feeder, j: usize) -> String {
        let ns = self.ns();
        let slack = &f.buses[f.slack].id;
        if j < 2 * ns {
            let p = self.slack_phases.iter().nth(j % ns).expect("slack phase");
            return format!("{}[{slack}.{p}]", if j < ns { "Vr" } else { "Vx" });
        }
        let rest = j - 2 * ns;
        let (part, k) = if rest < self.nb {
            ("Ir", rest)
        } else {
            ("Ix", rest - self.nb)
        };
        let b = self.offsets.partition_point(|&o| o <= k) - 1;
        let p = self.phases[b]
            .iter()
            .nth(k - self.offsets[b])
            .expect("branch phase");
        format!("{part}[{}.{p}]", f.branches[b].id)
    }
}

/// Measurement Jacobian with its row and column maps.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSystem {
    /// `[H1; H2]`, m x n.
    pub h: IntervalMatrix,
    pub index: StateIndex,
    pub m1: usize,
    pub m2: usize,
    pub rows: Vec<RowSpec>,
    pub row_labels: Vec<String>,
}

impl JacobianSystem {
    pub fn n(&self) -> usize {
        self.index.n()
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }
}

/// Build `[H]` for the model's rows. Interval line parameters give
/// interval entries.
pub fn build_jacobian(
    f: &Feeder,
    model: &MeasurementModel,
) -> Result<JacobianSystem, EstimatorError> {
    let idx = StateIndex::new(f);
    let n = idx.n();
    let mut t = Vec::new();
    let one = Interval::ONE;
    for (r, spec) in model.rows.iter().enumerate() {
        let im = spec.imag;
        match model.channels[spec.channel].target {
            Target::Voltage { bus, phase: a } => {
                let col = if im { idx.vx(a) } else { idx.vr(a) };
                let col = col.ok_or_else(|| EstimatorError::Internal(f.buses[bus].id.clone()))?;
                t.push((r, col, one));
                for p in path_indices(f, bus) {
                    let br = &f.branches[p];
                    for phi in br.phases.iter() {
                        let rr = br.r[a.index()][phi.index()];
                        let xx = br.x[a.index()][phi.index()];
                        let (ci, cx) = (idx.ir(p, phi).unwrap(), idx.ix(p, phi).unwrap());
                        if im {
                            t.push((r, ci, -xx));
                            t.push((r, cx, -rr));
                        } else {
                            t.push((r, ci, -rr));
                            t.push((r, cx, xx));
                        }
                    }
                }
            }
            Target::Current { branch, phase } => {
                let col = if im {
                    idx.ix(branch, phase)
                } else {
                    idx.ir(branch, phase)
                };
                t.push((r, col.expect("validated phase"), one));
            }
            Target::Injection {
                bus,
                phase,
                consumption,
            } => {
                let s = if consumption { 1.0 } else { -1.0 };
                let slot = |k: usize| {
                    if im {
                        idx.ix(k, phase)
                    } else {
                        idx.ir(k, phase)
                    }
                };
                let inflow = f.inflow(bus).expect("injection rows exclude the slack");
                t.push((
                    r,
                    slot(inflow).expect("bus phase on inflow"),
                    Interval::point(s),
                ));
                for &k in f.outflows(bus) {
                    if let Some(c) = slot(k) {
                        t.push((r, c, Interval::point(-s)));
                    }
                }
            }
        }
    }
    let m = model.rows.len();
    let h = IntervalMatrix::from_triplets(m.max(1), n, t)
        .map_err(|e| EstimatorError::Internal(e.to_string()))?;
    Ok(JacobianSystem {
        h,
        index: idx,
        m1: model.m1,
        m2: model.m2,
        rows: model.rows.clone(),
        row_labels: (0..m).map(|r| model.row_label(r)).collect(),
    })
}

/// Cholesky factor of the gain matrix `H^T W H`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    n: usize,
    /// Row-major lower triangle.
    l: Vec<f64>,
}

impl NormalEquations {
    pub fn new(j: &JacobianSystem, w: &[f64], f: &Feeder) -> Result<Self, EstimatorError> {
        if !j.h.is_thin() {
            return Err(EstimatorError::NotThin);
        }
        if w.len() != j.m() {
            return Err(EstimatorError::Dimension {
                expected: j.m(),
                got: w.len(),
            });
        }
        let n = j.n();
        let mut g = vec![0.0; n * n];
        for (r, &wr) in w.iter().enumerate() {
            let row: Vec<(usize, f64)> = j.h.row(r).map(|(c, v)| (c, v.lo())).collect();
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    if b <= a {
                        g[a * n + b] += wr * va * vb;
                    }
                }
            }
        }
        let mut deficient = Vec::new();
        for c in 0..n {
            let orig = g[c * n + c];
            let mut d = orig;
            for k in 0..c {
                d -= g[c * n + k] * g[c * n + k];
            }
            if !(d > 1e-12 * orig.max(f64::MIN_POSITIVE)) {
                deficient.push(j.index.label(f, c));
                g[c * n + c] = 1.0;
                for i in c + 1..n {
                    g[i * n + c] = 0.0;
                }
                continue;
            }
            let lcc = d.sqrt();
            g[c * n + c] = lcc;
            for i in c + 1..n {
                let mut s = g[i * n + c];
                for k in 0..c {
                    s -= g[i * n + k] * g[c * n + k];
                }
                g[i * n + c] = s / lcc;
            }
        }
        if !deficient.is_empty() {
            return Err(EstimatorError::Unobservable { columns: deficient });
        }
        Ok(NormalEquations { n, l: g })
    }

    /// Solve `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// `H^T W z` for thin `H`.
fn weighted_rhs(j: &JacobianSystem, w: &[f64], z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; j.n()];
    for r in 0..j.m() {
        let wz = w[r] * z[r];
        for (c, v) in j.h.row(r) {
            out[c] += v.lo() * wz;
        }
    }
    out
}

/// One-shot WLS: `x = (H^T W H)^-1 H^T W z`.
pub fn solve_linear_wls(
    f: &Feeder,
    j: &JacobianSystem,
    z: &[f64],
    w: &WeightMatrix,
) -> Result<Vec<f64>, EstimatorError> {
    if z.len() != j.m() {
        return Err(EstimatorError::Dimension {
            expected: j.m(),
            got: z.len(),
        });
    }
    let w = w.diagonal();
    let ne = NormalEquations::new(j, &w, f)?;
    Ok(ne.solve(&weighted_rhs(j, &w, z)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub voltages: Vec<[Complex64; 3]>,
}

pub const WLS_MAX_ITER: usize = 50;

/// WLS with equivalent currents recomputed from the swept bus voltages
/// after every solve, until the state step falls below `tol`.
pub fn solve_iterative_wls(
    f: &Feeder,
    model: &MeasurementModel,
    w: &WeightMatrix,
    tol: f64,
) -> Result<IterativeSolution, EstimatorError> {
    if f.has_interval_lines() {
        return Err(EstimatorError::NotThin);
    }
    let j = build_jacobian(f, model)?;
    let wd = w.diagonal();
    let ne = NormalEquations::new(&j, &wd, f)?;
    let mut x = ne.solve(&weighted_rhs(&j, &wd, &model.z_point()));
    let mut delta = f64::INFINITY;
    for it in 1..=WLS_MAX_ITER {
        let v = states_to_bus_voltages(&x, f, &j.index)?;
        let z = model.z_point_at(f, &v);
        let next = ne.solve(&weighted_rhs(&j, &wd, &z));
        delta = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if delta < tol {
            let voltages = states_to_bus_voltages(&x, f, &j.index)?;
            return Ok(IterativeSolution {
                x,
                iterations: it,
                voltages,
            });
        }
    }
    Err(EstimatorError::Divergence {
        iterations: WLS_MAX_ITER,
        delta,
    })
}

/// Forward sweep from the slack voltage through the branch currents.
pub fn states_to_bus_voltages(
    x: &[f64],
    f: &Feeder,
    idx: &StateIndex,
) -> Result<Vec<[Complex64; 3]>, EstimatorError> {
    if x.len() != idx.n() {
        return Err(EstimatorError::Dimension {
            expected: idx.n(),
            got: x.len(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![[zero; 3]; f.buses.len()];
    for p in f.buses[f.slack].phases.iter() {
        v[f.slack][p.index()] = Complex64::new(x[idx.vr(p).unwrap()], x[idx.vx(p).unwrap()]);
    }
    for &bus in f.bfs_order() {
        let Some(k) = f.inflow(bus) else { continue };
        let br = &f.branches[k];
        let z = br.z_mid();
        for a in br.phases.iter() {
            let mut drop = zero;
            for phi in br.phases.iter() {
                let i = Complex64::new(x[idx.ir(k, phi).unwrap()], x[idx.ix(k, phi).unwrap()]);
                drop += z[a.index()][phi.index()] * i;
            }
            v[bus][a.index()] = v[br.from][a.index()] - drop;
        }
    }
    Ok(v)
}

/// Every (bus, phase) pair in bus order.
pub fn bus_phases(f: &Feeder) -> Vec<(usize, Phase)> {
    f.buses
        .iter()
        .enumerate()
        .flat_map(|(k, b)| b.phases.iter().map(move |p| (k, p)))
        .collect()
}

/// Interval bus voltages in `bus_phases` order.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVoltages {
    pub at: Vec<(usize, Phase)>,
    pub re: IntervalVector,
    pub im: IntervalVector,
    pub mag: IntervalVector,
}

/// Interval forward sweep: `V_k = V_slack - sum over the slack path of z_p i_p`
/// in interval arithmetic, with magnitude bounds from the rectangular box.
pub fn states_to_bus_voltage_intervals(
    x: &IntervalVector,
    f: &Feeder,
    idx: &StateIndex,
) -> Result<IntervalVoltages, EstimatorError> {
    if x.len() != idx.n() {
        return Err(EstimatorError::Dimension {
            expected: idx.n(),
            got: x.len(),
        });
    }
    let zero = (Interval::ZERO, Interval::ZERO);
    let mut v = vec![[zero; 3]; f.buses.len()];
    for p in f.buses[f.slack].phases.iter() {
        v[f.slack][p.index()] = (x[idx.vr(p).unwrap()], x[idx.vx(p).unwrap()]);
    }
    for &bus in f.bfs_order() {
        let Some(k) = f.inflow(bus) else { continue };
        let br = &f.branches[k];
        for a in br.phases.iter() {
            let (mut re, mut im) = v[br.from][a.index()];
            for phi in br.phases.iter() {
                let r = br.r[a.index()][phi.index()];
                let xx = br.x[a.index()][phi.index()];
                let ir = x[idx.ir(k, phi).unwrap()];
                let ix = x[idx.ix(k, phi).unwrap()];
                re = re - (r * ir - xx * ix);
                im = im - (xx * ir + r * ix);
            }
            v[bus][a.index()] = (re, im);
        }
    }
    let at = bus_phases(f);
    let re: IntervalVector = at.iter().map(|&(b, p)| v[b][p.index()].0).collect();
    let im: IntervalVector = at.iter().map(|&(b, p)| v[b][p.index()].1).collect();
    let mag = re
        .iter()
        .zip(im.iter())
        .map(|(r, i)| box_magnitude(r, i))
        .collect();
    Ok(IntervalVoltages { at, re, im, mag })
}

/// Flatten per-bus voltages into `bus_phases` order.
pub fn flatten_voltages(f: &Feeder, v: &[[Complex64; 3]]) -> Vec<Complex64> {
    bus_phases(f)
        .iter()
        .map(|&(b, p)| v[b][p.index()])
        .collect()
}

/// State vector of a power-flow solution.
pub fn states_from_truth(t: &TrueState, f: &Feeder, idx: &StateIndex) -> Vec<f64> {
    let mut x = vec![0.0; idx.n()];
    for p in f.buses[f.slack].phases.iter() {
        x[idx.vr(p).unwrap()] = t.v[f.slack][p.index()].re;
        x[idx.vx(p).unwrap()] = t.v[f.slack][p.index()].im;
    }
    for (k, b) in f.branches.iter().enumerate() {
        for p in b.phases.iter() {
            x[idx.ir(k, p).unwrap()] = t.i[k][p.index()].re;
            x[idx.ix(k, p).unwrap()] = t.i[k][p.index()].im;
        }
    }
    x
}

/// WLS objective `(z - Hx)^T W (z - Hx)` for thin `H`.
pub fn wls_objective(j: &JacobianSystem, w: &[f64], z: &[f64], x: &[f64]) -> f64 {
    let hx = j.h.matvec_points(x).expect("conformable");
    hx.iter()
        .zip(z)
        .zip(w)
        .map(|((h, z), w)| w * (z - h.midpoint()).powi(2))
        .sum()
}
