//! Enclosure methods for `[A][X] = [B]` behind a common trait, selectable by
//! name through [`SolverRegistry`].

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use nalgebra::DMatrix;

use crate::interval::{
    div_up, point_matvec, point_times_interval_matrix, point_times_interval_matrix_midrad,
    sub_down, DenseIntervalMatrix, Interval, IntervalError, IntervalMatrix, IntervalVector,
    MidRadMatrix, STEPPED_WORK_LIMIT,
};

mod hull;
mod ige;
mod krawczyk;

pub use hull::{hull_oracle, HULL_ENTRY_LIMIT};
pub use ige::{ige_solve, ige_solve_preconditioned, iko_pc_solve, iko_solve};
pub use krawczyk::{krawczyk_solve, mko_solve};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("midpoint matrix is singular: {0}")]
    Singular(String),
    #[error("preconditioning failed: beta = ||I - CA|| = {beta} >= 1, contraction not guaranteed")]
    Contraction { beta: f64 },
    #[error("empty intersection at iteration {iteration}, component {component}: inputs admit no common enclosure")]
    Inconsistent { iteration: usize, component: usize },
    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("elimination breakdown: pivot {pivot} in column {column} contains zero")]
    Breakdown { column: usize, pivot: String },
    #[error("elimination overflow in column {column}")]
    Overflow { column: usize },
    #[error("hull oracle limited to {limit} interval entries, system has {entries}")]
    TooLarge { entries: usize, limit: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown solver {0:?}")]
    Unknown(String),
}

impl From<IntervalError> for SolverError {
    fn from(e: IntervalError) -> Self {
        SolverError::Dimension(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once successive iterates differ by at most this (max endpoint shift).
    pub eps: f64,
    pub max_iter: usize,
    /// Precomputed `Mid[A]^-1`; formed by LU when absent.
    pub preconditioner: Option<Arc<DMatrix<f64>>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps: 1e-4,
            max_iter: 1000,
            preconditioner: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub method: String,
    pub solution: IntervalVector,
    pub iterations: usize,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    /// Preconditioner, `CA`, `CB` and the starting box.
    pub time_initial: Duration,
    /// All iterations together.
    pub time_iterate: Duration,
    pub converged: bool,
}

impl SolverReport {
    /// Iteration time averaged over operator applications, which include
    /// the final one that confirms the stopping rule.
    pub fn time_per_iteration(&self) -> Duration {
        if self.time_iterate.is_zero() {
            Duration::ZERO
        } else {
            self.time_iterate / (self.iterations as u32 + 1)
        }
    }

    pub fn total_time(&self) -> Duration {
        self.time_initial + self.time_iterate
    }
}

pub trait IntervalSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError>;
}

#[derive(Debug, Clone)]
enum IterationMatrix {
    Stepped(DenseIntervalMatrix),
    MidRad(MidRadMatrix),
}

/// Preconditioner `C`, `E = I - CA` and `beta = ||E||`.
#[derive(Debug, Clone)]
pub struct Preconditioned {
    pub c: Arc<DMatrix<f64>>,
    e: IterationMatrix,
    pub beta: f64,
}

impl Preconditioned {
    /// `E x` with `E = I - CA`.
    pub fn apply_e(&self, x: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        match &self.e {
            IterationMatrix::Stepped(e) => e.matvec(x),
            IterationMatrix::MidRad(e) => e.matvec(x),
        }
    }

    /// `E` as a dense interval matrix.
    pub fn e_dense(&self) -> DenseIntervalMatrix {
        match &self.e {
            IterationMatrix::Stepped(e) => e.clone(),
            IterationMatrix::MidRad(e) => e.to_dense(),
        }
    }

    pub fn e_entry(&self, i: usize, j: usize) -> Interval {
        match &self.e {
            IterationMatrix::Stepped(e) => e.get(i, j),
            IterationMatrix::MidRad(e) => e.get(i, j),
        }
    }
}

pub(crate) fn check_square(a: &IntervalMatrix, b: &IntervalVector) -> Result<(), SolverError> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(SolverError::Dimension(format!(
            "{}x{} matrix with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    Ok(())
}

/// Compute `C`, `I - CA` and `beta`; fails when `beta >= 1`.
pub fn precondition(
    a: &IntervalMatrix,
    supplied: Option<&Arc<DMatrix<f64>>>,
) -> Result<Preconditioned, SolverError> {
    let n = a.rows();
    let c = match supplied {
        Some(c) if c.nrows() == n && c.ncols() == n => Arc::clone(c),
        Some(c) => {
            return Err(SolverError::Dimension(format!(
                "preconditioner is {}x{}, system is {n}x{n}",
                c.nrows(),
                c.ncols()
            )))
        }
        None => {
            let inv = a.midpoint().lu().try_inverse().ok_or_else(|| {
                SolverError::Singular(format!("LU of the {n}x{n} midpoint failed"))
            })?;
            if inv.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::Singular(
                    "inverse has non-finite entries".into(),
                ));
            }
            Arc::new(inv)
        }
    };
    // Large products run in midpoint/radius form and stay there.
    let (e, beta) = if n * a.nnz() > STEPPED_WORK_LIMIT {
        let mut e = point_times_interval_matrix_midrad(&c, a)?;
        e.identity_minus();
        let beta = e.inf_norm();
        (IterationMatrix::MidRad(e), beta)
    } else {
        let mut e = point_times_interval_matrix(&c, a)?;
        e.identity_minus();
        let beta = e.inf_norm();
        (IterationMatrix::Stepped(e), beta)
    };
    if !(beta < 1.0) {
        return Err(SolverError::Contraction { beta });
    }
    Ok(Preconditioned { c, e, beta })
}

/// Symmetric starting box `[-alpha, alpha]^n` with `alpha = ||CB|| / (1 - beta)`.
pub fn initial_box(
    pre: &Preconditioned,
    b: &IntervalVector,
) -> Result<(IntervalVector, f64), SolverError> {
    if !(pre.beta < 1.0) {
        return Err(SolverError::Contraction { beta: pre.beta });
    }
    let cb = point_matvec(&pre.c, b)?;
    let alpha = div_up(cb.inf_norm(), sub_down(1.0, pre.beta));
    let side = crate::interval::Interval::new(-alpha, alpha)
        .map_err(|_| SolverError::Contraction { beta: pre.beta })?;
    Ok((IntervalVector::new(vec![side; b.len()]), alpha))
}

struct Mko;
struct Krawczyk;
struct Ige;
struct Iko;
struct IkoPc;
struct Hull;

impl IntervalSolver for Mko {
    fn name(&self) -> &'static str {
        "mko"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        mko_solve(a, b, opts)
    }
}

impl IntervalSolver for Krawczyk {
    fn name(&self) -> &'static str {
        "krawczyk"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        krawczyk_solve(a, b, opts, None)
    }
}

impl IntervalSolver for Ige {
    fn name(&self) -> &'static str {
        "ige"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        _opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        let t0 = std::time::Instant::now();
        let solution = ige_solve(a, b)?;
        Ok(SolverReport {
            method: "ige".into(),
            solution,
            iterations: 0,
            beta: None,
            alpha: None,
            time_initial: t0.elapsed(),
            time_iterate: Duration::ZERO,
            converged: true,
        })
    }
}

impl IntervalSolver for Iko {
    fn name(&self) -> &'static str {
        "iko"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        iko_solve(a, b, opts)
    }
}

impl IntervalSolver for IkoPc {
    fn name(&self) -> &'static str {
        "iko-pc"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        iko_pc_solve(a, b, opts)
    }
}

impl IntervalSolver for Hull {
    fn name(&self) -> &'static str {
        "hull"
    }
    fn solve(
        &self,
        a: &IntervalMatrix,
        b: &IntervalVector,
        _opts: &SolveOptions,
    ) -> Result<SolverReport, SolverError> {
        let t0 = std::time::Instant::now();
        let solution = hull_oracle(a, b)?;
        Ok(SolverReport {
            method: "hull".into(),
            solution,
            iterations: 0,
            beta: None,
            alpha: None,
            time_initial: t0.elapsed(),
            time_iterate: Duration::ZERO,
            converged: true,
        })
    }
}

/// Solvers keyed by name.
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn IntervalSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            solvers: BTreeMap::new(),
        }
    }

    /// mko, krawczyk, ige, iko, iko-pc and hull.
    pub fn with_defaults() -> Self {
        let mut r = SolverRegistry::empty();
        r.register(Box::new(Mko));
        r.register(Box::new(Krawczyk));
        r.register(Box::new(Ige));
        r.register(Box::new(Iko));
        r.register(Box::new(IkoPc));
        r.register(Box::new(Hull));
        r
    }

    /// Later registrations replace earlier ones of the same name.
    pub fn register(&mut self, s: Box<dyn IntervalSolver>) {
        self.solvers.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn IntervalSolver, SolverError> {
        self.solvers
            .get(name.to_ascii_lowercase().as_str())
            .map(|b| b.as_ref())
            .ok_or_else(|| SolverError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.keys().copied().collect()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        SolverRegistry::with_defaults()
    }
}
