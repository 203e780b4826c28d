//! Interval Gaussian elimination and the Krawczyk iteration seeded by it.

use std::time::Instant;

use crate::interval::{
    point_matvec, DenseIntervalMatrix, Interval, IntervalMatrix, IntervalVector,
};

use super::krawczyk::krawczyk_named;
use super::{check_square, precondition, SolveOptions, SolverError, SolverReport};

/// Forward elimination with partial pivoting on midpoint magnitude, then
/// back substitution. Works on a dense copy; structurally zero entries are
/// skipped, so sparse inputs stay cheap until fill-in.
pub fn ige_solve(a: &IntervalMatrix, b: &IntervalVector) -> Result<IntervalVector, SolverError> {
    check_square(a, b)?;
    eliminate(a.to_dense(), b.clone())
}

/// Elimination on the preconditioned system `(CA) X = CB`.
pub fn ige_solve_preconditioned(
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
) -> Result<IntervalVector, SolverError> {
    check_square(a, b)?;
    let pre = precondition(a, opts.preconditioner.as_ref())?;
    let mut ca = pre.e_dense();
    ca.identity_minus();
    eliminate(ca, point_matvec(&pre.c, b)?)
}

fn eliminate(
    mut m: DenseIntervalMatrix,
    mut rhs: IntervalVector,
) -> Result<IntervalVector, SolverError> {
    let n = m.rows();
    let mut nz: Vec<usize> = Vec::with_capacity(n);

    for k in 0..n {
        let p = (k..n)
            .filter(|&i| m[(i, k)] != Interval::ZERO)
            .max_by(|&i, &j| {
                m[(i, k)]
                    .midpoint()
                    .abs()
                    .total_cmp(&m[(j, k)].midpoint().abs())
            })
            .ok_or_else(|| SolverError::Breakdown {
                column: k,
                pivot: Interval::ZERO.to_string(),
            })?;
        m.swap_rows(k, p);
        rhs.swap(k, p);
        let piv = m[(k, k)];
        if piv.contains_zero() {
            return Err(SolverError::Breakdown {
                column: k,
                pivot: piv.to_string(),
            });
        }
        nz.clear();
        nz.extend((k + 1..n).filter(|&j| m[(k, j)] != Interval::ZERO));
        for i in k + 1..n {
            let aik = m[(i, k)];
            if aik == Interval::ZERO {
                continue;
            }
            let l = aik.checked_div(&piv).map_err(|_| SolverError::Breakdown {
                column: k,
                pivot: piv.to_string(),
            })?;
            for &j in &nz {
                let v = m[(i, j)] - l * m[(k, j)];
                m[(i, j)] = v;
            }
            m[(i, k)] = Interval::ZERO;
            rhs[i] = rhs[i] - l * rhs[k];
            if !rhs[i].lo().is_finite() || !rhs[i].hi().is_finite() {
                return Err(SolverError::Overflow { column: k });
            }
        }
    }

    let mut x = vec![Interval::ZERO; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for (j, xj) in x.iter().enumerate().skip(k + 1) {
            let akj = m[(k, j)];
            if akj != Interval::ZERO {
                s = s - akj * *xj;
            }
        }
        x[k] = s
            .checked_div(&m[(k, k)])
            .map_err(|_| SolverError::Breakdown {
                column: k,
                pivot: m[(k, k)].to_string(),
            })?;
        if !x[k].lo().is_finite() || !x[k].hi().is_finite() {
            return Err(SolverError::Overflow { column: k });
        }
    }
    Ok(IntervalVector::new(x))
}

/// Krawczyk iteration started from the elimination result. The elimination
/// time is part of `time_initial`.
pub fn iko_solve(
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
) -> Result<SolverReport, SolverError> {
    let t0 = Instant::now();
    let seed = ige_solve(a, b)?;
    let t_ige = t0.elapsed();
    let mut r = krawczyk_named("iko", a, b, opts, Some(&seed))?;
    r.time_initial += t_ige;
    Ok(r)
}

/// As [`iko_solve`], but seeded by elimination on the preconditioned system,
/// which survives where plain elimination breaks down.
pub fn iko_pc_solve(
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
) -> Result<SolverReport, SolverError> {
    let t0 = Instant::now();
    let seed = ige_solve_preconditioned(a, b, opts)?;
    let t_ige = t0.elapsed();
    let mut r = krawczyk_named("iko-pc", a, b, opts, Some(&seed))?;
    r.time_initial += t_ige;
    Ok(r)
}
