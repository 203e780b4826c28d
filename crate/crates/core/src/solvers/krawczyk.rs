//! Krawczyk iteration and its residual form.

use std::time::Instant;

use crate::interval::{point_matvec, IntervalMatrix, IntervalVector};

use super::{check_square, initial_box, precondition, SolveOptions, SolverError, SolverReport};

fn add(a: &IntervalVector, b: &IntervalVector) -> IntervalVector {
    a.iter().zip(b.iter()).map(|(x, y)| *x + *y).collect()
}

fn intersect_at(
    a: &IntervalVector,
    b: &IntervalVector,
    iteration: usize,
) -> Result<IntervalVector, SolverError> {
    a.iter()
        .zip(b.iter())
        .enumerate()
        .map(|(k, (x, y))| {
            x.intersect(y).ok_or(SolverError::Inconsistent {
                iteration,
                component: k,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(IntervalVector::new)
}

/// Residual form: iterate on the offset `d` from the point solution
/// `X_s = C Mid[B]`,
///
/// ```text
/// d <- (C (B - A X_s) + (I - CA) d) ∩ d
/// ```
///
/// starting from `d = X0 - X_s`, and return `X_s + d`. The reported count is
/// the index `i` at which `||d(i+1) - d(i)|| <= eps` first holds, so a box
/// that is already a fixed point takes zero iterations.
pub fn mko_solve(
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
) -> Result<SolverReport, SolverError> {
    check_square(a, b)?;
    let t0 = Instant::now();
    let pre = precondition(a, opts.preconditioner.as_ref())?;
    let (x0, alpha) = initial_box(&pre, b)?;
    let xs: Vec<f64> = (&*pre.c * nalgebra::DVector::from_vec(b.midpoints()))
        .iter()
        .copied()
        .collect();
    let r: IntervalVector = b
        .iter()
        .zip(a.matvec_points(&xs)?.iter())
        .map(|(bi, ax)| *bi - *ax)
        .collect();
    let cr = point_matvec(&pre.c, &r)?;
    let mut d = x0.sub_points(&xs);
    let time_initial = t0.elapsed();

    let t1 = Instant::now();
    let mut step = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let next = intersect_at(&add(&cr, &pre.apply_e(&d)?), &d, it)?;
        debug_assert!(next.is_subset(&d));
        step = next.distance(&d);
        d = next;
        if step <= opts.eps {
            return Ok(SolverReport {
                method: "mko".into(),
                solution: d.add_points(&xs),
                iterations: it - 1,
                beta: Some(pre.beta),
                alpha: Some(alpha),
                time_initial,
                time_iterate: t1.elapsed(),
                converged: true,
            });
        }
    }
    Err(SolverError::NonConvergence {
        iterations: it,
        last_step: step,
    })
}

/// Plain Krawczyk: `X <- (CB + (I - CA) X) ∩ X` from `x0`, or from the
/// symmetric starting box when `x0` is `None`.
pub fn krawczyk_solve(
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
    x0: Option<&IntervalVector>,
) -> Result<SolverReport, SolverError> {
    krawczyk_named("krawczyk", a, b, opts, x0)
}

pub(super) fn krawczyk_named(
    method: &str,
    a: &IntervalMatrix,
    b: &IntervalVector,
    opts: &SolveOptions,
    x0: Option<&IntervalVector>,
) -> Result<SolverReport, SolverError> {
    check_square(a, b)?;
    let t0 = Instant::now();
    let pre = precondition(a, opts.preconditioner.as_ref())?;
    let cb = point_matvec(&pre.c, b)?;
    let (mut x, alpha) = match x0 {
        Some(x0) if x0.len() != b.len() => {
            return Err(SolverError::Dimension(format!(
                "starting box of length {} for a system of dimension {}",
                x0.len(),
                b.len()
            )))
        }
        Some(x0) => (x0.clone(), None),
        None => {
            let (bx, alpha) = initial_box(&pre, b)?;
            (bx, Some(alpha))
        }
    };
    let time_initial = t0.elapsed();

    let t1 = Instant::now();
    let mut step = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let next = intersect_at(&add(&cb, &pre.apply_e(&x)?), &x, it)?;
        debug_assert!(next.is_subset(&x));
        step = next.distance(&x);
        x = next;
        if step <= opts.eps {
            return Ok(SolverReport {
                method: method.into(),
                solution: x,
                iterations: it - 1,
                beta: Some(pre.beta),
                alpha,
                time_initial,
                time_iterate: t1.elapsed(),
                converged: true,
            });
        }
    }
    Err(SolverError::NonConvergence {
        iterations: it,
        last_step: step,
    })
}
