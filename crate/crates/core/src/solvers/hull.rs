//! Vertex enumeration for small systems, used as a containment reference.

use nalgebra::DMatrix;

use crate::interval::{Interval, IntervalMatrix, IntervalVector};

use super::{check_square, SolverError};

/// Largest number of non-degenerate entries across `[A]` and `[B]`.
pub const HULL_ENTRY_LIMIT: usize = 20;

/// Componentwise min/max of `a^-1 b` over every endpoint matrix `a` of
/// `[A]`. For each such `a` the range over `[B]` is exact: each component
/// of `a^-1 b` is linear in `b`, so its extremes sit at endpoints picked by
/// the sign of the corresponding inverse entry. Computed in plain floating
/// point; callers compare with a small slack.
pub fn hull_oracle(a: &IntervalMatrix, b: &IntervalVector) -> Result<IntervalVector, SolverError> {
    check_square(a, b)?;
    let n = a.rows();
    let free: Vec<(usize, usize, Interval)> =
        a.triplets().filter(|(_, _, v)| !v.is_thin()).collect();
    let entries = free.len() + b.iter().filter(|v| !v.is_thin()).count();
    if entries > HULL_ENTRY_LIMIT {
        return Err(SolverError::TooLarge {
            entries,
            limit: HULL_ENTRY_LIMIT,
        });
    }
    let base = a.midpoint();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for mask in 0u32..(1u32 << free.len()) {
        let mut m: DMatrix<f64> = base.clone();
        for (bit, &(i, j, v)) in free.iter().enumerate() {
            m[(i, j)] = if mask >> bit & 1 == 1 { v.hi() } else { v.lo() };
        }
        let inv = m
            .lu()
            .try_inverse()
            .ok_or_else(|| SolverError::Singular(format!("vertex system {mask:#x} is singular")))?;
        for r in 0..n {
            let (mut l, mut h) = (0.0, 0.0);
            for (c, bc) in b.iter().enumerate() {
                let g = inv[(r, c)];
                let (p, q) = (g * bc.lo(), g * bc.hi());
                l += p.min(q);
                h += p.max(q);
            }
            lo[r] = lo[r].min(l);
            hi[r] = hi[r].max(h);
        }
    }
    Ok(lo
        .into_iter()
        .zip(hi)
        .map(|(l, h)| Interval::new(l, h).expect("finite vertex solutions"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_hull() {
        let a = IntervalMatrix::from_triplets(1, 1, vec![(0, 0, Interval::new(2.0, 4.0).unwrap())])
            .unwrap();
        let b = IntervalVector::new(vec![Interval::new(4.0, 8.0).unwrap()]);
        assert_eq!(
            hull_oracle(&a, &b).unwrap()[0],
            Interval::new(1.0, 4.0).unwrap()
        );
    }

    #[test]
    fn thin_system_gives_point() {
        let a = IntervalMatrix::from_dense_points(&DMatrix::from_row_slice(
            2,
            2,
            &[2.0, 0.0, 0.0, 4.0],
        ))
        .unwrap();
        let b = IntervalVector::from_points(&[2.0, 2.0]);
        let h = hull_oracle(&a, &b).unwrap();
        assert_eq!(h, IntervalVector::from_points(&[1.0, 0.5]));
    }

    #[test]
    fn size_limit() {
        let t = (0..21)
            .map(|i| (i, i, Interval::new(1.0, 2.0).unwrap()))
            .collect();
        let a = IntervalMatrix::from_triplets(21, 21, t).unwrap();
        assert!(matches!(
            hull_oracle(&a, &IntervalVector::zeros(21)),
            Err(SolverError::TooLarge { entries: 21, .. })
        ));
    }
}
