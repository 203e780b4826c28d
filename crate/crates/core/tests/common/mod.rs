//! Random small interval systems shared by the solver tests.
#![allow(dead_code)]

pub mod feeders;

use ise_core::interval::{Interval, IntervalMatrix, IntervalVector};
use ise_core::solvers::precondition;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_INTERVAL_ENTRIES: usize = 20;
// Vertex enumeration doubles with every interval entry of A.
const MAX_A_INTERVALS: usize = 12;

#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub a: IntervalMatrix,
    pub b: IntervalVector,
    pub beta: f64,
    pub interval_entries: usize,
}

/// Dense system of dimension 2..=6 with diagonally dominant midpoints, at
/// most 20 interval entries across A and B, and beta below `beta_max`.
pub fn random_system(rng: &mut ChaCha8Rng, beta_max: f64) -> RandomSystem {
    loop {
        let n = rng.random_range(2..=6);
        let mut mid = vec![vec![0.0; n]; n];
        for (i, row) in mid.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let off: f64 = row.iter().map(|v: &f64| v.abs()).sum::<f64>() - row[i].abs();
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            row[i] = sign * (off + rng.random_range(0.5..2.0));
        }
        // Radius scale per system, so beta spreads over [0, beta_max).
        let spread = rng.random_range(0.05..1.0);
        let na = rng.random_range(0..=MAX_A_INTERVALS.min(n * n));
        let nb = rng.random_range(0..=n.min(MAX_INTERVAL_ENTRIES - na));
        let a_pos: Vec<usize> = sample(rng, n * n, na).into_vec();
        let b_pos: Vec<usize> = sample(rng, n, nb).into_vec();
        let mut trip = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let m = mid[i][j];
                let v = if a_pos.contains(&(i * n + j)) {
                    let r = spread * (rng.random_range(0.0..0.5) * m.abs() + rng.random_range(0.0..0.1));
                    Interval::new(m - r, m + r).unwrap()
                } else {
                    Interval::point(m)
                };
                trip.push((i, j, v));
            }
        }
        let a = IntervalMatrix::from_triplets(n, n, trip).unwrap();
        let b: IntervalVector = (0..n)
            .map(|i| {
                let c = rng.random_range(-3.0..3.0);
                if b_pos.contains(&i) {
                    let r = rng.random_range(0.0..0.5);
                    Interval::new(c - r, c + r).unwrap()
                } else {
                    Interval::point(c)
                }
            })
            .collect();
        let Ok(pre) = precondition(&a, None) else {
            continue;
        };
        if pre.beta < beta_max {
            let interval_entries = a.interval_entries() + b.iter().filter(|v| !v.is_thin()).count();
            return RandomSystem {
                a,
                b,
                beta: pre.beta,
                interval_entries,
            };
        }
    }
}

pub fn systems(seed: u64, count: usize, beta_max: f64) -> Vec<RandomSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_system(&mut rng, beta_max)).collect()
}

/// `x` contains `h` componentwise, up to `slack`.
pub fn contains(x: &IntervalVector, h: &IntervalVector, slack: f64) -> bool {
    x.iter()
        .zip(h.iter())
        .all(|(x, h)| x.lo() <= h.lo() + slack && x.hi() >= h.hi() - slack)
}

/// `w(x) <= w(y) + slack` componentwise.
pub fn narrower(x: &IntervalVector, y: &IntervalVector, slack: f64) -> bool {
    x.widths().iter().zip(y.widths()).all(|(a, b)| *a <= b + slack)
}
