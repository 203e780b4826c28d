mod common;

use common::{contains, narrower, random_system};
use ise_core::interval::{
    point_matvec, point_times_interval_matrix_midrad, Interval, IntervalMatrix, IntervalVector, MidRadMatrix,
    STEPPED_WORK_LIMIT,
};
use ise_core::solvers::{
    hull_oracle, ige_solve, iko_solve, initial_box, krawczyk_solve, mko_solve, precondition, SolveOptions,
    SolverError, SolverRegistry,
};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-9;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

fn inside(v: &BigRational, x: &Interval) -> bool {
    exact(x.lo()) <= *v && *v <= exact(x.hi())
}

fn sample_in<R: Rng>(rng: &mut R, x: &Interval) -> f64 {
    match rng.random_range(0..3) {
        0 => x.lo(),
        1 => x.hi(),
        _ => x.lo() + (x.hi() - x.lo()) * rng.random::<f64>(),
    }
    .clamp(x.lo(), x.hi())
}

fn wide_double<R: Rng>(rng: &mut R) -> f64 {
    let m: f64 = rng.random_range(-1.0..1.0);
    m * 10f64.powi(rng.random_range(-6..4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_solver_contains_the_vertex_hull(seed in any::<u64>()) {
        let s = random_system(&mut ChaCha8Rng::seed_from_u64(seed), 0.9);
        let hull = hull_oracle(&s.a, &s.b).unwrap();
        let opts = SolveOptions::default();
        for name in ["mko", "krawczyk", "iko", "iko-pc", "ige"] {
            match SolverRegistry::with_defaults().get(name).unwrap().solve(&s.a, &s.b, &opts) {
                Ok(r) => prop_assert!(contains(&r.solution, &hull, SLACK), "{name}: {:?} vs {:?}", r.solution, hull),
                Err(SolverError::Breakdown { .. }) if name.starts_with("i") => {}
                Err(e) => prop_assert!(false, "{name}: {e}"),
            }
        }
    }

    #[test]
    fn initial_box_contains_the_hull(seed in any::<u64>()) {
        let s = random_system(&mut ChaCha8Rng::seed_from_u64(seed), 0.9);
        let pre = precondition(&s.a, None).unwrap();
        let (x0, alpha) = initial_box(&pre, &s.b).unwrap();
        prop_assert!(alpha >= 0.0);
        prop_assert!(contains(&x0, &hull_oracle(&s.a, &s.b).unwrap(), 0.0));
    }

    #[test]
    fn residual_form_is_no_wider_than_krawczyk(seed in any::<u64>()) {
        let s = random_system(&mut ChaCha8Rng::seed_from_u64(seed), 0.9);
        let opts = SolveOptions { eps: 0.0, ..SolveOptions::default() };
        let m = mko_solve(&s.a, &s.b, &opts).unwrap();
        let k = krawczyk_solve(&s.a, &s.b, &opts, None).unwrap();
        let pre = precondition(&s.a, None).unwrap();
        let (x0, _) = initial_box(&pre, &s.b).unwrap();
        prop_assert!(narrower(&m.solution, &k.solution, 1e-12));
        prop_assert!(k.solution.is_subset(&x0));
        prop_assert!(m.converged && k.converged);
    }

    #[test]
    fn iko_refines_its_elimination_seed(seed in any::<u64>()) {
        let s = random_system(&mut ChaCha8Rng::seed_from_u64(seed), 0.9);
        if let Ok(seed_box) = ige_solve(&s.a, &s.b) {
            let r = iko_solve(&s.a, &s.b, &SolveOptions::default()).unwrap();
            prop_assert!(r.solution.is_subset(&seed_box));
        }
    }

    #[test]
    fn thin_systems_match_a_dense_solve(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_system(&mut rng, 0.9);
        let mid = s.a.midpoint();
        let a = IntervalMatrix::from_dense_points(&mid).unwrap();
        let bm = s.b.midpoints();
        let b = IntervalVector::from_points(&bm);
        let x = mid.lu().solve(&DVector::from_vec(bm)).unwrap();
        let r = mko_solve(&a, &b, &SolveOptions::default()).unwrap();
        for (xi, ri) in x.iter().zip(r.solution.iter()) {
            prop_assert!((ri.midpoint() - xi).abs() <= 1e-12 * xi.abs().max(1.0));
            prop_assert!(ri.width() <= 1e-12 * xi.abs().max(1.0));
        }
    }
}

#[test]
fn more_than_twenty_interval_entries_are_refused() {
    let n = 5;
    let trip = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j, Interval::new(if i == j { 9.0 } else { 0.0 }, if i == j { 10.0 } else { 0.1 }).unwrap())))
        .collect();
    let a = IntervalMatrix::from_triplets(n, n, trip).unwrap();
    let b = IntervalVector::from_points(&[1.0; 5]);
    assert!(matches!(hull_oracle(&a, &b), Err(SolverError::TooLarge { entries: 25, .. })));
}

#[test]
fn midrad_product_encloses_exact_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, k) = (24, 30);
    let c = DMatrix::from_fn(n, k, |_, _| if rng.random_bool(0.2) { 0.0 } else { wide_double(&mut rng) });
    let mut trip = Vec::new();
    for i in 0..k {
        for j in 0..n {
            if rng.random_bool(0.3) {
                let m = wide_double(&mut rng);
                let r = if rng.random_bool(0.5) { 0.0 } else { m.abs() * rng.random_range(0.0..0.2) };
                trip.push((i, j, Interval::new(m - r, m + r).unwrap()));
            }
        }
    }
    let m = IntervalMatrix::from_triplets(k, n, trip).unwrap();
    let out = point_times_interval_matrix_midrad(&c, &m).unwrap();
    for _ in 0..20 {
        let sample: Vec<Vec<f64>> = (0..k).map(|i| (0..n).map(|j| sample_in(&mut rng, &m.get(i, j))).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                let mut s = BigRational::zero();
                for (l, row) in sample.iter().enumerate() {
                    if c[(i, l)] != 0.0 && row[j] != 0.0 {
                        s += exact(c[(i, l)]) * exact(row[j]);
                    }
                }
                assert!(inside(&s, &out.get(i, j)), "({i}, {j})");
            }
        }
    }
}

#[test]
fn midrad_identity_minus_and_norm_are_upper_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 16;
    let c = DMatrix::from_fn(n, n, |_, _| wide_double(&mut rng) * 1e-3);
    let m = IntervalMatrix::identity(n);
    let mut e = point_times_interval_matrix_midrad(&c, &m).unwrap();
    e.identity_minus();
    let mut norm = 0.0f64;
    for i in 0..n {
        let mut row = BigRational::zero();
        for j in 0..n {
            let want = if i == j { BigRational::from_float(1.0).unwrap() } else { BigRational::zero() } - exact(c[(i, j)]);
            assert!(inside(&want, &e.get(i, j)), "({i}, {j})");
            row += if want < BigRational::zero() { -want } else { want };
        }
        norm = norm.max(num::ToPrimitive::to_f64(&row).unwrap());
    }
    assert!(e.inf_norm() >= norm);
}

#[test]
fn midrad_matvec_encloses_exact_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 20;
    let mut trip = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let m = wide_double(&mut rng);
            let r = m.abs() * rng.random_range(0.0..0.1);
            trip.push((i, j, Interval::new(m - r, m + r).unwrap()));
        }
    }
    let dense = IntervalMatrix::from_triplets(n, n, trip).unwrap().to_dense();
    let e = MidRadMatrix::from_dense(&dense);
    let x: IntervalVector = (0..n)
        .map(|_| {
            let m = wide_double(&mut rng);
            Interval::new(m - m.abs() * 0.3, m + m.abs() * 0.1).unwrap()
        })
        .collect();
    let y = e.matvec(&x).unwrap();
    for _ in 0..50 {
        let xs: Vec<f64> = x.iter().map(|v| sample_in(&mut rng, v)).collect();
        for i in 0..n {
            let mut s = BigRational::zero();
            for j in 0..n {
                s += exact(sample_in(&mut rng, &dense.get(i, j))) * exact(xs[j]);
            }
            assert!(inside(&s, &y[i]), "row {i}");
        }
    }
}

#[test]
fn large_point_matvec_uses_bounds_that_enclose_exact_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 1025;
    assert!(n * n > STEPPED_WORK_LIMIT);
    let c = DMatrix::from_fn(n, n, |_, _| wide_double(&mut rng));
    let v: IntervalVector = (0..n)
        .map(|_| {
            let m = wide_double(&mut rng);
            Interval::new(m, m + m.abs() * 0.01).unwrap()
        })
        .collect();
    let y = point_matvec(&c, &v).unwrap();
    for _ in 0..3 {
        let xs: Vec<f64> = v.iter().map(|x| sample_in(&mut rng, x)).collect();
        for i in 0..4 {
            let mut s = BigRational::zero();
            for j in 0..n {
                s += exact(c[(i, j)]) * exact(xs[j]);
            }
            assert!(inside(&s, &y[i]), "row {i}");
        }
    }
}

#[test]
fn large_and_small_preconditioning_agree_on_structure() {
    // Above the work limit the iteration matrix is held in midpoint/radius
    // form; its entries must still enclose the stepped ones' centres.
    let n = 1100;
    let trip: Vec<_> = (0..n)
        .flat_map(|i| {
            let mut t = vec![(i, i, Interval::new(3.9, 4.1).unwrap())];
            if i + 1 < n {
                t.push((i, i + 1, Interval::point(1.0)));
            }
            t
        })
        .collect();
    let a = IntervalMatrix::from_triplets(n, n, trip).unwrap();
    let pre = precondition(&a, None).unwrap();
    assert!(pre.beta < 0.1, "beta {}", pre.beta);
    for (i, j) in [(0, 0), (5, 6), (100, 90), (n - 1, n - 1)] {
        assert!(pre.e_entry(i, j).contains_zero(), "({i}, {j})");
    }
}
