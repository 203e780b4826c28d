//! Closed real intervals with outward-rounded arithmetic, plus interval
//! vectors and matrices.
//!
//! Every primitive operation computes its endpoints in round-to-nearest and
//! then decides, from the exact rounding error of that operation, whether the
//! endpoint must be pushed one unit in the last place outward. The rounding
//! error is recovered with error-free transformations (TwoSum for sums, an
//! FMA residual for products and quotients), so exact results are not
//! widened and inexact ones always are. Near the underflow threshold the
//! residuals are no longer exact and the endpoint is stepped unconditionally.

use std::fmt;
use std::ops::{Add, AddAssign, Deref, DerefMut, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntervalError {
    #[error("invalid interval endpoints [{lo}, {hi}]")]
    InvalidEndpoints { lo: f64, hi: f64 },
    #[error("division by an interval containing zero [{lo}, {hi}]")]
    DivisionByZero { lo: f64, hi: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

// Below this magnitude FMA residuals may be inexact.
const TINY: f64 = 1.0e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

// Exact residual a*b - p of the rounded product p. Uses a hardware FMA when
// the target has one; otherwise Dekker's split, exact while the halves do not
// overflow (callers step unconditionally above HUGE).
#[cfg(target_feature = "fma")]
#[inline]
fn mul_residual(a: f64, b: f64, p: f64) -> f64 {
    a.mul_add(b, -p)
}

#[cfg(not(target_feature = "fma"))]
#[inline]
fn mul_residual(a: f64, b: f64, p: f64) -> f64 {
    #[inline]
    fn split(x: f64) -> (f64, f64) {
        let t = 134_217_729.0 * x;
        let hi = t - (t - x);
        (hi, x - hi)
    }
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

// Above this magnitude the split in mul_residual can overflow.
const HUGE: f64 = 1.0e290;

#[inline]
pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.abs() < TINY && s != 0.0 {
        return s.next_down();
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.abs() < TINY && s != 0.0 {
        return s.next_up();
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub(crate) fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

#[inline]
pub(crate) fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.abs() < TINY || p.abs() > HUGE || a.abs() > HUGE || b.abs() > HUGE {
        return p.next_down();
    }
    if mul_residual(a, b, p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.abs() < TINY || p.abs() > HUGE || a.abs() > HUGE || b.abs() > HUGE {
        return p.next_up();
    }
    if mul_residual(a, b, p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Sign of (a/b - q) where q = fl(a/b); b != 0.
#[inline]
fn div_err_sign(a: f64, b: f64, q: f64) -> f64 {
    let r = (-q).mul_add(b, a);
    if r == 0.0 {
        0.0
    } else if (r > 0.0) == (b > 0.0) {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub(crate) fn div_down(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.abs() < TINY || a.abs() < TINY {
        return q.next_down();
    }
    if div_err_sign(a, b, q) < 0.0 {
        q.next_down()
    } else {
        q
    }
}

#[inline]
pub(crate) fn div_up(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.abs() < TINY || a.abs() < TINY {
        return q.next_up();
    }
    if div_err_sign(a, b, q) > 0.0 {
        q.next_up()
    } else {
        q
    }
}

#[inline]
fn sqrt_down(a: f64) -> f64 {
    // IEEE sqrt is correctly rounded; check the square to decide the direction.
    let s = a.sqrt();
    if s == 0.0 {
        return 0.0;
    }
    if s.mul_add(s, -a) > 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
fn sqrt_up(a: f64) -> f64 {
    let s = a.sqrt();
    if s == 0.0 {
        return 0.0;
    }
    if s.mul_add(s, -a) < 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// A closed interval `[lo, hi]` with finite endpoints.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(IntervalError::InvalidEndpoints { lo, hi })
        }
    }

    /// Thin interval `[x, x]`.
    ///
    /// Panics if `x` is not finite.
    pub fn point(x: f64) -> Self {
        assert!(x.is_finite(), "interval endpoint must be finite, got {x}");
        Interval { lo: x, hi: x }
    }

    /// `[center - radius, center + radius]`, outward rounded.
    pub fn around(center: f64, radius: f64) -> Result<Self, IntervalError> {
        let r = radius.abs();
        Interval::new(sub_down(center, r), add_up(center, r))
    }

    pub(crate) fn from_unchecked(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi && lo.is_finite() && hi.is_finite(), "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn midpoint(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        0.5 * self.lo + 0.5 * self.hi
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `max(|lo|, |hi|)`.
    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value of any member.
    pub fn mignitude(&self) -> f64 {
        if self.contains_zero() {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn is_thin(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_point(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains_point(0.0)
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Overlap of two intervals, `None` when they are disjoint.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Multiply by a point scalar.
    pub fn scale(&self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::from_unchecked(mul_down(self.lo, c), mul_up(self.hi, c))
        } else {
            Interval::from_unchecked(mul_down(self.hi, c), mul_up(self.lo, c))
        }
    }

    /// Add a point scalar.
    pub fn shift(&self, c: f64) -> Interval {
        Interval::from_unchecked(add_down(self.lo, c), add_up(self.hi, c))
    }

    pub fn checked_div(&self, rhs: &Interval) -> Result<Interval, IntervalError> {
        if rhs.contains_zero() {
            return Err(IntervalError::DivisionByZero {
                lo: rhs.lo,
                hi: rhs.hi,
            });
        }
        let (a, b) = (self, rhs);
        let lo = div_down(a.lo, b.lo)
            .min(div_down(a.lo, b.hi))
            .min(div_down(a.hi, b.lo))
            .min(div_down(a.hi, b.hi));
        let hi = div_up(a.lo, b.lo)
            .max(div_up(a.lo, b.hi))
            .max(div_up(a.hi, b.lo))
            .max(div_up(a.hi, b.hi));
        Ok(Interval::from_unchecked(lo, hi))
    }

    pub fn sqr(&self) -> Interval {
        let m = self.mignitude();
        let g = self.magnitude();
        Interval::from_unchecked(mul_down(m, m), mul_up(g, g))
    }

    /// Square root of the non-negative part; `None` if the interval is
    /// entirely negative.
    pub fn sqrt(&self) -> Option<Interval> {
        if self.hi < 0.0 {
            return None;
        }
        Some(Interval::from_unchecked(
            sqrt_down(self.lo.max(0.0)),
            sqrt_up(self.hi),
        ))
    }

    /// Enclosure of `cos` over the interval.
    ///
    /// Endpoint values come from the platform `cos`, which is accurate to
    /// within one ulp, so they are widened by two ulps.
    pub fn cos(&self) -> Interval {
        trig_enclosure(self, f64::cos, 0.0)
    }

    /// Enclosure of `sin` over the interval.
    pub fn sin(&self) -> Interval {
        trig_enclosure(self, f64::sin, -std::f64::consts::FRAC_PI_2)
    }
}

/// `f` is cos shifted by `phase`: f(t) = cos(t + phase). Maxima of f sit at
/// t = -phase + 2k*pi, minima at t = -phase + (2k+1)*pi.
fn trig_enclosure(x: &Interval, f: fn(f64) -> f64, phase: f64) -> Interval {
    use std::f64::consts::PI;
    if x.width() >= 2.0 * PI {
        return Interval { lo: -1.0, hi: 1.0 };
    }
    let widen = |v: f64, up: bool| {
        if up {
            v.next_up().next_up().min(1.0)
        } else {
            v.next_down().next_down().max(-1.0)
        }
    };
    let (fa, fb) = (f(x.lo), f(x.hi));
    let mut lo = widen(fa.min(fb), false);
    let mut hi = widen(fa.max(fb), true);
    // Generous slack on the extremum search keeps this conservative when an
    // endpoint sits next to a multiple of pi.
    let slack = 1e-12;
    let k_lo = ((x.lo + phase) / PI - slack).ceil() as i64;
    let k_hi = ((x.hi + phase) / PI + slack).floor() as i64;
    for k in k_lo..=k_hi {
        if k.rem_euclid(2) == 0 {
            hi = 1.0;
        } else {
            lo = -1.0;
        }
    }
    Interval { lo, hi }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = IntervalError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(v: Interval) -> Self {
        [v.lo, v.hi]
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;

    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval::from_unchecked(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl AddAssign for Interval {
    #[inline]
    fn add_assign(&mut self, rhs: Interval) {
        *self = *self + rhs;
    }
}

impl Sub for Interval {
    type Output = Interval;

    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval::from_unchecked(sub_down(self.lo, rhs.hi), sub_up(self.hi, rhs.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;

    #[inline]
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;

    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        let (a, b) = (self, rhs);
        if a.is_thin() {
            return b.scale(a.lo);
        }
        if b.is_thin() {
            return a.scale(b.lo);
        }
        // Sign classes pick the two endpoint products that bound the result;
        // only when both straddle zero are four needed.
        let (lo, hi) = if a.lo >= 0.0 {
            if b.lo >= 0.0 {
                (mul_down(a.lo, b.lo), mul_up(a.hi, b.hi))
            } else if b.hi <= 0.0 {
                (mul_down(a.hi, b.lo), mul_up(a.lo, b.hi))
            } else {
                (mul_down(a.hi, b.lo), mul_up(a.hi, b.hi))
            }
        } else if a.hi <= 0.0 {
            if b.lo >= 0.0 {
                (mul_down(a.lo, b.hi), mul_up(a.hi, b.lo))
            } else if b.hi <= 0.0 {
                (mul_down(a.hi, b.hi), mul_up(a.lo, b.lo))
            } else {
                (mul_down(a.lo, b.hi), mul_up(a.lo, b.lo))
            }
        } else if b.lo >= 0.0 {
            (mul_down(a.lo, b.hi), mul_up(a.hi, b.hi))
        } else if b.hi <= 0.0 {
            (mul_down(a.hi, b.lo), mul_up(a.lo, b.lo))
        } else {
            (
                mul_down(a.lo, b.hi).min(mul_down(a.hi, b.lo)),
                mul_up(a.lo, b.lo).max(mul_up(a.hi, b.hi)),
            )
        };
        Interval::from_unchecked(lo, hi)
    }
}

/// Outward-rounded magnitude of a rectangular box `(re, im)`: nearest and
/// farthest distance from the origin.
pub fn box_magnitude(re: &Interval, im: &Interval) -> Interval {
    let (r2, i2) = (re.sqr(), im.sqr());
    let near = sqrt_down(add_down(r2.lo, i2.lo).max(0.0));
    let far = sqrt_up(add_up(r2.hi, i2.hi));
    Interval::from_unchecked(near, far)
}

/// Interval vector. May be empty (an absent measurement block).
#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalVector(Vec<Interval>);

impl IntervalVector {
    pub fn new(elems: Vec<Interval>) -> Self {
        IntervalVector(elems)
    }

    pub fn zeros(n: usize) -> Self {
        IntervalVector(vec![Interval::ZERO; n])
    }

    pub fn from_points(x: &[f64]) -> Self {
        IntervalVector(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn into_inner(self) -> Vec<Interval> {
        self.0
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.0.iter().map(Interval::midpoint).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.iter().map(Interval::width).collect()
    }

    /// `max_i |x_i|`, an upper bound on the infinity norm of every member.
    pub fn inf_norm(&self) -> f64 {
        self.0.iter().map(Interval::magnitude).fold(0.0, f64::max)
    }

    pub fn is_thin(&self) -> bool {
        self.0.iter().all(Interval::is_thin)
    }

    pub fn is_subset(&self, other: &IntervalVector) -> bool {
        self.len() == other.len() && self.iter().zip(other.iter()).all(|(a, b)| a.is_subset(b))
    }

    pub fn contains_points(&self, x: &[f64]) -> bool {
        self.len() == x.len() && self.iter().zip(x).all(|(a, &v)| a.contains_point(v))
    }

    /// Componentwise intersection; `None` if any component is empty.
    pub fn intersect(&self, other: &IntervalVector) -> Option<IntervalVector> {
        debug_assert_eq!(self.len(), other.len());
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IntervalVector)
    }

    /// Largest endpoint displacement between two vectors of equal length.
    pub fn distance(&self, other: &IntervalVector) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a.lo - b.lo).abs().max((a.hi - b.hi).abs()))
            .fold(0.0, f64::max)
    }

    pub fn add_points(&self, x: &[f64]) -> IntervalVector {
        IntervalVector(self.iter().zip(x).map(|(a, &v)| a.shift(v)).collect())
    }

    pub fn sub_points(&self, x: &[f64]) -> IntervalVector {
        IntervalVector(self.iter().zip(x).map(|(a, &v)| a.shift(-v)).collect())
    }

    pub fn concat(&self, other: &IntervalVector) -> IntervalVector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IntervalVector(v)
    }
}

impl Deref for IntervalVector {
    type Target = [Interval];

    fn deref(&self) -> &[Interval] {
        &self.0
    }
}

impl DerefMut for IntervalVector {
    fn deref_mut(&mut self) -> &mut [Interval] {
        &mut self.0
    }
}

impl FromIterator<Interval> for IntervalVector {
    fn from_iter<T: IntoIterator<Item = Interval>>(iter: T) -> Self {
        IntervalVector(iter.into_iter().collect())
    }
}

impl fmt::Debug for IntervalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// Outward-rounded dot product of a point row with an interval vector.
#[inline]
fn point_dot(row: impl Iterator<Item = (f64, Interval)>) -> Interval {
    let (mut lo, mut hi) = (0.0, 0.0);
    for (c, v) in row {
        if c == 0.0 {
            continue;
        }
        let p = v.scale(c);
        lo = add_down(lo, p.lo);
        hi = add_up(hi, p.hi);
    }
    Interval::from_unchecked(lo, hi)
}

/// Sparse interval matrix in compressed-row form. Unstored entries are the
/// thin interval `[0, 0]`.
#[derive(Clone, PartialEq, Debug)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<Interval>,
}

impl IntervalMatrix {
    /// Build from `(row, col, value)` triplets. Duplicate positions are
    /// summed; thin zeros are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, Interval)>,
    ) -> Result<Self, IntervalError> {
        if rows == 0 || cols == 0 {
            return Err(IntervalError::DimensionMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= rows || *j >= cols) {
            return Err(IntervalError::DimensionMismatch(format!(
                "entry ({i}, {j}) outside a {rows}x{cols} matrix"
            )));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Interval> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                let k = vals.len() - 1;
                vals[k] += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = IntervalMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        };
        m.drop_zeros();
        Ok(m)
    }

    fn drop_zeros(&mut self) {
        if !self.vals.iter().any(|v| *v == Interval::ZERO) {
            return;
        }
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.vals.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.vals[k] != Interval::ZERO {
                    col_idx.push(self.col_idx[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[i + 1] = vals.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.vals = vals;
    }

    pub fn identity(n: usize) -> Self {
        IntervalMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, Interval::ONE)).collect())
            .expect("identity dimensions")
    }

    pub fn from_dense_points(m: &DMatrix<f64>) -> Result<Self, IntervalError> {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, Interval::point(m[(i, j)])));
                }
            }
        }
        IntervalMatrix::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Interval)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => Interval::ZERO,
        }
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Interval)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn is_thin(&self) -> bool {
        self.vals.iter().all(Interval::is_thin)
    }

    /// Number of stored entries with nonzero radius.
    pub fn interval_entries(&self) -> usize {
        self.vals.iter().filter(|v| !v.is_thin()).count()
    }

    pub fn transpose(&self) -> IntervalMatrix {
        let t = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        IntervalMatrix::from_triplets(self.cols, self.rows, t).expect("transpose dimensions")
    }

    pub fn midpoint(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v.midpoint();
        }
        m
    }

    /// Max row sum of magnitudes, rounded up.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .fold(0.0, |acc, (_, v)| add_up(acc, v.magnitude()))
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        if v.len() != self.cols {
            return Err(IntervalError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                for (j, a) in self.row(i) {
                    let p = a * v[j];
                    lo = add_down(lo, p.lo);
                    hi = add_up(hi, p.hi);
                }
                Interval::from_unchecked(lo, hi)
            })
            .collect())
    }

    /// Product with a point vector.
    pub fn matvec_points(&self, x: &[f64]) -> Result<IntervalVector, IntervalError> {
        if x.len() != self.cols {
            return Err(IntervalError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| point_dot(self.row(i).map(|(j, a)| (x[j], a))))
            .collect())
    }

    pub fn to_dense(&self) -> DenseIntervalMatrix {
        let mut d = DenseIntervalMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d.set(i, j, v);
        }
        d
    }
}

/// Row-major dense interval matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct DenseIntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl DenseIntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseIntervalMatrix {
            rows,
            cols,
            data: vec![Interval::ZERO; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Interval] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Interval] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Replace `M` by `I - M` (square matrices only).
    pub fn identity_minus(&mut self) {
        assert_eq!(self.rows, self.cols, "identity_minus needs a square matrix");
        for v in self.data.iter_mut() {
            *v = -*v;
        }
        for i in 0..self.rows {
            let k = i * self.cols + i;
            self.data[k] = self.data[k].shift(1.0);
        }
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .fold(0.0, |acc, v| add_up(acc, v.magnitude()))
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        if v.len() != self.cols {
            return Err(IntervalError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                let (mut lo, mut hi) = (0.0, 0.0);
                for (a, x) in self.row(i).iter().zip(v.iter()) {
                    if *a == Interval::ZERO || *x == Interval::ZERO {
                        continue;
                    }
                    let p = *a * *x;
                    lo = add_down(lo, p.lo);
                    hi = add_up(hi, p.hi);
                }
                Interval::from_unchecked(lo, hi)
            })
            .collect())
    }
}

impl Index<(usize, usize)> for DenseIntervalMatrix {
    type Output = Interval;

    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseIntervalMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.data[i * self.cols + j]
    }
}

// Dense products below run in round-to-nearest on midpoint/radius pairs and
// enclose the accumulated rounding error with an a-priori bound instead of
// stepping every partial sum.

const UNIT: f64 = f64::EPSILON / 2.0;
const ETA: f64 = 4.940_656_458_412_465_4e-324;

// Upper bound on gamma_k = k u / (1 - k u).
fn gamma(k: usize) -> f64 {
    let k = k as f64;
    (k * UNIT) / (1.0 - (k + 1.0) * UNIT) * (1.0 + 4.0 * UNIT)
}

/// Midpoint and outward-rounded radius of an interval.
#[inline]
fn mid_rad(x: &Interval) -> (f64, f64) {
    if x.lo == x.hi {
        return (x.lo, 0.0);
    }
    let m = 0.5 * x.lo + 0.5 * x.hi;
    (m, sub_up(m, x.lo).max(sub_up(x.hi, m)))
}

/// Error bound for a sum of `k` terms `p_l + [-q_l, q_l]`, each formed with
/// at most four operations, given in terms of the round-to-nearest sums
/// `mid = fl(sum p_l)`, `rad = fl(sum q_l)` and `abs = fl(sum |p_l| + q_l)`.
#[derive(Clone, Copy)]
struct SumBound {
    g: f64,
    scale: f64,
    floor: f64,
}

impl SumBound {
    fn new(k: usize) -> Self {
        let g = gamma(k + 5);
        SumBound {
            g,
            scale: 1.0 + 2.0 * g,
            floor: (8.0 * k as f64 + 8.0) * ETA,
        }
    }

    #[inline]
    fn radius(&self, rad: f64, abs: f64) -> f64 {
        (((rad + self.g * abs) * self.scale + self.floor) * (1.0 + 8.0 * UNIT)).next_up()
    }

    #[inline]
    fn enclose(&self, mid: f64, rad: f64, abs: f64) -> Result<Interval, IntervalError> {
        let r = self.radius(rad, abs);
        let (lo, hi) = ((mid - r).next_down(), (mid + r).next_up());
        if lo.is_finite() && hi.is_finite() {
            Ok(Interval::from_unchecked(lo, hi))
        } else {
            Err(IntervalError::InvalidEndpoints { lo, hi })
        }
    }
}

/// Dense interval matrix held as midpoints and radii, for fast products with
/// interval vectors.
#[derive(Clone, Debug)]
pub struct MidRadMatrix {
    rows: usize,
    cols: usize,
    mid: Vec<f64>,
    rad: Vec<f64>,
}

impl MidRadMatrix {
    pub fn from_dense(m: &DenseIntervalMatrix) -> Self {
        let (mid, rad) = m.data.iter().map(mid_rad).unzip();
        MidRadMatrix {
            rows: m.rows,
            cols: m.cols,
            mid,
            rad,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Outward-rounded enclosure of entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> Interval {
        let k = i * self.cols + j;
        Interval::from_unchecked(
            sub_down(self.mid[k], self.rad[k]),
            add_up(self.mid[k], self.rad[k]),
        )
    }

    pub fn to_dense(&self) -> DenseIntervalMatrix {
        let data = (0..self.mid.len())
            .map(|k| {
                Interval::from_unchecked(
                    sub_down(self.mid[k], self.rad[k]),
                    add_up(self.mid[k], self.rad[k]),
                )
            })
            .collect();
        DenseIntervalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Replace `M` by `I - M` (square matrices only).
    pub fn identity_minus(&mut self) {
        assert_eq!(self.rows, self.cols, "identity_minus needs a square matrix");
        for m in self.mid.iter_mut() {
            *m = -*m;
        }
        for i in 0..self.rows {
            let k = i * self.cols + i;
            let s = 1.0 + self.mid[k];
            let err = two_sum_err(1.0, self.mid[k], s).abs();
            self.mid[k] = s;
            if err != 0.0 || s.abs() < TINY {
                self.rad[k] = add_up(self.rad[k], err).next_up();
            }
        }
    }

    /// Upper bound on the row-sum norm of every member matrix.
    pub fn inf_norm(&self) -> f64 {
        let bound = SumBound::new(self.cols);
        (0..self.rows)
            .map(|i| {
                let row = i * self.cols..(i + 1) * self.cols;
                let s: f64 = self.mid[row.clone()]
                    .iter()
                    .zip(&self.rad[row])
                    .map(|(m, r)| m.abs() + r)
                    .sum();
                bound.radius(s, 0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, v: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        if v.len() != self.cols {
            return Err(IntervalError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let (xm, xr): (Vec<f64>, Vec<f64>) = v.iter().map(mid_rad).unzip();
        let xa: Vec<f64> = xm.iter().zip(&xr).map(|(m, r)| m.abs() + r).collect();
        let bound = SumBound::new(self.cols);
        (0..self.rows)
            .map(|i| {
                let row = i * self.cols..(i + 1) * self.cols;
                let (em, er) = (&self.mid[row.clone()], &self.rad[row]);
                let (mut mid, mut rad, mut abs) = (0.0, 0.0, 0.0);
                for j in 0..self.cols {
                    let (m, r) = (em[j], er[j]);
                    mid += m * xm[j];
                    rad += m.abs() * xr[j] + r * xa[j];
                    abs += (m.abs() + r) * xa[j];
                }
                bound.enclose(mid, rad, abs)
            })
            .collect()
    }
}

/// `C * M` in midpoint/radius form, for a point matrix `C` and a sparse
/// interval matrix `M`.
pub fn point_times_interval_matrix_midrad(
    c: &DMatrix<f64>,
    m: &IntervalMatrix,
) -> Result<MidRadMatrix, IntervalError> {
    if c.ncols() != m.rows() {
        return Err(IntervalError::DimensionMismatch(format!(
            "{}x{} point matrix times {}x{} interval matrix",
            c.nrows(),
            c.ncols(),
            m.rows(),
            m.cols()
        )));
    }
    let (n, cols) = (c.nrows(), m.cols());
    let (vm, vr): (Vec<f64>, Vec<f64>) = m.vals.iter().map(mid_rad).unzip();
    let va: Vec<f64> = vm.iter().zip(&vr).map(|(m, r)| m.abs() + r).collect();
    let mut terms = vec![0usize; cols];
    for &j in &m.col_idx {
        terms[j] += 1;
    }
    let bounds: Vec<SumBound> = terms.iter().map(|&k| SumBound::new(k)).collect();
    // Row i of the result accumulates c_ik * (row k of M); C's rows are
    // columns of its transpose, which nalgebra stores contiguously.
    let ct = c.transpose();
    let mut out_mid = vec![0.0; n * cols];
    let mut out_rad = vec![0.0; n * cols];
    let mut abs = vec![0.0; cols];
    for i in 0..n {
        let mid = &mut out_mid[i * cols..(i + 1) * cols];
        let rad = &mut out_rad[i * cols..(i + 1) * cols];
        abs.fill(0.0);
        for (k, &cik) in ct.column(i).iter().enumerate() {
            if cik == 0.0 {
                continue;
            }
            let ca = cik.abs();
            for p in m.row_ptr[k]..m.row_ptr[k + 1] {
                let j = m.col_idx[p];
                mid[j] += cik * vm[p];
                rad[j] += ca * vr[p];
                abs[j] += ca * va[p];
            }
        }
        for j in 0..cols {
            if terms[j] > 0 {
                rad[j] = bounds[j].radius(rad[j], abs[j]);
            }
        }
        if mid.iter().chain(rad.iter()).any(|v| !v.is_finite()) {
            return Err(IntervalError::InvalidEndpoints {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
    }
    Ok(MidRadMatrix {
        rows: n,
        cols,
        mid: out_mid,
        rad: out_rad,
    })
}

fn point_matvec_midrad(
    c: &DMatrix<f64>,
    v: &IntervalVector,
) -> Result<IntervalVector, IntervalError> {
    if c.ncols() != v.len() {
        return Err(IntervalError::DimensionMismatch(format!(
            "{}x{} point matrix times vector of length {}",
            c.nrows(),
            c.ncols(),
            v.len()
        )));
    }
    let n = c.nrows();
    let mut mid = vec![0.0; n];
    let mut rad = vec![0.0; n];
    let mut abs = vec![0.0; n];
    let mut k = 0;
    // Column-major sweep: each column of C scales one entry of v.
    for (col, x) in v.iter().enumerate() {
        if *x == Interval::ZERO {
            continue;
        }
        k += 1;
        let (xm, xr) = mid_rad(x);
        let xa = xm.abs() + xr;
        for (i, &cik) in c.column(col).iter().enumerate() {
            mid[i] += cik * xm;
            rad[i] += cik.abs() * xr;
            abs[i] += cik.abs() * xa;
        }
    }
    if k == 0 {
        return Ok(IntervalVector::zeros(n));
    }
    let bound = SumBound::new(k);
    (0..n)
        .map(|i| bound.enclose(mid[i], rad[i], abs[i]))
        .collect()
}

/// Products with at most this many multiply-adds step every endpoint;
/// larger ones switch to the midpoint/radius kernels.
pub const STEPPED_WORK_LIMIT: usize = 1 << 20;

/// `C * M` for a point matrix `C` and a sparse interval matrix `M`.
pub fn point_times_interval_matrix(
    c: &DMatrix<f64>,
    m: &IntervalMatrix,
) -> Result<DenseIntervalMatrix, IntervalError> {
    if c.nrows() * m.nnz() > STEPPED_WORK_LIMIT {
        return point_times_interval_matrix_midrad(c, m).map(|e| e.to_dense());
    }
    if c.ncols() != m.rows() {
        return Err(IntervalError::DimensionMismatch(format!(
            "{}x{} point matrix times {}x{} interval matrix",
            c.nrows(),
            c.ncols(),
            m.rows(),
            m.cols()
        )));
    }
    let ct = c.transpose();
    let (n, cols) = (c.nrows(), m.cols());
    let mut out = DenseIntervalMatrix::zeros(n, cols);
    let mut lo = vec![0.0; cols];
    let mut hi = vec![0.0; cols];
    for i in 0..n {
        lo.fill(0.0);
        hi.fill(0.0);
        for (k, &cik) in ct.column(i).iter().enumerate() {
            if cik == 0.0 {
                continue;
            }
            for (j, v) in m.row(k) {
                let p = v.scale(cik);
                lo[j] = add_down(lo[j], p.lo);
                hi[j] = add_up(hi[j], p.hi);
            }
        }
        for (dst, (l, h)) in out.row_mut(i).iter_mut().zip(lo.iter().zip(&hi)) {
            *dst = Interval::from_unchecked(*l, *h);
        }
    }
    Ok(out)
}

/// `C * v` for a point matrix and an interval vector.
pub fn point_matvec(c: &DMatrix<f64>, v: &IntervalVector) -> Result<IntervalVector, IntervalError> {
    if c.nrows() * c.ncols() > STEPPED_WORK_LIMIT {
        return point_matvec_midrad(c, v);
    }
    if c.ncols() != v.len() {
        return Err(IntervalError::DimensionMismatch(format!(
            "{}x{} point matrix times vector of length {}",
            c.nrows(),
            c.ncols(),
            v.len()
        )));
    }
    let mut lo = vec![0.0; c.nrows()];
    let mut hi = vec![0.0; c.nrows()];
    for (k, x) in v.iter().enumerate() {
        if *x == Interval::ZERO {
            continue;
        }
        for (i, &cik) in c.column(k).iter().enumerate() {
            if cik == 0.0 {
                continue;
            }
            let p = x.scale(cik);
            lo[i] = add_down(lo[i], p.lo);
            hi[i] = add_up(hi[i], p.hi);
        }
    }
    Ok(lo
        .into_iter()
        .zip(hi)
        .map(|(l, h)| Interval::from_unchecked(l, h))
        .collect())
}

/// Product of a sparse interval matrix with an interval vector.
pub fn interval_matvec(
    m: &IntervalMatrix,
    v: &IntervalVector,
) -> Result<IntervalVector, IntervalError> {
    m.matvec(v)
}
