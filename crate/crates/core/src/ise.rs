//! The augmented interval system `[A][X] = [B]`.
//!
//! With the dummy vector `y = Hx - z` the weighted normal equations become
//!
//! ```text
//! [ H   -I   ] [x]   [z]
//! [ 0   H^T W] [y] = [0]
//! ```
//!
//! so no interval-by-interval product `H^T W H` is ever formed.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::estimator::JacobianSystem;
use crate::interval::{Interval, IntervalMatrix, IntervalVector};
use crate::measurement::WeightMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IseError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model {variant:?} does not accept these inputs: {reason}")]
    VariantMismatch {
        variant: ModelVariant,
        reason: String,
    },
    #[error("midpoint system is singular: {0}")]
    Singular(String),
    #[error("system dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Which inputs carry uncertainty.
///
/// - I: point line parameters, no DG output intervals.
/// - II: point line parameters, DG output intervals allowed.
/// - III: interval line parameters allowed, no DG output intervals.
/// - IV: both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    I,
    II,
    III,
    IV,
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelVariant::I),
            "II" | "2" => Ok(ModelVariant::II),
            "III" | "3" => Ok(ModelVariant::III),
            "IV" | "4" => Ok(ModelVariant::IV),
            _ => Err(format!(
                "unknown model variant {s:?} (expected I, II, III or IV)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IseSystem {
    pub a: IntervalMatrix,
    pub b: IntervalVector,
    pub variant: ModelVariant,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    /// Point weights used in the lower-right block.
    pub weights: Vec<f64>,
}

impl IseSystem {
    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn dim(&self) -> usize {
        self.n + self.m()
    }

    /// Inverse of `Mid[A]` from its block structure. With `G = K H`,
    /// `K = Mid[H^T W]` and `Q = H G^-1`:
    ///
    /// ```text
    /// Mid[A]^-1 = [ G^-1 K      G^-1 ]
    ///             [ H G^-1 K - I   Q ]
    /// ```
    ///
    /// where `H` stands for `Mid[H]`. Costs one n x n Cholesky instead of a
    /// dense LU of the full (m+n) system.
    pub fn midpoint_inverse(&self) -> Result<DMatrix<f64>, IseError> {
        let (n, m) = (self.n, self.m());
        let mut h = DMatrix::<f64>::zeros(m, n);
        let mut k = DMatrix::<f64>::zeros(n, m);
        for (i, j, v) in self.a.triplets() {
            if i < m && j < n {
                h[(i, j)] = v.midpoint();
            } else if i >= m && j >= n {
                k[(i - m, j - n)] = v.midpoint();
            }
        }
        let g = &k * &h;
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| IseError::Singular("H^T W H is not positive definite".into()))?;
        let ginv = chol.inverse();
        let q = &h * &ginv;
        let top_left = &ginv * &k;
        let mut bottom_left = &q * &k;
        for i in 0..m {
            bottom_left[(i, i)] -= 1.0;
        }
        let mut c = DMatrix::<f64>::zeros(n + m, n + m);
        c.view_mut((0, 0), (n, m)).copy_from(&top_left);
        c.view_mut((0, m), (n, n)).copy_from(&ginv);
        c.view_mut((n, 0), (m, m)).copy_from(&bottom_left);
        c.view_mut((n, m), (m, n)).copy_from(&q);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(IseError::Singular(
                "non-finite entries in the inverse".into(),
            ));
        }
        Ok(c)
    }
}

fn check_variant(variant: ModelVariant, thin_h: bool, m2: usize) -> Result<(), IseError> {
    let fail = |reason: &str| {
        Err(IseError::VariantMismatch {
            variant,
            reason: reason.to_string(),
        })
    };
    match variant {
        ModelVariant::I if !thin_h => fail("interval line parameters need model III or IV"),
        ModelVariant::I if m2 > 0 => fail("DG output intervals need model II or IV"),
        ModelVariant::II if !thin_h => fail("interval line parameters need model III or IV"),
        ModelVariant::III if m2 > 0 => fail("DG output intervals need model II or IV"),
        _ => Ok(()),
    }
}

/// Build `[A]` and `[B]` from the Jacobian, the measurement intervals and
/// the weights.
pub fn assemble(
    variant: ModelVariant,
    j: &JacobianSystem,
    z1: &IntervalVector,
    z2: &IntervalVector,
    w: &WeightMatrix,
) -> Result<IseSystem, IseError> {
    let (n, m1, m2) = (j.n(), j.m1, j.m2);
    let dim = |what: &str, want: usize, got: usize| {
        if want == got {
            Ok(())
        } else {
            Err(IseError::Dimension(format!(
                "{what}: expected {want}, got {got}"
            )))
        }
    };
    dim("z1 length", m1, z1.len())?;
    dim("z2 length", m2, z2.len())?;
    dim("W1 size", m1, w.w1.len())?;
    dim("W2 size", m2, w.m2)?;
    let m = m1 + m2;
    if m == 0 {
        return Err(IseError::Dimension("no measurement rows".into()));
    }
    check_variant(variant, j.h.is_thin(), m2)?;
    let weights = w.diagonal();

    let mut t = Vec::with_capacity(2 * j.h.nnz() + m);
    for (r, c, v) in j.h.triplets() {
        t.push((r, c, v));
        t.push((m + c, n + r, v.scale(weights[r])));
    }
    for r in 0..m {
        t.push((r, n + r, Interval::point(-1.0)));
    }
    let a = IntervalMatrix::from_triplets(m + n, m + n, t)
        .map_err(|e| IseError::Dimension(e.to_string()))?;
    let b = z1.concat(z2).concat(&IntervalVector::zeros(n));
    Ok(IseSystem {
        a,
        b,
        variant,
        n,
        m1,
        m2,
        weights,
    })
}

/// The physical states: the first `n` entries of a solution.
pub fn extract_states(sol: &IntervalVector, sys: &IseSystem) -> Result<IntervalVector, IseError> {
    if sol.len() != sys.dim() {
        return Err(IseError::Dimension(format!(
            "solution length {} for a system of dimension {}",
            sol.len(),
            sys.dim()
        )));
    }
    Ok(sol[..sys.n].iter().copied().collect())
}

/// Sparse triplet text dump of `[A]` and `[B]`.
///
/// ```text
/// A <rows> <cols> <nnz>
/// <i> <j> <lo> <hi>      (nnz lines)
/// B <len>
/// <i> <lo> <hi>          (len lines)
/// ```
pub fn dump_system(a: &IntervalMatrix, b: &IntervalVector) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "A {} {} {}", a.rows(), a.cols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(s, "{i} {j} {:?} {:?}", v.lo(), v.hi());
    }
    let _ = writeln!(s, "B {}", b.len());
    for (i, v) in b.iter().enumerate() {
        let _ = writeln!(s, "{i} {:?} {:?}", v.lo(), v.hi());
    }
    s
}

pub fn parse_system(text: &str) -> Result<(IntervalMatrix, IntervalVector), IseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, msg: &str| IseError::Parse {
        line,
        msg: msg.to_string(),
    };
    let num = |line: usize, s: Option<&str>| -> Result<usize, IseError> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| err(line, "expected an integer"))
    };
    let real = |line: usize, s: Option<&str>| -> Result<f64, IseError> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| err(line, "expected a number"))
    };
    let ival = |line: usize, lo: f64, hi: f64| {
        Interval::new(lo, hi).map_err(|e| err(line, &e.to_string()))
    };

    let (line, head) = lines.next().ok_or_else(|| err(0, "empty dump"))?;
    let mut f = head.split_whitespace();
    if f.next() != Some("A") {
        return Err(err(line, "expected header 'A rows cols nnz'"));
    }
    let (rows, cols, nnz) = (
        num(line, f.next())?,
        num(line, f.next())?,
        num(line, f.next())?,
    );
    let mut t = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (line, l) = lines
            .next()
            .ok_or_else(|| err(0, "truncated matrix entries"))?;
        let mut f = l.split_whitespace();
        let (i, j) = (num(line, f.next())?, num(line, f.next())?);
        let (lo, hi) = (real(line, f.next())?, real(line, f.next())?);
        t.push((i, j, ival(line, lo, hi)?));
    }
    let a = IntervalMatrix::from_triplets(rows, cols, t).map_err(|e| err(line, &e.to_string()))?;
    let (line, head) = lines
        .next()
        .ok_or_else(|| err(0, "missing 'B len' header"))?;
    let mut f = head.split_whitespace();
    if f.next() != Some("B") {
        return Err(err(line, "expected header 'B len'"));
    }
    let len = num(line, f.next())?;
    let mut b = vec![Interval::ZERO; len];
    for _ in 0..len {
        let (line, l) = lines
            .next()
            .ok_or_else(|| err(0, "truncated vector entries"))?;
        let mut f = l.split_whitespace();
        let i = num(line, f.next())?;
        let (lo, hi) = (real(line, f.next())?, real(line, f.next())?);
        if i >= len {
            return Err(err(line, "index out of range"));
        }
        b[i] = ival(line, lo, hi)?;
    }
    Ok((a, IntervalVector::new(b)))
}
