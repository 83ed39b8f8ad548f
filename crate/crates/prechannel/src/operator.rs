//! Finite-dimensional stand-ins for Schatten-class operators.
//!
//! An [`Op`] is a dense complex d x d matrix playing the role of a trace-class
//! element; the Schatten p-norm is computed from its singular values, and the
//! trace pairing `<Y, X> = tr(Y^dagger X)` realizes the duality between the
//! p and p* classes (conjugate-linear in the first slot).

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Exponent of a Schatten norm: a real p in [1, inf), or infinity (the
/// operator norm) kept as an explicit variant so no sentinel float leaks into
/// formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentWire", into = "ExponentWire")]
pub enum SchattenExponent {
    Finite(f64),
    Infinity,
}

impl SchattenExponent {
    pub const ONE: SchattenExponent = SchattenExponent::Finite(1.0);
    pub const TWO: SchattenExponent = SchattenExponent::Finite(2.0);

    /// A finite exponent; rejects p < 1, NaN and infinities (use
    /// [`SchattenExponent::Infinity`] for the operator norm).
    pub fn finite(p: f64) -> Result<Self> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "Schatten exponent must satisfy 1 <= p < inf, got {p}"
            )));
        }
        Ok(SchattenExponent::Finite(p))
    }

    /// Conjugate exponent: 1/p + 1/p* = 1, with 1 and infinity swapped.
    pub fn dual(self) -> Self {
        match self {
            SchattenExponent::Infinity => SchattenExponent::Finite(1.0),
            SchattenExponent::Finite(1.0) => SchattenExponent::Infinity,
            SchattenExponent::Finite(p) => SchattenExponent::Finite(p / (p - 1.0)),
        }
    }

    /// Numeric value, with `f64::INFINITY` for the operator-norm exponent.
    pub fn value(self) -> f64 {
        match self {
            SchattenExponent::Finite(p) => p,
            SchattenExponent::Infinity => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for SchattenExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SchattenExponent::Finite(p) => write!(f, "{p}"),
            SchattenExponent::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentWire {
    Number(f64),
    Text(String),
}

impl TryFrom<ExponentWire> for SchattenExponent {
    type Error = Error;
    fn try_from(w: ExponentWire) -> Result<Self> {
        match w {
            ExponentWire::Number(p) => SchattenExponent::finite(p),
            ExponentWire::Text(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                Ok(SchattenExponent::Infinity)
            }
            ExponentWire::Text(s) => Err(Error::InvalidArgument(format!(
                "unrecognized Schatten exponent {s:?} (expected a number or \"inf\")"
            ))),
        }
    }
}

impl From<SchattenExponent> for ExponentWire {
    fn from(p: SchattenExponent) -> Self {
        match p {
            SchattenExponent::Finite(v) => ExponentWire::Number(v),
            SchattenExponent::Infinity => ExponentWire::Text("inf".into()),
        }
    }
}

/// Dense complex square matrix; the crate's model of a Schatten-class
/// element. Entries are validated finite on every ingestion path.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "OpWire", into = "OpWire")]
pub struct Op {
    entries: Array2<Complex64>,
}

impl Op {
    /// Wraps a square matrix with finite entries.
    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r == 0 || r != c {
            return Err(Error::InvalidData(format!(
                "operator must be square and nonempty, got {r}x{c}"
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidData("operator has non-finite entries".into()));
        }
        Ok(Op { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be at least 1");
        Op { entries: Array2::zeros((dim, dim)) }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "operator dimension must be at least 1");
        Op { entries: Array2::eye(dim) }
    }

    /// Matrix unit e_{ij}: a single 1 at row i, column j.
    pub fn matrix_unit(dim: usize, i: usize, j: usize) -> Self {
        assert!(i < dim && j < dim, "matrix unit index out of range");
        let mut entries = Array2::zeros((dim, dim));
        entries[(i, j)] = Complex64::new(1.0, 0.0);
        Op { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub(crate) fn from_raw(entries: Array2<Complex64>) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Op { entries }
    }

    pub fn conj_transpose(&self) -> Op {
        Op { entries: self.entries.t().mapv(|z| z.conj()) }
    }

    pub fn scaled(&self, c: Complex64) -> Op {
        Op { entries: self.entries.mapv(|z| c * z) }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// Singular values in descending order. Values at the relative noise
    /// floor (below 1e-14 of the largest) are reported as exact zeros.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        linalg::singular_values(&self.entries)
    }

    /// Schatten p-norm `(sum_i sigma_i^p)^(1/p)`, with the operator norm
    /// (largest singular value) at p = infinity.
    pub fn schatten_norm(&self, p: SchattenExponent) -> Result<f64> {
        let sv = self.singular_values()?;
        Ok(match p {
            SchattenExponent::Infinity => sv[0],
            SchattenExponent::Finite(1.0) => sv.iter().sum(),
            SchattenExponent::Finite(2.0) => sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
            SchattenExponent::Finite(p) => {
                // Factor out the largest singular value before raising to p:
                // the ratios live in [0, 1], so s^p cannot underflow to a
                // spurious zero (or overflow) however large p or s gets.
                let top = sv[0];
                if top == 0.0 {
                    0.0
                } else {
                    top * sv.iter().map(|s| (s / top).powf(p)).sum::<f64>().powf(1.0 / p)
                }
            }
        })
    }

    /// Largest entrywise modulus of the difference; a cheap test metric.
    pub fn max_entry_distance(&self, other: &Op) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operators of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(linalg::max_abs_diff(&self.entries, &other.entries))
    }
}

impl std::ops::Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        Op { entries: &self.entries + &rhs.entries }
    }
}

impl std::ops::Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        Op { entries: &self.entries - &rhs.entries }
    }
}

/// Trace pairing `<Y, X> = tr(Y^dagger X)`, conjugate-linear in `y` and
/// linear in `x`. Equals the entrywise sum of `conj(Y_ij) X_ij`.
pub fn pairing(y: &Op, x: &Op) -> Result<Complex64> {
    if y.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pairing of operators with dimension {} and {}",
            y.dim(),
            x.dim()
        )));
    }
    let mut acc = Complex64::ZERO;
    for (a, b) in y.entries.iter().zip(x.entries.iter()) {
        acc += a.conj() * b;
    }
    Ok(acc)
}

#[derive(Serialize, Deserialize)]
struct OpWire {
    dim: usize,
    /// Row-major entries as [re, im] pairs.
    entries: Vec<[f64; 2]>,
}

impl TryFrom<OpWire> for Op {
    type Error = Error;
    fn try_from(w: OpWire) -> Result<Self> {
        if w.dim == 0 {
            return Err(Error::InvalidData("operator dimension must be at least 1".into()));
        }
        if w.entries.len() != w.dim * w.dim {
            return Err(Error::InvalidData(format!(
                "operator of dimension {} needs {} entries, got {}",
                w.dim,
                w.dim * w.dim,
                w.entries.len()
            )));
        }
        let flat: Vec<Complex64> = w.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        let entries = Array2::from_shape_vec((w.dim, w.dim), flat)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        Op::from_entries(entries)
    }
}

impl From<Op> for OpWire {
    fn from(op: Op) -> Self {
        let dim = op.dim();
        let entries = op.entries.iter().map(|z| [z.re, z.im]).collect();
        OpWire { dim, entries }
    }
}
