//! Dense complex linear algebra for small matrices.
//!
//! Everything in the crate lives on matrices of side at most d^2 with d <= 8,
//! so the routines here favour robustness and bit-reproducibility over
//! asymptotic speed: one-sided Jacobi for singular values (high relative
//! accuracy, no external BLAS/LAPACK), Gaussian elimination with partial
//! pivoting for the linear solves inside the exponential, and fixed-order
//! accumulation everywhere so results do not depend on scheduling.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const MAX_JACOBI_SWEEPS: usize = 64;

/// Singular values below `SV_ZERO_CUTOFF * sigma_max` are reported as exact
/// zeros; they sit at the noise floor of the sweep.
pub(crate) const SV_ZERO_CUTOFF: f64 = 1e-14;

/// Result of a full one-sided Jacobi pass: `a = u_scaled * v.H` with the
/// columns of `u_scaled` equal to `sigma[i] * u_i` and `v` unitary. Columns
/// are sorted by descending singular value.
pub(crate) struct Svd {
    pub sigma: Vec<f64>,
    pub u_scaled: Array2<Complex64>,
    pub v: Array2<Complex64>,
}

/// One-sided (Hestenes) Jacobi orthogonalization of the columns of a square
/// complex matrix. Converges quadratically; the sweep budget is generous for
/// side <= 64 and running out of it is reported as an error rather than
/// silently returning stale values.
pub(crate) fn jacobi_svd(a: &Array2<Complex64>) -> Result<Svd> {
    let (m, n) = a.dim();
    debug_assert_eq!(m, n, "jacobi_svd expects square input");
    let mut w = a.clone();
    // Entries far outside [1e-150, 1e150] would overflow or underflow the
    // squared column norms; pull the whole matrix back to unit scale and
    // restore the factor on the way out. Ordinary inputs are untouched.
    let amax = w.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    let rescale =
        if amax.is_finite() && amax > 0.0 && !(1e-150..=1e150).contains(&amax) { amax } else { 1.0 };
    if rescale != 1.0 {
        w.mapv_inplace(|z| z / rescale);
    }
    let mut v = Array2::<Complex64>::eye(n);
    // Columns this far below the largest one are settled zeros: they are
    // reported as exact zeros at the end, rotations cannot grow them back by
    // more than their own size, and polishing them wastes sweeps (or, for
    // rank-deficient input, underflows and never terminates).
    let zero_sq = (0..n)
        .map(|j| (0..m).map(|r| w[(r, j)].norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
        * (SV_ZERO_CUTOFF * SV_ZERO_CUTOFF);
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::ZERO;
                for r in 0..m {
                    let x = w[(r, p)];
                    let y = w[(r, q)];
                    app += x.norm_sqr();
                    aqq += y.norm_sqr();
                    apq += x.conj() * y;
                }
                let off = apq.norm();
                // The Gram entry is an m-term accumulation, so anything below
                // m*eps relative to the column norms is indistinguishable
                // from zero; a tighter cutoff can cycle without converging.
                // Taking square roots separately keeps the floor from
                // underflowing for very small columns.
                let floor = m as f64 * f64::EPSILON * app.sqrt() * aqq.sqrt();
                if app <= zero_sq || aqq <= zero_sq || off <= floor {
                    continue;
                }
                rotated = true;
                // Phase that makes the off-diagonal Gram entry real, then the
                // classical real rotation zeroing it.
                let unit = apq / off;
                let tau = (aqq - app) / (2.0 * off);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let su = sn * unit;
                let suc = sn * unit.conj();
                for r in 0..m {
                    let x = w[(r, p)];
                    let y = w[(r, q)];
                    w[(r, p)] = cs * x - suc * y;
                    w[(r, q)] = su * x + cs * y;
                }
                for r in 0..n {
                    let x = v[(r, p)];
                    let y = v[(r, q)];
                    v[(r, p)] = cs * x - suc * y;
                    v[(r, q)] = su * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps > MAX_JACOBI_SWEEPS {
            return Err(Error::SvdNoConvergence(MAX_JACOBI_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|r| w[(r, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let top = norms[order[0]];
    let mut sigma = Vec::with_capacity(n);
    let mut u_scaled = Array2::<Complex64>::zeros((m, n));
    let mut v_sorted = Array2::<Complex64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let s = if norms[src] < SV_ZERO_CUTOFF * top { 0.0 } else { norms[src] * rescale };
        sigma.push(s);
        for r in 0..m {
            u_scaled[(r, dst)] = w[(r, src)] * rescale;
        }
        for r in 0..n {
            v_sorted[(r, dst)] = v[(r, src)];
        }
    }
    Ok(Svd { sigma, u_scaled, v: v_sorted })
}

/// Singular values of a square complex matrix, descending.
pub(crate) fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    Ok(jacobi_svd(a)?.sigma)
}

/// Largest singular value.
pub(crate) fn sigma_max(a: &Array2<Complex64>) -> Result<f64> {
    Ok(jacobi_svd(a)?.sigma[0])
}

/// Smallest eigenvalue of a Hermitian matrix, via two singular value passes:
/// with mu = sigma_max(h) >= lambda_max, the matrix mu*I - h is positive
/// semidefinite, so sigma_max(mu*I - h) = mu - lambda_min exactly.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn hermitian_min_eigenvalue(h: &Array2<Complex64>) -> Result<f64> {
    let n = h.nrows();
    let mu = sigma_max(h)?;
    let mut shifted = h.mapv(|z| -z);
    for i in 0..n {
        shifted[(i, i)] += Complex64::new(mu, 0.0);
    }
    Ok(mu - sigma_max(&shifted)?)
}

/// Solves `a x = b` for matrix right-hand sides by Gaussian elimination with
/// partial pivoting. The only in-crate caller is the Pade denominator, which
/// is well conditioned by construction of the scaling step.
pub(crate) fn solve(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "solve: lhs is {}x{}, rhs has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let k = b.ncols();
    let mut lhs = a.clone();
    let mut rhs = b.clone();

    for col in 0..n {
        let mut pivot = col;
        let mut best = lhs[(col, col)].norm();
        for row in (col + 1)..n {
            let mag = lhs[(row, col)].norm();
            if mag > best {
                best = mag;
                pivot = row;
            }
        }
        if best == 0.0 {
            return Err(Error::InvalidData("singular linear system".into()));
        }
        if pivot != col {
            for j in 0..n {
                lhs.swap((col, j), (pivot, j));
            }
            for j in 0..k {
                rhs.swap((col, j), (pivot, j));
            }
        }
        let diag = lhs[(col, col)];
        for row in (col + 1)..n {
            let factor = lhs[(row, col)] / diag;
            if factor == Complex64::ZERO {
                continue;
            }
            for j in col..n {
                let v = lhs[(col, j)];
                lhs[(row, j)] -= factor * v;
            }
            for j in 0..k {
                let v = rhs[(col, j)];
                rhs[(row, j)] -= factor * v;
            }
        }
    }

    let mut x = Array2::<Complex64>::zeros((n, k));
    for j in 0..k {
        for row in (0..n).rev() {
            let mut acc = rhs[(row, j)];
            for col in (row + 1)..n {
                acc -= lhs[(row, col)] * x[(col, j)];
            }
            x[(row, j)] = acc / lhs[(row, row)];
        }
    }
    Ok(x)
}

/// `a^n` by binary exponentiation; `a^0` is the identity.
pub(crate) fn matpow(a: &Array2<Complex64>, n: usize) -> Array2<Complex64> {
    let side = a.nrows();
    let mut result = Array2::<Complex64>::eye(side);
    let mut base = a.clone();
    let mut exp = n;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result.dot(&base);
        }
        exp >>= 1;
        if exp > 0 {
            base = base.dot(&base);
        }
    }
    result
}

/// Largest entrywise modulus of `a - b`.
pub(crate) fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Dense matrix-vector product into a caller-provided buffer; the trial
/// kernel runs millions of these on 4x4 blocks and must not allocate.
pub(crate) fn matvec_into(a: &Array2<Complex64>, x: &[Complex64], out: &mut [Complex64]) {
    let (m, n) = a.dim();
    debug_assert_eq!(n, x.len());
    debug_assert_eq!(m, out.len());
    for (r, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for c in 0..n {
            acc += a[(r, c)] * x[c];
        }
        *slot = acc;
    }
}

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn frobenius_norm(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
