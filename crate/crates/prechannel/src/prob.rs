//! Finitely supported random pre-channels.
//!
//! An [`Ensemble`] is a finite probability distribution over pre-channels of
//! one dimension. Expectations are exact weighted sums over the support, so
//! the classical identities (expectation commutes with application and with
//! the adjoint, independence factorizes, the variance super-operator is
//! positive) can be verified to floating-point accuracy rather than sampled.
//! Sampling itself is counter-based: the draw for (trial, factor) depends
//! only on those labels and the root seed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{Op, SchattenExponent};
use crate::stream::{derive_key, unit_f64};
use crate::superop::PreChannel;

/// Default cap on ensemble support size; generous for the exhaustive
/// enumerations downstream, which are exponential in the support.
pub const DEFAULT_MAX_SUPPORT: usize = 8;

/// Probabilities must sum to 1 within this tolerance; within it they are
/// renormalized, beyond it the ensemble is rejected.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// One support point: a pre-channel and its probability.
#[derive(Clone, Debug)]
pub struct Atom {
    pub channel: PreChannel,
    pub prob: f64,
}

/// A finite-support distribution over pre-channels of a common dimension.
#[derive(Clone, Debug)]
pub struct Ensemble {
    dim: usize,
    atoms: Vec<Atom>,
}

impl Ensemble {
    /// Validates and normalizes a support list under the default cap.
    pub fn new(atoms: Vec<(PreChannel, f64)>) -> Result<Self> {
        Self::with_support_limit(atoms, DEFAULT_MAX_SUPPORT)
    }

    /// Same as [`Ensemble::new`] with an explicit support cap.
    pub fn with_support_limit(atoms: Vec<(PreChannel, f64)>, limit: usize) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidEnsemble("support must be nonempty".into()));
        }
        if atoms.len() > limit {
            return Err(Error::InvalidEnsemble(format!(
                "support of size {} exceeds the cap of {limit}",
                atoms.len()
            )));
        }
        let dim = atoms[0].0.dim();
        let mut sum = 0.0;
        for (k, (channel, prob)) in atoms.iter().enumerate() {
            if channel.dim() != dim {
                return Err(Error::InvalidEnsemble(format!(
                    "atom {k} has dimension {}, expected {dim}",
                    channel.dim()
                )));
            }
            if !prob.is_finite() || *prob <= 0.0 {
                return Err(Error::InvalidEnsemble(format!(
                    "atom {k} has non-positive probability {prob}"
                )));
            }
            sum += prob;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidEnsemble(format!(
                "probabilities sum to {sum}, outside 1 +/- {PROB_SUM_TOLERANCE}"
            )));
        }
        let atoms = atoms
            .into_iter()
            .map(|(channel, prob)| Atom { channel, prob: prob / sum })
            .collect();
        Ok(Ensemble { dim, atoms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Exact expectation: the probability-weighted sum of the support.
    pub fn expect(&self) -> PreChannel {
        let mut acc = PreChannel::zero(self.dim);
        for atom in &self.atoms {
            acc = &acc + &atom.channel.scaled(num_complex::Complex64::new(atom.prob, 0.0));
        }
        acc
    }

    /// Exact expectation of `f` over the support: `sum_k p_k f(A_k)`.
    pub fn expect_map<F>(&self, mut f: F) -> Result<PreChannel>
    where
        F: FnMut(&PreChannel) -> Result<PreChannel>,
    {
        let mut acc: Option<PreChannel> = None;
        for atom in &self.atoms {
            let image = f(&atom.channel)?;
            let scaled = image.scaled(num_complex::Complex64::new(atom.prob, 0.0));
            acc = Some(match acc {
                None => scaled,
                Some(a) => {
                    if a.dim() != scaled.dim() {
                        return Err(Error::DimensionMismatch(
                            "expect_map images have mixed dimensions".into(),
                        ));
                    }
                    &a + &scaled
                }
            });
        }
        Ok(acc.expect("support is nonempty"))
    }

    /// The centered ensemble: every atom shifted by the expectation, same
    /// probabilities. Its expectation vanishes to rounding.
    pub fn centered(&self) -> Ensemble {
        let mean = self.expect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { channel: &a.channel - &mean, prob: a.prob })
            .collect();
        Ensemble { dim: self.dim, atoms }
    }

    /// Variance super-operator `E[(A - EA)^* (A - EA)]`; positive
    /// semidefinite by construction.
    pub fn variance_superop(&self) -> PreChannel {
        let mean = self.expect();
        let mut acc = PreChannel::zero(self.dim);
        for atom in &self.atoms {
            let d = &atom.channel - &mean;
            let term = d.adjoint().compose(&d).expect("dimensions agree by construction");
            acc = &acc + &term.scaled(num_complex::Complex64::new(atom.prob, 0.0));
        }
        acc
    }

    /// Support indices of `n` i.i.d. draws for the given seed. The k-th draw
    /// depends only on (root, trial, k).
    pub fn sample_indices(&self, n: usize, seed: &SeedSpec) -> Vec<usize> {
        let mut cumulative = Vec::with_capacity(self.atoms.len());
        let mut acc = 0.0;
        for atom in &self.atoms {
            acc += atom.prob;
            cumulative.push(acc);
        }
        (0..n)
            .map(|k| {
                let u = seed.uniform(k as u64);
                cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(self.atoms.len() - 1)
            })
            .collect()
    }

    /// `n` i.i.d. draws from the support.
    pub fn sample_iid(&self, n: usize, seed: &SeedSpec) -> Vec<PreChannel> {
        self.sample_indices(n, seed)
            .into_iter()
            .map(|k| self.atoms[k].channel.clone())
            .collect()
    }
}

/// Deterministic seed key: a root seed plus the trial label. The
/// factor label is supplied per draw, so any (trial, factor) cell of the
/// sampling table can be reproduced in isolation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root: u64,
    pub trial: u64,
}

impl SeedSpec {
    pub fn new(root: u64) -> Self {
        SeedSpec { root, trial: 0 }
    }

    pub fn for_trial(&self, trial: u64) -> Self {
        SeedSpec { root: self.root, trial }
    }

    /// Uniform draw in [0, 1) for the given factor label.
    pub fn uniform(&self, factor: u64) -> f64 {
        unit_f64(derive_key(&[self.root, self.trial, factor]))
    }
}

/// Chebyshev-type tail bound for a single random pre-channel:
/// `Pr{ ||(A - EA) x||_2 > eps } <= ||(var A) x||_{p*} ||x||_p / eps^2`
/// for 1 <= p <= 2 and its conjugate p*.
pub fn chebyshev_bound(e: &Ensemble, x: &Op, eps: f64, p: SchattenExponent) -> Result<f64> {
    if eps <= 0.0 || eps.is_nan() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let pv = p.value();
    if !(1.0..=2.0).contains(&pv) {
        return Err(Error::InvalidArgument(format!(
            "the tail bound needs 1 <= p <= 2, got {p}"
        )));
    }
    let var = e.variance_superop();
    let vx = var.apply(x)?;
    Ok(vx.schatten_norm(p.dual())? * x.schatten_norm(p)? / (eps * eps))
}

/// Exact tail probability over the finite support:
/// `Pr{ ||(A - EA) x||_2 > eps }` (strict exceedance).
pub fn deviation_prob_exact(e: &Ensemble, x: &Op, eps: f64) -> Result<f64> {
    if eps <= 0.0 || eps.is_nan() {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mean = e.expect();
    let mut prob = 0.0;
    for atom in e.atoms() {
        let dev = (&atom.channel - &mean).apply(x)?.schatten_norm(SchattenExponent::TWO)?;
        if dev > eps {
            prob += atom.prob;
        }
    }
    Ok(prob)
}
