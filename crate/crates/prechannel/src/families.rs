//! Shipped ensemble generators.
//!
//! Four families cover the experiments: a deterministic symmetric two-point
//! ensemble (the workhorse for convergence-rate checks, since its mean
//! vanishes exactly), Ginibre-style dense random atoms, dissipative
//! commutator-plus-jump generators, and user-supplied atom lists with uniform
//! weights. All random draws are keyed by (family, seed, atom), so a
//! generator block in a config reproduces the same ensemble everywhere.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::operator::Op;
use crate::prob::Ensemble;
use crate::stream::{derive_key, CounterStream};
use crate::superop::PreChannel;

/// Largest matrix dimension the generators accept; enumeration costs and the
/// dense exponentials grow steeply beyond it.
pub const MAX_GENERATED_DIM: usize = 8;

const GINIBRE_DOMAIN: u64 = 0x67696e69_62726500;
const LINDBLAD_DOMAIN: u64 = 0x6c696e64_626c6164;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_GENERATED_DIM {
        return Err(Error::InvalidArgument(format!(
            "generator dimension must be in 1..={MAX_GENERATED_DIM}, got {dim}"
        )));
    }
    Ok(())
}

/// Cyclic shift permutation on basis vectors, `e_j -> e_(j+1 mod d)`;
/// unitary, so its operator norm is exactly 1 in every dimension.
fn cyclic_shift(dim: usize) -> Op {
    let mut m = Array2::<Complex64>::zeros((dim, dim));
    for j in 0..dim {
        m[((j + 1) % dim, j)] = Complex64::new(1.0, 0.0);
    }
    Op::from_raw(m)
}

/// Symmetric two-point ensemble `{+A, -A}` with equal weights, where
/// `A : X -> scale * (S X)` for the cyclic shift S. Deterministic: the atom
/// norm is exactly `scale` and the mean vanishes exactly. In dimension 1 the
/// atoms are the scalars `+scale` and `-scale`.
pub fn two_point(dim: usize, scale: f64) -> Result<Ensemble> {
    check_dim(dim)?;
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "two-point scale must be positive and finite, got {scale}"
        )));
    }
    let shift = cyclic_shift(dim).scaled(Complex64::new(scale, 0.0));
    let plus = PreChannel::from_left_right(&shift, &Op::identity(dim))?;
    let minus = plus.scaled(Complex64::new(-1.0, 0.0));
    Ensemble::new(vec![(plus, 0.5), (minus, 0.5)])
}

/// Atoms with independent complex-Gaussian representation entries, each
/// rescaled so its (2,2) norm equals `norm_budget`. Uniform weights.
pub fn ginibre(dim: usize, atoms: usize, norm_budget: f64, seed: u64) -> Result<Ensemble> {
    check_dim(dim)?;
    check_budget(norm_budget)?;
    let side = dim * dim;
    let mut list = Vec::with_capacity(atoms);
    for k in 0..atoms {
        let mut stream = CounterStream::from_key(derive_key(&[GINIBRE_DOMAIN, seed, k as u64]));
        let rep = Array2::from_shape_fn((side, side), |_| {
            Complex64::new(stream.gaussian(), stream.gaussian()) * std::f64::consts::FRAC_1_SQRT_2
        });
        let raw = PreChannel::from_rep(rep)?;
        list.push((rescale_to_budget(raw, norm_budget)?, 1.0 / atoms as f64));
    }
    Ensemble::new(list)
}

/// Dissipative generators `X -> -i[H, X] + L X L^dagger - (L^dagger L X +
/// X L^dagger L)/2` with random Hermitian `H` and random `L`, rescaled to the
/// norm budget. Uniform weights.
pub fn lindblad_like(dim: usize, atoms: usize, norm_budget: f64, seed: u64) -> Result<Ensemble> {
    check_dim(dim)?;
    check_budget(norm_budget)?;
    let id = Op::identity(dim);
    let mut list = Vec::with_capacity(atoms);
    for k in 0..atoms {
        let mut stream = CounterStream::from_key(derive_key(&[LINDBLAD_DOMAIN, seed, k as u64]));
        let g = Array2::from_shape_fn((dim, dim), |_| {
            Complex64::new(stream.gaussian(), stream.gaussian()) * std::f64::consts::FRAC_1_SQRT_2
        });
        let h = Op::from_raw((&g + &g.t().mapv(|z| z.conj())).mapv(|z| 0.5 * z));
        let l = Op::from_raw(Array2::from_shape_fn((dim, dim), |_| {
            Complex64::new(stream.gaussian(), stream.gaussian()) * std::f64::consts::FRAC_1_SQRT_2
        }));

        let minus_i = Complex64::new(0.0, -1.0);
        let commutator = (&PreChannel::from_left_right(&h, &id)?
            - &PreChannel::from_left_right(&id, &h)?)
            .scaled(minus_i);
        let jump = PreChannel::from_left_right(&l, &l.conj_transpose())?;
        let ll = Op::from_raw(l.conj_transpose().entries().dot(l.entries()));
        let anticomm = (&PreChannel::from_left_right(&ll, &id)?
            + &PreChannel::from_left_right(&id, &ll)?)
            .scaled(Complex64::new(-0.5, 0.0));
        let raw = &(&commutator + &jump) + &anticomm;
        list.push((rescale_to_budget(raw, norm_budget)?, 1.0 / atoms as f64));
    }
    Ensemble::new(list)
}

/// User-supplied atoms with uniform weights.
pub fn uniform_atoms(reps: Vec<PreChannel>) -> Result<Ensemble> {
    if reps.is_empty() {
        return Err(Error::InvalidEnsemble("uniform-atoms needs at least one atom".into()));
    }
    let w = 1.0 / reps.len() as f64;
    Ensemble::new(reps.into_iter().map(|r| (r, w)).collect())
}

fn check_budget(norm_budget: f64) -> Result<()> {
    if !norm_budget.is_finite() || norm_budget <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "norm budget must be positive and finite, got {norm_budget}"
        )));
    }
    Ok(())
}

/// Rescales so the (2,2) norm equals the budget; zero maps stay zero.
fn rescale_to_budget(u: PreChannel, budget: f64) -> Result<PreChannel> {
    let norm = u.norm_2_2()?;
    if norm == 0.0 {
        return Ok(u);
    }
    Ok(u.scaled(Complex64::new(budget / norm, 0.0)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoPointParams {
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_two_point_scale")]
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GinibreParams {
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_ginibre_atoms")]
    atoms: usize,
    #[serde(default = "default_norm_budget")]
    norm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LindbladParams {
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_lindblad_atoms")]
    atoms: usize,
    #[serde(default = "default_norm_budget")]
    norm: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformAtomsParams {
    reps: Vec<PreChannel>,
}

fn default_dim() -> usize {
    2
}
fn default_two_point_scale() -> f64 {
    0.5
}
fn default_ginibre_atoms() -> usize {
    3
}
fn default_lindblad_atoms() -> usize {
    2
}
fn default_norm_budget() -> f64 {
    1.0
}

/// Builds an ensemble from a family name and a JSON parameter object; the
/// dispatch point for generator blocks in configs and for the command line.
pub fn generate(family: &str, params: &serde_json::Value, seed: u64) -> Result<Ensemble> {
    let params = if params.is_null() {
        serde_json::Value::Object(serde_json::Map::new())
    } else {
        params.clone()
    };
    let bad = |e: serde_json::Error| {
        Error::InvalidArgument(format!("bad parameters for family {family:?}: {e}"))
    };
    match family {
        "two-point" => {
            let p: TwoPointParams = serde_json::from_value(params).map_err(bad)?;
            two_point(p.dim, p.scale)
        }
        "ginibre" => {
            let p: GinibreParams = serde_json::from_value(params).map_err(bad)?;
            ginibre(p.dim, p.atoms, p.norm, seed)
        }
        "lindblad-like" => {
            let p: LindbladParams = serde_json::from_value(params).map_err(bad)?;
            lindblad_like(p.dim, p.atoms, p.norm, seed)
        }
        "uniform-atoms" => {
            let p: UniformAtomsParams = serde_json::from_value(params).map_err(bad)?;
            uniform_atoms(p.reps)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown ensemble family {other:?} (expected two-point, ginibre, lindblad-like, or uniform-atoms)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::SchattenExponent;

    #[test]
    fn scalar_two_point_atoms_are_plus_minus_scale() {
        let e = two_point(1, 1.0).unwrap();
        assert_eq!(e.support(), 2);
        let reps: Vec<Complex64> = e.atoms().iter().map(|a| a.channel.rep()[(0, 0)]).collect();
        assert_eq!(reps[0], Complex64::new(1.0, 0.0));
        assert_eq!(reps[1], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn two_point_mean_vanishes_and_norm_is_exact() {
        for dim in 1..=4 {
            let e = two_point(dim, 0.5).unwrap();
            let zero = PreChannel::zero(dim);
            assert_eq!(e.expect().max_entry_distance(&zero).unwrap(), 0.0);
            for atom in e.atoms() {
                assert!((atom.channel.norm_2_2().unwrap() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ginibre_respects_the_norm_budget() {
        let e = ginibre(2, 3, 1.0, 42).unwrap();
        assert_eq!(e.support(), 3);
        for atom in e.atoms() {
            let n = atom.channel.norm_2_2().unwrap();
            assert!(n <= 1.0 + 1e-9, "atom norm {n}");
            assert!(n >= 1.0 - 1e-9, "rescaling is exact, got {n}");
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let a = ginibre(2, 2, 1.0, 7).unwrap();
        let b = ginibre(2, 2, 1.0, 7).unwrap();
        let c = ginibre(2, 2, 1.0, 8).unwrap();
        for (x, y) in a.atoms().iter().zip(b.atoms().iter()) {
            assert_eq!(x.channel.max_entry_distance(&y.channel).unwrap(), 0.0);
        }
        assert!(a.atoms()[0].channel.max_entry_distance(&c.atoms()[0].channel).unwrap() > 1e-3);

        let l1 = lindblad_like(2, 2, 1.0, 5).unwrap();
        let l2 = lindblad_like(2, 2, 1.0, 5).unwrap();
        for (x, y) in l1.atoms().iter().zip(l2.atoms().iter()) {
            assert_eq!(x.channel.max_entry_distance(&y.channel).unwrap(), 0.0);
        }
    }

    #[test]
    fn dissipative_atoms_annihilate_identity_in_adjoint_form() {
        // tr(A(X)) = 0 for all X is equivalent to A^*(I) = 0: the adjoint of
        // the commutator-plus-jump form applied to the identity collapses to
        // L^dagger L - L^dagger L.
        let e = lindblad_like(3, 2, 1.0, 11).unwrap();
        for atom in e.atoms() {
            let img = atom.channel.adjoint().apply(&Op::identity(3)).unwrap();
            let resid = img.schatten_norm(SchattenExponent::TWO).unwrap();
            assert!(resid < 1e-10, "adjoint image of identity has norm {resid}");
        }
    }

    #[test]
    fn uniform_atoms_weighting() {
        let reps = vec![PreChannel::identity(2), PreChannel::zero(2)];
        let e = uniform_atoms(reps).unwrap();
        assert_eq!(e.support(), 2);
        for atom in e.atoms() {
            assert!((atom.prob - 0.5).abs() < 1e-15);
        }
        assert!(uniform_atoms(vec![]).is_err());
    }

    #[test]
    fn generate_dispatches_and_validates() {
        let e = generate("two-point", &serde_json::json!({"dim": 1, "scale": 1.0}), 0).unwrap();
        assert_eq!(e.dim(), 1);
        let e = generate("ginibre", &serde_json::Value::Null, 3).unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.support(), 3);
        assert!(generate("no-such-family", &serde_json::Value::Null, 0).is_err());
        // Unknown parameter names are configuration errors, not silence.
        assert!(generate("two-point", &serde_json::json!({"scal": 0.5}), 0).is_err());
        assert!(generate("two-point", &serde_json::json!({"dim": 0}), 0).is_err());
        assert!(generate("two-point", &serde_json::json!({"dim": 9}), 0).is_err());
        assert!(generate("ginibre", &serde_json::json!({"norm": -1.0}), 0).is_err());
    }
}
