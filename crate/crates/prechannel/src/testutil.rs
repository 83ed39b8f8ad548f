//! Deterministic pseudo-random fixtures shared by the unit tests.

use ndarray::Array2;
use num_complex::Complex64;

use crate::operator::Op;
use crate::prob::Ensemble;
use crate::stream::CounterStream;
use crate::superop::PreChannel;

const DOMAIN: u64 = 0x7465_7374_7574_696c;

pub(crate) fn random_op(dim: usize, seed: u64) -> Op {
    let mut s = CounterStream::new(DOMAIN, seed);
    Op::from_entries(Array2::from_shape_fn((dim, dim), |_| {
        Complex64::new(s.gaussian(), s.gaussian())
    }))
    .expect("gaussian entries are finite")
}

/// A dense random pre-channel rescaled to unit (2,2) norm, so exponentials
/// and products stay in a numerically comfortable range.
pub(crate) fn random_channel(dim: usize, seed: u64) -> PreChannel {
    let side = dim * dim;
    let mut s = CounterStream::new(DOMAIN ^ 0xff, seed);
    let rep = Array2::from_shape_fn((side, side), |_| {
        Complex64::new(s.gaussian(), s.gaussian())
    });
    let u = PreChannel::from_rep(rep).expect("square representation");
    let norm = u.norm_2_2().expect("norms of random matrices converge");
    u.scaled(Complex64::new(1.0 / norm, 0.0))
}

/// Random ensemble with the given support and non-uniform weights.
pub(crate) fn random_ensemble(dim: usize, support: usize, seed: u64) -> Ensemble {
    let mut s = CounterStream::new(DOMAIN ^ 0xabcd, seed);
    let mut weights: Vec<f64> = (0..support).map(|_| 0.5 + s.unit()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let atoms = weights
        .into_iter()
        .enumerate()
        .map(|(k, w)| (random_channel(dim, seed.wrapping_mul(1009).wrapping_add(k as u64)), w))
        .collect();
    Ensemble::new(atoms).expect("weights normalized above")
}

/// The scalar two-point ensemble `{+a, -a}` with equal weights.
pub(crate) fn two_point_scalar(a: f64) -> Ensemble {
    let plus = PreChannel::scaling(1, Complex64::new(a, 0.0));
    let minus = PreChannel::scaling(1, Complex64::new(-a, 0.0));
    Ensemble::new(vec![(plus, 0.5), (minus, 0.5)]).expect("valid two-point weights")
}
