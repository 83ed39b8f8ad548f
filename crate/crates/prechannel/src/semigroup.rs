//! Exponentials of pre-channels and the product structures built from them:
//! evaluation grids, the mean semigroup, sampled factor products, centered
//! factors, and the position-indexed terms of the binomial expansion of a
//! product around its mean.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::Op;
use crate::prob::Ensemble;
use crate::superop::{unvectorize, vectorize, PreChannel};

/// Hard ceiling on `||A||_(2,2) * |t|` for a single exponential. Beyond this
/// the scaling-and-squaring result is dominated by rounding noise, so the
/// call is refused rather than silently degraded.
pub const EXPM_NORM_BUDGET: f64 = 32.0;

/// Padé-13 threshold: below this scaled norm the unsquared approximant is
/// already at round-off accuracy.
const PADE13_THETA: f64 = 5.371_920_351_148_152;

const PADE13_B: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Strictly increasing evaluation times starting at 0.
///
/// The degenerate single-point grid `{0}` is accepted so a caller can probe
/// the time origin alone; every multi-point grid must end at a positive
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    /// `count` equally spaced points from 0 to `t_max` inclusive.
    pub fn uniform(t_max: f64, count: usize) -> Result<TimeGrid> {
        if !t_max.is_finite() || t_max <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grid horizon must be positive and finite, got {t_max}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "a uniform grid needs at least 2 points, got {count}"
            )));
        }
        // Dividing per point keeps the endpoints exact: k/(count-1) is 0.0
        // at k = 0 and exactly 1.0 at k = count-1, so the grid ends on
        // t_max itself rather than one rounding step away from it.
        let last = (count - 1) as f64;
        let points = (0..count).map(|k| t_max * (k as f64 / last)).collect();
        Ok(TimeGrid { points })
    }

    /// Explicit points; must start at exactly 0 and strictly increase.
    pub fn from_points(points: Vec<f64>) -> Result<TimeGrid> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty time grid".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time grids start at 0, got first point {}",
                points[0]
            )));
        }
        for w in points.windows(2) {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::InvalidArgument(format!(
                    "grid points must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Largest grid point.
    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grids are nonempty")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `exp(A t)` by Padé-13 with scaling and squaring.
///
/// Fails with `ExpmOverflow` when `||A||_(2,2) |t|` exceeds
/// [`EXPM_NORM_BUDGET`] and with the usual argument errors otherwise.
pub fn expm(a: &PreChannel, t: f64) -> Result<PreChannel> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("exponential time must be finite, got {t}")));
    }
    let side = a.rep().nrows();
    let scaled = a.rep().mapv(|z| z * t);
    let sigma = linalg::sigma_max(&scaled)?;
    if sigma > EXPM_NORM_BUDGET {
        return Err(Error::ExpmOverflow(format!(
            "||A||*|t| = {sigma:.3e} exceeds the exponential budget {EXPM_NORM_BUDGET}"
        )));
    }

    let squarings = if sigma > PADE13_THETA {
        (sigma / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let m = scaled.mapv(|z| z / f64::powi(2.0, squarings as i32));

    let b = &PADE13_B;
    let eye = Array2::<Complex64>::eye(side);
    let m2 = m.dot(&m);
    let m4 = m2.dot(&m2);
    let m6 = m2.dot(&m4);

    let u_inner = &m6.mapv(|z| z * b[13]) + &m4.mapv(|z| z * b[11]) + &m2.mapv(|z| z * b[9]);
    let u_poly = m6.dot(&u_inner)
        + &m6.mapv(|z| z * b[7])
        + &m4.mapv(|z| z * b[5])
        + &m2.mapv(|z| z * b[3])
        + &eye.mapv(|z| z * b[1]);
    let u = m.dot(&u_poly);

    let v_inner = &m6.mapv(|z| z * b[12]) + &m4.mapv(|z| z * b[10]) + &m2.mapv(|z| z * b[8]);
    let v = m6.dot(&v_inner)
        + &m6.mapv(|z| z * b[6])
        + &m4.mapv(|z| z * b[4])
        + &m2.mapv(|z| z * b[2])
        + &eye.mapv(|z| z * b[0]);

    let mut f = linalg::solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        f = f.dot(&f);
    }
    Ok(PreChannel::from_raw(a.dim(), f))
}

/// `E exp(A t)`: the probability-weighted mixture of atom exponentials.
pub fn mean_semigroup(e: &Ensemble, t: f64) -> Result<PreChannel> {
    e.expect_map(|a| expm(a, t))
}

/// Ordered product `exp(A_1 t/n) exp(A_2 t/n) ... exp(A_n t/n)` for the given
/// factor sequence; the first factor is the leftmost.
pub fn composition_w(factors: &[PreChannel], t: f64) -> Result<PreChannel> {
    let n = factors.len();
    if n == 0 {
        return Err(Error::InvalidArgument("a sampled product needs at least one factor".into()));
    }
    let tau = t / n as f64;
    let mut acc = expm(&factors[0], tau)?;
    for f in &factors[1..] {
        acc = acc.compose(&expm(f, tau)?)?;
    }
    Ok(acc)
}

/// Centered exponential `exp(A t) - E exp(A t)`.
pub fn delta(e: &Ensemble, a: &PreChannel, t: f64) -> Result<PreChannel> {
    if a.dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "atom of dimension {} against ensemble of dimension {}",
            a.dim(),
            e.dim()
        )));
    }
    Ok(&expm(a, t)? - &mean_semigroup(e, t)?)
}

/// One term of the binomial expansion of an n-fold product around the mean
/// factor `M = E exp(A t)`: centered factors occupy the 1-based `positions`
/// (strictly increasing) and every other slot holds `M`.
///
/// `t` is the per-factor time; callers expanding a product over `[0, T]`
/// pass `T/n`.
pub fn f_term(
    e: &Ensemble,
    n: usize,
    positions: &[usize],
    deltas: &[PreChannel],
    t: f64,
) -> Result<PreChannel> {
    let m = mean_semigroup(e, t)?;
    f_term_with(&m, n, positions, deltas)
}

/// Same as [`f_term`] but with the mean factor supplied, so a caller
/// enumerating many terms computes it once.
pub fn f_term_with(
    m: &PreChannel,
    n: usize,
    positions: &[usize],
    deltas: &[PreChannel],
) -> Result<PreChannel> {
    if n == 0 {
        return Err(Error::InvalidArgument("expansion terms need at least one slot".into()));
    }
    if positions.len() != deltas.len() {
        return Err(Error::InvalidArgument(format!(
            "{} positions against {} centered factors",
            positions.len(),
            deltas.len()
        )));
    }
    let mut prev = 0usize;
    for &pos in positions {
        if pos <= prev || pos > n {
            return Err(Error::InvalidArgument(format!(
                "positions must strictly increase within 1..={n}, got {positions:?}"
            )));
        }
        prev = pos;
    }
    for d in deltas {
        if d.dim() != m.dim() {
            return Err(Error::DimensionMismatch(format!(
                "centered factor of dimension {} against mean of dimension {}",
                d.dim(),
                m.dim()
            )));
        }
    }

    let side = m.rep().nrows();
    let mut acc = Array2::<Complex64>::eye(side);
    let mut cursor = 0usize;
    for (k, &pos) in positions.iter().enumerate() {
        let gap = pos - cursor - 1;
        if gap > 0 {
            acc = acc.dot(&linalg::matpow(m.rep(), gap));
        }
        acc = acc.dot(deltas[k].rep());
        cursor = pos;
    }
    if n > cursor {
        acc = acc.dot(&linalg::matpow(m.rep(), n - cursor));
    }
    Ok(PreChannel::from_raw(m.dim(), acc))
}

/// Largest deviation over the grid between the limit semigroup at the mean
/// generator and the n-th power of the mean single-step factor, measured on
/// `x` in Schatten-2:
/// `max_t || (exp(E[A] t) - (E exp(A t/n))^n) x ||_2`.
pub fn chernoff_error(e: &Ensemble, x: &Op, n: usize, grid: &TimeGrid) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("the factor count must be at least 1".into()));
    }
    if x.dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "direction of dimension {} against ensemble of dimension {}",
            x.dim(),
            e.dim()
        )));
    }
    let mean = e.expect();
    let xv = vectorize(x);
    let mut worst = 0.0f64;
    for &t in grid.points() {
        let target = expm(&mean, t)?;
        let step = mean_semigroup(e, t / n as f64)?;
        let diff = &target.rep().dot(&xv) - &linalg::matpow(step.rep(), n).dot(&xv);
        let dev = unvectorize(&diff)?.schatten_norm(crate::operator::SchattenExponent::TWO)?;
        if dev > worst {
            worst = dev;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::operator::SchattenExponent;
    use crate::prob::SeedSpec;
    use crate::superop::sot_distance;
    use crate::testutil::{random_channel, random_ensemble, random_op};

    fn scalar_channel(z: Complex64) -> PreChannel {
        PreChannel::scaling(1, z)
    }

    #[test]
    fn grid_construction_and_validation() {
        let g = TimeGrid::uniform(1.0, 65).unwrap();
        assert_eq!(g.len(), 65);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.horizon(), 1.0);
        for w in g.points().windows(2) {
            assert!(w[1] > w[0]);
        }

        assert!(TimeGrid::uniform(0.0, 5).is_err());
        assert!(TimeGrid::uniform(-1.0, 5).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());

        let g = TimeGrid::from_points(vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(g.horizon(), 1.0);
        // The origin alone is allowed; it probes the identity configuration.
        let g = TimeGrid::from_points(vec![0.0]).unwrap();
        assert_eq!(g.horizon(), 0.0);

        assert!(TimeGrid::from_points(vec![]).is_err());
        assert!(TimeGrid::from_points(vec![0.1, 0.2]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_points(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn exponential_of_zero_time_is_identity() {
        let u = random_channel(2, 917);
        let id = PreChannel::identity(2);
        assert_eq!(expm(&u, 0.0).unwrap().max_entry_distance(&id).unwrap(), 0.0);
    }

    #[test]
    fn scalar_exponential_matches_libm() {
        for (z, t) in [
            (Complex64::new(0.7, -0.3), 1.3),
            (Complex64::new(-2.0, 1.0), 0.5),
            (Complex64::new(0.0, 3.0), 2.0),
        ] {
            let got = expm(&scalar_channel(z), t).unwrap().rep()[(0, 0)];
            let want = (z * t).exp();
            assert!((got - want).norm() < 1e-13 * want.norm().max(1.0));
        }
    }

    #[test]
    fn diagonal_representation_exponentiates_entrywise() {
        let lambdas = [
            Complex64::new(0.3, 1.1),
            Complex64::new(-0.9, 0.0),
            Complex64::new(0.0, -2.0),
            Complex64::new(1.4, 0.4),
        ];
        let mut rep = Array2::<Complex64>::zeros((4, 4));
        for (i, l) in lambdas.iter().enumerate() {
            rep[(i, i)] = *l;
        }
        let u = PreChannel::from_rep(rep).unwrap();
        let e = expm(&u, 0.8).unwrap();
        for (i, l) in lambdas.iter().enumerate() {
            let want = (l * 0.8).exp();
            assert!((e.rep()[(i, i)] - want).norm() < 1e-13 * want.norm());
        }
    }

    #[test]
    fn nilpotent_exponential_truncates_exactly() {
        // N^2 = 0 so left multiplication by N squares to zero as well, and
        // the series stops after the linear term.
        let mut n = Array2::<Complex64>::zeros((2, 2));
        n[(0, 1)] = Complex64::new(1.0, 0.0);
        let ln = PreChannel::from_left_right(&Op::from_entries(n).unwrap(), &Op::identity(2))
            .unwrap();
        let t = 0.37;
        let got = expm(&ln, t).unwrap();
        let want = &PreChannel::identity(2) + &ln.scaled(Complex64::new(t, 0.0));
        assert!(got.max_entry_distance(&want).unwrap() < 1e-14);
    }

    #[test]
    fn semigroup_law_holds_through_squaring_thresholds() {
        // Spans both the no-squaring regime and several squaring levels.
        for (seed, s, t) in [(1u64, 0.3, 0.4), (2, 1.0, 2.0), (3, 7.0, 9.0), (4, 12.0, 17.0)] {
            let u = random_channel(2, seed);
            let a = expm(&u, s).unwrap().compose(&expm(&u, t).unwrap()).unwrap();
            let b = expm(&u, s + t).unwrap();
            let scale = b.norm_2_2().unwrap().max(1.0);
            assert!(
                a.max_entry_distance(&b).unwrap() < 1e-10 * scale,
                "seed {seed}: law residual {}",
                a.max_entry_distance(&b).unwrap()
            );
        }
    }

    #[test]
    fn exponential_commutes_with_adjoint() {
        let u = random_channel(3, 55);
        let a = expm(&u.adjoint(), 0.9).unwrap();
        let b = expm(&u, 0.9).unwrap().adjoint();
        assert!(a.max_entry_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn exponential_norm_budget_is_enforced() {
        let u = PreChannel::scaling(2, Complex64::new(40.0, 0.0));
        assert!(matches!(expm(&u, 1.0), Err(Error::ExpmOverflow(_))));
        // Inside the budget the same generator is fine.
        assert!(expm(&u, 0.5).is_ok());
        assert!(expm(&u, f64::NAN).is_err());
    }

    #[test]
    fn mean_semigroup_mixes_atom_exponentials() {
        let e = random_ensemble(2, 3, 71);
        let t = 0.6;
        let want = e
            .atoms()
            .iter()
            .map(|a| Ok(expm(&a.channel, t)?.scaled(Complex64::new(a.prob, 0.0))))
            .try_fold(PreChannel::zero(2), |acc, term: crate::error::Result<_>| {
                crate::error::Result::Ok(&acc + &term?)
            })
            .unwrap();
        let got = mean_semigroup(&e, t).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-15);

        let id = PreChannel::identity(2);
        assert!(mean_semigroup(&e, 0.0).unwrap().max_entry_distance(&id).unwrap() < 1e-15);
    }

    #[test]
    fn symmetric_commutator_mean_matches_cosh_form() {
        // For the two-point ensemble {+A, -A} the mean semigroup is
        // (exp(At) + exp(-At))/2 by definition; check through the families
        // constructor end to end.
        let e = families::two_point(2, 0.5).unwrap();
        let a = &e.atoms()[0].channel;
        let t = 1.2;
        let want = &expm(a, t)
            .unwrap()
            .scaled(Complex64::new(0.5, 0.0))
            + &expm(&a.scaled(Complex64::new(-1.0, 0.0)), t)
                .unwrap()
                .scaled(Complex64::new(0.5, 0.0));
        let got = mean_semigroup(&e, t).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-14);
    }

    #[test]
    fn sampled_product_with_equal_factors_collapses() {
        let u = random_channel(2, 23);
        let t = 0.9;
        let factors = vec![u.clone(), u.clone(), u.clone()];
        let got = composition_w(&factors, t).unwrap();
        let want = expm(&u, t).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-11);

        let single = composition_w(&factors[..1], t).unwrap();
        assert_eq!(single.max_entry_distance(&want).unwrap(), 0.0);

        assert!(composition_w(&[], 1.0).is_err());
    }

    #[test]
    fn sampled_product_is_order_sensitive() {
        // Left multiplications by non-commuting matrices do not commute, so
        // swapping the factor order must change the product.
        let a = random_channel(2, 301);
        let b = random_channel(2, 302);
        let t = 1.0;
        let ab = composition_w(&[a.clone(), b.clone()], t).unwrap();
        let ba = composition_w(&[b, a], t).unwrap();
        assert!(ab.max_entry_distance(&ba).unwrap() > 1e-6);
    }

    #[test]
    fn sampled_products_follow_the_draw() {
        let e = random_ensemble(2, 3, 88);
        let seed = SeedSpec::new(5);
        let n = 6;
        let idx = e.sample_indices(n, &seed);
        let factors: Vec<PreChannel> =
            idx.iter().map(|&k| e.atoms()[k].channel.clone()).collect();
        let w = composition_w(&factors, 1.0).unwrap();
        // Recompute by hand in the same order.
        let tau = 1.0 / n as f64;
        let mut acc = PreChannel::identity(2);
        for f in &factors {
            acc = acc.compose(&expm(f, tau).unwrap()).unwrap();
        }
        assert!(w.max_entry_distance(&acc).unwrap() < 1e-13);
    }

    #[test]
    fn centered_factors_average_to_zero() {
        let e = random_ensemble(3, 3, 14);
        let t = 0.8;
        let mut acc = PreChannel::zero(3);
        for atom in e.atoms() {
            acc = &acc + &delta(&e, &atom.channel, t).unwrap().scaled(Complex64::new(atom.prob, 0.0));
        }
        assert!(acc.max_entry_distance(&PreChannel::zero(3)).unwrap() < 1e-14);

        // A deterministic ensemble centers to exactly zero.
        let single = crate::prob::Ensemble::new(vec![(random_channel(2, 9), 1.0)]).unwrap();
        let d = delta(&single, &single.atoms()[0].channel, 0.7).unwrap();
        assert_eq!(d.max_entry_distance(&PreChannel::zero(2)).unwrap(), 0.0);

        assert!(delta(&e, &random_channel(2, 1), 0.5).is_err());
    }

    #[test]
    fn expansion_term_with_no_centered_slots_is_the_mean_power() {
        let e = random_ensemble(2, 2, 31);
        let t = 0.25;
        let m = mean_semigroup(&e, t).unwrap();
        let got = f_term(&e, 4, &[], &[], t).unwrap();
        assert_eq!(got.max_entry_distance(&m.pow(4)).unwrap(), 0.0);
    }

    #[test]
    fn expansion_term_with_all_slots_centered_is_the_delta_product() {
        let e = random_ensemble(2, 2, 32);
        let t = 0.4;
        let d0 = delta(&e, &e.atoms()[0].channel, t).unwrap();
        let d1 = delta(&e, &e.atoms()[1].channel, t).unwrap();
        let got = f_term(&e, 2, &[1, 2], &[d0.clone(), d1.clone()], t).unwrap();
        let want = d0.compose(&d1).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-14);
    }

    #[test]
    fn expansion_term_places_factors_by_position() {
        let e = random_ensemble(2, 2, 33);
        let t = 0.3;
        let m = mean_semigroup(&e, t).unwrap();
        let d = delta(&e, &e.atoms()[1].channel, t).unwrap();
        let got = f_term(&e, 4, &[2], std::slice::from_ref(&d), t).unwrap();
        let want = m.compose(&d).unwrap().compose(&m.pow(2)).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-14);

        let got = f_term(&e, 4, &[2, 4], &[d.clone(), d.clone()], t).unwrap();
        let want = m.compose(&d).unwrap().compose(&m).unwrap().compose(&d).unwrap();
        assert!(got.max_entry_distance(&want).unwrap() < 1e-14);
    }

    #[test]
    fn expansion_term_is_linear_in_each_slot() {
        let e = random_ensemble(2, 2, 34);
        let t = 0.5;
        let d = delta(&e, &e.atoms()[0].channel, t).unwrap();
        let scaled = d.scaled(Complex64::new(2.5, -1.0));
        let base = f_term(&e, 3, &[2], &[d], t).unwrap();
        let bumped = f_term(&e, 3, &[2], &[scaled], t).unwrap();
        let want = base.scaled(Complex64::new(2.5, -1.0));
        assert!(bumped.max_entry_distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn expansion_term_rejects_bad_positions() {
        let e = random_ensemble(2, 2, 35);
        let d = delta(&e, &e.atoms()[0].channel, 0.5).unwrap();
        assert!(f_term(&e, 3, &[0], std::slice::from_ref(&d), 0.5).is_err());
        assert!(f_term(&e, 3, &[4], std::slice::from_ref(&d), 0.5).is_err());
        assert!(f_term(&e, 3, &[2, 2], &[d.clone(), d.clone()], 0.5).is_err());
        assert!(f_term(&e, 3, &[3, 1], &[d.clone(), d.clone()], 0.5).is_err());
        assert!(f_term(&e, 3, &[1, 2], std::slice::from_ref(&d), 0.5).is_err());
        assert!(f_term(&e, 0, &[], &[], 0.5).is_err());
    }

    #[test]
    fn mean_of_sampled_products_factorizes_by_independence() {
        // E[W_n(t)] = (E exp(A t/n))^n: enumerate every factor tuple with its
        // probability and compare against the power of the mean step.
        for (support, n) in [(2usize, 3usize), (3, 2)] {
            let e = random_ensemble(2, support, 600 + n as u64);
            let t = 0.8;
            let tau = t / n as f64;
            let exps: Vec<PreChannel> =
                e.atoms().iter().map(|a| expm(&a.channel, tau).unwrap()).collect();
            let mut acc = PreChannel::zero(2);
            for tuple in 0..support.pow(n as u32) {
                let mut rest = tuple;
                let mut w = PreChannel::identity(2);
                let mut p = 1.0;
                for _ in 0..n {
                    let k = rest % support;
                    rest /= support;
                    w = w.compose(&exps[k]).unwrap();
                    p *= e.atoms()[k].prob;
                }
                acc = &acc + &w.scaled(Complex64::new(p, 0.0));
            }
            let want = mean_semigroup(&e, tau).unwrap().pow(n);
            assert!(
                acc.max_entry_distance(&want).unwrap() < 1e-12,
                "support {support}, n {n}"
            );
        }
    }

    #[test]
    fn trotter_error_vanishes_for_deterministic_ensembles() {
        let single = crate::prob::Ensemble::new(vec![(random_channel(2, 77), 1.0)]).unwrap();
        let grid = TimeGrid::uniform(1.0, 9).unwrap();
        let x = random_op(2, 78);
        let err = chernoff_error(&single, &x, 4, &grid).unwrap();
        assert!(err < 1e-10, "got {err}");
    }

    #[test]
    fn trotter_error_halves_when_the_factor_count_doubles() {
        let e = families::two_point(2, 0.5).unwrap();
        let x = Op::matrix_unit(2, 0, 0);
        let grid = TimeGrid::uniform(1.0, 17).unwrap();
        let mut prev = chernoff_error(&e, &x, 8, &grid).unwrap();
        assert!(prev > 0.0);
        for n in [16usize, 32] {
            let next = chernoff_error(&e, &x, n, &grid).unwrap();
            let ratio = next / prev;
            assert!(
                (0.3..=0.7).contains(&ratio),
                "n {n}: ratio {ratio} outside the first-order band"
            );
            prev = next;
        }
    }

    #[test]
    fn trotter_error_requires_matching_dimension_and_positive_n() {
        let e = families::two_point(2, 0.5).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        assert!(chernoff_error(&e, &Op::identity(3), 2, &grid).is_err());
        assert!(chernoff_error(&e, &Op::identity(2), 0, &grid).is_err());
    }

    #[test]
    fn strong_operator_distance_of_semigroups_shrinks_with_time() {
        // Continuity at the origin: exp(Ut)x -> x as t -> 0.
        let u = random_channel(2, 99);
        let x = random_op(2, 100);
        let id = PreChannel::identity(2);
        let mut prev = f64::INFINITY;
        for t in [1.0, 0.5, 0.25, 0.125] {
            let d = sot_distance(&expm(&u, t).unwrap(), &id, &x, SchattenExponent::TWO).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }
}
