//! The experiment engine: Monte-Carlo sweeps of sampled factor products
//! against the limit semigroup, exact lemma verifiers built on exhaustive
//! enumeration, the diagonal second-moment identity, and rate estimation.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{Op, SchattenExponent};
use crate::prob::{chebyshev_bound, deviation_prob_exact, Ensemble, SeedSpec};
use crate::semigroup::{chernoff_error, expm, f_term_with, mean_semigroup, TimeGrid};
use crate::stream::CounterStream;
use crate::superop::{unvectorize, vectorize, PreChannel};

/// Term ceiling for the exhaustive second-moment enumeration:
/// `support^n * 4^n` must stay at or below this.
pub const ENUMERATION_TERM_LIMIT: u128 = 1_000_000;

/// A fully resolved experiment: ensemble, direction, norms, evaluation grid,
/// factor-count schedule, trial count, threshold, and the seed everything is
/// keyed by. `config_hash` is carried verbatim into results so output files
/// name the configuration they came from; programmatic callers may leave it
/// empty.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub ensemble: Ensemble,
    pub x: Op,
    pub p: SchattenExponent,
    pub grid: TimeGrid,
    pub n_schedule: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.x.dim() != self.ensemble.dim() {
            return Err(Error::DimensionMismatch(format!(
                "direction of dimension {} against ensemble of dimension {}",
                self.x.dim(),
                self.ensemble.dim()
            )));
        }
        check_probe_exponent(self.p)?;
        check_schedule(&self.n_schedule)?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("the trial count must be at least 1".into()));
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "the exceedance threshold must be positive and finite, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("the factor-count schedule is empty".into()));
    }
    let mut prev = 0usize;
    for &n in schedule {
        if n == 0 || n <= prev {
            return Err(Error::InvalidArgument(format!(
                "the factor-count schedule must be strictly ascending and positive, got {schedule:?}"
            )));
        }
        prev = n;
    }
    Ok(())
}

fn check_probe_exponent(p: SchattenExponent) -> Result<()> {
    match p {
        SchattenExponent::Finite(v) if v <= 2.0 => Ok(()),
        other => Err(Error::InvalidArgument(format!(
            "deviation statistics are defined for exponents in [1, 2], got {other}"
        ))),
    }
}

/// Statistics for one factor count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n: usize,
    /// Median of the per-trial sup-over-grid deviation.
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    /// Fraction of trials with sup-deviation strictly above the threshold.
    pub exceedance: f64,
    /// Exact distance between the limit semigroup and the n-th power of the
    /// mean step, on the same direction and grid.
    pub chernoff_error: f64,
    /// Reference bound on the per-time exceedance of the centered product:
    /// `max_t ||var(W_n(t)) x||_{p*} ||x||_p / eps^2`, computed exactly from
    /// the i.i.d. second-moment recursion.
    pub chebyshev_bound: f64,
}

/// Everything a sweep produces: the per-n records, a fitted log-log rate
/// (when at least three positive medians exist), and the identifying
/// metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<SweepRecord>,
    pub rate: Option<f64>,
}

/// Per-factor-count median of the Schatten-p sup-deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub n: usize,
    pub median: f64,
}

/// Output of [`conjecture_probe`]. Carries no pass/fail judgement: the
/// measured decay is evidence, not a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeResult {
    pub p: SchattenExponent,
    pub seed: u64,
    pub records: Vec<ProbeRecord>,
    pub note: String,
}

pub const PROBE_NOTE: &str = "empirical evidence only";

/// Per-(grid, n) tables shared by every trial at one factor count: the atom
/// exponentials at step t/n, their probability mixture, and the limit
/// semigroup at the mean generator.
struct StepTables {
    grid: Vec<f64>,
    atom_exps: Vec<Vec<Array2<Complex64>>>,
    step_mean: Vec<Array2<Complex64>>,
    target: Vec<Array2<Complex64>>,
}

fn build_step_tables(e: &Ensemble, grid: &TimeGrid, n: usize) -> Result<StepTables> {
    let mean = e.expect();
    let side = e.dim() * e.dim();
    let mut atom_exps = Vec::with_capacity(grid.len());
    let mut step_mean = Vec::with_capacity(grid.len());
    let mut target = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let tau = t / n as f64;
        let exps: Vec<Array2<Complex64>> = e
            .atoms()
            .iter()
            .map(|a| Ok(expm(&a.channel, tau)?.rep().clone()))
            .collect::<Result<_>>()?;
        let mut mix = Array2::<Complex64>::zeros((side, side));
        for (atom, exp) in e.atoms().iter().zip(exps.iter()) {
            mix = mix + exp.mapv(|z| z * atom.prob);
        }
        atom_exps.push(exps);
        step_mean.push(mix);
        target.push(expm(&mean, t)?.rep().clone());
    }
    Ok(StepTables { grid: grid.points().to_vec(), atom_exps, step_mean, target })
}

/// One trial: draw n factor indices from the seed, push x through the factor
/// chain at every grid time, and return the largest Schatten-`measure`
/// deviation from the limit semigroup.
fn trial_sup_deviation(
    e: &Ensemble,
    tables: &StepTables,
    x: &Op,
    n: usize,
    measure: SchattenExponent,
    seed: &SeedSpec,
) -> Result<f64> {
    let draws = e.sample_indices(n, seed);
    let xv = vectorize(x).to_vec();
    let side = xv.len();
    let mut chain = vec![Complex64::new(0.0, 0.0); side];
    let mut scratch = vec![Complex64::new(0.0, 0.0); side];
    let mut sup = 0.0f64;
    for g in 0..tables.grid.len() {
        // The product applies the rightmost (last-drawn) factor first.
        chain.copy_from_slice(&xv);
        for &k in draws.iter().rev() {
            linalg::matvec_into(&tables.atom_exps[g][k], &chain, &mut scratch);
            std::mem::swap(&mut chain, &mut scratch);
        }
        linalg::matvec_into(&tables.target[g], &xv, &mut scratch);
        let diff = Array1::from_iter(chain.iter().zip(scratch.iter()).map(|(a, b)| a - b));
        let dev = unvectorize(&diff)?.schatten_norm(measure)?;
        if dev > sup {
            sup = dev;
        }
    }
    Ok(sup)
}

/// Draws n i.i.d. factors from the trial seed and returns
/// `max_t || (W_n(t) - exp(E[A] t)) x ||_2` over the grid.
pub fn run_lln_trial(
    e: &Ensemble,
    x: &Op,
    n: usize,
    grid: &TimeGrid,
    trial_seed: &SeedSpec,
) -> Result<f64> {
    if x.dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "direction of dimension {} against ensemble of dimension {}",
            x.dim(),
            e.dim()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("the factor count must be at least 1".into()));
    }
    let tables = build_step_tables(e, grid, n)?;
    trial_sup_deviation(e, &tables, x, n, SchattenExponent::TWO, trial_seed)
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = ((q * m as f64).ceil() as usize).clamp(1, m);
    sorted[rank - 1]
}

/// Exact second moment of the sampled product on the step exponentials:
/// `G_n = E[(E_{k_1}...E_{k_n})^dagger (E_{k_1}...E_{k_n})]`, computed by the
/// i.i.d. conjugation recursion `G_{j+1} = sum_k p_k E_k^dagger G_j E_k`.
fn product_second_moment(
    probs: &[f64],
    exps: &[Array2<Complex64>],
    n: usize,
) -> Array2<Complex64> {
    let side = exps[0].nrows();
    let mut g = Array2::<Complex64>::eye(side);
    for _ in 0..n {
        let mut next = Array2::<Complex64>::zeros((side, side));
        for (p, e) in probs.iter().zip(exps.iter()) {
            let conj = e.t().mapv(|z| z.conj()).dot(&g).dot(e);
            next = next + conj.mapv(|z| z * *p);
        }
        g = next;
    }
    g
}

/// `max_t ||var(W_n(t)) x||_{p*} ||x||_p / eps^2` with the variance assembled
/// exactly from the second-moment recursion and the mean-step power.
fn product_chebyshev_bound(
    e: &Ensemble,
    tables: &StepTables,
    x: &Op,
    n: usize,
    p: SchattenExponent,
    eps: f64,
) -> Result<f64> {
    let probs: Vec<f64> = e.atoms().iter().map(|a| a.prob).collect();
    let xv = vectorize(x);
    let x_norm = x.schatten_norm(p)?;
    let mut worst = 0.0f64;
    for g in 0..tables.grid.len() {
        let second = product_second_moment(&probs, &tables.atom_exps[g], n);
        let mean_pow = linalg::matpow(&tables.step_mean[g], n);
        let var = second - mean_pow.t().mapv(|z| z.conj()).dot(&mean_pow);
        let image = unvectorize(&var.dot(&xv))?;
        let value = image.schatten_norm(p.dual())? * x_norm / (eps * eps);
        if value > worst {
            worst = value;
        }
    }
    Ok(worst)
}

/// Runs the full Monte-Carlo sweep: for each n in the schedule, `trials`
/// independent trials of the sup-deviation in Schatten-2, aggregated into
/// quantiles and the exceedance frequency, alongside the exact product-limit
/// error and the variance reference bound.
///
/// Trials are keyed by (seed, trial index) only, and aggregation follows the
/// trial order, so results are identical at any worker count.
pub fn run_lln_sweep(cfg: &Experiment) -> Result<SweepResult> {
    cfg.validate()?;
    let root = SeedSpec::new(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n_schedule.len());
    for &n in &cfg.n_schedule {
        let tables = build_step_tables(&cfg.ensemble, &cfg.grid, n)?;
        let sups: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                trial_sup_deviation(
                    &cfg.ensemble,
                    &tables,
                    &cfg.x,
                    n,
                    SchattenExponent::TWO,
                    &root.for_trial(trial as u64),
                )
            })
            .collect::<Result<_>>()?;
        let mut sorted = sups.clone();
        sorted.sort_by(f64::total_cmp);
        let exceed = sups.iter().filter(|&&v| v > cfg.eps).count() as f64 / cfg.trials as f64;
        records.push(SweepRecord {
            n,
            median: nearest_rank(&sorted, 0.5),
            q90: nearest_rank(&sorted, 0.9),
            max: sorted[sorted.len() - 1],
            exceedance: exceed,
            chernoff_error: chernoff_error(&cfg.ensemble, &cfg.x, n, &cfg.grid)?,
            chebyshev_bound: product_chebyshev_bound(
                &cfg.ensemble,
                &tables,
                &cfg.x,
                n,
                cfg.p,
                cfg.eps,
            )?,
        });
    }
    let rate = estimate_rate(&records);
    Ok(SweepResult { seed: cfg.seed, config_hash: cfg.config_hash.clone(), records, rate })
}

/// Least-squares slope of log(median) against log(n) over records with
/// positive medians; `None` when fewer than three such records exist.
pub fn estimate_rate(records: &[SweepRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.median > 0.0)
        .map(|r| ((r.n as f64).ln(), r.median.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Same trials as [`run_lln_sweep`] but with the deviation measured in
/// Schatten-p, 1 <= p <= 2. The draws depend only on (seed, trial), so at
/// p = 2 the medians coincide bit-for-bit with the sweep's.
pub fn conjecture_probe(
    e: &Ensemble,
    x: &Op,
    n_schedule: &[usize],
    grid: &TimeGrid,
    p: SchattenExponent,
    trials: usize,
    seed: u64,
) -> Result<ProbeResult> {
    if x.dim() != e.dim() {
        return Err(Error::DimensionMismatch(format!(
            "direction of dimension {} against ensemble of dimension {}",
            x.dim(),
            e.dim()
        )));
    }
    check_probe_exponent(p)?;
    check_schedule(n_schedule)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("the trial count must be at least 1".into()));
    }
    let root = SeedSpec::new(seed);
    let mut records = Vec::with_capacity(n_schedule.len());
    for &n in n_schedule {
        let tables = build_step_tables(e, grid, n)?;
        let sups: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| trial_sup_deviation(e, &tables, x, n, p, &root.for_trial(trial as u64)))
            .collect::<Result<_>>()?;
        let mut sorted = sups;
        sorted.sort_by(f64::total_cmp);
        records.push(ProbeRecord { n, median: nearest_rank(&sorted, 0.5) });
    }
    Ok(ProbeResult { p, seed, records, note: PROBE_NOTE.to_string() })
}

/// The five identities checked by [`verify_lemma_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaMode {
    /// `(E A) x = E (A x)` on a spanning set of directions.
    Integration,
    /// `E (A*) = (E A)*`.
    Adjoint,
    /// `E[B* A B] = 0` for independent A, B with `E A = 0`.
    SuperOp,
    /// `E[A_1 ... A_m] = (E A_1) ... (E A_m)` for independent factors.
    Independence,
    /// Exact tail probability dominated by the variance bound.
    Chebyshev,
}

impl LemmaMode {
    pub const ALL: [LemmaMode; 5] = [
        LemmaMode::Integration,
        LemmaMode::Adjoint,
        LemmaMode::SuperOp,
        LemmaMode::Independence,
        LemmaMode::Chebyshev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaMode::Integration => "integration",
            LemmaMode::Adjoint => "adjoint",
            LemmaMode::SuperOp => "superop",
            LemmaMode::Independence => "independence",
            LemmaMode::Chebyshev => "chebyshev",
        }
    }
}

impl std::fmt::Display for LemmaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LemmaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LemmaMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown lemma mode {s:?}")))
    }
}

/// Outcome of one lemma check: the worst signed residual, the threshold it
/// was judged against, and the verdict. For the identity modes the residual
/// is a norm (nonnegative); for the tail-bound mode it is the largest value
/// of (exact probability - bound), so any positive value is a violation.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub mode: LemmaMode,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

const DIRECTION_DOMAIN: u64 = 0x6c656d6d_61646972;

/// Deterministic generic direction, used to probe identities off the basis.
fn seeded_direction(dim: usize, label: u64) -> Op {
    let mut stream = CounterStream::new(DIRECTION_DOMAIN, label);
    Op::from_entries(Array2::from_shape_fn((dim, dim), |_| {
        Complex64::new(stream.gaussian(), stream.gaussian())
    }))
    .expect("gaussian entries are finite")
}

fn lemma_directions(dim: usize) -> Vec<Op> {
    let mut xs = Vec::with_capacity(dim * dim + 2);
    for i in 0..dim {
        for j in 0..dim {
            xs.push(Op::matrix_unit(dim, i, j));
        }
    }
    xs.push(seeded_direction(dim, 1));
    xs.push(seeded_direction(dim, 2));
    xs
}

/// Checks one expectation identity by exact enumeration over the finite
/// supports. `e2` supplies the independent second ensemble for the modes
/// that need one (`superop`, `independence`) and is ignored otherwise.
///
/// Mode `superop` requires `e` centered (`E A = 0`) and fails the
/// precondition otherwise.
pub fn verify_lemma_suite(e: &Ensemble, e2: &Ensemble, mode: LemmaMode) -> Result<LemmaReport> {
    let report = |residual: f64, threshold: f64| LemmaReport {
        mode,
        residual,
        threshold,
        pass: residual <= threshold,
    };
    match mode {
        LemmaMode::Integration => {
            let mean = e.expect();
            let mut worst = 0.0f64;
            for x in lemma_directions(e.dim()) {
                let lhs = mean.apply(&x)?;
                let mut rhs = Op::zeros(e.dim());
                for atom in e.atoms() {
                    let img = atom.channel.apply(&x)?;
                    rhs = &rhs + &img.scaled(Complex64::new(atom.prob, 0.0));
                }
                worst = worst.max((&lhs - &rhs).schatten_norm(SchattenExponent::TWO)?);
            }
            Ok(report(worst, 1e-12))
        }
        LemmaMode::Adjoint => {
            let lhs = e.expect_map(|a| Ok(a.adjoint()))?;
            let rhs = e.expect().adjoint();
            Ok(report(lhs.max_entry_distance(&rhs)?, 1e-12))
        }
        LemmaMode::SuperOp => {
            let mean_norm = e.expect().norm_2_2()?;
            if mean_norm > 1e-12 {
                return Err(Error::Precondition(format!(
                    "the sandwiched ensemble must be centered; its mean has norm {mean_norm:.3e}"
                )));
            }
            if e.dim() != e2.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "ensembles of dimension {} and {}",
                    e.dim(),
                    e2.dim()
                )));
            }
            let mut acc = PreChannel::zero(e.dim());
            for b in e2.atoms() {
                let b_adj = b.channel.adjoint();
                for a in e.atoms() {
                    let term = b_adj.compose(&a.channel)?.compose(&b.channel)?;
                    acc = &acc + &term.scaled(Complex64::new(a.prob * b.prob, 0.0));
                }
            }
            Ok(report(acc.max_entry_distance(&PreChannel::zero(e.dim()))?, 1e-10))
        }
        LemmaMode::Independence => {
            if e.dim() != e2.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "ensembles of dimension {} and {}",
                    e.dim(),
                    e2.dim()
                )));
            }
            let mut worst = 0.0f64;
            for m in 2..=4usize {
                let factors: Vec<&Ensemble> =
                    (0..m).map(|i| if i % 2 == 0 { e } else { e2 }).collect();
                let mut acc = PreChannel::zero(e.dim());
                let supports: Vec<usize> = factors.iter().map(|f| f.support()).collect();
                let total: usize = supports.iter().product();
                for tuple in 0..total {
                    let mut rest = tuple;
                    let mut w = PreChannel::identity(e.dim());
                    let mut prob = 1.0;
                    for (f, &s) in factors.iter().zip(supports.iter()) {
                        let k = rest % s;
                        rest /= s;
                        w = w.compose(&f.atoms()[k].channel)?;
                        prob *= f.atoms()[k].prob;
                    }
                    acc = &acc + &w.scaled(Complex64::new(prob, 0.0));
                }
                let mut prod = PreChannel::identity(e.dim());
                for f in &factors {
                    prod = prod.compose(&f.expect())?;
                }
                worst = worst.max(acc.max_entry_distance(&prod)?);
            }
            Ok(report(worst, 1e-10))
        }
        LemmaMode::Chebyshev => {
            let mut worst = f64::NEG_INFINITY;
            let exponents = [
                SchattenExponent::ONE,
                SchattenExponent::Finite(4.0 / 3.0),
                SchattenExponent::Finite(1.5),
                SchattenExponent::TWO,
            ];
            for x in lemma_directions(e.dim()) {
                // RMS deviation from the exact quadratic form.
                let centered = e.centered();
                let mut ms = 0.0;
                for atom in centered.atoms() {
                    let img = atom.channel.apply(&x)?;
                    ms += atom.prob * img.schatten_norm(SchattenExponent::TWO)?.powi(2);
                }
                let rms = ms.sqrt();
                let scale = if rms > 0.0 { rms } else { 1e-3 };
                for k in 0..10 {
                    let eps = scale * 0.1 * 30f64.powf(k as f64 / 9.0);
                    let exact = deviation_prob_exact(e, &x, eps)?;
                    for &p in &exponents {
                        let bound = chebyshev_bound(e, &x, eps, p)?;
                        worst = worst.max(exact - bound);
                    }
                }
            }
            Ok(report(worst, 0.0))
        }
    }
}

/// Report from [`verify_diagonal_identity`]: the (2,2)-norm gap between the
/// enumerated second moment of the sampled product and its diagonal
/// expansion, plus the largest off-diagonal (mixed-term) norm when the
/// factor count keeps that audit affordable.
#[derive(Debug, Clone, Serialize)]
pub struct DiagonalReport {
    pub n: usize,
    pub t: f64,
    pub support: usize,
    /// Number of enumerated terms, `support^n * 4^n`.
    pub terms: u128,
    pub residual: f64,
    pub max_cross_term: Option<f64>,
    pub pass: bool,
}

/// Acceptance threshold for the second-moment residual and for every mixed
/// term in the diagonal-identity audit.
pub const DIAGONAL_TOLERANCE: f64 = 1e-10;

/// Verifies by exhaustive enumeration that the expected conjugation
/// `E[W_n(t)* W_n(t)]` equals the sum of `E[F* F]` over position subsets
/// only, every mixed term between distinct subsets vanishing. The mixed-term
/// audit runs for n <= 3, where its pair enumeration is affordable.
pub fn verify_diagonal_identity(e: &Ensemble, n: usize, t: f64) -> Result<DiagonalReport> {
    if n == 0 || n > 4 {
        return Err(Error::InvalidArgument(format!(
            "the factor count must be in 1..=4, got {n}"
        )));
    }
    let s = e.support();
    let terms = (s as u128).pow(n as u32) * 4u128.pow(n as u32);
    if terms > ENUMERATION_TERM_LIMIT {
        return Err(Error::EnumerationTooLarge(format!(
            "support {s} with {n} factors needs {terms} terms, limit {ENUMERATION_TERM_LIMIT}"
        )));
    }

    let side = e.dim() * e.dim();
    let tau = t / n as f64;
    let probs: Vec<f64> = e.atoms().iter().map(|a| a.prob).collect();
    let exps: Vec<Array2<Complex64>> = e
        .atoms()
        .iter()
        .map(|a| Ok(expm(&a.channel, tau)?.rep().clone()))
        .collect::<Result<_>>()?;
    let mean = mean_semigroup(e, tau)?;
    let deltas: Vec<PreChannel> = exps
        .iter()
        .map(|x| &PreChannel::from_raw(e.dim(), x.clone()) - &mean)
        .collect();

    // Route one: direct enumeration of E[W* W] over all factor tuples.
    let mut direct = Array2::<Complex64>::zeros((side, side));
    for tuple in 0..s.pow(n as u32) {
        let mut rest = tuple;
        let mut w = Array2::<Complex64>::eye(side);
        let mut prob = 1.0;
        for _ in 0..n {
            let k = rest % s;
            rest /= s;
            w = w.dot(&exps[k]);
            prob *= probs[k];
        }
        let gram = w.t().mapv(|z| z.conj()).dot(&w);
        direct = direct + gram.mapv(|z| z * prob);
    }

    // Route two: the diagonal sum. For each subset of positions, average
    // F* F over the atoms occupying those positions.
    let mut diagonal = Array2::<Complex64>::zeros((side, side));
    for mask in 0u32..(1 << n) {
        let positions: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let k = positions.len();
        for assign in 0..s.pow(k as u32) {
            let mut rest = assign;
            let mut ds = Vec::with_capacity(k);
            let mut prob = 1.0;
            for _ in 0..k {
                let a = rest % s;
                rest /= s;
                ds.push(deltas[a].clone());
                prob *= probs[a];
            }
            let f = f_term_with(&mean, n, &positions, &ds)?;
            let gram = f.rep().t().mapv(|z| z.conj()).dot(f.rep());
            diagonal = diagonal + gram.mapv(|z| z * prob);
        }
    }

    let residual = linalg::sigma_max(&(&direct - &diagonal))?;

    // Mixed-term audit: every E[F_a* F_b] with a != b must vanish. Atoms at
    // positions shared by both subsets are the same draw; positions in the
    // symmetric difference carry a centered factor linearly, which is what
    // kills the expectation.
    let max_cross_term = if n <= 3 {
        let mut worst = 0.0f64;
        for mask_a in 0u32..(1 << n) {
            for mask_b in 0u32..(1 << n) {
                if mask_a == mask_b {
                    continue;
                }
                let union: Vec<usize> =
                    (0..n).filter(|i| (mask_a | mask_b) >> i & 1 == 1).collect();
                let pos_a: Vec<usize> =
                    (0..n).filter(|i| mask_a >> i & 1 == 1).map(|i| i + 1).collect();
                let pos_b: Vec<usize> =
                    (0..n).filter(|i| mask_b >> i & 1 == 1).map(|i| i + 1).collect();
                let mut acc = Array2::<Complex64>::zeros((side, side));
                for assign in 0..s.pow(union.len() as u32) {
                    let mut rest = assign;
                    let mut atom_at = vec![usize::MAX; n];
                    let mut prob = 1.0;
                    for &i in &union {
                        let a = rest % s;
                        rest /= s;
                        atom_at[i] = a;
                        prob *= probs[a];
                    }
                    let ds_a: Vec<PreChannel> =
                        pos_a.iter().map(|&p| deltas[atom_at[p - 1]].clone()).collect();
                    let ds_b: Vec<PreChannel> =
                        pos_b.iter().map(|&p| deltas[atom_at[p - 1]].clone()).collect();
                    let fa = f_term_with(&mean, n, &pos_a, &ds_a)?;
                    let fb = f_term_with(&mean, n, &pos_b, &ds_b)?;
                    let mixed = fa.rep().t().mapv(|z| z.conj()).dot(fb.rep());
                    acc = acc + mixed.mapv(|z| z * prob);
                }
                worst = worst.max(linalg::sigma_max(&acc)?);
            }
        }
        Some(worst)
    } else {
        None
    };

    let pass = residual <= DIAGONAL_TOLERANCE
        && max_cross_term.map_or(true, |c| c <= DIAGONAL_TOLERANCE);
    Ok(DiagonalReport { n, t, support: s, terms, residual, max_cross_term, pass })
}
