//! Orbit statistics of the shift on `[0,1] x P`.
//!
//! The module walks coset trajectories of digit words, forms Birkhoff
//! averages of the homology-valued observable `phi` and of intersection
//! observables `Delta_x`, and sums Levy-class boundary series. Averages
//! are reported with a distribution-free error estimate: the orbit is
//! split into up to ten consecutive blocks and the empirical standard
//! error of the block means is returned.
//!
//! Homology-valued sums visit the cosets of the rescaled convergent
//! matrices (see `HomologyModel::convergent_labels`), while the orbit
//! trajectory itself is the raw digit walk; the two agree at even steps
//! and differ by the star involution at odd ones.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

use crate::arith::{
    hyperbolic_data, ln_big, ArithError, ConvergentSeq, Mat2, Rational,
};
use crate::cosets::{CosetError, CosetSpace};
use crate::homology::{HomologyError, HomologyModel};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("digit expansion exhausted: have {have}, need {need}")]
    ExpansionExhausted { have: usize, need: usize },
    #[error("lyapunov exponent must be positive, got {0}")]
    NonpositiveLyapunov(f64),
    #[error("empty digit period")]
    EmptyPeriod,
    #[error("invalid pairing vector: {0}")]
    InvalidPairing(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Homology(#[from] HomologyError),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

fn rational_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        let sign = if x.is_negative() { -1.0 } else { 1.0 };
        sign * (ln_big(&x.numer().abs()) - ln_big(&x.denom().abs())).exp()
    })
}

/// A finite stretch of the shift orbit of `(beta, t0)`: the digits
/// consumed, the raw coset trajectory `t_k = t_0 . g_k`, and the
/// convergents of the digit word.
#[derive(Debug, Clone)]
pub struct Orbit {
    digits: Vec<u64>,
    trajectory: Vec<usize>,
    convergents: ConvergentSeq,
}

/// Walks `n` steps of the shift from `(digits, t0)`.
pub fn orbit(
    space: &CosetSpace,
    digits: &[u64],
    t0: usize,
    n: usize,
) -> Result<Orbit, DynamicsError> {
    if digits.len() < n {
        return Err(DynamicsError::ExpansionExhausted { have: digits.len(), need: n });
    }
    if t0 >= space.size() {
        return Err(DynamicsError::Coset(CosetError::BadLabel(t0)));
    }
    let digits = digits[..n].to_vec();
    let convergents = ConvergentSeq::new(&digits)?;
    let mut trajectory = Vec::with_capacity(n + 1);
    trajectory.push(t0);
    let mut t = t0;
    for &a in &digits {
        t = space.rmul_digit(a, t);
        trajectory.push(t);
    }
    Ok(Orbit { digits, trajectory, convergents })
}

impl Orbit {
    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Labels `t_0, ..., t_n` of the raw digit walk.
    pub fn trajectory(&self) -> &[usize] {
        &self.trajectory
    }

    pub fn convergents(&self) -> &ConvergentSeq {
        &self.convergents
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// A Birkhoff average together with its sample length and a block
/// standard error.
#[derive(Debug, Clone)]
pub struct BirkhoffResult<T> {
    pub value: T,
    pub n: usize,
    pub error_estimate: f64,
}

// Accumulates vector-valued summands into up to ten consecutive blocks
// and reports the overall mean and the standard error of block means.
struct BlockAccumulator {
    n: usize,
    dim: usize,
    starts: Vec<usize>,
    block_sums: Vec<Vec<f64>>,
    cursor: usize,
}

impl BlockAccumulator {
    fn new(dim: usize, n: usize) -> Self {
        let blocks = n.clamp(1, 10);
        let starts: Vec<usize> = (0..=blocks).map(|b| b * n / blocks).collect();
        BlockAccumulator {
            n,
            dim,
            starts,
            block_sums: vec![vec![0.0; dim]; blocks],
            cursor: 0,
        }
    }

    fn add(&mut self, k: usize, summand: &[f64]) {
        while k >= self.starts[self.cursor + 1] {
            self.cursor += 1;
        }
        for (slot, v) in self.block_sums[self.cursor].iter_mut().zip(summand) {
            *slot += v;
        }
    }

    fn finish(self) -> (Vec<f64>, f64) {
        let blocks = self.block_sums.len();
        let mut mean = vec![0.0; self.dim];
        for sums in &self.block_sums {
            for (slot, v) in mean.iter_mut().zip(sums) {
                *slot += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= self.n as f64;
        }
        if blocks < 2 {
            return (mean, 0.0);
        }
        let mut variance = 0.0;
        for d in 0..self.dim {
            let block_means: Vec<f64> = (0..blocks)
                .map(|b| {
                    let len = (self.starts[b + 1] - self.starts[b]) as f64;
                    self.block_sums[b][d] / len
                })
                .collect();
            let grand: f64 = block_means.iter().sum::<f64>() / blocks as f64;
            let var: f64 = block_means
                .iter()
                .map(|m| (m - grand).powi(2))
                .sum::<f64>()
                / (blocks - 1) as f64;
            variance += var / blocks as f64;
        }
        (mean, variance.sqrt())
    }
}

fn phi_table(model: &HomologyModel) -> Vec<Vec<f64>> {
    (0..model.space().size())
        .map(|s| model.phi(s).iter().map(rational_to_f64).collect())
        .collect()
}

/// Exact homology-coordinate sum `sum_{k=1..n} phi(t_k)` over the
/// rescaled-convergent labels started at `t0`.
pub fn orbit_class_sum(
    model: &HomologyModel,
    digits: &[u64],
    t0: usize,
    n: usize,
) -> Result<Vec<Rational>, DynamicsError> {
    if digits.len() < n {
        return Err(DynamicsError::ExpansionExhausted { have: digits.len(), need: n });
    }
    let labels = model.convergent_labels_from(&digits[..n], t0)?;
    let mut counts = vec![0i64; model.space().size()];
    for t in labels {
        counts[t] += 1;
    }
    let mut sum = vec![Rational::zero(); model.relative_dim()];
    for (s, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let scale = Rational::from_integer(BigInt::from(count));
        for (slot, v) in sum.iter_mut().zip(model.phi(s)) {
            *slot += &scale * v;
        }
    }
    Ok(sum)
}

/// Limiting modular symbol average `(1/(lyapunov n)) sum_{k<=n}
/// phi(t_k)` with a block standard error on the same scale.
pub fn limiting_symbol(
    model: &HomologyModel,
    digits: &[u64],
    t0: usize,
    n: usize,
    lyapunov: f64,
) -> Result<BirkhoffResult<Vec<f64>>, DynamicsError> {
    if lyapunov <= 0.0 || !lyapunov.is_finite() {
        return Err(DynamicsError::NonpositiveLyapunov(lyapunov));
    }
    if n == 0 {
        return Err(DynamicsError::BadParameter("need n >= 1".into()));
    }
    if digits.len() < n {
        return Err(DynamicsError::ExpansionExhausted { have: digits.len(), need: n });
    }
    let labels = model.convergent_labels_from(&digits[..n], t0)?;
    let phi = phi_table(model);
    let dim = model.relative_dim();
    let mut acc = BlockAccumulator::new(dim, n);
    let mut summand = vec![0.0; dim];
    for (k, &t) in labels.iter().enumerate() {
        for (slot, v) in summand.iter_mut().zip(&phi[t]) {
            *slot = v / lyapunov;
        }
        acc.add(k, &summand);
    }
    let (value, error_estimate) = acc.finish();
    Ok(BirkhoffResult { value, n, error_estimate })
}

/// Exact limiting modular symbol of a purely periodic expansion.
#[derive(Debug, Clone)]
pub struct PeriodicSymbol {
    /// Minimal shift period of `(beta, t0)`, a multiple of the digit
    /// period.
    pub period_length: usize,
    /// `period_length` divided by the digit period.
    pub repetitions: usize,
    /// Exact class sum over one shift period.
    pub class_sum: Vec<Rational>,
    /// `lyapunov * period_length = log N(g)` for the closing matrix.
    pub log_norm: f64,
    /// `class_sum / log_norm`.
    pub value: Vec<f64>,
}

/// Evaluates the limiting modular symbol of the quadratic irrational
/// with purely periodic digits `period`, started at coset `t0`, in
/// closed form: the minimal `l` with `T^l` fixing `(beta, t0)` is a
/// label-cycle length times the digit period, and the Birkhoff limit is
/// the exact class sum over those `l` steps divided by `log N` of the
/// closing hyperbolic matrix.
pub fn periodic_limiting_symbol(
    model: &HomologyModel,
    period: &[u64],
    t0: usize,
) -> Result<PeriodicSymbol, DynamicsError> {
    if period.is_empty() {
        return Err(DynamicsError::EmptyPeriod);
    }
    let space = model.space();
    if t0 >= space.size() {
        return Err(DynamicsError::Coset(CosetError::BadLabel(t0)));
    }
    let walk_period = |mut t: usize| -> usize {
        for &a in period {
            t = space.rmul_digit(a, t);
        }
        t
    };
    let mut repetitions = 0usize;
    let mut t = t0;
    loop {
        t = walk_period(t);
        repetitions += 1;
        if t == t0 {
            break;
        }
    }
    let period_length = repetitions * period.len();
    let mut digits = Vec::with_capacity(period_length);
    for _ in 0..repetitions {
        digits.extend_from_slice(period);
    }
    let class_sum = orbit_class_sum(model, &digits, t0, period_length)?;
    let closing = Mat2::word(period)?.pow(repetitions as u64);
    let log_norm = hyperbolic_data(&closing)?.length;
    let value = class_sum
        .iter()
        .map(|v| rational_to_f64(v) / log_norm)
        .collect();
    Ok(PeriodicSymbol { period_length, repetitions, class_sum, log_norm, value })
}

/// Birkhoff average `(1/(lyapunov n)) sum_{k<=n} Delta_x(t_k)` of the
/// intersection observable of a cycle chain `x`.
pub fn asymptotic_intersection(
    model: &HomologyModel,
    digits: &[u64],
    x: &[i64],
    t0: usize,
    n: usize,
    lyapunov: f64,
) -> Result<BirkhoffResult<f64>, DynamicsError> {
    if lyapunov <= 0.0 || !lyapunov.is_finite() {
        return Err(DynamicsError::NonpositiveLyapunov(lyapunov));
    }
    if n == 0 {
        return Err(DynamicsError::BadParameter("need n >= 1".into()));
    }
    if digits.len() < n {
        return Err(DynamicsError::ExpansionExhausted { have: digits.len(), need: n });
    }
    let delta = model
        .delta_vector(x)
        .map_err(|e| DynamicsError::InvalidPairing(e.to_string()))?;
    let labels = model.convergent_labels_from(&digits[..n], t0)?;
    let mut acc = BlockAccumulator::new(1, n);
    for (k, &t) in labels.iter().enumerate() {
        acc.add(k, &[delta[t] as f64 / lyapunov]);
    }
    let (value, error_estimate) = acc.finish();
    Ok(BirkhoffResult { value: value[0], n, error_estimate })
}

/// Birkhoff average `(1/n) sum_{k<=n} Delta_x(t_k)^2`; for digits drawn
/// from the Gauss measure this converges to the label-space mean of
/// `Delta_x^2`.
pub fn second_moment(
    model: &HomologyModel,
    digits: &[u64],
    x: &[i64],
    t0: usize,
    n: usize,
) -> Result<BirkhoffResult<f64>, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::BadParameter("need n >= 1".into()));
    }
    if digits.len() < n {
        return Err(DynamicsError::ExpansionExhausted { have: digits.len(), need: n });
    }
    let delta = model
        .delta_vector(x)
        .map_err(|e| DynamicsError::InvalidPairing(e.to_string()))?;
    let labels = model.convergent_labels_from(&digits[..n], t0)?;
    let mut acc = BlockAccumulator::new(1, n);
    for (k, &t) in labels.iter().enumerate() {
        let v = delta[t] as f64;
        acc.add(k, &[v * v]);
    }
    let (value, error_estimate) = acc.finish();
    Ok(BirkhoffResult { value: value[0], n, error_estimate })
}

/// `P(a = k)` under the Gauss-Kuzmin law.
pub fn gauss_kuzmin_probability(k: u64) -> f64 {
    let kf = k as f64;
    (1.0 + 1.0 / (kf * (kf + 2.0))).log2()
}

/// Draws `n` digits i.i.d. from the Gauss-Kuzmin law by inverting its
/// cumulative distribution `P(a <= k) = 1 - log2(1 + 1/(k+1))`.
pub fn gauss_kuzmin_digits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let c = (1.0 - u).exp2() - 1.0;
            if c <= 0.0 {
                return 1u64 << 52;
            }
            ((1.0 / c - 1.0).ceil().max(1.0) as u64).max(1)
        })
        .collect()
}

/// Built-in Levy-class kernels `f(q, q')` on consecutive denominators.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyKernel {
    Zero,
    /// `1/q^3`.
    InvCube,
    /// `(q + q')/q^4`.
    SumOverQuartic,
    /// `(q + q')/q^{1+t}` with `Re(t) > 0`.
    Power { t: Complex64 },
}

impl LevyKernel {
    fn validate(&self) -> Result<(), DynamicsError> {
        if let LevyKernel::Power { t } = self {
            if t.re <= 0.0 {
                return Err(DynamicsError::BadParameter(format!(
                    "power kernel needs Re(t) > 0, got {t}"
                )));
            }
        }
        Ok(())
    }

    // Effective decay exponent epsilon with f = O(q^{-epsilon}).
    fn decay_exponent(&self) -> f64 {
        match self {
            LevyKernel::Zero => f64::INFINITY,
            LevyKernel::InvCube | LevyKernel::SumOverQuartic => 3.0,
            LevyKernel::Power { t } => t.re,
        }
    }

    fn is_real(&self) -> bool {
        match self {
            LevyKernel::Power { t } => t.im == 0.0,
            _ => true,
        }
    }

    /// Kernel value on exact denominators, computed through logarithms
    /// so deep convergents cannot overflow.
    pub fn eval(&self, q: &BigInt, q_prev: &BigInt) -> Complex64 {
        let ln_q = ln_big(q);
        match self {
            LevyKernel::Zero => Complex64::new(0.0, 0.0),
            LevyKernel::InvCube => Complex64::new((-3.0 * ln_q).exp(), 0.0),
            LevyKernel::SumOverQuartic => {
                let ln_sum = ln_big(&(q + q_prev));
                Complex64::new((ln_sum - 4.0 * ln_q).exp(), 0.0)
            }
            LevyKernel::Power { t } => {
                let ln_sum = ln_big(&(q + q_prev));
                (Complex64::new(ln_sum, 0.0) - (t + 1.0) * ln_q).exp()
            }
        }
    }

    fn eval_f64(&self, q: f64, q_prev: f64) -> f64 {
        match self {
            LevyKernel::Zero => 0.0,
            LevyKernel::InvCube => q.powi(-3),
            LevyKernel::SumOverQuartic => (q + q_prev) / q.powi(4),
            LevyKernel::Power { t } => (q + q_prev) * q.powf(-1.0 - t.re),
        }
    }
}

// Geometric tail bound from the observed decay of the last few term
// magnitudes: last * r/(1-r) with r their mean ratio.
fn geometric_tail(magnitudes: &[f64]) -> f64 {
    let tail: Vec<f64> = magnitudes
        .iter()
        .rev()
        .take(11)
        .copied()
        .filter(|&m| m > 1e-300)
        .collect();
    if tail.is_empty() {
        return 0.0;
    }
    let last = tail[0];
    let mut ratios = Vec::new();
    for w in tail.windows(2) {
        // tail is reversed, so w[0] is the later term.
        ratios.push(w[0] / w[1]);
    }
    if ratios.is_empty() {
        return last;
    }
    let r = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    let r = r.exp();
    if r >= 1.0 {
        return f64::INFINITY;
    }
    last * r / (1.0 - r)
}

/// Partial sum of a scalar Levy series.
#[derive(Debug, Clone)]
pub struct LevySeries {
    pub value: Complex64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// `sum_{k=1..n} f(q_k, q_{k-1})` with a geometric tail bound.
pub fn levy_series(
    kernel: &LevyKernel,
    digits: &[u64],
    n_terms: usize,
) -> Result<LevySeries, DynamicsError> {
    kernel.validate()?;
    if n_terms == 0 {
        return Err(DynamicsError::BadParameter("need at least one term".into()));
    }
    if digits.len() < n_terms {
        return Err(DynamicsError::ExpansionExhausted {
            have: digits.len(),
            need: n_terms,
        });
    }
    let conv = ConvergentSeq::new(&digits[..n_terms])?;
    let mut value = Complex64::new(0.0, 0.0);
    let mut magnitudes = Vec::with_capacity(n_terms);
    for k in 1..=n_terms {
        let term = kernel.eval(conv.denominator(k), conv.denominator(k - 1));
        value += term;
        magnitudes.push(term.norm());
    }
    Ok(LevySeries { value, tail_bound: geometric_tail(&magnitudes), terms: n_terms })
}

/// Partial sum of the boundary homology class `C(f, beta)`.
#[derive(Debug, Clone)]
pub struct LevyClassSeries {
    pub value: Vec<Complex64>,
    pub tail_bound: f64,
    pub terms: usize,
}

/// `sum_{n=1..N} f(q_{n+1}, q_n) {0, q_n/q_{n+1}}` in relative homology
/// coordinates. The ratio `q_n/q_{n+1}` is the value of the reversed
/// digit prefix of length `n+1`, so each class is computed exactly from
/// that word; `N = n_terms` terms consume `n_terms + 1` digits.
pub fn levy_class_series(
    model: &HomologyModel,
    kernel: &LevyKernel,
    digits: &[u64],
    n_terms: usize,
) -> Result<LevyClassSeries, DynamicsError> {
    kernel.validate()?;
    if n_terms == 0 {
        return Err(DynamicsError::BadParameter("need at least one term".into()));
    }
    if digits.len() < n_terms + 1 {
        return Err(DynamicsError::ExpansionExhausted {
            have: digits.len(),
            need: n_terms + 1,
        });
    }
    let conv = ConvergentSeq::new(&digits[..n_terms + 1])?;
    let dim = model.relative_dim();
    let mut value = vec![Complex64::new(0.0, 0.0); dim];
    let mut magnitudes = Vec::with_capacity(n_terms);
    for n in 1..=n_terms {
        let weight = kernel.eval(conv.denominator(n + 1), conv.denominator(n));
        let mut prefix: Vec<u64> = digits[..n + 1].to_vec();
        prefix.reverse();
        let class = model.word_symbol(&prefix);
        let mut max_coordinate = 0.0f64;
        for (slot, c) in value.iter_mut().zip(&class) {
            let c = rational_to_f64(c);
            max_coordinate = max_coordinate.max(c.abs());
            *slot += weight * c;
        }
        magnitudes.push(weight.norm() * max_coordinate);
    }
    Ok(LevyClassSeries {
        value,
        tail_bound: geometric_tail(&magnitudes),
        terms: n_terms,
    })
}

/// Both sides of the Levy average identity.
#[derive(Debug, Clone)]
pub struct LevyAverage {
    /// Quadrature of `int_0^1 l(f, beta) d beta`.
    pub lhs: f64,
    /// `sum_{coprime q >= q' >= 1, q <= Q} f(q, q') / (q (q + q'))`,
    /// each pair counted once.
    pub rhs: f64,
    /// The same sum with each pair counted once per continued-fraction
    /// cylinder realizing it: twice for `q > q'`, once for `q = q' = 1`.
    pub rhs_cylinder: f64,
}

// l(f, beta) for a floating-point beta, truncated once denominators
// pass 1e13, where every admitted kernel's terms are negligible.
fn levy_value_f64(kernel: &LevyKernel, beta: f64) -> f64 {
    let mut x = beta;
    let (mut q_prev, mut q) = (0.0f64, 1.0);
    let mut sum = 0.0;
    for _ in 0..64 {
        if !(x > 1e-15 && x < 1.0) {
            break;
        }
        let inv = 1.0 / x;
        let a = inv.floor();
        if !(1.0..=1e15).contains(&a) {
            break;
        }
        x = inv - a;
        let q_next = a * q + q_prev;
        q_prev = q;
        q = q_next;
        sum += kernel.eval_f64(q, q_prev);
        if q > 1e13 {
            break;
        }
    }
    sum
}

/// Integrates `l(f, beta)` over the unit interval with composite
/// Gauss-Legendre quadrature on `2^quadrature_depth` panels, and sums
/// the coprime-pair side up to `q <= pair_cutoff`.
pub fn levy_average(
    kernel: &LevyKernel,
    quadrature_depth: u32,
    pair_cutoff: u64,
) -> Result<LevyAverage, DynamicsError> {
    kernel.validate()?;
    if !kernel.is_real() {
        return Err(DynamicsError::BadParameter(
            "the average needs a real-valued kernel".into(),
        ));
    }
    if kernel.decay_exponent() < 1.5 {
        return Err(DynamicsError::BadParameter(
            "kernel decays too slowly for the truncated quadrature".into(),
        ));
    }
    if quadrature_depth > 24 {
        return Err(DynamicsError::BadParameter(
            "quadrature depth above 24 is pointless".into(),
        ));
    }
    let mut rhs = 0.0;
    let mut rhs_cylinder = 0.0;
    for q in 1..=pair_cutoff {
        for q_prev in 1..=q {
            if q.gcd(&q_prev) != 1 {
                continue;
            }
            let value = kernel.eval_f64(q as f64, q_prev as f64)
                / (q as f64 * (q + q_prev) as f64);
            rhs += value;
            rhs_cylinder += if q == q_prev { value } else { 2.0 * value };
        }
    }
    let (gl_nodes, gl_weights) = crate::transfer::gauss_legendre(16);
    let panels = 1u64 << quadrature_depth;
    let width = 1.0 / panels as f64;
    let mut lhs = 0.0;
    for panel in 0..panels {
        let left = panel as f64 * width;
        for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
            lhs += w * width * levy_value_f64(kernel, left + x * width);
        }
    }
    Ok(LevyAverage { lhs, rhs, rhs_cylinder })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::cf_value;
    use crate::cosets::{build_cosets, Convention, SubgroupSpec};
    use crate::homology::build_homology;
    
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_for(n: u32) -> HomologyModel {
        let space = build_cosets(&SubgroupSpec::Gamma0(n), Convention::Psl).unwrap();
        build_homology(&space).unwrap()
    }

    fn full_model() -> HomologyModel {
        let space = build_cosets(&SubgroupSpec::Full, Convention::Psl).unwrap();
        build_homology(&space).unwrap()
    }

    #[test]
    fn orbit_matches_the_matrix_action() {
        let space = build_cosets(&SubgroupSpec::Gamma0(11), Convention::Psl).unwrap();
        let digits = [2u64, 3, 1, 4, 2, 1, 1, 5];
        let orb = orbit(&space, &digits, 3, digits.len()).unwrap();
        // Against right multiplication by the convergent matrices.
        for k in 0..=digits.len() {
            let g = orb.convergents().matrix(k);
            assert_eq!(
                orb.trajectory()[k],
                space.right_mul(&g, 3).unwrap(),
                "k = {k}"
            );
        }
        // Against the one-step shift matrix [[-a, 1], [1, 0]].
        for (k, &a) in digits.iter().enumerate() {
            let shift = Mat2::new(-(a as i64), 1, 1, 0);
            assert_eq!(
                orb.trajectory()[k + 1],
                space.act(&shift, orb.trajectory()[k]).unwrap()
            );
        }
    }

    #[test]
    fn orbit_on_the_full_group_is_constant() {
        let space = build_cosets(&SubgroupSpec::Full, Convention::Psl).unwrap();
        let orb = orbit(&space, &[1, 2, 3, 4], 0, 4).unwrap();
        assert!(orb.trajectory().iter().all(|&t| t == 0));
    }

    #[test]
    fn golden_orbit_on_gamma0_2_cycles_with_period_three() {
        // The digit matrix of 1 has order three in PGL(2, Z/2).
        let space = build_cosets(&SubgroupSpec::Gamma0(2), Convention::Psl).unwrap();
        let orb = orbit(&space, &[1; 6], space.t0(), 6).unwrap();
        for k in 0..=3 {
            assert_eq!(orb.trajectory()[k + 3], orb.trajectory()[k]);
        }
        assert_ne!(orb.trajectory()[1], orb.trajectory()[0]);
    }

    #[test]
    fn orbit_rejects_exhausted_expansions_and_bad_labels() {
        let space = build_cosets(&SubgroupSpec::Gamma0(2), Convention::Psl).unwrap();
        assert!(matches!(
            orbit(&space, &[2, 3], 0, 3),
            Err(DynamicsError::ExpansionExhausted { have: 2, need: 3 })
        ));
        assert!(orbit(&space, &[2, 3], 99, 2).is_err());
    }

    #[test]
    fn limiting_symbol_on_the_full_group_is_the_zero_class() {
        let model = full_model();
        let result = limiting_symbol(&model, &[1, 2, 1, 2], 0, 4, 1.0).unwrap();
        assert!(result.value.is_empty());
        assert_eq!(result.error_estimate, 0.0);
    }

    #[test]
    fn limiting_symbol_validates_input() {
        let model = model_for(11);
        assert!(matches!(
            limiting_symbol(&model, &[1, 1], 0, 2, 0.0),
            Err(DynamicsError::NonpositiveLyapunov(_))
        ));
        assert!(matches!(
            limiting_symbol(&model, &[1, 1], 0, 0, 1.0),
            Err(DynamicsError::BadParameter(_))
        ));
        assert!(matches!(
            limiting_symbol(&model, &[1, 1], 0, 5, 1.0),
            Err(DynamicsError::ExpansionExhausted { .. })
        ));
    }

    #[test]
    fn periodic_symbol_closes_the_modular_symbol_identity() {
        // Over one full shift period the class sum telescopes to the
        // symbol of the closing convergent, with a sign flip.
        for (n, period) in [(11u32, vec![1u64]), (11, vec![2, 3]), (2, vec![2, 3])] {
            let model = model_for(n);
            let t0 = model.space().t0();
            let ps = periodic_limiting_symbol(&model, &period, t0).unwrap();
            let digits: Vec<u64> = period
                .iter()
                .cycle()
                .take(ps.period_length)
                .copied()
                .collect();
            let conv = ConvergentSeq::new(&digits).unwrap();
            let alpha = conv.value(ps.period_length);
            let symbol = model.modular_symbol(&alpha).unwrap();
            let negated: Vec<Rational> = symbol.iter().map(|v| -v).collect();
            assert_eq!(ps.class_sum, negated, "level {n}, period {period:?}");
            let closing = Mat2::word(&digits).unwrap();
            let expected = hyperbolic_data(&closing).unwrap().length;
            assert!((ps.log_norm - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_symbol_golden_vectors() {
        let model = model_for(11);
        let t0 = model.space().t0();
        let golden = periodic_limiting_symbol(&model, &[1], t0).unwrap();
        assert_eq!(golden.period_length, 10);
        assert_eq!(golden.repetitions, 10);
        let two_three = periodic_limiting_symbol(&model, &[2, 3], t0).unwrap();
        assert_eq!(two_three.period_length, 10);
        assert_eq!(two_three.repetitions, 5);
        let show = |v: &[Rational]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        assert_eq!(show(&golden.class_sum), "0,-2,1");
        // 20 log phi: the closing matrix is the tenth power of the
        // digit matrix of 1.
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((golden.log_norm - 20.0 * phi.ln()).abs() < 1e-12);
        assert_eq!(show(&two_three.class_sum), "0,-2,1");
        // 10 log(4 + sqrt(15)) from the fifth power of [[1,3],[2,7]].
        let unit = 4.0 + 15.0f64.sqrt();
        assert!((two_three.log_norm - 10.0 * unit.ln()).abs() < 1e-12);
    }

    #[test]
    fn limiting_symbol_at_multiples_of_the_period_is_exact() {
        let model = model_for(11);
        let t0 = model.space().t0();
        let ps = periodic_limiting_symbol(&model, &[2, 3], t0).unwrap();
        let l = ps.period_length;
        for m in [1usize, 2, 3] {
            let digits: Vec<u64> =
                [2u64, 3].iter().cycle().take(m * l).copied().collect();
            let sum = orbit_class_sum(&model, &digits, t0, m * l).unwrap();
            let scaled: Vec<Rational> = ps
                .class_sum
                .iter()
                .map(|v| v * Rational::from_integer(BigInt::from(m as i64)))
                .collect();
            assert_eq!(sum, scaled, "m = {m}");
            // The float average with the exact lyapunov input
            // reproduces the periodic value.
            let lyapunov = ps.log_norm / l as f64;
            let avg = limiting_symbol(&model, &digits, t0, m * l, lyapunov).unwrap();
            for (a, b) in avg.value.iter().zip(&ps.value) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn limiting_symbol_vanishes_for_gauss_random_digits() {
        let model = model_for(11);
        let mut rng = ChaCha8Rng::seed_from_u64(2026);
        let digits = gauss_kuzmin_digits(&mut rng, 20_000);
        let lyapunov = crate::arith::lyapunov_estimate(&digits).unwrap();
        let result =
            limiting_symbol(&model, &digits, 0, digits.len(), lyapunov).unwrap();
        let norm = result.value.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            norm < 3.0 * result.error_estimate,
            "norm {norm}, error {}",
            result.error_estimate
        );
    }

    #[test]
    fn intersection_average_of_zero_is_zero() {
        let model = model_for(11);
        let x = vec![0i64; model.space().size()];
        let result =
            asymptotic_intersection(&model, &[1, 2, 1, 2], &x, 0, 4, 1.0).unwrap();
        assert_eq!(result.value, 0.0);
    }

    #[test]
    fn intersection_average_vanishes_for_random_digits() {
        let model = model_for(11);
        let x = model.symbol_chain(&[2]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let digits = gauss_kuzmin_digits(&mut rng, 20_000);
        let lyapunov = crate::arith::lyapunov_estimate(&digits).unwrap();
        let result =
            asymptotic_intersection(&model, &digits, &x, 0, digits.len(), lyapunov)
                .unwrap();
        assert!(result.value.abs() < 3.0 * result.error_estimate);
        // The full label average is exactly zero, which drives the
        // vanishing.
        let delta = model.delta_vector(&x).unwrap();
        assert_eq!(delta.iter().sum::<i64>(), 0);
    }

    #[test]
    fn intersection_average_over_periodic_digits_is_the_period_mean() {
        let model = model_for(11);
        let x = model.symbol_chain(&[2]);
        let t0 = model.space().t0();
        let ps = periodic_limiting_symbol(&model, &[1], t0).unwrap();
        let l = ps.period_length;
        let digits = vec![1u64; 3 * l];
        let lyapunov = ps.log_norm / l as f64;
        let result =
            asymptotic_intersection(&model, &digits, &x, t0, 3 * l, lyapunov).unwrap();
        let delta = model.delta_vector(&x).unwrap();
        let labels = model.convergent_labels_from(&digits[..l], t0).unwrap();
        let period_sum: i64 = labels.iter().map(|&t| delta[t]).sum();
        let expected = period_sum as f64 / (lyapunov * l as f64);
        assert!((result.value - expected).abs() < 1e-12);
    }

    #[test]
    fn second_moment_matches_the_label_space_mean() {
        let model = model_for(11);
        let x = model.symbol_chain(&[2]);
        let delta = model.delta_vector(&x).unwrap();
        let p = model.space().size();
        let exact: f64 =
            delta.iter().map(|&d| (d * d) as f64).sum::<f64>() / p as f64;
        assert!(exact > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let digits = gauss_kuzmin_digits(&mut rng, 100_000);
        let result = second_moment(&model, &digits, &x, 0, digits.len()).unwrap();
        assert!(
            (result.value - exact).abs() < 0.05 * exact,
            "sampled {} exact {exact}",
            result.value
        );
    }

    #[test]
    fn second_moment_of_zero_is_zero() {
        let model = model_for(11);
        let x = vec![0i64; model.space().size()];
        let result = second_moment(&model, &[1, 1, 1], &x, 0, 3).unwrap();
        assert_eq!(result.value, 0.0);
    }

    #[test]
    fn reversal_identity_for_denominators() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let len = 1 + (rng.gen::<u64>() % 12) as usize;
            let digits: Vec<u64> =
                (0..len).map(|_| 1 + rng.gen::<u64>() % 9).collect();
            let mut reversed = digits.clone();
            reversed.reverse();
            let forward = ConvergentSeq::new(&digits).unwrap();
            let backward = ConvergentSeq::new(&reversed).unwrap();
            assert_eq!(forward.denominator(len), backward.denominator(len));
            // The reversed word's value is the denominator ratio.
            let ratio = Rational::new(
                forward.denominator(len - 1).clone(),
                forward.denominator(len).clone(),
            );
            assert_eq!(cf_value(&reversed).unwrap(), ratio);
        }
    }

    #[test]
    fn gauss_kuzmin_sampler_matches_the_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(31415);
        let digits = gauss_kuzmin_digits(&mut rng, 200_000);
        let n = digits.len() as f64;
        for k in 1..=3u64 {
            let freq = digits.iter().filter(|&&a| a == k).count() as f64 / n;
            let p = gauss_kuzmin_probability(k);
            assert!(
                (freq - p).abs() < 0.005,
                "digit {k}: frequency {freq}, law {p}"
            );
        }
        assert!(digits.iter().all(|&a| a >= 1));
    }

    #[test]
    fn scalar_levy_series_on_the_golden_expansion_is_cauchy() {
        let digits = vec![1u64; 200];
        let s60 = levy_series(&LevyKernel::InvCube, &digits, 60).unwrap();
        let s120 = levy_series(&LevyKernel::InvCube, &digits, 120).unwrap();
        assert!((s60.value - s120.value).norm() < 1e-10);
        assert!((s60.value - s120.value).norm() <= s60.tail_bound * 1.01);
        assert!(s60.value.im == 0.0);
        // Fibonacci denominators decay the terms like the golden ratio
        // to the minus third power.
        let phi3 = ((1.0 + 5.0f64.sqrt()) / 2.0).powi(-3);
        let conv = ConvergentSeq::new(&digits[..20]).unwrap();
        let term = |k: usize| {
            LevyKernel::InvCube
                .eval(conv.denominator(k), conv.denominator(k - 1))
                .norm()
        };
        let ratio = term(15) / term(14);
        assert!((ratio - phi3).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn zero_kernel_sums_to_zero() {
        let digits = vec![2u64; 40];
        let s = levy_series(&LevyKernel::Zero, &digits, 40).unwrap();
        assert_eq!(s.value, Complex64::new(0.0, 0.0));
        assert_eq!(s.tail_bound, 0.0);
    }

    #[test]
    fn levy_series_validates_input() {
        let digits = vec![1u64; 10];
        assert!(matches!(
            levy_series(
                &LevyKernel::Power { t: Complex64::new(0.0, 1.0) },
                &digits,
                5
            ),
            Err(DynamicsError::BadParameter(_))
        ));
        assert!(matches!(
            levy_series(&LevyKernel::InvCube, &digits, 11),
            Err(DynamicsError::ExpansionExhausted { .. })
        ));
    }

    #[test]
    fn levy_class_series_on_gamma0_11_converges_geometrically() {
        let model = model_for(11);
        let digits = vec![1u64; 400];
        let kernel = LevyKernel::Power { t: Complex64::new(1.0, 0.0) };
        let s150 = levy_class_series(&model, &kernel, &digits, 150).unwrap();
        let s300 = levy_class_series(&model, &kernel, &digits, 300).unwrap();
        for (a, b) in s150.value.iter().zip(&s300.value) {
            assert!((a - b).norm() < 1e-10);
            assert!(a.im.abs() < 1e-30);
        }
        // Cauchy with a geometric rate: successive partial sums shrink
        // by a stable factor while the terms are still representable.
        let s20 = levy_class_series(&model, &kernel, &digits, 20).unwrap();
        let s21 = levy_class_series(&model, &kernel, &digits, 21).unwrap();
        let s22 = levy_class_series(&model, &kernel, &digits, 22).unwrap();
        let gap = |a: &LevyClassSeries, b: &LevyClassSeries| -> f64 {
            a.value
                .iter()
                .zip(&b.value)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
        };
        let d1 = gap(&s21, &s20);
        let d2 = gap(&s22, &s21);
        assert!(d2 < d1 && d1 > 0.0 && d1 < 1e-3, "d1 {d1} d2 {d2}");
        let printed: Vec<String> =
            s300.value.iter().map(|v| format!("{:.12}", v.re)).collect();
        assert_eq!(
            printed.join(","),
            "-0.029662625439,1.744590751037,-2.620920030724"
        );
    }

    #[test]
    fn levy_average_matches_the_cylinder_counted_sum() {
        for kernel in [LevyKernel::InvCube, LevyKernel::SumOverQuartic] {
            let avg = levy_average(&kernel, 13, 1500).unwrap();
            assert!(
                (avg.lhs - avg.rhs_cylinder).abs() < 1e-3,
                "{kernel:?}: lhs {} cylinder {}",
                avg.lhs,
                avg.rhs_cylinder
            );
            // Counting each coprime pair once misses one cylinder for
            // every strictly ordered pair, a visible gap.
            assert!((avg.lhs - avg.rhs).abs() > 0.02, "{kernel:?}");
        }
        let zero = levy_average(&LevyKernel::Zero, 6, 50).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    }

    #[test]
    fn levy_average_rejects_slow_or_complex_kernels() {
        assert!(matches!(
            levy_average(&LevyKernel::Power { t: Complex64::new(0.5, 0.0) }, 6, 50),
            Err(DynamicsError::BadParameter(_))
        ));
        assert!(matches!(
            levy_average(&LevyKernel::Power { t: Complex64::new(3.0, 1.0) }, 6, 50),
            Err(DynamicsError::BadParameter(_))
        ));
    }

    #[test]
    fn block_error_estimate_is_nonnegative_and_zero_for_constants() {
        let model = full_model();
        let r = limiting_symbol(&model, &[3, 3, 3], 0, 3, 1.0).unwrap();
        assert!(r.error_estimate >= 0.0);
        let model11 = model_for(11);
        let x = model11.symbol_chain(&[2]);
        let r = second_moment(&model11, &[1, 1], &x, 0, 2).unwrap();
        assert!(r.error_estimate >= 0.0);
    }
}
