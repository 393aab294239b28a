//! Deformed Gauss-Kuzmin transfer operators on `[0,1] x P`.
//!
//! The operator family is `(L_sigma f)(x,t) = sum_k (x+k)^{-sigma}
//! f(1/(x+k), m(k).t)` with `k` running over a digit alphabet, together
//! with its variation `(A_sigma f)(x,t) = sum_k log(x+k) (x+k)^{-sigma}
//! f(...)`. Functions are discretized by Chebyshev-Lobatto collocation
//! in `x` tensored with coset labels. The inverse branches `1/(x+k)`
//! map `[0,1]` well inside the domain of analyticity of the relevant
//! densities, so collocation converges exponentially in the node count.
//!
//! From the leading spectral data the module computes Hausdorff
//! dimensions of restricted continued-fraction sets (the root of
//! `lambda_sigma = 1`), Lyapunov exponents (`2 lambda'` at `sigma =
//! 2 delta`), and the generalized Gauss problem iteration with its
//! geometric convergence rate.
//!
//! Sign convention: the variation weight is `+log(x+k)`, so its
//! Rayleigh quotient equals `-d lambda / d sigma`, which is positive;
//! `lambda_prime` enforces this against a central finite difference.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::cosets::{CosetError, CosetSpace};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("sigma {0} lies outside the operator's half-plane")]
    SigmaOutOfDomain(String),
    #[error("grid needs at least 8 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("hurwitz zeta needs Re(s) > 1 and a > 0, got s = {s}, a = {a}")]
    ZetaDomain { s: String, a: f64 },
    #[error("invalid alphabet: {0}")]
    BadAlphabet(String),
    #[error("invalid density: {0}")]
    BadDensity(String),
    #[error("eigeniteration failed: {0}")]
    NonConvergence(String),
    #[error(
        "variation cross-check failed: rayleigh {rayleigh}, finite difference {finite_difference}"
    )]
    CrossCheckFailed { rayleigh: f64, finite_difference: f64 },
    #[error("no sign change for lambda_sigma - 1 on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
    #[error("result did not stabilize under grid doubling: {0}")]
    NotSelfConvergent(String),
    #[error("operation needs a grid assembled at real sigma")]
    ComplexGrid,
    #[error(transparent)]
    Coset(#[from] CosetError),
}

/// Digit alphabet of the shift: an explicit finite set, or all positive
/// integers with the far branches summed analytically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlphabetSpec {
    Finite(Vec<u64>),
    Full { tail_cutoff: u64, taylor_tail_degree: usize },
}

impl AlphabetSpec {
    /// The full alphabet with default tail handling.
    pub fn full() -> Self {
        AlphabetSpec::Full { tail_cutoff: 10_000, taylor_tail_degree: 2 }
    }

    /// The alphabet {1, ..., n}.
    pub fn contiguous(n: u64) -> Self {
        AlphabetSpec::Finite((1..=n).collect())
    }

    pub fn is_full(&self) -> bool {
        matches!(self, AlphabetSpec::Full { .. })
    }

    fn validate(&self) -> Result<(), TransferError> {
        match self {
            AlphabetSpec::Finite(ks) => {
                if ks.is_empty() {
                    return Err(TransferError::BadAlphabet("empty digit set".into()));
                }
                if ks.contains(&0) {
                    return Err(TransferError::BadAlphabet("digit 0 is not allowed".into()));
                }
                let mut sorted = ks.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ks.len() {
                    return Err(TransferError::BadAlphabet("repeated digit".into()));
                }
                Ok(())
            }
            AlphabetSpec::Full { tail_cutoff, .. } => {
                if *tail_cutoff < 64 {
                    return Err(TransferError::BadAlphabet(format!(
                        "tail cutoff {tail_cutoff} below 64"
                    )));
                }
                Ok(())
            }
        }
    }
}

// Chebyshev-Lobatto nodes on [0,1], ascending, endpoints exact.
fn chebyshev_nodes(m: usize) -> Vec<f64> {
    let n = (m - 1) as f64;
    (0..m)
        .map(|j| {
            if j == 0 {
                0.0
            } else if j == m - 1 {
                1.0
            } else {
                (1.0 - (std::f64::consts::PI * j as f64 / n).cos()) / 2.0
            }
        })
        .collect()
}

fn barycentric_weights(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m - 1 {
                s / 2.0
            } else {
                s
            }
        })
        .collect()
}

// Fills `row` with Lagrange basis values at y (second barycentric form).
fn barycentric_row(nodes: &[f64], weights: &[f64], y: f64, row: &mut [f64]) {
    for (j, &x) in nodes.iter().enumerate() {
        if y == x {
            row.fill(0.0);
            row[j] = 1.0;
            return;
        }
    }
    let mut denom = 0.0;
    for j in 0..nodes.len() {
        let term = weights[j] / (y - nodes[j]);
        row[j] = term;
        denom += term;
    }
    for v in row.iter_mut() {
        *v /= denom;
    }
}

fn differentiation_matrix(nodes: &[f64], weights: &[f64]) -> DMatrix<f64> {
    let m = nodes.len();
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let v = (weights[j] / weights[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw-Curtis quadrature weights on [0,1] for the Lobatto nodes.
pub(crate) fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let n = m - 1;
    let nf = n as f64;
    let mut w = vec![0.0; m];
    let end = if n.is_multiple_of(2) {
        1.0 / (nf * nf - 1.0)
    } else {
        1.0 / (nf * nf)
    };
    w[0] = end;
    w[n] = end;
    for (i, wi) in w.iter_mut().enumerate().take(n).skip(1) {
        let theta = std::f64::consts::PI * i as f64 / nf;
        let mut v = 1.0;
        if n.is_multiple_of(2) {
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            v -= (nf * theta).cos() / (nf * nf - 1.0);
        } else {
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
        }
        *wi = 2.0 * v / nf;
    }
    // Halve for the map from [-1,1] to [0,1].
    for v in w.iter_mut() {
        *v /= 2.0;
    }
    w
}

/// Gauss-Legendre nodes and weights on [0,1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n and its derivative by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = (1.0 - x) / 2.0;
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

// B_{2l} for l = 1..=12.
const BERNOULLI_EVEN: [(f64, f64); 12] = [
    (1.0, 6.0),
    (-1.0, 30.0),
    (1.0, 42.0),
    (-1.0, 30.0),
    (5.0, 66.0),
    (-691.0, 2730.0),
    (7.0, 6.0),
    (-3617.0, 510.0),
    (43867.0, 798.0),
    (-174611.0, 330.0),
    (854513.0, 138.0),
    (-236364091.0, 2730.0),
];

fn cpow(base: f64, exponent: Complex64) -> Complex64 {
    (exponent * base.ln()).exp()
}

/// Hurwitz zeta `zeta(s, a) = sum_{j >= 0} (j + a)^{-s}` by
/// Euler-Maclaurin summation, accurate to about 1e-14 relative for
/// moderate `|s|`.
pub fn hurwitz_zeta(s: Complex64, a: f64) -> Result<Complex64, TransferError> {
    if s.re <= 1.0 || a <= 0.0 {
        return Err(TransferError::ZetaDomain { s: s.to_string(), a });
    }
    // Shift until the asymptotic expansion at b = a + shift is safely
    // inside its regime of geometric decay.
    let target = (24.0_f64).max(1.6 * s.norm());
    let shift = ((target - a).ceil()).max(0.0) as usize;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..shift {
        sum += cpow(a + j as f64, -s);
    }
    let b = a + shift as f64;
    sum += cpow(b, Complex64::new(1.0, 0.0) - s) / (s - 1.0);
    sum += cpow(b, -s) / 2.0;
    let mut pochhammer = s;
    let mut factorial = 2.0f64;
    for (l, (num, den)) in BERNOULLI_EVEN.iter().enumerate() {
        let l = l + 1;
        let coefficient = num / den / factorial;
        sum += coefficient * pochhammer * cpow(b, -s - (2 * l - 1) as f64);
        pochhammer *= (s + (2 * l - 1) as f64) * (s + (2 * l) as f64);
        factorial *= ((2 * l + 1) * (2 * l + 2)) as f64;
    }
    Ok(sum)
}

// sum over k > cutoff, k = k0 (mod rho), of (x + k)^{-s}.
fn tail_power_sum(s: Complex64, x: f64, k0: u64, rho: u64) -> Result<Complex64, TransferError> {
    let a = (x + k0 as f64) / rho as f64;
    Ok(cpow(rho as f64, -s) * hurwitz_zeta(s, a)?)
}

// sum over the same class of log(x + k) (x + k)^{-s}, via a complex
// step: the sum is -d/ds of the power sum, and the integrand is
// analytic in s.
fn tail_log_sum(s: f64, x: f64, k0: u64, rho: u64) -> Result<f64, TransferError> {
    let h = 1e-100;
    let value = tail_power_sum(Complex64::new(s, h), x, k0, rho)?;
    Ok(-value.im / h)
}

#[derive(Debug, Clone)]
pub enum GridMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// A collocation discretization of `L_sigma` or `A_sigma` on
/// `[0,1] x P`, stored densely with index `t * M + i` for label `t`
/// and node `i`.
#[derive(Debug, Clone)]
pub struct OperatorGrid {
    space: CosetSpace,
    sigma: Complex64,
    alphabet: AlphabetSpec,
    m: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    cc: Vec<f64>,
    variation: bool,
    matrix: GridMatrix,
}

/// Leading spectral data of a real operator grid.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: f64,
    /// Right eigenfunction samples, positive, unit integral.
    pub h: Vec<f64>,
    /// Left functional weights, normalized so their pairing with h is 1.
    pub ell: Vec<f64>,
    pub residual: f64,
}

/// Assembles the collocation matrix of `L_sigma`.
pub fn assemble(
    sigma: impl Into<Complex64>,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<OperatorGrid, TransferError> {
    assemble_impl(sigma.into(), alphabet, space, m, false)
}

/// Assembles the collocation matrix of the variation operator
/// `A_sigma`, with weight `+log(x+k) (x+k)^{-sigma}`. Real `sigma`
/// only: the analytic tail derivative is taken by a complex step.
pub fn assemble_variation(
    sigma: f64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<OperatorGrid, TransferError> {
    assemble_impl(Complex64::new(sigma, 0.0), alphabet, space, m, true)
}

fn assemble_impl(
    sigma: Complex64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
    variation: bool,
) -> Result<OperatorGrid, TransferError> {
    alphabet.validate()?;
    if m < 8 {
        return Err(TransferError::GridTooSmall(m));
    }
    // The half-plane restriction is about convergence of the branch
    // sum, so it only binds for the full alphabet; a finite sum of
    // powers is entire in sigma.
    if alphabet.is_full() && sigma.re <= 1.0 {
        return Err(TransferError::SigmaOutOfDomain(format!(
            "{sigma} (full alphabet needs Re > 1)"
        )));
    }
    let p = space.size();
    let dim = m * p;
    let nodes = chebyshev_nodes(m);
    let bary = barycentric_weights(m);
    let cc = clenshaw_curtis(m);
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    let mut row = vec![0.0; m];

    let explicit_max = match alphabet {
        AlphabetSpec::Finite(_) => 0,
        AlphabetSpec::Full { tail_cutoff, .. } => *tail_cutoff,
    };
    let explicit: Vec<u64> = match alphabet {
        AlphabetSpec::Finite(ks) => ks.clone(),
        AlphabetSpec::Full { .. } => (1..=explicit_max).collect(),
    };
    for &k in &explicit {
        for i in 0..m {
            let base = nodes[i] + k as f64;
            let log_base = base.ln();
            let mut weight = (-sigma * log_base).exp();
            if variation {
                weight *= log_base;
            }
            barycentric_row(&nodes, &bary, base.recip(), &mut row);
            for t in 0..p {
                let u = space.act_digit(k, t);
                let r = t * m + i;
                for (j, &rv) in row.iter().enumerate() {
                    matrix[(r, u * m + j)] += weight * rv;
                }
            }
        }
    }

    if let AlphabetSpec::Full { tail_cutoff, taylor_tail_degree } = alphabet {
        let (cutoff, degree) = (*tail_cutoff, *taylor_tail_degree);
        let rho = space.action_period();
        // Rows extracting Taylor coefficients at 0 from node samples;
        // node 0 sits exactly at x = 0.
        let dmat = differentiation_matrix(&nodes, &bary);
        let mut taylor: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
        let mut raw = vec![0.0; m];
        raw[0] = 1.0;
        taylor.push(raw.clone());
        let mut factorial = 1.0;
        for q in 1..=degree {
            let prev = raw.clone();
            for j in 0..m {
                raw[j] = (0..m).map(|l| prev[l] * dmat[(l, j)]).sum();
            }
            factorial *= q as f64;
            taylor.push(raw.iter().map(|v| v / factorial).collect());
        }
        for r in 0..rho {
            let k0 = {
                let base = cutoff + 1;
                base + (r + rho - base % rho) % rho
            };
            // zeta weights depend on (node, taylor order) only.
            let mut z = vec![vec![Complex64::new(0.0, 0.0); degree + 1]; m];
            for (i, zi) in z.iter_mut().enumerate() {
                for (q, slot) in zi.iter_mut().enumerate() {
                    let s_q = sigma + q as f64;
                    *slot = if variation {
                        Complex64::new(tail_log_sum(s_q.re, nodes[i], k0, rho)?, 0.0)
                    } else {
                        tail_power_sum(s_q, nodes[i], k0, rho)?
                    };
                }
            }
            for t in 0..p {
                let u = space.act_digit(k0, t);
                for (i, zi) in z.iter().enumerate() {
                    let row_index = t * m + i;
                    for q in 0..=degree {
                        let w = zi[q];
                        for (j, &tv) in taylor[q].iter().enumerate() {
                            matrix[(row_index, u * m + j)] += w * tv;
                        }
                    }
                }
            }
        }
    }

    let matrix = if sigma.im == 0.0 {
        let mut real = DMatrix::<f64>::zeros(dim, dim);
        let scale = matrix.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
        for (dst, src) in real.iter_mut().zip(matrix.iter()) {
            debug_assert!(src.im.abs() <= 1e-12 * scale);
            *dst = src.re;
        }
        GridMatrix::Real(real)
    } else {
        GridMatrix::Complex(matrix)
    };
    Ok(OperatorGrid {
        space: space.clone(),
        sigma,
        alphabet: alphabet.clone(),
        m,
        nodes,
        bary,
        cc,
        variation,
        matrix,
    })
}

impl OperatorGrid {
    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m * self.space.size()
    }

    pub fn sigma(&self) -> Complex64 {
        self.sigma
    }

    pub fn space(&self) -> &CosetSpace {
        &self.space
    }

    pub fn alphabet(&self) -> &AlphabetSpec {
        &self.alphabet
    }

    pub fn is_variation(&self) -> bool {
        self.variation
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn matrix(&self) -> &GridMatrix {
        &self.matrix
    }

    pub fn real_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.matrix {
            GridMatrix::Real(a) => Some(a),
            GridMatrix::Complex(_) => None,
        }
    }

    pub fn complex_matrix(&self) -> DMatrix<Complex64> {
        match &self.matrix {
            GridMatrix::Real(a) => a.map(|v| Complex64::new(v, 0.0)),
            GridMatrix::Complex(a) => a.clone(),
        }
    }

    /// Quadrature weights over the whole grid: Clenshaw-Curtis in `x`,
    /// counting measure over labels.
    pub fn weight_vector(&self) -> Vec<f64> {
        let p = self.space.size();
        let mut w = Vec::with_capacity(self.dim());
        for _ in 0..p {
            w.extend_from_slice(&self.cc);
        }
        w
    }

    /// Applies the operator to grid samples (real grids).
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, TransferError> {
        let a = self.real_matrix().ok_or(TransferError::ComplexGrid)?;
        if v.len() != self.dim() {
            return Err(TransferError::BadDensity(format!(
                "sample vector has length {}, grid has {}",
                v.len(),
                self.dim()
            )));
        }
        let x = DVector::from_column_slice(v);
        Ok((a * x).as_slice().to_vec())
    }

    /// Interpolates grid samples of a function at `(x, t)`.
    pub fn eval(&self, samples: &[f64], x: f64, t: usize) -> f64 {
        let mut row = vec![0.0; self.m];
        barycentric_row(&self.nodes, &self.bary, x, &mut row);
        row.iter()
            .zip(&samples[t * self.m..(t + 1) * self.m])
            .map(|(r, s)| r * s)
            .sum()
    }
}

fn power_iterate(
    mult: impl Fn(&DVector<f64>) -> DVector<f64>,
    dim: usize,
) -> Result<(f64, DVector<f64>), TransferError> {
    let mut v = DVector::from_element(dim, 1.0 / dim as f64);
    let mut lambda = f64::NAN;
    for _ in 0..100_000 {
        let av = mult(&v);
        let norm = av.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(TransferError::NonConvergence("iterate collapsed".into()));
        }
        let new_lambda = v.dot(&av) / v.dot(&v);
        let next = av / norm;
        if (new_lambda - lambda).abs() <= 1e-13 * new_lambda.abs().max(1e-300) {
            return Ok((new_lambda, next));
        }
        lambda = new_lambda;
        v = next;
    }
    Err(TransferError::NonConvergence(
        "no convergence within 100000 iterations".into(),
    ))
}

/// Leading eigenvalue, eigenfunction, and left functional of a real
/// grid, by power iteration on the matrix and its transpose.
pub fn leading_eigen(grid: &OperatorGrid) -> Result<SpectralData, TransferError> {
    let a = grid.real_matrix().ok_or(TransferError::ComplexGrid)?;
    let dim = grid.dim();
    let (lambda_r, mut h) = power_iterate(|v| a * v, dim)?;
    let (_, mut ell) = power_iterate(|v| a.tr_mul(v), dim)?;
    if h.iter().all(|&v| v <= 0.0) {
        h = -h;
    }
    if h.iter().any(|&v| v <= 0.0) {
        return Err(TransferError::NonConvergence(
            "leading eigenfunction is not positive".into(),
        ));
    }
    let weights = grid.weight_vector();
    let integral: f64 = weights.iter().zip(h.iter()).map(|(w, v)| w * v).sum();
    h /= integral;
    let pairing = ell.dot(&h);
    if pairing == 0.0 {
        return Err(TransferError::NonConvergence(
            "left and right eigenvectors are orthogonal".into(),
        ));
    }
    ell /= pairing;
    // Bilinear Rayleigh quotient: the most accurate eigenvalue the
    // discretization offers.
    let ah = a * &h;
    let lambda = ell.dot(&ah) / ell.dot(&h);
    debug_assert!((lambda - lambda_r).abs() <= 1e-9 * lambda.abs().max(1.0));
    let hmax = h.amax();
    let residual = (&ah - &h * lambda).amax() / (lambda.abs().max(1e-300) * hmax);
    Ok(SpectralData {
        lambda,
        h: h.as_slice().to_vec(),
        ell: ell.as_slice().to_vec(),
        residual,
    })
}

/// Leading eigenvalue of `L_sigma` for real `sigma`.
pub fn leading_lambda(
    sigma: f64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<f64, TransferError> {
    let grid = assemble(sigma, alphabet, space, m)?;
    Ok(leading_eigen(&grid)?.lambda)
}

/// `lambda' = <ell, A_sigma h> / <ell, h> = -d lambda / d sigma`,
/// cross-checked against a central finite difference.
pub fn lambda_prime(
    sigma: f64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<f64, TransferError> {
    let grid = assemble(sigma, alphabet, space, m)?;
    let eig = leading_eigen(&grid)?;
    let variation = assemble_variation(sigma, alphabet, space, m)?;
    let a = variation.real_matrix().expect("real sigma");
    let h = DVector::from_column_slice(&eig.h);
    let ell = DVector::from_column_slice(&eig.ell);
    let rayleigh = ell.dot(&(a * &h)) / ell.dot(&h);
    let step = 1e-4;
    let hi = leading_lambda(sigma + step, alphabet, space, m)?;
    let lo = leading_lambda(sigma - step, alphabet, space, m)?;
    let finite_difference = -(hi - lo) / (2.0 * step);
    if (rayleigh - finite_difference).abs() > 1e-6 * rayleigh.abs().max(1.0) {
        return Err(TransferError::CrossCheckFailed { rayleigh, finite_difference });
    }
    Ok(rayleigh)
}

// Brent's method on [lo, hi], assuming f(lo) and f(hi) bracket a root.
fn brent(
    mut f: impl FnMut(f64) -> Result<f64, TransferError>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, TransferError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa * fb > 0.0 {
        return Err(TransferError::BracketFailure { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b)?;
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Ok(b)
}

/// Hausdorff dimension of the set of irrationals whose digits lie in a
/// finite alphabet: half the root of `lambda_sigma = 1`. Singleton
/// alphabets describe a single point and return 0.
pub fn hausdorff_dimension(
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<f64, TransferError> {
    alphabet.validate()?;
    let AlphabetSpec::Finite(ks) = alphabet else {
        return Err(TransferError::BadAlphabet(
            "dimension solver needs a finite alphabet".into(),
        ));
    };
    if ks.len() == 1 {
        return Ok(0.0);
    }
    let (lo, hi) = (0.02, 2.0);
    let sigma = brent(
        |s| Ok(leading_lambda(s, alphabet, space, m)? - 1.0),
        lo,
        hi,
        1e-10,
    )?;
    // Self-convergence: the root must already be resolved at M, which
    // the doubled grid confirms.
    let check = leading_lambda(sigma, alphabet, space, 2 * m)? - 1.0;
    if check.abs() > 1e-7 {
        return Err(TransferError::NotSelfConvergent(format!(
            "lambda at the root moves by {check:.3e} under grid doubling"
        )));
    }
    Ok(sigma / 2.0)
}

/// Lyapunov exponent of the shift on the invariant set of an alphabet:
/// `2 lambda'` at `sigma = 2 delta`, with `delta = 1` for the full
/// shift.
pub fn lyapunov_from_spectrum(
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<f64, TransferError> {
    let delta = match alphabet {
        AlphabetSpec::Full { .. } => 1.0,
        AlphabetSpec::Finite(_) => hausdorff_dimension(alphabet, space, m)?,
    };
    Ok(2.0 * lambda_prime(2.0 * delta, alphabet, space, m)?)
}

/// Iterates of the generalized Gauss problem.
#[derive(Debug, Clone)]
pub struct GaussIteration {
    /// Renormalized densities, including the initial one.
    pub densities: Vec<Vec<f64>>,
    /// Weighted L1 distances to the stationary density.
    pub distances: Vec<f64>,
    /// Fitted geometric convergence rate, 0 when already stationary.
    pub rate: f64,
}

/// Runs `n` steps of `m -> L_{2 delta} m` from an initial density,
/// renormalizing each iterate to unit integral, and fits the geometric
/// rate of convergence to the stationary density.
pub fn gauss_problem_iterate(
    initial: &[f64],
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
    n: usize,
) -> Result<GaussIteration, TransferError> {
    let delta = match alphabet {
        AlphabetSpec::Full { .. } => 1.0,
        AlphabetSpec::Finite(ks) if ks.len() == 1 => 0.0,
        AlphabetSpec::Finite(_) => hausdorff_dimension(alphabet, space, m)?,
    };
    let grid = assemble(2.0 * delta, alphabet, space, m)?;
    let target = leading_eigen(&grid)?;
    let dim = grid.dim();
    if initial.len() != dim {
        return Err(TransferError::BadDensity(format!(
            "initial density has length {}, grid has {dim}",
            initial.len()
        )));
    }
    if initial.iter().any(|&v| v <= 0.0) {
        return Err(TransferError::BadDensity(
            "initial density must be positive".into(),
        ));
    }
    let weights = grid.weight_vector();
    let normalize = |v: &mut Vec<f64>| {
        let integral: f64 = weights.iter().zip(v.iter()).map(|(w, x)| w * x).sum();
        for x in v.iter_mut() {
            *x /= integral;
        }
    };
    let distance = |v: &[f64]| -> f64 {
        weights
            .iter()
            .zip(v.iter().zip(&target.h))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum()
    };
    let mut current = initial.to_vec();
    normalize(&mut current);
    let mut densities = vec![current.clone()];
    let mut distances = vec![distance(&current)];
    for _ in 0..n {
        current = grid.apply(&current)?;
        normalize(&mut current);
        densities.push(current.clone());
        distances.push(distance(&current));
    }
    let mut ratios = Vec::new();
    for pair in distances.windows(2) {
        if pair[0] > 1e-12 && pair[1] > 1e-13 && pair[1] < pair[0] {
            ratios.push(pair[1] / pair[0]);
        }
    }
    let rate = if ratios.len() < 2 {
        0.0
    } else {
        let log_mean: f64 =
            ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
        log_mean.exp()
    };
    Ok(GaussIteration { densities, distances, rate })
}

fn poly_eval(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Both sides of the adjoint identity `int (L_2 f) g dx = int f (g o T)
/// dx` on the full shift, for polynomials given by monomial
/// coefficients: the left side by grid quadrature, the right side by
/// per-branch Gauss-Legendre integration with an analytic zeta tail.
pub fn adjoint_pair(
    grid: &OperatorGrid,
    f_coefficients: &[f64],
    g_coefficients: &[f64],
) -> Result<(f64, f64), TransferError> {
    if grid.space.size() != 1 || !grid.alphabet.is_full() || grid.variation {
        return Err(TransferError::BadAlphabet(
            "adjoint check runs on the full shift over the full group".into(),
        ));
    }
    if grid.sigma != Complex64::new(2.0, 0.0) {
        return Err(TransferError::SigmaOutOfDomain(
            "adjoint identity holds at sigma = 2".into(),
        ));
    }
    let f_samples: Vec<f64> = grid.nodes.iter().map(|&x| poly_eval(f_coefficients, x)).collect();
    let lf = grid.apply(&f_samples)?;
    let lhs: f64 = grid
        .cc
        .iter()
        .zip(grid.nodes.iter().zip(&lf))
        .map(|(w, (&x, v))| w * v * poly_eval(g_coefficients, x))
        .sum();

    let (gl_nodes, gl_weights) = gauss_legendre(64);
    let branches = 500u64;
    let mut rhs = 0.0;
    for k in 1..=branches {
        let kf = k as f64;
        for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
            let base = x + kf;
            rhs += w * base.powi(-2) * poly_eval(f_coefficients, base.recip())
                * poly_eval(g_coefficients, x);
        }
    }
    // Tail over k > branches: expand f(1/(x+k)) in powers of 1/(x+k),
    // exact for a polynomial, and sum each power with a Hurwitz zeta.
    for (&x, &w) in gl_nodes.iter().zip(&gl_weights) {
        let mut kernel = 0.0;
        for (q, &c) in f_coefficients.iter().enumerate() {
            if c != 0.0 {
                let z = hurwitz_zeta(
                    Complex64::new(2.0 + q as f64, 0.0),
                    x + branches as f64 + 1.0,
                )?;
                kernel += c * z.re;
            }
        }
        rhs += w * kernel * poly_eval(g_coefficients, x);
    }
    Ok((lhs, rhs))
}
