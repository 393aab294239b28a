//! Periodic-orbit zeta functions and Fredholm determinants.
//!
//! Closed orbits of the shift on `[0,1] x P` correspond to cyclic
//! classes of digit words; each class carries a hyperbolic matrix, a
//! label permutation, and the classical per-orbit trace weight
//! `chi_sigma(g) = N(g)^{-sigma/2} / (1 - det(g) N(g)^{-1})`. The
//! module enumerates those classes, sums operator traces per orbit
//! length, and evaluates the determinant `det(I - L_{2s})` two
//! independent ways: as the exponential of the truncated trace series
//! and as the Euler product over primitive classes. A third route,
//! the determinant of the discretized operator, covers the full
//! alphabet where word enumeration is impossible and supplies the
//! zero at `s = 1`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use thiserror::Error;

use crate::arith::{ArithError, Mat2};
use crate::cosets::{CosetError, CosetSpace};
use crate::transfer::{assemble, AlphabetSpec, GridMatrix, OperatorGrid, TransferError};

const WORD_BUDGET: f64 = 1e7;

#[derive(Debug, Error)]
pub enum ZetaError {
    #[error("enumeration would visit about {0:.2e} words, over the 1e7 budget")]
    TooManyWords(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("trace terms are not decaying: {0}")]
    NonDecaying(String),
    #[error("non-hyperbolic word: {0}")]
    NonHyperbolic(String),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("no sign change of the determinant on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },
}

fn validate_alphabet(alphabet: &[u64]) -> Result<(), ZetaError> {
    if alphabet.is_empty() {
        return Err(ZetaError::BadParameter("empty alphabet".into()));
    }
    if alphabet.contains(&0) {
        return Err(ZetaError::BadParameter("digit 0 is not allowed".into()));
    }
    let mut sorted = alphabet.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != alphabet.len() {
        return Err(ZetaError::BadParameter("repeated digit".into()));
    }
    Ok(())
}

fn check_word_budget(alphabet_size: usize, lengths: impl Iterator<Item = usize>) -> Result<(), ZetaError> {
    let n = alphabet_size as f64;
    let total: f64 = lengths.map(|l| n.powi(l as i32)).sum();
    if total > WORD_BUDGET {
        return Err(ZetaError::TooManyWords(total));
    }
    Ok(())
}

// Expanding eigenvalue of a positive digit-word matrix from its trace
// and determinant. Every nonempty positive word is hyperbolic.
fn expanding_eigenvalue(trace: f64, det: f64) -> Result<f64, ZetaError> {
    let disc = trace * trace - 4.0 * det;
    if disc <= 0.0 {
        return Err(ZetaError::NonHyperbolic(format!(
            "trace {trace}, det {det}"
        )));
    }
    let lam = (trace + disc.sqrt()) / 2.0;
    if lam <= 1.0 {
        return Err(ZetaError::NonHyperbolic(format!(
            "expanding eigenvalue {lam} not above 1"
        )));
    }
    Ok(lam)
}

// chi_sigma(g) from N(g) and det(g).
fn chi(sigma: f64, norm: f64, det: f64) -> f64 {
    norm.powf(-sigma / 2.0) / (1.0 - det / norm)
}

// Word-product state: the running matrix in u128 and the running
// label permutation t -> t . g_w.
#[derive(Clone)]
struct WordState {
    mat: [u128; 4],
    perm: Vec<usize>,
}

impl WordState {
    fn identity(p: usize) -> Self {
        WordState { mat: [1, 0, 0, 1], perm: (0..p).collect() }
    }

    fn push_digit(&self, a: u64, space: &CosetSpace) -> Result<WordState, ZetaError> {
        // Right multiplication by [[0,1],[1,a]].
        let [x, y, z, w] = self.mat;
        let a = a as u128;
        let overflow = || {
            ZetaError::BadParameter("word matrix entries overflow 128 bits".into())
        };
        let mul = |u: u128, v: u128| u.checked_mul(v).ok_or_else(overflow);
        let add = |u: u128, v: u128| u.checked_add(v).ok_or_else(overflow);
        let mat = [y, add(x, mul(y, a)?)?, w, add(z, mul(w, a)?)?];
        let perm = self
            .perm
            .iter()
            .map(|&t| space.rmul_digit(a as u64, t))
            .collect();
        Ok(WordState { mat, perm })
    }

    fn trace(&self) -> f64 {
        (self.mat[0] + self.mat[3]) as f64
    }

    fn fixed_labels(&self) -> usize {
        self.perm.iter().enumerate().filter(|&(t, &u)| t == u).count()
    }
}

// Visits every word of the given length in lexicographic order with
// its product state. The odometer keeps prefix states so only changed
// suffixes are recomputed.
fn for_each_word<F>(
    alphabet: &[u64],
    space: &CosetSpace,
    length: usize,
    mut visit: F,
) -> Result<(), ZetaError>
where
    F: FnMut(&[u64], &WordState) -> Result<(), ZetaError>,
{
    let mut sorted = alphabet.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut indices = vec![0usize; length];
    let mut word: Vec<u64> = vec![sorted[0]; length];
    let mut states = Vec::with_capacity(length + 1);
    states.push(WordState::identity(space.size()));
    for i in 0..length {
        let next = states[i].push_digit(word[i], space)?;
        states.push(next);
    }
    loop {
        visit(&word, &states[length])?;
        // Advance the odometer from the last position.
        let mut pos = length;
        while pos > 0 && indices[pos - 1] == n - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return Ok(());
        }
        indices[pos - 1] += 1;
        word[pos - 1] = sorted[indices[pos - 1]];
        for i in pos..length {
            indices[i] = 0;
            word[i] = sorted[0];
        }
        for i in (pos - 1)..length {
            states[i + 1] = states[i].push_digit(word[i], space)?;
        }
    }
}

// Primitive period of the word if it is the lexicographically minimal
// rotation, None otherwise.
fn canonical_period(word: &[u64]) -> Option<usize> {
    let l = word.len();
    let mut period = l;
    for r in 1..l {
        for i in 0..l {
            let rotated = word[(i + r) % l];
            if rotated < word[i] {
                return None;
            }
            if rotated > word[i] {
                break;
            }
            if i == l - 1 && r < period {
                period = r;
            }
        }
    }
    Some(period)
}

/// A cyclic equivalence class of digit words with its closed-orbit
/// data.
#[derive(Debug, Clone)]
pub struct HyperbolicClass {
    /// Lexicographically minimal rotation.
    pub word: Vec<u64>,
    pub length: usize,
    /// True when the word is not a power of a shorter one.
    pub primitive: bool,
    /// Repetition multiplicity: `word = (primitive core)^kappa`.
    pub kappa: usize,
    /// Number of distinct rotations, `length / kappa`.
    pub rotations: usize,
    pub matrix: Mat2,
    pub det: i64,
    /// `N(g)`, the square of the expanding eigenvalue.
    pub norm: f64,
    /// Fixed labels of the permutation `rho`.
    pub tau: usize,
    /// The label permutation `t -> t . g`.
    pub rho: Vec<usize>,
}

fn classes_of_length(
    alphabet: &[u64],
    space: &CosetSpace,
    length: usize,
) -> Result<Vec<HyperbolicClass>, ZetaError> {
    let parity_det = if length.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut classes = Vec::new();
    for_each_word(alphabet, space, length, |word, state| {
        let Some(core) = canonical_period(word) else {
            return Ok(());
        };
        let lam = expanding_eigenvalue(state.trace(), parity_det)?;
        let matrix = Mat2::new(
            BigInt::from(state.mat[0]),
            BigInt::from(state.mat[1]),
            BigInt::from(state.mat[2]),
            BigInt::from(state.mat[3]),
        );
        classes.push(HyperbolicClass {
            word: word.to_vec(),
            length,
            primitive: core == length,
            kappa: length / core,
            rotations: core,
            matrix,
            det: parity_det as i64,
            norm: lam * lam,
            tau: state.fixed_labels(),
            rho: state.perm.clone(),
        });
        Ok(())
    })?;
    Ok(classes)
}

/// Enumerates cyclic classes of digit words, grouped by length
/// `1..=l_max` (index `l-1`).
pub fn enumerate_classes(
    alphabet: &[u64],
    space: &CosetSpace,
    l_max: usize,
) -> Result<Vec<Vec<HyperbolicClass>>, ZetaError> {
    validate_alphabet(alphabet)?;
    if l_max == 0 || l_max > 14 {
        return Err(ZetaError::BadParameter(format!(
            "l_max {l_max} outside 1..=14"
        )));
    }
    check_word_budget(alphabet.len(), 1..=l_max)?;
    (1..=l_max)
        .map(|l| classes_of_length(alphabet, space, l))
        .collect()
}

// Per-word fixed-point sum: every word of the length contributes
// chi_sigma(g_w) tau_{g_w}.
fn orbit_trace_by_words(
    sigma: f64,
    alphabet: &[u64],
    space: &CosetSpace,
    length: usize,
) -> Result<f64, ZetaError> {
    let parity_det = if length.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut sum = 0.0;
    for_each_word(alphabet, space, length, |_, state| {
        let lam = expanding_eigenvalue(state.trace(), parity_det)?;
        sum += chi(sigma, lam * lam, parity_det) * state.fixed_labels() as f64;
        Ok(())
    })?;
    Ok(sum)
}

// Per-class sum: rotations of a word share chi and tau, so each class
// contributes with multiplicity `rotations`.
fn orbit_trace_by_classes(
    sigma: f64,
    alphabet: &[u64],
    space: &CosetSpace,
    length: usize,
) -> Result<f64, ZetaError> {
    let classes = classes_of_length(alphabet, space, length)?;
    Ok(classes
        .iter()
        .map(|c| c.rotations as f64 * chi(sigma, c.norm, c.det as f64) * c.tau as f64)
        .sum())
}

/// `Tr L_sigma^length` as the fixed-point sum over digit words:
/// `sum_w chi_sigma(g_w) tau_{g_w}`.
pub fn orbit_trace(
    sigma: f64,
    alphabet: &[u64],
    space: &CosetSpace,
    length: usize,
) -> Result<f64, ZetaError> {
    validate_alphabet(alphabet)?;
    if length == 0 {
        return Err(ZetaError::BadParameter("orbit trace needs length >= 1".into()));
    }
    check_word_budget(alphabet.len(), std::iter::once(length))?;
    if length <= 8 {
        orbit_trace_by_words(sigma, alphabet, space, length)
    } else {
        orbit_trace_by_classes(sigma, alphabet, space, length)
    }
}

// The operator section in the Taylor basis ((z - 1) / R)^n on the disc
// |z - 1| <= R = 3/2. Every inverse branch 1/(z + k), k >= 1, maps that
// disc strictly inside itself with uniform ratio 2/3, so the section's
// diagonal decays geometrically and its traces and determinants
// converge geometrically in the section size. The values-space
// collocation matrix has no such property: its parasitic modes make the
// raw trace converge only algebraically, because the branches are not
// uniform contractions of the real interval's Bernstein ellipse (the
// digit-1 branch has unit derivative magnitude at x = 0).
//
// Coefficients come from the Cauchy integral over the circle
// |z - 1| = R, evaluated as a discrete Fourier transform.
fn taylor_matrix(
    sigma: f64,
    digits: &[u64],
    space: &CosetSpace,
    m: usize,
) -> DMatrix<f64> {
    use num_complex::Complex64;
    let p = space.size();
    let radius = 1.5;
    let samples = 2 * m + 32;
    let circle: Vec<Complex64> = (0..samples)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / samples as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect();
    let mut b = DMatrix::zeros(p * m, p * m);
    for &k in digits {
        let kf = k as f64;
        // Weight and scaled image at each circle node; phi stays in
        // |phi| <= 2/3.
        let mut weight = Vec::with_capacity(samples);
        let mut phi = Vec::with_capacity(samples);
        for e in &circle {
            let z = Complex64::new(1.0, 0.0) + radius * e;
            let tau = (z + kf).inv();
            weight.push((z + kf).powf(-sigma));
            phi.push((tau - 1.0) / radius);
        }
        let mut image: Vec<Complex64> = weight.clone();
        for n in 0..m {
            // image = weight * phi^n at the circle nodes.
            for q in 0..m {
                let mut c = Complex64::new(0.0, 0.0);
                for (j, g) in image.iter().enumerate() {
                    c += g * circle[(q * j) % samples].conj();
                }
                let value = c.re / samples as f64;
                for t in 0..p {
                    let u = space.act_digit(k, t);
                    b[(t * m + q, u * m + n)] += value;
                }
            }
            for (g, f) in image.iter_mut().zip(&phi) {
                *g *= f;
            }
        }
    }
    b
}

fn real_power_trace(a: &DMatrix<f64>, length: usize) -> f64 {
    let mut power = a.clone();
    for _ in 1..length {
        power = &power * a;
    }
    power.trace()
}

// Minimum Taylor section size. The diagonal tail beyond index n is
// bounded by a small multiple of (2/3)^n, so 56 puts truncation error
// near 1e-9, two orders below the documented trace and determinant
// tolerances.
const TAYLOR_SECTION_FLOOR: usize = 56;

/// Trace of the `length`-th power of the discretized operator. For
/// finite-alphabet plain-weight grids the trace is evaluated through
/// the Taylor section of the same operator, sized at least
/// trace-faithfully; otherwise the raw matrix power is used.
pub fn matrix_trace(grid: &OperatorGrid, length: usize) -> f64 {
    if length == 0 {
        return grid.dim() as f64;
    }
    let sigma = grid.sigma();
    if let AlphabetSpec::Finite(digits) = grid.alphabet() {
        if !grid.is_variation() && sigma.im == 0.0 {
            let m = grid.node_count().max(TAYLOR_SECTION_FLOOR);
            let b = taylor_matrix(sigma.re, digits, grid.space(), m);
            return real_power_trace(&b, length);
        }
    }
    match grid.matrix() {
        GridMatrix::Real(a) => real_power_trace(a, length),
        GridMatrix::Complex(a) => {
            let mut power = a.clone();
            for _ in 1..length {
                power = &power * a;
            }
            power.trace().re
        }
    }
}

/// The determinant `det(I - L_{2s})` by two routes.
#[derive(Debug, Clone)]
pub struct FredholmDet {
    /// The series value for finite alphabets, the grid determinant for
    /// the full alphabet.
    pub value: f64,
    /// `exp(-sum_{l<=l_max} Tr L^l / l)`; absent for the full alphabet,
    /// whose words cannot be enumerated.
    pub series: Option<f64>,
    /// Determinant of `I - A` for the discretized operator.
    pub grid_det: f64,
    /// Geometric bound on the dropped trace tail of the series.
    pub tail_bound: f64,
}

// det(I - L_{2s}) of the discretized operator. Finite alphabets use
// the trace-faithful Taylor section; the full alphabet falls back to
// the values-space collocation matrix, whose parasitic modes shift the
// determinant's value by a smooth nonzero factor but leave its zeros
// spectrally accurate.
fn grid_determinant(
    s: f64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
    psl_square: bool,
) -> Result<f64, ZetaError> {
    let a = match alphabet {
        AlphabetSpec::Finite(digits) => {
            validate_alphabet(digits)?;
            taylor_matrix(2.0 * s, digits, space, m.max(TAYLOR_SECTION_FLOOR))
        }
        AlphabetSpec::Full { .. } => {
            let grid = assemble(2.0 * s, alphabet, space, m)?;
            grid.real_matrix().ok_or(TransferError::ComplexGrid)?.clone()
        }
    };
    let dim = a.nrows();
    let arg = if psl_square { &a * &a } else { a };
    Ok((DMatrix::identity(dim, dim) - arg).determinant())
}

/// Evaluates `det(I - L_{2s})` as the exponential of the truncated
/// trace series (finite alphabets) and as the determinant of the
/// discretized operator (all alphabets). With `psl_square` the
/// operator is squared first, the form a zeta function for a subgroup
/// of the orientation-preserving half needs.
pub fn fredholm_det(
    s: f64,
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    l_max: usize,
    m: usize,
    psl_square: bool,
) -> Result<FredholmDet, ZetaError> {
    if l_max < 6 {
        return Err(ZetaError::BadParameter(format!(
            "l_max {l_max} below 6 leaves the trace tail unchecked"
        )));
    }
    let grid_det = grid_determinant(s, alphabet, space, m, psl_square)?;
    let AlphabetSpec::Finite(digits) = alphabet else {
        return Ok(FredholmDet { value: grid_det, series: None, grid_det, tail_bound: 0.0 });
    };
    let lengths = || (1..=l_max).map(|l| if psl_square { 2 * l } else { l });
    check_word_budget(digits.len(), lengths())?;
    let mut terms = Vec::with_capacity(l_max);
    for (div, word_len) in (1..=l_max).zip(lengths()) {
        let trace = orbit_trace(2.0 * s, digits, space, word_len)?;
        terms.push(trace / div as f64);
    }
    let mags: Vec<f64> = terms.iter().map(|t| t.abs()).collect();
    let window: Vec<f64> = mags
        .iter()
        .rev()
        .take(5)
        .copied()
        .filter(|&x| x > 1e-300)
        .collect();
    let mut tail_bound = 0.0;
    if window.len() >= 2 {
        let ratio = (window[0] / window[window.len() - 1])
            .powf(1.0 / (window.len() - 1) as f64);
        if ratio >= 0.999 {
            return Err(ZetaError::NonDecaying(format!(
                "trace term ratio {ratio:.4} at s = {s}"
            )));
        }
        tail_bound = window[0] * ratio / (1.0 - ratio);
    }
    let series = (-terms.iter().sum::<f64>()).exp();
    // The tail acts inside the exponential; transfer it to the value.
    tail_bound *= series;
    Ok(FredholmDet { value: series, series: Some(series), grid_det, tail_bound })
}

/// The Euler product over primitive classes.
#[derive(Debug, Clone)]
pub struct ZetaProduct {
    pub value: f64,
    /// Primitive classes inside the length cutoff.
    pub primitive_classes: usize,
    /// Total determinant factors across all powers `m`.
    pub factors: usize,
}

// log det(I - c P) for a permutation P via its cycle type:
// prod over cycles (1 - c^len).
fn log_permutation_factor(c: f64, rho: &[usize]) -> f64 {
    let mut seen = vec![false; rho.len()];
    let mut log = 0.0;
    for start in 0..rho.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0usize;
        let mut t = start;
        while !seen[t] {
            seen[t] = true;
            t = rho[t];
            len += 1;
        }
        log += (1.0 - c.powi(len as i32)).ln();
    }
    log
}

/// Zeta product over primitive classes with `log N(g) <= length_cutoff`:
/// `prod_{g, m} det(I - det(g)^m N(g)^{-(s+m)} rho(g))`, each factor a
/// `p x p` determinant evaluated through the cycle type of `rho(g)`.
/// Powers `m` stop once `N(g)^{-(s+m)} < 1e-16`.
pub fn zeta_product(
    s: f64,
    alphabet: &[u64],
    space: &CosetSpace,
    length_cutoff: f64,
) -> Result<ZetaProduct, ZetaError> {
    validate_alphabet(alphabet)?;
    // Shortest geodesic per word length comes from the smallest digit.
    let a_min = *alphabet.iter().min().unwrap() as f64;
    let shortest = 2.0 * ((a_min + (a_min * a_min + 4.0).sqrt()) / 2.0).ln();
    let l_cap = ((length_cutoff / shortest).floor() as usize).min(14);
    if l_cap == 0 {
        return Ok(ZetaProduct { value: 1.0, primitive_classes: 0, factors: 0 });
    }
    check_word_budget(alphabet.len(), 1..=l_cap)?;
    let mut log_value = 0.0;
    let mut primitive_classes = 0usize;
    let mut factors = 0usize;
    for length in 1..=l_cap {
        for class in classes_of_length(alphabet, space, length)? {
            if !class.primitive || class.norm.ln() > length_cutoff {
                continue;
            }
            primitive_classes += 1;
            let mut m = 0u32;
            loop {
                let scale = class.norm.powf(-(s + m as f64));
                if scale < 1e-16 || m > 2000 {
                    break;
                }
                let c = (class.det as f64).powi(m as i32) * scale;
                log_value += log_permutation_factor(c, &class.rho);
                factors += 1;
                m += 1;
            }
        }
    }
    Ok(ZetaProduct { value: log_value.exp(), primitive_classes, factors })
}

/// The determinant for the level set of the minimal Lyapunov exponent:
/// only the golden-mean orbit family (all digits 1) survives, so this
/// is `fredholm_det` on the singleton alphabet `{1}`.
pub fn minimal_lyapunov_zeta(
    s: f64,
    space: &CosetSpace,
    l_max: usize,
    m: usize,
) -> Result<FredholmDet, ZetaError> {
    if s <= 0.5 {
        return Err(ZetaError::BadParameter(format!(
            "level-set zeta needs s > 1/2, got {s}"
        )));
    }
    fredholm_det(s, &AlphabetSpec::Finite(vec![1]), space, l_max, m, false)
}

/// Locates a zero of `s -> det(I - L_{2s})` (grid determinant) by
/// bisection on `[lo, hi]`.
pub fn selberg_zero(
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
    lo: f64,
    hi: f64,
) -> Result<f64, ZetaError> {
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(ZetaError::BadParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    let f = |s: f64| grid_determinant(s, alphabet, space, m, false);
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(ZetaError::BracketFailure { lo, hi });
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if b - a < 1e-10 {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
