//! Boundary K-theory of the digit shift.
//!
//! The shift on a restricted-digit set crossed with a coset space is a
//! subshift of finite type. This module builds its Markov matrix,
//! computes Smith normal forms over the integers, derives the K-groups
//! of the associated Cuntz-Krieger algebra, approximates the shift
//! coinvariants by cylinder depth, and evaluates the canonical trace
//! given by integration against the invariant Gibbs measure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::cosets::{build_cosets, Convention, CosetError, CosetSpace, SubgroupSpec};
use crate::transfer::{
    assemble, hausdorff_dimension, leading_eigen, AlphabetSpec, TransferError,
};

#[derive(Debug, Error)]
pub enum KTheoryError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("unnormalized spectral data: leading eigenvalue {0} is not 1")]
    UnnormalizedSpectralData(f64),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Coset(#[from] CosetError),
}

/// 0/1 transition matrix of the Markov partition for the shift on the
/// digit set `{1..N}` crossed with a coset space. States are pairs
/// (digit, coset label) in digit-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovMatrix {
    digits: u64,
    labels: usize,
    entries: Vec<Vec<i64>>,
}

impl MarkovMatrix {
    pub fn digit_count(&self) -> u64 {
        self.digits
    }

    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Row or column index of the state (digit, label), digit 1-based.
    pub fn index(&self, digit: u64, label: usize) -> usize {
        (digit as usize - 1) * self.labels + label
    }

    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.entries[row][col]
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.entries
    }
}

/// Builds the Markov matrix: the entry at ((i,s),(j,t)) is 1 exactly
/// when the digit-j action sends label t to s. The incoming digit i
/// does not enter the condition, so row blocks repeat.
pub fn markov_matrix(n: u64, space: &CosetSpace) -> Result<MarkovMatrix, KTheoryError> {
    if n == 0 {
        return Err(KTheoryError::BadParameter("digit count must be positive".into()));
    }
    let p = space.size();
    let dim = (n as u128) * p as u128;
    if dim > 4096 {
        return Err(KTheoryError::SizeGuard(format!(
            "Markov matrix dimension {dim} exceeds 4096"
        )));
    }
    let dim = dim as usize;
    let mut entries = vec![vec![0i64; dim]; dim];
    for j in 1..=n {
        for t in 0..p {
            let s = space.act_digit(j, t);
            let col = (j as usize - 1) * p + t;
            for i in 1..=n {
                entries[(i as usize - 1) * p + s][col] = 1;
            }
        }
    }
    Ok(MarkovMatrix { digits: n, labels: p, entries })
}

/// Finitely generated abelian group in invariant-factor form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianGroup {
    pub free_rank: usize,
    /// Invariant factors greater than 1, each dividing the next.
    pub torsion: Vec<BigInt>,
}

impl AbelianGroup {
    pub fn free(rank: usize) -> Self {
        AbelianGroup { free_rank: rank, torsion: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for d in &self.torsion {
            parts.push(format!("Z/{d}"));
        }
        write!(f, "{}", parts.join(" + "))
    }
}

/// The diagonal form of an integer matrix together with the unimodular
/// transforms realizing it: `diag = row_transform * A * col_transform`.
#[derive(Debug, Clone)]
pub struct SmithNormalForm {
    /// Nonzero invariant factors, positive, each dividing the next.
    pub diagonal: Vec<BigInt>,
    pub row_transform: Vec<Vec<BigInt>>,
    pub col_transform: Vec<Vec<BigInt>>,
}

impl SmithNormalForm {
    pub fn rank(&self) -> usize {
        self.diagonal.len()
    }
}

fn identity_bigint(n: usize) -> Vec<Vec<BigInt>> {
    let mut m = vec![vec![BigInt::zero(); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = BigInt::one();
    }
    m
}

// Position of a nonzero entry of minimal absolute value in the
// trailing submatrix, scanning row-major for determinism.
fn pivot_position(d: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in d.iter().enumerate().skip(t) {
        for (j, x) in row.iter().enumerate().skip(t) {
            if x.is_zero() {
                continue;
            }
            match best {
                Some((bi, bj)) if d[bi][bj].abs() <= x.abs() => {}
                _ => best = Some((i, j)),
            }
        }
    }
    best
}

/// Smith normal form over the integers, by Euclidean elimination with
/// minimal-pivot selection. Pivoting order is fixed, so the result is
/// deterministic.
pub fn smith_normal_form(a: &[Vec<BigInt>]) -> SmithNormalForm {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut d: Vec<Vec<BigInt>> = a.to_vec();
    let mut u = identity_bigint(rows);
    let mut v = identity_bigint(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        let Some((pi, pj)) = pivot_position(&d, t) else { break };
        d.swap(t, pi);
        u.swap(t, pi);
        for row in d.iter_mut() {
            row.swap(t, pj);
        }
        for row in v.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut dirty = false;
            // Clear column t by Euclidean steps, promoting remainders.
            for i in t + 1..rows {
                if d[i][t].is_zero() {
                    continue;
                }
                let q = &d[i][t] / &d[t][t];
                if !q.is_zero() {
                    let pivot_row = d[t].clone();
                    for (x, pv) in d[i].iter_mut().zip(&pivot_row).skip(t) {
                        *x -= &q * pv;
                    }
                    let ops_row = u[t].clone();
                    for (x, pv) in u[i].iter_mut().zip(&ops_row) {
                        *x -= &q * pv;
                    }
                }
                if !d[i][t].is_zero() {
                    d.swap(t, i);
                    u.swap(t, i);
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // Clear row t the same way.
            for j in t + 1..cols {
                if d[t][j].is_zero() {
                    continue;
                }
                let q = &d[t][j] / &d[t][t];
                if !q.is_zero() {
                    for row in d.iter_mut().skip(t) {
                        let delta = &q * &row[t];
                        row[j] -= delta;
                    }
                    for row in v.iter_mut() {
                        let delta = &q * &row[t];
                        row[j] -= delta;
                    }
                }
                if !d[t][j].is_zero() {
                    for row in d.iter_mut() {
                        row.swap(t, j);
                    }
                    for row in v.iter_mut() {
                        row.swap(t, j);
                    }
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // The pivot must divide the trailing block so that the
            // diagonal forms a divisibility chain.
            let mut divides = true;
            'scan: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !(&d[i][j] % &d[t][t]).is_zero() {
                        let add_row = d[i].clone();
                        for (x, av) in d[t].iter_mut().zip(&add_row).skip(t) {
                            *x += av;
                        }
                        let add_ops = u[i].clone();
                        for (x, av) in u[t].iter_mut().zip(&add_ops) {
                            *x += av;
                        }
                        divides = false;
                        break 'scan;
                    }
                }
            }
            if divides {
                break;
            }
        }
        if d[t][t].is_negative() {
            for x in d[t].iter_mut().skip(t) {
                *x = -std::mem::take(x);
            }
            for x in u[t].iter_mut() {
                *x = -std::mem::take(x);
            }
        }
        t += 1;
    }
    let diagonal = (0..t).map(|i| d[i][i].clone()).collect();
    SmithNormalForm { diagonal, row_transform: u, col_transform: v }
}

fn group_from_snf(dim: usize, snf: &SmithNormalForm) -> AbelianGroup {
    let torsion: Vec<BigInt> =
        snf.diagonal.iter().filter(|d| **d > BigInt::one()).cloned().collect();
    AbelianGroup { free_rank: dim - snf.rank(), torsion }
}

/// K-groups of the Cuntz-Krieger algebra of the Markov matrix:
/// `K0 = coker(I - A^T)` and `K1 = ker(I - A^T)`.
pub fn k_groups(a: &MarkovMatrix) -> (AbelianGroup, AbelianGroup) {
    let dim = a.dim();
    let mut s = identity_bigint(dim);
    for (r, row) in s.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x -= BigInt::from(a.entry(c, r));
        }
    }
    let snf = smith_normal_form(&s);
    let k0 = group_from_snf(dim, &snf);
    let k1 = AbelianGroup::free(dim - snf.rank());
    (k0, k1)
}

/// Cylinder-depth approximation of the shift coinvariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoinvariantsDepth {
    pub depth: usize,
    /// Rank of the depth-`depth` cylinder function lattice.
    pub cylinder_count: usize,
    pub group: AbelianGroup,
    /// True when the group agrees with the previous depth's group.
    pub stabilized: bool,
}

// Coinvariant group at one depth: the relation f = f compose T is
// assembled on depth-(d+1) cylinders, with the shift image collapsed
// back to depth d+1 by dropping the innermost digit constraint; the
// group is the cokernel of I minus that endomorphism. Depth 0 is the
// constants lattice.
fn coinvariant_group(
    n: u64,
    space: &CosetSpace,
    depth: usize,
) -> Result<AbelianGroup, KTheoryError> {
    if depth == 0 {
        return Ok(AbelianGroup::free(1));
    }
    let p = space.size();
    let ell = depth + 1;
    let words = (n as u128)
        .checked_pow(ell as u32)
        .ok_or_else(|| KTheoryError::SizeGuard("cylinder count overflows".into()))?;
    let dim = words
        .checked_mul(p as u128)
        .filter(|d| *d <= 1024)
        .ok_or_else(|| {
            KTheoryError::SizeGuard(format!(
                "endomorphism dimension {} exceeds 1024",
                words.saturating_mul(p as u128)
            ))
        })? as usize;
    let nu = n as usize;
    let stride = nu.pow((ell - 1) as u32);
    let mut s = identity_bigint(dim);
    for w in 0..nu.pow(ell as u32) {
        let parent = w / nu;
        for t in 0..p {
            let col = w * p + t;
            for j in 1..=n {
                let row_word = (j as usize - 1) * stride + parent;
                let row = row_word * p + space.act_digit(j, t);
                s[row][col] -= BigInt::one();
            }
        }
    }
    let snf = smith_normal_form(&s);
    Ok(group_from_snf(dim, &snf))
}

/// Coinvariants of the shift at a fixed cylinder depth, with a flag
/// recording whether the group has stopped changing. The direct limit
/// itself need not be finitely generated, so per-depth groups with
/// stabilization are the honest computable statement.
pub fn coinvariants_depth(
    n: u64,
    space: &CosetSpace,
    depth: usize,
) -> Result<CoinvariantsDepth, KTheoryError> {
    if n == 0 {
        return Err(KTheoryError::BadParameter("digit count must be positive".into()));
    }
    let p = space.size() as u128;
    if depth > 0 {
        let budget = (n as u128 * p)
            .checked_pow(depth as u32)
            .filter(|b| *b <= 1_000_000)
            .ok_or_else(|| {
                KTheoryError::SizeGuard(format!(
                    "(N p)^depth exceeds 1e6 at depth {depth}"
                ))
            })?;
        let _ = budget;
    }
    let group = coinvariant_group(n, space, depth)?;
    let stabilized = if depth == 0 {
        false
    } else {
        group == coinvariant_group(n, space, depth - 1)?
    };
    let cylinder_count = if depth == 0 {
        1
    } else {
        (n as u128).pow(depth as u32) as usize * space.size()
    };
    Ok(CoinvariantsDepth { depth, cylinder_count, group, stabilized })
}

/// A cylinder set: points whose digit string starts with `digits`,
/// with the coset label fixed to `label` or free (`None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cylinder {
    pub digits: Vec<u64>,
    pub label: Option<usize>,
}

/// Integer combination of cylinder indicators.
pub type CylinderFunction = Vec<(i64, Cylinder)>;

fn validate_cylinders(
    f: &[(i64, Cylinder)],
    space: &CosetSpace,
    digit_ok: impl Fn(u64) -> bool,
) -> Result<(), KTheoryError> {
    let p = space.size();
    for (_, cyl) in f {
        if let Some(t) = cyl.label {
            if t >= p {
                return Err(KTheoryError::BadParameter(format!(
                    "label {t} out of range for {p} cosets"
                )));
            }
        }
        for &k in &cyl.digits {
            if k == 0 || !digit_ok(k) {
                return Err(KTheoryError::BadParameter(format!(
                    "digit {k} is not in the alphabet"
                )));
            }
        }
    }
    Ok(())
}

/// Pullback of a cylinder function along the shift: each cylinder
/// `[w; t]` becomes the sum over first digits `j <= N` of
/// `[j w; act_j(t)]`.
pub fn shift_pullback(
    f: &[(i64, Cylinder)],
    n: u64,
    space: &CosetSpace,
) -> Result<CylinderFunction, KTheoryError> {
    if n == 0 {
        return Err(KTheoryError::BadParameter("digit count must be positive".into()));
    }
    validate_cylinders(f, space, |_| true)?;
    let mut out = Vec::with_capacity(f.len() * n as usize);
    for (c, cyl) in f {
        for j in 1..=n {
            let mut digits = Vec::with_capacity(cyl.digits.len() + 1);
            digits.push(j);
            digits.extend_from_slice(&cyl.digits);
            let label = cyl.label.map(|t| space.act_digit(j, t));
            out.push((*c, Cylinder { digits, label }));
        }
    }
    Ok(out)
}

/// Evaluates the canonical trace: integration against the invariant
/// Gibbs measure of the alphabet (the Hausdorff-dimension conformal
/// measure times its positive eigenfunction on the interval, uniform
/// over coset labels). Cylinder masses come from products of
/// single-branch transfer matrices paired with the spectral data, so
/// the trace of the constant 1 is exactly the spectral normalization.
pub fn trace_eval(
    f: &[(i64, Cylinder)],
    alphabet: &AlphabetSpec,
    space: &CosetSpace,
    m: usize,
) -> Result<f64, KTheoryError> {
    match alphabet {
        AlphabetSpec::Finite(digits) => {
            let set: BTreeSet<u64> = digits.iter().copied().collect();
            validate_cylinders(f, space, |k| set.contains(&k))?;
        }
        AlphabetSpec::Full { .. } => validate_cylinders(f, space, |_| true)?,
    }
    let trivial = build_cosets(&SubgroupSpec::Full, Convention::Pgl)?;
    let delta = match alphabet {
        AlphabetSpec::Full { .. } => 1.0,
        AlphabetSpec::Finite(_) => hausdorff_dimension(alphabet, &trivial, m)?,
    };
    let grid = assemble(2.0 * delta, alphabet, &trivial, m)?;
    let sd = leading_eigen(&grid)?;
    if (sd.lambda - 1.0).abs() > 1e-6 {
        return Err(KTheoryError::UnnormalizedSpectralData(sd.lambda));
    }
    let h = DVector::from_column_slice(&sd.h);
    let ell = DVector::from_column_slice(&sd.ell);
    let needed: BTreeSet<u64> =
        f.iter().flat_map(|(_, cyl)| cyl.digits.iter().copied()).collect();
    let mut branch: BTreeMap<u64, DMatrix<f64>> = BTreeMap::new();
    for &k in &needed {
        let g = assemble(2.0 * delta, &AlphabetSpec::Finite(vec![k]), &trivial, m)?;
        let b = g.real_matrix().ok_or(TransferError::ComplexGrid)?.clone();
        branch.insert(k, b);
    }
    let p = space.size() as f64;
    let mut total = 0.0;
    for (c, cyl) in f {
        let mut v = h.clone();
        for k in &cyl.digits {
            v = &branch[k] * v;
        }
        let mu = ell.dot(&v) / sd.lambda.powi(cyl.digits.len() as i32);
        let share = if cyl.label.is_some() { 1.0 / p } else { 1.0 };
        total += *c as f64 * mu * share;
    }
    Ok(total)
}

/// Outcome of the bounded positivity search in the pre-ordered
/// coinvariant group.
#[derive(Debug, Clone)]
pub enum Positivity {
    /// A pointwise-nonnegative representative of the class.
    Positive { witness: CylinderFunction },
    /// The canonical trace is negative, certifying non-positivity.
    NotPositive { trace: f64 },
    /// The bounded search was inconclusive.
    Unknown,
}

// Minimum value of the cylinder function over the depth-D refinement,
// D being the deepest cylinder present.
fn pointwise_min(
    f: &[(i64, Cylinder)],
    n: u64,
    space: &CosetSpace,
) -> Result<i64, KTheoryError> {
    let p = space.size();
    let depth = f.iter().map(|(_, cyl)| cyl.digits.len()).max().unwrap_or(0);
    let words = (n as u128)
        .checked_pow(depth as u32)
        .filter(|w| w.saturating_mul(p as u128) <= 1_000_000)
        .ok_or_else(|| {
            KTheoryError::SizeGuard(format!("refinement at depth {depth} exceeds 1e6 cells"))
        })?;
    let mut min = i64::MAX;
    let mut word = vec![1u64; depth];
    for widx in 0..words {
        let mut rem = widx;
        for k in (0..depth).rev() {
            word[k] = (rem % n as u128) as u64 + 1;
            rem /= n as u128;
        }
        for t in 0..p {
            let mut value = 0i64;
            for (c, cyl) in f {
                let digit_match = cyl.digits.iter().zip(&word).all(|(a, b)| a == b);
                let label_match = cyl.label.is_none() || cyl.label == Some(t);
                if digit_match && label_match {
                    value += c;
                }
            }
            min = min.min(value);
        }
    }
    if depth == 0 && p == 0 {
        min = 0;
    }
    Ok(min)
}

/// Searches for a pointwise-nonnegative representative of the class of
/// `f` among `f + s (g - g compose T)` with `g` a single cylinder of
/// depth at most `depth_budget` and `s` a sign. A negative canonical
/// trace certifies non-positivity outright; otherwise an inconclusive
/// search returns `Unknown`.
pub fn positivity_witness(
    f: &[(i64, Cylinder)],
    n: u64,
    space: &CosetSpace,
    depth_budget: usize,
) -> Result<Positivity, KTheoryError> {
    if n == 0 {
        return Err(KTheoryError::BadParameter("digit count must be positive".into()));
    }
    validate_cylinders(f, space, |k| k <= n)?;
    let tau = trace_eval(f, &AlphabetSpec::contiguous(n), space, 24)?;
    if tau < -1e-8 {
        return Ok(Positivity::NotPositive { trace: tau });
    }
    if pointwise_min(f, n, space)? >= 0 {
        return Ok(Positivity::Positive { witness: f.to_vec() });
    }
    let p = space.size();
    for len in 1..=depth_budget {
        let words = (n as u128).pow(len as u32);
        if words > 100_000 {
            return Err(KTheoryError::SizeGuard(format!(
                "candidate enumeration at depth {len} exceeds 1e5 words"
            )));
        }
        for widx in 0..words {
            let mut digits = vec![1u64; len];
            let mut rem = widx;
            for k in (0..len).rev() {
                digits[k] = (rem % n as u128) as u64 + 1;
                rem /= n as u128;
            }
            let mut labels: Vec<Option<usize>> = vec![None];
            labels.extend((0..p).map(Some));
            for label in labels {
                for sign in [1i64, -1] {
                    let g = vec![(sign, Cylinder { digits: digits.clone(), label })];
                    let mut rep = f.to_vec();
                    rep.extend(g.iter().cloned());
                    for (c, cyl) in shift_pullback(&g, n, space)? {
                        rep.push((-c, cyl));
                    }
                    if pointwise_min(&rep, n, space)? >= 0 {
                        return Ok(Positivity::Positive { witness: rep });
                    }
                }
            }
        }
    }
    Ok(Positivity::Unknown)
}
