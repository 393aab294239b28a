//! Homology of modular curves relative to cusps, presented by coset
//! symbols.
//!
//! The free rational module on the coset labels is divided by the
//! involution and triangle relations `e_s + e_{s.sigma} = 0` and
//! `e_s + e_{s.tau} + e_{s.tau^2} = 0`, where `sigma = [[0,-1],[1,0]]`
//! and `tau = sigma T` act by right multiplication. The quotient is
//! `H_1(X, cusps; Q)`. Each label `s` carries the class `phi(s)` of the
//! geodesic from `rep(s)(0)` to `rep(s)(infinity)`; orbit sums of `phi`
//! therefore accumulate the negative of the path class `{0, p_n/q_n}`,
//! and `modular_symbol` applies that sign so its value is the class of
//! the path from `0` to its argument.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::json;
use thiserror::Error;

use crate::arith::{cf_expand, ArithError, Mat2, Rational};
use crate::cosets::{Convention, CosetError, CosetSpace};

#[derive(Debug, Error)]
pub enum HomologyError {
    #[error("homology needs a PSL-convention coset space")]
    NotPslConvention,
    #[error("argument {0} lies outside [0, 1)")]
    AlphaOutOfRange(String),
    #[error("pairing vector has length {got}, expected {want}")]
    BadVectorLength { got: usize, want: usize },
    #[error("chain is not a cycle: its boundary on cusp classes is nonzero")]
    NotACycle,
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// A cusp, stored as a reduced fraction with nonnegative denominator;
/// infinity is `1/0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cusp {
    num: BigInt,
    den: BigInt,
}

impl Cusp {
    pub fn new(num: BigInt, den: BigInt) -> Self {
        if den.is_zero() {
            return Cusp { num: BigInt::one(), den: BigInt::zero() };
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = (num / &g, den / &g);
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        Cusp { num, den }
    }

    pub fn infinity() -> Self {
        Cusp { num: BigInt::one(), den: BigInt::zero() }
    }

    pub fn from_rational(x: &Rational) -> Self {
        Cusp::new(x.numer().clone(), x.denom().clone())
    }

    pub fn is_infinity(&self) -> bool {
        self.den.is_zero()
    }

    // A determinant-one matrix sending infinity to this cusp.
    fn sl2_from_infinity(&self) -> Mat2 {
        let egcd = self.num.extended_gcd(&self.den);
        debug_assert!(egcd.gcd.is_one());
        Mat2 {
            a: self.num.clone(),
            b: -egcd.y.clone(),
            c: self.den.clone(),
            d: egcd.x.clone(),
        }
    }
}

impl fmt::Display for Cusp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinity() {
            write!(f, "oo")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Whether two cusps lie in the same orbit of the subgroup behind the
/// coset space. With `u, u'` sending infinity to the two cusps, the
/// orbits meet exactly when `u' T^n u^{-1}` lies in the subgroup for
/// some `n`, and one period of the translation action bounds the search.
pub fn cusp_equivalent(
    space: &CosetSpace,
    a: &Cusp,
    b: &Cusp,
) -> Result<bool, CosetError> {
    let u_inv = a.sl2_from_infinity().adjugate();
    let t_mat = Mat2::new(1, 1, 0, 1);
    let mut left = b.sl2_from_infinity();
    for _ in 0..space.action_period() {
        if space.is_member(&(&left * &u_inv))? {
            return Ok(true);
        }
        left = &left * &t_mat;
    }
    Ok(false)
}

fn rref(rows: &mut Vec<Vec<Rational>>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pivot_row) = (r..rows.len()).find(|&i| !rows[i][c].is_zero())
        else {
            continue;
        };
        rows.swap(r, pivot_row);
        let inv = rows[r][c].clone().recip();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let factor = row[c].clone();
                for (x, pv) in row.iter_mut().zip(&pivot) {
                    *x -= &factor * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Rational coordinates of a homology class in the chosen basis.
pub type HomologyClass = Vec<Rational>;

pub struct HomologyModel {
    space: CosetSpace,
    sigma: Vec<usize>,
    tau: Vec<usize>,
    reps: Vec<Mat2>,
    relation_rank: usize,
    basis: Vec<usize>,
    proj: Vec<Vec<Rational>>,
    cusps: Vec<Cusp>,
    cusp_class_of_point: Vec<usize>,
    class_count: usize,
    class_reps: Vec<Cusp>,
    // Per label: cusp classes of rep(infinity) and rep(0).
    boundary_inf: Vec<usize>,
    boundary_zero: Vec<usize>,
}

/// Builds the relative-homology presentation for a PSL coset space.
pub fn build_homology(space: &CosetSpace) -> Result<HomologyModel, HomologyError> {
    if space.convention() != Convention::Psl {
        return Err(HomologyError::NotPslConvention);
    }
    let p = space.size();
    let s_mat = Mat2::new(0, -1, 1, 0);
    let st = Mat2::new(0, -1, 1, 1);
    let mut sigma = Vec::with_capacity(p);
    let mut tau = Vec::with_capacity(p);
    for t in 0..p {
        sigma.push(space.right_mul(&s_mat, t)?);
        tau.push(space.right_mul(&st, t)?);
    }

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let zero_row = || vec![Rational::zero(); p];
    for s in 0..p {
        if sigma[s] >= s {
            let mut row = zero_row();
            row[s] += Rational::one();
            row[sigma[s]] += Rational::one();
            rows.push(row);
        }
        let orbit = [s, tau[s], tau[tau[s]]];
        if s == *orbit.iter().min().expect("nonempty") {
            let mut row = zero_row();
            for &u in &orbit {
                row[u] += Rational::one();
            }
            rows.push(row);
        }
    }
    let pivots = rref(&mut rows);
    let relation_rank = pivots.len();
    let is_pivot: Vec<bool> = {
        let mut v = vec![false; p];
        for &c in &pivots {
            v[c] = true;
        }
        v
    };
    let basis: Vec<usize> = (0..p).filter(|&c| !is_pivot[c]).collect();
    let basis_pos: HashMap<usize, usize> =
        basis.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let dim = basis.len();
    let mut proj = vec![vec![Rational::zero(); dim]; p];
    for (i, &b) in basis.iter().enumerate() {
        proj[b][i] = Rational::one();
    }
    for (row, &c) in rows.iter().zip(&pivots) {
        for (&b, slot) in basis.iter().zip(proj[c].iter_mut()) {
            *slot = -row[b].clone();
        }
        let _ = basis_pos;
    }

    let reps = space.coset_reps()?;
    let mut cusps: Vec<Cusp> = Vec::new();
    let mut cusp_index: HashMap<Cusp, usize> = HashMap::new();
    let mut point_of = |c: Cusp, cusps: &mut Vec<Cusp>| -> usize {
        if let Some(&i) = cusp_index.get(&c) {
            return i;
        }
        let i = cusps.len();
        cusp_index.insert(c.clone(), i);
        cusps.push(c);
        i
    };
    let mut inf_point = Vec::with_capacity(p);
    let mut zero_point = Vec::with_capacity(p);
    for rep in &reps {
        let inf = Cusp::new(rep.a.clone(), rep.c.clone());
        let zero = Cusp::new(rep.b.clone(), rep.d.clone());
        inf_point.push(point_of(inf, &mut cusps));
        zero_point.push(point_of(zero, &mut cusps));
    }

    let mut cusp_class_of_point = vec![usize::MAX; cusps.len()];
    let mut class_reps: Vec<Cusp> = Vec::new();
    for (i, c) in cusps.iter().enumerate() {
        let mut found = None;
        for (k, rep) in class_reps.iter().enumerate() {
            if cusp_equivalent(space, c, rep)? {
                found = Some(k);
                break;
            }
        }
        cusp_class_of_point[i] = match found {
            Some(k) => k,
            None => {
                class_reps.push(c.clone());
                class_reps.len() - 1
            }
        };
    }
    let class_count = class_reps.len();
    let boundary_inf: Vec<usize> =
        inf_point.iter().map(|&i| cusp_class_of_point[i]).collect();
    let boundary_zero: Vec<usize> =
        zero_point.iter().map(|&i| cusp_class_of_point[i]).collect();

    let model = HomologyModel {
        space: space.clone(),
        sigma,
        tau,
        reps,
        relation_rank,
        basis,
        proj,
        cusps,
        cusp_class_of_point,
        class_count,
        class_reps,
        boundary_inf,
        boundary_zero,
    };
    // The relations must be invisible to the boundary, or the quotient
    // would not carry one.
    for s in 0..p {
        let sigma_row = model.chain_boundary_pairs(&[(s, 1), (model.sigma[s], 1)]);
        assert!(sigma_row.iter().all(|x| *x == 0), "sigma relation has boundary");
        let tau_row = model.chain_boundary_pairs(&[
            (s, 1),
            (model.tau[s], 1),
            (model.tau[model.tau[s]], 1),
        ]);
        assert!(tau_row.iter().all(|x| *x == 0), "tau relation has boundary");
    }
    Ok(model)
}

impl HomologyModel {
    pub fn space(&self) -> &CosetSpace {
        &self.space
    }

    /// Dimension of the homology relative to cusps.
    pub fn relative_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn relation_rank(&self) -> usize {
        self.relation_rank
    }

    /// Labels whose symbols form the chosen basis.
    pub fn basis_labels(&self) -> &[usize] {
        &self.basis
    }

    pub fn coset_rep(&self, s: usize) -> &Mat2 {
        &self.reps[s]
    }

    /// Number of cusp classes of the curve.
    pub fn cusp_class_count(&self) -> usize {
        self.class_count
    }

    /// One representative cusp per class.
    pub fn cusp_class_reps(&self) -> &[Cusp] {
        &self.class_reps
    }

    /// All cusp points seen as symbol endpoints, with their classes.
    pub fn cusp_points(&self) -> impl Iterator<Item = (&Cusp, usize)> {
        self.cusps.iter().zip(self.cusp_class_of_point.iter().copied())
    }

    /// Class of the symbol attached to a coset label.
    pub fn phi(&self, s: usize) -> HomologyClass {
        self.proj[s].clone()
    }

    pub fn sigma_perm(&self) -> &[usize] {
        &self.sigma
    }

    pub fn tau_perm(&self) -> &[usize] {
        &self.tau
    }

    fn chain_boundary_pairs(&self, terms: &[(usize, i64)]) -> Vec<i64> {
        let mut out = vec![0i64; self.class_count];
        for &(s, lambda) in terms {
            out[self.boundary_inf[s]] += lambda;
            out[self.boundary_zero[s]] -= lambda;
        }
        out
    }

    /// Boundary of an integer chain on labels, as a divisor on cusp
    /// classes.
    pub fn chain_boundary(&self, chain: &[i64]) -> Result<Vec<i64>, HomologyError> {
        if chain.len() != self.space.size() {
            return Err(HomologyError::BadVectorLength {
                got: chain.len(),
                want: self.space.size(),
            });
        }
        let mut out = vec![0i64; self.class_count];
        for (s, &lambda) in chain.iter().enumerate() {
            out[self.boundary_inf[s]] += lambda;
            out[self.boundary_zero[s]] -= lambda;
        }
        Ok(out)
    }

    /// Boundary of a class in basis coordinates.
    pub fn boundary(&self, class: &HomologyClass) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.class_count];
        for (coef, &b) in class.iter().zip(&self.basis) {
            if !coef.is_zero() {
                out[self.boundary_inf[b]] += coef;
                out[self.boundary_zero[b]] -= coef;
            }
        }
        out
    }

    /// Dimension of the absolute homology, the kernel of the boundary.
    pub fn absolute_dim(&self) -> usize {
        let mut rows: Vec<Vec<Rational>> = self
            .basis
            .iter()
            .map(|&b| {
                let mut row = vec![Rational::zero(); self.class_count];
                row[self.boundary_inf[b]] += Rational::one();
                row[self.boundary_zero[b]] -= Rational::one();
                row
            })
            .collect();
        let rank = rref(&mut rows).len();
        self.relative_dim() - rank
    }

    /// Cusp class containing the given cusp, if any matches.
    pub fn cusp_class_of(&self, cusp: &Cusp) -> Result<usize, HomologyError> {
        for (k, rep) in self.class_reps.iter().enumerate() {
            if cusp_equivalent(&self.space, cusp, rep)? {
                return Ok(k);
            }
        }
        unreachable!("cusp classes partition the rational projective line")
    }

    /// Labels of the PSL cosets of the convergent matrices of a digit
    /// word, for `k = 1..=n`.
    ///
    /// The raw shift orbit steps by `m(a)` of determinant -1; symbol
    /// sums must instead visit the coset of the convergent matrix with
    /// its leading column rescaled to determinant one, or the summed
    /// class would depend on the digit path chosen. The rescaling reads
    /// odd steps of the raw orbit through the star involution.
    pub fn convergent_labels(&self, digits: &[u64]) -> Vec<usize> {
        self.convergent_labels_from(digits, self.space.t0())
            .expect("base label is valid")
    }

    /// Same rescaled-convergent labels, walked from an arbitrary start.
    pub fn convergent_labels_from(
        &self,
        digits: &[u64],
        t0: usize,
    ) -> Result<Vec<usize>, HomologyError> {
        if t0 >= self.space.size() {
            return Err(HomologyError::Coset(CosetError::BadLabel(t0)));
        }
        let mut t = t0;
        Ok(digits
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                t = self.space.rmul_digit(a, t);
                if i % 2 == 0 {
                    self.space.rmul_star(t)
                } else {
                    t
                }
            })
            .collect())
    }

    /// The integer chain `-sum e_{t_0 . g_k}` underlying a symbol.
    pub fn symbol_chain(&self, digits: &[u64]) -> Vec<i64> {
        let mut chain = vec![0i64; self.space.size()];
        for t in self.convergent_labels(digits) {
            chain[t] -= 1;
        }
        chain
    }

    /// Class of the path from 0 to the value of a digit word. Unlike
    /// [`Self::modular_symbol`] this accepts any word, including ones
    /// ending in 1 and the word `[1]` whose value is 1.
    pub fn word_symbol(&self, digits: &[u64]) -> HomologyClass {
        let mut acc = vec![Rational::zero(); self.relative_dim()];
        for t in self.convergent_labels(digits) {
            for (slot, x) in acc.iter_mut().zip(&self.proj[t]) {
                *slot -= x;
            }
        }
        acc
    }

    /// Class of the path from 0 to `alpha` in the relative homology.
    pub fn modular_symbol(&self, alpha: &Rational) -> Result<HomologyClass, HomologyError> {
        if alpha.is_negative() || *alpha >= Rational::one() {
            return Err(HomologyError::AlphaOutOfRange(alpha.to_string()));
        }
        if alpha.is_zero() {
            return Ok(vec![Rational::zero(); self.relative_dim()]);
        }
        Ok(self.word_symbol(&cf_expand(alpha)?))
    }

    /// Whether an integer chain on labels is a cycle relative to cusps.
    pub fn is_cycle(&self, x: &[i64]) -> Result<bool, HomologyError> {
        Ok(self.chain_boundary(x)?.iter().all(|v| *v == 0))
    }

    /// The intersection vector `s -> lambda_s - lambda_{s.sigma}` of a
    /// cycle chain.
    pub fn delta_vector(&self, x: &[i64]) -> Result<Vec<i64>, HomologyError> {
        if !self.is_cycle(x)? {
            return Err(HomologyError::NotACycle);
        }
        Ok((0..self.space.size()).map(|s| x[s] - x[self.sigma[s]]).collect())
    }

    /// Single intersection value at one label.
    pub fn delta_x(&self, x: &[i64], s: usize) -> Result<i64, HomologyError> {
        if s >= self.space.size() {
            return Err(HomologyError::Coset(CosetError::BadLabel(s)));
        }
        if !self.is_cycle(x)? {
            return Err(HomologyError::NotACycle);
        }
        Ok(x[s] - x[self.sigma[s]])
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "size": self.space.size(),
            "relation_rank": self.relation_rank,
            "relative_dim": self.relative_dim(),
            "absolute_dim": self.absolute_dim(),
            "basis_labels": self.basis,
            "cusp_classes": self.class_reps.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        })
    }
}
