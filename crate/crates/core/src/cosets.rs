//! Finite coset spaces for subgroups of the extended modular group,
//! with the matrix action used by the continued-fraction shift.
//!
//! Labels enumerate the coset space `P`. For `gamma0(N)` the labels are
//! the points of the projective line over `Z/N`, listed canonically,
//! and the identity coset is `(0:1)`. The stored permutations give the
//! left action `act(g, t) = t . g^{-1}` of the generators
//! `S' = [[0,1],[1,0]]` and `T = [[1,1],[0,1]]`; arbitrary matrices act
//! either through the projective-row formula (built-in spaces) or by
//! factoring into generator words (explicit tables). Right
//! multiplication is the inverse action, so both directions share one
//! code path via the adjugate.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::arith::Mat2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CosetError {
    #[error("invalid explicit table: {0}")]
    InvalidTable(String),
    #[error("matrix has determinant {0}, the coset action needs |det| = 1")]
    NotUnimodular(BigInt),
    #[error("coset label {0} out of range")]
    BadLabel(usize),
    #[error("translation-action period does not fit in 64 bits")]
    PeriodOverflow,
    #[error("space is not transitive under the determinant-one generators")]
    NotPslTransitive,
}

/// Whether the space is viewed as cosets in PGL(2,Z) or PSL(2,Z).
///
/// For the built-in spaces the label set and the action tables agree
/// under both conventions; the flag records which quotient downstream
/// computations should assume. Homology requires `Psl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convention {
    Pgl,
    Psl,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubgroupSpec {
    /// The full group; a single coset.
    Full,
    /// Hecke congruence subgroup of level `N`.
    Gamma0(u32),
    /// User-supplied action table for the generators `S'` and `T`.
    Explicit {
        labels: Vec<String>,
        perm_s: Vec<usize>,
        perm_t: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
enum Kind {
    Projective {
        n: u32,
        points: Vec<(u32, u32)>,
        index: BTreeMap<(u32, u32), usize>,
        units: Vec<u32>,
    },
    Explicit,
}

/// Generator word over `S'` and powers of `T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    S,
    T(BigInt),
}

#[derive(Debug, Clone)]
pub struct CosetSpace {
    convention: Convention,
    kind: Kind,
    labels: Vec<String>,
    perm_s: Vec<usize>,
    perm_t: Vec<usize>,
    // Right multiplication by sigma = [[0,-1],[1,0]], precomposed from
    // the generator permutations.
    perm_sig: Vec<usize>,
    // Cycle decomposition of perm_t: point -> (cycle id, offset), so
    // arbitrary powers of T act in O(1) per point.
    t_cycles: Vec<Vec<usize>>,
    t_pos: Vec<(usize, usize)>,
    rho: u64,
}

fn check_permutation(perm: &[usize], p: usize, name: &str) -> Result<(), CosetError> {
    if perm.len() != p {
        return Err(CosetError::InvalidTable(format!(
            "{name} has length {}, expected {p}",
            perm.len()
        )));
    }
    let mut seen = vec![false; p];
    for &v in perm {
        if v >= p || seen[v] {
            return Err(CosetError::InvalidTable(format!(
                "{name} is not a bijection"
            )));
        }
        seen[v] = true;
    }
    Ok(())
}

// Cycles of the permutation, each label's (cycle, offset) position, and
// the permutation's order when it fits in a u64.
type CycleStructure = (Vec<Vec<usize>>, Vec<(usize, usize)>, Option<u64>);

fn cycle_structure(perm: &[usize]) -> CycleStructure {
    let p = perm.len();
    let mut cycles = Vec::new();
    let mut pos = vec![(usize::MAX, 0); p];
    let mut order: Option<u64> = Some(1);
    let mut visited = vec![false; p];
    for start in 0..p {
        if visited[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut t = start;
        while !visited[t] {
            visited[t] = true;
            pos[t] = (cycles.len(), cycle.len());
            cycle.push(t);
            t = perm[t];
        }
        let len = cycle.len() as u64;
        order = order.and_then(|o| {
            let g = o.gcd(&len);
            (o / g).checked_mul(len)
        });
        cycles.push(cycle);
    }
    (cycles, pos, order)
}

/// Builds the coset space for a subgroup specification.
pub fn build_cosets(
    spec: &SubgroupSpec,
    convention: Convention,
) -> Result<CosetSpace, CosetError> {
    match spec {
        SubgroupSpec::Full => projective_space(1, convention),
        SubgroupSpec::Gamma0(n) => {
            if *n == 0 {
                return Err(CosetError::InvalidTable(
                    "gamma0 level must be positive".into(),
                ));
            }
            projective_space(*n, convention)
        }
        SubgroupSpec::Explicit { labels, perm_s, perm_t } => {
            let p = labels.len();
            if p == 0 {
                return Err(CosetError::InvalidTable("empty label set".into()));
            }
            check_permutation(perm_s, p, "perm_s")?;
            check_permutation(perm_t, p, "perm_t")?;
            for t in 0..p {
                if perm_s[perm_s[t]] != t {
                    return Err(CosetError::InvalidTable(
                        "perm_s must be an involution (S' squares to the identity)".into(),
                    ));
                }
            }
            let space = CosetSpace::assemble(
                Kind::Explicit,
                labels.clone(),
                perm_s.clone(),
                perm_t.clone(),
                convention,
            )?;
            if !space.group_transitive() {
                return Err(CosetError::InvalidTable(
                    "generator action is not transitive".into(),
                ));
            }
            Ok(space)
        }
    }
}

fn projective_space(n: u32, convention: Convention) -> Result<CosetSpace, CosetError> {
    let units: Vec<u32> = (1..=n).filter(|u| u.gcd(&n) == 1).collect();
    let canon = |c: u32, d: u32| -> (u32, u32) {
        let mut best = (u32::MAX, u32::MAX);
        for &u in &units {
            let cand = (
                (u as u64 * c as u64 % n as u64) as u32,
                (u as u64 * d as u64 % n as u64) as u32,
            );
            if cand < best {
                best = cand;
            }
        }
        best
    };
    let mildly_coprime = |c: u32, d: u32| c.gcd(&d).gcd(&n) == 1 || n == 1;
    let mut set = std::collections::BTreeSet::new();
    for c in 0..n {
        for d in 0..n {
            if mildly_coprime(c, d) {
                set.insert(canon(c, d));
            }
        }
    }
    if n == 1 {
        set.insert((0, 0));
    }
    let points: Vec<(u32, u32)> = set.into_iter().collect();
    let index: BTreeMap<(u32, u32), usize> =
        points.iter().enumerate().map(|(i, &pt)| (pt, i)).collect();
    let labels: Vec<String> = if n == 1 {
        vec!["(0:1)".to_string()]
    } else {
        points.iter().map(|&(c, d)| format!("({c}:{d})")).collect()
    };
    // act(S', (c:d)) = (c:d) . S' = (d:c); act(T, (c:d)) = (c:d) . T^{-1} = (c : d-c).
    let perm_s: Vec<usize> = points.iter().map(|&(c, d)| index[&canon(d, c)]).collect();
    let perm_t: Vec<usize> = points
        .iter()
        .map(|&(c, d)| index[&canon(c, (d + n - c) % n)])
        .collect();
    let kind = Kind::Projective { n, points, index, units };
    CosetSpace::assemble(kind, labels, perm_s, perm_t, convention)
}

impl CosetSpace {
    fn assemble(
        kind: Kind,
        labels: Vec<String>,
        perm_s: Vec<usize>,
        perm_t: Vec<usize>,
        convention: Convention,
    ) -> Result<Self, CosetError> {
        let (t_cycles, t_pos, order) = cycle_structure(&perm_t);
        let rho = order.ok_or(CosetError::PeriodOverflow)?;
        let p = labels.len();
        let mut inv_t = vec![0usize; p];
        for (i, &v) in perm_t.iter().enumerate() {
            inv_t[v] = i;
        }
        // sigma = T^{-1} S' T S' T^{-1}, so t.sigma composes the stored
        // permutations; perm_t is t.T^{-1} and inv_t is t.T.
        let perm_sig: Vec<usize> = (0..p)
            .map(|t| perm_t[perm_s[inv_t[perm_s[perm_t[t]]]]])
            .collect();
        Ok(CosetSpace {
            convention,
            kind,
            labels,
            perm_s,
            perm_t,
            perm_sig,
            t_cycles,
            t_pos,
            rho,
        })
    }

    #[cfg(test)]
    pub(crate) fn raw_explicit(
        labels: Vec<String>,
        perm_s: Vec<usize>,
        perm_t: Vec<usize>,
    ) -> Self {
        CosetSpace::assemble(Kind::Explicit, labels, perm_s, perm_t, Convention::Pgl)
            .expect("raw table")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn t0(&self) -> usize {
        match &self.kind {
            Kind::Projective { n, index, .. } => {
                if *n == 1 {
                    0
                } else {
                    index[&(0, 1)]
                }
            }
            Kind::Explicit => 0,
        }
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, t: usize) -> &str {
        &self.labels[t]
    }

    /// Smallest period of `a -> act(m(a), .)`: the order of the
    /// `T`-permutation, since `m(a) = S' T^a`.
    pub fn action_period(&self) -> u64 {
        self.rho
    }

    fn check_label(&self, t: usize) -> Result<(), CosetError> {
        if t < self.size() {
            Ok(())
        } else {
            Err(CosetError::BadLabel(t))
        }
    }

    fn t_walk(&self, t: usize, forward: u64) -> usize {
        let (cyc, pos) = self.t_pos[t];
        let cycle = &self.t_cycles[cyc];
        let len = cycle.len() as u64;
        cycle[((pos as u64 + forward % len) % len) as usize]
    }

    fn t_walk_back(&self, t: usize, back: u64) -> usize {
        let (cyc, pos) = self.t_pos[t];
        let cycle = &self.t_cycles[cyc];
        let len = cycle.len() as u64;
        cycle[((pos as u64 + len - back % len) % len) as usize]
    }

    /// `act(m(a), t)` for a digit `a >= 1`, in O(1).
    pub fn act_digit(&self, a: u64, t: usize) -> usize {
        self.perm_s[self.t_walk(t, a)]
    }

    /// `t . m(a)`, the coset step the shift orbit takes, in O(1).
    pub fn rmul_digit(&self, a: u64, t: usize) -> usize {
        self.t_walk_back(self.perm_s[t], a)
    }

    /// `t . sigma` for `sigma = [[0,-1],[1,0]]`, in O(1).
    pub fn rmul_sigma(&self, t: usize) -> usize {
        self.perm_sig[t]
    }

    /// `t . [[-1,0],[0,1]]`, in O(1). An involution.
    ///
    /// `m(a)` has determinant -1, so after an odd number of shift steps
    /// the raw orbit label names a coset of determinant-minus-one
    /// matrices. Rescaling the leading convergent column to recover a
    /// determinant-one matrix multiplies the label by this sign matrix;
    /// homology-valued sums read odd orbit steps through this map so
    /// every visited label is the PSL-coset of the rescaled convergent.
    pub fn rmul_star(&self, t: usize) -> usize {
        self.perm_s[self.perm_sig[t]]
    }

    /// Left action `act(g, t) = t . g^{-1}` of a unimodular matrix.
    pub fn act(&self, g: &Mat2, t: usize) -> Result<usize, CosetError> {
        self.check_label(t)?;
        if !g.is_unimodular() {
            return Err(CosetError::NotUnimodular(g.det()));
        }
        match &self.kind {
            Kind::Projective { .. } => Ok(self.act_row(g, t)),
            Kind::Explicit => Ok(self.act_word(&factor(g), t)),
        }
    }

    /// Right multiplication `t . g`, the direction coset orbits move.
    pub fn right_mul(&self, g: &Mat2, t: usize) -> Result<usize, CosetError> {
        self.check_label(t)?;
        if !g.is_unimodular() {
            return Err(CosetError::NotUnimodular(g.det()));
        }
        let adj = g.adjugate();
        match &self.kind {
            Kind::Projective { .. } => Ok(self.act_row(&adj, t)),
            Kind::Explicit => Ok(self.act_word(&factor(&adj), t)),
        }
    }

    // Row model: t . g^{-1} is the bottom-row class of (c, d) . adj(g),
    // which equals the inverse up to a scalar that projectively cancels.
    fn act_row(&self, g: &Mat2, t: usize) -> usize {
        let Kind::Projective { n, points, index, units } = &self.kind else {
            unreachable!("row action on explicit table")
        };
        let (c, d) = points[t];
        let nn = BigInt::from(*n);
        let cb = BigInt::from(c);
        let db = BigInt::from(d);
        // (c, d) . adj(g) with adj(g) = [[D, -B], [-C, A]].
        let c2 = (&cb * &g.d - &db * &g.c).mod_floor(&nn);
        let d2 = (-&cb * &g.b + &db * &g.a).mod_floor(&nn);
        let c2 = c2.to_u32().expect("reduced mod n");
        let d2 = d2.to_u32().expect("reduced mod n");
        let mut best = (u32::MAX, u32::MAX);
        for &u in units {
            let cand = (
                (u as u64 * c2 as u64 % *n as u64) as u32,
                (u as u64 * d2 as u64 % *n as u64) as u32,
            );
            if cand < best {
                best = cand;
            }
        }
        index[&best]
    }

    fn act_word(&self, word: &[Step], t: usize) -> usize {
        let mut t = t;
        for step in word.iter().rev() {
            t = match step {
                Step::S => self.perm_s[t],
                Step::T(n) => {
                    let (cyc, pos) = self.t_pos[t];
                    let len = self.t_cycles[cyc].len() as u64;
                    let off = n
                        .mod_floor(&BigInt::from(len))
                        .to_u64()
                        .expect("reduced offset");
                    self.t_cycles[cyc][((pos as u64 + off) % len) as usize]
                }
            };
        }
        t
    }

    /// Group membership: `g` lies in the subgroup iff it fixes the
    /// identity coset by right multiplication.
    pub fn is_member(&self, g: &Mat2) -> Result<bool, CosetError> {
        Ok(self.right_mul(g, self.t0())? == self.t0())
    }

    /// Transitivity of the inverse-branch semigroup generated by the
    /// digit matrices `m(a)`. One period of `a` exhausts the distinct
    /// permutations; each start label is checked separately.
    pub fn red_transitive(&self) -> bool {
        let p = self.size();
        let gens: Vec<Vec<usize>> = (1..=self.rho)
            .map(|a| (0..p).map(|t| self.act_digit(a, t)).collect())
            .collect();
        for start in 0..p {
            let mut seen = vec![false; p];
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            let mut count = 1;
            while let Some(t) = queue.pop_front() {
                for g in &gens {
                    let u = g[t];
                    if !seen[u] {
                        seen[u] = true;
                        count += 1;
                        queue.push_back(u);
                    }
                }
            }
            if count < p {
                return false;
            }
        }
        true
    }

    fn group_transitive(&self) -> bool {
        let p = self.size();
        let mut seen = vec![false; p];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(t) = queue.pop_front() {
            for u in [self.perm_s[t], self.perm_t[t]] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == p
    }

    /// Determinant-one coset representatives found breadth-first, so
    /// `t0 . rep(t) = t` with small entries.
    pub fn coset_reps(&self) -> Result<Vec<Mat2>, CosetError> {
        let s = Mat2::new(0, -1, 1, 0);
        let t_mat = Mat2::new(1, 1, 0, 1);
        let t_inv = Mat2::new(1, -1, 0, 1);
        let mut reps: Vec<Option<Mat2>> = vec![None; self.size()];
        let t0 = self.t0();
        reps[t0] = Some(Mat2::identity());
        let mut queue = VecDeque::from([t0]);
        while let Some(t) = queue.pop_front() {
            let base = reps[t].clone().expect("visited");
            for gen in [&s, &t_mat, &t_inv] {
                let u = self.right_mul(gen, t)?;
                if reps[u].is_none() {
                    reps[u] = Some(&base * gen);
                    queue.push_back(u);
                }
            }
        }
        reps.into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or(CosetError::NotPslTransitive)
    }

    /// Action tables as JSON for golden-file comparisons.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "size": self.size(),
            "labels": self.labels,
            "t0": self.t0(),
            "perm_s": self.perm_s,
            "perm_t": self.perm_t,
            "action_period": self.rho,
            "convention": self.convention,
        })
    }
}

/// Factors a unimodular matrix into a word over `S'` and powers of `T`
/// whose product reproduces the matrix exactly.
pub fn factor(g: &Mat2) -> Vec<Step> {
    debug_assert!(g.is_unimodular());
    let mut h = g.clone();
    let mut word: Vec<Step> = Vec::new();
    // Row-reduce with h <- S' T^{-q} h; the word collects the inverses.
    while !h.c.is_zero() {
        let q = h.a.div_floor(&h.c);
        if !q.is_zero() {
            h.a -= &q * &h.c;
            h.b -= &q * &h.d;
            word.push(Step::T(q));
        }
        std::mem::swap(&mut h.a, &mut h.c);
        std::mem::swap(&mut h.b, &mut h.d);
        word.push(Step::S);
    }
    // h = [[e1, m], [0, e2]] with e1, e2 = +-1. The sign corrections
    // J = [[-1,0],[0,1]] and K = [[1,0],[0,-1]] come from
    // S = T^{-1} S' T S' T^{-1}, J = S S', K = S' S.
    let one = BigInt::from(1);
    let s_word = |word: &mut Vec<Step>| {
        word.extend([
            Step::T(-&one),
            Step::S,
            Step::T(one.clone()),
            Step::S,
            Step::T(-&one),
        ]);
    };
    let e1_neg = h.a.is_negative();
    let e2_neg = h.d.is_negative();
    if e1_neg {
        s_word(&mut word);
        word.push(Step::S);
    }
    if e2_neg {
        word.push(Step::S);
        s_word(&mut word);
    }
    let m = if e1_neg { -h.b.clone() } else { h.b.clone() };
    if !m.is_zero() {
        word.push(Step::T(m));
    }
    word
}

/// Rebuilds the matrix from a generator word; inverse of `factor`.
pub fn word_product(word: &[Step]) -> Mat2 {
    let s = Mat2::new(0, 1, 1, 0);
    let mut acc = Mat2::identity();
    for step in word {
        match step {
            Step::S => acc = &acc * &s,
            Step::T(n) => {
                // T^n adds n times column 1 to column 2.
                acc.b += n * &acc.a;
                acc.d += n * &acc.c;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gamma0(n: u32) -> CosetSpace {
        build_cosets(&SubgroupSpec::Gamma0(n), Convention::Psl).unwrap()
    }

    #[test]
    fn sizes_match_index_formula() {
        assert_eq!(build_cosets(&SubgroupSpec::Full, Convention::Pgl).unwrap().size(), 1);
        assert_eq!(gamma0(1).size(), 1);
        assert_eq!(gamma0(2).size(), 3);
        assert_eq!(gamma0(11).size(), 12);
        assert_eq!(gamma0(12).size(), 24);
    }

    #[test]
    fn gamma0_2_labels_are_canonical() {
        let space = gamma0(2);
        assert_eq!(space.labels(), &["(0:1)", "(1:0)", "(1:1)"]);
        assert_eq!(space.t0(), 0);
    }

    #[test]
    fn digit_one_action_on_gamma0_2_is_a_three_cycle() {
        let space = gamma0(2);
        let perm: Vec<usize> = (0..3).map(|t| space.act_digit(1, t)).collect();
        assert_eq!(perm, vec![1, 2, 0]);
        let via_matrix: Vec<usize> =
            (0..3).map(|t| space.act(&Mat2::digit(1), t).unwrap()).collect();
        assert_eq!(via_matrix, perm);
    }

    #[test]
    fn identity_and_full_group_act_trivially() {
        let space = gamma0(11);
        for t in 0..space.size() {
            assert_eq!(space.act(&Mat2::identity(), t).unwrap(), t);
        }
        let full = build_cosets(&SubgroupSpec::Full, Convention::Pgl).unwrap();
        let g = Mat2::word(&[3, 1, 4]).unwrap();
        assert_eq!(full.act(&g, 0).unwrap(), 0);
    }

    #[test]
    fn action_periods() {
        assert_eq!(build_cosets(&SubgroupSpec::Full, Convention::Pgl).unwrap().action_period(), 1);
        assert_eq!(gamma0(2).action_period(), 2);
        assert_eq!(gamma0(11).action_period(), 11);
        // Periodicity is exact: digit a and a + rho act identically,
        // and no smaller shift does for a = 1.
        let space = gamma0(11);
        for a in 1..=11u64 {
            for t in 0..space.size() {
                assert_eq!(space.act_digit(a, t), space.act_digit(a + 11, t));
            }
        }
        let m1: Vec<usize> = (0..12).map(|t| space.act_digit(1, t)).collect();
        for shift in 1..11u64 {
            let shifted: Vec<usize> =
                (0..12).map(|t| space.act_digit(1 + shift, t)).collect();
            assert_ne!(m1, shifted, "period smaller than 11 at shift {shift}");
        }
    }

    #[test]
    fn red_transitivity_on_congruence_spaces() {
        for n in [2u32, 3, 5, 7, 11, 14] {
            assert!(gamma0(n).red_transitive(), "gamma0({n})");
        }
        assert!(build_cosets(&SubgroupSpec::Full, Convention::Pgl).unwrap().red_transitive());
    }

    #[test]
    fn two_block_table_fails_red_transitivity() {
        // Both generators act trivially: every label is its own block.
        let space = CosetSpace::raw_explicit(
            vec!["a".into(), "b".into()],
            vec![0, 1],
            vec![0, 1],
        );
        assert!(!space.red_transitive());
        // And the same table is rejected by the validating builder.
        let err = build_cosets(
            &SubgroupSpec::Explicit {
                labels: vec!["a".into(), "b".into()],
                perm_s: vec![0, 1],
                perm_t: vec![0, 1],
            },
            Convention::Pgl,
        )
        .unwrap_err();
        assert!(matches!(err, CosetError::InvalidTable(_)));
    }

    #[test]
    fn explicit_table_validation() {
        let bad_bijection = build_cosets(
            &SubgroupSpec::Explicit {
                labels: vec!["a".into(), "b".into()],
                perm_s: vec![0, 0],
                perm_t: vec![1, 0],
            },
            Convention::Pgl,
        );
        assert!(matches!(bad_bijection, Err(CosetError::InvalidTable(_))));
        let bad_involution = build_cosets(
            &SubgroupSpec::Explicit {
                labels: vec!["a".into(), "b".into(), "c".into()],
                perm_s: vec![1, 2, 0],
                perm_t: vec![0, 1, 2],
            },
            Convention::Pgl,
        );
        assert!(matches!(bad_involution, Err(CosetError::InvalidTable(_))));
    }

    #[test]
    fn membership_in_gamma0_2() {
        let space = gamma0(2);
        assert!(space.is_member(&Mat2::new(1, 1, 0, 1)).unwrap());
        assert!(space.is_member(&Mat2::new(1, 0, 2, 1)).unwrap());
        assert!(!space.is_member(&Mat2::new(0, -1, 1, 0)).unwrap());
        assert!(!space.is_member(&Mat2::digit(1)).unwrap());
    }

    #[test]
    fn congruent_matrices_act_identically() {
        let space = gamma0(11);
        let g = Mat2::word(&[2, 5, 1]).unwrap();
        // Multiply by elements of the principal congruence subgroup.
        let gamma_upper = Mat2::new(1, 11, 0, 1);
        let gamma_lower = Mat2::new(1, 0, 11, 1);
        let g2 = &(&g * &gamma_upper) * &gamma_lower;
        for t in 0..space.size() {
            assert_eq!(space.act(&g, t).unwrap(), space.act(&g2, t).unwrap());
        }
    }

    #[test]
    fn coset_reps_hit_every_label() {
        for n in [2u32, 11] {
            let space = gamma0(n);
            let reps = space.coset_reps().unwrap();
            for (t, rep) in reps.iter().enumerate() {
                assert_eq!(rep.det(), BigInt::from(1));
                assert_eq!(space.right_mul(rep, space.t0()).unwrap(), t);
            }
        }
    }

    #[test]
    fn explicit_table_reproduces_projective_action() {
        // Export gamma0(11)'s tables into an explicit space; arbitrary
        // matrices must then act identically through word factoring.
        let proj = gamma0(11);
        let p = proj.size();
        let spec = SubgroupSpec::Explicit {
            labels: proj.labels().to_vec(),
            perm_s: (0..p).map(|t| proj.act(&Mat2::new(0, 1, 1, 0), t).unwrap()).collect(),
            perm_t: (0..p).map(|t| proj.act(&Mat2::new(1, 1, 0, 1), t).unwrap()).collect(),
        };
        let expl = build_cosets(&spec, Convention::Psl).unwrap();
        for digits in [[1u64, 2, 3].as_slice(), &[7, 1], &[4, 4, 4, 4], &[12, 30]] {
            let g = Mat2::word(digits).unwrap();
            for t in 0..p {
                assert_eq!(
                    proj.act(&g, t).unwrap(),
                    expl.act(&g, t).unwrap(),
                    "digits {digits:?} at {t}"
                );
                assert_eq!(
                    proj.right_mul(&g, t).unwrap(),
                    expl.right_mul(&g, t).unwrap()
                );
            }
        }
    }

    #[test]
    fn json_dump_is_stable() {
        let space = gamma0(2);
        let a = serde_json::to_string(&space.to_json()).unwrap();
        let b = serde_json::to_string(&space.to_json()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("(1:0)"));
        assert!(a.contains("action_period"));
    }

    fn word_strategy() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(1u64..30, 1..8)
    }

    proptest! {
        #[test]
        fn factoring_round_trips(digits in word_strategy(), negate in any::<bool>()) {
            let g = Mat2::word(&digits).unwrap();
            let g = if negate { g.neg() } else { g };
            let word = factor(&g);
            prop_assert_eq!(word_product(&word), g);
        }

        #[test]
        fn action_satisfies_group_law(
            d1 in word_strategy(), d2 in word_strategy(), t in 0usize..12
        ) {
            let space = gamma0(11);
            let g = Mat2::word(&d1).unwrap();
            let h = Mat2::word(&d2).unwrap();
            let gh = &g * &h;
            prop_assert_eq!(
                space.act(&gh, t).unwrap(),
                space.act(&g, space.act(&h, t).unwrap()).unwrap()
            );
            prop_assert_eq!(
                space.right_mul(&gh, t).unwrap(),
                space.right_mul(&h, space.right_mul(&g, t).unwrap()).unwrap()
            );
        }

        #[test]
        fn digit_actions_match_matrix_actions(a in 1u64..200, t in 0usize..12) {
            let space = gamma0(11);
            let m = Mat2::digit(a);
            prop_assert_eq!(space.act_digit(a, t), space.act(&m, t).unwrap());
            prop_assert_eq!(space.rmul_digit(a, t), space.right_mul(&m, t).unwrap());
        }

    }

    #[test]
    fn sigma_and_star_match_matrix_actions() {
        let sigma = Mat2::new(0, -1, 1, 0);
        let star = Mat2::new(-1, 0, 0, 1);
        let full = build_cosets(&SubgroupSpec::Full, Convention::Pgl).unwrap();
        for space in [gamma0(11), gamma0(14), gamma0(2), full] {
            for t in 0..space.size() {
                assert_eq!(space.rmul_sigma(t), space.right_mul(&sigma, t).unwrap());
                assert_eq!(space.rmul_star(t), space.right_mul(&star, t).unwrap());
                assert_eq!(space.rmul_star(space.rmul_star(t)), t);
            }
        }
    }
}
