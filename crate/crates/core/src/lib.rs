//! Continued-fraction dynamics on finite coset spaces.
//!
//! The library computes the quantitative invariants attached to the
//! Gauss shift acting on `(0,1) x P`, where `P` is a finite coset space
//! for a subgroup of the extended modular group:
//!
//! * exact continued-fraction expansions of rationals and quadratic
//!   irrationals, convergent matrices, and Lyapunov estimates ([`arith`]);
//! * the coset spaces themselves, with the digit action and its
//!   combinatorics ([`cosets`]);
//! * relative and absolute modular-symbol homology with boundary maps,
//!   cusp classes, and intersection vectors ([`homology`]);
//! * orbit statistics: limiting modular symbols, Birkhoff averages,
//!   and Levy-type series ([`dynamics`]);
//! * transfer operators on spectral grids, Hausdorff dimensions of
//!   restricted-digit sets, and Lyapunov exponents from spectral data
//!   ([`transfer`]);
//! * Fredholm determinants and Selberg-type zeta functions from
//!   periodic-orbit traces ([`zeta`]);
//! * K-theoretic invariants of the boundary action: Markov matrices,
//!   K-groups, coinvariants, and the canonical trace ([`ktheory`]).

pub mod arith;
pub mod cosets;
pub mod dynamics;
pub mod homology;
pub mod ktheory;
pub mod transfer;
pub mod zeta;
