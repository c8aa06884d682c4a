//! Exact symbolic engine for Batalin–Vilkovisky (BV) algebras on polynomial
//! models.
//!
//! The crate solves the quantum master equation of a BV quantum field theory
//! order by order in the coupling constants and computes everything that
//! follows from the solution: the structure constants `m_n` of the quantum
//! algebra, the gauge witnesses `Λ_n`, the quantum corrections `Θ_n`, the
//! generating series `Ω_n`, all n-point correlation functions, the quantum
//! coordinates `T^γ`, and the obstruction (anomaly) tower that decides which
//! cohomology classes extend to quantum observables.
//!
//! # Layout
//!
//! * [`scalar`] — exact rational and `ħ`-polynomial scalars.
//! * [`algebra`] — the free graded-commutative algebra on a table of even and
//!   odd variables, the second-order BV operator `Δ`, the BV bracket `(·,·)`,
//!   and the differentials `Q = (S,·)` and `K = Q − ħΔ`.
//! * [`linalg`]  — dense and sparse exact linear algebra over `ℚ`.
//! * [`groebner`] — Gröbner bases with cofactor tracking, normal forms,
//!   staircase (standard-monomial) enumeration, and graded slices.
//! * [`model`]   — the two shipped model classes (isolated singularity and
//!   gauged linear-symmetry models), their validation, the cohomology basis,
//!   and the fundamental `decompose` routine `M = Σ m^γ O_γ + QΛ`.
//! * [`tseries`] — formal power series in the couplings `t^α` with
//!   `ħ`-polynomial algebra elements as coefficients.
//! * [`solver`]  — the order-by-order master-equation solver.
//! * [`correlators`] — generating series `Ω`, the operator tensors `p_n`,
//!   correlation functions, quantum coordinates, and the partition-formula
//!   cross-check.
//! * [`tower`]   — finite-dimensional obstruction towers: cohomology
//!   splittings, the `κ`/`f` recursion, classification of observables, and
//!   gauge-equivalence checks.
//!
//! All arithmetic is exact (arbitrary-precision rationals); there are no
//! floating-point tolerances anywhere. The crate is `no_std` (it requires
//! `alloc`) so the engine can be embedded; IO, file formats and the command
//! line live in the companion crate `bvmaster`.

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod algebra;
pub mod correlators;
pub mod groebner;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod tower;
pub mod tseries;
