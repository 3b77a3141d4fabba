//! Solver and verifier for Ambrosetti–Prodi-type semilinear problems
//! F(u) = −Lu − f(u) = g with Dirichlet conditions, where L is a uniformly
//! elliptic operator in non-divergence form (generally non-self-adjoint).
//!
//! The pipeline: discretize L with a monotone stencil, compute the principal
//! eigentriple (λ₁, φ₁, φ₁*), split Y = Z ⊕ ℝφ₁ along φ₁*, invert slanted
//! lines z + tφ₁ through constrained Newton solves (the fibers), and read the
//! exact 2/1/0 solution count off the unimodal height function on each fiber.
//!
//! All numerics are generic over the scalar type; see the aliases below for
//! the concrete `f64`/`f32` instantiations.

pub mod error;
pub mod fiber;
pub mod fold;
pub mod grid;
pub mod linalg;
pub mod nonlinearity;
pub mod operator;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` instantiations of the core types.
pub type Domain64 = grid::Domain<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type CoefficientField64 = operator::CoefficientField<f64>;
pub type DiscreteOperator64 = operator::DiscreteOperator<f64>;
pub type SparseMatrix64 = linalg::SparseMatrix<f64>;
pub type Eigenpair64 = spectral::Eigenpair<f64>;
pub type Nonlinearity64 = nonlinearity::Nonlinearity<f64>;
pub type FiberPoint64 = fiber::FiberPoint<f64>;
pub type FoldReport64 = fold::FoldReport<f64>;
pub type SolutionSet64 = fold::SolutionSet<f64>;

/// Concrete `f32` instantiations.
pub type Domain32 = grid::Domain<f32>;
pub type Grid32 = grid::Grid<f32>;
pub type GridFunction32 = grid::GridFunction<f32>;
pub type Nonlinearity32 = nonlinearity::Nonlinearity<f32>;
