//! Quantum Karhunen-Loeve expansions for open quantum harmonic oscillators.
//!
//! The crate is organised bottom-up:
//!
//! - [`numlin`]: matrix exponential, Lyapunov solver, Hermitian
//!   eigendecomposition, Williamson symplectic diagonalization.
//! - [`quadrature`] and [`sinbasis`]: composite Gauss-Legendre rules and the
//!   sinusoidal eigenbasis of the Wiener covariance `min(s, t)`.
//! - [`oqho`]: model construction, physical realizability, invariant
//!   covariance `V = Σ + iΘ` and the two-point kernel `K(τ)`.
//! - [`response`]: the sinusoidal response of the system variables to the
//!   expanded quantum Wiener process.
//! - [`kernel_eig`]: Nyström eigendecomposition of the kernel `K(s − t)`.
//! - [`qef`]: the quadratic-exponential functional through Williamson's
//!   diagonalization and a closed-form determinant.
//! - [`fock_oracle`]: brute-force evaluation of the same functional on a
//!   truncated Fock space.

pub mod error;
pub mod fock_oracle;
pub mod kernel_eig;
pub mod numlin;
pub mod oqho;
pub mod qef;
pub mod quadrature;
pub mod response;
pub mod sinbasis;

pub use error::{Error, ErrorCategory, Result};
pub use fock_oracle::{oracle_qef, oracle_qef_h, OracleResult};
pub use kernel_eig::{nystrom_eig, KernelEigDecomposition};
pub use numlin::{williamson, ComplexMatrix, RealMatrix, WilliamsonFactorization};
pub use oqho::{steady_covariance, CovarianceKernel, OqhoModel};
pub use qef::{qef_pipeline, qef_value, ModeCount, QefProblem};
pub use quadrature::Quadrature;
pub use response::{BilinearForms, GeneratorMap, SinusoidalResponse};
pub use sinbasis::SinBasis;
