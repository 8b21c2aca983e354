//! Open quantum harmonic oscillator models `dX = AX dt + B dW` and their
//! invariant Gaussian covariance kernel.

use crate::error::{Error, Result};
use crate::numlin::{
    antisymmetry_residual, check_hurwitz, compose, ensure_square, expm, field_j, imag_part, jbar,
    lyap, lyap_complex, sym_eig, symmetry_residual, ComplexMatrix, RealMatrix,
};
use crate::sinbasis::ito_matrix;

/// Absolute tolerance on the physical-realizability residual, scaled by the
/// magnitude of the terms in `AΘ + ΘAᵀ + BJBᵀ` when those exceed one.
pub const PR_TOL: f64 = 1e-12;

/// Relative threshold on the smallest singular value of Θ.
pub const THETA_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OqhoModel {
    theta: RealMatrix,
    energy: Option<RealMatrix>,
    coupling: Option<RealMatrix>,
    a: RealMatrix,
    b: RealMatrix,
    j: RealMatrix,
}

fn check_theta(theta: &RealMatrix) -> Result<usize> {
    let n = ensure_square(theta)?;
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddDimension {
            what: "system dimension n",
            value: n,
        });
    }
    let residual = antisymmetry_residual(theta);
    if residual > 1e-12 * theta.norm().max(1.0) {
        return Err(Error::NotAntisymmetric {
            what: "CCR matrix",
            residual,
        });
    }
    let sv = theta.clone().singular_values();
    let min_singular = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min_singular <= THETA_SINGULAR_TOL * theta.norm() {
        return Err(Error::SingularTheta { min_singular });
    }
    Ok(n)
}

impl OqhoModel {
    /// `A = 2Θ(R + MᵀJM)`, `B = 2ΘMᵀ` from the energy matrix `R` and coupling matrix `M`.
    pub fn from_hamiltonian(
        theta: RealMatrix,
        energy: RealMatrix,
        coupling: RealMatrix,
    ) -> Result<Self> {
        let n = check_theta(&theta)?;
        if energy.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "energy matrix is {}x{}, expected {n}x{n}",
                energy.nrows(),
                energy.ncols()
            )));
        }
        let residual = symmetry_residual(&energy);
        if residual > 1e-12 * energy.norm().max(1.0) {
            return Err(Error::NotSymmetric {
                what: "energy matrix",
                residual,
            });
        }
        let m = coupling.nrows();
        if coupling.ncols() != n {
            return Err(Error::Dimension(format!(
                "coupling matrix has {} columns, expected {n}",
                coupling.ncols()
            )));
        }
        let j = field_j(m)?;
        let a = &theta * (&energy + coupling.transpose() * &j * &coupling) * 2.0;
        let b = &theta * coupling.transpose() * 2.0;
        let model = Self {
            theta,
            energy: Some(energy),
            coupling: Some(coupling),
            a,
            b,
            j,
        };
        model.check_pr()?;
        Ok(model)
    }

    /// Model given directly by its drift and dispersion matrices; the pair
    /// must satisfy the physical realizability condition with `theta`.
    pub fn from_drift(a: RealMatrix, b: RealMatrix, theta: RealMatrix) -> Result<Self> {
        let n = check_theta(&theta)?;
        if a.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "drift matrix is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!(
                "dispersion matrix has {} rows, expected {n}",
                b.nrows()
            )));
        }
        let j = field_j(b.ncols())?;
        let model = Self {
            theta,
            energy: None,
            coupling: None,
            a,
            b,
            j,
        };
        model.check_pr()?;
        Ok(model)
    }

    /// One oscillator mode, `Θ = jbar`, `R = 0`, `M = I₂`: `A = −2I₂`, `B = 2jbar`, `Σ = I₂`.
    pub fn canonical() -> Self {
        Self::from_hamiltonian(jbar(), RealMatrix::zeros(2, 2), RealMatrix::identity(2, 2))
            .expect("canonical model is physically realizable")
    }

    fn check_pr(&self) -> Result<()> {
        let residual = self.pr_residual();
        let scale = (2.0 * self.a.norm() * self.theta.norm() + self.b.norm().powi(2)).max(1.0);
        let tolerance = PR_TOL * scale;
        if residual > tolerance {
            return Err(Error::PhysicalRealizability {
                residual,
                tolerance,
            });
        }
        Ok(())
    }

    /// `‖AΘ + ΘAᵀ + BJBᵀ‖_F`.
    pub fn pr_residual(&self) -> f64 {
        (&self.a * &self.theta
            + &self.theta * self.a.transpose()
            + &self.b * &self.j * self.b.transpose())
        .norm()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn theta(&self) -> &RealMatrix {
        &self.theta
    }

    pub fn energy(&self) -> Option<&RealMatrix> {
        self.energy.as_ref()
    }

    pub fn coupling(&self) -> Option<&RealMatrix> {
        self.coupling.as_ref()
    }

    pub fn a(&self) -> &RealMatrix {
        &self.a
    }

    pub fn b(&self) -> &RealMatrix {
        &self.b
    }

    /// Field CCR matrix `J` for the `m` input channels.
    pub fn j(&self) -> &RealMatrix {
        &self.j
    }

    pub fn is_hurwitz(&self) -> bool {
        check_hurwitz(&self.a).is_ok()
    }

    pub fn require_hurwitz(&self) -> Result<()> {
        check_hurwitz(&self.a)
    }
}

/// Solves `AΘ + ΘAᵀ + BJBᵀ = 0` for the CCR matrix of a Hurwitz model.
pub fn recover_theta(a: &RealMatrix, b: &RealMatrix, j: &RealMatrix) -> Result<RealMatrix> {
    lyap(a, &(b * j * b.transpose()))
}

/// Invariant covariance `V = Σ + iΘ` of the model with vacuum inputs, and
/// the two-point kernel `K(τ)` it generates.
#[derive(Debug, Clone)]
pub struct CovarianceKernel {
    model: OqhoModel,
    sigma: RealMatrix,
    v: ComplexMatrix,
}

impl CovarianceKernel {
    pub fn model(&self) -> &OqhoModel {
        &self.model
    }

    pub fn sigma(&self) -> &RealMatrix {
        &self.sigma
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    /// `‖AV + VAᵀ + BΩBᵀ‖_F`.
    pub fn ale_residual(&self) -> f64 {
        let a = crate::numlin::to_complex(self.model.a());
        let b = crate::numlin::to_complex(self.model.b());
        let omega = ito_matrix(self.model.j());
        (&a * &self.v + &self.v * a.transpose() + &b * omega * b.transpose()).norm()
    }

    /// `K(τ) = e^{τA} V` for `τ ≥ 0` and `K(−τ)*` for `τ < 0`.
    pub fn k(&self, tau: f64) -> ComplexMatrix {
        let forward = |s: f64| {
            let e = expm(self.model.a(), s).expect("drift matrix is square");
            crate::numlin::to_complex(&e) * &self.v
        };
        if tau >= 0.0 {
            forward(tau)
        } else {
            forward(-tau).adjoint()
        }
    }

    /// Two-point CCR matrix `Λ(τ) = Im K(τ)`.
    pub fn lambda(&self, tau: f64) -> RealMatrix {
        imag_part(&self.k(tau))
    }

    /// `T·Tr Σ`, the trace of the integral operator with kernel `K(s − t)` on [0, T].
    pub fn operator_trace(&self, horizon: f64) -> f64 {
        horizon * self.sigma.trace()
    }
}

/// `Σ = lyap(A, BBᵀ)`, `V = Σ + iΘ`.
pub fn steady_covariance(model: &OqhoModel) -> Result<CovarianceKernel> {
    let sigma = lyap(model.a(), &(model.b() * model.b().transpose()))?;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let v = compose(&sigma, model.theta());
    Ok(CovarianceKernel {
        model: model.clone(),
        sigma,
        v,
    })
}

/// Solution of the complex ALE `AV + VAᵀ + BΩBᵀ = 0`; its imaginary part
/// reproduces the CCR matrix whenever the model is physically realizable.
pub fn complex_ale_solution(model: &OqhoModel) -> Result<ComplexMatrix> {
    let b = crate::numlin::to_complex(model.b());
    let rhs = &b * ito_matrix(model.j()) * b.transpose();
    lyap_complex(model.a(), &rhs)
}

/// Smallest eigenvalue of `Σ`.
pub fn min_covariance_eigenvalue(kernel: &CovarianceKernel) -> Result<f64> {
    Ok(sym_eig(kernel.sigma())?
        .values
        .last()
        .copied()
        .unwrap_or(0.0))
}
