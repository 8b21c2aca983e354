//! Response of the system variables to the sinusoidal expansion of the
//! driving quantum Wiener process.
//!
//! Over [0, T] the system variables take the form
//! `X(t) = ξ + Σ_k (f_k(t) α_k + g_k(t) β_k)` with
//!
//! ```text
//! ℧_k = (ω_k² I + A²)⁻¹
//! A_k = √(2/T) A ℧_k ((−1)^k e^{TA} − A/ω_k)
//! ξ   = X₀ + √(2/T) Σ_k A ℧_k B w_k
//! α_k = A_k ξ + ω_k ℧_k B w_k
//! β_k = −A ℧_k B w_k
//! ```
//!
//! Operator-valued vectors are carried as [`GeneratorMap`]s: real
//! coefficient blocks over the stacked generators `(X₀, w₀, …, w_{K−1})`.
//! Their commutators and covariances follow from [`BilinearForms`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{expm, to_complex, ComplexMatrix, RealMatrix};
use crate::oqho::{CovarianceKernel, OqhoModel};
use crate::quadrature::Quadrature;
use crate::sinbasis::{ito_matrix, SinBasis};

/// Coefficients of an operator vector `x0·X₀ + Σ_k w[k]·w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMap {
    pub x0: RealMatrix,
    pub w: Vec<RealMatrix>,
}

impl GeneratorMap {
    pub fn zeros(rows: usize, n: usize, m: usize, modes: usize) -> Self {
        Self {
            x0: RealMatrix::zeros(rows, n),
            w: vec![RealMatrix::zeros(rows, m); modes],
        }
    }

    pub fn rows(&self) -> usize {
        self.x0.nrows()
    }

    pub fn modes(&self) -> usize {
        self.w.len()
    }

    /// `coeff · self`, i.e. every block multiplied from the left.
    pub fn left_mul(&self, coeff: &RealMatrix) -> Self {
        Self {
            x0: coeff * &self.x0,
            w: self.w.iter().map(|b| coeff * b).collect(),
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &GeneratorMap) {
        self.x0 += &other.x0 * alpha;
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b * alpha;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w
            .iter()
            .chain(std::iter::once(&self.x0))
            .map(|b| b.amax())
            .fold(0.0, f64::max)
    }
}

/// Second-order structure of the generators: `[X₀, X₀ᵀ] = 2iΘ`,
/// `[w_j, w_kᵀ] = 2iδ_jk J`, `E X₀X₀ᵀ = V`, `E w_j w_kᵀ = δ_jk Ω`, and no
/// cross terms between `X₀` and the field coefficients.
#[derive(Debug, Clone)]
pub struct BilinearForms {
    theta: RealMatrix,
    j: RealMatrix,
    cov_x0: ComplexMatrix,
    omega: ComplexMatrix,
}

impl BilinearForms {
    /// Forms for a model whose initial variables are in the invariant state.
    pub fn invariant(kernel: &CovarianceKernel) -> Self {
        let model = kernel.model();
        Self {
            theta: model.theta().clone(),
            j: model.j().clone(),
            cov_x0: kernel.v().clone(),
            omega: ito_matrix(model.j()),
        }
    }

    /// `[a·Z, (b·Z)ᵀ]` for generator maps `a`, `b`.
    pub fn ccr(&self, a: &GeneratorMap, b: &GeneratorMap) -> ComplexMatrix {
        let mut re = &a.x0 * &self.theta * b.x0.transpose();
        for (aw, bw) in a.w.iter().zip(&b.w) {
            re += aw * &self.j * bw.transpose();
        }
        re.map(|x| Complex64::new(0.0, 2.0 * x))
    }

    /// `E((a·Z)(b·Z)ᵀ)`.
    pub fn covariance(&self, a: &GeneratorMap, b: &GeneratorMap) -> ComplexMatrix {
        let mut acc = to_complex(&a.x0) * &self.cov_x0 * to_complex(&b.x0).transpose();
        for (aw, bw) in a.w.iter().zip(&b.w) {
            acc += to_complex(aw) * &self.omega * to_complex(bw).transpose();
        }
        acc
    }
}

/// `ξ`, `α_k`, `β_k` truncated to `K` field modes.
#[derive(Debug, Clone)]
pub struct StateCoeffs {
    pub xi: GeneratorMap,
    pub alphas: Vec<GeneratorMap>,
    pub betas: Vec<GeneratorMap>,
    /// Upper bound on `√(2/T) Σ_{k≥K} ‖A℧_k B‖_F`, the Frobenius mass of the dropped ξ terms.
    pub xi_tail_bound: f64,
}

/// Sinusoidal response data for one model and basis, with `℧_k`, `A_k`
/// precomputed for `k < K`.
#[derive(Debug, Clone)]
pub struct SinusoidalResponse {
    model: OqhoModel,
    basis: SinBasis,
    exp_ta: RealMatrix,
    mho: Vec<RealMatrix>,
    fourier: Vec<RealMatrix>,
}

impl SinusoidalResponse {
    pub fn new(model: &OqhoModel, basis: SinBasis) -> Result<Self> {
        model.require_hurwitz()?;
        let exp_ta = expm(model.a(), basis.horizon())?;
        let mut out = Self {
            model: model.clone(),
            basis,
            exp_ta,
            mho: Vec::with_capacity(basis.order()),
            fourier: Vec::with_capacity(basis.order()),
        };
        for k in 0..basis.order() {
            let mho = out.mho_at(k)?;
            let ak = out.fourier_from_mho(k, &mho);
            out.mho.push(mho);
            out.fourier.push(ak);
        }
        Ok(out)
    }

    pub fn basis(&self) -> &SinBasis {
        &self.basis
    }

    pub fn model(&self) -> &OqhoModel {
        &self.model
    }

    /// `℧_k = (ω_k² I + A²)⁻¹` for any `k`, including beyond the truncation.
    pub fn mho_at(&self, k: usize) -> Result<RealMatrix> {
        let a = self.model.a();
        let n = a.nrows();
        let m = RealMatrix::identity(n, n) * self.basis.omega(k).powi(2) + a * a;
        m.try_inverse().ok_or(Error::Singular("ω_k² I + A²"))
    }

    fn fourier_from_mho(&self, k: usize, mho: &RealMatrix) -> RealMatrix {
        let a = self.model.a();
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let inner = &self.exp_ta * sign - a / self.basis.omega(k);
        a * mho * inner * self.basis.amplitude()
    }

    /// `A_k` for any `k`.
    pub fn fourier_coeff_at(&self, k: usize) -> Result<RealMatrix> {
        if let Some(ak) = self.fourier.get(k) {
            return Ok(ak.clone());
        }
        Ok(self.fourier_from_mho(k, &self.mho_at(k)?))
    }

    pub fn mho(&self, k: usize) -> &RealMatrix {
        &self.mho[k]
    }

    pub fn fourier_coeff(&self, k: usize) -> &RealMatrix {
        &self.fourier[k]
    }

    /// `I + Σ_{k<K} f_k(t) A_k`.
    pub fn expm_fourier(&self, t: f64) -> Result<RealMatrix> {
        self.basis.f(0, t)?;
        Ok(self.expm_fourier_unchecked(t, self.basis.order()))
    }

    fn expm_fourier_unchecked(&self, t: f64, terms: usize) -> RealMatrix {
        let n = self.model.n();
        let mut acc = RealMatrix::identity(n, n);
        for (k, ak) in self.fourier.iter().enumerate().take(terms) {
            acc += ak * self.basis.f_unchecked(k, t);
        }
        acc
    }

    /// `(∫₀^T ‖e^{tA} − I − Σ_{k<K'} f_k(t) A_k‖_F² dt)^{1/2}` for `K' ≤ K` terms.
    pub fn l2_truncation_error(&self, terms: usize) -> Result<f64> {
        let terms = terms.min(self.basis.order());
        let horizon = self.basis.horizon();
        // integrand holds products of frequencies up to 2ω_K; 16 nodes per period of that
        let quad = Quadrature::resolving(0.0, horizon, 4.0 * self.basis.omega(terms), 8)?;
        let a = self.model.a();
        let err2 = quad.integrate(|t| {
            let exact = expm(a, t).expect("square drift");
            (exact - self.expm_fourier_unchecked(t, terms)).norm_squared()
        });
        Ok(err2.sqrt())
    }

    /// `(Σ_{k=K'}^{k_max−1} ‖A_k‖_F²)^{1/2}`, the Parseval tail of the sine
    /// series of `e^{tA} − I` beyond `K'` terms, summed explicitly up to `k_max`.
    pub fn parseval_tail(&self, terms: usize, k_max: usize) -> Result<f64> {
        let mut sum = 0.0;
        for k in terms..k_max {
            sum += self.fourier_coeff_at(k)?.norm_squared();
        }
        Ok(sum.sqrt())
    }

    fn xi_block(&self, k: usize) -> RealMatrix {
        self.model.a() * &self.mho[k] * self.model.b() * self.basis.amplitude()
    }

    /// Bound on `√(2/T) Σ_{k≥K} ‖A℧_k B‖_F`: explicit terms for the next
    /// 4096 indices, then `‖AB‖_F / (ω² − ‖A‖₂²) ≤ 2‖AB‖_F/ω²` once
    /// `ω² ≥ 2‖A‖₂²`.
    pub fn xi_tail_bound(&self) -> Result<f64> {
        let a = self.model.a();
        let ab_norm = (a * self.model.b()).norm();
        let a_norm2 = a.clone().singular_values().max().powi(2);
        let mut k = self.basis.order();
        let mut sum = 0.0;
        let explicit_end = k + 4096;
        while k < explicit_end || self.basis.omega(k).powi(2) < 2.0 * a_norm2 {
            sum += (a * self.mho_at(k)? * self.model.b()).norm();
            k += 1;
        }
        let horizon = self.basis.horizon();
        let remainder = 2.0 * ab_norm * (horizon / std::f64::consts::PI).powi(2) / k as f64;
        Ok(self.basis.amplitude() * (sum + remainder))
    }

    /// `ξ`, `α_k`, `β_k` as generator maps over `(X₀, w₀, …, w_{K−1})`.
    pub fn state_coeffs(&self) -> Result<StateCoeffs> {
        let (n, m, modes) = (self.model.n(), self.model.m(), self.basis.order());
        let mut xi = GeneratorMap::zeros(n, n, m, modes);
        xi.x0 = RealMatrix::identity(n, n);
        for k in 0..modes {
            xi.w[k] = self.xi_block(k);
        }
        let mut alphas = Vec::with_capacity(modes);
        let mut betas = Vec::with_capacity(modes);
        for k in 0..modes {
            let mut alpha = xi.left_mul(&self.fourier[k]);
            alpha.w[k] += &self.mho[k] * self.model.b() * self.basis.omega(k);
            alphas.push(alpha);

            let mut beta = GeneratorMap::zeros(n, n, m, modes);
            beta.w[k] = -(self.model.a() * &self.mho[k] * self.model.b());
            betas.push(beta);
        }
        Ok(StateCoeffs {
            xi,
            alphas,
            betas,
            xi_tail_bound: self.xi_tail_bound()?,
        })
    }

    /// Closed form of `[α_j, β_kᵀ] = −2i(√(2/T) A A_j ℧_k + δ_jk ω_j ℧_j) BJBᵀ ℧_kᵀ Aᵀ`.
    pub fn alpha_beta_ccr(&self, j: usize, k: usize) -> Result<ComplexMatrix> {
        let (a, b) = (self.model.a(), self.model.b());
        let mho_k = self.mho_at(k)?;
        let mut left = a * self.fourier_coeff_at(j)? * &mho_k * self.basis.amplitude();
        if j == k {
            left += &mho_k * self.basis.omega(j);
        }
        let re = left * b * self.model.j() * b.transpose() * mho_k.transpose() * a.transpose();
        Ok(re.map(|x| Complex64::new(0.0, -2.0 * x)))
    }

    /// Generator map of `X(t) = ξ + Σ_k (f_k(t) α_k + g_k(t) β_k)`, truncated at `K`.
    ///
    /// Summing `f_k(t) A_k ξ` over `k` gives `(E(t) − I) ξ` with
    /// `E(t) = I + Σ f_k(t) A_k`, so the map is `E(t) ξ` plus the direct
    /// field terms.
    pub fn state_map(&self, t: f64) -> Result<GeneratorMap> {
        let e = self.expm_fourier(t)?;
        let (n, m, modes) = (self.model.n(), self.model.m(), self.basis.order());
        let mut out = GeneratorMap::zeros(n, n, m, modes);
        out.x0 = e.clone();
        let a = self.model.a();
        let b = self.model.b();
        for k in 0..modes {
            let f = self.basis.f_unchecked(k, t);
            let g = self.basis.g_unchecked(k, t);
            let mho_b = &self.mho[k] * b;
            out.w[k] = &e * self.xi_block(k) + &mho_b * (f * self.basis.omega(k)) - a * mho_b * g;
        }
        Ok(out)
    }

    /// `E(X(s) X(t)ᵀ)` implied by the truncated representation, with `X₀` in
    /// the invariant state of `kernel`.
    pub fn representation_covariance(
        &self,
        kernel: &CovarianceKernel,
        s: f64,
        t: f64,
    ) -> Result<ComplexMatrix> {
        let forms = BilinearForms::invariant(kernel);
        Ok(forms.covariance(&self.state_map(s)?, &self.state_map(t)?))
    }
}
