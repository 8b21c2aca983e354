//! Sinusoidal eigenbasis of the covariance operator of the standard Wiener
//! process on [0, T], and the second-order bookkeeping for the operator
//! coefficients `w_k` of the quantum Wiener process expanded over it.
//!
//! `f_k(t) = √(2/T) sin(ω_k t)`, `g_k(t) = √(2/T) cos(ω_k t)`,
//! `ω_k = (π/T)(k + 1/2)`, `λ_k = 1/ω_k²`.
//!
//! The coefficients `w_k` are never represented as operators. All results
//! that depend on them only need their commutators `[w_j, w_kᵀ] = 2iδ_jk J`
//! and vacuum covariances `E w_j w_kᵀ = δ_jk (I + iJ)`, which is what the
//! functions below return.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{compose, ComplexMatrix, RealMatrix};
use crate::quadrature::Quadrature;

pub const DEFAULT_ORDER: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinBasis {
    horizon: f64,
    order: usize,
}

impl SinBasis {
    pub fn new(horizon: f64, order: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::OutOfDomain {
                what: "horizon T",
                value: horizon,
                range: "(0, inf)".into(),
            });
        }
        if order == 0 {
            return Err(Error::InvalidArgument(
                "truncation order must be >= 1".into(),
            ));
        }
        Ok(Self { horizon, order })
    }

    pub fn with_default_order(horizon: f64) -> Result<Self> {
        Self::new(horizon, DEFAULT_ORDER)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.horizon, order)
    }

    /// `√(2/T)`.
    pub fn amplitude(&self) -> f64 {
        (2.0 / self.horizon).sqrt()
    }

    pub fn omega(&self, k: usize) -> f64 {
        PI / self.horizon * (k as f64 + 0.5)
    }

    pub fn lambda(&self, k: usize) -> f64 {
        1.0 / self.omega(k).powi(2)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if t < -slack || t > self.horizon + slack || t.is_nan() {
            return Err(Error::OutOfDomain {
                what: "time",
                value: t,
                range: format!("[0, {}]", self.horizon),
            });
        }
        Ok(())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.order {
            return Err(Error::InvalidArgument(format!(
                "basis index {k} exceeds truncation order {}",
                self.order
            )));
        }
        Ok(())
    }

    pub fn f(&self, k: usize, t: f64) -> Result<f64> {
        self.check_index(k)?;
        self.check_time(t)?;
        Ok(self.f_unchecked(k, t))
    }

    pub fn g(&self, k: usize, t: f64) -> Result<f64> {
        self.check_index(k)?;
        self.check_time(t)?;
        Ok(self.g_unchecked(k, t))
    }

    pub(crate) fn f_unchecked(&self, k: usize, t: f64) -> f64 {
        self.amplitude() * (self.omega(k) * t).sin()
    }

    pub(crate) fn g_unchecked(&self, k: usize, t: f64) -> f64 {
        self.amplitude() * (self.omega(k) * t).cos()
    }

    /// `Σ_{k<K} λ_k`, increasing to `T²/2`.
    pub fn lambda_sum(&self) -> f64 {
        (0..self.order).map(|k| self.lambda(k)).sum()
    }

    /// Bounds on the Mercer tail `T²/2 − Σ_{k<K} λ_k`:
    /// `T²/(π²(K + 1/2)) ≤ tail ≤ T²/(π²K)`. The lower bound compares the
    /// decreasing summand `(k + 1/2)^-2` with its integral from `K + 1/2`,
    /// the upper one uses convexity on each `[k, k+1]`.
    pub fn lambda_tail_bounds(&self) -> (f64, f64) {
        let scale = (self.horizon / PI).powi(2);
        let k = self.order as f64;
        (scale / (k + 0.5), scale / k)
    }

    /// K-term Mercer approximation of `min(s, t)`.
    pub fn mercer_min(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(s)?;
        self.check_time(t)?;
        Ok((0..self.order)
            .map(|k| self.lambda(k) * self.f_unchecked(k, s) * self.f_unchecked(k, t))
            .sum())
    }

    /// Truncated two-point commutator `2i·mercer_min(s,t)·J` of the expanded Wiener process.
    pub fn wiener_ccr(&self, s: f64, t: f64, j: &RealMatrix) -> Result<ComplexMatrix> {
        let c = self.mercer_min(s, t)?;
        Ok(compose(
            &RealMatrix::zeros(j.nrows(), j.ncols()),
            &(j * (2.0 * c)),
        ))
    }

    /// A Gauss-Legendre rule on [0, T] resolving every basis function up to
    /// `max_index` with at least 8 nodes per period.
    pub fn quadrature(&self, max_index: usize) -> Result<Quadrature> {
        Quadrature::resolving(0.0, self.horizon, self.omega(max_index), 8)
    }

    /// Gram matrices `(⟨f_j, f_k⟩)` and `(⟨g_j, g_k⟩)` for `j, k < count`, by quadrature.
    pub fn gramians(&self, count: usize, quad: &Quadrature) -> (RealMatrix, RealMatrix) {
        let samples = |use_cos: bool| -> Vec<Vec<f64>> {
            (0..count)
                .map(|k| {
                    quad.nodes()
                        .iter()
                        .map(|&t| {
                            if use_cos {
                                self.g_unchecked(k, t)
                            } else {
                                self.f_unchecked(k, t)
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let gram = |s: &[Vec<f64>]| {
            RealMatrix::from_fn(count, count, |j, k| {
                s[j].iter()
                    .zip(&s[k])
                    .zip(quad.weights())
                    .map(|((a, b), w)| a * b * w)
                    .sum()
            })
        };
        (gram(&samples(false)), gram(&samples(true)))
    }

    /// `ω_j ω_k ∬ min(s,t) f_j(s) f_k(t) ds dt`, which equals `δ_jk`.
    pub fn ccr_double_integral(&self, j: usize, k: usize, quad: &Quadrature) -> f64 {
        self.omega(j)
            * self.omega(k)
            * quad.double_integral_split(|s, t| {
                s.min(t) * self.f_unchecked(j, s) * self.f_unchecked(k, t)
            })
    }

    /// `‖Σ_k g_k u_k‖²` by quadrature; equals `Σ_k |u_k|²` by orthonormality of `g_k`.
    pub fn cosine_series_norm_sq(&self, coeffs: &[Vec<f64>], quad: &Quadrature) -> f64 {
        quad.integrate(|t| {
            let dim = coeffs.first().map_or(0, Vec::len);
            (0..dim)
                .map(|c| {
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, u)| self.g_unchecked(k, t) * u[c])
                        .sum::<f64>()
                        .powi(2)
                })
                .sum()
        })
    }
}

/// Vacuum covariance of the coefficients: `E(w_j w_kᵀ) = δ_jk (I_m + iJ)`.
pub fn coeff_covariance(j: usize, k: usize, field_j: &RealMatrix) -> ComplexMatrix {
    let m = field_j.nrows();
    if j == k {
        compose(&RealMatrix::identity(m, m), field_j)
    } else {
        ComplexMatrix::zeros(m, m)
    }
}

/// Commutator of the coefficients: `[w_j, w_kᵀ] = 2i δ_jk J`.
pub fn coeff_ccr(j: usize, k: usize, field_j: &RealMatrix) -> ComplexMatrix {
    if j == k {
        field_j.map(|x| Complex64::new(0.0, 2.0 * x))
    } else {
        ComplexMatrix::zeros(field_j.nrows(), field_j.ncols())
    }
}

/// Itô matrix `Ω = I_m + iJ`.
pub fn ito_matrix(field_j: &RealMatrix) -> ComplexMatrix {
    coeff_covariance(0, 0, field_j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::field_j;

    #[test]
    #[allow(clippy::approx_constant)]
    fn frequencies_at_unit_horizon() {
        let b = SinBasis::new(1.0, 4).unwrap();
        assert!((b.omega(0) - 1.570796).abs() < 1e-6);
        assert!((b.lambda(0) - 0.405285).abs() < 1e-6);
    }

    #[test]
    fn boundary_values() {
        let b = SinBasis::new(2.5, 50).unwrap();
        for k in 0..50 {
            assert_eq!(b.f(k, 0.0).unwrap(), 0.0);
            assert!(b.g(k, 2.5).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn time_outside_horizon_is_rejected() {
        let b = SinBasis::new(1.0, 4).unwrap();
        assert!(matches!(b.f(0, 1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(b.g(0, -0.1), Err(Error::OutOfDomain { .. })));
        assert!(b.f(4, 0.5).is_err());
    }

    #[test]
    fn mercer_vanishes_at_origin() {
        for order in [1, 10, 300] {
            let b = SinBasis::new(1.0, order).unwrap();
            assert_eq!(b.mercer_min(0.0, 0.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn wiener_ccr_swap_antisymmetry() {
        let b = SinBasis::new(1.0, 64).unwrap();
        let j = field_j(4).unwrap();
        let a = b.wiener_ccr(0.3, 0.8, &j).unwrap();
        let c = b.wiener_ccr(0.8, 0.3, &j).unwrap();
        assert!((a + c.transpose()).norm() < 1e-15);
        assert!(b.wiener_ccr(0.0, 0.5, &j).unwrap().norm() == 0.0);
    }

    #[test]
    fn coefficient_forms() {
        let j = field_j(2).unwrap();
        let cov = coeff_covariance(3, 3, &j);
        assert_eq!(cov[(0, 1)], Complex64::new(0.0, 1.0));
        assert_eq!(cov[(1, 0)], Complex64::new(0.0, -1.0));
        assert_eq!(cov[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(coeff_covariance(1, 2, &j).norm(), 0.0);
        let ccr = coeff_ccr(3, 3, &j);
        assert_eq!(ccr[(0, 1)], Complex64::new(0.0, 2.0));
        assert_eq!(coeff_ccr(0, 1, &j).norm(), 0.0);
    }
}
