//! Nyström eigendecomposition of the integral operator with kernel
//! `K(s − t)` on [0, T].
//!
//! The operator `(𝒦f)(s) = ∫ K(s − t) f(t) dt` is discretized on a composite
//! Gauss-Legendre grid as the Hermitian block matrix `W^{1/2} K W^{1/2}`,
//! `W = diag(w_i) ⊗ I_n`. Eigenvectors are rescaled by `W^{-1/2}` so that the
//! sampled eigenfunctions `h_k = φ_k + iψ_k` are orthonormal under the
//! quadrature inner product.
//!
//! Conventions: eigenvalues descending, negatives clipped to zero (and the
//! clipped mass reported), each `h_k` phased so that its largest-magnitude
//! sample is real positive.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{herm_eig_tol, ComplexMatrix, RealMatrix};
use crate::oqho::CovarianceKernel;
use crate::quadrature::Quadrature;

/// Tolerance on the Hermiticity of the assembled Nyström matrix.
pub const ASSEMBLY_HERMITIAN_TOL: f64 = 1e-8;

/// Relative agreement required between the two evaluations in [`KernelEigDecomposition::qcf_exponent`].
pub const QCF_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KernelEigDecomposition {
    grid: Quadrature,
    n: usize,
    mu: Vec<f64>,
    // column k: samples h_k(t_i), row i·n + a
    h: ComplexMatrix,
    matrix: Option<ComplexMatrix>,
    operator_trace: f64,
    nystrom_trace: f64,
    clipped_mass: f64,
    hermitian_residual: f64,
}

/// Discretize and decompose. `n_modes = None` keeps the full spectrum of
/// size `n · grid_size`.
pub fn nystrom_eig(
    kernel: &CovarianceKernel,
    horizon: f64,
    grid_size: usize,
    n_modes: Option<usize>,
) -> Result<KernelEigDecomposition> {
    kernel.model().require_hurwitz()?;
    if grid_size < 16 {
        return Err(Error::InvalidArgument(format!(
            "Nyström grid needs at least 16 nodes, got {grid_size}"
        )));
    }
    let n = kernel.model().n();
    let dim = n * grid_size;
    let keep = n_modes.unwrap_or(dim);
    if keep > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {keep} modes but the discretization has only {dim}"
        )));
    }
    let grid = Quadrature::with_node_count(0.0, horizon, grid_size)?;
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();

    let mut matrix = ComplexMatrix::zeros(dim, dim);
    for i in 0..grid_size {
        for j in 0..grid_size {
            let block = kernel.k(grid.nodes()[i] - grid.nodes()[j])
                * Complex64::from(sqrt_w[i] * sqrt_w[j]);
            matrix.view_mut((i * n, j * n), (n, n)).copy_from(&block);
        }
    }
    let hermitian_residual =
        (&matrix - matrix.adjoint()).norm() / matrix.norm().max(f64::MIN_POSITIVE);
    let eig = herm_eig_tol(&matrix, ASSEMBLY_HERMITIAN_TOL)?;

    let mut clipped_mass = 0.0;
    let mut mu = Vec::with_capacity(keep);
    for &v in &eig.values {
        if v < 0.0 {
            clipped_mass -= v;
        }
    }
    let nystrom_trace = eig.values.iter().map(|v| v.max(0.0)).sum();

    let mut h = ComplexMatrix::zeros(dim, keep);
    for k in 0..keep {
        mu.push(eig.values[k].max(0.0));
        let v = eig.vectors.column(k);
        for i in 0..grid_size {
            for a in 0..n {
                h[(i * n + a, k)] = v[i * n + a] / sqrt_w[i];
            }
        }
        let phase = phase_of_largest(h.column(k).iter().copied());
        h.column_mut(k).iter_mut().for_each(|x| *x *= phase);
    }

    Ok(KernelEigDecomposition {
        grid,
        n,
        mu,
        h,
        matrix: Some(matrix),
        operator_trace: kernel.operator_trace(horizon),
        nystrom_trace,
        clipped_mass,
        hermitian_residual,
    })
}

// unit factor turning the first largest-magnitude entry real positive
fn phase_of_largest(values: impl Iterator<Item = Complex64>) -> Complex64 {
    let mut best = Complex64::new(0.0, 0.0);
    for v in values {
        if v.norm() > best.norm() * (1.0 + 1e-12) {
            best = v;
        }
    }
    if best.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        best.conj() / best.norm()
    }
}

impl KernelEigDecomposition {
    /// Assemble a decomposition from explicit samples; `h` has one column per
    /// mode with rows `i·n + a`. No direct-quadrature matrix is attached, so
    /// [`Self::qcf_exponent`] only returns the eigen-sum.
    pub fn from_parts(grid: Quadrature, n: usize, mu: Vec<f64>, h: ComplexMatrix) -> Result<Self> {
        if h.nrows() != grid.len() * n || h.ncols() != mu.len() {
            return Err(Error::Dimension(format!(
                "eigenfunction samples are {}×{}, expected {}×{}",
                h.nrows(),
                h.ncols(),
                grid.len() * n,
                mu.len()
            )));
        }
        let total = mu.iter().sum();
        Ok(Self {
            grid,
            n,
            mu,
            h,
            matrix: None,
            operator_trace: total,
            nystrom_trace: total,
            clipped_mass: 0.0,
            hermitian_residual: 0.0,
        })
    }

    pub fn grid(&self) -> &Quadrature {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// All samples, one column per mode.
    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    /// `h_k(t_i)` as an n-vector.
    pub fn h_at(&self, k: usize, node: usize) -> Vec<Complex64> {
        (0..self.n)
            .map(|a| self.h[(node * self.n + a, k)])
            .collect()
    }

    /// `T·Tr Σ`, the trace of the continuous operator.
    pub fn operator_trace(&self) -> f64 {
        self.operator_trace
    }

    /// Sum of all (clipped) discrete eigenvalues, including modes not kept.
    pub fn nystrom_trace(&self) -> f64 {
        self.nystrom_trace
    }

    pub fn mu_sum(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn trace_residual(&self) -> f64 {
        (self.mu_sum() - self.operator_trace).abs()
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Relative anti-Hermitian part of the assembled matrix, before symmetrization.
    pub fn hermitian_residual(&self) -> f64 {
        self.hermitian_residual
    }

    /// `(⟨h_j, h_k⟩)` under the quadrature inner product.
    pub fn gramian(&self) -> ComplexMatrix {
        let weighted = self.weighted_h();
        weighted.adjoint() * weighted
    }

    // rows scaled by √w_i
    fn weighted_h(&self) -> ComplexMatrix {
        let mut out = self.h.clone();
        for (i, w) in self.grid.weights().iter().enumerate() {
            let s = w.sqrt();
            for a in 0..self.n {
                out.row_mut(i * self.n + a).scale_mut(s);
            }
        }
        out
    }

    fn check_modes(&self, count: usize) -> Result<()> {
        if count > self.modes() {
            return Err(Error::InvalidArgument(format!(
                "{count} modes requested, {} computed",
                self.modes()
            )));
        }
        Ok(())
    }

    /// `Σ_{k<N} μ_k h_k(t_s) h_k(t_t)*` at grid nodes `s`, `t`.
    pub fn mercer_k(&self, s: usize, t: usize, count: usize) -> Result<ComplexMatrix> {
        self.check_modes(count)?;
        if s >= self.grid.len() || t >= self.grid.len() {
            return Err(Error::InvalidArgument(
                "grid node index out of range".into(),
            ));
        }
        let n = self.n;
        Ok(ComplexMatrix::from_fn(n, n, |a, b| {
            (0..count)
                .map(|k| self.h[(s * n + a, k)] * self.h[(t * n + b, k)].conj() * self.mu[k])
                .sum()
        }))
    }

    /// Mercer sum at arbitrary times, with eigenfunctions interpolated
    /// barycentrically within each panel. An approximation off the grid.
    pub fn mercer_k_interpolated(&self, s: f64, t: f64, count: usize) -> Result<ComplexMatrix> {
        self.check_modes(count)?;
        let (lo, hi) = self.grid.interval();
        for x in [s, t] {
            if !(lo..=hi).contains(&x) {
                return Err(Error::OutOfDomain {
                    what: "time",
                    value: x,
                    range: format!("[{lo}, {hi}]"),
                });
            }
        }
        let n = self.n;
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..count {
            let hs: Vec<Complex64> = (0..n)
                .map(|a| self.grid.interpolate_with(s, |i| self.h[(i * n + a, k)]))
                .collect();
            let ht: Vec<Complex64> = (0..n)
                .map(|a| self.grid.interpolate_with(t, |i| self.h[(i * n + a, k)]))
                .collect();
            for a in 0..n {
                for b in 0..n {
                    out[(a, b)] += hs[a] * ht[b].conj() * self.mu[k];
                }
            }
        }
        Ok(out)
    }

    /// `⟨f, h_k⟩` for every mode, `f` given as an n×G matrix of node samples.
    pub fn project(&self, f: &RealMatrix) -> Result<Vec<Complex64>> {
        if f.nrows() != self.n || f.ncols() != self.grid.len() {
            return Err(Error::Dimension(format!(
                "expected {}×{} samples, got {}×{}",
                self.n,
                self.grid.len(),
                f.nrows(),
                f.ncols()
            )));
        }
        let n = self.n;
        Ok((0..self.modes())
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, w) in self.grid.weights().iter().enumerate() {
                    for a in 0..n {
                        acc += self.h[(i * n + a, k)] * (f[(a, i)] * w);
                    }
                }
                acc
            })
            .collect())
    }

    /// `½⟨f, 𝒦f⟩` as the eigen-sum `½ Σ μ_k |⟨f, h_k⟩|²`, checked against the
    /// direct double quadrature `½ Σ_ij w_i w_j f(t_i)ᵀ K(t_i − t_j) f(t_j)`
    /// when the assembled matrix is available.
    pub fn qcf_exponent(&self, f: &RealMatrix) -> Result<f64> {
        let proj = self.project(f)?;
        let eigen_sum = 0.5
            * proj
                .iter()
                .zip(&self.mu)
                .map(|(p, m)| m * p.norm_sqr())
                .sum::<f64>();
        if let Some(direct) = self.qcf_direct(f) {
            let scale = eigen_sum.abs().max(direct.abs());
            if (eigen_sum - direct).abs() > QCF_TOL * scale {
                return Err(Error::Tolerance {
                    what: "eigen-sum vs direct quadratic form",
                    value: (eigen_sum - direct).abs() / scale,
                    tolerance: QCF_TOL,
                });
            }
        }
        Ok(eigen_sum)
    }

    /// Direct double-quadrature value of `½⟨f, 𝒦f⟩`, if the assembled
    /// Nyström matrix is attached.
    pub fn qcf_direct(&self, f: &RealMatrix) -> Option<f64> {
        let matrix = self.matrix.as_ref()?;
        let n = self.n;
        let v = nalgebra::DVector::from_fn(self.grid.len() * n, |r, _| {
            Complex64::new(f[(r % n, r / n)] * self.grid.weights()[r / n].sqrt(), 0.0)
        });
        Some(0.5 * (v.adjoint() * matrix * &v)[(0, 0)].re)
    }

    /// `Σ_{k≥N} μ_k` over computed modes plus the uncomputed residual
    /// `max(0, T·Tr Σ − Σ_k μ_k)`.
    pub fn ms_tail(&self, count: usize) -> Result<f64> {
        self.check_modes(count)?;
        let tail: f64 = self.mu[count..].iter().sum();
        Ok(tail + (self.operator_trace - self.mu_sum()).max(0.0))
    }

    /// Smallest `N` with `Σ_{k<N} μ_k ≥ fraction · Σ_k μ_k`.
    pub fn modes_for_mass(&self, fraction: f64) -> Result<usize> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::OutOfDomain {
                what: "spectral mass fraction",
                value: fraction,
                range: "(0, 1]".into(),
            });
        }
        let total = self.mu_sum();
        let mut acc = 0.0;
        for (k, m) in self.mu.iter().enumerate() {
            acc += m;
            if acc >= fraction * total {
                return Ok(k + 1);
            }
        }
        Ok(self.modes())
    }

    /// Maximal runs of eigenvalues within `rel_tol · μ₀` of their neighbour.
    pub fn clusters(&self, rel_tol: f64) -> Vec<Range<usize>> {
        let scale = self.mu.first().copied().unwrap_or(0.0);
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.mu.len() {
            if k == self.mu.len() || (self.mu[k - 1] - self.mu[k]) > rel_tol * scale {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Copy with `h_k` replaced by `e^{iθ_k} h_k`.
    pub fn rotate_phases(&self, thetas: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, &th) in thetas.iter().enumerate().take(self.modes()) {
            let z = Complex64::from_polar(1.0, th);
            out.h.column_mut(k).iter_mut().for_each(|x| *x *= z);
        }
        out
    }

    /// Copy with the modes in `range` remixed by a unitary `u`:
    /// `h'_k = Σ_j h_j u_jk`. Only meaningful inside a degenerate cluster.
    pub fn mix_modes(&self, range: Range<usize>, u: &ComplexMatrix) -> Result<Self> {
        if u.nrows() != range.len() || u.ncols() != range.len() || range.end > self.modes() {
            return Err(Error::Dimension(
                "mixing matrix does not match the mode range".into(),
            ));
        }
        let mut out = self.clone();
        let block = self.h.columns(range.start, range.len()) * u;
        out.h
            .columns_mut(range.start, range.len())
            .copy_from(&block);
        Ok(out)
    }

    /// Rows `(index, μ_k, cumulative fraction)`.
    pub fn spectrum_rows(&self) -> Vec<(usize, f64, f64)> {
        let total = self.mu_sum();
        let mut acc = 0.0;
        self.mu
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                acc += m;
                (k, m, if total > 0.0 { acc / total } else { 0.0 })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oqho::{steady_covariance, OqhoModel};

    fn canonical(grid: usize) -> KernelEigDecomposition {
        let k = steady_covariance(&OqhoModel::canonical()).unwrap();
        nystrom_eig(&k, 1.0, grid, None).unwrap()
    }

    #[test]
    fn small_grid_is_rejected() {
        let k = steady_covariance(&OqhoModel::canonical()).unwrap();
        assert!(nystrom_eig(&k, 1.0, 8, None).is_err());
        assert!(nystrom_eig(&k, 1.0, 16, Some(33)).is_err());
    }

    #[test]
    fn canonical_spectrum_is_rank_one_in_the_matrix_part() {
        // K(τ) = e^{-2|τ|}(I + iJ̄) and I + iJ̄ has eigenvalues {2, 0}
        let d = canonical(32);
        let half = d.modes() / 2;
        assert!(d.mu()[half] < 1e-12 * d.mu()[0]);
        assert!(d.mu()[half - 1] > 0.0);
    }

    #[test]
    fn orthonormal_samples_and_exact_node_reconstruction() {
        let d = canonical(48);
        let g = d.gramian();
        assert!((g - ComplexMatrix::identity(d.modes(), d.modes())).norm() < 1e-10);
        let v = steady_covariance(&OqhoModel::canonical())
            .unwrap()
            .v()
            .clone();
        assert!((d.mercer_k(5, 5, d.modes()).unwrap() - v).norm() < 1e-10);
        assert_eq!(d.mercer_k(5, 7, 0).unwrap().norm(), 0.0);
    }

    #[test]
    fn phase_convention() {
        let d = canonical(32);
        for k in 0..4 {
            let col = d.h().column(k);
            let best = col
                .iter()
                .fold(Complex64::new(0.0, 0.0), |b: Complex64, z| {
                    if z.norm() > b.norm() * (1.0 + 1e-12) {
                        *z
                    } else {
                        b
                    }
                });
            assert!(best.im.abs() < 1e-12 && best.re > 0.0);
        }
    }

    #[test]
    fn tail_and_mass_helpers() {
        let d = canonical(32);
        let full = d.modes();
        assert!((d.ms_tail(0).unwrap() - d.operator_trace()).abs() < 1e-3 * d.operator_trace());
        assert!(d.ms_tail(full).unwrap() <= d.trace_residual() + 1e-15);
        let tails: Vec<f64> = (0..=full).map(|k| d.ms_tail(k).unwrap()).collect();
        assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(d.modes_for_mass(1e-9).unwrap(), 1);
        assert!(d.modes_for_mass(1.5).is_err());
        let rows = d.spectrum_rows();
        assert!((rows.last().unwrap().2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clusters_partition_the_spectrum() {
        let d = canonical(16);
        let c = d.clusters(1e-9);
        assert_eq!(c.first().unwrap().start, 0);
        assert_eq!(c.last().unwrap().end, d.modes());
        // the null half forms one cluster
        assert!(c.last().unwrap().len() >= d.modes() / 2);
    }

    #[test]
    fn qcf_zero_function() {
        let d = canonical(16);
        let f = RealMatrix::zeros(2, 16);
        assert_eq!(d.qcf_exponent(&f).unwrap(), 0.0);
    }
}
