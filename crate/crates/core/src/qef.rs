//! Quadratic-exponential functional `Ξ_N = E exp(Q_N)` of the truncated
//! expansion.
//!
//! With `X = Σ_k √μ_k (φ_k ξ_k − ψ_k η_k)` over vacuum modes `ζ_k = (ξ_k, η_k)`,
//! the quadratic form `Q_N = ∫ XᵀΠX dt` becomes `ζᵀ H ζ` where `H` has 2×2
//! blocks `√(μ_j μ_k) G_jk` and
//!
//! ```text
//! G_jk = [[ ⟨φ_j,Πφ_k⟩, −⟨φ_j,Πψ_k⟩],
//!         [−⟨ψ_j,Πφ_k⟩,  ⟨ψ_j,Πψ_k⟩]]
//! ```
//!
//! For positive definite `H` with Williamson factorization `UᵀHU = S ⊗ I₂`,
//! `a_k = ½tanh(2σ_k)`, `b_k = ½sinh(4σ_k)`, `C = (UᵀU)⁻¹ + iJ_N`,
//! `Φ = I_N ⊗ [[1,0],[0,1],[1,0]]` and `Ψ = blockdiag(a_k, b_k, a_k)`,
//!
//! ```text
//! Ξ_N = det(I_{3N} − (Φ C Φᵀ)^⋄ Ψ)^{-1/2}
//! ```
//!
//! provided `ρ((UᵀU)⁻¹ blockdiag(2a_k, b_k)) < 1`.

use nalgebra::{Cholesky, DMatrix, DVector, Scalar};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel_eig::KernelEigDecomposition;
use crate::numlin::{
    mode_j, sym_eig, symmetry_residual, to_complex, williamson, RealMatrix, WilliamsonFactorization,
};
use crate::oqho::CovarianceKernel;

/// Feasibility requires spectral radius below `1 − FEASIBILITY_MARGIN`.
pub const FEASIBILITY_MARGIN: f64 = 1e-8;

/// Bound on `|Im det| / |det|` in the determinant formula.
pub const DET_IMAG_TOL: f64 = 1e-9;

/// `H` counts as singular when its smallest eigenvalue is below this times `‖H‖`.
pub const SINGULAR_H_TOL: f64 = 1e-12;

/// Default fraction of spectral mass captured by an automatic mode count.
pub const DEFAULT_MASS_FRACTION: f64 = 0.999;

/// `Π` must be `n×n`, symmetric and positive semidefinite.
pub fn check_weight(pi: &RealMatrix, n: usize) -> Result<()> {
    if pi.nrows() != n || pi.ncols() != n {
        return Err(Error::Dimension(format!(
            "weight matrix is {}×{}, model has n = {n}",
            pi.nrows(),
            pi.ncols()
        )));
    }
    let residual = symmetry_residual(pi);
    if residual > 1e-12 * pi.norm().max(1.0) {
        return Err(Error::NotSymmetric {
            what: "weight matrix Π",
            residual,
        });
    }
    if n > 0 {
        let min = *sym_eig(pi)?.values.last().unwrap();
        if min < -1e-12 * pi.norm().max(1.0) {
            return Err(Error::NotPositiveSemidefinite {
                what: "weight matrix Π",
                min_eigenvalue: min,
            });
        }
    }
    Ok(())
}

/// All `G_jk` for `j, k < count` as one 2N×2N matrix, computed on the
/// Nyström grid. Column `2k` carries `φ_k`, column `2k+1` carries `−ψ_k`.
pub fn gram_matrix(
    decomp: &KernelEigDecomposition,
    pi: &RealMatrix,
    count: usize,
) -> Result<RealMatrix> {
    check_weight(pi, decomp.n())?;
    if count > decomp.modes() {
        return Err(Error::InvalidArgument(format!(
            "{count} modes requested, {} computed",
            decomp.modes()
        )));
    }
    let n = decomp.n();
    let nodes = decomp.grid().len();
    let h = decomp.h();
    // c = W^{1/2}(φ_0, −ψ_0, φ_1, −ψ_1, ...)
    let mut c = RealMatrix::zeros(nodes * n, 2 * count);
    for (i, w) in decomp.grid().weights().iter().enumerate() {
        let s = w.sqrt();
        for a in 0..n {
            let r = i * n + a;
            for k in 0..count {
                c[(r, 2 * k)] = s * h[(r, k)].re;
                c[(r, 2 * k + 1)] = -s * h[(r, k)].im;
            }
        }
    }
    // block-diagonal I_G ⊗ Π applied node by node
    let mut pc = RealMatrix::zeros(nodes * n, 2 * count);
    for i in 0..nodes {
        let rows = c.rows(i * n, n);
        pc.rows_mut(i * n, n).copy_from(&(pi * rows));
    }
    let g = c.transpose() * pc;
    Ok((&g + g.transpose()) * 0.5)
}

/// The 2×2 block `G_jk`.
pub fn gram_g(
    decomp: &KernelEigDecomposition,
    pi: &RealMatrix,
    j: usize,
    k: usize,
) -> Result<RealMatrix> {
    let count = j.max(k) + 1;
    let g = gram_matrix(decomp, pi, count)?;
    Ok(g.view((2 * j, 2 * k), (2, 2)).into_owned())
}

/// `H` with blocks `√(μ_j μ_k) G_jk` for the modes in `indices`.
fn scale_gram(g: &RealMatrix, mu: &[f64], indices: &[usize]) -> RealMatrix {
    let dim = 2 * indices.len();
    RealMatrix::from_fn(dim, dim, |r, c| {
        let (j, k) = (indices[r / 2], indices[c / 2]);
        (mu[j] * mu[k]).sqrt() * g[(2 * j + r % 2, 2 * k + c % 2)]
    })
}

fn check_psd(h: &RealMatrix) -> Result<f64> {
    if h.is_empty() {
        return Ok(0.0);
    }
    let min = *sym_eig(h)?.values.last().unwrap();
    if min < -1e-10 * h.norm() {
        return Err(Error::NotPositiveSemidefinite {
            what: "H",
            min_eigenvalue: min,
        });
    }
    Ok(min)
}

/// `H` over the leading `count` modes.
pub fn assemble_h(
    decomp: &KernelEigDecomposition,
    pi: &RealMatrix,
    count: usize,
) -> Result<RealMatrix> {
    let g = gram_matrix(decomp, pi, count)?;
    let indices: Vec<usize> = (0..count).collect();
    let h = scale_gram(&g, decomp.mu(), &indices);
    check_psd(&h)?;
    Ok(h)
}

/// Symmetrization keeping the upper triangle: `d_jk` for `j ≤ k`, `d_kj` otherwise.
pub fn diamond<T: Scalar + Copy>(d: &DMatrix<T>) -> DMatrix<T> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |r, c| {
        if r <= c {
            d[(r, c)]
        } else {
            d[(c, r)]
        }
    })
}

#[derive(Debug, Clone)]
pub struct Feasibility {
    pub feasible: bool,
    pub radius: f64,
    pub williamson: WilliamsonFactorization,
    // (UᵀU)⁻¹
    pub(crate) gram_inverse: RealMatrix,
}

impl Feasibility {
    pub fn sigmas(&self) -> &[f64] {
        &self.williamson.sigmas
    }
}

/// `a_k = ½tanh(2σ_k)`, `b_k = ½sinh(4σ_k)`.
pub fn symplectic_scalars(sigma: f64) -> (f64, f64) {
    (0.5 * (2.0 * sigma).tanh(), 0.5 * (4.0 * sigma).sinh())
}

/// Williamson factorization and the spectral radius of
/// `(UᵀU)⁻¹ blockdiag(2a_k, b_k)`, evaluated as the largest eigenvalue of the
/// similar symmetric matrix `D^{1/2}(UᵀU)⁻¹D^{1/2}`.
pub fn qef_feasible(h: &RealMatrix) -> Result<Feasibility> {
    let w = williamson(h)?;
    let utu = w.u.transpose() * &w.u;
    let gram_inverse = Cholesky::new((&utu + utu.transpose()) * 0.5)
        .ok_or(Error::Singular("UᵀU"))?
        .inverse();
    let d_sqrt = DVector::from_iterator(
        h.nrows(),
        w.sigmas.iter().flat_map(|&s| {
            let (a, b) = symplectic_scalars(s);
            [(2.0 * a).sqrt(), b.sqrt()]
        }),
    );
    let sym = RealMatrix::from_fn(h.nrows(), h.nrows(), |r, c| {
        d_sqrt[r] * gram_inverse[(r, c)] * d_sqrt[c]
    });
    let radius = sym_eig(&((&sym + sym.transpose()) * 0.5))?.values[0];
    Ok(Feasibility {
        feasible: radius < 1.0 - FEASIBILITY_MARGIN,
        radius,
        williamson: w,
        gram_inverse,
    })
}

#[derive(Debug, Clone)]
pub struct QefValue {
    pub xi: f64,
    pub radius: f64,
    pub sigmas: Vec<f64>,
    /// `|Im det| / |det|` of the determinant formula.
    pub det_imag_rel: f64,
}

/// Evaluate the determinant formula from a feasibility result.
pub fn qef_from_feasibility(f: &Feasibility) -> Result<QefValue> {
    if !f.feasible {
        return Err(Error::Infeasible { radius: f.radius });
    }
    let modes = f.williamson.modes();
    let c = to_complex(&f.gram_inverse) + mode_j(modes).map(|x| Complex64::new(0.0, x));
    let phi = RealMatrix::from_fn(3 * modes, 2 * modes, |r, col| {
        let (blk, row) = (r / 3, r % 3);
        if col / 2 != blk {
            return 0.0;
        }
        match (row, col % 2) {
            (0, 0) | (1, 1) | (2, 0) => 1.0,
            _ => 0.0,
        }
    });
    let phi = to_complex(&phi);
    let psi: Vec<f64> = f
        .williamson
        .sigmas
        .iter()
        .flat_map(|&s| {
            let (a, b) = symplectic_scalars(s);
            [a, b, a]
        })
        .collect();
    let mut m = diamond(&(&phi * c * phi.transpose()));
    for (col, p) in psi.iter().enumerate() {
        m.column_mut(col).iter_mut().for_each(|x| *x *= -p);
    }
    for r in 0..3 * modes {
        m[(r, r)] += 1.0;
    }
    let det = m.determinant();
    let det_imag_rel = det.im.abs() / det.norm();
    if det_imag_rel > DET_IMAG_TOL || det.re <= 0.0 {
        return Err(Error::Tolerance {
            what: "imaginary part of QEF determinant",
            value: det_imag_rel,
            tolerance: DET_IMAG_TOL,
        });
    }
    Ok(QefValue {
        xi: 1.0 / det.re.sqrt(),
        radius: f.radius,
        sigmas: f.williamson.sigmas.clone(),
        det_imag_rel,
    })
}

/// `Ξ` for positive definite `H`, or `1` for `H = 0`.
pub fn qef_value(h: &RealMatrix) -> Result<f64> {
    if h.iter().all(|&x| x == 0.0) {
        crate::numlin::ensure_square(h)?;
        return Ok(1.0);
    }
    qef_from_feasibility(&qef_feasible(h)?).map(|v| v.xi)
}

/// `E Q = T·Tr(ΠΣ)` in the invariant state.
pub fn mean_q(kernel: &CovarianceKernel, pi: &RealMatrix, horizon: f64) -> Result<f64> {
    check_weight(pi, kernel.model().n())?;
    Ok(horizon * (pi * kernel.sigma()).trace())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeCount {
    /// Smallest `N` capturing this fraction of `Σ μ_k`.
    Auto {
        fraction: f64,
    },
    Fixed(usize),
}

impl Default for ModeCount {
    fn default() -> Self {
        ModeCount::Auto {
            fraction: DEFAULT_MASS_FRACTION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QefProblem {
    pub pi: RealMatrix,
    /// Modes requested before regularization.
    pub requested_modes: usize,
    /// Indices of the modes entering `H`.
    pub kept_modes: Vec<usize>,
    /// Modes removed because `H` was singular.
    pub dropped_modes: Vec<usize>,
    pub h: RealMatrix,
    pub sigmas: Vec<f64>,
    pub radius: f64,
    pub feasible: bool,
    /// `None` when infeasible.
    pub xi: Option<f64>,
    pub det_imag_rel: f64,
    /// `Σ_{k≥N} μ_k` plus the uncomputed residual.
    pub tail_mass: f64,
    pub grid_size: usize,
    pub mean_q: f64,
}

/// gram → H → Williamson → feasibility → Ξ. A singular `H` is regularized by
/// dropping modes in increasing order of `μ_k ‖G_kk‖` until the smallest
/// eigenvalue clears `SINGULAR_H_TOL · ‖H‖`. An infeasible problem is
/// returned with `feasible = false` and no value.
pub fn qef_pipeline(
    kernel: &CovarianceKernel,
    decomp: &KernelEigDecomposition,
    pi: &RealMatrix,
    modes: ModeCount,
) -> Result<QefProblem> {
    let requested = match modes {
        ModeCount::Auto { fraction } => decomp.modes_for_mass(fraction)?,
        ModeCount::Fixed(n) => n,
    };
    let g = gram_matrix(decomp, pi, requested)?;
    let mu = decomp.mu();
    let all: Vec<usize> = (0..requested).collect();
    check_psd(&scale_gram(&g, mu, &all))?;

    let mut order: Vec<usize> = all.clone();
    let weight = |k: usize| mu[k] * g.view((2 * k, 2 * k), (2, 2)).norm();
    order.sort_by(|&x, &y| weight(y).total_cmp(&weight(x)).then(x.cmp(&y)));
    let mut keep = order.len();
    let mut dropped = Vec::new();
    let h = loop {
        let mut kept: Vec<usize> = order[..keep].to_vec();
        kept.sort_unstable();
        let h = scale_gram(&g, mu, &kept);
        if keep == 0 {
            break h;
        }
        let min = *sym_eig(&h)?.values.last().unwrap();
        if min >= SINGULAR_H_TOL * h.norm() && min > 0.0 {
            break h;
        }
        keep -= 1;
        dropped.push(order[keep]);
    };
    let mut kept: Vec<usize> = order[..keep].to_vec();
    kept.sort_unstable();
    dropped.sort_unstable();

    let (sigmas, radius, feasible, xi, det_imag_rel) = if kept.is_empty() {
        (Vec::new(), 0.0, true, Some(1.0), 0.0)
    } else {
        let f = qef_feasible(&h)?;
        if f.feasible {
            let v = qef_from_feasibility(&f)?;
            (v.sigmas, v.radius, true, Some(v.xi), v.det_imag_rel)
        } else {
            (f.sigmas().to_vec(), f.radius, false, None, 0.0)
        }
    };
    Ok(QefProblem {
        pi: pi.clone(),
        requested_modes: requested,
        kept_modes: kept,
        dropped_modes: dropped,
        h,
        sigmas,
        radius,
        feasible,
        xi,
        det_imag_rel,
        tail_mass: decomp.ms_tail(requested)?,
        grid_size: decomp.grid().len(),
        mean_q: mean_q(
            kernel,
            pi,
            decomp.grid().interval().1 - decomp.grid().interval().0,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_h(c: f64) -> RealMatrix {
        RealMatrix::identity(2, 2) * c
    }

    #[test]
    fn diamond_definition() {
        let d = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            diamond(&d),
            RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])
        );
        let s = RealMatrix::from_row_slice(2, 2, &[1.0, 5.0, 5.0, 4.0]);
        assert_eq!(diamond(&s), s);
        let r = diamond(&RealMatrix::from_fn(5, 5, |i, j| (i * 7 + j * 3) as f64));
        assert_eq!(&r - r.transpose(), RealMatrix::zeros(5, 5));
    }

    #[test]
    fn scalar_feasibility() {
        let f = qef_feasible(&scalar_h(0.1)).unwrap();
        assert!(f.feasible);
        assert!((f.radius - 0.5 * 0.4f64.sinh()).abs() < 1e-12);
        assert!(!qef_feasible(&scalar_h(0.5)).unwrap().feasible);
        assert!(matches!(
            qef_value(&scalar_h(0.5)),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn scalar_value_and_slope() {
        assert!((qef_value(&scalar_h(0.1)).unwrap() - 0.2f64.exp()).abs() < 1e-12);
        let c = 1e-4;
        let slope = (qef_value(&scalar_h(c)).unwrap() - 1.0) / c;
        assert!((slope - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_h_gives_unit_value() {
        assert_eq!(qef_value(&RealMatrix::zeros(4, 4)).unwrap(), 1.0);
    }

    #[test]
    fn symplectic_scalars_at_zero() {
        assert_eq!(symplectic_scalars(0.0), (0.0, 0.0));
    }

    #[test]
    fn non_symmetric_weight_rejected() {
        let pi = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            check_weight(&pi, 2),
            Err(Error::NotSymmetric { .. })
        ));
        let neg = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            check_weight(&neg, 2),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }
}
