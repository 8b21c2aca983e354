//! Brute-force evaluation of `E exp(ζᵀHζ)` over vacuum modes on a truncated
//! Fock space.
//!
//! Each mode has `ξ = √2 q`, `η = √2 p` with `q = (a + a†)/√2`,
//! `p = (a − a†)/(i√2)`, truncated to `d` levels. The multi-mode space is a
//! Kronecker product with mode 0 as the slowest index, so the vacuum is basis
//! vector 0. `e^Q` is never formed: the vacuum expectation is read off a dense
//! Hermitian eigendecomposition of `Q`.
//!
//! Truncation only corrupts the top levels, which carry exponentially small
//! vacuum weight for small `H`; the reported refinement delta compares `d`
//! against `d − 8`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numlin::{herm_eig_tol, symmetry_residual, ComplexMatrix, RealMatrix};

pub const MIN_LEVELS: usize = 8;
pub const MAX_MODES: usize = 3;

/// Hermiticity tolerance on the assembled `Q`, relative to its norm.
pub const Q_HERMITIAN_TOL: f64 = 1e-9;

/// Relative refinement delta above which the truncation is deemed too small.
pub const REFINEMENT_TOL: f64 = 1e-3;

/// Default truncation for `modes` modes: 40, 24, 14 for 1, 2, 3 modes.
pub fn default_levels(modes: usize) -> usize {
    match modes {
        0 | 1 => 40,
        2 => 24,
        _ => 14,
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedMode {
    pub d: usize,
    pub q: ComplexMatrix,
    pub p: ComplexMatrix,
    pub xi: ComplexMatrix,
    pub eta: ComplexMatrix,
}

pub fn build_mode(d: usize) -> Result<TruncatedMode> {
    if d < MIN_LEVELS {
        return Err(Error::OutOfDomain {
            what: "Fock truncation d",
            value: d as f64,
            range: format!("[{MIN_LEVELS}, inf)"),
        });
    }
    Ok(mode_unchecked(d))
}

fn mode_unchecked(d: usize) -> TruncatedMode {
    let a = ComplexMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let ad = a.adjoint();
    let s = std::f64::consts::SQRT_2;
    let q = (&a + &ad).map(|z| z / s);
    let p = (&a - &ad).map(|z| z / Complex64::new(0.0, s));
    let xi = q.map(|z| z * s);
    let eta = p.map(|z| z * s);
    TruncatedMode { d, q, p, xi, eta }
}

impl TruncatedMode {
    /// `max |[q, p] − iI|` over rows and columns below `d − 1`.
    pub fn ccr_residual(&self) -> f64 {
        let c = &self.q * &self.p - &self.p * &self.q;
        let mut worst: f64 = 0.0;
        for r in 0..self.d - 1 {
            for k in 0..self.d - 1 {
                let target = if r == k {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((c[(r, k)] - target).norm());
            }
        }
        worst
    }

    /// `⟨0|op|0⟩`.
    pub fn vacuum(op: &ComplexMatrix) -> Complex64 {
        op[(0, 0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub xi: f64,
    /// `|Ξ(d) − Ξ(d − 8)|`.
    pub refinement_delta: f64,
    /// `‖Q − Q*‖ / ‖Q‖` before symmetrization.
    pub hermitian_residual: f64,
}

fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1, 1);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

// Q = Σ_rc H_rc Z_r Z_c, Z = (ξ_0, η_0, ξ_1, η_1, ...)
fn assemble_q(h: &RealMatrix, d: usize) -> ComplexMatrix {
    let modes = h.nrows() / 2;
    let mode = mode_unchecked(d);
    let ident = ComplexMatrix::identity(d, d);
    let ops = [&mode.xi, &mode.eta];
    let dim = d.pow(modes as u32);
    let mut q = ComplexMatrix::zeros(dim, dim);
    for r in 0..2 * modes {
        for c in 0..2 * modes {
            let coeff = h[(r, c)];
            if coeff == 0.0 {
                continue;
            }
            let (jr, jc) = (r / 2, c / 2);
            let same = ops[r % 2] * ops[c % 2];
            let factors: Vec<&ComplexMatrix> = (0..modes)
                .map(|k| {
                    if k == jr && k == jc {
                        &same
                    } else if k == jr {
                        ops[r % 2]
                    } else if k == jc {
                        ops[c % 2]
                    } else {
                        &ident
                    }
                })
                .collect();
            q += kron_all(&factors) * Complex64::from(coeff);
        }
    }
    q
}

fn vacuum_exponential(h: &RealMatrix, d: usize) -> Result<(f64, f64)> {
    let q = assemble_q(h, d);
    let scale = q.norm().max(f64::MIN_POSITIVE);
    let residual = (&q - q.adjoint()).norm() / scale;
    if residual > Q_HERMITIAN_TOL {
        return Err(Error::Tolerance {
            what: "Hermiticity of assembled Q",
            value: residual,
            tolerance: Q_HERMITIAN_TOL,
        });
    }
    let eig = herm_eig_tol(&q, Q_HERMITIAN_TOL)?;
    let value = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, w)| eig.vectors[(0, i)].norm_sqr() * w.exp())
        .sum();
    Ok((value, residual))
}

/// `⟨vac| exp(ζᵀHζ) |vac⟩` for a real symmetric `2N×2N` `H`, `N ≤ 3`.
pub fn oracle_qef_h(h: &RealMatrix, d: usize) -> Result<OracleResult> {
    if h.nrows() != h.ncols() || !h.nrows().is_multiple_of(2) {
        return Err(Error::OddDimension {
            what: "oracle H order",
            value: h.nrows(),
        });
    }
    let modes = h.nrows() / 2;
    if modes > MAX_MODES {
        return Err(Error::InvalidArgument(format!(
            "Fock oracle supports at most {MAX_MODES} modes, got {modes}"
        )));
    }
    build_mode(d)?;
    let residual = symmetry_residual(h);
    if residual > 1e-12 * h.norm().max(1.0) {
        return Err(Error::NotSymmetric {
            what: "oracle H",
            residual,
        });
    }
    if modes == 0 || h.iter().all(|&x| x == 0.0) {
        return Ok(OracleResult {
            xi: 1.0,
            refinement_delta: 0.0,
            hermitian_residual: 0.0,
        });
    }
    let (xi, hermitian_residual) = vacuum_exponential(h, d)?;
    let (coarse, _) = vacuum_exponential(h, (d - MIN_LEVELS).max(2))?;
    let refinement_delta = (xi - coarse).abs();
    if refinement_delta > REFINEMENT_TOL * xi {
        return Err(Error::Tolerance {
            what: "Fock truncation refinement delta",
            value: refinement_delta / xi,
            tolerance: REFINEMENT_TOL,
        });
    }
    Ok(OracleResult {
        xi,
        refinement_delta,
        hermitian_residual,
    })
}

/// Oracle from eigenvalues and Gram blocks: `H_jk = √(μ_j μ_k) G_jk`, `g`
/// holding all blocks as a `2N×2N` matrix.
pub fn oracle_qef(mu: &[f64], g: &RealMatrix, d: usize) -> Result<OracleResult> {
    let modes = mu.len();
    if g.nrows() != 2 * modes || g.ncols() != 2 * modes {
        return Err(Error::Dimension(format!(
            "Gram matrix is {}×{}, expected {}×{}",
            g.nrows(),
            g.ncols(),
            2 * modes,
            2 * modes
        )));
    }
    let h = RealMatrix::from_fn(2 * modes, 2 * modes, |r, c| {
        (mu[r / 2] * mu[c / 2]).sqrt() * g[(r, c)]
    });
    oracle_qef_h(&h, d)
}

/// `(⟨vac| Z_r Z_c |vac⟩)` over `Z = (ξ_0, η_0, …)`; equals `δ_jk (I₂ + iJ̄)` blockwise.
pub fn oracle_moments(modes: usize, d: usize) -> Result<ComplexMatrix> {
    if modes > MAX_MODES {
        return Err(Error::InvalidArgument(format!(
            "Fock oracle supports at most {MAX_MODES} modes, got {modes}"
        )));
    }
    let mode = build_mode(d)?;
    let ops = [&mode.xi, &mode.eta];
    let ident = ComplexMatrix::identity(d, d);
    let single = |r: usize| -> ComplexMatrix {
        let factors: Vec<&ComplexMatrix> = (0..modes)
            .map(|k| if k == r / 2 { ops[r % 2] } else { &ident })
            .collect();
        kron_all(&factors)
    };
    let z: Vec<ComplexMatrix> = (0..2 * modes).map(single).collect();
    Ok(ComplexMatrix::from_fn(2 * modes, 2 * modes, |r, c| {
        // ⟨0|Z_r Z_c|0⟩ = Σ_i (Z_r)_{0i} (Z_c)_{i0}
        z[r].row(0).iter().zip(z[c].column(0).iter()).map(|(a, b)| a * b).sum()
    }))
}

/// `⟨0|ξ⁴|0⟩` for one truncated mode.
pub fn vacuum_fourth_moment(d: usize) -> Result<f64> {
    let m = build_mode(d)?;
    let x2 = &m.xi * &m.xi;
    Ok(TruncatedMode::vacuum(&(&x2 * &x2)).re)
}
