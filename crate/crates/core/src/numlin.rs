//! Dense linear algebra kernels: matrix exponential, Lyapunov solver,
//! Hermitian eigendecomposition, spectral radius and Williamson's
//! symplectic diagonalization.
//!
//! Everything works on heap-allocated `nalgebra` matrices; the problem sizes
//! in this crate are small (system order n <= a few dozen, Nyström and Fock
//! matrices up to a few thousand).

use nalgebra::{Cholesky, DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

/// Real parts of all eigenvalues must lie below this for a matrix to count as Hurwitz.
pub const HURWITZ_MARGIN: f64 = -1e-9;

/// Default relative tolerance for Hermiticity checks in [`herm_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// The 2x2 symplectic unit `[[0, 1], [-1, 0]]`.
pub fn jbar() -> RealMatrix {
    RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// Field CCR matrix `J = jbar ⊗ I_{m/2}` (positions first, then momenta).
pub fn field_j(m: usize) -> Result<RealMatrix> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::OddDimension {
            what: "field dimension m",
            value: m,
        });
    }
    Ok(jbar().kronecker(&RealMatrix::identity(m / 2, m / 2)))
}

/// Mode-interleaved symplectic structure `J_N = I_N ⊗ jbar`.
pub fn mode_j(modes: usize) -> RealMatrix {
    RealMatrix::identity(modes, modes).kronecker(&jbar())
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|z| z.re)
}

pub fn imag_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|z| z.im)
}

/// `re + i im` for two real matrices of equal shape.
pub fn compose(re: &RealMatrix, im: &RealMatrix) -> ComplexMatrix {
    re.zip_map(im, Complex64::new)
}

pub(crate) fn ensure_square<T: nalgebra::Scalar>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Frobenius norm of `m - mᵀ`.
pub fn symmetry_residual(m: &RealMatrix) -> f64 {
    (m - m.transpose()).norm()
}

/// Frobenius norm of `m + mᵀ`.
pub fn antisymmetry_residual(m: &RealMatrix) -> f64 {
    (m + m.transpose()).norm()
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

// Higham (2005) thresholds on the 1-norm for diagonal Padé degrees 3, 5, 7, 9, 13.
const PADE_THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
    (13, 5.371920351148152),
];

fn pade_coefficients(m: usize) -> Vec<f64> {
    // b_j = (2m - j)! m! / ((2m)! j! (m - j)!)
    let fact = |k: usize| (1..=k).fold(1.0_f64, |acc, i| acc * i as f64);
    (0..=m)
        .map(|j| fact(2 * m - j) * fact(m) / (fact(2 * m) * fact(j) * fact(m - j)))
        .collect()
}

/// `e^{tM}` by scaling and squaring with a diagonal Padé approximant.
///
/// The Padé degree is 3, 5, 7, 9 or 13, chosen from the 1-norm of `tM`; when
/// degree 13 is used the argument is first scaled by `2^-s` so its 1-norm is
/// at most 5.37, which bounds the relative backward error by the unit
/// roundoff.
pub fn expm(m: &RealMatrix, t: f64) -> Result<RealMatrix> {
    let n = ensure_square(m)?;
    let a = m * t;
    let norm1 = a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);

    let (degree, squarings) = match PADE_THETA.iter().find(|(_, theta)| norm1 <= *theta) {
        Some(&(deg, _)) if deg < 13 => (deg, 0),
        _ => {
            let s = (norm1 / PADE_THETA[4].1).log2().ceil().max(0.0) as i32;
            (13, s)
        }
    };
    let a = a * 2f64.powi(-squarings);
    let b = pade_coefficients(degree);

    let id = RealMatrix::identity(n, n);
    let a2 = &a * &a;
    let mut power = id.clone();
    let mut odd = RealMatrix::zeros(n, n);
    let mut even = RealMatrix::zeros(n, n);
    for k in 0..=degree / 2 {
        even += &power * b[2 * k];
        if 2 * k < degree {
            odd += &power * b[2 * k + 1];
        }
        power = &power * &a2;
    }
    let u = &a * odd;
    let numer = &even + &u;
    let denom = even - u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::Singular("Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Eigenvalues, spectral radius, Hurwitz check
// ---------------------------------------------------------------------------

fn complex_schur(m: ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    Schur::try_new(m, f64::EPSILON, 0)
        .map(Schur::unpack)
        .ok_or(Error::NoConvergence("Schur decomposition"))
}

/// All eigenvalues of a complex square matrix, from its complex Schur form.
pub fn eigenvalues_complex(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = complex_schur(m.clone())?;
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn eigenvalues(m: &RealMatrix) -> Result<Vec<Complex64>> {
    eigenvalues_complex(&to_complex(m))
}

pub fn spectral_radius(m: &RealMatrix) -> Result<f64> {
    spectral_radius_complex(&to_complex(m))
}

pub fn spectral_radius_complex(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues_complex(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

fn rightmost(eigs: &[Complex64]) -> Option<Complex64> {
    eigs.iter().copied().max_by(|a, b| a.re.total_cmp(&b.re))
}

fn check_hurwitz_eigs(eigs: &[Complex64]) -> Result<()> {
    match rightmost(eigs) {
        Some(ev) if ev.re >= HURWITZ_MARGIN => Err(Error::NotHurwitz { eigenvalue: ev }),
        _ => Ok(()),
    }
}

/// Fails with the rightmost eigenvalue unless every eigenvalue has real part below -1e-9.
pub fn check_hurwitz(a: &RealMatrix) -> Result<()> {
    check_hurwitz_eigs(&eigenvalues(a)?)
}

// ---------------------------------------------------------------------------
// Lyapunov equation
// ---------------------------------------------------------------------------

/// Solves `T Y + Y T^H + F = 0` for upper-triangular `T`, row by row from the bottom.
fn solve_triangular_lyapunov(t: &ComplexMatrix, f: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = t.nrows();
    let mut y = ComplexMatrix::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut rhs = -f[(i, j)];
            for k in i + 1..n {
                rhs -= t[(i, k)] * y[(k, j)];
            }
            for l in j + 1..n {
                rhs -= y[(i, l)] * t[(j, l)].conj();
            }
            let denom = t[(i, i)] + t[(j, j)].conj();
            if denom.norm() == 0.0 {
                return Err(Error::Singular("Lyapunov operator"));
            }
            y[(i, j)] = rhs / denom;
        }
    }
    Ok(y)
}

struct LyapunovSolver {
    q: ComplexMatrix,
    t: ComplexMatrix,
}

impl LyapunovSolver {
    fn new(a: &RealMatrix) -> Result<Self> {
        ensure_square(a)?;
        let (q, t) = complex_schur(to_complex(a))?;
        let eigs: Vec<_> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
        check_hurwitz_eigs(&eigs)?;
        Ok(Self { q, t })
    }

    fn solve(&self, rhs: &RealMatrix) -> Result<RealMatrix> {
        if rhs.shape() != self.q.shape() {
            return Err(Error::Dimension(format!(
                "Lyapunov right-hand side is {}x{}, expected {}x{}",
                rhs.nrows(),
                rhs.ncols(),
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        let qh = self.q.adjoint();
        let f = &qh * to_complex(rhs) * &self.q;
        let y = solve_triangular_lyapunov(&self.t, &f)?;
        Ok(real_part(&(&self.q * y * qh)))
    }
}

/// Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A` (complex Schur, Bartels–Stewart).
pub fn lyap(a: &RealMatrix, q: &RealMatrix) -> Result<RealMatrix> {
    LyapunovSolver::new(a)?.solve(q)
}

/// Complex right-hand side; real and imaginary parts are solved separately.
pub fn lyap_complex(a: &RealMatrix, q: &ComplexMatrix) -> Result<ComplexMatrix> {
    let solver = LyapunovSolver::new(a)?;
    let re = solver.solve(&real_part(q))?;
    let im = solver.solve(&imag_part(q))?;
    Ok(compose(&re, &im))
}

pub fn lyap_residual(a: &RealMatrix, x: &RealMatrix, q: &RealMatrix) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}

// ---------------------------------------------------------------------------
// Symmetric / Hermitian eigendecomposition
// ---------------------------------------------------------------------------

/// Eigenpairs in descending eigenvalue order; `vectors` holds them column-wise.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: nalgebra::Scalar> {
    pub values: Vec<f64>,
    pub vectors: DMatrix<T>,
}

fn sort_descending<T: nalgebra::Scalar>(values: &[f64], vectors: &DMatrix<T>) -> HermitianEigen<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    HermitianEigen {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: vectors.select_columns(&order),
    }
}

/// Hermitian eigendecomposition with a relative Hermiticity tolerance on `‖M − M*‖_F / ‖M‖_F`.
pub fn herm_eig_tol(m: &ComplexMatrix, tol: f64) -> Result<HermitianEigen<Complex64>> {
    ensure_square(m)?;
    let residual = (m - m.adjoint()).norm();
    if residual > tol * m.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { residual });
    }
    let dim = m.nrows();
    // faer's self-adjoint solver is much faster than nalgebra's at Fock-oracle sizes
    let sym = faer::Mat::<Complex64>::from_fn(dim, dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NoConvergence("Hermitian eigendecomposition"))?;
    let (vals, vecs) = (eig.S().column_vector(), eig.U());
    let values: Vec<f64> = (0..dim).map(|i| vals[i].re).collect();
    let vectors = DMatrix::from_fn(dim, dim, |i, j| vecs[(i, j)]);
    Ok(sort_descending(&values, &vectors))
}

/// `M = V diag(λ) V*` with λ descending.
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermitianEigen<Complex64>> {
    herm_eig_tol(m, HERMITIAN_TOL)
}

/// Real symmetric eigendecomposition, eigenvalues descending.
pub fn sym_eig(m: &RealMatrix) -> Result<HermitianEigen<f64>> {
    ensure_square(m)?;
    let residual = symmetry_residual(m);
    if residual > HERMITIAN_TOL * m.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric {
            what: "matrix",
            residual,
        });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or(Error::NoConvergence("symmetric eigendecomposition"))?;
    Ok(sort_descending(
        eig.eigenvalues.as_slice(),
        &eig.eigenvectors,
    ))
}

// ---------------------------------------------------------------------------
// Williamson symplectic diagonalization
// ---------------------------------------------------------------------------

/// `Uᵀ H U = diag(σ) ⊗ I₂` with `U J_N Uᵀ = J_N`, `J_N = I_N ⊗ jbar`.
#[derive(Debug, Clone)]
pub struct WilliamsonFactorization {
    pub u: RealMatrix,
    /// Symplectic eigenvalues, descending.
    pub sigmas: Vec<f64>,
}

impl WilliamsonFactorization {
    pub fn modes(&self) -> usize {
        self.sigmas.len()
    }

    /// `diag(σ) ⊗ I₂`.
    pub fn diagonal(&self) -> RealMatrix {
        let s = RealMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.sigmas));
        s.kronecker(&RealMatrix::identity(2, 2))
    }

    /// `‖U J_N Uᵀ − J_N‖_F`.
    pub fn symplectic_residual(&self) -> f64 {
        let j = mode_j(self.modes());
        (&self.u * &j * self.u.transpose() - j).norm()
    }

    /// `‖Uᵀ H U − diag(σ) ⊗ I₂‖_F`.
    pub fn diagonal_residual(&self, h: &RealMatrix) -> f64 {
        (self.u.transpose() * h * &self.u - self.diagonal()).norm()
    }
}

pub fn williamson(h: &RealMatrix) -> Result<WilliamsonFactorization> {
    let dim = ensure_square(h)?;
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::OddDimension {
            what: "Williamson matrix order",
            value: dim,
        });
    }
    let residual = symmetry_residual(h);
    if residual > 1e-12 * h.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric {
            what: "Williamson matrix",
            residual,
        });
    }
    let h = (h + h.transpose()) * 0.5;
    if Cholesky::new(h.clone()).is_none() {
        return Err(Error::NotPositiveDefinite("Williamson matrix"));
    }
    let modes = dim / 2;

    let eig = sym_eig(&h)?;
    if eig.values.last().is_some_and(|&v| v <= 0.0) {
        return Err(Error::NotPositiveDefinite("Williamson matrix"));
    }
    let q = &eig.vectors;
    let sqrt_diag = nalgebra::DVector::from_iterator(dim, eig.values.iter().map(|v| v.sqrt()));
    let h_half = q * RealMatrix::from_diagonal(&sqrt_diag) * q.transpose();
    let h_neg_half = q * RealMatrix::from_diagonal(&sqrt_diag.map(|v| 1.0 / v)) * q.transpose();

    // K = H^{1/2} J_N H^{1/2} is skew-symmetric; iK is Hermitian with spectrum ±σ_k.
    let k = &h_half * mode_j(modes) * &h_half;
    let ik = k.map(|x| Complex64::new(0.0, x));
    let ik_eig = herm_eig(&ik)?;

    // For iK v = σ v with v = x + iy: K x = σ y and K y = -σ x, so the real pair
    // (√2 y, √2 x) spans an invariant plane on which K acts as σ·jbar.
    let mut o = RealMatrix::zeros(dim, dim);
    let mut sigmas = Vec::with_capacity(modes);
    for b in 0..modes {
        let sigma = ik_eig.values[b];
        if sigma <= 0.0 {
            return Err(Error::NotPositiveDefinite("Williamson matrix"));
        }
        let v = ik_eig.vectors.column(b);
        for r in 0..dim {
            o[(r, 2 * b)] = std::f64::consts::SQRT_2 * v[r].im;
            o[(r, 2 * b + 1)] = std::f64::consts::SQRT_2 * v[r].re;
        }
        sigmas.push(sigma);
    }
    let scale = nalgebra::DVector::from_iterator(
        dim,
        sigmas.iter().flat_map(|s| {
            let r = s.sqrt();
            [r, r]
        }),
    );
    let u = h_neg_half * o * RealMatrix::from_diagonal(&scale);
    Ok(WilliamsonFactorization { u, sigmas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pade_coefficients_match_higham_ratios() {
        // b_{12}/b_{13} = 182 in Higham's integer normalisation.
        let b = pade_coefficients(13);
        assert!(close(b[12] / b[13], 182.0, 1e-9));
        assert!(close(b[0] / b[13], 64764752532480000.0, 1e3));
        assert!(close(b[0], 1.0, 0.0));
    }

    #[test]
    fn expm_identity_and_diagonal() {
        let z = RealMatrix::zeros(2, 2);
        assert_eq!(expm(&z, 1.0).unwrap(), RealMatrix::identity(2, 2));
        let d = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let e = expm(&d, 1.0).unwrap();
        assert!(close(e[(0, 0)], (-1.0f64).exp(), 1e-15));
        assert!(close(e[(1, 1)], (-2.0f64).exp(), 1e-15));
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let d = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 5.0]));
        let e = expm(&d, 1.0).unwrap();
        assert!(((e[(0, 0)] - (-30.0f64).exp()) / (-30.0f64).exp()).abs() < 1e-12);
        assert!(((e[(1, 1)] - 5.0f64.exp()) / 5.0f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn expm_rejects_rectangular() {
        assert!(matches!(
            expm(&RealMatrix::zeros(2, 3), 1.0),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn lyap_scalar_balance() {
        let a = -RealMatrix::identity(2, 2);
        let x = lyap(&a, &(RealMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!((x - RealMatrix::identity(2, 2)).norm() < 1e-14);
        let a = RealMatrix::identity(2, 2) * -0.5;
        let x = lyap(&a, &RealMatrix::identity(2, 2)).unwrap();
        assert!((x - RealMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn lyap_names_offending_eigenvalue() {
        let a = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.25]));
        match lyap(&a, &RealMatrix::identity(2, 2)) {
            Err(Error::NotHurwitz { eigenvalue }) => assert!(close(eigenvalue.re, 0.25, 1e-14)),
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
    }

    #[test]
    fn lyap_complex_splits_parts() {
        let a = RealMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.2, -2.0]);
        let q = compose(&RealMatrix::identity(2, 2), &jbar());
        let x = lyap_complex(&a, &q).unwrap();
        let re = lyap(&a, &RealMatrix::identity(2, 2)).unwrap();
        let im = lyap(&a, &jbar()).unwrap();
        assert!((real_part(&x) - re).norm() < 1e-15);
        assert!((imag_part(&x) - im).norm() < 1e-15);
    }

    #[test]
    fn spectral_radius_examples() {
        assert!(close(
            spectral_radius(&RealMatrix::identity(3, 3)).unwrap(),
            1.0,
            1e-14
        ));
        assert!(close(spectral_radius(&jbar()).unwrap(), 1.0, 1e-14));
        let d = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -0.7]));
        assert!(close(spectral_radius(&d).unwrap(), 0.7, 1e-14));
    }

    #[test]
    fn herm_eig_small_cases() {
        let d = to_complex(&RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            vec![1.0, 2.0, 3.0],
        )));
        let e = herm_eig(&d).unwrap();
        assert!(close(e.values[0], 3.0, 1e-14) && close(e.values[2], 1.0, 1e-14));

        let i = Complex64::i();
        let y = ComplexMatrix::from_row_slice(2, 2, &[0.0.into(), -i, i, 0.0.into()]);
        let e = herm_eig(&y).unwrap();
        assert!(close(e.values[0], 1.0, 1e-14) && close(e.values[1], -1.0, 1e-14));
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let m = to_complex(&RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn williamson_scalar_and_single_mode() {
        let c = 0.7;
        let w = williamson(&(RealMatrix::identity(2, 2) * c)).unwrap();
        assert!(close(w.sigmas[0], c, 1e-14));
        assert!((w.u.transpose() * &w.u - RealMatrix::identity(2, 2)).norm() < 1e-13);

        let h = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        let w = williamson(&h).unwrap();
        assert!(close(w.sigmas[0], 1.0, 1e-14));
        assert!(w.symplectic_residual() < 1e-14);
        assert!(w.diagonal_residual(&h) < 1e-14);
    }

    #[test]
    fn williamson_rejects_indefinite() {
        let h = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(williamson(&h), Err(Error::NotPositiveDefinite(_))));
        assert!(matches!(
            williamson(&RealMatrix::identity(3, 3)),
            Err(Error::OddDimension { .. })
        ));
    }

    #[test]
    fn field_j_block_layout() {
        let j = field_j(4).unwrap();
        assert_eq!(j[(0, 2)], 1.0);
        assert_eq!(j[(2, 0)], -1.0);
        assert!((&j * &j + RealMatrix::identity(4, 4)).norm() == 0.0);
        assert!(field_j(3).is_err());
    }
}
