mod common;

use qkl::kernel_eig::nystrom_eig;
use qkl::numlin::imag_part;
use qkl::{steady_covariance, OqhoModel, RealMatrix};

fn canonical(grid: usize) -> qkl::KernelEigDecomposition {
    let k = steady_covariance(&OqhoModel::canonical()).unwrap();
    nystrom_eig(&k, 1.0, grid, None).unwrap()
}

#[test]
fn leading_eigenvalue_stable_under_grid_refinement() {
    let (coarse, fine) = (canonical(200), canonical(400));
    let rel = (coarse.mu()[0] - fine.mu()[0]).abs() / fine.mu()[0];
    assert!(rel < 1e-4, "relative change {rel:.2e}");
}

#[test]
fn assembly_is_hermitian_and_clipping_is_negligible() {
    let mut rng = common::rng(3);
    let model = common::random_model(&mut rng, 4, 2);
    let k = steady_covariance(&model).unwrap();
    let d = nystrom_eig(&k, 1.5, 64, None).unwrap();
    assert!(d.hermitian_residual() < 1e-10);
    assert!(d.clipped_mass() < 1e-6 * d.mu_sum());
    assert!(d.mu().iter().all(|&m| m >= 0.0));
    assert!(d.mu().windows(2).all(|w| w[0] >= w[1]));
    assert!(d.trace_residual() < 1e-3 * d.operator_trace());
}

#[test]
fn truncated_decomposition_keeps_leading_modes() {
    let k = steady_covariance(&OqhoModel::canonical()).unwrap();
    let full = nystrom_eig(&k, 1.0, 64, None).unwrap();
    let part = nystrom_eig(&k, 1.0, 64, Some(10)).unwrap();
    assert_eq!(part.modes(), 10);
    assert_eq!(&full.mu()[..10], part.mu());
    // the uncomputed mass is picked up by the tail estimate
    assert!((part.ms_tail(10).unwrap() - full.ms_tail(10).unwrap()).abs() < 1e-10);
}

#[test]
fn mercer_imaginary_part_is_two_point_ccr() {
    let k = steady_covariance(&OqhoModel::canonical()).unwrap();
    let d = canonical(96);
    let nodes = d.grid().nodes();
    for (s, t) in [(10, 50), (80, 3), (40, 40)] {
        let m = d.mercer_k(s, t, d.modes()).unwrap();
        let lambda = k.lambda(nodes[s] - nodes[t]);
        assert!((imag_part(&m) - lambda).norm() < 1e-10);
    }
}

#[test]
fn off_grid_mercer_improves_with_refinement() {
    let k = steady_covariance(&OqhoModel::canonical()).unwrap();
    let err = |grid: usize| {
        let d = canonical(grid);
        (d.mercer_k_interpolated(0.3, 0.71, d.modes()).unwrap() - k.k(0.3 - 0.71)).norm()
    };
    let (a, b) = (err(32), err(128));
    assert!(b < a, "{a:.2e} {b:.2e}");
}

#[test]
fn qcf_two_evaluations_agree_for_constant_function() {
    let d = canonical(200);
    let f = RealMatrix::from_fn(2, 200, |a, _| if a == 0 { 1.0 } else { 0.0 });
    let eig = d.qcf_exponent(&f).unwrap();
    let direct = d.qcf_direct(&f).unwrap();
    assert!((eig - direct).abs() < 1e-6 * direct);
    // ½∬e^{-2|s-t|} ds dt on [0,1]²
    let exact = 0.5 * (1.0 - 0.5 * (1.0 - (-2.0f64).exp()));
    // continuous value: limited by the Nyström rule crossing the |s − t| kink
    assert!((eig - exact).abs() < 1e-4 * exact, "{eig} vs {exact}");
}

#[test]
fn projection_splits_into_real_and_imaginary_parts() {
    let d = canonical(64);
    let f = RealMatrix::from_fn(2, 64, |a, i| {
        let re = d.h()[(i * 2 + a, 0)].re;
        2.5 * re
    });
    let proj = d.project(&f).unwrap();
    let w = d.grid().weights();
    for k in 0..6 {
        let (mut phi, mut psi) = (0.0, 0.0);
        for i in 0..64 {
            for a in 0..2 {
                phi += w[i] * f[(a, i)] * d.h()[(i * 2 + a, k)].re;
                psi += w[i] * f[(a, i)] * d.h()[(i * 2 + a, k)].im;
            }
        }
        assert!((proj[k].norm_sqr() - (phi * phi + psi * psi)).abs() < 1e-12);
    }
}

#[test]
fn qcf_detects_aggressive_truncation() {
    let k = steady_covariance(&OqhoModel::canonical()).unwrap();
    let d = nystrom_eig(&k, 1.0, 64, Some(2)).unwrap();
    let f = RealMatrix::from_fn(2, 64, |_, i| (20.0 * d.grid().nodes()[i]).sin());
    assert!(matches!(d.qcf_exponent(&f), Err(qkl::Error::Tolerance { .. })));
}
