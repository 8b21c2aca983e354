//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::Instant;

use qkl::fock_oracle::{oracle_qef, oracle_qef_h};
use qkl::kernel_eig::nystrom_eig;
use qkl::oqho::{complex_ale_solution, recover_theta};
use qkl::qef::{
    assemble_h, gram_matrix, mean_q, qef_feasible, qef_pipeline, qef_value, ModeCount,
};
use qkl::quadrature::Quadrature;
use qkl::response::SinusoidalResponse;
use qkl::{steady_covariance, williamson, OqhoModel, RealMatrix, SinBasis};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn basis_suite() -> Outcome {
    let basis = SinBasis::new(1.0, 1000).map_err(err)?;
    // products of two basis functions up to index 63: resolve frequency 2ω_63
    let quad = Quadrature::resolving(0.0, 1.0, 4.0 * basis.omega(63), 8).map_err(err)?;
    let (gf, gg) = basis.gramians(64, &quad);
    let id = RealMatrix::identity(64, 64);
    let (ef, eg) = ((gf - &id).amax(), (gg - &id).amax());
    check(ef < 1e-10 && eg < 1e-10, format!("Gramian errors {ef:.2e}, {eg:.2e}"))?;

    let mercer = (basis.lambda_sum() - 0.5).abs();
    check(mercer < 5e-4, format!("Σλ_k misses T²/2 by {mercer:.2e}"))?;

    let grid = Quadrature::with_node_count(0.0, 1.0, 400).map_err(err)?;
    let mut worst: f64 = 0.0;
    for j in 0..6 {
        for k in 0..6 {
            let v = basis.ccr_double_integral(j, k, &grid);
            worst = worst.max((v - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    check(worst < 2e-6, format!("double-integral CCR error {worst:.2e}"))?;
    Ok(format!(
        "gram {:.1e}/{:.1e}, mercer {mercer:.1e}, ccr {worst:.1e}",
        ef, eg
    ))
}

fn model_suite() -> Outcome {
    let mut rng = common::rng(2024);
    let (mut pr, mut round, mut ale): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..50 {
        let n = [2, 4][i % 2];
        let m = [2, 4][(i / 2) % 2];
        let model = common::random_model(&mut rng, n, m);
        pr = pr.max(model.pr_residual());
        let theta = recover_theta(model.a(), model.b(), model.j()).map_err(err)?;
        round = round.max((theta - model.theta()).norm());
        let v = complex_ale_solution(&model).map_err(err)?;
        ale = ale.max((v.map(|z| z.im) - model.theta()).norm());
    }
    check(pr < 1e-12, format!("PR residual {pr:.2e}"))?;
    check(round < 1e-10, format!("Θ round-trip {round:.2e}"))?;
    check(ale < 1e-10, format!("Im of complex ALE vs Θ {ale:.2e}"))?;
    Ok(format!("pr {pr:.1e}, theta {round:.1e}, ale {ale:.1e}"))
}

fn response_suite() -> Outcome {
    let model = OqhoModel::canonical();
    let resp = SinusoidalResponse::new(&model, SinBasis::new(1.0, 64).map_err(err)?).map_err(err)?;

    let quad = Quadrature::composite(0.0, 1.0, 64, 16).map_err(err)?;
    let mut coeff_err: f64 = 0.0;
    for k in 0..=16 {
        let mut acc = RealMatrix::zeros(2, 2);
        for (t, w) in quad.nodes().iter().zip(quad.weights()) {
            let e = qkl::numlin::expm(model.a(), *t).map_err(err)? - RealMatrix::identity(2, 2);
            acc += e * (w * resp.basis().f(k, *t).map_err(err)?);
        }
        coeff_err = coeff_err.max((acc - resp.fourier_coeff(k)).amax());
    }
    check(coeff_err < 1e-8, format!("A_k vs quadrature {coeff_err:.2e}"))?;

    let mut parseval: f64 = 0.0;
    for terms in [8, 16, 32, 64] {
        let l2 = resp.l2_truncation_error(terms).map_err(err)?;
        let tail = resp.parseval_tail(terms, 20000).map_err(err)?;
        parseval = parseval.max((l2 - tail).abs());
    }
    check(parseval < 1e-8, format!("Parseval mismatch {parseval:.2e}"))?;

    let kernel = steady_covariance(&model).map_err(err)?;
    let target = kernel.k(0.2);
    let mut errors = Vec::new();
    for order in [64, 128, 256, 512] {
        let r = SinusoidalResponse::new(&model, SinBasis::new(1.0, order).map_err(err)?).map_err(err)?;
        let cov = r.representation_covariance(&kernel, 0.6, 0.4).map_err(err)?;
        errors.push((cov - &target).norm());
    }
    check(
        errors.windows(2).all(|w| w[1] < w[0]),
        format!("covariance error not decreasing: {errors:?}"),
    )?;
    check(errors[3] < 1e-2, format!("covariance error at K=512 {:.2e}", errors[3]))?;
    Ok(format!(
        "A_k {coeff_err:.1e}, parseval {parseval:.1e}, cov {:.2e}→{:.2e}",
        errors[0], errors[3]
    ))
}

fn kernel_suite() -> Outcome {
    let model = OqhoModel::canonical();
    let kernel = steady_covariance(&model).map_err(err)?;
    let d = nystrom_eig(&kernel, 1.0, 400, None).map_err(err)?;
    let trace = d.trace_residual() / d.operator_trace();
    check(trace < 1e-3, format!("trace identity residual {trace:.2e}"))?;

    let mut mercer: f64 = 0.0;
    for node in [0, 57, 200, 399] {
        mercer = mercer.max((d.mercer_k(node, node, d.modes()).map_err(err)? - kernel.v()).norm());
    }
    check(mercer < 1e-3, format!("Mercer reconstruction of V {mercer:.2e}"))?;

    let mut rng = common::rng(7);
    let thetas: Vec<f64> = (0..d.modes())
        .map(|_| rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU))
        .collect();
    let rotated = d.rotate_phases(&thetas);
    let f = RealMatrix::from_fn(2, 400, |a, i| {
        let t = d.grid().nodes()[i];
        if a == 0 { 1.0 + t } else { (3.0 * t).sin() }
    });
    let q0 = d.qcf_exponent(&f).map_err(err)?;
    let q1 = rotated.qcf_exponent(&f).map_err(err)?;
    let pi = RealMatrix::identity(2, 2) * 1e-3;
    let x0 = qef_pipeline(&kernel, &d, &pi, ModeCount::Fixed(12)).map_err(err)?.xi.unwrap();
    let x1 = qef_pipeline(&kernel, &rotated, &pi, ModeCount::Fixed(12)).map_err(err)?.xi.unwrap();
    let node = 123;
    let m0 = d.mercer_k(node, 77, d.modes()).map_err(err)?;
    let m1 = rotated.mercer_k(node, 77, d.modes()).map_err(err)?;
    let phase = ((q0 - q1).abs() / q0)
        .max((x0 - x1).abs() / x0)
        .max((&m0 - &m1).norm() / m0.norm());
    check(phase < 1e-9, format!("phase invariance defect {phase:.2e}"))?;
    Ok(format!("trace {trace:.1e}, mercer {mercer:.1e}, phase {phase:.1e}"))
}

fn oracle_suite() -> Outcome {
    let c = 0.1;
    let h1 = RealMatrix::identity(2, 2) * c;
    let closed = qef_value(&h1).map_err(err)?;
    let oracle1 = oracle_qef_h(&h1, 40).map_err(err)?.xi;
    let e1 = (closed - (2.0 * c).exp()).abs().max((oracle1 - (2.0 * c).exp()).abs());
    check(e1 < 1e-6, format!("single-mode error {e1:.2e}"))?;

    let model = OqhoModel::canonical();
    let kernel = steady_covariance(&model).map_err(err)?;
    let d = nystrom_eig(&kernel, 1.0, 400, None).map_err(err)?;
    let pi = RealMatrix::identity(2, 2) * 1e-3;
    let h2 = assemble_h(&d, &pi, 2).map_err(err)?;
    let xi = qef_value(&h2).map_err(err)?;
    let g = gram_matrix(&d, &pi, 2).map_err(err)?;
    let oracle2 = oracle_qef(&d.mu()[..2], &g, 24).map_err(err)?.xi;
    let e2 = (xi - oracle2).abs() / oracle2;
    check(e2 < 1e-3, format!("N=2 pipeline vs oracle {e2:.2e}"))?;

    let (mut lo, mut hi) = (0.3, 0.4);
    let feasible = |c: f64| -> Result<bool, String> {
        Ok(qef_feasible(&(RealMatrix::identity(2, 2) * c)).map_err(err)?.feasible)
    };
    check(feasible(lo)? && !feasible(hi)?, "boundary not bracketed".into())?;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let boundary = (0.5 * (lo + hi) - 2f64.asinh() / 4.0).abs();
    check(boundary < 1e-6, format!("feasibility boundary off by {boundary:.2e}"))?;
    Ok(format!("N=1 {e1:.1e}, N=2 {e2:.1e}, boundary {boundary:.1e}"))
}

fn asymptote_suite() -> Outcome {
    let model = OqhoModel::canonical();
    let kernel = steady_covariance(&model).map_err(err)?;
    let d = nystrom_eig(&kernel, 1.0, 400, None).map_err(err)?;
    let pi = RealMatrix::identity(2, 2) * 1e-4;
    let p = qef_pipeline(&kernel, &d, &pi, ModeCount::Auto { fraction: 0.99 }).map_err(err)?;
    let xi = p.xi.ok_or("infeasible")?;
    let ratio = xi.ln() / mean_q(&kernel, &pi, 1.0).map_err(err)?;
    check((ratio - 1.0).abs() < 0.02, format!("ln Ξ / E Q = {ratio:.5}"))?;
    Ok(format!("N = {}, ratio {ratio:.5}", p.requested_modes))
}

fn williamson_suite() -> Outcome {
    let mut rng = common::rng(99);
    let (mut sympl, mut diag, mut det): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..50 {
        let dim = 2 * (1 + i % 6);
        let h = common::random_pd(&mut rng, dim, 0.1);
        let w = williamson(&h).map_err(err)?;
        sympl = sympl.max(w.symplectic_residual());
        diag = diag.max(w.diagonal_residual(&h) / h.norm());
        let prod: f64 = w.sigmas.iter().map(|s| s * s).product();
        let det_h = h.determinant();
        det = det.max((prod - det_h).abs() / det_h);
    }
    check(sympl < 1e-10 && diag < 1e-10, format!("residuals {sympl:.2e}, {diag:.2e}"))?;
    check(det < 1e-8, format!("∏σ² vs det H {det:.2e}"))?;
    Ok(format!("symplectic {sympl:.1e}, diagonal {diag:.1e}, det {det:.1e}"))
}

fn main() {
    let suites: [(&str, fn() -> Outcome); 7] = [
        ("basis and Mercer", basis_suite),
        ("model", model_suite),
        ("sinusoidal response", response_suite),
        ("kernel eigen", kernel_suite),
        ("QEF vs Fock oracle", oracle_suite),
        ("small-weight asymptote", asymptote_suite),
        ("Williamson", williamson_suite),
    ];
    let mut failures = 0;
    for (i, (name, suite)) in suites.iter().enumerate() {
        let start = Instant::now();
        let outcome = suite();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name} ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
