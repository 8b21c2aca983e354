//! One function per subcommand. Each writes its CSV tables and returns the
//! `results` object for the report, plus an optional failure that still
//! lets the report be written.

use qkl::fock_oracle::{default_levels, oracle_qef_h, MAX_MODES};
use qkl::kernel_eig::nystrom_eig;
use qkl::numlin::{eigenvalues, symmetry_residual};
use qkl::oqho::{complex_ale_solution, min_covariance_eigenvalue, recover_theta};
use qkl::qef::{qef_feasible, qef_from_feasibility, qef_pipeline, ModeCount, QefProblem};
use qkl::quadrature::Quadrature;
use qkl::response::SinusoidalResponse;
use qkl::{steady_covariance, RealMatrix, SinBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::output::{matrix, num, nums, OutputDir};
use crate::CliError;

pub struct Stage {
    pub results: Value,
    pub failure: Option<CliError>,
}

impl Stage {
    fn ok(results: Value) -> Self {
        Self {
            results,
            failure: None,
        }
    }
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn doubling(max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k < max)
        .collect();
    out.push(max);
    out
}

pub fn check_model(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let model = cfg.model.build()?;
    if cfg.pi.is_some() {
        cfg.weight(model.n())?;
    }
    let eig = eigenvalues(model.a())?;
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<Vec<String>> = eig
        .iter()
        .enumerate()
        .map(|(i, z)| vec![i.to_string(), f(z.re), f(z.im)])
        .collect();
    out.write_csv("drift_eigenvalues.csv", &["index", "re", "im"], &rows)?;

    let mut r = Map::new();
    r.insert("n".into(), json!(model.n()));
    r.insert("m".into(), json!(model.m()));
    r.insert("pr_residual".into(), num(model.pr_residual()));
    r.insert("spectral_abscissa".into(), num(abscissa));
    r.insert("hurwitz".into(), json!(model.is_hurwitz()));
    r.insert("A".into(), matrix(model.a()));
    r.insert("B".into(), matrix(model.b()));
    if let Err(e) = model.require_hurwitz() {
        return Ok(Stage {
            results: Value::Object(r),
            failure: Some(e.into()),
        });
    }
    let theta = recover_theta(model.a(), model.b(), model.j())?;
    r.insert(
        "theta_roundtrip_residual".into(),
        num((theta - model.theta()).norm()),
    );
    let kernel = steady_covariance(&model)?;
    let v = complex_ale_solution(&model)?;
    r.insert("sigma".into(), matrix(kernel.sigma()));
    r.insert("ale_residual".into(), num(kernel.ale_residual()));
    r.insert(
        "ale_imag_vs_theta".into(),
        num((v.map(|z| z.im) - model.theta()).norm()),
    );
    r.insert(
        "min_covariance_eigenvalue".into(),
        num(min_covariance_eigenvalue(&kernel)?),
    );
    Ok(Stage::ok(Value::Object(r)))
}

pub fn wiener_kl(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let basis = SinBasis::new(cfg.horizon, cfg.basis_k)?;
    let count = cfg.basis_k.min(64);
    let quad = Quadrature::resolving(0.0, cfg.horizon, 4.0 * basis.omega(count - 1), 8)?;
    let (gf, gg) = basis.gramians(count, &quad);
    let id = RealMatrix::identity(count, count);
    let mut rows = Vec::with_capacity(count * count);
    for j in 0..count {
        for k in 0..count {
            rows.push(vec![j.to_string(), k.to_string(), f(gf[(j, k)]), f(gg[(j, k)])]);
        }
    }
    out.write_csv("orthonormality.csv", &["j", "k", "gram_f", "gram_g"], &rows)?;

    let target = 0.5 * cfg.horizon * cfg.horizon;
    let mut rows = Vec::new();
    for k in doubling(cfg.basis_k) {
        let b = basis.with_order(k)?;
        let (lo, hi) = b.lambda_tail_bounds();
        let tail = target - b.lambda_sum();
        rows.push(vec![k.to_string(), f(b.lambda_sum()), f(tail), f(lo), f(hi)]);
    }
    out.write_csv(
        "mercer.csv",
        &["K", "lambda_sum", "tail", "tail_lower", "tail_upper"],
        &rows,
    )?;

    let grid = Quadrature::with_node_count(0.0, cfg.horizon, cfg.grid)?;
    let ccr_count = cfg.basis_k.min(8);
    let mut rows = Vec::new();
    let mut ccr_err: f64 = 0.0;
    for j in 0..ccr_count {
        for k in 0..ccr_count {
            let v = basis.ccr_double_integral(j, k, &grid);
            let expected = if j == k { 1.0 } else { 0.0 };
            ccr_err = ccr_err.max((v - expected).abs());
            rows.push(vec![j.to_string(), k.to_string(), f(v), f(expected)]);
        }
    }
    out.write_csv("ccr.csv", &["j", "k", "value", "expected"], &rows)?;

    let (lo, hi) = basis.lambda_tail_bounds();
    let tail = target - basis.lambda_sum();
    Ok(Stage::ok(json!({
        "gram_count": count,
        "gram_f_max_error": num((gf - &id).amax()),
        "gram_g_max_error": num((gg - &id).amax()),
        "lambda_sum": num(basis.lambda_sum()),
        "lambda_target": num(target),
        "mercer_tail": num(tail),
        "mercer_tail_bounds": nums(&[lo, hi]),
        "ccr_count": ccr_count,
        "ccr_grid": grid.len(),
        "ccr_max_error": num(ccr_err),
    })))
}

pub fn expm_fourier(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let model = cfg.model.build()?;
    let resp = SinusoidalResponse::new(&model, SinBasis::new(cfg.horizon, cfg.basis_k)?)?;
    let k_max = (8 * cfg.basis_k).max(20000);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for k in doubling(cfg.basis_k) {
        let l2 = resp.l2_truncation_error(k)?;
        let tail = resp.parseval_tail(k, k_max)?;
        worst = worst.max((l2 - tail).abs());
        rows.push(vec![k.to_string(), f(l2), f(tail), f((l2 - tail).abs())]);
    }
    out.write_csv(
        "expm_fourier.csv",
        &["K", "l2_error", "parseval_tail", "abs_difference"],
        &rows,
    )?;
    let mid = 0.5 * cfg.horizon;
    let exact = qkl::numlin::expm(model.a(), mid)?;
    Ok(Stage::ok(json!({
        "parseval_k_max": k_max,
        "max_parseval_mismatch": num(worst),
        "midpoint_error": num((resp.expm_fourier(mid)? - exact).norm()),
        "xi_tail_bound": num(resp.xi_tail_bound()?),
    })))
}

pub fn kernel_eig(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let model = cfg.model.build()?;
    let kernel = steady_covariance(&model)?;
    let d = nystrom_eig(&kernel, cfg.horizon, cfg.grid, None)?;
    let rows: Vec<Vec<String>> = d
        .spectrum_rows()
        .into_iter()
        .map(|(i, mu, frac)| vec![i.to_string(), f(mu), f(frac)])
        .collect();
    out.write_csv("spectrum.csv", &["index", "mu", "cumulative_fraction"], &rows)?;

    let g = d.grid().len();
    let mut mercer: f64 = 0.0;
    for node in [0, g / 7, g / 2, g - 1] {
        mercer = mercer.max((d.mercer_k(node, node, d.modes())? - kernel.v()).norm());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let thetas: Vec<f64> = (0..d.modes())
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let rotated = d.rotate_phases(&thetas);
    let n = model.n();
    let probe = RealMatrix::from_fn(n, g, |a, i| {
        let t = d.grid().nodes()[i] / cfg.horizon;
        ((a + 1) as f64 * 3.0 * t).sin() + 1.0 + t
    });
    let q0 = d.qcf_exponent(&probe)?;
    let q1 = rotated.qcf_exponent(&probe)?;
    let m0 = d.mercer_k(g / 3, g / 5, d.modes())?;
    let m1 = rotated.mercer_k(g / 3, g / 5, d.modes())?;
    let phase = ((q0 - q1).abs() / q0.abs().max(f64::MIN_POSITIVE))
        .max((&m0 - &m1).norm() / m0.norm().max(f64::MIN_POSITIVE));

    let mut mass = Map::new();
    for fraction in [0.9, 0.99, 0.999] {
        mass.insert(fraction.to_string(), json!(d.modes_for_mass(fraction)?));
    }
    let leading: Vec<f64> = d.mu().iter().take(16).copied().collect();
    Ok(Stage::ok(json!({
        "n": n,
        "grid": g,
        "modes": d.modes(),
        "mu_leading": nums(&leading),
        "operator_trace": num(d.operator_trace()),
        "nystrom_trace": num(d.nystrom_trace()),
        "mu_sum": num(d.mu_sum()),
        "trace_residual": num(d.trace_residual()),
        "trace_relative_residual": num(d.trace_residual() / d.operator_trace()),
        "clipped_mass": num(d.clipped_mass()),
        "hermitian_residual": num(d.hermitian_residual()),
        "mercer_v_max_error": num(mercer),
        "phase_invariance_defect": num(phase),
        "modes_for_mass": Value::Object(mass),
    })))
}

fn problem_json(p: &QefProblem) -> Value {
    json!({
        "requested_modes": p.requested_modes,
        "kept_modes": p.kept_modes,
        "dropped_modes": p.dropped_modes,
        "sigmas": nums(&p.sigmas),
        "feasibility_radius": num(p.radius),
        "feasible": p.feasible,
        "xi": p.xi.map_or(Value::Null, num),
        "ln_xi": p.xi.map_or(Value::Null, |x| num(x.ln())),
        "det_imag_relative": num(p.det_imag_rel),
        "tail_mass": num(p.tail_mass),
        "grid": p.grid_size,
        "mean_q": num(p.mean_q),
        "ln_xi_over_mean_q": p.xi.map_or(Value::Null, |x| num(x.ln() / p.mean_q)),
    })
}

pub fn qef(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let model = cfg.model.build()?;
    let pi = cfg.weight(model.n())?;
    let kernel = steady_covariance(&model)?;
    let d = nystrom_eig(&kernel, cfg.horizon, cfg.grid, None)?;
    let fin = qef_pipeline(&kernel, &d, &pi, cfg.mode_count()?)?;

    let mut rows = Vec::new();
    for n in doubling(fin.requested_modes) {
        let p = if n == fin.requested_modes {
            fin.clone()
        } else {
            qef_pipeline(&kernel, &d, &pi, ModeCount::Fixed(n))?
        };
        rows.push(vec![
            n.to_string(),
            p.xi.map_or(String::new(), f),
            f(p.tail_mass),
            f(p.radius),
            p.feasible.to_string(),
            p.kept_modes.len().to_string(),
        ]);
    }
    out.write_csv(
        "convergence.csv",
        &["N", "xi", "tail_mass", "radius", "feasible", "kept_modes"],
        &rows,
    )?;

    let failure = (!fin.feasible).then_some(CliError::Infeasible { radius: fin.radius });
    let mut results = problem_json(&fin);
    results["mu_leading"] = nums(&d.mu()[..d.mu().len().min(16)]);
    results["trace_relative_residual"] = num(d.trace_residual() / d.operator_trace());
    Ok(Stage { results, failure })
}

pub fn oracle_compare(cfg: &RunConfig, out: &mut OutputDir) -> Result<Stage, CliError> {
    let (h, source, extra) = match &cfg.oracle_h {
        Some(spec) => {
            let h = spec.to_matrix("H")?;
            if h.nrows() != h.ncols() || h.nrows() % 2 != 0 || h.nrows() == 0 {
                return Err(CliError::Config(format!(
                    "H must be a nonempty 2N×2N matrix, got {}x{}",
                    h.nrows(),
                    h.ncols()
                )));
            }
            if symmetry_residual(&h) > 1e-12 * h.norm().max(1.0) {
                return Err(CliError::Config("H must be symmetric".into()));
            }
            (h, "H", Value::Null)
        }
        None => {
            let model = cfg.model.build()?;
            let pi = cfg.weight(model.n())?;
            let modes = match cfg.mode_count()? {
                ModeCount::Fixed(n) => n,
                ModeCount::Auto { .. } => {
                    return Err(CliError::Config(
                        "oracle-compare needs an integer N (at most 3)".into(),
                    ))
                }
            };
            let kernel = steady_covariance(&model)?;
            let d = nystrom_eig(&kernel, cfg.horizon, cfg.grid, None)?;
            let p = qef_pipeline(&kernel, &d, &pi, ModeCount::Fixed(modes))?;
            let extra = problem_json(&p);
            (p.h, "pipeline", extra)
        }
    };
    let modes = h.nrows() / 2;
    if modes > MAX_MODES {
        return Err(CliError::Config(format!(
            "oracle-compare supports at most {MAX_MODES} modes, got {modes}"
        )));
    }
    let levels = cfg.fock_d.unwrap_or_else(|| default_levels(modes));

    let feas = qef_feasible(&h)?;
    let mut r = json!({
        "source": source,
        "modes": modes,
        "fock_d": levels,
        "H": matrix(&h),
        "sigmas": nums(feas.sigmas()),
        "feasibility_radius": num(feas.radius),
        "feasible": feas.feasible,
    });
    if !extra.is_null() {
        r["pipeline"] = extra;
    }
    if !feas.feasible {
        return Ok(Stage {
            results: r,
            failure: Some(CliError::Infeasible { radius: feas.radius }),
        });
    }
    let closed = qef_from_feasibility(&feas)?.xi;
    let oracle = oracle_qef_h(&h, levels)?;
    let delta = (closed - oracle.xi).abs();
    r["closed_form"] = num(closed);
    r["oracle"] = num(oracle.xi);
    r["abs_delta"] = num(delta);
    r["rel_delta"] = num(delta / oracle.xi);
    r["oracle_refinement_delta"] = num(oracle.refinement_delta);
    r["oracle_hermitian_residual"] = num(oracle.hermitian_residual);
    out.write_csv(
        "oracle_compare.csv",
        &["modes", "fock_d", "closed_form", "oracle", "abs_delta", "refinement_delta"],
        &[vec![
            modes.to_string(),
            levels.to_string(),
            f(closed),
            f(oracle.xi),
            f(delta),
            f(oracle.refinement_delta),
        ]],
    )?;
    Ok(Stage::ok(r))
}
