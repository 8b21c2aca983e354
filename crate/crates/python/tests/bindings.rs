use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module(script: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "qkl").unwrap();
        qkl_py::qkl_module(&m).unwrap();
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("qkl", m).unwrap();
        let code = CString::new(script).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("script failed");
        }
    });
}

#[test]
fn canonical_model_round_trip() {
    with_module(
        r#"
m = qkl.OqhoModel.canonical()
assert m.n == 2 and m.m == 2
assert m.a == [[-2.0, 0.0], [0.0, -2.0]]
assert m.pr_residual() < 1e-12 and m.is_hurwitz()
k = m.steady_covariance()
re, im = k.v
assert re == [[1.0, 0.0], [0.0, 1.0]]
assert abs(im[0][1] - 1.0) < 1e-12
"#,
    );
}

#[test]
fn functional_and_oracle_agree() {
    with_module(
        r#"
import math
h = [[0.1, 0.0], [0.0, 0.1]]
assert abs(qkl.qef_value(h) - math.exp(0.2)) < 1e-12
xi, delta = qkl.oracle_qef(h)
assert abs(xi - math.exp(0.2)) < 1e-6
try:
    qkl.qef_value([[0.5, 0.0], [0.0, 0.5]])
    raise AssertionError("expected InfeasibleError")
except qkl.InfeasibleError:
    pass
try:
    qkl.OqhoModel.from_drift([[1.0, 0.0]], [[1.0]], [[0.0, 1.0], [-1.0, 0.0]])
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#,
    );
}

#[test]
fn pipeline_through_bindings() {
    with_module(
        r#"
import math
m = qkl.OqhoModel.canonical()
d = qkl.nystrom_eig(m, 1.0, 64)
assert abs(sum(d.mu) - 2.0) < 1e-3 * 2.0
r = qkl.qef(m, [[1e-3, 0.0], [0.0, 1e-3]], grid=64, n=4)
assert r["feasible"] and r["xi"] > 1.0
assert len(r["sigmas"]) == len(r["kept_modes"])
u, s = qkl.williamson([[2.0, 0.0], [0.0, 0.5]])
assert abs(s[0] - 1.0) < 1e-12
b = qkl.SinBasis(1.0, 8)
assert abs(b.eigenvalue(0) - 4.0 / math.pi ** 2) < 1e-12
"#,
    );
}
