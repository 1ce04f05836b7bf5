use std::ffi::CString;

use ar_bridge_py::ar_bridge_module;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<R>(f: impl FnOnce(Python<'_>, &Bound<'_, PyDict>) -> R) -> R {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(ar_bridge_module);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("ar_bridge", py.import("ar_bridge").unwrap()).unwrap();
        f(py, &globals)
    })
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) -> PyResult<()> {
    py.run(&CString::new(code).unwrap(), Some(globals), None)
}

#[test]
fn selection_through_python() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
spec = ar_bridge.ProcessSpec.finite_ar([0.8, 0.64])
x = spec.simulate(1000, seed=5)
res = ar_bridge.select_order(x)
assert res.chosen["bic"] == 2, res.chosen
assert 0.0 <= res.pi <= 1.0
assert res.model("aic").order == res.chosen["aic"]
"#,
        )
        .unwrap();
    });
}

#[test]
fn errors_carry_codes() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
try:
    ar_bridge.ProcessSpec.finite_ar([1.5])
    raise AssertionError("accepted")
except ar_bridge.ArBridgeError as e:
    assert e.args[1] == "unstable"
    assert isinstance(e, ValueError)
try:
    ar_bridge.select_order([1.0, 2.0, 3.0], l_max=3)
    raise AssertionError("accepted")
except ar_bridge.ArBridgeError as e:
    assert e.args[1] == "insufficient_data", e.args
"#,
        )
        .unwrap();
    });
}

#[test]
fn thresholds_match_core() {
    let expected = ar_bridge::criteria::bic_significance_level(500).unwrap();
    with_module(|py, g| {
        g.set_item("expected", expected).unwrap();
        run(py, g, "assert ar_bridge.bic_significance_level(500) == expected").unwrap();
        run(py, g, "assert abs(ar_bridge.underfit_threshold(7, ar_bridge.bc_calibration_level(500, 7)) - 2 / 500) < 1e-12").unwrap();
    });
}
