use pyo3::prelude::*;

use livfuse::livfuse;

#[test]
fn module_imports_and_runs() {
    pyo3::append_to_inittab!(livfuse);
    Python::initialize();
    Python::attach(|py| {
        let m = py.import("livfuse").unwrap();

        let w: Vec<f64> = m.getattr("compute_weights").unwrap().call1((vec![0.9580, 0.9071],)).unwrap().extract().unwrap();
        assert!((w[0] - 0.513645).abs() < 1e-6 && (w[1] - 0.486355).abs() < 1e-6);

        let a = (vec!["x".to_string(), "y".to_string()], vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]]);
        let b = (vec!["y".to_string(), "x".to_string()], vec![vec![0.2, 0.2, 0.6], vec![0.5, 0.4, 0.1]]);
        let fused = m.getattr("fuse").unwrap().call1((vec![a, b], vec![0.5, 0.5])).unwrap();
        let classes: Vec<usize> = m.getattr("predict_class").unwrap().call1((fused.get_item(1).unwrap(),)).unwrap().extract().unwrap();
        assert_eq!(classes, vec![0, 2]);

        let bad = m.getattr("compute_weights").unwrap().call1((vec![1.5, 0.5],));
        assert!(bad.unwrap_err().is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
