//! Numeric test helpers shared by unit and integration tests.

/// Central finite-difference gradient of `f` at `params` (step 1e-6).
pub fn finite_diff<F: FnMut(&[f64]) -> f64>(params: &[f64], mut f: F) -> Vec<f64> {
    let h = 1e-6;
    let mut g = vec![0.0; params.len()];
    let mut p = params.to_vec();
    for i in 0..params.len() {
        let orig = p[i];
        p[i] = orig + h;
        let fp = f(&p);
        p[i] = orig - h;
        let fm = f(&p);
        p[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Largest element-wise relative error between two gradients, with an
/// absolute floor so near-zero entries compare sanely.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}
