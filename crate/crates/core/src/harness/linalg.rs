use nalgebra::{DMatrix, DVector};

/// Largest singular value, by power iteration on `mᵀm`.
///
/// The start vector is fixed, so the result is deterministic.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let scale = gram.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let gram = gram / scale;
    // slightly tilted all-ones start, unlikely to be orthogonal to the top vector
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    x.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let y = &gram * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            break;
        }
        x = y / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    (lambda.max(0.0) * scale).sqrt()
}
