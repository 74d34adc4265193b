//! Least-squares helpers for the scaling benchmarks.

/// Slope of the least-squares line through `(ln x, ln y)`: the fitted
/// exponent of `y ~ x^e`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "need at least two points to fit");
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Relative residual of fitting `y = a + b sqrt(x)` by least squares.
pub fn sqrt_fit_relative_residual(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2);
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0.sqrt()).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0).sum(); // (sqrt x)^2
    let sxy: f64 = points.iter().map(|p| p.0.sqrt() * p.1).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    let mut worst: f64 = 0.0;
    for &(x, y) in points {
        let fitted = a + b * x.sqrt();
        worst = worst.max((fitted - y).abs() / y.max(1.0));
    }
    worst
}
