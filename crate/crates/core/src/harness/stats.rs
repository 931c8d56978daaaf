use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// log y − fit, per point.
    pub residuals: Vec<f64>,
}

/// OLS of log y on log x.
pub fn regress_loglog(points: &[(f64, f64)]) -> Result<RegressionResult> {
    if points.len() < 3 {
        return Err(Error::Regression(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(Error::Regression(format!("nonpositive or non-finite point ({x}, {y})")));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Regression("all x equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - slope * x - intercept).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RegressionResult { slope, intercept, r_squared, residuals })
}

/// Log-spaced values from a to b inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0].iter().map(|&x| (x, x * x)).collect();
        let r = regress_loglog(&pts).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12 && (r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_quarter_power() {
        let xs = logspace(1e-6, 1e-1, 11);
        // deterministic ±1% perturbation
        let pts: Vec<(f64, f64)> = xs.iter().enumerate().map(|(i, &x)| (x, 3.0 * x.powf(0.25) * (1.0 + 0.01 * (i as f64 * 2.3).sin()))).collect();
        let r = regress_loglog(&pts).unwrap();
        assert!((r.slope - 0.25).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(regress_loglog(&[(1.0, 1.0), (2.0, 4.0)]).is_err());
        assert!(regress_loglog(&[(1.0, 1.0), (2.0, 0.0), (3.0, 9.0)]).is_err());
    }
}
