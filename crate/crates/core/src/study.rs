//! Empirical convergence order from step-size/error pairs.

use crate::error::{Error, Result};

/// Least-squares slope of `log e` against `log h`.
pub fn convergence_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidInput("need at least three (h, error) pairs".into()));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::InvalidInput("step sizes and errors must be positive and finite".into()));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("step sizes must not all be equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Ratios `e(h) / e(h/2)` for consecutive entries sorted by decreasing `h`.
pub fn halving_ratios(points: &[(f64, f64)]) -> Vec<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    sorted.windows(2).map(|w| w[0].1 / w[1].1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&h| (h, 3.0 * h * h * h)).collect();
        assert!((convergence_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        for r in halving_ratios(&pts) {
            assert!((r - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(convergence_slope(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(convergence_slope(&[(0.1, 1.0), (0.05, 0.0), (0.02, 0.1)]).is_err());
        assert!(convergence_slope(&[(0.1, 1.0), (0.1, 0.5), (0.1, 0.1)]).is_err());
    }
}
