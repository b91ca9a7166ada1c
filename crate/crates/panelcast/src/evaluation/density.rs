use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 0.04;

/// Gaussian kernel density of `ratios` evaluated at each grid point.
pub fn density_curve(ratios: &[f64], bandwidth: f64, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if ratios.len() < 2 {
        return Err(Error::Domain("density needs at least two values".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    let norm = 1.0 / (ratios.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            let s: f64 = ratios
                .iter()
                .map(|r| {
                    let z = (g - r) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (g, s * norm)
        })
        .collect())
}

/// Evenly spaced grid covering the data plus four bandwidths on each side.
pub fn default_grid(ratios: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * bandwidth;
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * bandwidth;
    let points = points.max(2);
    (0..points)
        .map(|j| lo + (hi - lo) * j as f64 / (points - 1) as f64)
        .collect()
}
