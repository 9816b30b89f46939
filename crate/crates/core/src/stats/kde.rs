//! Gaussian kernel density estimation with local extremum detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 512;

/// A density evaluated on an ascending grid, with its interior extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeProfile {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub local_maxima: Vec<usize>,
    pub local_minima: Vec<usize>,
}

impl KdeProfile {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    pub fn maxima_locations(&self) -> Vec<f64> {
        self.local_maxima.iter().map(|&i| self.grid[i]).collect()
    }

    pub fn minima_locations(&self) -> Vec<f64> {
        self.local_minima.iter().map(|&i| self.grid[i]).collect()
    }
}

/// Silverman's rule `0.9 · min(σ, IQR / 1.34) · n^(−1/5)`.
///
/// When more than half of the sample sits on one value the IQR collapses to
/// zero; the spread term then falls back to σ alone.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Degenerate("KDE needs at least 2 values".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::UndefinedInput("non-finite value in KDE input".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] || sigma == 0.0 {
        return Err(Error::Degenerate("KDE input is constant".into()));
    }
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian KDE with Silverman bandwidth, evaluated on `grid_size` points
/// spanning `[min − 3h, max + 3h]`.
pub fn kde(values: &[f64], grid_size: usize) -> Result<KdeProfile> {
    if grid_size < 3 {
        return Err(Error::InvalidConfig("KDE grid needs at least 3 points".into()));
    }
    let h = silverman_bandwidth(values)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();

    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();

    let (local_maxima, local_minima) = extrema(&density);
    Ok(KdeProfile {
        grid,
        density,
        bandwidth: h,
        local_maxima,
        local_minima,
    })
}

/// Interior local extrema by strict comparison with the neighbors of each
/// run of equal values. A plateau reports its midpoint.
pub(crate) fn extrema(y: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut start = 0;
    while start < y.len() {
        let mut end = start;
        while end + 1 < y.len() && y[end + 1] == y[start] {
            end += 1;
        }
        if start > 0 && end + 1 < y.len() {
            let (left, right, v) = (y[start - 1], y[end + 1], y[start]);
            let mid = (start + end) / 2;
            if v > left && v > right {
                maxima.push(mid);
            } else if v < left && v < right {
                minima.push(mid);
            }
        }
        start = end + 1;
    }
    (maxima, minima)
}

/// True when the density has at least two local maxima.
pub fn is_multimodal(profile: &KdeProfile) -> bool {
    profile.local_maxima.len() >= 2
}
