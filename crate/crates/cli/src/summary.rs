//! Posterior summaries, kernel density curves and run comparison.

use serde::{Deserialize, Serialize};

pub const GRID_POINTS: usize = 256;
pub const QUANTILE_LEVELS: [f64; 7] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975];
/// Local maxima lower than this fraction of the peak are not reported as modes.
pub const MODE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub quantiles: Vec<Quantile>,
    pub bandwidth: f64,
    pub modes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_samples: usize,
    pub burn_in: f64,
    pub params: Vec<ParamSummary>,
}

/// Density on an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub name: String,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    pub fn step(&self) -> f64 {
        if self.x.len() < 2 {
            0.0
        } else {
            self.x[1] - self.x[0]
        }
    }

    /// Grid locations of local maxima above [`MODE_FLOOR`] of the peak.
    pub fn modes(&self) -> Vec<f64> {
        let peak = self.density.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Vec::new();
        }
        let d = &self.density;
        let n = d.len();
        (0..n)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { d[i - 1] };
                let right = if i + 1 == n { f64::NEG_INFINITY } else { d[i + 1] };
                d[i] >= MODE_FLOOR * peak && d[i] > left && d[i] >= right
            })
            .map(|i| self.x[i])
            .collect()
    }
}

/// Silverman's rule of thumb, `0.9 min(σ, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    if sorted.len() < 2 {
        return 0.0;
    }
    let mean = sorted.iter().sum::<f64>() / n;
    let std = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    0.9 * spread * n.powf(-0.2)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Gaussian kernel density of `samples` on `n` points spanning `[low, high]`.
/// With zero bandwidth (all samples equal) the mass sits in the nearest
/// grid cell.
pub fn kde(name: &str, samples: &[f64], low: f64, high: f64, n: usize) -> (DensityCurve, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = silverman_bandwidth(&sorted);
    let x: Vec<f64> = (0..n).map(|i| low + (high - low) * i as f64 / (n - 1) as f64).collect();
    let step = (high - low) / (n - 1) as f64;
    let m = sorted.len() as f64;
    let mut density = vec![0.0; n];
    if h > 0.0 {
        let norm = 1.0 / (m * h * (2.0 * std::f64::consts::PI).sqrt());
        for (xi, di) in x.iter().zip(density.iter_mut()) {
            let a = sorted.partition_point(|&s| s < xi - 8.0 * h);
            let b = sorted.partition_point(|&s| s <= xi + 8.0 * h);
            let s: f64 = sorted[a..b].iter().map(|&s| (-0.5 * ((xi - s) / h).powi(2)).exp()).sum();
            *di = s * norm;
        }
    } else if let Some(&c) = sorted.first() {
        let i = (((c - low) / step).round().max(0.0) as usize).min(n - 1);
        density[i] = 1.0 / step;
    }
    (DensityCurve { name: name.to_string(), x, density }, h)
}

/// Summary and density curve of every parameter. `ranges` sets each
/// density grid.
pub fn summarize_samples(
    names: &[String],
    samples: &[Vec<f64>],
    ranges: &[(f64, f64)],
    burn_in: f64,
) -> (PosteriorSummary, Vec<DensityCurve>) {
    let n = samples.len() as f64;
    let mut params = Vec::with_capacity(names.len());
    let mut curves = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let mut col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        col.sort_by(f64::total_cmp);
        let mean = col.iter().sum::<f64>() / n;
        let std =
            if col.len() > 1 { (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let quantiles =
            QUANTILE_LEVELS.iter().map(|&level| Quantile { level, value: quantile_sorted(&col, level) }).collect();
        let (curve, bandwidth) = kde(name, &col, ranges[k].0, ranges[k].1, GRID_POINTS);
        params.push(ParamSummary { name: name.clone(), mean, std, quantiles, bandwidth, modes: curve.modes() });
        curves.push(curve);
    }
    (PosteriorSummary { n_samples: samples.len(), burn_in, params }, curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamComparison {
    pub name: String,
    pub mean_delta: f64,
    pub std_delta: f64,
    /// `|Δmean| / std_a`.
    pub standardized_mean_delta: f64,
    /// `∫ min(p_a, p_b)`, 1 for identical densities and 0 for disjoint ones.
    pub density_overlap: f64,
}

/// Compares run `b` against run `a` parameter by parameter.
pub fn compare(
    a: &PosteriorSummary,
    da: &[DensityCurve],
    b: &PosteriorSummary,
    db: &[DensityCurve],
) -> Vec<ParamComparison> {
    a.params
        .iter()
        .zip(&b.params)
        .zip(da.iter().zip(db))
        .map(|((pa, pb), (ca, cb))| {
            // Each curve is renormalised on the grid so identical densities
            // overlap fully even when kernel mass spills past the range.
            let (ma, mb) = (ca.density.iter().sum::<f64>(), cb.density.iter().sum::<f64>());
            let overlap = if ca.x == cb.x && ma > 0.0 && mb > 0.0 {
                ca.density.iter().zip(&cb.density).map(|(p, q)| (p / ma).min(q / mb)).sum::<f64>()
            } else {
                f64::NAN
            };
            ParamComparison {
                name: pa.name.clone(),
                mean_delta: pb.mean - pa.mean,
                std_delta: pb.std - pa.std,
                standardized_mean_delta: (pb.mean - pa.mean).abs() / pa.std,
                density_overlap: overlap,
            }
        })
        .collect()
}
