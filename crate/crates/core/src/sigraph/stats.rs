use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pearson correlation coefficient of two equally long series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Domain(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    // relative to the magnitude so float noise around a constant still counts
    let flat = |s: f64, m: f64| s <= f64::EPSILON * f64::EPSILON * n * m * m;
    if sxx == 0.0 || flat(sxx, mx) {
        return Err(Error::DegenerateSeries("first"));
    }
    if syy == 0.0 || flat(syy, my) {
        return Err(Error::DegenerateSeries("second"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictLevel {
    None,
    Low,
    Medium,
    High,
}

/// Upper edges of the Low, Medium and High bands; a correlation below an
/// edge falls in that band or a stronger one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictThresholds {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for ConflictThresholds {
    fn default() -> Self {
        Self {
            low: -0.3,
            medium: -0.6,
            high: -0.85,
        }
    }
}

pub fn classify_conflict(rho: f64, t: &ConflictThresholds) -> ConflictLevel {
    if rho < t.high {
        ConflictLevel::High
    } else if rho < t.medium {
        ConflictLevel::Medium
    } else if rho < t.low {
        ConflictLevel::Low
    } else {
        ConflictLevel::None
    }
}

/// Significance levels with an embedded studentized-range table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Alpha {
    #[default]
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.01")]
    P01,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P01 => 0.01,
        }
    }

    pub fn from_value(alpha: f64) -> Result<Self> {
        if (alpha - 0.05).abs() < 1e-12 {
            Ok(Alpha::P05)
        } else if (alpha - 0.01).abs() < 1e-12 {
            Ok(Alpha::P01)
        } else {
            Err(Error::Domain(format!(
                "no studentized-range table for alpha {alpha}; use 0.05 or 0.01"
            )))
        }
    }
}

// Upper quantiles of the studentized range, rows df = 1..=20, 24, 30, 40,
// 60, 120, inf; columns k = 2..=10.
const DF_ROWS: [f64; 26] = [
    1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0,
    18.0, 19.0, 20.0, 24.0, 30.0, 40.0, 60.0, 120.0, f64::INFINITY,
];

const Q_05: [[f64; 9]; 26] = [
    [17.969, 26.976, 32.819, 37.082, 40.408, 43.119, 45.397, 47.357, 49.071],
    [6.085, 8.331, 9.798, 10.881, 11.734, 12.435, 13.027, 13.539, 13.988],
    [4.501, 5.910, 6.825, 7.502, 8.037, 8.478, 8.852, 9.177, 9.462],
    [3.926, 5.040, 5.757, 6.287, 6.706, 7.053, 7.347, 7.602, 7.826],
    [3.635, 4.602, 5.218, 5.673, 6.033, 6.330, 6.582, 6.801, 6.995],
    [3.460, 4.339, 4.896, 5.305, 5.628, 5.895, 6.122, 6.319, 6.493],
    [3.344, 4.165, 4.681, 5.060, 5.359, 5.606, 5.815, 5.997, 6.158],
    [3.261, 4.041, 4.529, 4.886, 5.167, 5.399, 5.596, 5.767, 5.918],
    [3.199, 3.948, 4.415, 4.755, 5.024, 5.244, 5.432, 5.595, 5.738],
    [3.151, 3.877, 4.327, 4.654, 4.912, 5.124, 5.304, 5.460, 5.598],
    [3.113, 3.820, 4.256, 4.574, 4.823, 5.028, 5.202, 5.353, 5.486],
    [3.081, 3.773, 4.199, 4.508, 4.750, 4.950, 5.119, 5.265, 5.395],
    [3.055, 3.734, 4.151, 4.453, 4.690, 4.884, 5.049, 5.192, 5.318],
    [3.033, 3.701, 4.111, 4.407, 4.639, 4.829, 4.990, 5.130, 5.253],
    [3.014, 3.673, 4.076, 4.367, 4.595, 4.782, 4.940, 5.077, 5.198],
    [2.998, 3.649, 4.046, 4.333, 4.557, 4.741, 4.896, 5.031, 5.150],
    [2.984, 3.628, 4.020, 4.303, 4.524, 4.705, 4.858, 4.991, 5.108],
    [2.971, 3.609, 3.997, 4.276, 4.494, 4.673, 4.824, 4.955, 5.071],
    [2.960, 3.593, 3.977, 4.253, 4.468, 4.645, 4.794, 4.924, 5.037],
    [2.950, 3.578, 3.958, 4.232, 4.445, 4.620, 4.768, 4.895, 5.008],
    [2.919, 3.532, 3.901, 4.166, 4.373, 4.541, 4.684, 4.807, 4.915],
    [2.888, 3.486, 3.845, 4.102, 4.301, 4.464, 4.601, 4.720, 4.824],
    [2.858, 3.442, 3.791, 4.039, 4.232, 4.388, 4.521, 4.634, 4.735],
    [2.829, 3.399, 3.737, 3.977, 4.163, 4.314, 4.441, 4.550, 4.646],
    [2.800, 3.356, 3.685, 3.917, 4.096, 4.241, 4.363, 4.468, 4.560],
    [2.772, 3.314, 3.633, 3.858, 4.030, 4.170, 4.286, 4.387, 4.474],
];
const Q_01: [[f64; 9]; 26] = [
    [90.024, 135.041, 164.258, 185.575, 202.210, 215.769, 227.166, 236.966, 245.542],
    [14.036, 19.019, 22.294, 24.717, 26.629, 28.201, 29.530, 30.679, 31.689],
    [8.260, 10.619, 12.170, 13.324, 14.241, 14.998, 15.641, 16.199, 16.691],
    [6.511, 8.120, 9.173, 9.958, 10.583, 11.101, 11.542, 11.925, 12.264],
    [5.702, 6.976, 7.804, 8.421, 8.913, 9.321, 9.669, 9.971, 10.239],
    [5.243, 6.331, 7.033, 7.556, 7.972, 8.318, 8.612, 8.869, 9.097],
    [4.949, 5.919, 6.542, 7.005, 7.373, 7.678, 7.939, 8.166, 8.367],
    [4.745, 5.635, 6.204, 6.625, 6.959, 7.237, 7.474, 7.680, 7.863],
    [4.596, 5.428, 5.957, 6.347, 6.657, 6.915, 7.134, 7.325, 7.494],
    [4.482, 5.270, 5.769, 6.136, 6.428, 6.669, 6.875, 7.054, 7.213],
    [4.392, 5.146, 5.621, 5.970, 6.247, 6.476, 6.671, 6.841, 6.992],
    [4.320, 5.046, 5.502, 5.836, 6.101, 6.320, 6.507, 6.670, 6.814],
    [4.260, 4.964, 5.404, 5.726, 5.981, 6.192, 6.372, 6.528, 6.666],
    [4.210, 4.895, 5.322, 5.634, 5.881, 6.085, 6.258, 6.409, 6.543],
    [4.167, 4.836, 5.252, 5.556, 5.796, 5.994, 6.162, 6.309, 6.438],
    [4.131, 4.786, 5.192, 5.489, 5.722, 5.915, 6.079, 6.222, 6.348],
    [4.099, 4.742, 5.140, 5.430, 5.659, 5.847, 6.007, 6.147, 6.270],
    [4.071, 4.703, 5.094, 5.379, 5.603, 5.787, 5.944, 6.081, 6.201],
    [4.046, 4.669, 5.054, 5.334, 5.553, 5.735, 5.889, 6.022, 6.141],
    [4.024, 4.639, 5.018, 5.293, 5.510, 5.688, 5.839, 5.970, 6.086],
    [3.955, 4.546, 4.907, 5.168, 5.373, 5.542, 5.685, 5.809, 5.919],
    [3.889, 4.455, 4.799, 5.048, 5.242, 5.401, 5.536, 5.653, 5.756],
    [3.825, 4.367, 4.695, 4.931, 5.114, 5.265, 5.392, 5.502, 5.599],
    [3.762, 4.282, 4.594, 4.818, 4.991, 5.133, 5.253, 5.356, 5.447],
    [3.702, 4.200, 4.497, 4.709, 4.872, 5.005, 5.118, 5.214, 5.299],
    [3.643, 4.120, 4.403, 4.603, 4.757, 4.882, 4.987, 5.078, 5.157],
];

/// Critical value `q(k, df)` of the studentized range at `alpha`. Between
/// tabulated df rows the value is interpolated linearly in `1/df`.
pub fn studentized_range_q(k: usize, df: f64, alpha: Alpha) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::Domain(format!("no studentized-range entry for {k} groups")));
    }
    if !(df >= 1.0) {
        return Err(Error::Domain(format!("studentized range needs df >= 1, got {df}")));
    }
    let table = match alpha {
        Alpha::P05 => &Q_05,
        Alpha::P01 => &Q_01,
    };
    let col = k - 2;
    let hi = DF_ROWS.partition_point(|&d| d < df);
    if DF_ROWS[hi] == df {
        return Ok(table[hi][col]);
    }
    let lo = hi - 1;
    let inv = |d: f64| if d.is_infinite() { 0.0 } else { 1.0 / d };
    let t = (inv(DF_ROWS[lo]) - inv(df)) / (inv(DF_ROWS[lo]) - inv(DF_ROWS[hi]));
    Ok(table[lo][col] + t * (table[hi][col] - table[lo][col]))
}

/// Outcome of comparing two groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsdResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub m_diff: f64,
    /// Studentized-range critical value.
    pub q: f64,
    /// Standard error of the difference.
    pub e_s: f64,
    pub q_th: f64,
    pub conflicting: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum()
}

/// Tukey's HSD for two groups: conflicting when the mean difference exceeds
/// `q(2, n_a + n_b - 2) * sqrt(var_pooled / n)`.
pub fn tukey_hsd(a: &[f64], b: &[f64], alpha: Alpha) -> Result<HsdResult> {
    let all = tukey_hsd_family(&[a, b], alpha)?;
    Ok(all[0].2)
}

/// All pairwise Tukey–Kramer comparisons within one family of groups, using
/// the family's pooled variance and `k` = number of groups. Returns
/// `(i, j, result)` for `i < j`.
pub fn tukey_hsd_family(groups: &[&[f64]], alpha: Alpha) -> Result<Vec<(usize, usize, HsdResult)>> {
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::GroupTooSmall { size: g.len() });
    }
    let k = groups.len();
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let df = (total - k) as f64;
    let mse = groups.iter().map(|g| sum_sq_dev(g)).sum::<f64>() / df;
    let q = studentized_range_q(k, df, alpha)?;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let (ni, nj) = (groups[i].len() as f64, groups[j].len() as f64);
            // equals sqrt(mse / n) for equal group sizes
            let e_s = (mse / 2.0 * (1.0 / ni + 1.0 / nj)).sqrt();
            let m_diff = (means[i] - means[j]).abs();
            let q_th = q * e_s;
            out.push((
                i,
                j,
                HsdResult {
                    mean_a: means[i],
                    mean_b: means[j],
                    m_diff,
                    q,
                    e_s,
                    q_th,
                    conflicting: m_diff > q_th,
                },
            ));
        }
    }
    Ok(out)
}
