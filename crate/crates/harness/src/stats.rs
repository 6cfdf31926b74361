//! Tail-trimmed summary statistics.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    /// Samples discarded from both tails.
    pub outliers: usize,
}

/// Samples dropped from each tail.
pub fn trim_count(len: usize, fraction: f64) -> usize {
    (len as f64 * fraction).floor() as usize
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    /// Panics on an empty sample or a fraction outside `[0, 0.5)`.
    pub fn trimmed(samples: &[f64], fraction: f64) -> Self {
        assert!(!samples.is_empty(), "empty sample");
        assert!((0.0..0.5).contains(&fraction), "trim fraction out of range");
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = trim_count(sorted.len(), fraction);
        let kept = &sorted[k..sorted.len() - k];
        Summary {
            mean: kept.iter().sum::<f64>() / kept.len() as f64,
            max: kept[kept.len() - 1],
            p25: quantile(kept, 0.25),
            p50: quantile(kept, 0.5),
            p75: quantile(kept, 0.75),
            outliers: 2 * k,
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<_> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    linear_fit(&logs).slope
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Fit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Fit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}
