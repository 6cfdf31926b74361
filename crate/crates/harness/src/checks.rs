//! Orderings and scaling shapes asserted over benchmark records.

use std::fmt;

use crate::record::{find, StatRecord};
use crate::stats::{linear_fit, loglog_slope};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn counts(records: &[StatRecord], phase: &str) -> Vec<usize> {
    let mut ns: Vec<usize> = records
        .iter()
        .filter(|r| r.phase == phase)
        .map(|r| r.n)
        .collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

/// `greater` exceeds `lesser` at every shared n at or above `min_n`.
fn ordering(
    records: &[StatRecord],
    name: &str,
    greater: &str,
    lesser: &str,
    min_n: usize,
) -> Check {
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in counts(records, greater).into_iter().filter(|&n| n >= min_n) {
        let (Some(g), Some(l)) = (find(records, greater, n), find(records, lesser, n)) else {
            continue;
        };
        checked += 1;
        if g.mean <= l.mean {
            failures.push(format!("n={n}: {:.0} <= {:.0}", g.mean, l.mean));
        }
    }
    let pass = checked > 0 && failures.is_empty();
    let detail = if failures.is_empty() {
        format!("{greater} > {lesser} at {checked} claim counts")
    } else {
        failures.join("; ")
    };
    Check {
        name: name.to_owned(),
        pass,
        detail,
    }
}

pub fn check_orderings(records: &[StatRecord], min_n: usize) -> Vec<Check> {
    vec![
        ordering(
            records,
            "verifier_compute_exceeds_holder",
            "oprf_verifier_compute",
            "oprf_holder_compute",
            min_n,
        ),
        ordering(records, "dvp_larger_than_vp", "dvp_size", "vp_size", min_n),
        ordering(
            records,
            "sd_request_smaller",
            "oprf_query_size",
            "sd_request_size",
            min_n,
        ),
        ordering(
            records,
            "sd_response_larger",
            "sd_response_size",
            "oprf_response_size",
            min_n,
        ),
    ]
}

/// Baseline exchange at least `ratio` times cheaper than the OPRF exchange.
pub fn check_baseline_ratio(records: &[StatRecord], min_n: usize, ratio: f64) -> Check {
    let mut worst = f64::INFINITY;
    for n in counts(records, "sd_request_time")
        .into_iter()
        .filter(|&n| n >= min_n)
    {
        let get = |p: &str| find(records, p, n).map(|r| r.mean);
        let (Some(a), Some(b), Some(c), Some(d)) = (
            get("oprf_verifier_compute"),
            get("oprf_holder_compute"),
            get("sd_request_time"),
            get("sd_response_time"),
        ) else {
            continue;
        };
        worst = worst.min((a + b) / (c + d));
    }
    Check {
        name: "baseline_much_faster".into(),
        pass: worst.is_finite() && worst > ratio,
        detail: format!("smallest oprf/baseline time ratio {worst:.1}"),
    }
}

fn slope_check(records: &[StatRecord], phase: &str, lo: f64, hi: f64) -> Check {
    let pts: Vec<_> = records
        .iter()
        .filter(|r| r.phase == phase)
        .map(|r| (r.n as f64, r.p50))
        .collect();
    let slope = if pts.len() >= 2 {
        loglog_slope(&pts)
    } else {
        f64::NAN
    };
    Check {
        name: format!("{phase}_linear"),
        pass: (lo..=hi).contains(&slope),
        detail: format!("log-log slope {slope:.3} over {} points", pts.len()),
    }
}

pub fn check_scaling(records: &[StatRecord]) -> Vec<Check> {
    vec![
        slope_check(records, "vp_create", 0.9, 1.1),
        slope_check(records, "dvp_encrypt", 0.9, 1.1),
    ]
}

/// Disclosure time affine in `N_o`, validation time flat.
pub fn check_disclosure_scaling(records: &[StatRecord]) -> Vec<Check> {
    let pts: Vec<_> = records
        .iter()
        .filter(|r| r.phase == "disclosure_compute")
        .map(|r| (r.n as f64, r.p50))
        .collect();
    let fit = linear_fit(&pts);
    let affine = Check {
        name: "disclosure_affine".into(),
        pass: pts.len() >= 3 && fit.r2 >= 0.99 && fit.slope > 0.0,
        detail: format!(
            "r2 {:.4}, {:.0} ns per claim, {:.0} ns fixed",
            fit.r2, fit.slope, fit.intercept
        ),
    };
    let validate: Vec<f64> = records
        .iter()
        .filter(|r| r.phase == "disclosure_validate")
        .map(|r| r.p50)
        .collect();
    let (min, max) = validate
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let flat = Check {
        name: "validation_flat".into(),
        pass: !validate.is_empty() && max <= 2.0 * min,
        detail: format!("validation max/min {:.2}", max / min),
    };
    let mut out = vec![affine, flat];
    if pts.iter().all(|p| p.0 > 0.0) {
        out.push(slope_check(records, "disclosure_compute", 0.9, 1.1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(phase: &str, n: usize, v: f64) -> StatRecord {
        let mut r = StatRecord::size(phase, n, 0);
        (r.mean, r.p50) = (v, v);
        r
    }

    #[test]
    fn ordering_reports_each_failure() {
        let recs = vec![
            rec("a", 8, 2.0),
            rec("b", 8, 1.0),
            rec("a", 16, 1.0),
            rec("b", 16, 3.0),
            rec("a", 4, 0.0),
        ];
        let c = ordering(&recs, "x", "a", "b", 8);
        assert!(!c.pass);
        assert!(c.detail.contains("n=16"));
        assert!(ordering(&recs, "x", "a", "b", 20).detail.contains("at 0"));
    }

    #[test]
    fn linear_shapes_pass() {
        let recs: Vec<_> = [2, 4, 8, 16]
            .iter()
            .map(|&n| rec("vp_create", n, 100.0 * n as f64))
            .collect();
        assert!(check_scaling(&recs)[0].pass);
        let quad: Vec<_> = [2, 4, 8, 16]
            .iter()
            .map(|&n| rec("vp_create", n, (n * n) as f64))
            .collect();
        assert!(!check_scaling(&quad)[0].pass);
    }
}
