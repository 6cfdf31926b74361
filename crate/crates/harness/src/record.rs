use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Wall time in nanoseconds.
    Ns,
    Bytes,
}

/// One CSV row: `phase,n,metric,mean,max,p25,p50,p75,outliers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub phase: String,
    pub n: usize,
    pub metric: Metric,
    pub mean: f64,
    pub max: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub outliers: usize,
}

impl StatRecord {
    pub fn from_summary(phase: &str, n: usize, metric: Metric, s: Summary) -> Self {
        Self {
            phase: phase.to_owned(),
            n,
            metric,
            mean: s.mean,
            max: s.max,
            p25: s.p25,
            p50: s.p50,
            p75: s.p75,
            outliers: s.outliers,
        }
    }

    /// A deterministic size: every statistic equals `bytes`.
    pub fn size(phase: &str, n: usize, bytes: usize) -> Self {
        let b = bytes as f64;
        Self {
            phase: phase.to_owned(),
            n,
            metric: Metric::Bytes,
            mean: b,
            max: b,
            p25: b,
            p50: b,
            p75: b,
            outliers: 0,
        }
    }
}

pub fn write_csv<W: Write>(records: &[StatRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<StatRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Looks up `(phase, n)`.
pub fn find<'a>(records: &'a [StatRecord], phase: &str, n: usize) -> Option<&'a StatRecord> {
    records.iter().find(|r| r.phase == phase && r.n == n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_lossless() {
        let s = Summary::trimmed(&[1.0, 2.5, 1e-7, 123456789.125], 0.01);
        let recs = vec![
            StatRecord::from_summary("vp_create", 8, Metric::Ns, s),
            StatRecord::size("vp_size", 8, 1234),
        ];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("phase,n,metric,mean,max,p25,p50,p75,outliers\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), recs);
    }
}
