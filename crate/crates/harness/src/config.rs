use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("trim fraction must be below 0.5")]
    TrimFraction,
    #[error("at least 10 repetitions are required")]
    Repetitions,
    #[error("claim counts must be non-empty and positive")]
    ClaimCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub claim_counts: Vec<usize>,
    pub repetitions: usize,
    /// Dropped from each tail.
    pub trim_fraction: f64,
    pub claim_value_bytes: usize,
    pub seed: u64,
}

fn powers_of_two(max: usize) -> Vec<usize> {
    (1..)
        .map(|k| 1usize << k)
        .take_while(|&n| n <= max)
        .collect()
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl BenchConfig {
    /// n = 2..1024, 1000 repetitions.
    pub fn full() -> Self {
        Self {
            claim_counts: powers_of_two(1024),
            repetitions: 1000,
            trim_fraction: 0.01,
            claim_value_bytes: 30,
            seed: 1,
        }
    }

    /// n = 2..128, 100 repetitions.
    pub fn desk() -> Self {
        Self {
            claim_counts: powers_of_two(128),
            repetitions: 100,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(ConfigError::TrimFraction);
        }
        if self.repetitions < 10 {
            return Err(ConfigError::Repetitions);
        }
        if self.claim_counts.is_empty() || self.claim_counts.contains(&0) {
            return Err(ConfigError::ClaimCounts);
        }
        Ok(())
    }
}
