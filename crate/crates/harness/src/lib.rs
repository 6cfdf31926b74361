//! Benchmarks and adversarial scenarios over `osd-core`.

pub mod attacks;
pub mod bench;
pub mod checks;
pub mod config;
pub mod fixture;
pub mod record;
pub mod stats;

pub use bench::{bench_all, bench_baseline_sd, bench_disclosure_scaling};
pub use config::BenchConfig;
pub use record::{read_csv, write_csv, Metric, StatRecord};
