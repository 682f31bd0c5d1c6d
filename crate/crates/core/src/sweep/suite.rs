//! Workload suites: which traces a sweep evaluates and how to build them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CopaError, Result};
use crate::units::MB;
use crate::workload::{dl_preset, gen_dl_trace, gen_hpc_trace, read_trace_file, Mode, Trace, DL_PRESETS};

/// Shrink factor applied to suites unless a spec says otherwise.
pub const DEFAULT_MINIATURIZATION: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    TrainLb,
    TrainSb,
    InferLb,
    InferSb,
    Hpc,
}

impl Regime {
    pub const ALL: [Regime; 5] = [Regime::TrainLb, Regime::TrainSb, Regime::InferLb, Regime::InferSb, Regime::Hpc];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::TrainLb => "train_lb",
            Regime::TrainSb => "train_sb",
            Regime::InferLb => "infer_lb",
            Regime::InferSb => "infer_sb",
            Regime::Hpc => "hpc",
        }
    }

    pub fn is_training(self) -> bool {
        matches!(self, Regime::TrainLb | Regime::TrainSb)
    }

    pub fn is_large_batch_dl(self) -> bool {
        matches!(self, Regime::TrainLb | Regime::InferLb)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSource {
    Dl {
        model: String,
        mode: Mode,
        batch: u64,
        #[serde(default)]
        seed: u64,
    },
    Hpc {
        /// Full-scale bytes; divided by the suite's miniaturization.
        working_set: u64,
        reuse_fraction: f64,
        flop_byte_ratio: f64,
        kernels: u32,
        #[serde(default)]
        seed: u64,
    },
    /// A pre-generated trace, used exactly as stored.
    File { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub regime: Regime,
    pub source: WorkloadSource,
}

impl SuiteEntry {
    /// Builds the trace, optionally at a different per-GPU batch.
    pub fn trace(&self, miniaturization: u64, batch_override: Option<u64>) -> Result<Trace> {
        match &self.source {
            WorkloadSource::Dl { model, mode, batch, seed } => {
                let spec = dl_preset(model, *mode)?.miniaturized(miniaturization);
                gen_dl_trace(&spec, batch_override.unwrap_or(*batch), *seed)
            }
            WorkloadSource::Hpc { working_set, reuse_fraction, flop_byte_ratio, kernels, seed } => {
                if batch_override.is_some() {
                    return Err(CopaError::contract(format!("{} is not a batched workload", self.name)));
                }
                gen_hpc_trace((working_set / miniaturization.max(1)).max(1), *reuse_fraction, *flop_byte_ratio, *kernels, *seed)
            }
            WorkloadSource::File { path } => {
                if batch_override.is_some() {
                    return Err(CopaError::contract(format!("{} is a stored trace and cannot be re-batched", self.name)));
                }
                read_trace_file(path)
            }
        }
    }

    pub fn batch(&self) -> Option<u64> {
        match self.source {
            WorkloadSource::Dl { batch, .. } => Some(batch),
            _ => None,
        }
    }
}

/// (name, working set MB, reuse fraction, FLOP/B, kernels)
///
/// Mostly cache-resident or compute-heavy codes plus two streaming ones,
/// giving a suite that is largely insensitive to DRAM bandwidth.
const HPC_SUITE: [(&str, u64, f64, f64, u32); 8] = [
    ("stencil", 40, 0.9, 10.0, 8),
    ("md", 16, 0.95, 30.0, 8),
    ("dgemm", 24, 0.9, 60.0, 4),
    ("spmv", 48, 0.85, 4.0, 16),
    ("amr", 36, 0.8, 12.0, 8),
    ("lattice", 20, 0.95, 20.0, 8),
    ("fft", 256, 0.5, 8.0, 8),
    ("stream", 1024, 0.0, 8.0, 4),
];

/// The calibrated suite: every DL preset at its small and large batch plus
/// the synthetic HPC set.
pub fn default_suite() -> Vec<SuiteEntry> {
    let mut out = Vec::new();
    for (regime, large) in [(Regime::TrainLb, true), (Regime::TrainSb, false), (Regime::InferLb, true), (Regime::InferSb, false)] {
        let mode = if regime.is_training() { Mode::Training } else { Mode::Inference };
        for p in DL_PRESETS.iter().filter(|p| p.mode == mode) {
            let batch = if large { p.large_batch } else { p.small_batch };
            out.push(SuiteEntry {
                name: format!("{}-{}-b{batch}", p.name, if regime.is_training() { "train" } else { "infer" }),
                regime,
                source: WorkloadSource::Dl { model: p.name.to_string(), mode, batch, seed: 7 },
            });
        }
    }
    for (i, (name, ws_mb, reuse, ratio, kernels)) in HPC_SUITE.into_iter().enumerate() {
        out.push(SuiteEntry {
            name: format!("hpc-{name}"),
            regime: Regime::Hpc,
            source: WorkloadSource::Hpc {
                working_set: ws_mb * MB,
                reuse_fraction: reuse,
                flop_byte_ratio: ratio,
                kernels,
                seed: 100 + i as u64,
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_covers_every_regime() {
        let suite = default_suite();
        for r in Regime::ALL {
            assert!(suite.iter().any(|e| e.regime == r), "{r}");
        }
        assert_eq!(suite.iter().filter(|e| e.regime == Regime::TrainLb).count(), 6);
        assert_eq!(suite.iter().filter(|e| e.regime == Regime::InferSb).count(), 4);
    }

    #[test]
    fn miniaturized_traces_shrink() {
        let e = &default_suite()[0];
        let full = e.trace(1, None).unwrap();
        let mini = e.trace(128, None).unwrap();
        let ratio = full.footprint as f64 / mini.footprint as f64;
        assert!((ratio - 128.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn hpc_entries_cannot_be_rebatched() {
        let e = default_suite().into_iter().find(|e| e.regime == Regime::Hpc).unwrap();
        assert!(e.trace(128, Some(2)).is_err());
    }
}
