//! Analytical performance limits for auto-regressive LLM decoding.
//!
//! Given a transformer architecture and a system of accelerator chips, the
//! crate counts FLOPs and bytes for one decode step, turns them into latency
//! and throughput, sizes memory, estimates power, and sweeps design spaces.
//!
//! ```
//! use declim::{builtin_chip, builtin_model, compose_system, evaluate, DeploymentPoint, MappingFlags};
//!
//! let m = builtin_model("llama3-405b").unwrap();
//! let sys = compose_system(&builtin_chip("xpu-hbm3").unwrap(), 128, 1).unwrap();
//! let p = DeploymentPoint::new(1, 4096).unwrap();
//! let (lat, tps) = evaluate(&m, &p, &sys, MappingFlags::default(), 1.0).unwrap();
//! assert!(lat.t_mem > lat.t_compute);
//! assert!(tps.utps > 700.0);
//! ```

pub mod config;
pub mod error;
pub mod explorer;
pub mod machine;
pub mod model;
pub mod moe;
pub mod perf;
pub mod power;
pub mod report;
pub mod tables;
pub mod units;
pub mod workload;

pub use error::{Error, Result};
pub use machine::{builtin_chip, compose_system, max_batch, min_pp, ChipConfig, MemTech, SystemConfig};
pub use model::{builtin_model, ModelArch};
pub use moe::{estimate_imbalance, ImbalanceSettings, MoeImbalance};
pub use perf::{evaluate, Bottleneck, LatencyBreakdown, MappingFlags, ThroughputReport};
pub use power::PowerModel;
pub use workload::{arithmetic_intensity, capacity_gib, workload, DeploymentPoint, Workload};
