//! Decode-step latency and throughput.
//!
//! One token of one mini-batch costs
//! `t_batch = max(t_compute, t_mem) + t_exposed`, with compute and memory
//! assumed to overlap perfectly and everything in `t_exposed` serialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::SystemConfig;
use crate::model::ModelArch;
use crate::units::GIB;
use crate::workload::{capacity_bytes, workload, DeploymentPoint, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingFlags {
    /// Serve all KV traffic from one chip's bandwidth, as PIM designs that
    /// keep attention on a single device do.
    pub attention_single_device: bool,
}

/// Seconds per token of one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t_compute: f64,
    pub t_mem: f64,
    pub t_exposed_sync: f64,
    pub t_exposed_pp: f64,
    pub t_exposed_moe_balance: f64,
    pub t_exposed_moe_routing: f64,
    pub t_exposed_other: f64,
    pub t_batch: f64,
}

impl LatencyBreakdown {
    pub fn t_exposed(&self) -> f64 {
        self.t_exposed_sync
            + self.t_exposed_pp
            + self.t_exposed_moe_balance
            + self.t_exposed_moe_routing
            + self.t_exposed_other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bottleneck {
    Memory,
    Compute,
}

impl std::fmt::Display for Bottleneck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bottleneck::Memory => "memory",
            Bottleneck::Compute => "compute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    /// Tokens per second seen by one user.
    pub utps: f64,
    /// Tokens per second across all users and pipeline stages.
    pub stps: f64,
    pub batch: u64,
    pub pp: u64,
    pub bottleneck: Bottleneck,
    /// Tensor-core busy time over `t_batch`.
    pub tensor_utilization: f64,
    /// Memory busy time over `t_batch`.
    pub mem_bw_utilization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExposedLatency {
    pub sync: f64,
    pub pp: f64,
    pub moe_balance: f64,
    pub moe_routing: f64,
    pub other: f64,
}

pub fn compute_latency(w: &Workload, sys: &SystemConfig) -> f64 {
    w.tensor_flops / sys.agg_tensor() + w.scalar_flops / sys.agg_scalar()
}

pub fn memory_latency(w: &Workload, sys: &SystemConfig, flags: MappingFlags) -> f64 {
    if flags.attention_single_device {
        w.weights_bytes / sys.agg_bw() + w.kv_bytes() / sys.chip.bw_bytes_per_s()
    } else {
        w.total_rd_bytes / sys.agg_bw()
    }
}

/// Exposed terms. The load-balance term is the extra time the busiest routed
/// expert needs over the average one; it is charged at tensor rate whether or
/// not the step is memory-bound.
pub fn exposed_latency(m: &ModelArch, sys: &SystemConfig, w: &Workload) -> ExposedLatency {
    let moe_layers = m.num_moe_layers() as f64;
    ExposedLatency {
        sync: sys.t_tp_sync * sys.sync_ops_per_layer as f64 * m.layers as f64,
        pp: sys.t_pp_sync * sys.pp as f64,
        moe_balance: (w.moe_max_routed_flops - w.moe_avg_routed_flops) / sys.agg_tensor(),
        moe_routing: sys.moe_routing_latency * moe_layers,
        other: sys.extra_exposed,
    }
}

/// Assembles the breakdown from an already computed workload.
pub fn evaluate_workload(
    m: &ModelArch,
    w: &Workload,
    batch: u64,
    sys: &SystemConfig,
    flags: MappingFlags,
) -> (LatencyBreakdown, ThroughputReport) {
    let t_compute = compute_latency(w, sys);
    let t_mem = memory_latency(w, sys, flags);
    let x = exposed_latency(m, sys, w);
    let lat = LatencyBreakdown {
        t_compute,
        t_mem,
        t_exposed_sync: x.sync,
        t_exposed_pp: x.pp,
        t_exposed_moe_balance: x.moe_balance,
        t_exposed_moe_routing: x.moe_routing,
        t_exposed_other: x.other,
        t_batch: t_compute.max(t_mem) + x.sync + x.pp + x.moe_balance + x.moe_routing + x.other,
    };
    let utps = 1.0 / lat.t_batch;
    let report = ThroughputReport {
        utps,
        stps: (sys.pp * batch) as f64 * utps,
        batch,
        pp: sys.pp,
        bottleneck: if t_mem >= t_compute {
            Bottleneck::Memory
        } else {
            Bottleneck::Compute
        },
        tensor_utilization: (w.tensor_flops / sys.agg_tensor()) / lat.t_batch,
        mem_bw_utilization: t_mem / lat.t_batch,
    };
    (lat, report)
}

/// Evaluates one decode step. `mi` is the routed-expert imbalance factor
/// (ignored for dense models).
pub fn evaluate(
    m: &ModelArch,
    p: &DeploymentPoint,
    sys: &SystemConfig,
    flags: MappingFlags,
    mi: f64,
) -> Result<(LatencyBreakdown, ThroughputReport)> {
    if !sys.fits(m, p) {
        return Err(Error::Infeasible(format!(
            "{} at B={} T={} needs {:.0} GiB but tp={} pp={} {} holds {:.0} GiB",
            m.name,
            p.batch,
            p.context,
            capacity_bytes(m, p) / GIB,
            sys.tp,
            sys.pp,
            sys.chip.name,
            sys.agg_capacity_gib()
        )));
    }
    let w = workload(m, p, mi)?;
    Ok(evaluate_workload(m, &w, p.batch, sys, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{builtin_chip, compose_system};
    use crate::model::builtin_model;

    fn sys(chip: &str, tp: u64, pp: u64) -> SystemConfig {
        compose_system(&builtin_chip(chip).unwrap(), tp, pp).unwrap()
    }

    #[test]
    fn zero_workload_costs_nothing() {
        let s = sys("xpu-hbm3", 8, 1);
        let w = Workload::default();
        assert_eq!(compute_latency(&w, &s), 0.0);
        assert_eq!(memory_latency(&w, &s, MappingFlags::default()), 0.0);
    }

    #[test]
    fn exposed_terms() {
        let l405 = builtin_model("llama3-405b").unwrap();
        let w = Workload::default();
        let x = exposed_latency(&l405, &sys("xpu-hbm3", 128, 1), &w);
        assert!((x.sync - 567e-6).abs() < 1e-12);
        assert_eq!(x.pp, 100e-9);
        assert_eq!((x.moe_balance, x.moe_routing), (0.0, 0.0));
        let l70 = builtin_model("llama3-70b").unwrap();
        let x = exposed_latency(&l70, &sys("xpu-hbm3", 8, 1), &w);
        assert!((x.sync - 48e-6).abs() < 1e-12);
        let ds = builtin_model("deepseekv3").unwrap();
        let p = DeploymentPoint::new(4, 4096).unwrap();
        let w = workload(&ds, &p, 1.0).unwrap();
        let x = exposed_latency(&ds, &sys("xpu-hbm3", 8, 1), &w);
        assert_eq!(x.moe_balance, 0.0);
        assert!((x.moe_routing - 58.0 * 800e-9).abs() < 1e-15);
    }

    #[test]
    fn headline_utps() {
        let cases = [
            ("llama3-405b", 4096, 128, 776.0),
            ("llama3-70b", 128 * 1024, 32, 990.0),
            ("deepseekv3", 4096, 8, 52.0),
        ];
        for (name, t, tp, want) in cases {
            let m = builtin_model(name).unwrap();
            let p = DeploymentPoint::new(1, t).unwrap();
            let (_, r) = evaluate(&m, &p, &sys("xpu-hbm3", tp, 1), MappingFlags::default(), 1.0).unwrap();
            assert!((r.utps / want - 1.0).abs() < 0.02, "{name}: {}", r.utps);
        }
    }

    #[test]
    fn single_device_attention_is_slower_with_kv() {
        let m = builtin_model("llama3-70b").unwrap();
        let s = sys("xpu-sram", 128, 2);
        let p = DeploymentPoint::new(1, 4096).unwrap();
        let flags = MappingFlags {
            attention_single_device: true,
        };
        let (base, _) = evaluate(&m, &p, &s, MappingFlags::default(), 1.0).unwrap();
        let (pim, _) = evaluate(&m, &p, &s, flags, 1.0).unwrap();
        assert!(pim.t_mem > base.t_mem);
        let w = Workload {
            weights_bytes: 1e9,
            total_rd_bytes: 1e9,
            ..Workload::default()
        };
        assert_eq!(
            memory_latency(&w, &s, flags),
            memory_latency(&w, &s, MappingFlags::default())
        );
    }

    #[test]
    fn infeasible_point_is_reported() {
        let m = builtin_model("llama3-405b").unwrap();
        let p = DeploymentPoint::new(1, 4096).unwrap();
        let e = evaluate(&m, &p, &sys("xpu-hbm3", 1, 1), MappingFlags::default(), 1.0).unwrap_err();
        assert!(e.is_infeasible());
    }
}
