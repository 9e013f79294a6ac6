//! Chips, and systems built from `tp x pp` of them.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::model::{kv_bytes_per_user, ModelArch};
use crate::units::{parse_bytes, pflops_to_flops, tbs_to_bytes_per_s, GIB};
use crate::workload::{capacity_bytes, DeploymentPoint};

pub const BUILTIN_CHIPS: [&str; 5] = ["xpu-hbm3", "xpu-hbm4", "xpu-3d-dram", "xpu-sram", "xpu-cows"];

/// Largest tensor-parallel group a single layer may be split across.
pub const MAX_TP: u64 = 128;
pub const DEFAULT_PP_CAP: u64 = 1024;
pub const SYNC_OPS_PER_LAYER: u64 = 3;
pub const PP_SYNC: f64 = 100e-9;
pub const TP_SYNC_SMALL: f64 = 200e-9;
pub const TP_SYNC_LARGE: f64 = 1.5e-6;
/// Groups of this many chips or more pay the large-radix sync latency.
pub const TP_SYNC_THRESHOLD: u64 = 16;
pub const MOE_ROUTING_LATENCY: f64 = 800e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemTech {
    #[serde(rename = "hbm3")]
    Hbm3,
    #[serde(rename = "hbm4")]
    Hbm4,
    #[serde(rename = "3d-dram")]
    Dram3d,
    #[serde(rename = "sram")]
    Sram,
    /// Processing-in-memory parts; power comes from a reported figure.
    #[serde(rename = "pim")]
    Pim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipConfig {
    pub name: String,
    /// TB/s.
    pub mem_bw: f64,
    /// Tensor-core PFLOPS.
    pub tensor_compute: f64,
    /// Vector/scalar PFLOPS.
    pub scalar_compute: f64,
    /// Bytes. JSON also accepts strings like `"96GB"`.
    #[serde(deserialize_with = "bytes_or_string")]
    pub mem_capacity: u64,
    /// mm².
    #[serde(default = "default_die_area")]
    pub die_area: f64,
    /// Seconds; replaces the radix-based TP sync rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_sync_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tp_span: Option<u64>,
    pub mem_tech: MemTech,
    /// Whole-chip watts, used instead of die area when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_power_w: Option<f64>,
}

fn default_die_area() -> f64 {
    800.0
}

fn bytes_or_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        N(u64),
        S(String),
    }
    match Raw::deserialize(d)? {
        Raw::N(n) => Ok(n),
        Raw::S(s) => parse_bytes(&s).map_err(serde::de::Error::custom),
    }
}

impl ChipConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::domain("chip", format!("{}: {reason}", self.name)));
        for (field, v) in [
            ("mem_bw", self.mem_bw),
            ("tensor_compute", self.tensor_compute),
            ("scalar_compute", self.scalar_compute),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{field} must be positive, got {v}"));
            }
        }
        if self.mem_capacity == 0 {
            return bad("mem_capacity must be positive".into());
        }
        if !(self.die_area.is_finite() && self.die_area >= 0.0) {
            return bad("die_area must be >= 0".into());
        }
        if let Some(t) = self.tp_sync_override {
            if !(t.is_finite() && t >= 0.0) {
                return bad("tp_sync_override must be >= 0".into());
            }
        }
        if self.max_tp_span == Some(0) {
            return bad("max_tp_span must be >= 1".into());
        }
        if let Some(w) = self.reported_power_w {
            if !(w.is_finite() && w >= 0.0) {
                return bad("reported_power_w must be >= 0".into());
            }
        }
        Ok(())
    }

    pub fn bw_bytes_per_s(&self) -> f64 {
        tbs_to_bytes_per_s(self.mem_bw)
    }

    pub fn tensor_flops_per_s(&self) -> f64 {
        pflops_to_flops(self.tensor_compute)
    }

    pub fn scalar_flops_per_s(&self) -> f64 {
        pflops_to_flops(self.scalar_compute)
    }

    pub fn tp_limit(&self) -> u64 {
        self.max_tp_span.map_or(MAX_TP, |s| s.min(MAX_TP))
    }

    /// Powers of two up to the chip's TP limit.
    pub fn tp_candidates(&self) -> Vec<u64> {
        let limit = self.tp_limit();
        std::iter::successors(Some(1u64), |t| Some(t * 2))
            .take_while(|&t| t <= limit)
            .collect()
    }
}

pub fn builtin_chip(name: &str) -> Result<ChipConfig> {
    let key = name.trim().to_ascii_lowercase();
    let gib = |n: u64| n << 30;
    let chip = |name: &str, bw, tensor, scalar, cap, tech| ChipConfig {
        name: name.into(),
        mem_bw: bw,
        tensor_compute: tensor,
        scalar_compute: scalar,
        mem_capacity: cap,
        die_area: 800.0,
        tp_sync_override: None,
        max_tp_span: None,
        mem_tech: tech,
        reported_power_w: None,
    };
    Ok(match key.as_str() {
        "xpu-hbm3" => chip("xpu-hbm3", 4.0, 2.25, 0.2, gib(96), MemTech::Hbm3),
        "xpu-hbm4" => chip("xpu-hbm4", 18.0, 2.25, 0.2, gib(192), MemTech::Hbm4),
        "xpu-3d-dram" => chip("xpu-3d-dram", 30.0, 2.25, 0.2, gib(36), MemTech::Dram3d),
        "xpu-sram" => chip("xpu-sram", 117.0, 1.13, 0.1, 512 << 20, MemTech::Sram),
        "xpu-cows" => ChipConfig {
            tp_sync_override: Some(800e-9),
            max_tp_span: Some(1),
            // 25 reticle-sized dies on one wafer.
            die_area: 25.0 * 800.0,
            ..chip("xpu-cows", 2250.0, 28.13, 2.5, gib(11), MemTech::Sram)
        },
        _ => {
            return Err(Error::UnknownChip {
                name: name.to_string(),
                valid: BUILTIN_CHIPS.join(", "),
            })
        }
    })
}

pub fn tp_sync_latency(tp: u64, override_s: Option<f64>) -> f64 {
    match override_s {
        Some(t) => t,
        None if tp < TP_SYNC_THRESHOLD => TP_SYNC_SMALL,
        None => TP_SYNC_LARGE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub chip: ChipConfig,
    pub tp: u64,
    pub pp: u64,
    pub t_tp_sync: f64,
    pub t_pp_sync: f64,
    pub sync_ops_per_layer: u64,
    /// Fixed per-MoE-layer routing cost, seconds.
    pub moe_routing_latency: f64,
    /// Additional exposed latency per token (software overheads), seconds.
    pub extra_exposed: f64,
}

impl SystemConfig {
    pub fn n_chips(&self) -> u64 {
        self.tp * self.pp
    }

    /// Bytes/s available to one pipeline stage.
    pub fn agg_bw(&self) -> f64 {
        self.tp as f64 * self.chip.bw_bytes_per_s()
    }

    pub fn agg_tensor(&self) -> f64 {
        self.tp as f64 * self.chip.tensor_flops_per_s()
    }

    pub fn agg_scalar(&self) -> f64 {
        self.tp as f64 * self.chip.scalar_flops_per_s()
    }

    /// Bytes across all stages.
    pub fn agg_capacity(&self) -> f64 {
        (self.tp * self.pp) as f64 * self.chip.mem_capacity as f64
    }

    pub fn agg_capacity_gib(&self) -> f64 {
        self.agg_capacity() / GIB
    }

    pub fn with_tp_sync(mut self, seconds: f64) -> Self {
        self.t_tp_sync = seconds;
        self
    }

    pub fn with_mem_bw(mut self, tbs: f64) -> Self {
        self.chip.mem_bw = tbs;
        self
    }

    pub fn fits(&self, m: &ModelArch, p: &DeploymentPoint) -> bool {
        capacity_bytes(m, p) <= self.agg_capacity()
    }
}

pub fn compose_system(chip: &ChipConfig, tp: u64, pp: u64) -> Result<SystemConfig> {
    chip.validate()?;
    if tp == 0 || pp == 0 {
        return Err(Error::domain("system", "tp and pp must be >= 1"));
    }
    if tp > MAX_TP {
        return Err(Error::Constraint(format!(
            "tp={tp} exceeds the {MAX_TP}-chip tensor-parallel limit"
        )));
    }
    if let Some(span) = chip.max_tp_span {
        if tp > span {
            return Err(Error::Constraint(format!(
                "{} spans at most {span} unit(s) per tensor-parallel group, got tp={tp}",
                chip.name
            )));
        }
    }
    Ok(SystemConfig {
        chip: chip.clone(),
        tp,
        pp,
        t_tp_sync: tp_sync_latency(tp, chip.tp_sync_override),
        t_pp_sync: PP_SYNC,
        sync_ops_per_layer: SYNC_OPS_PER_LAYER,
        moe_routing_latency: MOE_ROUTING_LATENCY,
        extra_exposed: 0.0,
    })
}

/// Fewest pipeline stages whose memory holds the weights plus every user's KV cache.
pub fn min_pp(chip: &ChipConfig, tp: u64, m: &ModelArch, p: &DeploymentPoint, pp_cap: u64) -> Result<u64> {
    let per_stage = (tp * chip.mem_capacity) as f64;
    let need = capacity_bytes(m, p);
    let pp = (need / per_stage).ceil().max(1.0);
    if pp > pp_cap as f64 {
        return Err(Error::Infeasible(format!(
            "{} at B={} T={} needs {:.0} GiB; {} stages of tp={tp} {} hold {:.0} GiB",
            m.name,
            p.batch,
            p.context,
            need / GIB,
            pp_cap,
            chip.name,
            per_stage * pp_cap as f64 / GIB
        )));
    }
    Ok(pp as u64)
}

/// Largest batch whose KV caches at context `context` fit beside the weights.
pub fn max_batch(sys: &SystemConfig, m: &ModelArch, context: u64, cap: Option<u64>) -> Result<u64> {
    let one = DeploymentPoint::new(1, context)?;
    if !sys.fits(m, &one) {
        return Err(Error::Infeasible(format!(
            "{} at T={context} does not fit one user in {:.0} GiB (tp={} pp={} {})",
            m.name,
            sys.agg_capacity_gib(),
            sys.tp,
            sys.pp,
            sys.chip.name
        )));
    }
    let per_user = kv_bytes_per_user(m, context);
    if per_user == 0.0 {
        return cap.ok_or_else(|| Error::domain("max batch", "unbounded at zero context; give a batch cap"));
    }
    let free = sys.agg_capacity() - capacity_bytes(m, &DeploymentPoint::new(1, 0)?);
    let mut b = ((free / per_user).floor() as u64).max(1);
    while b > 1 && !sys.fits(m, &DeploymentPoint::new(b, context)?) {
        b -= 1;
    }
    while sys.fits(m, &DeploymentPoint::new(b + 1, context)?) {
        b += 1;
    }
    Ok(cap.map_or(b, |c| b.min(c.max(1))))
}
