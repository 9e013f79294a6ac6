//! System power and tokens-per-watt.
//!
//! Chips draw power in proportion to die area, every server adds a fixed
//! host overhead, and memory adds a dynamic term at the achieved traffic
//! rate plus a static term per resident gigabyte. Memory constants are
//! placeholders; compare efficiencies as ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{ChipConfig, MemTech, SystemConfig};
use crate::workload::Workload;

/// One value per memory technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechTable {
    pub hbm3: f64,
    pub hbm4: f64,
    #[serde(rename = "3d-dram")]
    pub dram3d: f64,
    pub sram: f64,
    pub pim: f64,
}

impl TechTable {
    pub fn get(&self, tech: MemTech) -> f64 {
        match tech {
            MemTech::Hbm3 => self.hbm3,
            MemTech::Hbm4 => self.hbm4,
            MemTech::Dram3d => self.dram3d,
            MemTech::Sram => self.sram,
            MemTech::Pim => self.pim,
        }
    }

    fn values(&self) -> [f64; 5] {
        [self.hbm3, self.hbm4, self.dram3d, self.sram, self.pim]
    }

    pub fn zero() -> Self {
        Self {
            hbm3: 0.0,
            hbm4: 0.0,
            dram3d: 0.0,
            sram: 0.0,
            pim: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModel {
    pub chip_w_per_mm2: f64,
    pub server_overhead_w: f64,
    pub chips_per_server: u64,
    pub mem_dynamic_pj_per_bit: TechTable,
    /// Watts per GiB of installed capacity.
    pub mem_static_w_per_gb: TechTable,
    pub interconnect_w: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            chip_w_per_mm2: 1.0,
            server_overhead_w: 300.0,
            chips_per_server: 8,
            mem_dynamic_pj_per_bit: TechTable {
                hbm3: 4.0,
                hbm4: 3.0,
                dram3d: 1.5,
                sram: 0.0,
                pim: 0.0,
            },
            mem_static_w_per_gb: TechTable {
                hbm3: 0.1,
                hbm4: 0.1,
                dram3d: 0.1,
                sram: 0.0,
                pim: 0.0,
            },
            interconnect_w: 0.0,
        }
    }
}

impl PowerModel {
    /// Chips and servers only.
    pub fn without_memory() -> Self {
        Self {
            mem_dynamic_pj_per_bit: TechTable::zero(),
            mem_static_w_per_gb: TechTable::zero(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [self.chip_w_per_mm2, self.server_overhead_w, self.interconnect_w];
        let all = scalars
            .into_iter()
            .chain(self.mem_dynamic_pj_per_bit.values())
            .chain(self.mem_static_w_per_gb.values());
        for v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(
                    "power model",
                    format!("constants must be finite and >= 0, got {v}"),
                ));
            }
        }
        if self.chips_per_server == 0 {
            return Err(Error::domain("power model", "chips_per_server must be >= 1"));
        }
        Ok(())
    }

    /// Multiplies every constant by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let t = |x: TechTable| TechTable {
            hbm3: x.hbm3 * k,
            hbm4: x.hbm4 * k,
            dram3d: x.dram3d * k,
            sram: x.sram * k,
            pim: x.pim * k,
        };
        Self {
            chip_w_per_mm2: self.chip_w_per_mm2 * k,
            server_overhead_w: self.server_overhead_w * k,
            chips_per_server: self.chips_per_server,
            mem_dynamic_pj_per_bit: t(self.mem_dynamic_pj_per_bit),
            mem_static_w_per_gb: t(self.mem_static_w_per_gb),
            interconnect_w: self.interconnect_w * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub chips_w: f64,
    pub servers_w: f64,
    pub mem_dynamic_w: f64,
    pub mem_static_w: f64,
    pub interconnect_w: f64,
}

impl PowerBreakdown {
    pub fn total(&self) -> f64 {
        self.chips_w + self.servers_w + self.mem_dynamic_w + self.mem_static_w + self.interconnect_w
    }
}

pub fn chip_power(chip: &ChipConfig, pm: &PowerModel) -> f64 {
    chip.reported_power_w.unwrap_or(chip.die_area * pm.chip_w_per_mm2)
}

/// Chip and server power for `n_chips` chips, before memory.
pub fn base_power(chip: &ChipConfig, n_chips: u64, pm: &PowerModel) -> f64 {
    if n_chips == 0 {
        return 0.0;
    }
    let servers = n_chips.div_ceil(pm.chips_per_server.max(1));
    n_chips as f64 * chip_power(chip, pm) + servers as f64 * pm.server_overhead_w
}

/// `w` is one mini-batch's step; all `pp` in-flight mini-batches move its
/// bytes once per `t_batch`.
pub fn system_power_breakdown(sys: &SystemConfig, w: &Workload, t_batch: f64, pm: &PowerModel) -> PowerBreakdown {
    let n = sys.n_chips();
    if n == 0 {
        return PowerBreakdown::default();
    }
    let chips_w = n as f64 * chip_power(&sys.chip, pm);
    let servers_w = base_power(&sys.chip, n, pm) - chips_w;
    let tech = sys.chip.mem_tech;
    let bytes_per_s = if t_batch > 0.0 {
        sys.pp as f64 * w.total_rd_bytes / t_batch
    } else {
        0.0
    };
    PowerBreakdown {
        chips_w,
        servers_w,
        mem_dynamic_w: bytes_per_s * 8.0 * pm.mem_dynamic_pj_per_bit.get(tech) * 1e-12,
        mem_static_w: sys.agg_capacity_gib() * pm.mem_static_w_per_gb.get(tech),
        interconnect_w: pm.interconnect_w,
    }
}

pub fn system_power(sys: &SystemConfig, w: &Workload, t_batch: f64, pm: &PowerModel) -> f64 {
    system_power_breakdown(sys, w, t_batch, pm).total()
}

/// System tokens per second per watt.
pub fn efficiency(stps: f64, watts: f64) -> Result<f64> {
    if !(watts.is_finite() && watts > 0.0) {
        return Err(Error::domain(
            "efficiency",
            format!("power must be positive, got {watts} W"),
        ));
    }
    Ok(stps / watts)
}
