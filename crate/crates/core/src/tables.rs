//! Builders for the standard result tables.
//!
//! * `t2`: best single-user and best system throughput at 4K and 128K.
//! * `t3`: single-user throughput per system across contexts.
//! * `t4`: system throughput at the memory-limited batch, with user throughput.
//! * `t6`: resident capacity and arithmetic intensity per model and batch.
//!
//! Rows for PIM-style "CENT" systems appear as dashes unless the catalog
//! holds a user chip whose name contains `cent`.

use crate::config::Catalog;
use crate::error::{Error, Result};
use crate::explorer::{evaluate_point, BatchChoice, EvalOptions, Evaluated};
use crate::machine::ChipConfig;
use crate::model::{ModelArch, BUILTIN_MODELS};
use crate::perf::MappingFlags;
use crate::report::{Cell, NumKind, Row, Section, Table};
use crate::units::format_context;
use crate::workload::{arithmetic_intensity, capacity_gib, DeploymentPoint};

pub const TABLE_IDS: [&str; 4] = ["t2", "t3", "t4", "t6"];

pub const T2_CONTEXTS: [u64; 2] = [4 << 10, 128 << 10];
pub const SWEEP_CONTEXTS: [u64; 6] = [4 << 10, 8 << 10, 16 << 10, 32 << 10, 64 << 10, 128 << 10];
pub const CAPACITY_CONTEXTS: [u64; 8] = [
    1 << 10,
    2 << 10,
    4 << 10,
    8 << 10,
    16 << 10,
    32 << 10,
    64 << 10,
    128 << 10,
];
pub const CAPACITY_BATCHES: [u64; 2] = [1, 32];
pub const TABLE_TPS: [u64; 3] = [8, 32, 128];

#[derive(Debug, Clone, PartialEq)]
pub struct TableOptions {
    pub chip: String,
    pub models: Vec<String>,
    pub eval: EvalOptions,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            chip: "xpu-hbm3".into(),
            models: BUILTIN_MODELS.iter().map(|s| s.to_string()).collect(),
            eval: EvalOptions::default(),
        }
    }
}

pub fn display_name(model: &str) -> String {
    match model {
        "llama3-70b" => "Llama3-70B".into(),
        "llama3-405b" => "Llama3-405B".into(),
        "deepseekv3" => "DeepSeekV3-671B".into(),
        other => other.into(),
    }
}

fn chip_label(chip: &ChipConfig, tp: u64) -> String {
    let upper = chip.name.to_ascii_uppercase();
    let name = upper
        .strip_prefix("XPU-")
        .map_or(upper.clone(), |rest| format!("xPU-{rest}"));
    format!("{name}-TP{tp}")
}

fn dash(pair: bool, e: Error) -> Result<Cell> {
    if e.is_infeasible() {
        Ok(Cell::Dash {
            pair,
            reason: e.to_string(),
        })
    } else {
        Err(e)
    }
}

fn utps_cell(r: Result<Evaluated>) -> Result<Cell> {
    match r {
        Ok(e) => Ok(Cell::Num {
            value: e.throughput.utps,
            unit: NumKind::Rate,
        }),
        Err(e) => dash(false, e),
    }
}

fn pair_cell(r: Result<Evaluated>) -> Result<Cell> {
    match r {
        Ok(e) => Ok(Cell::Pair {
            stps: e.throughput.stps,
            utps: e.throughput.utps,
        }),
        Err(e) => dash(true, e),
    }
}

fn models(catalog: &Catalog, opts: &TableOptions) -> Result<Vec<ModelArch>> {
    opts.models.iter().map(|n| catalog.model(n)).collect()
}

fn context_columns(contexts: &[u64]) -> Vec<String> {
    contexts.iter().map(|&t| format_context(t)).collect()
}

pub fn t2(catalog: &Catalog, opts: &TableOptions) -> Result<Table> {
    let chip = catalog.chip(&opts.chip)?;
    let mut columns: Vec<String> = T2_CONTEXTS
        .iter()
        .map(|&t| format!("UTPS {}", format_context(t)))
        .collect();
    columns.extend(
        T2_CONTEXTS
            .iter()
            .map(|&t| format!("STPS (UTPS) {}", format_context(t))),
    );
    let mut sections = Vec::new();
    for m in models(catalog, opts)? {
        let mut rows = Vec::new();
        for tp in TABLE_TPS.into_iter().filter(|&tp| tp <= chip.tp_limit()) {
            let mut cells = Vec::new();
            for &t in &T2_CONTEXTS {
                cells.push(utps_cell(evaluate_point(
                    &m,
                    &chip,
                    tp,
                    None,
                    BatchChoice::Fixed(1),
                    t,
                    &opts.eval,
                ))?);
            }
            for &t in &T2_CONTEXTS {
                cells.push(pair_cell(evaluate_point(
                    &m,
                    &chip,
                    tp,
                    None,
                    BatchChoice::Max(None),
                    t,
                    &opts.eval,
                ))?);
            }
            rows.push(Row {
                label: chip_label(&chip, tp),
                cells,
            });
        }
        sections.push(Section {
            name: display_name(&m.name),
            rows,
        });
    }
    Ok(Table {
        id: "t2".into(),
        title: "Max user TPS and max system TPS (user TPS in parentheses)".into(),
        row_header: "System".into(),
        columns,
        sections,
    })
}

/// Smallest single-stage tensor-parallel width that holds the workload.
fn cent_tp(m: &ModelArch, chip: &ChipConfig, batch: BatchChoice, t: u64, opts: &EvalOptions) -> Result<Evaluated> {
    let mut last = None;
    for tp in 1..=chip.tp_limit() {
        match evaluate_point(m, chip, tp, Some(1), batch, t, opts) {
            Ok(e) => return Ok(e),
            Err(e) if e.is_infeasible() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Infeasible(format!("{} does not fit {}", m.name, chip.name))))
}

fn cent_rows(
    catalog: &Catalog,
    m: &ModelArch,
    contexts: &[u64],
    batch: BatchChoice,
    opts: &EvalOptions,
    cell: fn(Result<Evaluated>) -> Result<Cell>,
) -> Result<Vec<Row>> {
    let chip = catalog.user_chips_matching("cent").into_iter().next();
    let pim = EvalOptions {
        flags: MappingFlags {
            attention_single_device: true,
        },
        ..opts.clone()
    };
    let missing = || Err(Error::Infeasible("no CENT chip configured".into()));
    let mut tp_cells = Vec::new();
    let mut pp_cells = Vec::new();
    for &t in contexts {
        match &chip {
            Some(c) => {
                tp_cells.push(cell(cent_tp(m, c, batch, t, &pim))?);
                pp_cells.push(cell(evaluate_point(m, c, 1, None, batch, t, &pim))?);
            }
            None => {
                tp_cells.push(cell(missing())?);
                pp_cells.push(cell(missing())?);
            }
        }
    }
    Ok(vec![
        Row {
            label: "CENT-TP".into(),
            cells: tp_cells,
        },
        Row {
            label: "CENT-PP".into(),
            cells: pp_cells,
        },
    ])
}

fn sweep_table(catalog: &Catalog, opts: &TableOptions, batch: BatchChoice, pair: bool) -> Result<Vec<Section>> {
    let chip = catalog.chip(&opts.chip)?;
    let cell: fn(Result<Evaluated>) -> Result<Cell> = if pair { pair_cell } else { utps_cell };
    let mut sections = Vec::new();
    for m in models(catalog, opts)? {
        let mut rows = Vec::new();
        for tp in TABLE_TPS.into_iter().filter(|&tp| tp <= chip.tp_limit()) {
            let cells = SWEEP_CONTEXTS
                .iter()
                .map(|&t| cell(evaluate_point(&m, &chip, tp, None, batch, t, &opts.eval)))
                .collect::<Result<_>>()?;
            rows.push(Row {
                label: chip_label(&chip, tp),
                cells,
            });
        }
        rows.extend(cent_rows(catalog, &m, &SWEEP_CONTEXTS, batch, &opts.eval, cell)?);
        sections.push(Section {
            name: display_name(&m.name),
            rows,
        });
    }
    Ok(sections)
}

pub fn t3(catalog: &Catalog, opts: &TableOptions) -> Result<Table> {
    Ok(Table {
        id: "t3".into(),
        title: "Max user TPS at batch size 1".into(),
        row_header: "System".into(),
        columns: context_columns(&SWEEP_CONTEXTS),
        sections: sweep_table(catalog, opts, BatchChoice::Fixed(1), false)?,
    })
}

pub fn t4(catalog: &Catalog, opts: &TableOptions) -> Result<Table> {
    Ok(Table {
        id: "t4".into(),
        title: "Max system TPS at the largest batch that fits (user TPS in parentheses)".into(),
        row_header: "System".into(),
        columns: context_columns(&SWEEP_CONTEXTS),
        sections: sweep_table(catalog, opts, BatchChoice::Max(None), true)?,
    })
}

pub fn t6(catalog: &Catalog, opts: &TableOptions) -> Result<Table> {
    let mut t = capacity_table(&models(catalog, opts)?, &CAPACITY_BATCHES, &CAPACITY_CONTEXTS)?;
    t.id = "t6".into();
    Ok(t)
}

/// Capacity (GiB) and arithmetic intensity for every model, batch and context.
pub fn capacity_table(models: &[ModelArch], batches: &[u64], contexts: &[u64]) -> Result<Table> {
    let mut columns = Vec::new();
    for kind in ["Capacity GiB", "AMI"] {
        for m in models {
            for b in batches {
                columns.push(format!("{kind} {} B={b}", display_name(&m.name)));
            }
        }
    }
    let mut rows = Vec::new();
    for &t in contexts {
        let mut caps = Vec::new();
        let mut amis = Vec::new();
        for m in models {
            for &b in batches {
                let p = DeploymentPoint::new(b, t)?;
                caps.push(Cell::Num {
                    value: capacity_gib(m, &p),
                    unit: NumKind::Capacity,
                });
                amis.push(Cell::Num {
                    value: arithmetic_intensity(m, &p)?,
                    unit: NumKind::Intensity,
                });
            }
        }
        caps.extend(amis);
        rows.push(Row {
            label: format_context(t),
            cells: caps,
        });
    }
    Ok(Table {
        id: "capacity".into(),
        title: "Capacity required (GiB) and arithmetic intensity (FLOPs/byte)".into(),
        row_header: "T".into(),
        columns,
        sections: vec![Section {
            name: String::new(),
            rows,
        }],
    })
}

pub fn build(id: &str, catalog: &Catalog, opts: &TableOptions) -> Result<Table> {
    match id.trim().to_ascii_lowercase().as_str() {
        "t2" => t2(catalog, opts),
        "t3" => t3(catalog, opts),
        "t4" => t4(catalog, opts),
        "t6" => t6(catalog, opts),
        other => Err(Error::Parse(format!(
            "unknown table `{other}` (valid: {})",
            TABLE_IDS.join(", ")
        ))),
    }
}
