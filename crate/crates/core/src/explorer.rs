//! Design-space sweeps and the searches behind the throughput tables.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::Catalog;
use crate::error::{Error, Result};
use crate::machine::{compose_system, max_batch, min_pp, ChipConfig, SystemConfig, DEFAULT_PP_CAP, MAX_TP};
use crate::model::ModelArch;
use crate::moe::ImbalanceSettings;
use crate::perf::{evaluate_workload, LatencyBreakdown, MappingFlags, ThroughputReport};
use crate::power::{efficiency, system_power, PowerModel};
use crate::units::{parse_context, GIB, NS};
use crate::workload::{capacity_bytes, workload, DeploymentPoint};

pub const DEFAULT_BATCH_CAP: u64 = 64;
/// Largest batch plotted by [`efficiency_curve`] unless overridden.
pub const DEFAULT_CURVE_BATCH_CAP: u64 = 32;

/// Knobs shared by every evaluation in a search or sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub flags: MappingFlags,
    pub imbalance: ImbalanceSettings,
    pub power: PowerModel,
    pub pp_cap: u64,
    /// Seconds; replaces the chip's TP sync latency.
    pub tp_sync: Option<f64>,
    /// TB/s; replaces the chip's memory bandwidth.
    pub mem_bw: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            flags: MappingFlags::default(),
            imbalance: ImbalanceSettings::default(),
            power: PowerModel::default(),
            pp_cap: DEFAULT_PP_CAP,
            tp_sync: None,
            mem_bw: None,
        }
    }
}

/// Batch selection for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchChoice {
    Fixed(u64),
    /// Largest batch that fits, optionally clamped.
    Max(Option<u64>),
}

/// One fully evaluated deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub model: String,
    pub chip: String,
    pub tp: u64,
    pub pp: u64,
    pub batch: u64,
    pub context: u64,
    /// TB/s per chip actually used.
    pub mem_bw: f64,
    pub t_tp_sync: f64,
    pub mi: f64,
    pub latency: LatencyBreakdown,
    pub throughput: ThroughputReport,
    pub capacity_gib: f64,
    pub power_w: f64,
    pub stps_per_w: f64,
}

fn build_system(chip: &ChipConfig, tp: u64, pp: u64, opts: &EvalOptions) -> Result<SystemConfig> {
    let mut sys = compose_system(chip, tp, pp)?;
    if let Some(t) = opts.tp_sync {
        sys = sys.with_tp_sync(t);
    }
    if let Some(bw) = opts.mem_bw {
        if !(bw.is_finite() && bw > 0.0) {
            return Err(Error::domain(
                "bandwidth override",
                format!("must be positive, got {bw}"),
            ));
        }
        sys = sys.with_mem_bw(bw);
    }
    Ok(sys)
}

fn resolve_mi(m: &ModelArch, batch: u64, opts: &EvalOptions) -> Result<f64> {
    match m.moe {
        Some(moe) => opts.imbalance.resolve(&moe, batch * m.out_tokens),
        None => Ok(1.0),
    }
}

/// Resolves `pp` (minimum that fits `B=1`, or at the fixed batch) and the batch.
pub fn plan(
    m: &ModelArch,
    chip: &ChipConfig,
    tp: u64,
    pp: Option<u64>,
    batch: BatchChoice,
    context: u64,
    opts: &EvalOptions,
) -> Result<(SystemConfig, u64)> {
    let sizing_batch = match batch {
        BatchChoice::Fixed(b) => b,
        BatchChoice::Max(_) => 1,
    };
    let sizing_point = DeploymentPoint::new(sizing_batch, context)?;
    let pp = match pp {
        Some(pp) => pp,
        None => min_pp(chip, tp, m, &sizing_point, opts.pp_cap)?,
    };
    let sys = build_system(chip, tp, pp, opts)?;
    let b = match batch {
        BatchChoice::Fixed(b) => b,
        BatchChoice::Max(cap) => max_batch(&sys, m, context, cap)?,
    };
    Ok((sys, b))
}

pub fn evaluate_system(
    m: &ModelArch,
    sys: &SystemConfig,
    batch: u64,
    context: u64,
    opts: &EvalOptions,
) -> Result<Evaluated> {
    let p = DeploymentPoint::new(batch, context)?;
    if !sys.fits(m, &p) {
        return Err(Error::Infeasible(format!(
            "{} at B={batch} T={context} needs {:.0} GiB, tp={} pp={} {} holds {:.0} GiB",
            m.name,
            capacity_bytes(m, &p) / GIB,
            sys.tp,
            sys.pp,
            sys.chip.name,
            sys.agg_capacity_gib()
        )));
    }
    let mi = resolve_mi(m, batch, opts)?;
    let w = workload(m, &p, mi)?;
    let (latency, throughput) = evaluate_workload(m, &w, batch, sys, opts.flags);
    let power_w = system_power(sys, &w, latency.t_batch, &opts.power);
    Ok(Evaluated {
        model: m.name.clone(),
        chip: sys.chip.name.clone(),
        tp: sys.tp,
        pp: sys.pp,
        batch,
        context,
        mem_bw: sys.chip.mem_bw,
        t_tp_sync: sys.t_tp_sync,
        mi,
        latency,
        throughput,
        capacity_gib: capacity_bytes(m, &p) / GIB,
        power_w,
        stps_per_w: efficiency(throughput.stps, power_w).unwrap_or(0.0),
    })
}

pub fn evaluate_point(
    m: &ModelArch,
    chip: &ChipConfig,
    tp: u64,
    pp: Option<u64>,
    batch: BatchChoice,
    context: u64,
    opts: &EvalOptions,
) -> Result<Evaluated> {
    let (sys, b) = plan(m, chip, tp, pp, batch, context, opts)?;
    evaluate_system(m, &sys, b, context, opts)
}

/// Best single-user throughput over tensor-parallel widths.
///
/// Searches powers of two up to the chip's limit, or every width when
/// `exhaustive` is set. Ties keep the smaller system.
pub fn max_utps(
    m: &ModelArch,
    chip: &ChipConfig,
    context: u64,
    exhaustive: bool,
    opts: &EvalOptions,
) -> Result<Evaluated> {
    let tps: Vec<u64> = if exhaustive {
        (1..=chip.tp_limit()).collect()
    } else {
        chip.tp_candidates()
    };
    let mut best: Option<Evaluated> = None;
    let mut last_err = None;
    for tp in tps {
        match evaluate_point(m, chip, tp, None, BatchChoice::Fixed(1), context, opts) {
            Ok(e) => {
                if best.as_ref().is_none_or(|b| e.throughput.utps > b.throughput.utps) {
                    best = Some(e);
                }
            }
            Err(e) if e.is_infeasible() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Infeasible(format!("no tensor-parallel width fits {}", m.name)))
    })
}

/// System throughput at the largest batch memory allows, with the pipeline
/// depth sized for a single user.
pub fn max_stps(m: &ModelArch, chip: &ChipConfig, tp: u64, context: u64, opts: &EvalOptions) -> Result<Evaluated> {
    evaluate_point(m, chip, tp, None, BatchChoice::Max(None), context, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub context: u64,
    pub batch: u64,
    pub utps: f64,
    pub stps: f64,
    pub power_w: f64,
    pub stps_per_w: f64,
    /// Relative to the reference point (first context, largest batch).
    pub normalized: f64,
}

/// STPS/W against UTPS as batch grows, for each context.
///
/// Batches run over powers of two up to `batch_cap` or the memory limit,
/// whichever is smaller. Points are normalized to the largest batch of the
/// first context.
pub fn efficiency_curve(
    m: &ModelArch,
    chip: &ChipConfig,
    tp: u64,
    contexts: &[u64],
    batch_cap: u64,
    opts: &EvalOptions,
) -> Result<Vec<CurvePoint>> {
    let Some(&ref_context) = contexts.first() else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::new();
    for &t in contexts {
        let (sys, b_max) = plan(m, chip, tp, None, BatchChoice::Max(Some(batch_cap)), t, opts)?;
        let mut b = 1;
        loop {
            let e = evaluate_system(m, &sys, b, t, opts)?;
            rows.push(e);
            if b >= b_max {
                break;
            }
            b = (b * 2).min(b_max);
        }
    }
    let reference = rows
        .iter()
        .filter(|e| e.context == ref_context)
        .max_by_key(|e| e.batch)
        .map(|e| e.stps_per_w)
        .filter(|&r| r > 0.0)
        .ok_or_else(|| Error::domain("efficiency curve", "reference point has zero efficiency"))?;
    Ok(rows
        .into_iter()
        .map(|e| CurvePoint {
            context: e.context,
            batch: e.batch,
            utps: e.throughput.utps,
            stps: e.throughput.stps,
            power_w: e.power_w,
            stps_per_w: e.stps_per_w,
            normalized: e.stps_per_w / reference,
        })
        .collect())
}

/// Batch axis: `"max"`, a single size, or a list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum BatchAxis {
    #[serde(serialize_with = "ser_max")]
    Max,
    List(Vec<u64>),
}

fn ser_max<S: serde::Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str("max")
}

impl Default for BatchAxis {
    fn default() -> Self {
        BatchAxis::List(vec![1])
    }
}

impl<'de> Deserialize<'de> for BatchAxis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(u64),
            Many(Vec<u64>),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(b) => Ok(BatchAxis::List(vec![b])),
            Raw::Many(v) => Ok(BatchAxis::List(v)),
            Raw::Word(w) if w.eq_ignore_ascii_case("max") => Ok(BatchAxis::Max),
            Raw::Word(w) => {
                w.trim().parse().map(|b| BatchAxis::List(vec![b])).map_err(|_| {
                    serde::de::Error::custom(format!("batch must be a count, a list or \"max\", got `{w}`"))
                })
            }
        }
    }
}

/// Token count written as a number or a string such as `"4K"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Context(pub u64);

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Context(n)),
            Raw::S(s) => parse_context(&s).map(Context).map_err(serde::de::Error::custom),
        }
    }
}

/// Selects the row every other row in its group is divided by.
/// Unset fields match anything. Groups are per model, and per context
/// unless `context` is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reference {
    pub chip: Option<String>,
    pub tp: Option<u64>,
    pub batch: Option<u64>,
    pub context: Option<Context>,
    pub mem_bw: Option<f64>,
    pub tp_sync_ns: Option<f64>,
}

fn default_tps() -> Vec<u64> {
    std::iter::successors(Some(1u64), |t| Some(t * 2))
        .take_while(|&t| t <= MAX_TP)
        .collect()
}

fn default_batch_cap() -> Option<u64> {
    Some(DEFAULT_BATCH_CAP)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: String,
    pub models: Vec<String>,
    pub chips: Vec<String>,
    #[serde(default = "default_tps")]
    pub tp: Vec<u64>,
    pub context: Vec<Context>,
    #[serde(default)]
    pub batch: BatchAxis,
    /// Fixed pipeline depth; otherwise the minimum that fits.
    #[serde(default)]
    pub pp: Option<u64>,
    /// TB/s per chip; empty keeps each chip's own.
    #[serde(default)]
    pub mem_bw: Vec<f64>,
    /// Nanoseconds; empty keeps the radix rule.
    #[serde(default)]
    pub tp_sync_ns: Vec<f64>,
    /// Sync overrides apply only to systems at least this wide.
    #[serde(default)]
    pub sync_override_min_tp: u64,
    #[serde(default)]
    pub flags: MappingFlags,
    /// Clamp for `"max"` batches; `null` removes it.
    #[serde(default = "default_batch_cap")]
    pub batch_cap: Option<u64>,
    #[serde(default)]
    pub imbalance: ImbalanceSettings,
    #[serde(default)]
    pub normalize: Option<Reference>,
}

impl SweepSpec {
    pub fn new(models: &[&str], chips: &[&str], contexts: &[u64]) -> Self {
        Self {
            name: String::new(),
            models: models.iter().map(|s| s.to_string()).collect(),
            chips: chips.iter().map(|s| s.to_string()).collect(),
            tp: default_tps(),
            context: contexts.iter().map(|&t| Context(t)).collect(),
            batch: BatchAxis::default(),
            pp: None,
            mem_bw: Vec::new(),
            tp_sync_ns: Vec::new(),
            sync_override_min_tp: 0,
            flags: MappingFlags::default(),
            batch_cap: default_batch_cap(),
            imbalance: ImbalanceSettings::default(),
            normalize: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    /// Checks names and values. Empty axes are allowed and yield no rows.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        for m in &self.models {
            catalog.model(m)?;
        }
        for c in &self.chips {
            catalog.chip(c)?;
        }
        if let Some(&tp) = self.tp.iter().find(|&&t| t == 0 || t > MAX_TP) {
            return Err(Error::domain("sweep", format!("tp {tp} outside 1..={MAX_TP}")));
        }
        if self.pp == Some(0) {
            return Err(Error::domain("sweep", "pp must be >= 1"));
        }
        if let BatchAxis::List(v) = &self.batch {
            if v.contains(&0) {
                return Err(Error::domain("sweep", "batch sizes must be >= 1"));
            }
        }
        if self.batch_cap == Some(0) {
            return Err(Error::domain("sweep", "batch_cap must be >= 1"));
        }
        if let Some(bw) = self.mem_bw.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::domain("sweep", format!("bandwidth {bw} must be positive")));
        }
        if let Some(s) = self.tp_sync_ns.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::domain("sweep", format!("sync latency {s} must be >= 0")));
        }
        self.imbalance.validate()
    }
}

pub const BUILTIN_SWEEPS: [&str; 3] = ["bandwidth", "sync", "efficiency"];

/// Ready-made sweeps:
///
/// * `bandwidth`: UTPS of every model on a 128-wide HBM3 system with 200 ns
///   sync as per-chip bandwidth grows from 4 to 120 TB/s, normalized to 4 TB/s.
/// * `sync`: Llama3-405B at 128K, TP8 at its native 200 ns against TP128 at
///   TP sync latencies up to 10 us.
/// * `efficiency`: STPS/W for batches 1 to 32 at 4K/32K/128K on 128 HBM3
///   chips, normalized to the 4K, batch-32 point of each model.
pub fn builtin_sweep(name: &str) -> Result<SweepSpec> {
    let models = ["llama3-70b", "llama3-405b", "deepseekv3"];
    let contexts = [4 << 10, 32 << 10, 128 << 10];
    let mut s = match name.trim().to_ascii_lowercase().as_str() {
        "bandwidth" => {
            let mut s = SweepSpec::new(&models, &["xpu-hbm3"], &contexts);
            s.tp = vec![128];
            s.mem_bw = (1..=30).map(|i| 4.0 * i as f64).collect();
            s.tp_sync_ns = vec![200.0];
            s.normalize = Some(Reference {
                mem_bw: Some(4.0),
                ..Reference::default()
            });
            s
        }
        "sync" => {
            let mut s = SweepSpec::new(&["llama3-405b"], &["xpu-hbm3"], &[128 << 10]);
            s.tp = vec![8, 128];
            s.tp_sync_ns = vec![
                200.0, 500.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 5000.0, 7500.0, 10_000.0,
            ];
            s.sync_override_min_tp = 16;
            s
        }
        "efficiency" => {
            let mut s = SweepSpec::new(&models, &["xpu-hbm3"], &contexts);
            s.tp = vec![128];
            s.batch = BatchAxis::List(vec![1, 2, 4, 8, 16, 32]);
            s.normalize = Some(Reference {
                context: Some(Context(4 << 10)),
                batch: Some(32),
                ..Reference::default()
            });
            s
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown built-in sweep `{other}` (valid: {})",
                BUILTIN_SWEEPS.join(", ")
            )))
        }
    };
    s.name = name.trim().to_ascii_lowercase();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: String,
    pub chip: String,
    pub tp: u64,
    pub context: u64,
    /// Requested batch (`None` for the memory-limited maximum).
    pub requested_batch: Option<u64>,
    /// Requested per-chip bandwidth override, TB/s.
    pub mem_bw_override: Option<f64>,
    /// Requested sync override, ns.
    pub tp_sync_ns_override: Option<f64>,
    pub point: Option<Evaluated>,
    /// Why the point could not be served.
    pub infeasible: Option<String>,
    pub utps_norm: Option<f64>,
    pub stps_norm: Option<f64>,
    pub efficiency_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn feasible(&self) -> impl Iterator<Item = &Evaluated> {
        self.rows.iter().filter_map(|r| r.point.as_ref())
    }
}

struct GridPoint {
    model: ModelArch,
    chip: ChipConfig,
    tp: u64,
    context: u64,
    batch: BatchChoice,
    mem_bw: Option<f64>,
    tp_sync_ns: Option<f64>,
}

pub fn run_sweep(spec: &SweepSpec, catalog: &Catalog) -> Result<SweepResult> {
    spec.validate(catalog)?;
    let models: Vec<ModelArch> = spec.models.iter().map(|n| catalog.model(n)).collect::<Result<_>>()?;
    let chips: Vec<ChipConfig> = spec.chips.iter().map(|n| catalog.chip(n)).collect::<Result<_>>()?;
    let batches: Vec<BatchChoice> = match &spec.batch {
        BatchAxis::Max => vec![BatchChoice::Max(spec.batch_cap)],
        BatchAxis::List(v) => v.iter().map(|&b| BatchChoice::Fixed(b)).collect(),
    };
    let opt_axis = |v: &[f64]| -> Vec<Option<f64>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().copied().map(Some).collect()
        }
    };
    let bws = opt_axis(&spec.mem_bw);
    let syncs = opt_axis(&spec.tp_sync_ns);

    let mut grid = Vec::new();
    for m in &models {
        for c in &chips {
            for &Context(t) in &spec.context {
                for &tp in spec.tp.iter().filter(|&&tp| tp <= c.tp_limit()) {
                    for &batch in &batches {
                        for &bw in &bws {
                            for &sync in &syncs {
                                let sync = sync.filter(|_| tp >= spec.sync_override_min_tp);
                                grid.push(GridPoint {
                                    model: m.clone(),
                                    chip: c.clone(),
                                    tp,
                                    context: t,
                                    batch,
                                    mem_bw: bw,
                                    tp_sync_ns: sync,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let base = EvalOptions {
        flags: spec.flags,
        imbalance: spec.imbalance,
        power: catalog.power,
        pp_cap: DEFAULT_PP_CAP,
        tp_sync: None,
        mem_bw: None,
    };
    let opts_for = |g: &GridPoint| EvalOptions {
        tp_sync: g.tp_sync_ns.map(|ns| ns * NS),
        mem_bw: g.mem_bw,
        ..base.clone()
    };

    // Size every point first so each distinct token count is sampled once,
    // with the whole thread pool, before the parallel evaluation.
    let plans: Vec<Result<(SystemConfig, u64)>> = grid
        .par_iter()
        .map(|g| plan(&g.model, &g.chip, g.tp, spec.pp, g.batch, g.context, &opts_for(g)))
        .collect();
    let mut tokens: Vec<(crate::model::MoeParams, u64)> = Vec::new();
    for (g, p) in grid.iter().zip(&plans) {
        if let (Some(moe), Ok((_, b))) = (g.model.moe, p) {
            let key = (moe, b * g.model.out_tokens);
            if !tokens.contains(&key) {
                tokens.push(key);
            }
        }
    }
    for (moe, n) in &tokens {
        spec.imbalance.resolve(moe, *n)?;
    }

    let results: Vec<Result<Evaluated>> = grid
        .par_iter()
        .zip(plans)
        .map(|(g, p)| {
            let (sys, b) = p?;
            evaluate_system(&g.model, &sys, b, g.context, &opts_for(g))
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for (g, r) in grid.into_iter().zip(results) {
        let (point, infeasible) = match r {
            Ok(e) => (Some(e), None),
            Err(e) if e.is_infeasible() => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        rows.push(SweepRow {
            model: g.model.name,
            chip: g.chip.name,
            tp: g.tp,
            context: g.context,
            requested_batch: match g.batch {
                BatchChoice::Fixed(b) => Some(b),
                BatchChoice::Max(_) => None,
            },
            mem_bw_override: g.mem_bw,
            tp_sync_ns_override: g.tp_sync_ns,
            point,
            infeasible,
            utps_norm: None,
            stps_norm: None,
            efficiency_norm: None,
        });
    }
    if let Some(reference) = &spec.normalize {
        normalize(&mut rows, reference);
    }
    Ok(SweepResult {
        name: spec.name.clone(),
        rows,
    })
}

fn matches_reference(r: &SweepRow, e: &Evaluated, reference: &Reference) -> bool {
    reference.chip.as_ref().is_none_or(|c| c.eq_ignore_ascii_case(&r.chip))
        && reference.tp.is_none_or(|tp| tp == r.tp)
        && reference.batch.is_none_or(|b| b == e.batch)
        && reference.context.is_none_or(|Context(t)| t == r.context)
        && reference.mem_bw.is_none_or(|bw| bw == e.mem_bw)
        && reference
            .tp_sync_ns
            .is_none_or(|ns| (ns * NS - e.t_tp_sync).abs() <= 1e-15)
}

fn normalize(rows: &mut [SweepRow], reference: &Reference) {
    let group = |r: &SweepRow| (r.model.clone(), reference.context.is_none().then_some(r.context));
    let refs: Vec<_> = rows
        .iter()
        .filter_map(|r| {
            let e = r.point.as_ref()?;
            matches_reference(r, e, reference).then(|| (group(r), e.throughput.utps, e.throughput.stps, e.stps_per_w))
        })
        .collect();
    for r in rows.iter_mut() {
        let key = group(r);
        let (Some(e), Some((_, u, s, eff))) = (&r.point, refs.iter().find(|x| x.0 == key)) else {
            continue;
        };
        r.utps_norm = Some(e.throughput.utps / u);
        r.stps_norm = Some(e.throughput.stps / s);
        r.efficiency_norm = (*eff > 0.0).then(|| e.stps_per_w / eff);
    }
}
