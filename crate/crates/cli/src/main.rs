use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use declim::config::{Catalog, ConfigFile};
use declim::explorer::{builtin_sweep, evaluate_point, run_sweep, BatchChoice, EvalOptions, Evaluated, SweepSpec};
use declim::moe::ImbalanceSettings;
use declim::report::{render, render_sweep, Format, RenderTarget};
use declim::tables::{self, capacity_table, TableOptions, CAPACITY_BATCHES, CAPACITY_CONTEXTS};
use declim::units::parse_context;
use declim::{Error, MappingFlags};

#[derive(Parser)]
#[command(name = "declim", version, about = "Analytical performance limits for LLM decoding")]
struct Cli {
    /// JSON file with extra models, chips, power constants and sweeps.
    #[arg(long, global = true, env = "DECLIM_CONFIG")]
    config: Option<PathBuf>,

    /// markdown, csv or json.
    #[arg(long, global = true, default_value = "markdown", value_parser = parse_format)]
    format: Format,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print full significant-digit numbers instead of 48K-style values.
    #[arg(long, global = true)]
    raw: bool,

    /// Significant digits in raw mode.
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=17))]
    precision: u64,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Sampling {
    /// Seed for MoE imbalance sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials for MoE imbalance.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
}

impl Sampling {
    fn apply(&self, mut s: ImbalanceSettings) -> ImbalanceSettings {
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(trials) = self.trials {
            s.trials = trials;
            s.min_trials = s.min_trials.min(trials);
        }
        s
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Memory capacity and arithmetic intensity grid.
    Capacity {
        #[arg(long, value_delimiter = ',')]
        model: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        batch: Vec<u64>,
        #[arg(long, value_delimiter = ',', value_parser = parse_ctx)]
        context: Vec<u64>,
    },
    /// Latency breakdown and throughput for one deployment.
    Throughput {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "xpu-hbm3")]
        chip: String,
        #[arg(long, default_value_t = 8)]
        tp: u64,
        /// Pipeline stages; the minimum that fits when omitted.
        #[arg(long)]
        pp: Option<u64>,
        /// A batch size or `max`.
        #[arg(long, default_value = "1", value_parser = parse_batch)]
        batch: BatchArg,
        #[arg(long, default_value = "4K", value_parser = parse_ctx)]
        context: u64,
        /// TP sync latency override in nanoseconds.
        #[arg(long)]
        sync_ns: Option<f64>,
        /// Per-chip memory bandwidth override in TB/s.
        #[arg(long)]
        bw_tbs: Option<f64>,
        #[arg(long)]
        attention_single_device: bool,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Regenerate a result table: t2, t3, t4 or t6.
    Tables {
        which: String,
        #[arg(long, default_value = "xpu-hbm3")]
        chip: String,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Run a sweep from a JSON spec file, a built-in name, or every sweep in the config.
    Sweep {
        /// Spec file path or built-in name (bandwidth, sync, efficiency).
        spec: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Check a config file and list what it defines.
    Validate,
}

#[derive(Clone, Copy)]
enum BatchArg {
    Fixed(u64),
    Max,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_ctx(s: &str) -> Result<u64, String> {
    parse_context(s).map_err(|e| e.to_string())
}

fn parse_batch(s: &str) -> Result<BatchArg, String> {
    if s.trim().eq_ignore_ascii_case("max") {
        return Ok(BatchArg::Max);
    }
    match s.trim().parse::<u64>() {
        Ok(0) | Err(_) => Err(format!("batch must be a positive count or `max`, got `{s}`")),
        Ok(b) => Ok(BatchArg::Fixed(b)),
    }
}

/// Exit status for an error: 2 for bad input, 3 when nothing is servable, 1 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::Constraint(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn load_config(path: &Option<PathBuf>) -> declim::Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).map_err(|e| match e {
            Error::Io(msg) => Error::Config(msg),
            other => other,
        }),
        None => Ok(ConfigFile::default()),
    }
}

fn breakdown(e: &Evaluated, format: Format, target: &RenderTarget) -> String {
    if format == Format::Json {
        return serde_json::to_string_pretty(e).expect("serializes") + "\n";
    }
    let num = |v: f64| declim::report::significant(v, target.precision);
    let us = |s: f64| format!("{} us", num(s * 1e6));
    let l = &e.latency;
    let t = &e.throughput;
    let fields: Vec<(&str, String)> = vec![
        ("model", e.model.clone()),
        ("chip", e.chip.clone()),
        ("tp", e.tp.to_string()),
        ("pp", e.pp.to_string()),
        ("batch", e.batch.to_string()),
        ("context", e.context.to_string()),
        ("moe_imbalance", num(e.mi)),
        ("t_compute", us(l.t_compute)),
        ("t_mem", us(l.t_mem)),
        ("t_exposed_sync", us(l.t_exposed_sync)),
        ("t_exposed_pp", us(l.t_exposed_pp)),
        ("t_exposed_moe_balance", us(l.t_exposed_moe_balance)),
        ("t_exposed_moe_routing", us(l.t_exposed_moe_routing)),
        ("t_exposed_other", us(l.t_exposed_other)),
        ("t_batch", us(l.t_batch)),
        ("utps", num(t.utps)),
        ("stps", num(t.stps)),
        ("bottleneck", t.bottleneck.to_string()),
        ("tensor_utilization", num(t.tensor_utilization)),
        ("mem_bw_utilization", num(t.mem_bw_utilization)),
        ("capacity_gib", num(e.capacity_gib)),
        ("power_w", num(e.power_w)),
        ("stps_per_w", num(e.stps_per_w)),
    ];
    match format {
        Format::Csv => {
            let (k, v): (Vec<&str>, Vec<String>) = fields.into_iter().unzip();
            format!("{}\n{}\n", k.join(","), v.join(","))
        }
        _ => {
            let mut out = String::from("| quantity | value |\n|:---|---:|\n");
            for (k, v) in fields {
                out += &format!("| {k} | {v} |\n");
            }
            out
        }
    }
}

fn run(cli: Cli) -> declim::Result<(String, bool)> {
    let cfg = load_config(&cli.config)?;
    let catalog = Catalog::from_config(&cfg);
    let target = RenderTarget {
        format: cli.format,
        precision: cli.precision as usize,
        k_notation: !cli.raw,
    };
    match cli.cmd {
        Cmd::Capacity { model, batch, context } => {
            let names = if model.is_empty() { catalog.model_names() } else { model };
            let models = names
                .iter()
                .map(|n| catalog.model(n))
                .collect::<declim::Result<Vec<_>>>()?;
            let batches = if batch.is_empty() {
                CAPACITY_BATCHES.to_vec()
            } else {
                batch
            };
            if batches.contains(&0) {
                return Err(Error::Parse("batch sizes must be >= 1".into()));
            }
            let contexts = if context.is_empty() {
                CAPACITY_CONTEXTS.to_vec()
            } else {
                context
            };
            Ok((render(&capacity_table(&models, &batches, &contexts)?, &target)?, true))
        }
        Cmd::Throughput {
            model,
            chip,
            tp,
            pp,
            batch,
            context,
            sync_ns,
            bw_tbs,
            attention_single_device,
            sampling,
        } => {
            let m = catalog.model(&model)?;
            let c = catalog.chip(&chip)?;
            let opts = EvalOptions {
                flags: MappingFlags {
                    attention_single_device,
                },
                imbalance: sampling.apply(ImbalanceSettings::default()),
                power: catalog.power,
                tp_sync: sync_ns.map(|ns| ns * 1e-9),
                mem_bw: bw_tbs,
                ..EvalOptions::default()
            };
            let batch = match batch {
                BatchArg::Fixed(b) => BatchChoice::Fixed(b),
                BatchArg::Max => BatchChoice::Max(None),
            };
            let e = evaluate_point(&m, &c, tp, pp, batch, context, &opts)?;
            Ok((breakdown(&e, cli.format, &target), true))
        }
        Cmd::Tables { which, chip, sampling } => {
            let opts = TableOptions {
                chip,
                eval: EvalOptions {
                    imbalance: sampling.apply(ImbalanceSettings::default()),
                    power: catalog.power,
                    ..EvalOptions::default()
                },
                ..TableOptions::default()
            };
            Ok((render(&tables::build(&which, &catalog, &opts)?, &target)?, true))
        }
        Cmd::Sweep { spec, sampling } => {
            let specs: Vec<SweepSpec> = match spec {
                Some(s) if std::path::Path::new(&s).is_file() => {
                    let text = std::fs::read_to_string(&s).map_err(|e| Error::Config(format!("{s}: {e}")))?;
                    vec![SweepSpec::from_json(&text)?]
                }
                Some(s) => match cfg.sweeps.iter().find(|x| x.name.eq_ignore_ascii_case(&s)) {
                    Some(found) => vec![found.clone()],
                    None => vec![builtin_sweep(&s)?],
                },
                None if cfg.sweeps.is_empty() => {
                    return Err(Error::Config("no sweep given and the config defines none".into()))
                }
                None => cfg.sweeps.clone(),
            };
            let mut out = String::new();
            let mut any_feasible = false;
            let mut any_rows = false;
            for mut s in specs {
                s.imbalance = sampling.apply(s.imbalance);
                let result = run_sweep(&s, &catalog)?;
                any_rows |= !result.rows.is_empty();
                any_feasible |= result.feasible().next().is_some();
                out += &render_sweep(&result, cli.format)?;
            }
            Ok((out, any_feasible || !any_rows))
        }
        Cmd::Validate => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::Config("no config given (use --config or DECLIM_CONFIG)".into()))?;
            let cfg = ConfigFile::load(path).map_err(|e| match e {
                Error::Io(msg) => Error::Config(msg),
                other => other,
            })?;
            Ok((
                format!(
                    "{}: ok ({} models, {} chips, {} sweeps)\n",
                    path.display(),
                    cfg.models.len(),
                    cfg.chips.len(),
                    cfg.sweeps.len()
                ),
                true,
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_path = cli.out.clone();
    match run(cli) {
        Ok((text, servable)) => {
            let written = match &out_path {
                Some(p) => std::fs::write(p, &text),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if servable {
                ExitCode::SUCCESS
            } else {
                eprintln!("no point in the sweep is servable");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
