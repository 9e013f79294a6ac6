//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod oracle;
mod reference;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use declim::config::{Catalog, ConfigFile};
use declim::explorer::{
    builtin_sweep, efficiency_curve, evaluate_point, max_utps, run_sweep, BatchChoice, EvalOptions, SweepResult,
};
use declim::machine::BUILTIN_CHIPS;
use declim::model::kv_bytes_per_user;
use declim::report::{render, Cell, Format, RenderTarget};
use declim::tables::{self, TableOptions};
use declim::units::{format_context, GIB};
use declim::workload::attention_ami_asymptote;
use declim::{builtin_model, capacity_gib, estimate_imbalance, DeploymentPoint, MemTech};

use reference::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn rel(ours: f64, printed: f64) -> f64 {
    (ours - printed) / printed
}

/// Rounds the way the published cells are printed (K/M values carry 2-3 digits).
fn printed_precision(v: f64) -> f64 {
    let s = declim::report::k_notation(v);
    let (num, mult) = match s.chars().last() {
        Some('K') => (&s[..s.len() - 1], 1e3),
        Some('M') => (&s[..s.len() - 1], 1e6),
        _ => (s.as_str(), 1.0),
    };
    num.parse::<f64>().unwrap_or(v) * mult
}

fn cap_column(model: usize, batch: usize) -> usize {
    model * 2 + batch
}

fn c1_capacity() -> Outcome {
    let (mismatches, dt) = timed(|| {
        let mut bad = Vec::new();
        for (mi, name) in MODELS.iter().enumerate() {
            let m = builtin_model(name).unwrap();
            for (bi, &b) in [1u64, 32].iter().enumerate() {
                for (ti, &t) in CAP_CONTEXTS.iter().enumerate() {
                    let ours = capacity_gib(&m, &DeploymentPoint::new(b, t).unwrap()).round();
                    let printed = CAPACITY[ti][cap_column(mi, bi)];
                    if ours != printed {
                        bad.push(format!("{name} B={b} T={}: {ours} vs {printed}", format_context(t)));
                    }
                }
            }
        }
        bad
    });
    outcome(
        mismatches.is_empty() && dt < Duration::from_secs(1),
        format!("{} of 48 cells differ {:?}; {dt:?}", mismatches.len(), mismatches),
    )
}

fn c2_ami() -> Outcome {
    let ((worst, bad), dt) = timed(|| {
        let mut worst: (f64, String) = (0.0, String::new());
        let mut bad = Vec::new();
        for (mi, name) in MODELS.iter().enumerate() {
            let m = builtin_model(name).unwrap();
            for (bi, &b) in [1u64, 32].iter().enumerate() {
                for (ti, &t) in CAP_CONTEXTS.iter().enumerate() {
                    let ours = declim::arithmetic_intensity(&m, &DeploymentPoint::new(b, t).unwrap()).unwrap();
                    let printed = AMI[ti][cap_column(mi, bi)];
                    let e = rel(ours, printed);
                    let label = format!(
                        "{name} B={b} T={}: {ours:.2} vs {printed} ({:+.1}%)",
                        format_context(t),
                        e * 100.0
                    );
                    if e.abs() > worst.0.abs() {
                        worst = (e, label.clone());
                    }
                    if e.abs() > 0.02 {
                        bad.push(label);
                    }
                }
            }
        }
        (worst, bad)
    });
    outcome(
        bad.is_empty() && dt < Duration::from_secs(1),
        format!("{} of 48 outside 2%; worst {}; {dt:?}", bad.len(), worst.1),
    )
}

fn c3_kv() -> Outcome {
    let m = builtin_model("llama3-405b").unwrap();
    let kv = kv_bytes_per_user(&m, 64 << 10) / GIB;
    outcome(
        (kv - 15.75).abs() <= 0.1,
        format!("405B single user at 64K holds {kv:.3} GiB of KV"),
    )
}

fn xpu_row(t: &declim::report::Table, section: &str, tp: u64, column: &str) -> Option<Cell> {
    t.cell(section, &format!("xPU-HBM3-TP{tp}"), column).cloned()
}

fn c4_utps(catalog: &Catalog, opts: &TableOptions) -> Outcome {
    let (t3, dt) = timed(|| tables::t3(catalog, opts).unwrap());
    let mut errs = Vec::new();
    let mut bad = Vec::new();
    let mut check = |label: String, ours: Option<f64>, printed: f64| match ours {
        Some(v) => {
            let e = rel(v, printed);
            errs.push(e);
            if e.abs() > 0.15 {
                bad.push(format!("{label}: {v:.0} vs {printed}"));
            }
        }
        None => bad.push(format!("{label}: dash vs {printed}")),
    };
    for (mi, name) in MODELS.iter().enumerate() {
        let section = tables::display_name(name);
        for (ti, &tp) in TPS.iter().enumerate() {
            for (ci, &ctx) in SWEEP_CONTEXTS.iter().enumerate() {
                let col = format_context(ctx);
                let ours = match xpu_row(&t3, &section, tp, &col) {
                    Some(Cell::Num { value, .. }) => Some(value),
                    _ => None,
                };
                check(format!("{name} TP{tp} {col} B=1"), ours, T3_UTPS[mi][ti][ci]);
            }
        }
    }
    let t2 = tables::t2(catalog, opts).unwrap();
    for (mi, name) in MODELS.iter().enumerate() {
        let section = tables::display_name(name);
        for (ti, &tp) in TPS.iter().enumerate() {
            for (ci, &ctx) in T2_CONTEXTS.iter().enumerate() {
                let col = format!("STPS (UTPS) {}", format_context(ctx));
                let ours = match xpu_row(&t2, &section, tp, &col) {
                    Some(Cell::Pair { utps, .. }) => Some(utps),
                    _ => None,
                };
                check(
                    format!("{name} TP{tp} {} max-batch", format_context(ctx)),
                    ours,
                    T2_PAIRS[mi][ti][ci].1,
                );
            }
        }
    }
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = errs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        bad.is_empty() && dt < Duration::from_secs(10),
        format!(
            "{} cells; signed error mean {:+.2}% min {:+.2}% max {:+.2}%; {} outside 15% {:?}; batch-1 grid {dt:?}",
            errs.len(),
            mean * 100.0,
            lo * 100.0,
            hi * 100.0,
            bad.len(),
            bad
        ),
    )
}

fn c5_stps(catalog: &Catalog, opts: &TableOptions) -> (Outcome, String) {
    let mut inconsistent = Vec::new();
    let mut off = Vec::new();
    let mut cells = 0;
    for (mi, name) in MODELS.iter().enumerate() {
        let m = catalog.model(name).unwrap();
        let chip = catalog.chip("xpu-hbm3").unwrap();
        for (ti, &tp) in TPS.iter().enumerate() {
            for (ci, &ctx) in SWEEP_CONTEXTS.iter().enumerate() {
                cells += 1;
                let e = evaluate_point(&m, &chip, tp, None, BatchChoice::Max(None), ctx, &opts.eval).unwrap();
                let t = &e.throughput;
                let n = (e.pp * e.batch) as f64;
                // The quotient can round by one ulp; the product is the stored value.
                if t.stps != n * t.utps || (t.stps / t.utps - n).abs() > n * f64::EPSILON {
                    inconsistent.push(format!("{name} TP{tp} {}", format_context(ctx)));
                }
                let printed = T4_PAIRS[mi][ti][ci].0;
                if rel(t.stps, printed).abs() > 0.20 {
                    off.push(rel(t.stps, printed));
                }
            }
        }
    }
    let worst = off
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    let main = outcome(
        inconsistent.is_empty() && off.is_empty(),
        format!(
            "stps = pp*B*utps in {}/{cells} cells; stps within 20% of printed in {}/{cells} (worst {:+.0}%; printed cells repeat the batch-1 UTPS)",
            cells - inconsistent.len(),
            cells - off.len(),
            worst * 100.0
        ),
    );

    let t2 = tables::t2(catalog, opts).unwrap();
    let mut lines = Vec::new();
    for (mi, name) in MODELS.iter().enumerate() {
        let section = tables::display_name(name);
        for (ti, &tp) in TPS.iter().enumerate() {
            for (ci, &ctx) in T2_CONTEXTS.iter().enumerate() {
                let col = format!("STPS (UTPS) {}", format_context(ctx));
                if let Some(Cell::Pair { stps, .. }) = xpu_row(&t2, &section, tp, &col) {
                    let printed = T2_PAIRS[mi][ti][ci].0;
                    lines.push(rel(printed_precision(stps), printed));
                }
            }
        }
    }
    let within = lines.iter().filter(|e| e.abs() <= 0.20).count();
    let worst = lines
        .iter()
        .cloned()
        .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    let extra = format!(
        "max-batch stps vs the 4K/128K summary grid: {within}/{} within 20%, worst {:+.1}%",
        lines.len(),
        worst * 100.0
    );
    (main, extra)
}

fn c6_imbalance() -> Outcome {
    let (big, dt_big) = timed(|| estimate_imbalance(256, 8, 64, 1_000_000, 7).unwrap());
    let again = estimate_imbalance(256, 8, 64, 10_000, 11).unwrap();
    let (small, dt_small) = timed(|| estimate_imbalance(256, 8, 64, 10_000, 11).unwrap());
    let one = estimate_imbalance(256, 8, 1, 1000, 3).unwrap();
    let reference = oracle::imbalance(256, 8, 32, 20_000, 99);
    let ours32 = estimate_imbalance(256, 8, 32, 20_000, 5).unwrap();
    let pass = rel(big.mi, MI_64).abs() <= 0.10
        && one.mi == 1.0
        && again.mi.to_bits() == small.mi.to_bits()
        && dt_big < Duration::from_secs(60)
        && dt_small < Duration::from_secs(2)
        && rel(ours32.mi, reference).abs() <= 0.02;
    outcome(
        pass,
        format!(
            "MI(64 tokens) = {:.4} in {dt_big:?}; 1e4 trials in {dt_small:?}; tokens=1 gives {}; repeat bit-equal {}; 32 tokens {:.4} vs independent sampler {:.4}",
            big.mi,
            one.mi,
            again.mi.to_bits() == small.mi.to_bits(),
            ours32.mi,
            reference
        ),
    )
}

fn c7_asymptotes() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, expected) in [("llama3-405b", 32.0), ("deepseekv3", 512.0)] {
        let m = builtin_model(name).unwrap();
        let a = attention_ami_asymptote(&m);
        let ami = declim::arithmetic_intensity(&m, &DeploymentPoint::new(32, 10_000_000).unwrap()).unwrap();
        let ok = a == expected && rel(ami, a).abs() <= 0.05;
        pass &= ok;
        notes.push(format!(
            "{name}: asymptote {a}, AMI at T=1e7 {ami:.1} ({:+.1}%)",
            rel(ami, a) * 100.0
        ));
    }
    outcome(pass, notes.join("; "))
}

fn sweep(name: &str, catalog: &Catalog) -> SweepResult {
    let mut spec = builtin_sweep(name).unwrap();
    spec.imbalance.trials = 100_000;
    run_sweep(&spec, catalog).unwrap()
}

fn c8_bandwidth(catalog: &Catalog) -> Outcome {
    let result = sweep("bandwidth", catalog);
    let mut bad = Vec::new();
    let mut series = 0;
    for name in MODELS {
        for ctx in [4u64 << 10, 32 << 10, 128 << 10] {
            let pts: Vec<_> = result
                .rows
                .iter()
                .filter(|r| r.model == name && r.context == ctx)
                .collect();
            let label = format!("{name} {}", format_context(ctx));
            if pts.len() != 30 || pts.iter().any(|r| r.utps_norm.is_none()) {
                bad.push(format!("{label}: incomplete"));
                continue;
            }
            series += 1;
            let u: Vec<f64> = pts.iter().map(|r| r.utps_norm.unwrap()).collect();
            if u.windows(2).any(|w| w[1] <= w[0]) {
                bad.push(format!("{label}: not strictly increasing"));
            }
            if u.windows(3).any(|w| (w[2] - w[1]) - (w[1] - w[0]) > 1e-12 * w[2]) {
                bad.push(format!("{label}: marginal gain grows"));
            }
            for r in &pts {
                let e = r.point.as_ref().unwrap();
                let bound = 1.0 / (e.latency.t_compute + e.latency.t_exposed());
                if e.throughput.utps > bound * 1.01 {
                    bad.push(format!("{label}: above 1/(t_compute+t_exposed) at {} TB/s", e.mem_bw));
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{series}/9 series well-formed; {bad:?}"))
}

fn c9_sync(catalog: &Catalog) -> Outcome {
    let result = sweep("sync", catalog);
    let tp8 = result
        .rows
        .iter()
        .filter(|r| r.tp == 8)
        .filter_map(|r| r.point.as_ref())
        .map(|e| e.throughput.utps)
        .next();
    let tp128: Vec<(f64, f64)> = result
        .rows
        .iter()
        .filter(|r| r.tp == 128)
        .filter_map(|r| Some((r.tp_sync_ns_override?, r.point.as_ref()?.throughput.utps)))
        .collect();
    let Some(base) = tp8 else {
        return outcome(false, "TP8 reference missing");
    };
    let losing: Vec<f64> = tp128.iter().filter(|(_, u)| *u <= base).map(|(s, _)| *s).collect();

    let m = catalog.model("llama3-405b").unwrap();
    let sram = catalog.chip("xpu-sram").unwrap();
    let opts = EvalOptions::default();
    let sram8 = evaluate_point(&m, &sram, 8, None, BatchChoice::Fixed(1), 128 << 10, &opts).map(|e| e.throughput.utps);
    let crossover = sram8.as_ref().ok().and_then(|&b8| {
        [
            200.0, 500.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0, 5000.0, 7500.0, 10_000.0,
        ]
        .into_iter()
        .find(|&ns| {
            let o = EvalOptions {
                tp_sync: Some(ns * 1e-9),
                ..opts.clone()
            };
            evaluate_point(&m, &sram, 128, None, BatchChoice::Fixed(1), 128 << 10, &o)
                .map(|e| e.throughput.utps <= b8)
                .unwrap_or(false)
        })
    });
    let sram_note = match (sram8, crossover) {
        (Err(e), _) => format!("SRAM TP8 not servable ({e})"),
        (Ok(_), Some(ns)) => format!("SRAM TP128 falls below TP8 at {ns} ns"),
        (Ok(_), None) => "SRAM TP128 stays ahead of TP8 up to 10 us".into(),
    };
    outcome(
        tp128.len() == 10 && losing.is_empty(),
        format!(
            "HBM3 TP8 {base:.0} UTPS; TP128 ranges {:.0}..{:.0} over 10 sync values, behind at {losing:?}; {sram_note}",
            tp128.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
            tp128.iter().map(|x| x.1).fold(0.0, f64::max)
        ),
    )
}

fn c10_utilization(catalog: &Catalog) -> Outcome {
    let opts = EvalOptions::default();
    let mut bad = Vec::new();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for chip_name in BUILTIN_CHIPS {
        let chip = catalog.chip(chip_name).unwrap();
        if chip.mem_tech == MemTech::Pim {
            continue;
        }
        for name in MODELS {
            let m = catalog.model(name).unwrap();
            for ctx in [4u64 << 10, 128 << 10] {
                let Ok(e) = max_utps(&m, &chip, ctx, false, &opts) else {
                    continue;
                };
                checked += 1;
                let u = e.throughput.tensor_utilization;
                worst = worst.max(u);
                if u > 0.01 {
                    bad.push(format!(
                        "{chip_name} {name} {} TP{}: {:.2}%",
                        format_context(ctx),
                        e.tp,
                        u * 100.0
                    ));
                }
            }
        }
    }
    outcome(
        bad.is_empty() && checked > 0,
        format!(
            "{checked} best-UTPS configs at B=1, worst {:.2}%; above 1%: {bad:?}",
            worst * 100.0
        ),
    )
}

fn c11_efficiency(catalog: &Catalog) -> Outcome {
    let m = catalog.model("llama3-70b").unwrap();
    let chip = catalog.chip("xpu-hbm3").unwrap();
    let curve = efficiency_curve(&m, &chip, 128, &[4 << 10], 32, &EvalOptions::default()).unwrap();
    let (first, last) = (curve.first().unwrap(), curve.last().unwrap());
    let gain = last.stps_per_w / first.stps_per_w;
    let loss = 1.0 - last.utps / first.utps;
    outcome(
        gain >= 20.0 && loss <= 0.15,
        format!(
            "B=1 -> B={}: STPS/W x{gain:.1} (published x{CURVE_GAIN}), UTPS {:.0} -> {:.0} (published {CURVE_UTPS_B1} -> {CURVE_UTPS_BMAX}), loss {:.1}%",
            last.batch,
            first.utps,
            last.utps,
            loss * 100.0
        ),
    )
}

fn cent_config() -> ConfigFile {
    ConfigFile::from_json(
        r#"{"chips": [{"name": "cent-pim", "mem_bw": 16.0, "tensor_compute": 0.5, "scalar_compute": 0.1,
            "mem_capacity": "16GB", "mem_tech": "pim"}]}"#,
    )
    .unwrap()
}

fn c12_golden(catalog: &Catalog, opts: &TableOptions) -> Outcome {
    let golden = include_str!("../golden/t6.md");
    let t6 = render(
        &tables::t6(catalog, opts).unwrap(),
        &RenderTarget::new(Format::Markdown),
    )
    .unwrap();
    let golden_ok = t6 == golden;

    let small = TableOptions {
        models: vec!["llama3-70b".into()],
        ..opts.clone()
    };
    let t3 = tables::t3(catalog, &small).unwrap();
    let dash_rows = ["CENT-TP", "CENT-PP"].iter().all(|row| {
        SWEEP_CONTEXTS.iter().all(|&c| {
            matches!(t3.cell("Llama3-70B", row, &format_context(c)),
                Some(Cell::Dash { reason, .. }) if reason.contains("no CENT chip"))
        })
    });
    let md = render(&t3, &RenderTarget::new(Format::Markdown)).unwrap();
    let dash_text = md
        .lines()
        .filter(|l| l.starts_with("| CENT"))
        .all(|l| l.matches("| - ").count() == 6);

    let with_cent = Catalog::from_config(&cent_config());
    let t3c = tables::t3(&with_cent, &small).unwrap();
    let numeric = SWEEP_CONTEXTS.iter().any(|&c| {
        matches!(
            t3c.cell("Llama3-70B", "CENT-TP", &format_context(c)),
            Some(Cell::Num { .. })
        )
    });
    outcome(
        golden_ok && dash_rows && dash_text && numeric,
        format!(
            "capacity/AMI golden match {golden_ok}; CENT rows render as reasoned dashes {}; CENT rows numeric once a CENT chip is configured {numeric}",
            dash_rows && dash_text
        ),
    )
}

fn main() -> ExitCode {
    let catalog = Catalog::builtin();
    let opts = TableOptions::default();
    let (c5, c5_extra) = c5_stps(&catalog, &opts);
    let results: Vec<(&str, Outcome)> = vec![
        ("capacity cells exact", c1_capacity()),
        ("arithmetic intensity cells within 2%", c2_ami()),
        ("KV footprint headline", c3_kv()),
        ("UTPS cells within 15%", c4_utps(&catalog, &opts)),
        ("STPS pairing and printed STPS within 20%", c5),
        ("MoE imbalance estimate", c6_imbalance()),
        ("attention intensity asymptotes", c7_asymptotes()),
        ("bandwidth sweep shape", c8_bandwidth(&catalog)),
        ("sync latency sweep", c9_sync(&catalog)),
        ("tensor utilization at batch 1", c10_utilization(&catalog)),
        ("batching efficiency curve", c11_efficiency(&catalog)),
        ("golden capacity table and CENT rows", c12_golden(&catalog, &opts)),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("info  5 {c5_extra}");
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
