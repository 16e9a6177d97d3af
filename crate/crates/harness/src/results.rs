//! results.csv / results.md emission. Every number goes through [`fmt4`] so
//! the two files always agree.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::{Algorithm, SimMode, SimulateConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{Experiment, RunResult};
use crate::simulate::SimReport;

pub fn fmt4(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// `0.05` → `.05`, the short form used in column heads.
pub fn short_gamma(g: f64) -> String {
    let s = format!("{g}");
    match s.strip_prefix('0') {
        Some(rest) if rest.starts_with('.') => rest.to_string(),
        _ => s,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Data(format!("csv encoding: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Data(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Pipe table with every column padded to its widest cell; the first
/// `left` columns are left-aligned, the rest right-aligned.
pub fn markdown_table(header: &[String], rows: &[Vec<String>], left: usize) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count(), 3]).max().unwrap())
        .collect();
    let cell = |c: usize, s: &str| {
        let pad = widths[c] - s.chars().count();
        if c < left {
            format!("{s}{}", " ".repeat(pad))
        } else {
            format!("{}{s}", " ".repeat(pad))
        }
    };
    let mut out = String::new();
    let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(header.iter().enumerate().map(|(c, h)| cell(c, h)).collect()));
    out.push_str(&line(
        widths
            .iter()
            .enumerate()
            .map(|(c, &w)| if c < left { format!(":{}", "-".repeat(w - 1)) } else { format!("{}:", "-".repeat(w - 1)) })
            .collect(),
    ));
    for r in rows {
        out.push_str(&line(r.iter().enumerate().map(|(c, v)| cell(c, v)).collect()));
    }
    out
}

pub const EXPERIMENT_HEADER: [&str; 13] = [
    "experiment",
    "source",
    "k",
    "rows",
    "algorithm",
    "n",
    "gamma",
    "loss",
    "reorders",
    "metric",
    "value",
    "status",
    "fingerprint",
];

fn metrics(r: &RunResult) -> Vec<(&'static str, f64)> {
    let mut m = vec![("total_accuracy", r.total_accuracy), ("final20_accuracy", r.final_accuracy)];
    if let Some(e) = r.mean_edge {
        m.push(("mean_edge", e));
    }
    m
}

pub fn experiment_csv(exp: &Experiment) -> Result<String> {
    let mut rows = Vec::new();
    for r in &exp.results {
        for (metric, value) in metrics(r) {
            rows.push(vec![
                exp.config.name.clone(),
                exp.source_name.clone(),
                exp.k.to_string(),
                exp.rows.to_string(),
                r.variant.algorithm.name().to_string(),
                r.variant.n.to_string(),
                r.variant.gamma.map(|g| g.to_string()).unwrap_or_default(),
                r.variant.loss.map(|l| l.to_string()).unwrap_or_default(),
                r.reorders.to_string(),
                metric.to_string(),
                fmt4(value),
                if r.partial { "partial" } else { "ok" }.to_string(),
                exp.config.fingerprint.clone(),
            ]);
        }
    }
    csv_string(&EXPERIMENT_HEADER, &rows)
}

pub fn timings_csv(exp: &Experiment) -> Result<String> {
    let header = ["experiment", "algorithm", "n", "gamma", "loss", "reorders", "seconds_mean"];
    let rows: Vec<Vec<String>> = exp
        .results
        .iter()
        .map(|r| {
            vec![
                exp.config.name.clone(),
                r.variant.algorithm.name().to_string(),
                r.variant.n.to_string(),
                r.variant.gamma.map(|g| g.to_string()).unwrap_or_default(),
                r.variant.loss.map(|l| l.to_string()).unwrap_or_default(),
                r.reorders.to_string(),
                fmt4(r.seconds),
            ]
        })
        .collect();
    csv_string(&header, &rows)
}

/// Three tables shaped like the usual boosting comparison: final-20%
/// accuracy, full accuracy and mean seconds per run, one row per booster
/// size.
pub fn experiment_markdown(exp: &Experiment) -> String {
    let find = |alg: Algorithm, n: Option<usize>, pred: &dyn Fn(&RunResult) -> bool| {
        exp.results.iter().find(|r| r.variant.algorithm == alg && n.is_none_or(|n| r.variant.n == n) && pred(r))
    };
    let cfg = &exp.config;
    let has = |a: Algorithm| cfg.algorithms.contains(&a);
    let mut ns: Vec<usize> = cfg.ns.clone();
    ns.dedup();

    let mut header: Vec<String> = vec!["Dataset".into(), "k".into(), "N".into()];
    if has(Algorithm::SingleWeak) {
        header.push("Best single".into());
    }
    if has(Algorithm::AdaboostOlm) {
        if cfg.losses.len() == 1 {
            header.push("OLM".into());
        } else {
            header.extend(cfg.losses.iter().map(|l| format!("OLM {l}")));
        }
    }
    if has(Algorithm::OnlineMbbm) {
        header.extend(cfg.gammas.iter().map(|&g| format!("MB {}", short_gamma(g))));
        header.push("Best MBBM".into());
    }

    let table = |value: &dyn Fn(&RunResult) -> f64, best_is_max: bool| {
        let mut rows = Vec::new();
        for &n in &ns {
            let mut row = vec![exp.source_name.clone(), exp.k.to_string(), n.to_string()];
            let cell = |r: Option<&RunResult>| r.map(|r| fmt4(value(r))).unwrap_or_else(|| "-".into());
            if has(Algorithm::SingleWeak) {
                row.push(cell(find(Algorithm::SingleWeak, None, &|_| true)));
            }
            if has(Algorithm::AdaboostOlm) {
                for &l in &cfg.losses {
                    row.push(cell(find(Algorithm::AdaboostOlm, Some(n), &|r| r.variant.loss == Some(l))));
                }
            }
            if has(Algorithm::OnlineMbbm) {
                let mut best: Option<&RunResult> = None;
                for &g in &cfg.gammas {
                    let r = find(Algorithm::OnlineMbbm, Some(n), &|r| r.variant.gamma == Some(g));
                    row.push(cell(r));
                    if let Some(r) = r {
                        let better =
                            best.is_none_or(|b| if best_is_max { value(r) > value(b) } else { value(r) < value(b) });
                        if better {
                            best = Some(r);
                        }
                    }
                }
                row.push(cell(best));
            }
            rows.push(row);
        }
        markdown_table(&header, &rows, 1)
    };

    let reorders = exp.results.first().map_or(0, |r| r.reorders);
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", cfg.name);
    let _ = writeln!(out, "Source `{}`, {} rows, {} reorderings.\n", exp.source_name, exp.rows, reorders);
    let _ = writeln!(out, "## Final 20% accuracy\n");
    out.push_str(&table(&|r| r.final_accuracy, true));
    let _ = writeln!(out, "\n## Full accuracy\n");
    out.push_str(&table(&|r| r.total_accuracy, true));
    let _ = writeln!(out, "\n## Seconds per run\n");
    // Best MBBM here is the fastest γ, not the most accurate one
    out.push_str(&table(&|r| r.seconds, false));
    if exp.is_partial() {
        let _ = writeln!(out, "\nSome runs stopped early; see results.csv status column.");
    }
    out
}

pub fn emit_experiment(exp: &Experiment, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_file(&dir.join("results.csv"), &experiment_csv(exp)?)?;
    write_file(&dir.join("results.md"), &experiment_markdown(exp))?;
    write_file(&dir.join("timings.csv"), &timings_csv(exp)?)?;
    if exp.config.audit {
        let audit_dir = dir.join("audit");
        std::fs::create_dir_all(&audit_dir).map_err(|e| HarnessError::io(&audit_dir, e))?;
        for cell in &exp.cells {
            if let Some(log) = &cell.audit {
                let stem = exp.variants[cell.variant].file_stem();
                write_file(&audit_dir.join(format!("{stem}_r{}.jsonl", cell.reorder + 1)), log)?;
            }
        }
    }
    Ok(())
}

pub const SIMULATE_HEADER: [&str; 12] =
    ["experiment", "booster", "mode", "k", "gamma", "edge", "n", "rounds", "seeds", "metric", "value", "fingerprint"];

fn sim_metrics(r: &SimReport) -> Vec<(&'static str, f64)> {
    let mut m = vec![
        ("error_rate", r.error_rate),
        ("vote_loss_rate", r.vote_loss_rate),
        ("phi", r.phi),
        ("phi_exact", if r.phi_exact { 1.0 } else { 0.0 }),
        ("pooled_se", r.pooled_se),
        ("vote_loss_z", r.vote_loss_z()),
        ("within_3se", if r.within_3se() { 1.0 } else { 0.0 }),
        ("error_bound", r.error_bound),
    ];
    if let Some(n) = &r.noise {
        m.extend([
            ("noise_t0", n.t0 as f64),
            ("noise_mistakes_mean", n.mean_mistakes),
            ("noise_mistakes_min", n.min_mistakes as f64),
            ("noise_frac_ge_055", n.frac_above_055),
            ("noise_expected", n.expected),
        ]);
    }
    m
}

fn mode_name(m: SimMode) -> &'static str {
    match m {
        SimMode::ConstantEdge => "constant_edge",
        SimMode::TwoPhase => "two_phase",
    }
}

pub fn simulation_csv(cfg: &SimulateConfig, reports: &[SimReport]) -> Result<String> {
    let mut rows = Vec::new();
    for r in reports {
        for (metric, value) in sim_metrics(r) {
            rows.push(vec![
                cfg.name.clone(),
                cfg.booster.name().to_string(),
                mode_name(cfg.mode).to_string(),
                r.point.k.to_string(),
                r.point.gamma.to_string(),
                fmt4(r.point.edge()),
                r.point.n.to_string(),
                cfg.rounds.to_string(),
                r.seeds.to_string(),
                metric.to_string(),
                fmt4(value),
                cfg.fingerprint.clone(),
            ]);
        }
    }
    csv_string(&SIMULATE_HEADER, &rows)
}

pub fn simulation_markdown(cfg: &SimulateConfig, reports: &[SimReport]) -> String {
    let two_phase = cfg.mode == SimMode::TwoPhase;
    let mut header: Vec<String> = ["k", "γ", "edge", "N", "seeds", "error", "vote loss", "φ", "SE", "z", "bound"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if two_phase {
        header.extend(["T₀", "noise mistakes", "min", "≥ 0.55·T₀"].iter().map(|s| s.to_string()));
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.point.k.to_string(),
                r.point.gamma.to_string(),
                fmt4(r.point.edge()),
                r.point.n.to_string(),
                r.seeds.to_string(),
                fmt4(r.error_rate),
                fmt4(r.vote_loss_rate),
                fmt4(r.phi),
                fmt4(r.pooled_se),
                fmt4(r.vote_loss_z()),
                fmt4(r.error_bound),
            ];
            if let Some(n) = &r.noise {
                row.extend([
                    n.t0.to_string(),
                    fmt4(n.mean_mistakes),
                    n.min_mistakes.to_string(),
                    fmt4(n.frac_above_055),
                ]);
            }
            row
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", cfg.name);
    let _ = writeln!(
        out,
        "Booster `{}`, {} mode, {} rounds per seed. Planted edge is 2γ; φ is the exact potential at that edge.\n",
        cfg.booster.name(),
        mode_name(cfg.mode),
        cfg.rounds
    );
    out.push_str(&markdown_table(&header, &rows, 0));
    out
}

pub fn emit_simulation(cfg: &SimulateConfig, reports: &[SimReport], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_file(&dir.join("results.csv"), &simulation_csv(cfg, reports)?)?;
    write_file(&dir.join("results.md"), &simulation_markdown(cfg, reports))
}
