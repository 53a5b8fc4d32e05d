//! Aggregate tables rendered from the metrics and swing-up summaries.
//!
//! Everything here is a pure function of its inputs: identical metrics give
//! identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use smm_core::models::ModelClass;

use crate::config::{hash_json, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::experiment::{MetricRow, SwingupRow};

/// Mean and sample standard deviation (`n - 1`; zero for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of the union of equally sized groups, each
/// given by its own mean and population standard deviation.
pub fn pooled(groups: &[(f64, f64)]) -> (f64, f64) {
    let n = groups.len() as f64;
    let mean = groups.iter().map(|g| g.0).sum::<f64>() / n;
    let second = groups.iter().map(|(m, s)| s * s + m * m).sum::<f64>() / n;
    (mean, (second - mean * mean).max(0.0).sqrt())
}

pub fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

fn pm(mean: f64, std: f64) -> String {
    format!("{} ± {}", sci(mean), sci(std))
}

fn display_class(name: &str) -> &str {
    match name {
        "smm_c" => "SMM-C",
        "smm" => "SMM",
        "bbnn" => "BBNN",
        "true" => "True",
        other => other,
    }
}

pub struct Bundle {
    pub hash: String,
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct GeneralizationRow<'a> {
    system: &'a str,
    class: &'a str,
    size: usize,
    seeds: usize,
    mse_mean: f64,
    mse_std: f64,
}

#[derive(Serialize)]
struct JacobianRow<'a> {
    system: &'a str,
    size: usize,
    class: &'a str,
    jac_err_x_mean: f64,
    jac_err_x_std: f64,
    jac_err_u_mean: f64,
    jac_err_u_std: f64,
}

/// Metric rows of every configured `(class, size, seed)`, keyed by
/// `(class, size)` with rows in seed order.
pub fn select<'a>(
    system: &str,
    rows: &'a [MetricRow],
    classes: &[ModelClass],
    sizes: &[usize],
    seeds: &[u64],
) -> Result<BTreeMap<(String, usize), Vec<&'a MetricRow>>> {
    if seeds.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    let mut out = BTreeMap::new();
    for class in classes {
        for &size in sizes {
            let mut group = Vec::new();
            for &seed in seeds {
                let row = rows
                    .iter()
                    .find(|r| r.class == class.name() && r.size == size && r.seed == seed)
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "metrics for {system} lack {} n={size} seed {seed}; rerun eval",
                            class.name()
                        ))
                    })?;
                group.push(row);
            }
            out.insert((class.name().to_string(), size), group);
        }
    }
    Ok(out)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn build(cfg: &ExperimentConfig, metrics: &[(String, Vec<MetricRow>)], swingups: &[(String, Vec<SwingupRow>)]) -> Result<Bundle> {
    let classes = cfg.classes();
    let mut gen_md = String::from("# Generalization error\n\nOne-step test MSE, mean ± std over seeds ");
    gen_md.push_str(&format!("{:?}.\n", cfg.seeds));
    let mut jac_md = String::from("# Jacobian error\n\nFrobenius error of the one-step Jacobians against the true system, ");
    jac_md.push_str("mean ± std over test points and seeds.\n");
    let mut gen_rows = Vec::new();
    let mut jac_rows = Vec::new();
    let mut hashed = Vec::new();
    for (sys, rows) in metrics {
        let sel = select(sys, rows, &classes, &cfg.sizes, &cfg.seeds)?;
        let both = classes.contains(&ModelClass::SmmC) && classes.contains(&ModelClass::Bbnn);
        gen_md.push_str(&format!("\n## {sys}\n\n| size |"));
        for c in &classes {
            gen_md.push_str(&format!(" {} |", display_class(c.name())));
        }
        if both {
            gen_md.push_str(" BBNN / SMM-C |");
        }
        gen_md.push_str("\n|---:|");
        for _ in &classes {
            gen_md.push_str("---|");
        }
        if both {
            gen_md.push_str("---:|");
        }
        gen_md.push('\n');
        for &size in &cfg.sizes {
            gen_md.push_str(&format!("| {size} |"));
            let mut means = BTreeMap::new();
            for c in &classes {
                let group = &sel[&(c.name().to_string(), size)];
                let mses: Vec<f64> = group.iter().map(|r| r.mse).collect();
                let (m, s) = mean_std(&mses);
                means.insert(c.name(), m);
                gen_md.push_str(&format!(" {} |", pm(m, s)));
                gen_rows.push(GeneralizationRow { system: sys, class: c.name(), size, seeds: group.len(), mse_mean: m, mse_std: s });
            }
            if both {
                gen_md.push_str(&format!(" {:.1} |", means["bbnn"] / means["smm_c"]));
            }
            gen_md.push('\n');
        }
        for &size in &cfg.sizes {
            jac_md.push_str(&format!(
                "\n## {sys}, n = {size}\n\n| class | jac_err_x (mean ± std) | jac_err_u (mean ± std) |\n|---|---|---|\n"
            ));
            for c in &classes {
                let group = &sel[&(c.name().to_string(), size)];
                let ex: Vec<(f64, f64)> = group.iter().map(|r| (r.jac_err_x, r.jac_err_x_std)).collect();
                let eu: Vec<(f64, f64)> = group.iter().map(|r| (r.jac_err_u, r.jac_err_u_std)).collect();
                let (xm, xs) = pooled(&ex);
                let (um, us) = pooled(&eu);
                jac_md.push_str(&format!("| {} | {} | {} |\n", display_class(c.name()), pm(xm, xs), pm(um, us)));
                jac_rows.push(JacobianRow {
                    system: sys,
                    size,
                    class: c.name(),
                    jac_err_x_mean: xm,
                    jac_err_x_std: xs,
                    jac_err_u_mean: um,
                    jac_err_u_std: us,
                });
            }
        }
        for group in sel.values() {
            for r in group {
                hashed.push(json!([sys, r.class, r.size, r.seed, r.mse, r.jac_err_x, r.jac_err_x_std, r.jac_err_u, r.jac_err_u_std, r.config_hash]));
            }
        }
    }
    let mut files = vec![
        ("generalization.md".to_string(), gen_md.into_bytes()),
        ("generalization.csv".to_string(), csv_bytes(&gen_rows)),
        ("jacobians.md".to_string(), jac_md.into_bytes()),
        ("jacobians.csv".to_string(), csv_bytes(&jac_rows)),
    ];
    let swing_rows: Vec<SwingupRow> = swingups.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    if !swing_rows.is_empty() {
        let md = swingup_markdown(&swing_rows, &classes, &cfg.seeds)?;
        files.push(("swingup.md".to_string(), md.into_bytes()));
        files.push(("swingup.csv".to_string(), csv_bytes(&swing_rows)));
    }
    let hash = hash_json(&json!({
        "artifact": "report",
        "metrics": hashed,
        "swingup": serde_json::to_value(&swing_rows).expect("serializable"),
        "classes": cfg.classes,
        "sizes": cfg.sizes,
        "seeds": cfg.seeds,
    }));
    Ok(Bundle { hash, files })
}

/// Swing-up table, one row per system and one column per model class. Cells
/// are mean ± std of the swing-up cost over the seed list; `*` marks
/// divergence.
pub fn swingup_markdown(rows: &[SwingupRow], classes: &[ModelClass], seeds: &[u64]) -> Result<String> {
    if seeds.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    let mut systems: Vec<&str> = Vec::new();
    for r in rows {
        if !systems.contains(&r.system.as_str()) {
            systems.push(&r.system);
        }
    }
    let has_true = rows.iter().any(|r| r.class == "true");
    let mut cols: Vec<&str> = Vec::new();
    if has_true {
        cols.push("true");
    }
    cols.extend(classes.iter().map(|c| c.name()).filter(|c| rows.iter().any(|r| r.class == *c)));
    let mut md = String::from("# Swing-up cost\n\nMinimum squared distance to the goal along the closed-loop trajectory on the true system");
    md.push_str(&format!(", mean ± std over seeds {seeds:?}.\n\n| system |"));
    for c in &cols {
        md.push_str(&format!(" {} |", display_class(c)));
    }
    md.push_str("\n|---|");
    for _ in &cols {
        md.push_str("---|");
    }
    md.push('\n');
    let mut partial = false;
    for sys in systems {
        md.push_str(&format!("| {sys} |"));
        for &c in &cols {
            let group: Vec<&SwingupRow> = rows.iter().filter(|r| r.system == sys && r.class == c).collect();
            let cell = if group.is_empty() {
                "n/a".to_string()
            } else {
                if c != "true" {
                    for &seed in seeds {
                        if !group.iter().any(|r| r.seed == Some(seed)) {
                            return Err(CliError::Config(format!("swing-up results for {sys} lack {c} seed {seed}")));
                        }
                    }
                }
                let group: Vec<&SwingupRow> =
                    group.into_iter().filter(|r| c == "true" || r.seed.is_some_and(|s| seeds.contains(&s))).collect();
                let costs: Vec<f64> = group.iter().filter_map(|r| if r.status == "ok" { r.cost } else { None }).collect();
                if costs.is_empty() {
                    "*".to_string()
                } else if costs.len() < group.len() {
                    partial = true;
                    let (m, s) = mean_std(&costs);
                    format!("{}*", pm(m, s))
                } else if costs.len() == 1 {
                    sci(costs[0])
                } else {
                    let (m, s) = mean_std(&costs);
                    pm(m, s)
                }
            };
            md.push_str(&format!(" {cell} |"));
        }
        md.push('\n');
    }
    md.push_str("\n`*`: the closed loop diverged");
    if partial {
        md.push_str("; a number before it summarizes the seeds that did not");
    }
    md.push_str(".\n");
    Ok(md)
}
