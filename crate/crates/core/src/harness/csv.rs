//! Plot-ready CSV output. Empty cells mark values that do not apply.

use std::path::Path;

use crate::theory::{perfect_csi_power, scaling_law, scaling_law_exact_order};
use crate::{Error, Result};

use super::campaign::{point_setup, theory_inputs, McStatistics};
use super::config::ExperimentConfig;

pub const CAMPAIGN_HEADER: [&str; 15] = [
    "sweep_var",
    "sweep_value",
    "series_F_r_db",
    "scheme",
    "mean_rate",
    "stderr",
    "trials",
    "mean_selected_index",
    "mean_received_power_w",
    "theory_received_power_w",
    "theory_value",
    "t_c",
    "tau",
    "effective_rate",
    "training_exceeds_coherence",
];

pub const THEORY_HEADER: [&str; 12] = [
    "sweep_var",
    "sweep_value",
    "series_F_r_db",
    "mu",
    "los_term_w",
    "cross_term_w",
    "nlos_term_w",
    "theory_received_power_w",
    "perfect_csi_power_w",
    "exact_order_power_w",
    "theory_rate",
    "sigma_q2_w",
];

/// 12 significant digits.
fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn campaign_csv(stats: &McStatistics) -> String {
    let mut out = CAMPAIGN_HEADER.join(",");
    out.push('\n');
    for row in &stats.rows {
        let common = [
            stats.sweep_var.name().to_string(),
            num(row.sweep_value),
            opt(row.series),
            row.scheme.name().to_string(),
            num(row.mean_rate),
            num(row.stderr),
            row.trials.to_string(),
            num(row.mean_selected_index),
            opt(row.mean_received_power),
            opt(row.theory_received_power),
            opt(row.theory_value),
        ]
        .join(",");
        if row.effective.is_empty() {
            out.push_str(&common);
            out.push_str(",,,,\n");
        }
        for e in &row.effective {
            out.push_str(&format!(
                "{common},{},{},{},{}\n",
                num(e.t_c),
                num(e.tau),
                num(e.rate),
                e.training_exceeds_coherence
            ));
        }
    }
    out
}

pub fn emit_csv(stats: &McStatistics, path: &Path) -> Result<()> {
    std::fs::write(path, campaign_csv(stats)).map_err(|e| Error::Io(e).with_context(format!("writing {}", path.display())))
}

/// One parsed CSV record, cells keyed by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub cells: Vec<(String, String)>,
}

impl CsvRecord {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.cells.iter().find(|(k, _)| k == column).map(|(_, v)| v.as_str())
    }

    /// Numeric cell; `None` when empty or absent.
    pub fn number(&self, column: &str) -> Result<Option<f64>> {
        match self.get(column) {
            None | Some("") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Domain(format!("column {column}: {v:?} is not a number"))),
        }
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRecord>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Domain("empty CSV".into()))?
        .split(',')
        .collect();
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Domain(format!(
                    "row {}: {} cells for {} columns",
                    i + 1,
                    cells.len(),
                    header.len()
                )));
            }
            Ok(CsvRecord {
                cells: header.iter().zip(cells).map(|(h, c)| (h.to_string(), c.to_string())).collect(),
            })
        })
        .collect()
}

/// Closed-form curves for the first user at every sweep point and series.
pub fn theory_csv(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let mut out = THEORY_HEADER.join(",");
    out.push('\n');
    for series in cfg.series() {
        for &value in &cfg.sweep.values {
            let context = |e: Error| e.with_context(format!("sweep point {}={value}", cfg.sweep.var.name()));
            let setup = point_setup(cfg, series, value).map_err(context)?;
            let inputs = theory_inputs(&setup);
            let law = scaling_law(&inputs).map_err(context)?;
            let exact = scaling_law_exact_order(&inputs).map_err(context)?;
            let perfect = perfect_csi_power(
                inputs.p_d,
                inputs.m,
                inputs.n,
                inputs.q_size,
                inputs.beta_r,
                inputs.beta_g,
                inputs.f_r_db,
            )
            .map_err(context)?;
            let rate = (1.0 + law.total / setup.noise[0]).log2();
            let cells = [
                cfg.sweep.var.name().to_string(),
                num(value),
                opt(series),
                num(law.mu),
                num(law.los_term),
                num(law.cross_term),
                num(law.nlos_term),
                num(law.total),
                num(perfect),
                num(exact.total),
                num(rate),
                num(inputs.sigma_q2),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }
    Ok(out)
}
