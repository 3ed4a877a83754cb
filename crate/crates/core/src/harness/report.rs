use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::bounds::{BoundBreakdown, EnvelopeRow, LemmaId, LemmaRow, RateFit};
use crate::discretization::{Schedule, ValidationReport};
use crate::divergence::{KlEstimate, KlSeries};
use crate::error::Result;
use crate::mixtures::ModelKind;
use crate::targets::AssumptionReport;

/// Bumped whenever a CSV column or report field changes meaning or order.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSeries {
    pub kind: ModelKind,
    pub series: KlSeries,
    /// same grid, nested quadrature
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadrature: Vec<KlEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub kind: ModelKind,
    /// "mc" or "quadrature"
    pub method: String,
    pub fit: Option<RateFit>,
    pub theoretical_exponent: Option<f64>,
    /// fitted slope more negative than minus the theoretical exponent
    pub faster_than_theory: Option<bool>,
    pub envelope: Vec<EnvelopeRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceRow {
    pub kind: ModelKind,
    pub m: usize,
    pub kl: f64,
    pub kl_se: f64,
    pub kl_method: String,
    pub bound_total: f64,
    pub bound_se: f64,
    /// kl ≤ bound_total + 3 bound_se
    pub dominated: bool,
    /// dominance is asserted only from m = 256 on; below that it is reported
    pub asserted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub lemma: LemmaId,
    pub draws: usize,
    pub violations: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub seed: u64,
    pub series: Vec<ModelSeries>,
    pub rate_fits: Vec<RateRow>,
    pub bounds: Vec<BoundBreakdown>,
    pub dominance: Vec<DominanceRow>,
    pub lemmas: Vec<LemmaSummary>,
    /// the first draw of every lemma, a fixed known-good case
    pub lemma_anchors: Vec<LemmaRow>,
    pub schedules: Vec<Schedule>,
    pub schedule_checks: Vec<ValidationReport>,
    pub assumption: Option<AssumptionReport>,
    pub warnings: Vec<String>,
    /// wall-clock seconds per phase; the only non-reproducible field
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config: Option<ExperimentConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            config,
            seed,
            ..Self::default()
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }
}

/// One row of `kl_series.csv`; column order is part of the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub m: usize,
    pub kind: ModelKind,
    pub value: f64,
    pub se: f64,
    pub n: usize,
    pub method: String,
    pub seed: Option<u64>,
}

impl KlRow {
    pub fn of(kind: ModelKind, m: usize, e: &KlEstimate) -> Self {
        Self { m, kind, value: e.value, se: e.std_error, n: e.n, method: method_name(e), seed: e.seed }
    }
}

pub(crate) fn method_name(e: &KlEstimate) -> String {
    match e.method {
        crate::divergence::KlMethod::MonteCarlo => "mc".into(),
        crate::divergence::KlMethod::Quadrature => "quadrature".into(),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kl_csv(path: &Path) -> Result<Vec<KlRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<KlRow>, _>>()?)
}

const PLOT_STUB: &str = r#"# Plots kl_series.csv on log-log axes, one line per (kind, method).
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "kl_series.csv"
lines = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        lines[(row["kind"], row["method"])].append((int(row["m"]), float(row["value"]), float(row["se"])))

for (kind, method), pts in sorted(lines.items()):
    pts.sort()
    ms = [p[0] for p in pts]
    plt.errorbar(ms, [p[1] for p in pts], yerr=[3 * p[2] for p in pts], marker="o", capsize=3, label=f"{kind} ({method})")

plt.xscale("log")
plt.yscale("log")
plt.xlabel("m")
plt.ylabel("KL(f, p_m)")
plt.legend()
plt.savefig("kl_series.png", dpi=150, bbox_inches="tight")
"#;

pub fn write_plot_stub(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("plot_kl.py"), PLOT_STUB)?;
    Ok(())
}
