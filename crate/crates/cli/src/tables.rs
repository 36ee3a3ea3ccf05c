//! Bundled expected threshold values and the regression run over them.

use std::collections::BTreeMap;

use anyhow::{anyhow, bail, Context, Result};
use hsctc::erasure::{head_tail_thresholds, saturated_map_estimate, ThresholdConfig, ThresholdResult, UncoupledKind};
use hsctc::{EnsembleKind, EnsembleSpec, GeneratorSpec, Rational};
use rayon::prelude::*;
use serde::Deserialize;

pub const BUNDLED: &[(&str, &str)] = &[
    ("II", include_str!("../tables/table2.csv")),
    ("III", include_str!("../tables/table3.csv")),
    ("IV", include_str!("../tables/table4.csv")),
];

/// Largest delay factor tried for the saturated MAP estimate of UC-BCC.
pub const MAP_MAX_DELTA: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Head,
    Tail,
    Window,
    Full,
    Map,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Head => "head",
            Quantity::Tail => "tail",
            Quantity::Window => "window",
            Quantity::Full => "full",
            Quantity::Map => "map",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Cell {
    pub table: String,
    pub row: String,
    pub kind: String,
    pub generator: String,
    pub coupling: Option<usize>,
    pub lambda1: Option<f64>,
    pub quantity: Quantity,
    pub rate: String,
    pub expected: f64,
}

/// What has to be computed for a cell: one threshold run or one MAP
/// estimate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Job {
    Thresholds { kind: String, generator: String, coupling: usize, lambda1_bits: Option<u64>, rate: (u64, u64) },
    Map { kind: String, generator: String, rate: (u64, u64) },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Computed {
    Thresholds(ThresholdResult),
    Map(f64),
}

impl Cell {
    pub fn rate(&self) -> Result<Rational> {
        self.rate.parse().map_err(|e| anyhow!("bad rate '{}': {e}", self.rate))
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        GeneratorSpec::builtin(&self.generator).ok_or_else(|| anyhow!("unknown generator '{}'", self.generator))
    }

    pub fn job(&self) -> Result<Job> {
        let r = self.rate()?;
        let rate = (*r.numer(), *r.denom());
        Ok(if self.quantity == Quantity::Map {
            Job::Map { kind: self.kind.clone(), generator: self.generator.clone(), rate }
        } else {
            Job::Thresholds {
                kind: self.kind.clone(),
                generator: self.generator.clone(),
                coupling: self.coupling.ok_or_else(|| anyhow!("{} {}: missing coupling", self.table, self.row))?,
                lambda1_bits: self.lambda1.map(f64::to_bits),
                rate,
            }
        })
    }

    pub fn spec(&self) -> Result<EnsembleSpec> {
        let g = self.generator_spec()?;
        let kind: EnsembleKind = self.kind.parse()?;
        let coupling = self.coupling.unwrap_or(1);
        Ok(match self.lambda1 {
            Some(l) => EnsembleSpec::single_sided(g, vec![1.0 - l, l], 10, 1000),
            None => EnsembleSpec::new(kind, coupling, g, 10, 8),
        })
    }

    pub fn pick(&self, c: &Computed) -> f64 {
        match (self.quantity, c) {
            (Quantity::Head, Computed::Thresholds(r)) => r.eps_h,
            (Quantity::Tail, Computed::Thresholds(r)) => r.eps_t,
            (Quantity::Window, Computed::Thresholds(r)) => r.eps_bp_window,
            (Quantity::Full, Computed::Thresholds(r)) => r.eps_bp_full,
            (Quantity::Map, Computed::Thresholds(r)) => r.eps_bp_full,
            (_, Computed::Map(x)) => *x,
        }
    }
}

pub fn parse_cells(text: &str) -> Result<Vec<Cell>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    rd.deserialize().enumerate().map(|(i, r)| r.with_context(|| format!("expected-value row {}", i + 2))).collect()
}

/// Every bundled cell, optionally restricted to some tables.
pub fn bundled_cells(tables: &[String]) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for (name, text) in BUNDLED {
        if tables.is_empty() || tables.iter().any(|t| t.eq_ignore_ascii_case(name)) {
            out.extend(parse_cells(text)?);
        }
    }
    if out.is_empty() {
        bail!("no bundled table matches {tables:?} (available: II, III, IV)");
    }
    Ok(out)
}

fn compute(cell: &Cell, cfg: &ThresholdConfig) -> Result<Computed> {
    let rate = cell.rate()?;
    if cell.quantity == Quantity::Map {
        let kind = match cell.kind.as_str() {
            "uc-bcc" => UncoupledKind::Bcc,
            "uc-pcc" => UncoupledKind::Pcc,
            other => bail!("no MAP estimate for kind '{other}'"),
        };
        let est = saturated_map_estimate(kind, &cell.generator_spec()?, rate, MAP_MAX_DELTA, cfg)?;
        return Ok(Computed::Map(est.eps));
    }
    Ok(Computed::Thresholds(head_tail_thresholds(&cell.spec()?, rate, cfg)?))
}

/// Computes every distinct job of `cells` once, in parallel on the current
/// rayon pool.
pub fn compute_cells(cells: &[Cell], cfg: &ThresholdConfig) -> Result<BTreeMap<Job, Computed>> {
    let mut jobs: BTreeMap<Job, &Cell> = BTreeMap::new();
    for c in cells {
        jobs.entry(c.job()?).or_insert(c);
    }
    let list: Vec<(Job, &Cell)> = jobs.into_iter().collect();
    let results: Vec<Result<(Job, Computed)>> =
        list.par_iter().map(|(j, c)| compute(c, cfg).map(|r| (j.clone(), r)).with_context(|| format!("{} {} {} {}", c.table, c.row, c.generator, c.rate))).collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone)]
pub struct CellReport {
    pub cell: Cell,
    pub computed: f64,
    pub delta: f64,
    pub pass: bool,
}

pub fn report(cells: &[Cell], computed: &BTreeMap<Job, Computed>, tolerance: f64) -> Result<Vec<CellReport>> {
    cells
        .iter()
        .map(|c| {
            let v = c.pick(computed.get(&c.job()?).ok_or_else(|| anyhow!("cell not computed"))?);
            let delta = v - c.expected;
            Ok(CellReport { cell: c.clone(), computed: v, delta, pass: delta.abs() <= tolerance })
        })
        .collect()
}

pub const REPORT_COLUMNS: &[&str] =
    &["table", "row", "generator", "coupling", "lambda1", "quantity", "rate", "expected", "computed", "delta", "pass"];

pub fn report_row(r: &CellReport) -> Vec<String> {
    let c = &r.cell;
    vec![
        c.table.clone(),
        c.row.clone(),
        c.generator.clone(),
        c.coupling.map(|x| x.to_string()).unwrap_or_default(),
        c.lambda1.map(|x| x.to_string()).unwrap_or_default(),
        c.quantity.name().to_string(),
        c.rate.clone(),
        format!("{:.4}", c.expected),
        format!("{:.6}", r.computed),
        format!("{:+.6}", r.delta),
        r.pass.to_string(),
    ]
}
