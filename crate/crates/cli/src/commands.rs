//! Command-line surface of `hsctc`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hsctc::channel::{awgn_llrs, bec_known};
use hsctc::erasure::{ThresholdConfig, TransferMode};
use hsctc::window::{info_by_position_bits, ErasureDomain, LlrDomain, WindowDecoder};
use hsctc::{ebn0_to_sigma2, TrialSetup};
use rayon::prelude::*;

use crate::config::{ChannelKind, ExperimentConfig, RawConfig};
use crate::output::{config_hash, default_output, Output, OutputSpec, SCHEMA_VERSION};
use crate::runner::{self, pool};
use crate::tables;

#[derive(Debug, Parser)]
#[command(name = "hsctc", version = env!("HSCTC_BUILD_VERSION"), about = "Coupled turbo-like code experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Experiment configuration file.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Override a value, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed (overrides `[run] seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores (overrides `[run] jobs`).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output CSV path. Defaults to `$HSCTC_OUT_DIR/<command>.csv`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Overwrite output written with a different configuration.
    #[arg(long)]
    pub force: bool,
    /// Stop after this many new sweep points.
    #[arg(long, hide = true)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct FrameArgs {
    /// Sweep point whose sub-seed and channel value are used.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    /// Trial index within the point.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Head/tail BEC thresholds for every rate (and lambda_1) of `[threshold]`.
    Threshold(Common),
    /// Per-iteration, per-position erasure probabilities from DE.
    DeTrace(Common),
    /// Bit and frame error rates over the channel grid.
    Ber(Common),
    /// First-window error rate and mean iterations to success.
    Wder(Common),
    /// Dump one encoded frame.
    Encode {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        frame: FrameArgs,
    },
    /// Decode one frame and print per-bit channel and a-posteriori values.
    DecodeOne {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        frame: FrameArgs,
    },
    /// Recompute the bundled threshold tables and report per-cell deltas.
    ValidateTables(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Largest accepted |computed - expected|. Defaults to 5e-4, or 1e-3
    /// with `--mc-samples`.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Restrict to tables (II, III, IV). Repeatable.
    #[arg(long = "table")]
    pub tables: Vec<String>,
    /// Use Monte-Carlo transfer functions with this many samples.
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub mc_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Report CSV path; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::load(&c.config)?;
    for s in &c.set {
        raw.set(s)?;
    }
    if let Some(seed) = c.seed {
        raw.set(&format!("run.seed={seed}"))?;
    }
    if let Some(j) = c.jobs {
        raw.set(&format!("run.jobs={j}"))?;
    }
    let base = c.config.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_raw(&raw, base)
}

/// Runs a sweep: opens or resumes the output, computes missing points in
/// batches of `batch` (in parallel when larger than one) and appends them
/// in order.
fn sweep<F>(command: &str, c: &Common, cfg: &ExperimentConfig, columns: &[&str], labels: Vec<String>, batch: usize, compute: F) -> Result<PathBuf>
where
    F: Fn(usize, u64) -> Result<Vec<Vec<String>>> + Sync,
{
    let csv = c.out.clone().unwrap_or_else(|| default_output(command));
    let (mut out, start) = Output::open(OutputSpec {
        csv: &csv,
        command,
        config_hash: config_hash(command, &cfg.canonical()),
        master_seed: cfg.seed,
        config: cfg.resolved().clone(),
        columns: columns.to_vec(),
        points: labels.clone(),
        force: c.force,
    })?;
    let n = out.num_points();
    if start > 0 {
        eprintln!("{command}: resuming {} at point {}/{n}", csv.display(), start + 1);
    }
    let end = c.stop_after.map_or(n, |k| (start + k).min(n));
    let pool = pool(cfg.jobs)?;
    let mut i = start;
    while i < end {
        let hi = (i + batch.max(1)).min(end);
        let seeds: Vec<(usize, u64)> = (i..hi).map(|j| (j, out.sub_seed(j))).collect();
        let rows: Vec<Result<Vec<Vec<String>>>> = if seeds.len() > 1 {
            pool.install(|| seeds.par_iter().map(|&(j, s)| compute(j, s)).collect())
        } else {
            seeds.iter().map(|&(j, s)| compute(j, s)).collect()
        };
        for ((j, _), r) in seeds.iter().zip(rows) {
            out.append_point(*j, &r?)?;
            eprintln!("{command}: point {}/{n} ({}) done", j + 1, labels[*j]);
        }
        i = hi;
    }
    Ok(csv)
}

fn threads(jobs: usize) -> usize {
    if jobs == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        jobs
    }
}

fn cmd_threshold(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    if cfg.threshold.rates.is_empty() {
        bail!("[threshold] rates: list is empty");
    }
    let points = runner::threshold_points(&cfg);
    let labels = points
        .iter()
        .map(|p| match p.lambda1 {
            Some(l) => format!("lambda1={l} R={}", p.rate),
            None => format!("R={}", p.rate),
        })
        .collect();
    let path = sweep("threshold", c, &cfg, runner::THRESHOLD_COLUMNS, labels, threads(cfg.jobs), |i, _| {
        Ok(vec![runner::threshold_row(&cfg, i, &points[i])?])
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_de_trace(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    runner::require_bec(&cfg, "de-trace")?;
    cfg.require_grid()?;
    let labels = cfg.points.iter().map(|x| format!("eps={x}")).collect();
    let path = sweep("de-trace", c, &cfg, runner::DE_TRACE_COLUMNS, labels, threads(cfg.jobs), |i, _| {
        runner::de_trace_rows(&cfg, i, cfg.points[i])
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn point_label(cfg: &ExperimentConfig, x: f64) -> String {
    match cfg.channel {
        ChannelKind::Awgn => format!("Eb/N0={x} dB"),
        ChannelKind::Bec => format!("eps={x}"),
    }
}

fn cmd_ber(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    cfg.require_grid()?;
    cfg.require_decoder()?;
    let setup = runner::trial_setup(&cfg);
    let pool = pool(cfg.jobs)?;
    let labels = cfg.points.iter().map(|&x| point_label(&cfg, x)).collect();
    let path = sweep("ber", c, &cfg, runner::BER_COLUMNS, labels, 1, |i, seed| {
        let x = cfg.points[i];
        let p = runner::ber_point(&pool, &setup, runner::channel_params(cfg.channel, x), seed, cfg.frames, cfg.frame_errors)?;
        Ok(vec![runner::ber_row(&cfg, i, x, &p)])
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_wder(c: &Common) -> Result<()> {
    let cfg = load_config(c)?;
    cfg.require_grid()?;
    cfg.require_decoder()?;
    let setup = runner::trial_setup(&cfg);
    let pool = pool(cfg.jobs)?;
    let labels = cfg.points.iter().map(|&x| point_label(&cfg, x)).collect();
    let path = sweep("wder", c, &cfg, runner::WDER_COLUMNS, labels, 1, |i, seed| {
        let x = cfg.points[i];
        let p = runner::wder_point(&pool, &setup, runner::channel_params(cfg.channel, x), seed, cfg.frames, cfg.frame_errors)?;
        Ok(vec![runner::wder_row(&cfg, i, x, &p)])
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Opens `--out` (refusing to clobber without `--force`) or stdout.
fn writer(out: &Option<PathBuf>, force: bool) -> Result<Box<dyn Write>> {
    match out {
        None => Ok(Box::new(std::io::stdout().lock())),
        Some(p) => {
            if p.exists() && !force {
                bail!("{} already exists; pass --force to overwrite", p.display());
            }
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Ok(Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
    }
}

fn cmd_encode(c: &Common, f: &FrameArgs) -> Result<()> {
    let cfg = load_config(c)?;
    let setup = runner::trial_setup(&cfg);
    let seed = crate::output::sub_seed(cfg.seed, f.point);
    let (_, frame) = setup.encode_trial(seed, f.trial)?;
    let mut w = writer(&c.out, c.force)?;
    w.write_all(frame.dump().as_bytes())?;
    Ok(())
}

fn cmd_decode_one(c: &Common, f: &FrameArgs) -> Result<()> {
    let cfg = load_config(c)?;
    cfg.require_grid()?;
    cfg.require_decoder()?;
    let x = *cfg.points.get(f.point).with_context(|| format!("--point {} outside the grid of {}", f.point, cfg.points.len()))?;
    let setup = runner::trial_setup(&cfg);
    let seed = crate::output::sub_seed(cfg.seed, f.point);
    let (enc, frame) = setup.encode_trial(seed, f.trial)?;
    let truth = info_by_position_bits(&frame);
    let mut noise = TrialSetup::noise_rng(seed, f.trial);
    let by_position = enc.graph.info_by_position();
    // (channel, a-posteriori) per free info bit in position order
    let (values, report): (Vec<(String, String)>, _) = match cfg.channel {
        ChannelKind::Awgn => {
            let llrs = awgn_llrs(&frame, ebn0_to_sigma2(x, frame.realized_rate()), &mut noise)?;
            let mut dec = WindowDecoder::new(enc.graph.clone(), &enc.layout, LlrDomain::new(&enc.trellis, cfg.window.max_star)?);
            dec.load(&llrs)?;
            let report = dec.run(&cfg.window, Some(&truth), None)?;
            let v = by_position
                .iter()
                .flatten()
                .flat_map(|&p| llrs[p].iter().zip(dec.piece_total(p)).map(|(ch, app)| (format!("{ch:.6}"), format!("{app:.6}"))).collect::<Vec<_>>())
                .collect();
            (v, report)
        }
        ChannelKind::Bec => {
            let known = bec_known(&frame, x, &mut noise)?;
            let mut dec = WindowDecoder::new(enc.graph.clone(), &enc.layout, ErasureDomain::new(&enc.trellis, &frame)?);
            dec.load(&known)?;
            let report = dec.run(&cfg.window, Some(&truth), None)?;
            let v = by_position
                .iter()
                .flatten()
                .flat_map(|&p| {
                    known[p].iter().zip(dec.piece_total(p)).map(|(ch, app)| (u8::from(*ch).to_string(), u8::from(app).to_string())).collect::<Vec<_>>()
                })
                .collect();
            (v, report)
        }
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer(&c.out, c.force)?);
    w.write_record(["schema_version", "position", "bit", "truth", "channel", "app", "decision"])?;
    let mut k = 0;
    let mut errors = 0;
    for (pos, (t, d)) in truth.iter().zip(&report.decisions).enumerate() {
        for (i, (tb, db)) in t.iter().zip(d).enumerate() {
            let (ch, app) = &values[k];
            errors += usize::from(tb != db);
            w.write_record([SCHEMA_VERSION.to_string(), (pos + 1).to_string(), i.to_string(), tb.to_string(), ch.clone(), app.clone(), db.to_string()])?;
            k += 1;
        }
    }
    w.flush()?;
    eprintln!("decode-one: {} = {x}, {errors} bit errors in {k} bits", point_label(&cfg, x).split('=').next().unwrap_or(""));
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<bool> {
    let mode = match a.mc_samples {
        Some(samples) => TransferMode::MonteCarlo { samples, seed: a.mc_seed },
        None => TransferMode::ExactSubset,
    };
    let tolerance = a.tolerance.unwrap_or(if a.mc_samples.is_some() { 1e-3 } else { 5e-4 });
    let cfg = ThresholdConfig { mode, ..ThresholdConfig::default() };
    let cells = tables::bundled_cells(&a.tables)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer(&a.out, a.force)?);
    let computed = pool(a.jobs)?.install(|| tables::compute_cells(&cells, &cfg))?;
    let report = tables::report(&cells, &computed, tolerance)?;
    let mut header = vec!["schema_version"];
    header.extend(tables::REPORT_COLUMNS);
    w.write_record(&header)?;
    for r in &report {
        let mut row = vec![SCHEMA_VERSION.to_string()];
        row.extend(tables::report_row(r));
        w.write_record(&row)?;
    }
    w.flush()?;
    let failed: Vec<_> = report.iter().filter(|r| !r.pass).collect();
    eprintln!("validate-tables: {}/{} cells within {tolerance:e}", report.len() - failed.len(), report.len());
    for r in &failed {
        let c = &r.cell;
        eprintln!("  FAIL table {} {} {} {} R={}: expected {:.4}, computed {:.6} ({:+.6})", c.table, c.row, c.generator, c.quantity.name(), c.rate, c.expected, r.computed, r.delta);
    }
    Ok(failed.is_empty())
}

/// Runs a parsed command. `Ok(false)` means the command ran but reported
/// failures.
pub fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Threshold(c) => cmd_threshold(c)?,
        Command::DeTrace(c) => cmd_de_trace(c)?,
        Command::Ber(c) => cmd_ber(c)?,
        Command::Wder(c) => cmd_wder(c)?,
        Command::Encode { common, frame } => cmd_encode(common, frame)?,
        Command::DecodeOne { common, frame } => cmd_decode_one(common, frame)?,
        Command::ValidateTables(a) => return cmd_validate(a),
    }
    Ok(true)
}
