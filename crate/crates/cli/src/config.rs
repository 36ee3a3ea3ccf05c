//! Experiment configuration: a text file of `[section]` headers and
//! `key = value` lines, plus `section.key=value` overrides from the command
//! line. Every value keeps its origin so errors can point at it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hsctc::erasure::{ThresholdConfig, TransferMode};
use hsctc::{EnsembleKind, EnsembleSpec, GeneratorSpec, MaxStar, Rational, StopRule, Sweep, WindowConfig};

/// Recognised keys per section.
const KEYS: &[(&str, &[&str])] = &[
    ("ensemble", &["kind", "coupling", "lambda", "generator", "generator_file", "T", "K", "rate", "fresh_interleavers"]),
    ("decoder", &["w", "i_h", "schedule", "stop", "max_star"]),
    ("channel", &["kind", "points"]),
    ("run", &["frames", "frame_errors", "seed", "jobs"]),
    ("threshold", &["rates", "lambda1", "mode", "samples", "mc_seed", "window", "precision", "max_iters", "tol", "end"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Untyped `section.key -> value` map.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    source: String,
    entries: BTreeMap<(String, String), Entry>,
}

fn check_key(section: &str, key: &str) -> std::result::Result<(), String> {
    match KEYS.iter().find(|(s, _)| *s == section) {
        None => Err(format!("unknown section [{section}]")),
        Some((_, keys)) if !keys.contains(&key) => Err(format!("unknown key '{key}' in [{section}]")),
        Some(_) => Ok(()),
    }
}

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RawConfig { source: source.to_string(), entries: BTreeMap::new() };
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fail = |msg: String| anyhow!("{source}:{line}: {msg}");
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| fail("unterminated section header".into()))?.trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(fail(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let sec = section.clone().ok_or_else(|| fail("key outside a [section]".into()))?;
            let (key, value) = content.split_once('=').ok_or_else(|| fail("expected key = value".into()))?;
            let key = key.trim();
            check_key(&sec, key).map_err(fail)?;
            let slot = (sec.clone(), key.to_string());
            if let Some(prev) = cfg.entries.get(&slot) {
                if let Origin::Line(l) = prev.origin {
                    return Err(fail(format!("duplicate key '{key}' in [{sec}] (first set on line {l})")));
                }
            }
            cfg.entries.insert(slot, Entry { value: value.trim().to_string(), origin: Origin::Line(line) });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `section.key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("--set {assignment}: expected section.key=value"))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| anyhow!("--set {assignment}: expected section.key=value"))?;
        check_key(section, key).map_err(|m| anyhow!("--set {assignment}: {m}"))?;
        self.entries
            .insert((section.to_string(), key.to_string()), Entry { value: value.trim().to_string(), origin: Origin::Override });
        Ok(())
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn locate(&self, section: &str, key: &str) -> String {
        match self.entry(section, key).map(|e| &e.origin) {
            Some(Origin::Line(l)) => format!("{}:{l}: [{section}] {key}", self.source),
            Some(Origin::Override) => format!("--set {section}.{key}"),
            None => format!("[{section}] {key}"),
        }
    }

    fn err(&self, section: &str, key: &str, msg: impl fmt::Display) -> anyhow::Error {
        anyhow!("{}: {msg}", self.locate(section, key))
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.get_str(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| self.err(section, key, format!("cannot parse '{v}': {e}"))),
        }
    }

    fn get_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.get_str(section, key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| self.err(section, key, format!("cannot parse '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Bec,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Bec => "bec",
        })
    }
}

/// Which DE schedule `de-trace` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEnd {
    Full,
    Head,
    Tail,
}

impl fmt::Display for TraceEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceEnd::Full => "full",
            TraceEnd::Head => "head",
            TraceEnd::Tail => "tail",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdSettings {
    pub rates: Vec<Rational>,
    /// Non-empty only for a single-sided lambda_1 sweep.
    pub lambda1: Vec<f64>,
    pub cfg: ThresholdConfig,
    pub end: TraceEnd,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: EnsembleSpec,
    pub rate: Option<Rational>,
    pub fresh_interleavers: bool,
    pub window: WindowConfig,
    pub channel: ChannelKind,
    pub points: Vec<f64>,
    pub frames: usize,
    pub frame_errors: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core. Does not affect results.
    pub jobs: usize,
    pub threshold: ThresholdSettings,
    resolved: BTreeMap<String, String>,
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn format_list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Resolves defaults and checks every value. `base_dir` anchors a
    /// relative `generator_file`.
    pub fn from_raw(raw: &RawConfig, base_dir: &Path) -> Result<Self> {
        let kind_str = raw.get_str("ensemble", "kind").ok_or_else(|| raw.err("ensemble", "kind", "missing"))?;
        let kind: EnsembleKind = kind_str.parse().map_err(|e| raw.err("ensemble", "kind", e))?;

        let generator = match (raw.get_str("ensemble", "generator"), raw.get_str("ensemble", "generator_file")) {
            (label, Some(file)) => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| raw.err("ensemble", "generator_file", format!("{}: {e}", path.display())))?;
                let gens = GeneratorSpec::parse_file(&text)
                    .map_err(|e| raw.err("ensemble", "generator_file", format!("{}: {e}", path.display())))?;
                match label {
                    Some(l) => gens
                        .into_iter()
                        .find(|g| g.label == l)
                        .ok_or_else(|| raw.err("ensemble", "generator", format!("no generator '{l}' in {}", path.display())))?,
                    None if gens.len() == 1 => gens.into_iter().next().unwrap(),
                    None => return Err(raw.err("ensemble", "generator", "file defines several generators; name one")),
                }
            }
            (Some(label), None) => GeneratorSpec::builtin(label)
                .ok_or_else(|| raw.err("ensemble", "generator", format!("unknown generator '{label}' (use G457, G537, G357, G15/13 or generator_file)")))?,
            (None, None) => {
                if kind.component_inputs() == 2 {
                    GeneratorSpec::g457()
                } else {
                    GeneratorSpec::g15_13()
                }
            }
        };

        let default_coupling = if kind == EnsembleKind::HscBcc { 2 } else { 1 };
        let coupling = raw.get::<usize>("ensemble", "coupling")?.unwrap_or(default_coupling);
        let t = raw.get::<usize>("ensemble", "T")?.unwrap_or(10);
        let k = raw.get::<usize>("ensemble", "K")?.unwrap_or(1024);
        let mut spec = EnsembleSpec::new(kind, coupling, generator, t, k);
        if let Some(lambda) = raw.get_list::<f64>("ensemble", "lambda")? {
            if kind != EnsembleKind::SingleSidedScPcc {
                return Err(raw.err("ensemble", "lambda", "only single-sided SC-PCC takes lambda"));
            }
            if raw.get_str("ensemble", "coupling").is_some() && lambda.len() != coupling + 1 {
                return Err(raw.err("ensemble", "lambda", format!("expected {} entries for coupling {coupling}", coupling + 1)));
            }
            spec = EnsembleSpec::single_sided(spec.generator, lambda, t, k);
        }
        spec.validate().map_err(|e| raw.err("ensemble", "kind", e))?;

        let rate = raw.get::<Rational>("ensemble", "rate")?;
        let fresh_interleavers = match raw.get_str("ensemble", "fresh_interleavers") {
            None => false,
            Some(v) => parse_bool(v).map_err(|e| raw.err("ensemble", "fresh_interleavers", e))?,
        };

        let w = raw.get::<usize>("decoder", "w")?.unwrap_or(4);
        let i_h = raw.get::<usize>("decoder", "i_h")?.unwrap_or(20);
        let sweep = raw.get::<Sweep>("decoder", "schedule")?.unwrap_or(Sweep::RoundTrip);
        let stop = match raw.get_str("decoder", "stop").unwrap_or("fixed") {
            "fixed" => StopRule::FixedIters,
            "genie" => StopRule::GenieAided,
            other => return Err(raw.err("decoder", "stop", format!("expected fixed or genie, got '{other}'"))),
        };
        let max_star = match raw.get_str("decoder", "max_star").unwrap_or("linear") {
            "exact" => MaxStar::Exact,
            "linear" => MaxStar::LINEAR,
            other => return Err(raw.err("decoder", "max_star", format!("expected exact or linear, got '{other}'"))),
        };
        let window = WindowConfig { w, i_h, sweep, stop, max_star };

        let channel = match raw.get_str("channel", "kind").unwrap_or("awgn") {
            "awgn" => ChannelKind::Awgn,
            "bec" => ChannelKind::Bec,
            other => return Err(raw.err("channel", "kind", format!("expected awgn or bec, got '{other}'"))),
        };
        let points = raw.get_list::<f64>("channel", "points")?.unwrap_or_default();
        if points.iter().any(|x| !x.is_finite()) {
            return Err(raw.err("channel", "points", "values must be finite"));
        }
        if points.windows(2).any(|p| p[0] >= p[1]) {
            return Err(raw.err("channel", "points", "grid must be strictly increasing"));
        }
        if channel == ChannelKind::Bec && points.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(raw.err("channel", "points", "erasure probabilities must lie in [0, 1]"));
        }

        let frames = raw.get::<usize>("run", "frames")?.unwrap_or(10_000);
        if frames == 0 {
            return Err(raw.err("run", "frames", "trial budget must be at least 1"));
        }
        let frame_errors = raw.get::<usize>("run", "frame_errors")?.unwrap_or(100);
        if frame_errors == 0 {
            return Err(raw.err("run", "frame_errors", "error target must be at least 1"));
        }
        let seed = raw.get::<u64>("run", "seed")?.unwrap_or(1);
        let jobs = raw.get::<usize>("run", "jobs")?.unwrap_or(1);

        let rates = raw.get_list::<Rational>("threshold", "rates")?.unwrap_or_else(|| vec![Rational::new(1, 3)]);
        let lambda1 = raw.get_list::<f64>("threshold", "lambda1")?.unwrap_or_default();
        if !lambda1.is_empty() && kind != EnsembleKind::SingleSidedScPcc {
            return Err(raw.err("threshold", "lambda1", "a lambda_1 sweep needs kind = single_sided"));
        }
        if lambda1.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(raw.err("threshold", "lambda1", "values must lie in [0, 1]"));
        }
        let mode = match raw.get_str("threshold", "mode").unwrap_or("exact") {
            "exact" => TransferMode::ExactSubset,
            "mc" => TransferMode::MonteCarlo {
                samples: raw.get::<usize>("threshold", "samples")?.unwrap_or(200_000),
                seed: raw.get::<u64>("threshold", "mc_seed")?.unwrap_or(1),
            },
            other => return Err(raw.err("threshold", "mode", format!("expected exact or mc, got '{other}'"))),
        };
        let defaults = ThresholdConfig::default();
        let tcfg = ThresholdConfig {
            mode,
            window: raw.get::<usize>("threshold", "window")?,
            max_iters: raw.get::<usize>("threshold", "max_iters")?.unwrap_or(defaults.max_iters),
            tol: raw.get::<f64>("threshold", "tol")?.unwrap_or(defaults.tol),
            precision: raw.get::<f64>("threshold", "precision")?.unwrap_or(defaults.precision),
        };
        let end = match raw.get_str("threshold", "end").unwrap_or("full") {
            "full" => TraceEnd::Full,
            "head" => TraceEnd::Head,
            "tail" => TraceEnd::Tail,
            other => return Err(raw.err("threshold", "end", format!("expected full, head or tail, got '{other}'"))),
        };

        let mut resolved = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            resolved.insert(k.to_string(), v);
        };
        put("ensemble.kind", kind.to_string());
        put("ensemble.coupling", spec.coupling.to_string());
        put("ensemble.lambda", format_list(&spec.lambda));
        put("ensemble.generator", spec.generator.to_file_section());
        put("ensemble.T", t.to_string());
        put("ensemble.K", k.to_string());
        put("ensemble.rate", rate.map(|r| r.to_string()).unwrap_or_default());
        put("ensemble.fresh_interleavers", fresh_interleavers.to_string());
        put("decoder.w", w.to_string());
        put("decoder.i_h", i_h.to_string());
        put("decoder.schedule", sweep.to_string());
        put("decoder.stop", format!("{stop:?}"));
        put("decoder.max_star", format!("{max_star:?}"));
        put("channel.kind", channel.to_string());
        put("channel.points", format_list(&points));
        put("run.frames", frames.to_string());
        put("run.frame_errors", frame_errors.to_string());
        put("run.seed", seed.to_string());
        put("threshold.rates", format_list(&rates));
        put("threshold.lambda1", format_list(&lambda1));
        put("threshold.mode", format!("{mode:?}"));
        put("threshold.window", format!("{:?}", tcfg.window));
        put("threshold.max_iters", tcfg.max_iters.to_string());
        put("threshold.tol", tcfg.tol.to_string());
        put("threshold.precision", tcfg.precision.to_string());
        put("threshold.end", end.to_string());

        Ok(ExperimentConfig {
            spec,
            rate,
            fresh_interleavers,
            window,
            channel,
            points,
            frames,
            frame_errors,
            seed,
            jobs,
            threshold: ThresholdSettings { rates, lambda1, cfg: tcfg, end },
            resolved,
        })
    }

    /// Checks what a simulation subcommand needs beyond `from_raw`.
    pub fn require_grid(&self) -> Result<()> {
        if self.points.is_empty() {
            bail!("[channel] points: grid is empty");
        }
        Ok(())
    }

    pub fn require_decoder(&self) -> Result<()> {
        self.window.validate(&self.spec).map_err(|e| anyhow!("[decoder] {e}"))
    }

    /// Every resolved value except the worker count, one `key=value` per
    /// line in key order.
    pub fn canonical(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k}={}\n", v.replace('\n', "\\n"))).collect()
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}
