//! CSV results with a JSON sidecar. Rows of one sweep point are appended
//! and synced before the sidecar records the point as complete, so an
//! interrupted run resumes from the last complete point.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Version of the CSV column layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HSCTC_OUT_DIR";

pub fn tool_version() -> &'static str {
    env!("HSCTC_BUILD_VERSION")
}

/// Hex SHA-256 of `command` and the canonical configuration.
pub fn config_hash(command: &str, canonical: &str) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(canonical.as_bytes());
    format!("{:x}", h.finalize())
}

/// Seed of sweep point `index`, derived from the master seed.
pub fn sub_seed(master: u64, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"hsctc-point");
    h.update(master.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointMeta {
    pub index: usize,
    pub label: String,
    pub sub_seed: u64,
    pub completed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub points: Vec<PointMeta>,
    /// Length of the CSV once every completed point was written.
    pub csv_bytes: u64,
    pub created_unix: u64,
    pub updated_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn csv_bytes(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

/// Path of the sidecar belonging to `csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Default CSV path for a subcommand when `--out` is not given.
pub fn default_output(command: &str) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"));
    dir.join(format!("{command}.csv"))
}

/// What a sweep needs to open its output.
pub struct OutputSpec<'a> {
    pub csv: &'a Path,
    pub command: &'a str,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: BTreeMap<String, String>,
    /// Columns after `schema_version`.
    pub columns: Vec<&'a str>,
    /// One label per sweep point.
    pub points: Vec<String>,
    pub force: bool,
}

pub struct Output {
    csv: PathBuf,
    json: PathBuf,
    file: File,
    meta: Sidecar,
}

impl Output {
    /// Opens fresh output, or resumes matching output. Returns the index of
    /// the first point still to compute.
    pub fn open(spec: OutputSpec<'_>) -> Result<(Output, usize)> {
        let json = sidecar_path(spec.csv);
        let exists = spec.csv.exists() || json.exists();
        if exists && !spec.force {
            if let Some(resumed) = Self::try_resume(&spec, &json)? {
                return Ok(resumed);
            }
            bail!(
                "{} already exists from a different configuration; pass --force to overwrite",
                spec.csv.display()
            );
        }
        if let Some(dir) = spec.csv.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let mut columns = vec!["schema_version".to_string()];
        columns.extend(spec.columns.iter().map(|c| c.to_string()));
        let header = csv_bytes(&[columns.clone()])?;
        let mut file = File::create(spec.csv).with_context(|| format!("creating {}", spec.csv.display()))?;
        file.write_all(&header)?;
        file.sync_data()?;
        let t = now();
        let meta = Sidecar {
            schema_version: SCHEMA_VERSION,
            tool_version: tool_version().to_string(),
            command: spec.command.to_string(),
            config_hash: spec.config_hash.clone(),
            master_seed: spec.master_seed,
            config: spec.config.clone(),
            columns,
            points: spec
                .points
                .iter()
                .enumerate()
                .map(|(i, l)| PointMeta { index: i, label: l.clone(), sub_seed: sub_seed(spec.master_seed, i), completed: false })
                .collect(),
            csv_bytes: header.len() as u64,
            created_unix: t,
            updated_unix: t,
        };
        let mut out = Output { csv: spec.csv.to_path_buf(), json, file, meta };
        out.write_sidecar()?;
        Ok((out, 0))
    }

    fn try_resume(spec: &OutputSpec<'_>, json: &Path) -> Result<Option<(Output, usize)>> {
        let Ok(text) = fs::read_to_string(json) else { return Ok(None) };
        let Ok(meta) = serde_json::from_str::<Sidecar>(&text) else { return Ok(None) };
        if meta.config_hash != spec.config_hash || meta.command != spec.command || meta.schema_version != SCHEMA_VERSION {
            return Ok(None);
        }
        if !spec.csv.exists() {
            return Ok(None);
        }
        let file = OpenOptions::new().read(true).write(true).open(spec.csv)?;
        let len = file.metadata()?.len();
        if len < meta.csv_bytes {
            bail!("{} is shorter than its sidecar records; pass --force to start over", spec.csv.display());
        }
        // drops rows of a point that was interrupted before completion
        file.set_len(meta.csv_bytes)?;
        file.sync_data()?;
        let done = meta.points.iter().take_while(|p| p.completed).count();
        let mut file = file;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::End(0))?;
        Ok(Some((Output { csv: spec.csv.to_path_buf(), json: json.to_path_buf(), file, meta }, done)))
    }

    fn write_sidecar(&mut self) -> Result<()> {
        self.meta.updated_unix = now();
        let tmp = self.json.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&self.meta)? + "\n")?;
        fs::rename(&tmp, &self.json)?;
        Ok(())
    }

    pub fn sub_seed(&self, index: usize) -> u64 {
        self.meta.points[index].sub_seed
    }

    pub fn num_points(&self) -> usize {
        self.meta.points.len()
    }

    /// Appends the rows of point `index` (without the schema column) and
    /// marks it complete.
    pub fn append_point(&mut self, index: usize, rows: &[Vec<String>]) -> Result<()> {
        let done = self.meta.points.iter().take_while(|p| p.completed).count();
        if index != done {
            bail!("point {index} written out of order (next is {done})");
        }
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| std::iter::once(SCHEMA_VERSION.to_string()).chain(r.iter().cloned()).collect())
            .collect();
        let bytes = csv_bytes(&rows)?;
        self.file.write_all(&bytes)?;
        self.file.flush()?;
        self.file.sync_data()?;
        self.meta.csv_bytes += bytes.len() as u64;
        self.meta.points[index].completed = true;
        self.write_sidecar()
    }

    pub fn csv_path(&self) -> &Path {
        &self.csv
    }

    pub fn sidecar(&self) -> &Sidecar {
        &self.meta
    }
}
