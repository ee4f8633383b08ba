//! CSV/JSON emission with a manifest per invocation.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use crate::config::ExperimentConfig;
use crate::ensemble::EnsembleOutput;
use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Records every file an invocation wrote, then seals them into a
/// manifest carrying the resolved config and its hash.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output dir {root}"))?;
        Ok(Self {
            root: PathBuf::from(root),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes one CSV with the given header and row lines.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = String>,
    {
        let mut body = String::from(header);
        body.push('\n');
        for row in rows {
            body.push_str(&row);
            body.push('\n');
        }
        self.write_raw(name, body.as_bytes())
    }

    /// Writes one JSON document.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_raw(name, text.as_bytes())
    }

    /// Writes newline-delimited JSON records.
    pub fn jsonl<T: Serialize>(&mut self, name: &str, values: &[T]) -> Result<()> {
        let mut body = String::new();
        for v in values {
            body.push_str(&serde_json::to_string(v)?);
            body.push('\n');
        }
        self.write_raw(name, body.as_bytes())
    }

    fn write_raw(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).with_context(|| format!("writing {name}"))?;
        f.write_all(bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Seals the manifest; every output file is reconstructible from the
    /// embedded resolved config plus the command line.
    pub fn finish(mut self, command: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            master_seed: u64,
            config_sha256: String,
            versions: Versions,
            outputs: Vec<String>,
            config: &'a ExperimentConfig,
        }
        #[derive(Serialize)]
        struct Versions {
            core: &'static str,
            cli: &'static str,
        }
        let canonical = cfg.canonical_toml();
        let digest = Sha256::digest(canonical.as_bytes());
        let manifest = Manifest {
            command,
            master_seed: cfg.seed,
            config_sha256: format!("{digest:x}"),
            versions: Versions {
                core: minit_version(),
                cli: env!("CARGO_PKG_VERSION"),
            },
            outputs: std::mem::take(&mut self.written),
            config: cfg,
        };
        let path = self.path("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

fn minit_version() -> &'static str {
    // workspace versions move together
    env!("CARGO_PKG_VERSION")
}

/// Emits the aggregate files of one ensemble variant under a label.
pub fn write_ensemble(
    out: &mut OutputDir,
    label: &str,
    ensemble: &EnsembleOutput,
    with_records: bool,
) -> Result<()> {
    out.csv(
        &format!("error_profile_{label}.csv"),
        "k,median_nse_obs,median_nse_mod",
        ensemble
            .median_profile
            .iter()
            .map(|(k, o, m)| format!("{k},{o},{m}")),
    )?;
    out.csv(
        &format!("horizon_cdf_{label}.csv"),
        "k,cdf",
        ensemble
            .horizon
            .cdf
            .iter()
            .enumerate()
            .map(|(k, c)| format!("{k},{c}")),
    )?;
    if with_records {
        out.jsonl(&format!("records_{label}.jsonl"), &ensemble.records)?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        label: &'a str,
        runs_included: usize,
        runs_excluded: usize,
        excluded: &'a [(u64, String)],
        k_max: f64,
        censored_runs: usize,
        mean_nse0_mod: f64,
        median_nse0_mod: f64,
    }
    out.json(
        &format!("summary_{label}.json"),
        &Summary {
            label,
            runs_included: ensemble.records.len(),
            runs_excluded: ensemble.failures.len(),
            excluded: &ensemble.failures,
            k_max: ensemble.horizon.k_max,
            censored_runs: ensemble.horizon.censored.iter().filter(|&&c| c).count(),
            mean_nse0_mod: ensemble.mean_nse0_mod,
            median_nse0_mod: ensemble.median_nse0_mod,
        },
    )?;
    Ok(())
}

/// Reads a file back as a string (test helper for byte comparisons).
pub fn read_output(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}
