//! Artifact directory: manifest, canonical config, JSON reports and CSV tables.

use minimax_lab::config::ExperimentConfig;
use minimax_lab::pathspace::Path as StatePath;
use minimax_lab::suites::Table;
use minimax_lab::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_name: &'a str,
    preset: Option<&'a str>,
    config_sha256: String,
    seed: u64,
    workers: usize,
    created: String,
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(cfg.canonical_json()?.as_bytes());
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root)?;
        Ok(ArtifactDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_manifest(&self, command: &str, cfg: &ExperimentConfig, preset: Option<&str>) -> Result<()> {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_name: &cfg.name,
            preset,
            config_sha256: config_hash(cfg)?,
            seed: cfg.seed,
            workers: rayon::current_num_threads(),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.write_json("manifest.json", &m)?;
        let mut cfg_json = serde_json::to_string_pretty(cfg)?;
        cfg_json.push('\n');
        fs::write(self.root.join("config.json"), cfg_json)?;
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.root.join(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn write_table(&self, table: &Table) -> Result<()> {
        let w = BufWriter::new(File::create(self.root.join(format!("{}.csv", table.name)))?);
        table.write_csv(w)
    }

    pub fn write_path(&self, name: &str, path: &StatePath) -> Result<()> {
        let w = BufWriter::new(File::create(self.root.join(name))?);
        path.write_csv(w)
    }
}
