use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::CliError;
use crate::Ctx;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: &'static str,
    pub wall_clock_secs: f64,
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// An output directory under construction: marked `.partial` until
/// `finish` writes the manifest and removes the marker.
pub struct OutputDir {
    pub dir: PathBuf,
    started: Instant,
}

pub const PARTIAL_MARKER: &str = ".partial";
pub const MANIFEST_FILE: &str = "manifest.json";

impl OutputDir {
    /// Refuses directories that already hold a finished run.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        if dir.join(MANIFEST_FILE).exists() {
            return Err(CliError::config(anyhow::anyhow!(
                "{} already holds a finished run; outputs are write-once",
                dir.display()
            )));
        }
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(PARTIAL_MARKER), b"")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn finish(self, ctx: &Ctx, config: serde_json::Value, inputs: Vec<PathBuf>, outputs: &[&str]) -> Result<(), CliError> {
        let m = RunManifest {
            command_line: ctx.argv.clone(),
            config,
            seed: ctx.seed,
            threads: ctx.threads,
            inputs,
            outputs: outputs.iter().map(PathBuf::from).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
        };
        write_atomic(&self.path(MANIFEST_FILE), &serde_json::to_vec_pretty(&m)?)?;
        std::fs::remove_file(self.path(PARTIAL_MARKER))?;
        Ok(())
    }
}
