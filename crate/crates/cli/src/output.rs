use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Reproducibility stamp carried by every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Header {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        // hash the normalized config so formatting and defaults do not matter
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Self {
            tool: "kitaev-edge",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(&canonical)),
            seed,
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# {} {} {} config_sha256={} seed={}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        )
    }
}

pub struct Writer {
    pub dir: PathBuf,
    pub header: Header,
    pub written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path, header: Header) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::numerical(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            written: Vec::new(),
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            header: &'a Header,
            result: &'a T,
        }
        let text = serde_json::to_string_pretty(&Doc {
            header: &self.header,
            result,
        })
        .map_err(|e| CliError::numerical(format!("json: {e}")))?;
        self.put(name, text.into_bytes())
    }

    /// Writes a CSV produced by `fill`, preceded by a `#` header line.
    pub fn csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> kitaev_edge::error::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = self.header.csv_comment().into_bytes();
        fill(&mut buf)?;
        self.put(name, buf)
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::numerical(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}
