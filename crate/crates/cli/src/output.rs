use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use rkhskit::io::{write_atomic, write_csv, Cell};
use rkhskit::{Error, Result};

use crate::args::Command;

/// Destination directory for one run's artifacts.
pub struct OutputDir {
    dir: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    config: &'a Command,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(OutputDir { dir: dir.to_path_buf() })
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        write_atomic(&self.dir.join(name), text.as_bytes())
    }

    pub fn csv(&self, name: &str, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
        write_csv(&self.dir.join(name), header, rows)
    }

    pub fn manifest(&self, command: &Command) -> Result<()> {
        self.json(
            "manifest.json",
            &Manifest {
                version: rkhskit::VERSION,
                seed: command.common().seed,
                config: command,
            },
        )
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
