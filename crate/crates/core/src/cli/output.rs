use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    inputs: &'a [InputHash],
    outputs: &'a [String],
    wall_time_s: f64,
}

/// Collects the files of one run under `output_dir` and writes the manifest
/// once the command has succeeded.
pub struct Run {
    dir: PathBuf,
    command: String,
    started: Instant,
    inputs: Vec<InputHash>,
    outputs: Vec<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(crate::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

impl Run {
    pub fn new(command: &str, dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Read an input file and record its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.hash_input(path, &bytes);
        String::from_utf8(bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8 text", path.display())))
    }

    pub fn hash_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        write_atomic(&path, contents.as_bytes())?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))? + "\n";
        self.write(name, &text)
    }

    pub fn finish<C: Serialize>(self, config: &C) -> Result<PathBuf, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Core(e.into()))?;
        let manifest = Manifest {
            tool: "nvforge",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config: &config,
            inputs: &self.inputs,
            outputs: &self.outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Core(e.into()))? + "\n";
        let path = self.dir.join(MANIFEST);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
