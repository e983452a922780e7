use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use netchar_core::{ErrorKind, NoiseModel, SweepConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const TOLERANCE_EXCEEDED: i32 = 1;
    pub const VALIDATION: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => exit::VALIDATION,
            ErrorKind::Numerical => exit::NUMERICAL,
            ErrorKind::Io => exit::IO,
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError {
            kind: self.kind,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            ErrorKind::Validation => "invalid input",
            ErrorKind::Numerical => "numerical failure",
            ErrorKind::Io => "i/o failure",
        };
        write!(f, "{label}: {}", self.message)
    }
}

impl From<netchar_core::Error> for CliError {
    fn from(err: netchar_core::Error) -> Self {
        CliError {
            kind: err.kind(),
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Debug, Serialize)]
pub struct NoiseParameters {
    pub intensity_sigma: f64,
    pub phase_jitter_sigma: f64,
}

impl From<&NoiseModel> for NoiseParameters {
    fn from(n: &NoiseModel) -> Self {
        NoiseParameters {
            intensity_sigma: n.intensity_sigma,
            phase_jitter_sigma: n.phase_jitter_sigma,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub noise: Option<NoiseParameters>,
    pub sweep: Option<SweepConfig>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            noise: None,
            sweep: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Sidecar manifest path for a single-file output: `x.json` → `x.json.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes via a temporary file in the destination directory, then renames.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    {
        let mut buffered = io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buffered)?;
        buffered.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io(path, e.into()))?;
        writeln!(w).map_err(|e| CliError::io(path, e))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(io::BufReader::new(file)).map_err(|e| {
        if e.is_io() {
            CliError::io(path, e.into())
        } else {
            CliError::validation(format!("{}: {e}", path.display()))
        }
    })
}
