//! Error-to-exit-code mapping, input reading, and the run recorder that
//! writes outputs plus a `<command>.run.json` sidecar.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use obygaze::ErrorKind;
use serde_json::{json, Value};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration, or an unreadable input.
    Usage(String),
    Io(PathBuf, std::io::Error),
    Core(obygaze::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(..) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Parse => 2,
                ErrorKind::Invariant => 3,
                ErrorKind::Precondition => 4,
                ErrorKind::Numeric => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<obygaze::Error> for CliError {
    fn from(e: obygaze::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Io(path.to_owned(), e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_owned(), e))
}

/// Attaches the file name to a parse failure.
pub fn in_file<T>(path: &Path, r: obygaze::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        eprintln!("error in {}", path.display());
        CliError::Core(e)
    })
}

/// Collects the resolved configuration, derived seeds and output names of
/// one command, then writes the sidecar.
pub struct Run {
    command: &'static str,
    out: PathBuf,
    config: BTreeMap<String, Value>,
    inputs: Vec<String>,
    seeds: BTreeMap<String, u64>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(command: &'static str, out: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&out).map_err(|e| CliError::Io(out.clone(), e))?;
        Ok(Run {
            command,
            out,
            config: BTreeMap::new(),
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn set(&mut self, key: &str, value: impl serde::Serialize) {
        self.config.insert(key.to_owned(), json!(value));
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Records a derived seed and logs it.
    pub fn seed(&mut self, label: impl Into<String>, value: u64) {
        let label = label.into();
        eprintln!("seed {label} = {value}");
        self.seeds.insert(label, value);
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_owned(), e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        let sidecar = format!("{}.run.json", self.command);
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "inputs": self.inputs,
            "seeds": self.seeds,
            "outputs": self.outputs,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("sidecar serializes");
        text.push('\n');
        let path = self.out.join(&sidecar);
        fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
        self.outputs.push(sidecar);
        Ok(())
    }
}
