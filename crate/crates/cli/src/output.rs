//! Run context: input digests, output files and the JSON envelope every
//! command prints.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use qubit_decoherence::presets::Presets;
use qubit_decoherence::Error;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Prefix selecting a bundled preset instead of a file, e.g. `preset:cs133`.
const PRESET_PREFIX: &str = "preset:";

#[derive(Debug)]
pub enum CliError {
    NotFound(PathBuf),
    Usage(String),
    Io(std::io::Error),
    Core(Error),
    ReportFailed(Vec<String>),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::NotFound(p) => write!(f, "file not found: {}", p.display()),
            CliError::Usage(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ReportFailed(ids) => write!(f, "failing rows: {}", ids.join(", ")),
        }
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::NotFound(_) => "config_not_found",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io_error",
            CliError::ReportFailed(_) => "report_failed",
            CliError::Core(e) => match e {
                Error::Domain(_) => "domain_error",
                Error::Config(_) => "invalid_config",
                Error::Unsupported(_) => "unsupported",
                Error::Unidentifiable(_) => "unidentifiable",
                Error::NotConverged { .. } => "not_converged",
                Error::Parse(_) | Error::Json(_) | Error::Csv(_) => "parse_error",
                Error::Io(_) => "io_error",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::ReportFailed(_) => 3,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() }, "version": VERSION })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub struct Ctx {
    pub seed: u64,
    pub out_dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Ctx {
    pub fn new(seed: u64, out_dir: PathBuf) -> Self {
        Ctx {
            seed,
            out_dir,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Reads `path`, recording its digest. `preset:NAME` resolves to the
    /// bundled preset `NAME.json`.
    pub fn read(&mut self, path: &Path) -> CliResult<String> {
        let s = path.to_string_lossy();
        if let Some(name) = s.strip_prefix(PRESET_PREFIX) {
            let name = if name.ends_with(".json") {
                name.to_string()
            } else {
                format!("{name}.json")
            };
            let text = Presets::bundled().text(&name)?.to_string();
            self.record(&format!("{PRESET_PREFIX}{name}"), text.as_bytes());
            return Ok(text);
        }
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::NotFound(path.to_path_buf()),
            _ => CliError::Io(e),
        })?;
        self.record(&s, text.as_bytes());
        Ok(text)
    }

    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes)?;
        self.outputs.push(path.to_string_lossy().into_owned());
        Ok(())
    }

    /// JSON document embedding seed, version and input digests. Keys come out
    /// sorted because `serde_json::Map` is ordered.
    pub fn envelope(&self, command: &str, result: Value) -> Value {
        json!({
            "command": command,
            "tool": "qdecoh",
            "version": VERSION,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "result": result,
        })
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}
