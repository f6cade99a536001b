//! Result documents, input loading, CSV output and error reporting.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use coklab::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new() -> Self {
        Provenance {
            tool: "coklab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: std::env::args().skip(1).collect(),
            config_hash: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document<T> {
    pub provenance: Provenance,
    pub result: T,
}

/// A failure with its exit status: 1 for invalid requests, 2 for computational limits.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub code: i32,
}

impl Failure {
    pub fn invalid(kind: &str, message: impl Into<String>) -> Self {
        Failure { kind: kind.into(), message: message.into(), code: 1 }
    }

    pub fn report(&self) {
        let body = serde_json::json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.code } });
        eprintln!("{body}");
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_computational() { 2 } else { 1 };
        Failure { kind: e.kind().into(), message: e.to_string(), code }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::invalid("io", e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::invalid("io", e.to_string())
    }
}

pub type Outcome<T> = Result<T, Failure>;

/// Reads a JSON input that is either a bare value or a document wrapping it.
pub fn load<T: DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid("io", format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::invalid("parse", format!("{}: {e}", path.display())))?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("provenance") && obj.contains_key("result") {
            value = obj.remove("result").unwrap();
        }
    }
    serde_json::from_value(value).map_err(|e| Failure::invalid("schema", format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Where and how to write a result.
pub struct Sink {
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl Sink {
    fn write_text(&self, text: &str) -> Outcome<()> {
        match &self.output {
            Some(path) => std::fs::write(path, text).map_err(|e| Failure::invalid("io", format!("{}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    pub fn json<T: Serialize>(&self, provenance: Provenance, result: &T) -> Outcome<()> {
        if self.format != Format::Json {
            return Err(Failure::invalid("invalid_input", "this command only writes JSON"));
        }
        self.emit_json(provenance, result)
    }

    fn emit_json<T: Serialize>(&self, provenance: Provenance, result: &T) -> Outcome<()> {
        let doc = Document { provenance, result };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::invalid("serialize", e.to_string()))?;
        text.push('\n');
        self.write_text(&text)
    }

    /// JSON, or CSV rows produced by `rows` under a `# key: value` provenance header.
    pub fn table<T: Serialize>(
        &self,
        provenance: Provenance,
        result: &T,
        rows: impl FnOnce() -> Outcome<String>,
    ) -> Outcome<()> {
        match self.format {
            Format::Json => self.emit_json(provenance, result),
            Format::Csv => {
                let mut text = String::new();
                text.push_str(&format!("# tool: {} {}\n", provenance.tool, provenance.version));
                text.push_str(&format!("# command: {}\n", provenance.command.join(" ")));
                if let Some(h) = &provenance.config_hash {
                    text.push_str(&format!("# config_hash: {h}\n"));
                }
                if let Some(s) = provenance.seed {
                    text.push_str(&format!("# seed: {s}\n"));
                }
                text.push_str(&rows()?);
                self.write_text(&text)
            }
        }
    }
}

/// CSV text from a header and string rows.
pub fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Outcome<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::invalid("io", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
