//! Deterministic report writing: JSON with 17-digit floats, CSV files, hashes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ode::integrator::fmt17;

/// Pretty JSON formatter that prints every float with seventeen significant digits.
struct Float17(PrettyFormatter<'static>);

impl Formatter for Float17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt17(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with sorted-as-declared keys, 17-digit floats and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        Float17(PrettyFormatter::with_indent(b"  ")),
    );
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Collects the files of one command run and writes them on [`Self::finish`] or [`Self::fail`].
pub struct Reporter {
    dir: PathBuf,
    command: &'static str,
    config: Value,
    config_hash: String,
    files: Vec<(String, String)>,
}

impl Reporter {
    pub fn new(dir: &Path, command: &'static str, config: Value) -> Result<Self> {
        let canonical = to_json_string(&config)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
            config_hash: sha256_hex(canonical.as_bytes()),
            files: Vec::new(),
        })
    }

    /// Queues a CSV or text file; rows must already end in `\n`.
    pub fn add_file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn summary(&self, status: &str, results: Value, error: Option<String>) -> Result<String> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(name, body)| serde_json::json!({ "name": name, "sha256": sha256_hex(body.as_bytes()) }))
            .collect();
        let results_hash = sha256_hex(to_json_string(&results)?.as_bytes());
        let mut doc = serde_json::Map::new();
        doc.insert("command".into(), Value::String(self.command.into()));
        doc.insert(
            "version".into(),
            Value::String(env!("CARGO_PKG_VERSION").into()),
        );
        doc.insert("status".into(), Value::String(status.into()));
        if let Some(e) = error {
            doc.insert("error".into(), Value::String(e));
        }
        doc.insert("config".into(), self.config.clone());
        doc.insert(
            "config_sha256".into(),
            Value::String(self.config_hash.clone()),
        );
        doc.insert("results".into(), results);
        doc.insert("results_sha256".into(), Value::String(results_hash));
        doc.insert("files".into(), Value::Array(files));
        to_json_string(&Value::Object(doc))
    }

    fn write_all(&self, summary: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| Error::Io(format!("{}: {e}", self.dir.display())))?;
        for (name, body) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        let path = self.dir.join(format!("{}_summary.json", self.command));
        fs::write(&path, summary).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn finish(self, results: Value) -> Result<PathBuf> {
        let summary = self.summary("ok", results, None)?;
        self.write_all(&summary)
    }

    /// Flushes whatever was collected, appending a `FAILED:` line to every queued file.
    pub fn fail(mut self, partial: Value, error: &Error) -> Result<PathBuf> {
        let marker = format!("FAILED: {error}\n");
        for (_, body) in &mut self.files {
            body.push_str(&marker);
        }
        if self.files.is_empty() {
            self.files.push((format!("{}.csv", self.command), marker));
        }
        let summary = self.summary("FAILED", partial, Some(error.to_string()))?;
        self.write_all(&summary)
    }
}

/// Gnuplot-ready two-column data.
pub fn two_column(header: &str, rows: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("# {header}\n");
    for (x, y) in rows {
        out.push_str(&fmt17(x));
        out.push(' ');
        out.push_str(&fmt17(y));
        out.push('\n');
    }
    out
}
