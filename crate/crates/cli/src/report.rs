//! Output plumbing: the provenance block, file guards and human tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::{Failure, OutputArgs};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub mvn_tol: Option<f64>,
    pub options: Value,
    /// Seconds since the Unix epoch; the only field that varies between
    /// otherwise identical runs.
    pub generated_at: u64,
}

pub fn provenance(command: &'static str, seed: Option<u64>, mvn_tol: Option<f64>, options: Value) -> Provenance {
    Provenance {
        tool: "combfit",
        version: env!("CARGO_PKG_VERSION"),
        library_version: combfit::VERSION,
        command,
        seed,
        mvn_tol,
        options,
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    }
}

/// Where a command's main output goes.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    /// Refuses an existing file unless `--force` was given. Checked before
    /// any work is done.
    pub fn open(out: &OutputArgs) -> Result<Self, Failure> {
        if let Some(p) = &out.output {
            guard(p, out.force)?;
        }
        Ok(Self {
            path: out.output.clone(),
        })
    }

    pub fn to_file(&self) -> bool {
        self.path.is_some()
    }

    pub fn write(&self, content: &str) -> Result<(), Failure> {
        match &self.path {
            Some(p) => fs::write(p, content).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| Failure::usage(format!("cannot write to stdout: {e}")))
            }
        }
    }

    /// JSON document to the sink; the table goes to stdout only when the
    /// JSON went to a file.
    pub fn emit(&self, provenance: &Provenance, body: Value, table: impl FnOnce() -> String) -> Result<(), Failure> {
        let mut doc = json!({ "provenance": provenance });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::usage(e.to_string()))? + "\n";
        self.write(&text)?;
        if self.to_file() {
            print!("{}", table());
        }
        Ok(())
    }
}

pub fn guard(path: &Path, force: bool) -> Result<(), Failure> {
    if path.exists() && !force {
        return Err(Failure::usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

pub fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}
