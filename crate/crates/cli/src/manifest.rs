use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

pub const RUN_MANIFEST_FILE: &str = "run-manifest";

/// Record of one invocation, written as `key=value` lines into the output
/// directory. `argv` holds the exact command line; `config.*` lines hold
/// every resolved parameter including defaults.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub argv: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub started: String,
    pub results: Vec<(String, String)>,
}

impl RunManifest {
    pub fn to_text(&self, status: &str) -> String {
        let mut out = String::from("corrgan-run-manifest 1\n");
        out += &format!("subcommand={}\n", self.subcommand);
        out += &format!("argv={}\n", Value::from(self.argv.clone()));
        match self.seed {
            Some(s) => out += &format!("seed={s}\n"),
            None => out += "seed=none\n",
        }
        out += &format!("version={}\n", env!("CARGO_PKG_VERSION"));
        out += &format!("started={}\n", self.started);
        out += &format!("finished={}\n", chrono::Utc::now().to_rfc3339());
        if let Value::Object(fields) = &self.config {
            for (k, v) in fields {
                out += &format!("config.{k}={v}\n");
            }
        }
        for (k, v) in &self.results {
            out += &format!("result.{k}={v}\n");
        }
        out += &format!("status={status}\n");
        out
    }

    pub fn write(&self, dir: &Path, status: &str) -> Result<(), CliError> {
        let path = dir.join(RUN_MANIFEST_FILE);
        fs::write(&path, self.to_text(status)).map_err(|e| CliError::io(&path, e))
    }
}

/// Reads back the `argv` line of a run-manifest.
pub fn manifest_argv(text: &str) -> Option<Vec<String>> {
    let line = text.lines().find_map(|l| l.strip_prefix("argv="))?;
    serde_json::from_str(line).ok()
}
