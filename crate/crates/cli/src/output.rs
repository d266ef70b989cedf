use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Writes artifacts into the output directory, each with a `.meta.json`
/// sidecar holding the resolved config, options and tool version.
pub struct Output {
    dir: PathBuf,
    meta: Value,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, subcommand: &str, config: &RunConfig, options: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let meta = json!({
            "tool": "contagion",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "options": serde_json::to_value(options).map_err(|e| CliError::Runtime(e.to_string()))?,
            "config": serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?,
        });
        Ok(Self { dir: dir.to_path_buf(), meta, written: Vec::new() })
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, data).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut meta = self.meta.clone();
        meta["file"] = Value::String(name.to_string());
        let side = self.dir.join(format!("{name}.meta.json"));
        fs::write(&side, pretty(&meta)?).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", side.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = pretty(value)?;
        self.bytes(name, text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn pretty(value: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
