//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects what a command read and wrote so the run can be repeated.
pub struct Manifest {
    command: &'static str,
    parameters: Map<String, Value>,
    inputs: Map<String, Value>,
    outputs: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            parameters: Map::new(),
            inputs: Map::new(),
            outputs: Map::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.to_string(), value.into());
    }

    pub fn input(&mut self, role: &str, path: &str, content: &[u8]) {
        self.inputs.insert(
            role.to_string(),
            json!({ "path": path, "sha256": sha256_hex(content) }),
        );
    }

    fn to_json(&self) -> String {
        let doc = json!({
            "tool": "factorplan",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "outputs": self.outputs,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// Destination for a command's files. Without a directory, nothing is written
/// and callers print their primary result instead.
pub struct OutputDir {
    dir: Option<PathBuf>,
}

impl OutputDir {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn is_set(&self) -> bool {
        self.dir.is_some()
    }

    fn ensure(&self) -> Result<&Path, Failure> {
        let dir = self.dir.as_deref().expect("output directory set");
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))
            .map_err(Failure::Internal)?;
        Ok(dir)
    }

    pub fn write(&self, manifest: &mut Manifest, name: &str, content: &str) -> Result<(), Failure> {
        let path = self.ensure()?.join(name);
        fs::write(&path, content)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Internal)?;
        manifest
            .outputs
            .insert(name.to_string(), json!(sha256_hex(content.as_bytes())));
        Ok(())
    }

    pub fn finish(&self, manifest: &Manifest) -> Result<(), Failure> {
        let path = self.ensure()?.join("manifest.json");
        fs::write(&path, manifest.to_json())
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::Internal)
    }
}
