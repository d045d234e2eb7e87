use std::collections::BTreeMap;

use serde::Serialize;

/// Everything needed to reproduce a command's output. No timestamps, so
/// reruns with the same inputs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub flags: serde_json::Value,
    pub config: Option<String>,
    pub seed: u64,
    /// Input name → SHA-256.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, flags: &impl Serialize, config: Option<String>, seed: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            flags: serde_json::to_value(flags).expect("flags serialize"),
            config,
            seed,
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: impl Into<String>, digest: impl Into<String>) {
        self.inputs.insert(name.into(), digest.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}
