//! Run manifest embedded at the top of every output file so a result can
//! be traced back to the exact invocation that produced it.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Unix seconds; honors `SOURCE_DATE_EPOCH` for reproducible output.
    pub timestamp: u64,
    /// All resolved parameters, sorted by key for stable serialization.
    pub params: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("manifest parameter serializes"),
        );
        self
    }

    /// Renders the manifest as '#'-prefixed comment lines that series and
    /// table readers skip.
    pub fn comment_block(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        format!("# manifest: {json}\n")
    }
}

fn timestamp() -> u64 {
    if let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(v) = raw.trim().parse::<u64>() {
            return v;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
