use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

/// How ties on score are broken when ranking.
pub const TIE_POLICY: &str = "score descending, decoy before target, then spectrum_id ascending";

/// Settings a run used; absent fields did not apply to the command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_sign: Option<bool>,
    pub tie_policy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<serde_json::Value>,
}

impl ConfigEcho {
    pub fn new() -> Self {
        ConfigEcho {
            tie_policy: TIE_POLICY.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    /// The command line as invoked.
    pub command: Vec<String>,
    pub config: ConfigEcho,
    pub results: serde_json::Value,
}

impl RunReport {
    pub fn new(command: Vec<String>, config: ConfigEcho, results: serde_json::Value) -> Self {
        RunReport {
            format_version: FORMAT_VERSION,
            command,
            config,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
