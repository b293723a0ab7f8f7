//! JSON documents read and written by the command-line tool.
//!
//! Every document rejects unknown keys. The configuration document has five
//! sections:
//!
//! ```json
//! {
//!   "topology":  { "components": [...], "segments": [ { "id": "S3", ..., "cipher_tx": "name", "cipher_rx": "name" } ] },
//!   "ciphers":   { "name": { "mode": "GCM", "key": "<32 hex>", "nonce_policy": "RandomPerMessage", "kcmvp_certified": true } },
//!   "protocols": { "segments": { "S3": "Hardened" }, "asymmetric_encryption": false, "randomized_asymmetric": false },
//!   "scenario":  { "name": "fig4", "link": "S3", "ticks": 1000, "seed": 7, "traffic": "Uniform" },
//!   "adversary": { "plan": "ReplayAfter", "captures": 10, "injections": 100 }
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{AuditReport, Declarations};
use crate::cipher::CipherConfig;
use crate::model::{
    ComponentKind, DataKind, DistanceClass, LinkMethodId, LinkProfile, ModelError, Segment, SegmentId,
    SystemTopology,
};
use crate::sim::{AdversaryPlan, BatchStats, Metrics, Scenario, Traffic};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("segment {segment} refers to unknown cipher {name:?}")]
    UnknownCipher { segment: SegmentId, name: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub id: SegmentId,
    pub distance_class: DistanceClass,
    pub data_kinds: BTreeSet<DataKind>,
    pub link_method: LinkMethodId,
    pub cipher_tx: String,
    pub cipher_rx: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub components: Vec<ComponentKind>,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: String,
    pub link: SegmentId,
    pub ticks: u64,
    pub seed: u64,
    pub traffic: Traffic,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            link: SegmentId::S3,
            ticks: 1000,
            seed: 0,
            traffic: Traffic::Uniform,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub topology: TopologySection,
    #[serde(default)]
    pub ciphers: BTreeMap<String, CipherConfig>,
    #[serde(default)]
    pub protocols: Declarations,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub adversary: AdversaryPlan,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&read(path.as_ref())?)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    /// Resolves cipher names and validates the topology.
    pub fn topology(&self) -> Result<SystemTopology, ConfigError> {
        let lookup = |segment, name: &String| {
            self.ciphers
                .get(name)
                .copied()
                .ok_or_else(|| ConfigError::UnknownCipher { segment, name: name.clone() })
        };
        let segments = self
            .topology
            .segments
            .iter()
            .map(|e| {
                Ok(Segment {
                    id: e.id,
                    distance_class: e.distance_class,
                    data_kinds: e.data_kinds.clone(),
                    crypto_tx: lookup(e.id, &e.cipher_tx)?,
                    crypto_rx: lookup(e.id, &e.cipher_rx)?,
                    link_method: e.link_method.clone(),
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(SystemTopology::new(self.topology.components.iter().copied(), segments)?)
    }

    pub fn declarations(&self) -> &Declarations {
        &self.protocols
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let s = &self.scenario;
        Ok(Scenario {
            name: s.name.clone(),
            topology: self.topology()?,
            link: s.link,
            protocol: self.protocols.protocol(s.link),
            traffic: s.traffic.clone(),
            ticks: s.ticks,
            plan: self.adversary,
            seed: s.seed,
        })
    }
}

/// Link-method catalog file: `{ "links": [ ... ] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDocument {
    pub links: Vec<LinkProfile>,
}

impl CatalogDocument {
    pub fn builtin() -> Self {
        Self { links: crate::model::catalog() }
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: Self = serde_json::from_str(text)?;
        if let Some(bad) = doc.links.iter().find(|p| !p.range.is_valid()) {
            return Err(ConfigError::Parse(serde::de::Error::custom(format!(
                "link {} has an invalid range",
                bad.id
            ))));
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&read(path.as_ref())?)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}

/// Output of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationReport {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    /// SHA-256 of the JSONL transcript.
    pub transcript_sha256: String,
    pub metrics: Metrics,
}

/// Output of a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchReport {
    pub batches: Vec<BatchStats>,
}

/// Structured report file: exactly one of the report kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Report {
    Simulation(SimulationReport),
    Batch(BatchReport),
    Audit(AuditReport),
    Policy(Vec<crate::audit::PolicyTier>),
}

impl Report {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }
}
