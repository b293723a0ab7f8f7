//! Wireless-link security simulator and audit toolkit for unmanned aerial
//! systems.

pub mod adversary;
pub mod audit;
pub mod cipher;
pub mod config;
pub mod link;
pub mod model;
pub mod presets;
pub mod sim;

pub use adversary::{AdversaryState, AttackOutcome, Observation, RejectReason};
pub use audit::{full_audit, AuditReport, Declarations, ProtocolRegistry, Verdict};
pub use cipher::{CipherConfig, CipherMode, Key128};
pub use config::{ConfigDocument, ConfigError};
pub use link::{Command, Frame, LinkEndpoint, ProtocolKind};
pub use model::{SegmentId, SystemTopology};
pub use sim::{run, run_batch, AdversaryPlan, Metrics, Scenario, Transcript};
