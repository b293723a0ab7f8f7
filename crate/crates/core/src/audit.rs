//! Checklist engine, segment-coverage analysis and tiered-strength policy.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cipher::{probe_determinism, CipherConfig, CipherMode, Determinism};
use crate::link::ProtocolKind;
use crate::model::{DataKind, SegmentId, SystemTopology};

const PROBE_TRIALS: usize = 8;
const PROBE_SEED: u64 = 0x5eed_a0d1;

/// What the operator declares about protocols and asymmetric crypto; the
/// parts of a system the topology's cipher configs do not capture.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Declarations {
    /// Protocol per segment; a segment without an entry counts as `Naive`.
    #[serde(default)]
    pub segments: BTreeMap<SegmentId, ProtocolKind>,
    /// The crypto module offers public-key encryption.
    #[serde(default)]
    pub asymmetric_encryption: bool,
    /// That public-key encryption uses randomized padding.
    #[serde(default)]
    pub randomized_asymmetric: bool,
}

impl Declarations {
    pub fn uniform(protocol: ProtocolKind) -> Self {
        Self {
            segments: SegmentId::ALL.into_iter().map(|s| (s, protocol)).collect(),
            ..Self::default()
        }
    }

    pub fn protocol(&self, segment: SegmentId) -> ProtocolKind {
        self.segments.get(&segment).copied().unwrap_or(ProtocolKind::Naive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryEntry {
    pub protocol: ProtocolKind,
    pub trusted: bool,
    pub anti_replay: bool,
    #[serde(default)]
    pub description: String,
}

/// Known protocols and whether each counts as a safe link protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolRegistry {
    pub protocols: Vec<RegistryEntry>,
}

impl ProtocolRegistry {
    pub const BUILTIN_JSON: &'static str = include_str!("../data/protocol_registry.json");

    pub fn builtin() -> Self {
        serde_json::from_str(Self::BUILTIN_JSON).expect("bundled registry parses")
    }

    pub fn get(&self, protocol: ProtocolKind) -> Option<&RegistryEntry> {
        self.protocols.iter().find(|e| e.protocol == protocol)
    }
}

impl Default for ProtocolRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::NotApplicable => "N/A",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecklistItem {
    pub id: String,
    pub text: String,
    pub verdict: Verdict,
}

/// Static shape of one checklist row.
struct ItemDef {
    id: &'static str,
    parent: Option<usize>,
    /// Capability rows ask whether a feature exists; a "no" makes the row
    /// and its children not applicable rather than failed.
    capability: bool,
    text: &'static str,
}

const ITEMS: [ItemDef; 7] = [
    ItemDef { id: "1", parent: None, capability: false, text: "Certified (KCMVP) crypto module installed" },
    ItemDef { id: "1.1", parent: Some(0), capability: true, text: "Module provides symmetric encryption" },
    ItemDef { id: "1.1.1", parent: Some(1), capability: false, text: "Symmetric mode resists ciphertext replay" },
    ItemDef { id: "1.2", parent: Some(0), capability: true, text: "Module provides public-key encryption" },
    ItemDef { id: "1.2.1", parent: Some(3), capability: false, text: "Public-key encryption is randomized" },
    ItemDef { id: "2", parent: None, capability: false, text: "Trusted link protocol in use" },
    ItemDef { id: "2.1", parent: Some(5), capability: false, text: "Protocol includes anti-replay logic" },
];

pub const CHECKLIST_LEN: usize = ITEMS.len();

/// Applies parent gating to raw predicate outcomes, in checklist order.
pub fn gate_verdicts(raw: [bool; CHECKLIST_LEN]) -> [Verdict; CHECKLIST_LEN] {
    let mut out = [Verdict::NotApplicable; CHECKLIST_LEN];
    for (i, item) in ITEMS.iter().enumerate() {
        let parent_ok = item.parent.is_none_or(|p| out[p] == Verdict::Pass);
        out[i] = match (parent_ok, raw[i], item.capability) {
            (false, _, _) => Verdict::NotApplicable,
            (true, true, _) => Verdict::Pass,
            (true, false, true) => Verdict::NotApplicable,
            (true, false, false) => Verdict::Fail,
        };
    }
    out
}

pub fn checklist_ids() -> impl Iterator<Item = &'static str> {
    ITEMS.iter().map(|i| i.id)
}

fn cipher_configs(topology: &SystemTopology) -> impl Iterator<Item = &CipherConfig> {
    topology.segments().iter().flat_map(|s| [&s.crypto_tx, &s.crypto_rx])
}

fn all_probes_randomized(configs: &[&CipherConfig]) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    configs.iter().all(|cfg| {
        probe_determinism(cfg, PROBE_TRIALS, &mut rng).expect("probe trials >= 2") == Determinism::Randomized
    })
}

pub fn run_checklist(
    topology: &SystemTopology,
    declarations: &Declarations,
    registry: &ProtocolRegistry,
) -> Vec<ChecklistItem> {
    let encrypted: Vec<&CipherConfig> = cipher_configs(topology)
        .filter(|c| c.mode != CipherMode::None)
        .collect();
    let probes_randomized = all_probes_randomized(&encrypted);
    let segments = topology.segments();
    let protocols: Vec<_> = segments
        .iter()
        .map(|s| registry.get(declarations.protocol(s.id)))
        .collect();

    let raw = [
        cipher_configs(topology).any(|c| c.kcmvp_certified),
        !encrypted.is_empty(),
        encrypted.iter().all(|c| c.mode.replay_safe()) && probes_randomized,
        declarations.asymmetric_encryption,
        declarations.randomized_asymmetric && probes_randomized,
        !protocols.is_empty() && protocols.iter().all(|e| e.is_some_and(|e| e.trusted)),
        !protocols.is_empty() && protocols.iter().all(|e| e.is_some_and(|e| e.anti_replay)),
    ];
    ITEMS
        .iter()
        .zip(gate_verdicts(raw))
        .map(|(def, verdict)| ChecklistItem {
            id: def.id.to_owned(),
            text: def.text.to_owned(),
            verdict,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    High,
}

/// A segment direction whose traffic goes out exactly as it came in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageFinding {
    pub segment: SegmentId,
    pub direction: Direction,
    pub severity: Severity,
}

pub fn coverage_check(topology: &SystemTopology) -> Vec<CoverageFinding> {
    topology
        .segments()
        .iter()
        .flat_map(|s| [(s.id, Direction::Tx, s.crypto_tx.mode), (s.id, Direction::Rx, s.crypto_rx.mode)])
        .filter(|&(_, _, mode)| mode == CipherMode::None)
        .map(|(segment, direction, _)| CoverageFinding { segment, direction, severity: Severity::High })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Grade {
    Low,
    Medium,
    High,
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Self::Low => "Low",
            Self::Medium => "Medium",
            Self::High => "High",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CipherSuite {
    pub mode: CipherMode,
    pub protocol: ProtocolKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyTier {
    pub segment: SegmentId,
    pub data_value: Grade,
    pub required_strength: Grade,
    pub recommended_suite: CipherSuite,
    /// Human-readable value band, e.g. "Medium~Low" where one grade was chosen from a range.
    pub value_band: String,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Grade of the most valuable data kind a segment carries. Collected sensor
/// data outranks everything; sensor control sits in the medium-to-low band.
fn data_value(kinds: &std::collections::BTreeSet<DataKind>) -> (Grade, &'static str) {
    if kinds.contains(&DataKind::SensorCollect) {
        (Grade::High, "High")
    } else if kinds.contains(&DataKind::SensorControl) {
        (Grade::Medium, "Medium~Low")
    } else {
        (Grade::Low, "Low")
    }
}

pub fn suite_for(strength: Grade) -> CipherSuite {
    let mode = match strength {
        Grade::High | Grade::Medium => CipherMode::Gcm,
        Grade::Low => CipherMode::Ctr,
    };
    CipherSuite { mode, protocol: ProtocolKind::Hardened }
}

pub fn recommend_policy(topology: &SystemTopology) -> Vec<PolicyTier> {
    topology
        .segments()
        .iter()
        .map(|s| {
            let (value, band) = data_value(&s.data_kinds);
            let suite = suite_for(value);
            let mut notes = Vec::new();
            if value == Grade::Medium {
                notes.push("range collapsed to Medium; key-rotation interval may be relaxed".to_owned());
            }
            if !suite.mode.is_authenticated() {
                notes.push(format!("{} provides no integrity; pair with a MAC", suite.mode));
            }
            PolicyTier {
                segment: s.id,
                data_value: value,
                required_strength: value,
                recommended_suite: suite,
                value_band: band.to_owned(),
                notes,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditReport {
    pub checklist: Vec<ChecklistItem>,
    pub coverage: Vec<CoverageFinding>,
    pub policy: Vec<PolicyTier>,
    pub compliant: bool,
    /// Segments using a replay-safe mode without integrity (CBC, CTR).
    #[serde(default)]
    pub unauthenticated_segments: Vec<SegmentId>,
}

impl AuditReport {
    pub fn item(&self, id: &str) -> Option<Verdict> {
        self.checklist.iter().find(|i| i.id == id).map(|i| i.verdict)
    }

    /// Segments with at least one coverage finding, in order.
    pub fn flagged_segments(&self) -> Vec<SegmentId> {
        let mut out: Vec<_> = self.coverage.iter().map(|f| f.segment).collect();
        out.dedup();
        out
    }

    /// `compliant`, and additionally no segment relies on an unauthenticated mode.
    pub fn compliant_strict(&self) -> bool {
        self.compliant && self.unauthenticated_segments.is_empty()
    }

    /// Fixed-width table: checklist, then coverage and policy sections.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<7} {:<45} RESULT", "ITEM", "CHECK");
        for item in &self.checklist {
            let depth = item.id.matches('.').count();
            let text = format!("{}{}", "  ".repeat(depth), item.text);
            let _ = writeln!(s, "{:<7} {:<45} {}", item.id, text, item.verdict);
        }
        let _ = writeln!(s);
        if self.coverage.is_empty() {
            let _ = writeln!(s, "coverage: every segment encrypted in both directions");
        } else {
            for f in &self.coverage {
                let _ = writeln!(
                    s,
                    "coverage: segment {} {} {:?} unencrypted (severity {:?})",
                    f.segment.label(),
                    f.segment,
                    f.direction,
                    f.severity
                );
            }
        }
        for seg in &self.unauthenticated_segments {
            let _ = writeln!(s, "integrity: segment {} {} has no authentication", seg.label(), seg);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<8} {:<11} {:<9} SUITE", "SEGMENT", "VALUE", "STRENGTH");
        for t in &self.policy {
            let _ = writeln!(
                s,
                "{:<8} {:<11} {:<9} {}+{:?}",
                format!("{} {}", t.segment.label(), t.segment),
                t.value_band,
                t.required_strength,
                t.recommended_suite.mode,
                t.recommended_suite.protocol
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "compliant: {}", if self.compliant { "YES" } else { "NO" });
        s
    }
}

pub fn full_audit(
    topology: &SystemTopology,
    declarations: &Declarations,
    registry: &ProtocolRegistry,
) -> AuditReport {
    let checklist = run_checklist(topology, declarations, registry);
    let coverage = coverage_check(topology);
    let policy = recommend_policy(topology);
    let top_level_pass = ["1", "2"]
        .iter()
        .all(|id| checklist.iter().any(|i| i.id == *id && i.verdict == Verdict::Pass));
    let children_pass = checklist.iter().all(|i| i.verdict != Verdict::Fail);
    let unauthenticated_segments = topology
        .segments()
        .iter()
        .filter(|s| {
            [s.crypto_tx.mode, s.crypto_rx.mode]
                .iter()
                .any(|m| m.replay_safe() && !m.is_authenticated())
        })
        .map(|s| s.id)
        .collect();
    AuditReport {
        compliant: coverage.is_empty() && top_level_pass && children_pass,
        checklist,
        coverage,
        policy,
        unauthenticated_segments,
    }
}
