//! Built-in configurations for the reference deployments.

use std::collections::BTreeMap;

use crate::audit::Declarations;
use crate::cipher::{CipherConfig, CipherMode, Key128};
use crate::config::{ConfigDocument, ScenarioSection, SegmentEntry, TopologySection};
use crate::link::ProtocolKind;
use crate::model::{ComponentKind, Segment, SegmentId};
use crate::sim::{AdversaryPlan, Traffic};

pub const NAMES: [&str; 4] = ["default", "fig2", "fig3", "fig4"];

const RELAY_KEY: Key128 = Key128([
    0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6, 0xab, 0xf7, 0x15, 0x88, 0x09, 0xcf, 0x4f, 0x3c,
]);
const CONTROLLER_KEY: Key128 = Key128([
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f,
]);

pub fn by_name(name: &str) -> Option<ConfigDocument> {
    match name {
        "default" => Some(default()),
        "fig2" => Some(fig2()),
        "fig3" => Some(fig3()),
        "fig4" => Some(fig4()),
        "empty" => Some(empty()),
        _ => None,
    }
}

/// Builds a document over the full topology, naming each segment's cipher.
fn document(
    name: &str,
    seed: u64,
    ciphers: &[(&str, CipherConfig)],
    per_segment: [&str; 3],
    protocols: Declarations,
    adversary: AdversaryPlan,
) -> ConfigDocument {
    let segments = SegmentId::ALL
        .into_iter()
        .zip(per_segment)
        .map(|(id, cipher)| {
            let base = Segment::default_for(id);
            SegmentEntry {
                id,
                distance_class: base.distance_class,
                data_kinds: base.data_kinds,
                link_method: base.link_method,
                cipher_tx: cipher.into(),
                cipher_rx: cipher.into(),
            }
        })
        .collect();
    ConfigDocument {
        topology: TopologySection {
            components: ComponentKind::ALL.to_vec(),
            segments,
        },
        ciphers: ciphers.iter().map(|(n, c)| (n.to_string(), *c)).collect::<BTreeMap<_, _>>(),
        protocols,
        scenario: ScenarioSection {
            name: name.into(),
            link: SegmentId::S3,
            ticks: 1000,
            seed,
            traffic: Traffic::Uniform,
        },
        adversary,
    }
}

/// Unprotected links and a passive listener.
pub fn default() -> ConfigDocument {
    document(
        "default",
        1,
        &[("plain", CipherConfig::plaintext())],
        ["plain"; 3],
        Declarations::uniform(ProtocolKind::Naive),
        AdversaryPlan::PassiveOnly,
    )
}

/// Certified deterministic encryption with no freshness check.
pub fn fig2() -> ConfigDocument {
    let ecb = CipherConfig::new(CipherMode::Ecb, RELAY_KEY).certified(true);
    document(
        "fig2",
        7,
        &[("ecb", ecb)],
        ["ecb"; 3],
        Declarations::uniform(ProtocolKind::Naive),
        AdversaryPlan::ReplayAfter { captures: 10, injections: 100 },
    )
}

/// Relay path hardened, controller link left in the clear.
pub fn fig3() -> ConfigDocument {
    let gcm = CipherConfig::new(CipherMode::Gcm, RELAY_KEY).certified(true);
    let mut protocols = Declarations::uniform(ProtocolKind::Hardened);
    protocols.segments.insert(SegmentId::S3, ProtocolKind::Naive);
    document(
        "fig3",
        7,
        &[("relay", gcm), ("plain", CipherConfig::plaintext())],
        ["relay", "relay", "plain"],
        protocols,
        AdversaryPlan::ReplayAfter { captures: 10, injections: 100 },
    )
}

/// Every segment authenticated and replay-protected.
pub fn fig4() -> ConfigDocument {
    let relay = CipherConfig::new(CipherMode::Gcm, RELAY_KEY).certified(true);
    let controller = CipherConfig::new(CipherMode::Gcm, CONTROLLER_KEY).certified(true);
    document(
        "fig4",
        7,
        &[("relay", relay), ("controller", controller)],
        ["relay", "relay", "controller"],
        Declarations::uniform(ProtocolKind::Hardened),
        AdversaryPlan::ReplayAfter { captures: 10, injections: 100 },
    )
}

/// No components, no segments.
pub fn empty() -> ConfigDocument {
    ConfigDocument {
        scenario: ScenarioSection {
            name: "empty".into(),
            ..ScenarioSection::default()
        },
        ..ConfigDocument::default()
    }
}
