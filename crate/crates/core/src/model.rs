//! Drone system topology, wireless segments and the link-method catalog.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::CipherConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("segment {segment} needs component {missing:?}, which is not in the topology")]
    MissingEndpoint { segment: SegmentId, missing: ComponentKind },
    #[error("segment {0} appears more than once")]
    DuplicateSegment(SegmentId),
    #[error("relay segments S1 and S2 must carry the same data kinds")]
    RelayAsymmetry,
    #[error("invalid selection query: {0}")]
    InvalidQuery(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    MissionPlanner,
    RelayUnit,
    RemoteController,
    Vehicle,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 4] = [
        Self::MissionPlanner,
        Self::RelayUnit,
        Self::RemoteController,
        Self::Vehicle,
    ];
}

/// One of the three wireless segments. The wire code is used in frame headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentId {
    /// Mission planner to relay unit.
    S1,
    /// Relay unit to vehicle.
    S2,
    /// Remote controller to vehicle.
    S3,
}

impl SegmentId {
    pub const ALL: [SegmentId; 3] = [Self::S1, Self::S2, Self::S3];

    /// `(from, to)`; the transmit direction runs from the first to the second.
    pub fn endpoints(self) -> (ComponentKind, ComponentKind) {
        use ComponentKind::*;
        match self {
            Self::S1 => (MissionPlanner, RelayUnit),
            Self::S2 => (RelayUnit, Vehicle),
            Self::S3 => (RemoteController, Vehicle),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::S1 => 1,
            Self::S2 => 2,
            Self::S3 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }

    /// Circled-number label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Self::S1 => "①",
            Self::S2 => "②",
            Self::S3 => "③",
        }
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceClass {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataKind {
    /// Position, altitude and heading of the vehicle.
    FlightState,
    /// Imagery, signals and target data gathered by mission sensors.
    SensorCollect,
    /// Control and status of mission sensors.
    SensorControl,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkMethodId(pub String);

impl LinkMethodId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkMethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub id: SegmentId,
    pub distance_class: DistanceClass,
    pub data_kinds: BTreeSet<DataKind>,
    pub crypto_tx: CipherConfig,
    pub crypto_rx: CipherConfig,
    pub link_method: LinkMethodId,
}

impl Segment {
    /// Plaintext segment with the default attributes for `id`.
    pub fn default_for(id: SegmentId) -> Self {
        use DataKind::*;
        let (distance_class, data_kinds, method) = match id {
            SegmentId::S1 => (DistanceClass::Short, vec![FlightState, SensorCollect], "Wi-Fi"),
            SegmentId::S2 => (DistanceClass::Long, vec![FlightState, SensorCollect], "LTE-U"),
            SegmentId::S3 => (DistanceClass::Long, vec![FlightState, SensorControl], "AnalogRF"),
        };
        Self {
            id,
            distance_class,
            data_kinds: data_kinds.into_iter().collect(),
            crypto_tx: CipherConfig::plaintext(),
            crypto_rx: CipherConfig::plaintext(),
            link_method: LinkMethodId::new(method),
        }
    }

    pub fn with_crypto(mut self, cfg: CipherConfig) -> Self {
        self.crypto_tx = cfg;
        self.crypto_rx = cfg;
        self
    }
}

/// Validated set of components and the wireless segments between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemTopology {
    components: BTreeSet<ComponentKind>,
    segments: Vec<Segment>,
}

impl SystemTopology {
    pub fn new(
        components: impl IntoIterator<Item = ComponentKind>,
        segments: Vec<Segment>,
    ) -> Result<Self, ModelError> {
        let components: BTreeSet<_> = components.into_iter().collect();
        let mut seen = BTreeSet::new();
        for seg in &segments {
            if !seen.insert(seg.id) {
                return Err(ModelError::DuplicateSegment(seg.id));
            }
            let (a, b) = seg.id.endpoints();
            for end in [a, b] {
                if !components.contains(&end) {
                    return Err(ModelError::MissingEndpoint { segment: seg.id, missing: end });
                }
            }
        }
        let kinds = |id| segments.iter().find(|s| s.id == id).map(|s| &s.data_kinds);
        if let (Some(k1), Some(k2)) = (kinds(SegmentId::S1), kinds(SegmentId::S2)) {
            if k1 != k2 {
                return Err(ModelError::RelayAsymmetry);
            }
        }
        Ok(Self { components, segments })
    }

    pub fn empty() -> Self {
        Self { components: BTreeSet::new(), segments: Vec::new() }
    }

    pub fn components(&self) -> &BTreeSet<ComponentKind> {
        &self.components
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Returns a copy with both directions of `id` set to `cfg`.
    pub fn with_segment_crypto(mut self, id: SegmentId, cfg: CipherConfig) -> Self {
        if let Some(seg) = self.segments.iter_mut().find(|s| s.id == id) {
            seg.crypto_tx = cfg;
            seg.crypto_rx = cfg;
        }
        self
    }

    pub fn with_all_crypto(self, cfg: CipherConfig) -> Self {
        SegmentId::ALL
            .into_iter()
            .fold(self, |t, id| t.with_segment_crypto(id, cfg))
    }
}

/// Four components, three plaintext segments.
pub fn default_topology() -> SystemTopology {
    SystemTopology::new(
        ComponentKind::ALL,
        SegmentId::ALL.into_iter().map(Segment::default_for).collect(),
    )
    .expect("default topology is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SecurityLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Latency {
    Millis(f64),
    /// Listed as insensitive to latency; no number.
    Insensitive,
    /// Listed as low latency; no number.
    LowLatency,
}

impl Latency {
    pub fn millis(self) -> Option<f64> {
        match self {
            Self::Millis(ms) => Some(ms),
            _ => None,
        }
    }
}

/// Communication range in meters. `max_m == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeInterval {
    pub min_m: f64,
    pub max_m: Option<f64>,
}

impl RangeInterval {
    pub fn bounded(min_m: f64, max_m: f64) -> Self {
        Self { min_m, max_m: Some(max_m) }
    }

    pub fn at_least(min_m: f64) -> Self {
        Self { min_m, max_m: None }
    }

    pub fn reaches(&self, distance_m: f64) -> bool {
        self.max_m.is_none_or(|max| max >= distance_m)
    }

    pub fn is_valid(&self) -> bool {
        self.min_m >= 0.0 && self.max_m.is_none_or(|max| self.min_m <= max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    pub id: LinkMethodId,
    pub range: RangeInterval,
    /// Transmit power draw; `None` where no figure exists.
    pub energy_mw: Option<f64>,
    /// Peak data rate (top of the listed range).
    pub rate_bps: Option<f64>,
    pub security_level: SecurityLevel,
    pub latency: Latency,
    /// Projected rather than measured figures.
    #[serde(default)]
    pub provisional: bool,
}

/// The nine surveyed link methods plus generic analog RF.
pub fn catalog() -> Vec<LinkProfile> {
    use Latency::*;
    use SecurityLevel::*;
    let row = |id: &str, range, energy: Option<f64>, rate: Option<f64>, sec, latency| LinkProfile {
        id: LinkMethodId::new(id),
        range,
        energy_mw: energy,
        rate_bps: rate,
        security_level: sec,
        latency,
        provisional: false,
    };
    let km = 1000.0;
    let mut rows = vec![
        row("Wi-Fi", RangeInterval::bounded(50.0, 250.0), Some(835.0), Some(200e6), Medium, Millis(50.0)),
        row("Wimax", RangeInterval::bounded(0.0, 5.0 * km), Some(3200.0), Some(1e9), High, Millis(40.0)),
        row("LTE-U", RangeInterval::bounded(2.0 * km, 5.0 * km), Some(1000.0), Some(1e9), High, Millis(9.0)),
        row("Zigbee", RangeInterval::bounded(0.0, 500.0), Some(36.9), Some(250e3), High, Millis(20.0)),
        row("Bluetooth", RangeInterval::bounded(0.0, 10.0), Some(215.0), Some(3e6), Medium, Millis(100.0)),
        row("Ingenu", RangeInterval::at_least(2.0 * km), Some(160.0), Some(600e3), High, Insensitive),
        row("Lora", RangeInterval::at_least(2.0 * km), Some(100.0), Some(100.0), High, LowLatency),
        row("SigFox", RangeInterval::bounded(0.0, 2.0 * km), Some(100.0), Some(50e3), Low, Insensitive),
        row("5G", RangeInterval::bounded(0.0, 50.0 * km), None, Some(50e9), Medium, Millis(1.0)),
        // Generic unencrypted analog RF (900 MHz - 5.8 GHz hobby links); no figures listed.
        row("AnalogRF", RangeInterval::at_least(0.0), None, None, Low, Insensitive),
    ];
    rows[8].provisional = true;
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectQuery {
    pub required_range_m: f64,
    pub min_rate_bps: f64,
    pub min_security: SecurityLevel,
    pub include_provisional: bool,
}

impl SelectQuery {
    pub fn new(required_range_m: f64, min_rate_bps: f64, min_security: SecurityLevel) -> Self {
        Self {
            required_range_m,
            min_rate_bps,
            min_security,
            include_provisional: false,
        }
    }
}

/// Filters `profiles` by range, rate and security, then ranks by ascending
/// energy, descending rate and finally id. Rows without an energy or rate
/// figure never qualify, nor do provisional rows unless asked for.
pub fn select_method(profiles: &[LinkProfile], query: &SelectQuery) -> Result<Vec<LinkMethodId>, ModelError> {
    if query.required_range_m.is_nan() || query.required_range_m <= 0.0 {
        return Err(ModelError::InvalidQuery("required range must be positive".into()));
    }
    if query.min_rate_bps.is_nan() || query.min_rate_bps < 0.0 {
        return Err(ModelError::InvalidQuery("minimum rate must be non-negative".into()));
    }
    let mut hits: Vec<(&LinkProfile, f64, f64)> = profiles
        .iter()
        .filter(|p| query.include_provisional || !p.provisional)
        .filter_map(|p| Some((p, p.energy_mw?, p.rate_bps?)))
        .filter(|(p, _, rate)| {
            p.range.reaches(query.required_range_m)
                && *rate >= query.min_rate_bps
                && p.security_level >= query.min_security
        })
        .collect();
    hits.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(b.2.total_cmp(&a.2))
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    Ok(hits.into_iter().map(|(p, _, _)| p.id.clone()).collect())
}
