//! Deterministic scenario runner.
//!
//! A run is a pure function of its [`Scenario`]. All randomness flows from one
//! `ChaCha8Rng` seeded with `ChaCha8Rng::seed_from_u64(scenario.seed)` (the
//! `rand_core` PCG32 seed expansion). Per tick, in order:
//!
//! 1. draw a command from the traffic distribution;
//! 2. the sender encrypts it (nonce bytes come from the same RNG);
//! 3. under `CodebookThenPredict`, if the codebook is complete, the adversary
//!    predicts the command from the frame bytes;
//! 4. the receiver processes the frame and the vehicle moves;
//! 5. the adversary records `(frame, movement)`;
//! 6. under `ReplayAfter`, once enough captures exist and injections remain,
//!    one capture is chosen uniformly among the most recent `captures` and
//!    re-delivered.
//!
//! Integer draws in `[0, n)` use rejection sampling on `next_u64`: draw until
//! the value is below `n * floor(2^64 / n)`, then reduce modulo `n`.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{deliver, AdversaryState, AttackOutcome, Observation, RejectReason};
use crate::link::{Command, LinkEndpoint, LinkError, ProtocolKind};
use crate::model::{SegmentId, SystemTopology};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario {scenario:?}: {reason}")]
    Config { scenario: String, reason: String },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "plan", try_from = "PlanRepr")]
pub enum AdversaryPlan {
    #[default]
    PassiveOnly,
    /// After `captures` frames have been captured, replay one of the latest
    /// `captures` frames per tick until `injections` replays are spent.
    ReplayAfter { captures: u32, injections: u32 },
    CodebookThenPredict,
}

/// Flat wire form so stray keys are rejected for every variant.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRepr {
    plan: String,
    captures: Option<u32>,
    injections: Option<u32>,
}

impl TryFrom<PlanRepr> for AdversaryPlan {
    type Error = String;

    fn try_from(r: PlanRepr) -> Result<Self, String> {
        match (r.plan.as_str(), r.captures, r.injections) {
            ("PassiveOnly", None, None) => Ok(Self::PassiveOnly),
            ("CodebookThenPredict", None, None) => Ok(Self::CodebookThenPredict),
            ("ReplayAfter", Some(captures), Some(injections)) => Ok(Self::ReplayAfter { captures, injections }),
            ("ReplayAfter", ..) => Err("ReplayAfter needs captures and injections".into()),
            ("PassiveOnly" | "CodebookThenPredict", ..) => Err(format!("{} takes no parameters", r.plan)),
            (other, ..) => Err(format!("unknown plan {other:?}")),
        }
    }
}

/// Command distribution. Weights are integers so sampling is exact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traffic {
    #[default]
    Uniform,
    Weighted(BTreeMap<Command, u32>),
}

impl Traffic {
    fn validate(&self) -> Result<(), String> {
        match self {
            Self::Uniform => Ok(()),
            Self::Weighted(w) if w.values().map(|&x| u64::from(x)).sum::<u64>() == 0 => {
                Err("weighted traffic needs a positive total weight".into())
            }
            Self::Weighted(_) => Ok(()),
        }
    }

    fn sample<R: RngCore>(&self, rng: &mut R) -> Command {
        match self {
            Self::Uniform => Command::ALL[uniform_below(rng, Command::ALL.len() as u64) as usize],
            Self::Weighted(weights) => {
                let total: u64 = weights.values().map(|&w| u64::from(w)).sum();
                let mut r = uniform_below(rng, total);
                for (&cmd, &w) in weights {
                    if r < u64::from(w) {
                        return cmd;
                    }
                    r -= u64::from(w);
                }
                unreachable!("r < total")
            }
        }
    }
}

/// Uniform integer in `[0, n)`; see the module docs for the exact procedure.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "empty range");
    let limit = n * (u64::MAX / n);
    loop {
        let x = rng.next_u64();
        if x < limit {
            return x % n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub topology: SystemTopology,
    /// Segment carrying the command traffic; both ends use its `crypto_tx`.
    pub link: SegmentId,
    pub protocol: ProtocolKind,
    pub traffic: Traffic,
    pub ticks: u64,
    pub plan: AdversaryPlan,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.endpoints().map(|_| ())
    }

    fn config_error(&self, reason: impl Into<String>) -> SimError {
        SimError::Config { scenario: self.name.clone(), reason: reason.into() }
    }

    fn endpoints(&self) -> Result<(LinkEndpoint, LinkEndpoint), SimError> {
        let seg = self
            .topology
            .segment(self.link)
            .ok_or_else(|| self.config_error(format!("link segment {} is not in the topology", self.link)))?;
        self.traffic.validate().map_err(|e| self.config_error(e))?;
        if let AdversaryPlan::ReplayAfter { captures: 0, .. } = self.plan {
            return Err(self.config_error("ReplayAfter needs at least one capture"));
        }
        let make = || {
            LinkEndpoint::new(self.protocol, self.link, seg.crypto_tx)
                .map_err(|e| self.config_error(format!("{e}")))
        };
        Ok((make()?, make()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Send,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub tick: u64,
    pub kind: EventKind,
    /// Hex-encoded frame as it went over the air.
    pub frame: String,
    pub outcome: AttackOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    /// SHA-256 of the JSONL encoding, hex.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub frames_sent: u64,
    pub frames_delivered: u64,
    pub frames_accepted: u64,
    pub replays_attempted: u64,
    pub replays_executed: u64,
    pub replay_success_rate: Option<f64>,
    /// Tick (1-based) at which the codebook first covered every command.
    pub codebook_completion_tick: Option<u64>,
    pub predictions: u64,
    pub correct_predictions: u64,
    pub prediction_accuracy: Option<f64>,
    pub inconsistent_observations: u64,
    pub rejection_histogram: BTreeMap<RejectReason, u64>,
}

impl Metrics {
    fn finish(&mut self) {
        self.replay_success_rate =
            (self.replays_attempted > 0).then(|| self.replays_executed as f64 / self.replays_attempted as f64);
        self.prediction_accuracy =
            (self.predictions > 0).then(|| self.correct_predictions as f64 / self.predictions as f64);
    }

    fn record(&mut self, outcome: AttackOutcome) {
        self.frames_delivered += 1;
        match outcome {
            AttackOutcome::Executed(_) => self.frames_accepted += 1,
            AttackOutcome::Rejected(r) => *self.rejection_histogram.entry(r).or_default() += 1,
        }
    }

    pub fn rejections(&self) -> u64 {
        self.rejection_histogram.values().sum()
    }

    /// Named scalar views used for batch aggregation; absent values are skipped.
    pub fn scalars(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("frames_sent", Some(self.frames_sent as f64)),
            ("frames_accepted", Some(self.frames_accepted as f64)),
            ("replays_attempted", Some(self.replays_attempted as f64)),
            ("replays_executed", Some(self.replays_executed as f64)),
            ("replay_success_rate", self.replay_success_rate),
            ("codebook_completion_tick", self.codebook_completion_tick.map(|t| t as f64)),
            ("prediction_accuracy", self.prediction_accuracy),
            ("rejections", Some(self.rejections() as f64)),
        ]
    }
}

pub fn run(scenario: &Scenario) -> Result<(Transcript, Metrics), SimError> {
    simulate(scenario, true)
}

/// Metrics only; skips building the transcript.
pub fn run_metrics(scenario: &Scenario) -> Result<Metrics, SimError> {
    simulate(scenario, false).map(|(_, m)| m)
}

fn simulate(scenario: &Scenario, record: bool) -> Result<(Transcript, Metrics), SimError> {
    let (mut tx, mut rx) = scenario.endpoints()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut adv = AdversaryState::new();
    let mut transcript = Transcript::default();
    let mut m = Metrics::default();
    let mut injections_left = match scenario.plan {
        AdversaryPlan::ReplayAfter { injections, .. } => injections,
        _ => 0,
    };

    for tick in 1..=scenario.ticks {
        let cmd = scenario.traffic.sample(&mut rng);
        let bytes = tx.send(cmd, &mut rng)?.encode().expect("command frames fit the length field");
        m.frames_sent += 1;

        if scenario.plan == AdversaryPlan::CodebookThenPredict && adv.codebook().complete() {
            m.predictions += 1;
            if adv.predict(&bytes) == Some(cmd) {
                m.correct_predictions += 1;
            }
        }

        let outcome = deliver(&mut rx, &bytes);
        m.record(outcome);
        if let AttackOutcome::Executed(movement) = outcome {
            let obs = Observation { tick, frame_bytes: bytes.clone(), movement };
            if adv.observe(obs).is_err() {
                m.inconsistent_observations += 1;
            }
        }
        if m.codebook_completion_tick.is_none() && adv.codebook().complete() {
            m.codebook_completion_tick = Some(tick);
        }
        if record {
            transcript.records.push(TranscriptRecord {
                tick,
                kind: EventKind::Send,
                frame: hex::encode(&bytes),
                outcome,
            });
        }

        if let AdversaryPlan::ReplayAfter { captures, .. } = scenario.plan {
            let have = adv.captures().len() as u64;
            if injections_left > 0 && have >= u64::from(captures) {
                let back = uniform_below(&mut rng, u64::from(captures));
                let pick = (have - 1 - back) as usize;
                let outcome = adv.replay(&mut rx, pick).expect("pick within captures");
                injections_left -= 1;
                m.replays_attempted += 1;
                if matches!(outcome, AttackOutcome::Executed(_)) {
                    m.replays_executed += 1;
                }
                m.record(outcome);
                if record {
                    transcript.records.push(TranscriptRecord {
                        tick,
                        kind: EventKind::Replay,
                        frame: hex::encode(&adv.captures()[pick].frame_bytes),
                        outcome,
                    });
                }
            }
        }
    }
    m.finish();
    Ok((transcript, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    /// Runs in which the metric was present.
    pub count: u64,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub stddev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchStats {
    pub scenario: String,
    pub repetitions: u64,
    pub base_seed: u64,
    pub metrics: BTreeMap<String, Summary>,
}

/// Seed of repetition `i`: `base ^ i`.
pub fn derived_seed(base: u64, i: u64) -> u64 {
    base ^ i
}

/// Runs every scenario `repetitions` times with derived seeds. Runs fan out
/// across threads; aggregation is in repetition order, so results do not
/// depend on scheduling.
pub fn run_batch(scenarios: &[Scenario], repetitions: u64) -> Result<Vec<BatchStats>, SimError> {
    if repetitions == 0 {
        return Err(SimError::Config {
            scenario: String::new(),
            reason: "repetitions must be at least 1".into(),
        });
    }
    scenarios
        .iter()
        .map(|sc| {
            sc.validate()?;
            let metrics: Vec<Metrics> = (0..repetitions)
                .into_par_iter()
                .map(|i| {
                    let mut s = sc.clone();
                    s.seed = derived_seed(sc.seed, i);
                    run_metrics(&s)
                })
                .collect::<Result<_, _>>()?;
            Ok(BatchStats {
                scenario: sc.name.clone(),
                repetitions,
                base_seed: sc.seed,
                metrics: aggregate(&metrics),
            })
        })
        .collect()
}

fn aggregate(runs: &[Metrics]) -> BTreeMap<String, Summary> {
    let mut columns: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for m in runs {
        for (name, value) in m.scalars() {
            let col = columns.entry(name).or_default();
            col.extend(value);
        }
    }
    columns
        .into_iter()
        .map(|(name, xs)| {
            let n = xs.len() as f64;
            let (mean, stddev) = if xs.is_empty() {
                (None, None)
            } else {
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            };
            (name.to_owned(), Summary { count: xs.len() as u64, mean, stddev })
        })
        .collect()
}
