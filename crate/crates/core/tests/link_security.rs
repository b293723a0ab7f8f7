use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavsec::adversary::AdversaryState;
use uavsec::link::{Delivery, Rejection};
use uavsec::sim::{run, AdversaryPlan};
use uavsec::{presets, CipherConfig, CipherMode, Command, Frame, Key128, LinkEndpoint, Observation, SegmentId};

fn gcm_pair() -> (LinkEndpoint, LinkEndpoint) {
    let cfg = CipherConfig::new(CipherMode::Gcm, Key128([0x5a; 16]));
    (
        LinkEndpoint::hardened(SegmentId::S3, cfg).unwrap(),
        LinkEndpoint::hardened(SegmentId::S3, cfg).unwrap(),
    )
}

#[test]
fn random_tags_never_verify() {
    let (mut tx, mut rx) = gcm_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf0f0);
    let Frame::Hardened { segment, seq, nonce, body, .. } = tx.send(Command::Up, &mut rng).unwrap() else {
        unreachable!()
    };
    let before = *rx.window();
    for _ in 0..100_000 {
        let forged = Frame::Hardened { segment, seq, nonce, body: body.clone(), tag: rng.random() };
        assert_eq!(rx.receive(&forged).unwrap(), Delivery::Rejected(Rejection::AuthFailure));
    }
    assert_eq!(*rx.window(), before);
}

#[test]
fn header_is_authenticated() {
    let (mut tx, mut rx) = gcm_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frame = tx.send(Command::Left, &mut rng).unwrap();
    let Frame::Hardened { segment, nonce, ref body, tag, .. } = frame else { unreachable!() };
    let bumped = Frame::Hardened { segment, seq: 9, nonce, body: body.clone(), tag };
    assert_eq!(rx.receive(&bumped).unwrap(), Delivery::Rejected(Rejection::AuthFailure));
    assert_eq!(rx.receive(&frame).unwrap(), Delivery::Accepted(Command::Left));
}

#[test]
fn naive_frames_are_a_fixed_injection() {
    for mode in [CipherMode::None, CipherMode::Ecb] {
        let cfg = CipherConfig::new(mode, Key128([7; 16]));
        let mut tx = LinkEndpoint::naive(SegmentId::S3, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wire = |tx: &mut LinkEndpoint, rng: &mut ChaCha8Rng, c| tx.send(c, rng).unwrap().encode().unwrap();
        let first: Vec<Vec<u8>> = Command::ALL.iter().map(|&c| wire(&mut tx, &mut rng, c)).collect();
        let again: Vec<Vec<u8>> = Command::ALL.iter().map(|&c| wire(&mut tx, &mut rng, c)).collect();
        assert_eq!(first, again, "{mode}");
        assert_eq!(first.iter().collect::<BTreeSet<_>>().len(), Command::ALL.len(), "{mode}");
    }
}

#[test]
fn prediction_accuracy_depends_on_determinism() {
    for (name, mode, accurate) in [("ecb", CipherMode::Ecb, true), ("gcm", CipherMode::Gcm, false)] {
        let mut doc = presets::fig2();
        let cfg = CipherConfig::new(mode, Key128([1; 16]));
        doc.ciphers.values_mut().for_each(|c| *c = cfg);
        doc.adversary = AdversaryPlan::CodebookThenPredict;
        let (_, m) = run(&doc.scenario().unwrap()).unwrap();
        let acc = m.prediction_accuracy.unwrap_or(0.0);
        if accurate {
            assert_eq!(acc, 1.0, "{name}");
        } else {
            assert!(acc <= 1.0 / 8.0, "{name}: {acc}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any delivery schedule over captured hardened frames executes each
    /// sequence number at most once, and only frames that were really sent.
    #[test]
    fn hardened_at_most_once(schedule in prop::collection::vec(0usize..12, 1..60), seed in any::<u64>()) {
        let (mut tx, mut rx) = gcm_pair();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sent: Vec<Frame> = (0..12)
            .map(|i| tx.send(Command::ALL[i % 8], &mut rng).unwrap())
            .collect();
        let mut accepted = BTreeSet::new();
        for &i in &schedule {
            let before = *rx.window();
            match rx.receive(&sent[i]).unwrap() {
                Delivery::Accepted(cmd) => {
                    prop_assert_eq!(cmd, Command::ALL[i % 8]);
                    prop_assert!(accepted.insert(sent[i].seq().unwrap()));
                }
                Delivery::Rejected(_) => prop_assert_eq!(*rx.window(), before),
            }
        }
    }

    #[test]
    fn naive_replay_always_executes(picks in prop::collection::vec(0usize..20, 1..40), seed in any::<u64>()) {
        let cfg = CipherConfig::new(CipherMode::Ecb, Key128([9; 16]));
        let (mut tx, mut rx) = (LinkEndpoint::naive(SegmentId::S3, cfg), LinkEndpoint::naive(SegmentId::S3, cfg));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut adv = AdversaryState::new();
        for tick in 0..20u64 {
            let cmd = Command::ALL[rng.random_range(0..8)];
            let bytes = tx.send(cmd, &mut rng).unwrap().encode().unwrap();
            adv.observe(Observation { tick, frame_bytes: bytes, movement: cmd }).unwrap();
        }
        for pick in picks {
            let outcome = adv.replay(&mut rx, pick).unwrap();
            prop_assert_eq!(outcome, uavsec::AttackOutcome::Executed(adv.captures()[pick].movement));
        }
    }
}
