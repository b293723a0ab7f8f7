//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its own PASS/FAIL line.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uavsec::adversary::{coa_candidates, is_toy_command_block, kpa_key_search, toy_command_block, ToyCipher};
use uavsec::audit::{checklist_ids, coverage_check, full_audit, gate_verdicts, CHECKLIST_LEN};
use uavsec::cipher::{block_encrypt, probe_determinism, Determinism, NoncePolicy};
use uavsec::link::{ReplayWindow, WindowVerdict};
use uavsec::sim::{run, run_batch, AdversaryPlan};
use uavsec::{presets, CipherConfig, CipherMode, Command, Key128, ProtocolRegistry, RejectReason, Verdict};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("{what} took {took:?}, limit {limit:?}"))
}

fn replay_dichotomy() -> Outcome {
    let mut detail = Vec::new();
    for (name, expected) in [("fig2", 1.0), ("fig4", 0.0)] {
        let sc = presets::by_name(name).unwrap().scenario().map_err(|e| e.to_string())?;
        ensure(sc.ticks == 1000, || format!("{name}: ticks {}", sc.ticks))?;
        ensure(
            sc.plan == AdversaryPlan::ReplayAfter { captures: 10, injections: 100 },
            || format!("{name}: plan {:?}", sc.plan),
        )?;
        let start = Instant::now();
        let (_, m) = run(&sc).map_err(|e| e.to_string())?;
        within(Duration::from_secs(1), start, name)?;
        ensure(m.replays_attempted == 100, || format!("{name}: {} replays", m.replays_attempted))?;
        ensure(m.replay_success_rate == Some(expected), || {
            format!("{name}: success rate {:?}", m.replay_success_rate)
        })?;
        if name == "fig4" {
            let dup = m.rejection_histogram.get(&RejectReason::ReplayDuplicate).copied().unwrap_or(0);
            ensure(dup == m.rejections() && dup == 100, || format!("fig4 rejections {:?}", m.rejection_histogram))?;
        }
        detail.push(format!("{name}={expected}"));
    }
    Ok(detail.join(" "))
}

fn determinism_probe() -> Outcome {
    let key = Key128(*b"probe-key-000001");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases = [
        (CipherMode::None, Determinism::Deterministic),
        (CipherMode::Ecb, Determinism::Deterministic),
        (CipherMode::Cbc, Determinism::Randomized),
        (CipherMode::Ctr, Determinism::Randomized),
        (CipherMode::Gcm, Determinism::Randomized),
    ];
    for (mode, expected) in cases {
        let cfg = CipherConfig::new(mode, key).with_nonce_policy(NoncePolicy::RandomPerMessage);
        let got = probe_determinism(&cfg, 1000, &mut rng).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("{mode}: {got:?}"))?;
    }
    Ok("5/5 modes, 1000 trials".into())
}

/// Independent Monte Carlo: draws uniform commands until all eight appear.
fn coupon_monte_carlo(runs: u32, seed: u64) -> f64 {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let total: u64 = (0..runs)
        .map(|_| {
            let mut seen = 0u8;
            let mut draws = 0u64;
            while seen != u8::MAX {
                seen |= 1 << rng.random_range(0..8);
                draws += 1;
            }
            draws
        })
        .sum();
    total as f64 / f64::from(runs)
}

fn coupon_collector() -> Outcome {
    let closed_form = 8.0 * (1..=8).map(|k| 1.0 / f64::from(k)).sum::<f64>();
    ensure((closed_form - 21.742857).abs() < 1e-6, || format!("closed form {closed_form}"))?;
    let mc = coupon_monte_carlo(100_000, 99);
    ensure((mc - closed_form).abs() / closed_form < 0.02, || format!("monte carlo oracle {mc}"))?;

    let mut doc = presets::fig2();
    doc.adversary = AdversaryPlan::CodebookThenPredict;
    doc.scenario.ticks = 200;
    let sc = doc.scenario().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let batch = run_batch(&[sc], 10_000).map_err(|e| e.to_string())?;
    within(Duration::from_secs(10), start, "10^4 runs")?;
    let s = batch[0].metrics["codebook_completion_tick"];
    ensure(s.count == 10_000, || format!("{} runs completed", s.count))?;
    let mean = s.mean.unwrap();
    ensure((mean - closed_form).abs() / closed_form < 0.05, || format!("mean {mean}"))?;
    Ok(format!("mean {mean:.3} vs {closed_form:.6} (mc {mc:.3})"))
}

fn coverage() -> Outcome {
    for (name, expected) in [("fig3", vec![uavsec::SegmentId::S3]), ("fig4", vec![])] {
        let topo = presets::by_name(name).unwrap().topology().map_err(|e| e.to_string())?;
        let scanned: BTreeSet<_> = topo
            .segments()
            .iter()
            .filter(|s| s.crypto_tx.mode == CipherMode::None || s.crypto_rx.mode == CipherMode::None)
            .map(|s| s.id)
            .collect();
        let flagged: BTreeSet<_> = coverage_check(&topo).iter().map(|f| f.segment).collect();
        ensure(flagged == scanned, || format!("{name}: {flagged:?} vs scan {scanned:?}"))?;
        ensure(flagged.iter().copied().eq(expected), || format!("{name}: {flagged:?}"))?;
    }
    Ok("fig3 -> {S3}, fig4 -> {}".into())
}

fn window_oracle(seen: &mut BTreeSet<u32>, highest: &mut u32, seq: u32) -> WindowVerdict {
    if seq == 0 || u64::from(seq) + 64 <= u64::from(*highest) {
        WindowVerdict::TooOld
    } else if !seen.insert(seq) {
        WindowVerdict::Duplicate
    } else {
        *highest = (*highest).max(seq);
        WindowVerdict::Accept
    }
}

fn permutations(items: &mut Vec<u32>, k: usize, out: &mut BTreeSet<Vec<u32>>) {
    if k == items.len() {
        out.insert(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

fn window_equivalence() -> Outcome {
    let start = Instant::now();
    // Contiguous numbering plus spreads wide enough to push frames out of the window.
    let pools: [&[u32]; 3] = [&[1, 2, 3, 4, 5, 6], &[1, 2, 64, 65, 66, 130], &[3, 67, 68, 200, 263, 264]];
    let mut schedules = 0u64;
    for pool in pools {
        for n in 1..=pool.len() {
            let frames = &pool[..n];
            for dup in frames {
                let mut multiset: Vec<u32> = frames.to_vec();
                multiset.push(*dup);
                let mut orders = BTreeSet::new();
                permutations(&mut multiset, 0, &mut orders);
                for order in orders {
                    let mut window = ReplayWindow::new();
                    let (mut seen, mut highest) = (BTreeSet::new(), 0);
                    for &seq in &order {
                        let got = window.check_and_update(seq);
                        let want = window_oracle(&mut seen, &mut highest, seq);
                        ensure(got == want, || format!("schedule {order:?} at {seq}: {got:?} vs {want:?}"))?;
                    }
                    schedules += 1;
                }
            }
        }
    }
    within(Duration::from_secs(1), start, "exhaustive schedules")?;
    Ok(format!("{schedules} schedules"))
}

fn kpa_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut total, mut subset_ok) = (0usize, 0);
    for _ in 0..100 {
        let key: u16 = rng.random();
        let toy = ToyCipher::new(key);
        let picked: Vec<Command> = Command::ALL.choose_multiple(&mut rng, 2).copied().collect();
        let pairs: Vec<(u16, u16)> = picked
            .iter()
            .map(|&c| (toy_command_block(c), toy.encrypt(toy_command_block(c))))
            .collect();
        let kpa = kpa_key_search(&pairs).unwrap();
        ensure(kpa.contains(&key), || format!("true key {key:#06x} missing"))?;
        total += kpa.len();
        let ciphertexts: Vec<u16> = pairs.iter().map(|p| p.1).collect();
        if kpa.is_subset(&coa_candidates(&ciphertexts, is_toy_command_block)) {
            subset_ok += 1;
        }
    }
    let mean = total as f64 / 100.0;
    ensure(mean <= 1.1, || format!("mean candidates {mean}"))?;
    ensure(subset_ok == 100, || format!("KPA subset of COA in {subset_ok}/100"))?;
    Ok(format!("mean {mean:.2}, subset 100/100"))
}

fn block_cipher_vector() -> Outcome {
    let key: Vec<u8> = (0u8..16).collect();
    let pt = hex::decode("00112233445566778899aabbccddeeff").unwrap();
    let ct = block_encrypt(&key, &pt).map_err(|e| e.to_string())?;
    ensure(hex::encode(ct) == "69c4e0d86a7b0430d8cdb78070b4c55a", || hex::encode(ct))?;
    Ok(hex::encode(ct))
}

fn parent_of(id: &str) -> Option<&str> {
    id.rfind('.').map(|i| &id[..i])
}

fn checklist_engine() -> Outcome {
    let registry = ProtocolRegistry::builtin();
    let audit = |name: &str| {
        let doc = presets::by_name(name).unwrap();
        full_audit(&doc.topology().unwrap(), doc.declarations(), &registry)
    };

    let fig2 = audit("fig2");
    ensure(fig2.item("1.1.1") == Some(Verdict::Fail), || format!("fig2 1.1.1 {:?}", fig2.item("1.1.1")))?;

    let fig4 = audit("fig4");
    ensure(
        fig4.checklist.iter().all(|i| i.verdict != Verdict::Fail) && fig4.item("1") == Some(Verdict::Pass),
        || format!("fig4 {:?}", fig4.checklist),
    )?;
    ensure(fig4.compliant, || "fig4 not compliant".into())?;

    let empty = audit("empty");
    ensure(empty.item("1") == Some(Verdict::Fail) && !empty.compliant, || "empty item 1".into())?;
    for child in ["1.1", "1.1.1", "1.2", "1.2.1"] {
        ensure(empty.item(child) == Some(Verdict::NotApplicable), || format!("empty {child}"))?;
    }

    let ids: Vec<&str> = checklist_ids().collect();
    for bits in 0u32..1 << CHECKLIST_LEN {
        let raw: [bool; CHECKLIST_LEN] = std::array::from_fn(|i| bits >> i & 1 == 1);
        let verdicts = gate_verdicts(raw);
        for (i, id) in ids.iter().enumerate() {
            let Some(parent) = parent_of(id) else { continue };
            let p = ids.iter().position(|x| *x == parent).unwrap();
            ensure(verdicts[p] == Verdict::Pass || verdicts[i] == Verdict::NotApplicable, || {
                format!("{id} is {:?} under {parent} {:?}", verdicts[i], verdicts[p])
            })?;
        }
    }
    Ok(format!("fig2/fig4/empty patterns, {} gating assignments", 1u32 << CHECKLIST_LEN))
}

fn transcript_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("uavsec-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    for name in presets::NAMES {
        let sc = presets::by_name(name).unwrap().scenario().map_err(|e| e.to_string())?;
        let mut digests = Vec::new();
        for run_no in 0..2 {
            let (t, _) = run(&sc).map_err(|e| e.to_string())?;
            let path = dir.join(format!("{name}-{run_no}.jsonl"));
            std::fs::write(&path, t.to_jsonl()).map_err(|e| e.to_string())?;
            let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
            digests.push(sha256_hex(&bytes));
        }
        ensure(digests[0] == digests[1], || format!("{name}: {digests:?}"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{} presets", presets::NAMES.len()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(bytes))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("replay dichotomy", replay_dichotomy),
        ("determinism probe", determinism_probe),
        ("coupon-collector codebook", coupon_collector),
        ("coverage analysis", coverage),
        ("anti-replay window equivalence", window_equivalence),
        ("KPA soundness", kpa_soundness),
        ("block-cipher conformance", block_cipher_vector),
        ("checklist engine", checklist_engine),
        ("pipeline determinism", transcript_determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("acceptance {}: {name} ... PASS ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {}: {name} ... FAIL ({why})", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
