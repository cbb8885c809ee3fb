use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsc_core::a3c::train::{run_training, train};
use tsc_core::a3c::{BanditEnv, Regime, RunConfig, TrainConfig};
use tsc_core::nn::{sample_action, softmax, Logits, NetConfig, PolicyValueNet, CHOICES, HEADS};
use tsc_core::rewards::Fusion;
use tsc_core::sim::scenario::builtin;

fn short(regime: Regime, epochs: u64) -> RunConfig {
    let mut rc = RunConfig::default();
    rc.train.regime = regime;
    rc.train.total_epochs = epochs;
    rc.train.episode_duration = Some(1800.0);
    rc.nn = NetConfig { hidden: 16, channels: 4, ..NetConfig::default() };
    rc
}

#[test]
fn single_worker_runs_are_reproducible() {
    let scenario = builtin("single_asym").unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        train(&scenario, short(Regime::Single, 300), Some(d.path())).unwrap();
    }
    for file in ["updates.csv", "metrics.csv", "agent.ckpt"] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        let b = fs::read(dirs[1].path().join(file)).unwrap();
        assert!(!a.is_empty(), "{file} is empty");
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn shared_store_counts_every_worker_update() {
    let scenario = builtin("corridor4").unwrap();
    let mut rc = short(Regime::SharedAsync, 120);
    rc.train.num_workers = 4;
    let out = train(&scenario, rc, None).unwrap();
    assert_eq!(out.workers, 16);
    assert_eq!(out.store_updates.len(), 1);
    assert_eq!(out.store_updates[0], out.records.len() as u64);
    let workers: std::collections::BTreeSet<usize> = out.records.iter().map(|r| r.worker).collect();
    assert_eq!(workers.len(), 16);
    let mut counters: Vec<u64> = out.records.iter().map(|r| r.store_update).collect();
    counters.sort_unstable();
    assert_eq!(counters, (1..=out.store_updates[0]).collect::<Vec<_>>());
}

#[test]
fn checkpoint_count_follows_regime() {
    let single = train(&builtin("single").unwrap(), short(Regime::Single, 40), None).unwrap();
    assert_eq!(single.checkpoints.len(), 1);

    let shared = train(&builtin("corridor4").unwrap(), short(Regime::SharedAsync, 40), None).unwrap();
    assert_eq!(shared.checkpoints.len(), 1);
    assert_eq!(shared.controlled.len(), 4);

    let mut rc = short(Regime::Inrl, 40);
    rc.train.intersections = ["A", "B", "C", "D"].map(String::from).to_vec();
    let dir = tempfile::tempdir().unwrap();
    let inrl = train(&builtin("bengaluru6").unwrap(), rc, Some(dir.path())).unwrap();
    let stems: Vec<&str> = inrl.checkpoints.iter().map(|(s, _)| s.as_str()).collect();
    assert_eq!(stems, ["agent_A", "agent_B", "agent_C", "agent_D"]);
    for s in stems {
        assert!(dir.path().join(format!("{s}.ckpt")).is_file());
    }
    assert_eq!(inrl.intersection_ids.len(), 6);
}

#[test]
fn coordination_switches_are_merged() {
    let mut rc = RunConfig::default();
    rc.reward.global_fusion = Fusion::On;
    let r = rc.resolved().unwrap();
    assert!(r.coordination());
    assert_eq!(r.reward.global_fusion, Fusion::On);
    let r = RunConfig::default().resolved().unwrap();
    assert!(!r.coordination());
}

#[test]
fn bandit_policy_entropy_falls() {
    for seed in 0..5u64 {
        let cfg = TrainConfig { learning_rate: 7e-4, seed, total_epochs: 8 * 300, ..TrainConfig::default() };
        let env = BanditEnv::new(8, 64);
        let net = PolicyValueNet::new(NetConfig::single(16), seed).unwrap();
        let out = run_training(|_| Ok(env.clone()), vec![net], &[0], &cfg, None).unwrap();
        let rec = &out.groups[0].records;
        let k = rec.len() / 10;
        let head: f64 = rec[..k].iter().map(|r| r.entropy).sum::<f64>() / k as f64;
        let tail: f64 = rec[rec.len() - k..].iter().map(|r| r.entropy).sum::<f64>() / k as f64;
        assert!(tail < head, "seed {seed}: entropy {head} -> {tail}");
        assert_eq!(out.groups[0].plan_violations, 0);
    }
}

#[test]
fn sampled_actions_follow_the_softmax() {
    let mut logits: Logits = [[0.0; CHOICES]; HEADS];
    for (h, row) in logits.iter_mut().enumerate() {
        for (c, z) in row.iter_mut().enumerate() {
            *z = ((h * 7 + c * 3) % 5) as f64 * 0.6 - 1.0;
        }
    }
    let n = 100_000;
    let mut counts = [[0u32; CHOICES]; HEADS];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..n {
        let a = sample_action(&logits, &mut rng);
        for h in 0..HEADS {
            counts[h][a.indices[h]] += 1;
        }
    }
    for h in 0..HEADS {
        let p = softmax(&logits[h]);
        for c in 0..CHOICES {
            let expected = p[c] * n as f64;
            let sigma = (n as f64 * p[c] * (1.0 - p[c])).sqrt();
            let got = counts[h][c] as f64;
            assert!((got - expected).abs() <= 3.0 * sigma, "head {h} choice {c}: {got} vs {expected:.0} +- {sigma:.0}");
        }
    }
}
