use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tsc_core::a3c::{action_to_plan, compute_returns_advantages, plan_is_valid};
use tsc_core::encoding::{build_isolated_matrix, build_neighbor_matrix, encode_density, MATRIX_COLS, MATRIX_ROWS};
use tsc_core::nn::{checkpoint, softmax, NetConfig, PolicyValueNet};
use tsc_core::rewards::{
    clip, combined_reward, density_product, density_sum, global_reward, step_reward, Aggregate, DensitySnapshot,
};
use tsc_core::sim::scenario::builtin;
use tsc_core::sim::{build_network, Network, SignalPlan};

fn green() -> impl Strategy<Value = u32> {
    (0u32..9).prop_map(|k| 20 + 5 * k)
}

fn plan() -> impl Strategy<Value = SignalPlan> {
    [green(), green(), green(), green()].prop_map(|g| SignalPlan::new(g).unwrap())
}

fn densities() -> impl Strategy<Value = [f64; 4]> {
    [0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64]
}

fn positive_densities() -> impl Strategy<Value = [f64; 4]> {
    [1e-3..200.0f64, 1e-3..200.0f64, 1e-3..200.0f64, 1e-3..200.0f64]
}

fn aggregate() -> impl Strategy<Value = Aggregate> {
    prop_oneof![Just(Aggregate::Product), Just(Aggregate::Sum), Just(Aggregate::SumSquares)]
}

fn clipped() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(0.0), Just(1.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vehicles_are_conserved_under_random_plans(seed in any::<u64>(), plans in proptest::collection::vec(plan(), 6)) {
        let cfg = builtin("bengaluru6").unwrap();
        let topo = build_network(&cfg).unwrap();
        let mut net = Network::new(&topo, &cfg.sim, seed).unwrap();
        for ix in 0..topo.intersections.len() {
            net.set_plan(ix, plans[ix]).unwrap();
        }
        for _ in 0..900 {
            for e in net.step().unwrap() {
                prop_assert!(e.delay_s_per_km >= 0.0);
            }
            prop_assert_eq!(net.total_entered(), net.vehicles_in_system() + net.total_exited());
            for s in net.sections() {
                prop_assert_eq!(s.cumulative_entered, s.queue.len() as u64 + s.cumulative_exited);
                prop_assert!(s.density() >= 0.0);
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_event_logs(seed in any::<u64>(), p in plan()) {
        let cfg = builtin("corridor4").unwrap();
        let topo = build_network(&cfg).unwrap();
        let run = || {
            let mut net = Network::new(&topo, &cfg.sim, seed).unwrap();
            net.enable_event_log();
            for ix in 0..4 {
                net.set_plan(ix, p).unwrap();
            }
            for _ in 0..600 {
                net.step().unwrap();
            }
            net.event_log_bytes()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn more_green_never_discharges_less(seed in any::<u64>(), base in plan(), approach in 0usize..4, warmup in 0usize..4) {
        let cfg = builtin("single_asym").unwrap();
        let topo = build_network(&cfg).unwrap();
        let mut net = Network::new(&topo, &cfg.sim, seed).unwrap();
        for _ in 0..warmup {
            net.run_cycle(0, SignalPlan::uniform(40).unwrap()).unwrap();
        }
        let mut longer = base;
        longer.greens[approach] += 5;
        let a = net.clone().run_cycle(0, base).unwrap();
        let b = net.clone().run_cycle(0, longer).unwrap();
        prop_assert!(b.discharged[approach] >= a.discharged[approach]);
    }

    #[test]
    fn encoded_density_is_scale_invariant(v in positive_densities(), k in 1e-3..1e3f64) {
        let a = encode_density(v).unwrap();
        let b = encode_density(v.map(|x| x * k)).unwrap();
        for i in 0..4 {
            prop_assert!((a[i] - b[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn encoding_keeps_argmax_and_is_idempotent(v in densities()) {
        let e = encode_density(v).unwrap();
        prop_assert!(e.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert_eq!(encode_density(e).unwrap(), e);
        let max = v.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            prop_assert_eq!(e.iter().copied().fold(0.0, f64::max), 1.0);
            if v.iter().filter(|&&x| x == max).count() == 1 {
                let am = |w: &[f64; 4]| (0..4).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
                prop_assert_eq!(am(&v), am(&e));
            }
        }
    }

    #[test]
    fn observation_matrices_are_always_4_by_8(seed in any::<u64>(), steps in 0usize..400) {
        let cfg = builtin("bengaluru6").unwrap();
        let topo = build_network(&cfg).unwrap();
        let mut net = Network::new(&topo, &cfg.sim, seed).unwrap();
        for ix in 0..6 {
            net.set_plan(ix, SignalPlan::uniform(30).unwrap()).unwrap();
        }
        for _ in 0..steps {
            net.step().unwrap();
        }
        for ix in 0..6 {
            let m = build_neighbor_matrix(&net, ix).unwrap();
            prop_assert_eq!(m.to_vec().len(), MATRIX_ROWS * MATRIX_COLS);
            prop_assert_eq!(m.real_rows(), 1 + topo.neighbor_map[ix].len().min(3));
            for row in &m.matrix {
                let phase_bits: f64 = row[4..].iter().sum();
                prop_assert!(phase_bits == 0.0 || phase_bits == 1.0);
            }
            prop_assert_eq!(build_isolated_matrix(&net, ix).unwrap().real_rows(), 1);
        }
    }

    #[test]
    fn step_rewards_are_clipped_and_antisymmetric(a in densities(), b in densities(), agg in aggregate()) {
        let sa = DensitySnapshot::new(a, 0.0).unwrap();
        let sb = DensitySnapshot::new(b, 1.0).unwrap();
        let fwd = step_reward(&sa, &sb, agg).unwrap();
        let back = step_reward(&DensitySnapshot::new(b, 0.0).unwrap(), &DensitySnapshot::new(a, 1.0).unwrap(), agg).unwrap();
        prop_assert!([-1.0, 0.0, 1.0].contains(&fwd.clipped));
        prop_assert_eq!(fwd.raw, -back.raw);
        prop_assert_eq!(fwd.clipped, -back.clipped);
    }

    #[test]
    fn product_is_d_cubed_more_sensitive_than_sum(d in 0.1..50.0f64, eps in 1e-3..1.0f64, i in 0usize..4) {
        let base = DensitySnapshot::new([d; 4], 0.0).unwrap();
        let mut v = [d; 4];
        v[i] += eps;
        let moved = DensitySnapshot::new(v, 1.0).unwrap();
        let dp = (density_product(&moved) - density_product(&base)).abs();
        let ds = (density_sum(&moved) - density_sum(&base)).abs();
        let ratio = dp / ds;
        prop_assert!((ratio - d.powi(3)).abs() <= 1e-8 * d.powi(3).max(1.0) / eps);
    }

    #[test]
    fn global_reward_ignores_agent_order(r in proptest::collection::vec(clipped(), 4), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
        let shuffled: Vec<f64> = perm.iter().map(|&k| r[k]).collect();
        prop_assert_eq!(global_reward(&r, 4).unwrap(), global_reward(&shuffled, 4).unwrap());
    }

    #[test]
    fn fusion_is_identity_under_unanimity(r in clipped(), n in 1usize..8) {
        let g = global_reward(&vec![r; n], n).unwrap();
        let fused = combined_reward(g, r, 0.5).unwrap();
        prop_assert_eq!(fused.clipped, clip(r));
    }

    #[test]
    fn softmax_heads_sum_to_one(z in proptest::array::uniform9(-1e3..1e3f64)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>(), multi in any::<bool>(), width in 1usize..6) {
        let cfg = if multi { NetConfig::multi(width) } else { NetConfig::single(width) };
        let net = PolicyValueNet::new(cfg, seed).unwrap();
        let bytes = checkpoint::to_bytes(&net);
        let back = checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(checkpoint::to_bytes(&back), bytes);
        let bits = |n: &PolicyValueNet| n.params().flatten().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn every_action_maps_to_a_valid_plan(ix in [0usize..9, 0usize..9, 0usize..9, 0usize..9]) {
        let plan = action_to_plan(&ix).unwrap();
        prop_assert!(plan_is_valid(&plan.greens()));
        prop_assert_eq!(plan.greens(), ix.map(|k| 20 + 5 * k as u32));
    }
}

/// Discounted sum written out term by term.
pub fn direct_returns(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|i| {
            let mut total = 0.0;
            for (k, r) in rewards[i..].iter().enumerate() {
                total += gamma.powi(k as i32) * r;
            }
            total + gamma.powi((n - i) as i32) * bootstrap
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn returns_match_direct_summation(
        rewards in proptest::collection::vec(-1.0..1.0f64, 1..=16),
        gamma in 0.0..=1.0f64,
        bootstrap in -10.0..10.0f64,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = rewards.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (ret, adv) = compute_returns_advantages(&rewards, &values, gamma, bootstrap).unwrap();
        let oracle = direct_returns(&rewards, gamma, bootstrap);
        for i in 0..rewards.len() {
            prop_assert!((ret[i] - oracle[i]).abs() <= 1e-12);
            prop_assert!((adv[i] - (oracle[i] - values[i])).abs() <= 1e-12);
        }
    }
}
