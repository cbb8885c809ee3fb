use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsc_core::nn::gradcheck::{
    analytic_gradient, compare_gradients, grad_check, GradCheckOptions, PolicyGradientLoss, SequenceLoss, ValueLoss,
};
use tsc_core::nn::{NetConfig, PolicyValueNet};

const TOL: f64 = 1e-4;

fn inputs(len: usize, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps).map(|_| (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()
}

fn pg_loss(steps: usize, seed: u64) -> PolicyGradientLoss {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyGradientLoss {
        actions: (0..steps).map(|_| [0; 4].map(|_| rng.gen_range(0..9))).collect(),
        advantages: (0..steps).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

fn value_loss(steps: usize, seed: u64) -> ValueLoss {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ValueLoss { targets: (0..steps).map(|_| rng.gen_range(-3.0..3.0)).collect() }
}

fn check(cfg: NetConfig) {
    let net = PolicyValueNet::new(cfg.clone(), 5).unwrap();
    let steps = 4;
    let xs = inputs(cfg.variant.input_len(), steps, 1);
    // Non-zero initial state exercises the recurrent path from the first step.
    let (_, init) = net.step(&xs[0], &net.initial_state()).unwrap();
    let losses: [Box<dyn SequenceLoss>; 2] = [Box::new(pg_loss(steps, 2)), Box::new(value_loss(steps, 3))];
    for loss in &losses {
        let rep = grad_check(&net, &xs, &init, loss.as_ref(), &GradCheckOptions::default()).unwrap();
        assert_eq!(rep.checked(), net.num_params());
        assert!(rep.max_rel_error() < TOL, "{:?}", rep.worst());
    }
}

#[test]
fn single_variant_matches_finite_differences() {
    check(NetConfig::single(8));
}

#[test]
fn multi_variant_matches_finite_differences() {
    check(NetConfig::multi(4));
}

#[test]
fn separate_trunks_match_finite_differences() {
    check(NetConfig { shared_trunk: false, ..NetConfig::single(5) });
    check(NetConfig { shared_trunk: false, ..NetConfig::multi(2) });
}

#[test]
fn corrupted_gradient_is_flagged_at_its_index() {
    let net = PolicyValueNet::new(NetConfig::single(8), 5).unwrap();
    let xs = inputs(8, 3, 1);
    let init = net.initial_state();
    let loss = value_loss(3, 4);
    let mut g = analytic_gradient(&net, &xs, &init, &loss).unwrap();
    let k = 3; // recurrent weights
    let (i, _) = g.tensors[k]
        .data()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    g.tensors[k].data_mut()[i] *= 2.0;
    let rep = compare_gradients(&net, &xs, &init, &loss, &g, &GradCheckOptions::default()).unwrap();
    assert!(rep.max_rel_error() > TOL);
    let worst = rep.worst().unwrap();
    assert_eq!(worst.name, net.param_names()[k]);
    assert_eq!(worst.worst_index, i);
}
