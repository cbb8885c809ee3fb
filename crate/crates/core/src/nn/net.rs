use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::layers::{lstm_gates, lstm_gates_backward, matvec_acc, matvec_t_acc, outer_acc, ConvGeom, GateCache};
use super::policy::{Logits, CHOICES, HEADS};
use super::tensor::{GradientSet, ParameterSet, Tensor};
use super::{NetConfig, NnError, Variant};
use crate::encoding::{Observation, MATRIX_COLS, MATRIX_ROWS, SINGLE_LEN};

const GRID: usize = MATRIX_ROWS * MATRIX_COLS;
const POLICY_OUT: usize = HEADS * CHOICES;

/// Hidden and cell state of one recurrent trunk.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub hidden: Tensor,
    pub cell: Tensor,
}

/// Recurrent state of every trunk of a network (one, or two with separate trunks).
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<LayerState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub logits: Logits,
    pub value: f64,
}

/// Loss gradient with respect to one step's outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadGrads {
    pub dlogits: Logits,
    pub dvalue: f64,
}

impl HeadGrads {
    pub fn zero() -> Self {
        Self { dlogits: [[0.0; CHOICES]; HEADS], dvalue: 0.0 }
    }
}

#[derive(Debug, Clone)]
struct TrunkCache {
    /// Output of the linear + tanh input layer (single variant only).
    a: Vec<f64>,
    h_prev: Vec<f64>,
    h: Vec<f64>,
    gates: GateCache,
}

#[derive(Debug, Clone)]
struct StepCache {
    input: Vec<f64>,
    trunks: Vec<TrunkCache>,
}

/// Record of a forward pass over a sequence, consumed by [`PolicyValueNet::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    pub outputs: Vec<StepOutput>,
    pub final_state: RecurrentState,
    steps: Vec<StepCache>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueNet {
    config: NetConfig,
    names: Vec<String>,
    params: ParameterSet,
}

/// Names and shapes of every parameter tensor in canonical order.
pub fn parameter_layout(config: &NetConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let trunks = if config.shared_trunk { 1 } else { 2 };
    for t in 0..trunks {
        let p = if trunks == 1 { "trunk" } else if t == 0 { "actor" } else { "critic" };
        match config.variant {
            Variant::Single => {
                let h = config.hidden;
                out.push((format!("{p}.linear.w"), vec![h, SINGLE_LEN]));
                out.push((format!("{p}.linear.b"), vec![h]));
                out.push((format!("{p}.lstm.wx"), vec![4 * h, h]));
                out.push((format!("{p}.lstm.wh"), vec![4 * h, h]));
                out.push((format!("{p}.lstm.b"), vec![4 * h]));
            }
            Variant::Multi => {
                let (c, k) = (config.channels, config.kernel);
                out.push((format!("{p}.convlstm.wx"), vec![4 * c, 1, k, k]));
                out.push((format!("{p}.convlstm.wh"), vec![4 * c, c, k, k]));
                out.push((format!("{p}.convlstm.b"), vec![4 * c]));
            }
        }
    }
    let f = feature_len(config);
    out.push(("policy.w".into(), vec![POLICY_OUT, f]));
    out.push(("policy.b".into(), vec![POLICY_OUT]));
    out.push(("value.w".into(), vec![1, f]));
    out.push(("value.b".into(), vec![1]));
    out
}

fn feature_len(config: &NetConfig) -> usize {
    match config.variant {
        Variant::Single => config.hidden,
        Variant::Multi => config.channels * GRID,
    }
}

fn state_shape(config: &NetConfig) -> Vec<usize> {
    match config.variant {
        Variant::Single => vec![config.hidden],
        Variant::Multi => vec![config.channels, MATRIX_ROWS, MATRIX_COLS],
    }
}

fn uniform_fill(t: &mut Tensor, bound: f64, rng: &mut ChaCha8Rng) {
    for x in t.data_mut() {
        *x = rng.gen_range(-bound..bound);
    }
}

/// Row-major `rows x cols` matrix with orthonormal rows (or columns when rows > cols).
fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (r, c) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut m: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.sample(StandardNormal)).collect()).collect();
    for i in 0..r {
        // Two passes of modified Gram-Schmidt for numerical orthogonality.
        for _ in 0..2 {
            for j in 0..i {
                let d: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = m.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= d * y;
                }
            }
        }
        let n = m[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        m[i].iter_mut().for_each(|x| *x /= n);
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..r {
        for j in 0..c {
            if rows <= cols {
                out[i * cols + j] = m[i][j];
            } else {
                out[j * cols + i] = m[i][j];
            }
        }
    }
    out
}

impl PolicyValueNet {
    /// All-zero parameters.
    pub fn zeros(config: NetConfig) -> Result<Self, NnError> {
        config.validate()?;
        let layout = parameter_layout(&config);
        let names = layout.iter().map(|(n, _)| n.clone()).collect();
        let tensors = layout.iter().map(|(_, s)| Tensor::zeros(s)).collect();
        Ok(Self { config, names, params: ParameterSet { tensors } })
    }

    /// Seeded initialisation: orthogonal recurrent weights, fan-in uniform
    /// feedforward weights, zero biases with forget-gate bias 1.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = net.config.clone();
        let per_trunk = net.trunk_tensor_count();
        for t in 0..net.num_trunks() {
            let base = t * per_trunk;
            let ts = &mut net.params.tensors;
            match cfg.variant {
                Variant::Single => {
                    let h = cfg.hidden;
                    uniform_fill(&mut ts[base], 1.0 / (SINGLE_LEN as f64).sqrt(), &mut rng);
                    uniform_fill(&mut ts[base + 2], 1.0 / (h as f64).sqrt(), &mut rng);
                    let wh = ts[base + 3].data_mut();
                    for gate in 0..4 {
                        wh[gate * h * h..(gate + 1) * h * h].copy_from_slice(&orthogonal(h, h, &mut rng));
                    }
                    ts[base + 4].data_mut()[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
                }
                Variant::Multi => {
                    let (c, k) = (cfg.channels, cfg.kernel);
                    uniform_fill(&mut ts[base], 1.0 / ((k * k) as f64).sqrt(), &mut rng);
                    let block = c * c * k * k;
                    let wh = ts[base + 1].data_mut();
                    for gate in 0..4 {
                        wh[gate * block..(gate + 1) * block].copy_from_slice(&orthogonal(c, c * k * k, &mut rng));
                    }
                    ts[base + 2].data_mut()[c..2 * c].iter_mut().for_each(|b| *b = 1.0);
                }
            }
        }
        let f = feature_len(&cfg) as f64;
        let heads = net.trunk_tensor_count() * net.num_trunks();
        uniform_fill(&mut net.params.tensors[heads], 1.0 / f.sqrt(), &mut rng);
        uniform_fill(&mut net.params.tensors[heads + 2], 1.0 / f.sqrt(), &mut rng);
        Ok(net)
    }

    pub fn from_params(config: NetConfig, params: ParameterSet) -> Result<Self, NnError> {
        let mut net = Self::zeros(config)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn set_params(&mut self, params: ParameterSet) -> Result<(), NnError> {
        for (k, (mine, theirs)) in self.params.tensors.iter().zip(&params.tensors).enumerate() {
            if mine.shape() != theirs.shape() {
                return Err(NnError::Shape {
                    layer: self.names[k].clone(),
                    expected: mine.shape().to_vec(),
                    actual: theirs.shape().to_vec(),
                });
            }
        }
        if params.tensors.len() != self.params.tensors.len() {
            return Err(NnError::Shape {
                layer: "parameter set".into(),
                expected: vec![self.params.tensors.len()],
                actual: vec![params.tensors.len()],
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    /// Mutable access to parameter values; shapes cannot change through it.
    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.params.tensors
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    fn num_trunks(&self) -> usize {
        if self.config.shared_trunk {
            1
        } else {
            2
        }
    }

    fn trunk_tensor_count(&self) -> usize {
        match self.config.variant {
            Variant::Single => 5,
            Variant::Multi => 3,
        }
    }

    fn head_base(&self) -> usize {
        self.num_trunks() * self.trunk_tensor_count()
    }

    fn conv_geoms(&self) -> (ConvGeom, ConvGeom) {
        let (c, k) = (self.config.channels, self.config.kernel);
        let x = ConvGeom { cin: 1, cout: 4 * c, k, height: MATRIX_ROWS, width: MATRIX_COLS };
        let h = ConvGeom { cin: c, ..x };
        (x, h)
    }

    pub fn initial_state(&self) -> RecurrentState {
        let shape = state_shape(&self.config);
        RecurrentState {
            layers: (0..self.num_trunks())
                .map(|_| LayerState { hidden: Tensor::zeros(&shape), cell: Tensor::zeros(&shape) })
                .collect(),
        }
    }

    fn check_state(&self, state: &RecurrentState) -> Result<(), NnError> {
        let shape = state_shape(&self.config);
        if state.layers.len() != self.num_trunks() {
            return Err(NnError::Shape {
                layer: "recurrent state".into(),
                expected: vec![self.num_trunks()],
                actual: vec![state.layers.len()],
            });
        }
        for l in &state.layers {
            for t in [&l.hidden, &l.cell] {
                if t.shape() != shape.as_slice() {
                    return Err(NnError::Shape {
                        layer: "recurrent state".into(),
                        expected: shape.clone(),
                        actual: t.shape().to_vec(),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, obs: &[f64]) -> Result<(), NnError> {
        let want = self.config.variant.input_len();
        if obs.len() != want {
            let layer = match self.config.variant {
                Variant::Single => "linear input",
                Variant::Multi => "conv-lstm input",
            };
            return Err(NnError::Shape { layer: layer.into(), expected: vec![want], actual: vec![obs.len()] });
        }
        Ok(())
    }

    /// Forward pass on a typed observation; the variant must match the network.
    pub fn forward(&self, obs: &Observation, state: &RecurrentState) -> Result<(StepOutput, RecurrentState), NnError> {
        let (ok, actual) = match (self.config.variant, obs) {
            (Variant::Single, Observation::Single(_)) | (Variant::Multi, Observation::Multi(_)) => (true, vec![]),
            (Variant::Single, Observation::Multi(_)) => (false, vec![MATRIX_ROWS, MATRIX_COLS]),
            (Variant::Multi, Observation::Single(_)) => (false, vec![SINGLE_LEN]),
        };
        if !ok {
            let expected = match self.config.variant {
                Variant::Single => vec![SINGLE_LEN],
                Variant::Multi => vec![MATRIX_ROWS, MATRIX_COLS],
            };
            return Err(NnError::Shape { layer: "observation".into(), expected, actual });
        }
        self.step(&obs.to_vec(), state)
    }

    /// One recurrent step on a flat input vector.
    pub fn step(&self, obs: &[f64], state: &RecurrentState) -> Result<(StepOutput, RecurrentState), NnError> {
        self.check_input(obs)?;
        self.check_state(state)?;
        let (cache, out, next) = self.step_inner(obs, state);
        drop(cache);
        Ok((out, next))
    }

    fn step_inner(&self, obs: &[f64], state: &RecurrentState) -> (StepCache, StepOutput, RecurrentState) {
        let ts = &self.params.tensors;
        let per = self.trunk_tensor_count();
        let shape = state_shape(&self.config);
        let mut trunks = Vec::with_capacity(self.num_trunks());
        let mut layers = Vec::with_capacity(self.num_trunks());
        for (t, st) in state.layers.iter().enumerate() {
            let base = t * per;
            let h_prev = st.hidden.data();
            let c_prev = st.cell.data();
            let (a, z) = match self.config.variant {
                Variant::Single => {
                    let h = self.config.hidden;
                    let mut pre = ts[base + 1].data().to_vec();
                    matvec_acc(ts[base].data(), h, SINGLE_LEN, obs, &mut pre);
                    let a: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
                    let mut z = ts[base + 4].data().to_vec();
                    matvec_acc(ts[base + 2].data(), 4 * h, h, &a, &mut z);
                    matvec_acc(ts[base + 3].data(), 4 * h, h, h_prev, &mut z);
                    (a, z)
                }
                Variant::Multi => {
                    let (gx, gh) = self.conv_geoms();
                    let b = ts[base + 2].data();
                    let mut z: Vec<f64> = b.iter().flat_map(|&v| std::iter::repeat(v).take(GRID)).collect();
                    gx.forward_acc(ts[base].data(), obs, &mut z);
                    gh.forward_acc(ts[base + 1].data(), h_prev, &mut z);
                    (Vec::new(), z)
                }
            };
            let (gates, c, h) = lstm_gates(&z, c_prev);
            layers.push(LayerState {
                hidden: Tensor::from_vec(shape.clone(), h.clone()).expect("state shape"),
                cell: Tensor::from_vec(shape.clone(), c).expect("state shape"),
            });
            trunks.push(TrunkCache { a, h_prev: h_prev.to_vec(), h, gates });
        }
        let hb = self.head_base();
        let f = feature_len(&self.config);
        let actor = &trunks[0].h;
        let critic = &trunks[trunks.len() - 1].h;
        let mut flat = ts[hb + 1].data().to_vec();
        matvec_acc(ts[hb].data(), POLICY_OUT, f, actor, &mut flat);
        let mut logits = [[0.0; CHOICES]; HEADS];
        for (k, head) in logits.iter_mut().enumerate() {
            head.copy_from_slice(&flat[k * CHOICES..(k + 1) * CHOICES]);
        }
        let mut value = [ts[hb + 3].data()[0]];
        matvec_acc(ts[hb + 2].data(), 1, f, critic, &mut value);
        let out = StepOutput { logits, value: value[0] };
        (StepCache { input: obs.to_vec(), trunks }, out, RecurrentState { layers })
    }

    /// Unrolls the network over `inputs` from `init`, recording everything backward needs.
    pub fn forward_sequence(&self, inputs: &[Vec<f64>], init: &RecurrentState) -> Result<Tape, NnError> {
        self.check_state(init)?;
        let mut state = init.clone();
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            self.check_input(x)?;
            let (cache, out, next) = self.step_inner(x, &state);
            steps.push(cache);
            outputs.push(out);
            state = next;
        }
        Ok(Tape { outputs, final_state: state, steps })
    }

    /// Backpropagation through time. `grads[t]` is the loss gradient with
    /// respect to step `t`'s logits and value; the initial state is treated as
    /// a constant.
    pub fn backward(&self, tape: &Tape, grads: &[HeadGrads]) -> Result<GradientSet, NnError> {
        if tape.steps.is_empty() {
            return Err(NnError::Usage("backward called without a recorded forward pass".into()));
        }
        if grads.len() != tape.steps.len() {
            return Err(NnError::Usage(format!(
                "{} output gradients for a tape of {} steps",
                grads.len(),
                tape.steps.len()
            )));
        }
        let ts = &self.params.tensors;
        let mut g = GradientSet::zeros_like(&self.params);
        let per = self.trunk_tensor_count();
        let hb = self.head_base();
        let f = feature_len(&self.config);
        let n = f;
        let trunks = self.num_trunks();
        let mut dh_next = vec![vec![0.0; n]; trunks];
        let mut dc_next = vec![vec![0.0; n]; trunks];

        for (step, hg) in tape.steps.iter().zip(grads).rev() {
            let dflat: Vec<f64> = hg.dlogits.iter().flatten().copied().collect();
            let mut dh: Vec<Vec<f64>> = dh_next.clone();
            let actor = &step.trunks[0].h;
            let critic = &step.trunks[trunks - 1].h;
            outer_acc(g.tensors[hb].data_mut(), &dflat, actor);
            g.tensors[hb + 1].data_mut().iter_mut().zip(&dflat).for_each(|(a, b)| *a += b);
            matvec_t_acc(ts[hb].data(), POLICY_OUT, f, &dflat, &mut dh[0]);
            outer_acc(g.tensors[hb + 2].data_mut(), &[hg.dvalue], critic);
            g.tensors[hb + 3].data_mut()[0] += hg.dvalue;
            matvec_t_acc(ts[hb + 2].data(), 1, f, &[hg.dvalue], &mut dh[trunks - 1]);

            for t in 0..trunks {
                let base = t * per;
                let tc = &step.trunks[t];
                let (dz, dc_prev) = lstm_gates_backward(&tc.gates, &dh[t], &dc_next[t]);
                let mut dh_prev = vec![0.0; n];
                match self.config.variant {
                    Variant::Single => {
                        let h = self.config.hidden;
                        g.tensors[base + 4].data_mut().iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
                        outer_acc(g.tensors[base + 2].data_mut(), &dz, &tc.a);
                        outer_acc(g.tensors[base + 3].data_mut(), &dz, &tc.h_prev);
                        let mut da = vec![0.0; h];
                        matvec_t_acc(ts[base + 2].data(), 4 * h, h, &dz, &mut da);
                        matvec_t_acc(ts[base + 3].data(), 4 * h, h, &dz, &mut dh_prev);
                        let dpre: Vec<f64> = da.iter().zip(&tc.a).map(|(d, a)| d * (1.0 - a * a)).collect();
                        outer_acc(g.tensors[base].data_mut(), &dpre, &step.input);
                        g.tensors[base + 1].data_mut().iter_mut().zip(&dpre).for_each(|(a, b)| *a += b);
                    }
                    Variant::Multi => {
                        let (gx, gh) = self.conv_geoms();
                        for (o, db) in g.tensors[base + 2].data_mut().iter_mut().enumerate() {
                            *db += dz[o * GRID..(o + 1) * GRID].iter().sum::<f64>();
                        }
                        let (lo, hi) = g.tensors.split_at_mut(base + 1);
                        gx.backward_acc(ts[base].data(), &step.input, &dz, lo[base].data_mut(), None);
                        gh.backward_acc(ts[base + 1].data(), &tc.h_prev, &dz, hi[0].data_mut(), Some(&mut dh_prev));
                    }
                }
                dh_next[t] = dh_prev;
                dc_next[t] = dc_prev;
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{MultiObservation, SingleObservation};
    use crate::nn::policy::softmax;

    fn sample_input(len: usize, k: usize) -> Vec<f64> {
        (0..len).map(|i| ((i * 7 + k * 3) % 11) as f64 / 11.0).collect()
    }

    #[test]
    fn zero_network_is_uniform() {
        for cfg in [NetConfig::single(8), NetConfig::multi(4)] {
            let net = PolicyValueNet::zeros(cfg.clone()).unwrap();
            let (out, _) = net.step(&sample_input(cfg.variant.input_len(), 1), &net.initial_state()).unwrap();
            for head in &out.logits {
                assert!(head.iter().all(|&z| z == 0.0));
                assert!(softmax(head).iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-15));
            }
            assert_eq!(out.value, 0.0);
        }
    }

    #[test]
    fn variant_mismatch_is_a_shape_error() {
        let net = PolicyValueNet::new(NetConfig::single(8), 0).unwrap();
        let obs = Observation::Multi(MultiObservation { matrix: [[0.0; 8]; 4] });
        let err = net.forward(&obs, &net.initial_state()).unwrap_err();
        assert!(matches!(err, NnError::Shape { .. }), "{err}");
        let ok = Observation::Single(SingleObservation::new([1.0, 2.0, 3.0, 4.0], 3).unwrap());
        assert!(net.forward(&ok, &net.initial_state()).is_ok());
    }

    #[test]
    fn repeated_calls_are_deterministic() {
        let net = PolicyValueNet::new(NetConfig::multi(4), 9).unwrap();
        let x = sample_input(32, 2);
        let s = net.initial_state();
        assert_eq!(net.step(&x, &s).unwrap(), net.step(&x, &s).unwrap());
    }

    #[test]
    fn stepwise_equals_unrolled() {
        for cfg in [NetConfig::single(8), NetConfig { shared_trunk: false, ..NetConfig::multi(3) }] {
            let net = PolicyValueNet::new(cfg.clone(), 4).unwrap();
            let xs: Vec<Vec<f64>> = (0..5).map(|k| sample_input(cfg.variant.input_len(), k)).collect();
            let tape = net.forward_sequence(&xs, &net.initial_state()).unwrap();
            let mut s = net.initial_state();
            for (x, want) in xs.iter().zip(&tape.outputs) {
                let (out, next) = net.step(x, &s).unwrap();
                assert_eq!(&out, want);
                s = next;
            }
            assert_eq!(s, tape.final_state);
        }
    }

    #[test]
    fn value_weight_gradient_is_the_feature() {
        let net = PolicyValueNet::new(NetConfig::single(8), 1).unwrap();
        let tape = net.forward_sequence(&[sample_input(8, 0)], &net.initial_state()).unwrap();
        let g = net.backward(&tape, &[HeadGrads { dvalue: 1.0, ..HeadGrads::zero() }]).unwrap();
        let hb = net.head_base();
        assert_eq!(g.tensors[hb + 2].data(), tape.final_state.layers[0].hidden.data());
        assert_eq!(g.tensors[hb + 3].data(), &[1.0]);
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let net = PolicyValueNet::new(NetConfig::multi(2), 1).unwrap();
        let tape = net.forward_sequence(&[sample_input(32, 0), sample_input(32, 1)], &net.initial_state()).unwrap();
        let g = net.backward(&tape, &[HeadGrads::zero(); 2]).unwrap();
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn backward_without_forward_is_a_usage_error() {
        let net = PolicyValueNet::new(NetConfig::single(4), 1).unwrap();
        let tape = net.forward_sequence(&[], &net.initial_state()).unwrap();
        assert!(matches!(net.backward(&tape, &[]), Err(NnError::Usage(_))));
    }

    #[test]
    fn orthogonal_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (r, c) in [(6, 6), (3, 9), (9, 3)] {
            let m = orthogonal(r, c, &mut rng);
            let (small, big) = (r.min(c), r.max(c));
            for i in 0..small {
                for j in 0..small {
                    let d: f64 = (0..big)
                        .map(|k| if r <= c { m[i * c + k] * m[j * c + k] } else { m[k * c + i] * m[k * c + j] })
                        .sum();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn parameter_count_depends_only_on_config() {
        let a = PolicyValueNet::new(NetConfig::single(64), 1).unwrap();
        let b = PolicyValueNet::new(NetConfig::single(64), 2).unwrap();
        assert_eq!(a.num_params(), b.num_params());
        // 8H+H + 2*4H*H + 4H + 36H+36 + H+1 with H = 64
        assert_eq!(a.num_params(), 8 * 64 + 64 + 2 * 256 * 64 + 256 + 36 * 64 + 36 + 64 + 1);
    }
}
