//! Finite-difference verification of the analytic gradients.
//!
//! Every check runs in 64-bit: the same generic layer code is instantiated at
//! `f64`, analytic gradients are compared against central differences
//! `(L(p + eps) - L(p - eps)) / (2 eps)` on a random sample of parameters.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::softmax_cross_entropy;
use super::net::{DualHeadNet, EncoderSpec, Grads, Params, SingleHeadNet};
use super::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// Outcome of one finite-difference comparison.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{:<28} {:>4} params  max rel err {:.3e}  tol {:.0e}  {}",
            self.name,
            self.checked,
            self.max_rel_err,
            self.tolerance,
            if self.pass() { "ok" } else { "FAIL" }
        )
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compares analytic gradients against central differences on `samples`
/// randomly chosen parameters of `net`. `loss` must recompute the scalar
/// loss from the network's current parameters.
pub fn finite_diff_check<N, L>(
    net: &mut N,
    analytic: &Grads<f64>,
    loss: L,
    samples: usize,
    eps: f64,
    seed: u64,
) -> (f64, usize)
where
    N: Params<f64>,
    L: Fn(&N) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    let total: usize = counts.iter().sum();
    let mut max_err = 0.0f64;
    let mut checked = 0;
    for _ in 0..samples {
        let flat = rng.random_range(0..total);
        let (mut slot, mut idx) = (0, flat);
        while idx >= counts[slot] {
            idx -= counts[slot];
            slot += 1;
        }
        let original = net.param_slices()[slot][idx];
        net.param_slices_mut()[slot][idx] = original + eps;
        let up = loss(net);
        net.param_slices_mut()[slot][idx] = original - eps;
        let down = loss(net);
        net.param_slices_mut()[slot][idx] = original;
        let numeric = (up - down) / (2.0 * eps);
        max_err = max_err.max(rel_err(analytic.slots[slot][idx], numeric));
        checked += 1;
    }
    (max_err, checked)
}

fn random_input(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.0..1.0)).collect()
}

/// Joint TD-style loss over a dual-head net: mean squared residual between
/// fixed targets and `Q^s(o, a^s) + Q^o(o, a^o)`, the exact loss the agent
/// trains with.
fn dual_td_loss(
    net: &DualHeadNet<f64>,
    xs: &Tensor<f64>,
    a_motor: &[usize],
    a_sensory: &[usize],
    targets: &[f64],
) -> f64 {
    let (qs, qo) = net.forward_batch(xs);
    let n = xs.batch();
    let mut acc = 0.0;
    for i in 0..n {
        let resid = targets[i] - (qs.sample(i)[a_motor[i]] + qo.sample(i)[a_sensory[i]]);
        acc += resid * resid;
    }
    acc / n as f64
}

/// Full dual-head network under the joint TD loss.
pub fn check_dual_net(spec: EncoderSpec, samples: usize, eps: f64, tolerance: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n_motor = 3;
    let n_sensory = 5;
    let mut net: DualHeadNet<f64> = DualHeadNet::new(spec.clone(), n_motor, n_sensory, 7);
    let batch = 4;
    let xs = Tensor::from_vec(
        batch,
        spec.in_ch,
        spec.in_hw,
        spec.in_hw,
        random_input(batch * spec.input_len(), &mut rng),
    );
    let a_motor: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_motor)).collect();
    let a_sensory: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_sensory)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();

    let (qs, qo, caches) = net.forward_batch_cached(&xs);
    let mut dqs = Tensor::zeros(batch, n_motor, 1, 1);
    let mut dqo = Tensor::zeros(batch, n_sensory, 1, 1);
    for i in 0..batch {
        let resid = targets[i] - (qs.sample(i)[a_motor[i]] + qo.sample(i)[a_sensory[i]]);
        let g = -2.0 * resid / batch as f64;
        dqs.sample_mut(i)[a_motor[i]] = g;
        dqo.sample_mut(i)[a_sensory[i]] = g;
    }
    let analytic = net.backward_batch(&caches, &dqs, &dqo);

    let loss = move |net: &DualHeadNet<f64>| dual_td_loss(net, &xs, &a_motor, &a_sensory, &targets);
    let (max_err, checked) = finite_diff_check(&mut net, &analytic, loss, samples, eps, 11);
    CheckReport { name: "dual-head joint TD loss".into(), checked, max_rel_err: max_err, tolerance }
}

/// Single-head net under softmax cross-entropy, the reward-module loss.
pub fn check_reward_net(spec: EncoderSpec, samples: usize, eps: f64, tolerance: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let n_actions = 6;
    let mut net: SingleHeadNet<f64> = SingleHeadNet::new(spec.clone(), n_actions, 13);
    let batch = 4;
    let xs = Tensor::from_vec(
        batch,
        spec.in_ch,
        spec.in_hw,
        spec.in_hw,
        random_input(batch * spec.input_len(), &mut rng),
    );
    let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..n_actions)).collect();

    let (logits, caches) = net.forward_batch_cached(&xs);
    let mut dy = Tensor::zeros(batch, n_actions, 1, 1);
    for i in 0..batch {
        let (_, _, grad) = softmax_cross_entropy(logits.sample(i), labels[i]);
        for (g, v) in dy.sample_mut(i).iter_mut().zip(grad) {
            *g = v / batch as f64;
        }
    }
    let analytic = net.backward_batch(&caches, &dy);

    let loss = move |net: &SingleHeadNet<f64>| {
        let logits = net.forward_batch(&xs);
        let mut acc = 0.0;
        for i in 0..batch {
            let (l, _, _) = softmax_cross_entropy(logits.sample(i), labels[i]);
            acc += l;
        }
        acc / batch as f64
    };
    let (max_err, checked) = finite_diff_check(&mut net, &analytic, loss, samples, eps, 17);
    CheckReport { name: "reward-module cross-entropy".into(), checked, max_rel_err: max_err, tolerance }
}

/// Dense layers only (identity backbone) under the joint TD loss. Central
/// differences are exact for quadratics up to rounding, so this pins the
/// near-zero error floor.
pub fn check_linear_net(samples: usize, eps: f64, tolerance: f64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let features = 10;
    let mut net: DualHeadNet<f64> = DualHeadNet::with_identity(features, 3, 4, 19);
    let batch = 6;
    let xs = Tensor::from_vec(batch, features, 1, 1, random_input(batch * features, &mut rng));
    let a_motor: Vec<usize> = (0..batch).map(|_| rng.random_range(0..3)).collect();
    let a_sensory: Vec<usize> = (0..batch).map(|_| rng.random_range(0..4)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect();

    let (qs, qo, caches) = net.forward_batch_cached(&xs);
    let mut dqs = Tensor::zeros(batch, 3, 1, 1);
    let mut dqo = Tensor::zeros(batch, 4, 1, 1);
    for i in 0..batch {
        let resid = targets[i] - (qs.sample(i)[a_motor[i]] + qo.sample(i)[a_sensory[i]]);
        let g = -2.0 * resid / batch as f64;
        dqs.sample_mut(i)[a_motor[i]] = g;
        dqo.sample_mut(i)[a_sensory[i]] = g;
    }
    let analytic = net.backward_batch(&caches, &dqs, &dqo);
    let loss = move |net: &DualHeadNet<f64>| dual_td_loss(net, &xs, &a_motor, &a_sensory, &targets);
    let (max_err, checked) = finite_diff_check(&mut net, &analytic, loss, samples, eps, 23);
    CheckReport { name: "linear net (exact case)".into(), checked, max_rel_err: max_err, tolerance: tolerance.min(1e-6) }
}

/// A small conv encoder spec that exercises every layer type quickly.
pub fn small_conv_spec(in_ch: usize) -> EncoderSpec {
    EncoderSpec {
        in_ch,
        in_hw: 16,
        convs: vec![
            super::net::ConvShape { out_ch: 3, kernel: 8, stride: 4 },
            super::net::ConvShape { out_ch: 4, kernel: 2, stride: 1 },
            super::net::ConvShape { out_ch: 4, kernel: 2, stride: 1 },
        ],
        dense: 12,
    }
}

/// The whole verification suite: per-layer-type checks plus the full
/// networks under their training losses.
pub fn run_suite(samples: usize, tolerance: f64) -> Vec<CheckReport> {
    vec![
        check_linear_net(samples, DEFAULT_EPS, tolerance),
        check_dual_net(small_conv_spec(2), samples, DEFAULT_EPS, tolerance),
        check_reward_net(small_conv_spec(4), samples, DEFAULT_EPS, tolerance),
    ]
}
