//! Dual-head Q-learning with an intrinsic sensorimotor reward.
//!
//! The agent keeps two Q-heads over a shared encoder stem: one over motor
//! actions and one over sensory (view-selection) actions. Both are trained
//! jointly against a single target built from the combined reward
//! `r_env + beta * r_sm` and the sum of the two heads' bootstrapped maxima.
//! The sensorimotor reward `r_sm = -(1 - p(a^s | o_t, o_{t+1}))` comes from
//! an inverse-dynamics module trained on the same replay data to predict the
//! motor action from consecutive observations: views from which the agent
//! cannot tell what it just did get penalized.
//!
//! Ablation flags cover the published variants: positive or disabled
//! intrinsic reward, separate (non-joint) reward routing, unbalanced
//! (`beta = 1`) combination, a single policy over the product action space,
//! and scripted sensory baselines with a motor-only head.

mod replay;
pub mod trainer;

pub use replay::{Batch, ReplayBuffer};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::artifacts::fnv1a64;
use crate::diffnet::{
    softmax, softmax_cross_entropy, AdamState, DualHeadNet, EncoderSpec, Params, SingleHeadNet,
    Tensor,
};
use crate::evalkit::{BaselineKind, BaselinePolicy, EvalPolicy};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty trajectory reference")]
    EmptyReference,
    #[error("zero-length trajectory in beta reference")]
    ZeroLengthTrajectory,
    #[error("returns and lengths differ: {returns} vs {lengths}")]
    RaggedReference { returns: usize, lengths: usize },
}

/// Sign convention of the sensorimotor reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardMode {
    /// `-(1 - p)`: non-positive, penalizes uninformative views.
    Negative,
    /// `+p`: the naive positive variant from the ablation table.
    Positive,
    /// Intrinsic reward disabled (identically zero).
    Off,
}

/// Whether both heads train against one shared reward or each head gets only
/// its own signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointMode {
    Shared,
    Separate,
}

/// Which agent variant to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    /// Learned motor and sensory heads (the full method).
    Dual,
    /// One head over the product action space, environmental reward only.
    SinglePolicy,
    /// Motor head only; sensory actions come from a scripted baseline.
    FixedSensory(BaselineKind),
}

/// Learning hyperparameters. Defaults carry the published table values
/// (gamma 0.99, epsilon 1.0 -> 0.01, batch 32, train frequency 4, target
/// sync 1,000, replay 100,000, learning rates 1e-4) with the standardized
/// 84x84 encoder; the desk preset in the run config scales the schedule and
/// network down for the toy environments.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub gamma: f32,
    pub eps_start: f32,
    pub eps_end: f32,
    pub eps_decay_steps: usize,
    pub learn_start: usize,
    pub train_freq: usize,
    pub target_update_freq: usize,
    pub batch_size: usize,
    pub reward_train_freq: usize,
    pub lr: f64,
    pub reward_lr: f64,
    /// Per-environment reward balance; `None` derives it from the maximum
    /// episode return over the episode length.
    pub beta: Option<f32>,
    pub balance: bool,
    pub reward_mode: RewardMode,
    pub joint: JointMode,
    pub replay_capacity: usize,
    pub input_hw: usize,
    pub conv_channels: [usize; 3],
    pub dense: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.01,
            eps_decay_steps: 100_000,
            learn_start: 80_000,
            train_freq: 4,
            target_update_freq: 1_000,
            batch_size: 32,
            reward_train_freq: 4,
            lr: 1e-4,
            reward_lr: 1e-4,
            beta: None,
            balance: true,
            reward_mode: RewardMode::Negative,
            joint: JointMode::Shared,
            replay_capacity: 100_000,
            input_hw: 84,
            conv_channels: [32, 64, 64],
            dense: 512,
        }
    }
}

impl AgentConfig {
    pub fn encoder_spec(&self, in_ch: usize) -> EncoderSpec {
        EncoderSpec::scaled(in_ch, self.input_hw, self.conv_channels, self.dense)
    }

    /// Linear epsilon schedule from `eps_start` to `eps_end` over
    /// `eps_decay_steps`, constant afterwards.
    pub fn epsilon(&self, step: usize) -> f32 {
        if step >= self.eps_decay_steps {
            return self.eps_end;
        }
        let frac = step as f32 / self.eps_decay_steps as f32;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Combined per-step reward: `r_env + beta * r_sm`. With balancing off the
/// intrinsic term is added unscaled.
pub fn combine_reward(r_env: f32, r_sensorimotor: f32, beta: f32, balance: bool) -> f32 {
    let scale = if balance { beta } else { 1.0 };
    r_env + scale * r_sensorimotor
}

/// Average per-step environmental return over reference trajectories.
pub fn beta_from_episodes(returns: &[f32], lengths: &[usize]) -> Result<f32, AgentError> {
    if returns.is_empty() {
        return Err(AgentError::EmptyReference);
    }
    if returns.len() != lengths.len() {
        return Err(AgentError::RaggedReference { returns: returns.len(), lengths: lengths.len() });
    }
    let mut acc = 0.0f64;
    for (&r, &l) in returns.iter().zip(lengths) {
        if l == 0 {
            return Err(AgentError::ZeroLengthTrajectory);
        }
        acc += r as f64 / l as f64;
    }
    Ok((acc / returns.len() as f64) as f32)
}

/// Balance from the maximum possible return of one episode.
pub fn beta_from_max(max_return: f32, max_length: usize) -> f32 {
    assert!(max_length > 0, "episode length must be positive");
    max_return / max_length as f32
}

/// Decodes a product-space action index into (motor, sensory).
pub fn decode_product_action(k: usize, n_sensory: usize) -> (usize, usize) {
    (k / n_sensory, k % n_sensory)
}

/// First index attaining the maximum (deterministic tie-breaking).
pub fn argmax_first(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-dynamics sensorimotor reward module: an encoder over the
/// channel-concatenated observation pair with a linear head of motor-action
/// logits.
pub struct RewardModule {
    pub net: SingleHeadNet<f32>,
    pub opt: AdamState<f32>,
    pub mode: RewardMode,
}

impl RewardModule {
    fn new(cfg: &AgentConfig, obs_channels: usize, n_motor: usize, seed: u64) -> RewardModule {
        let spec = cfg.encoder_spec(2 * obs_channels);
        let net = SingleHeadNet::new(spec, n_motor, seed);
        let opt = AdamState::new(&net.param_slices(), cfg.reward_lr);
        RewardModule { net, opt, mode: cfg.reward_mode }
    }

    /// Maps a predicted label probability to the reward under this mode.
    pub fn reward_from_p(mode: RewardMode, p: f32) -> f32 {
        match mode {
            RewardMode::Negative => -(1.0 - p),
            RewardMode::Positive => p,
            RewardMode::Off => 0.0,
        }
    }

    fn pair_input(obs: &[f32], next: &[f32]) -> Vec<f32> {
        let mut x = Vec::with_capacity(obs.len() + next.len());
        x.extend_from_slice(obs);
        x.extend_from_slice(next);
        x
    }

    fn pair_tensor(obs: &Tensor<f32>, next: &Tensor<f32>) -> Tensor<f32> {
        let (n, c, h, w) = obs.shape();
        let mut data = Vec::with_capacity(2 * n * c * h * w);
        for i in 0..n {
            data.extend_from_slice(obs.sample(i));
            data.extend_from_slice(next.sample(i));
        }
        Tensor::from_vec(n, 2 * c, h, w, data)
    }

    /// Sensorimotor reward for one transition.
    pub fn reward(&self, obs: &[f32], next: &[f32], a_motor: usize) -> f32 {
        let logits = self.net.forward_one(&Self::pair_input(obs, next));
        let p = softmax(&logits)[a_motor];
        Self::reward_from_p(self.mode, p)
    }

    /// Batch of sensorimotor rewards, evaluated with the current module.
    pub fn rewards(&self, obs: &Tensor<f32>, next: &Tensor<f32>, a_motor: &[usize]) -> Vec<f32> {
        let logits = self.net.forward_batch(&Self::pair_tensor(obs, next));
        (0..obs.batch())
            .map(|i| {
                let p = softmax(logits.sample(i))[a_motor[i]];
                Self::reward_from_p(self.mode, p)
            })
            .collect()
    }

    /// One cross-entropy step on the inverse-dynamics prediction. Returns
    /// (mean loss, batch accuracy).
    pub fn train(
        &mut self,
        obs: &Tensor<f32>,
        next: &Tensor<f32>,
        a_motor: &[usize],
    ) -> Result<(f32, f32), AgentError> {
        let n = obs.batch();
        if n == 0 {
            return Err(AgentError::EmptyBatch);
        }
        let input = Self::pair_tensor(obs, next);
        let (logits, caches) = self.net.forward_batch_cached(&input);
        let n_out = self.net.n_out();
        let mut dy = Tensor::zeros(n, n_out, 1, 1);
        let mut loss = 0.0f32;
        let mut correct = 0usize;
        for i in 0..n {
            let row = logits.sample(i);
            let (l, _, grad) = softmax_cross_entropy(row, a_motor[i]);
            loss += l;
            if argmax_first(row) == a_motor[i] {
                correct += 1;
            }
            for (d, g) in dy.sample_mut(i).iter_mut().zip(grad) {
                *d = g / n as f32;
            }
        }
        let grads = self.net.backward_batch(&caches, &dy);
        self.opt.step(self.net.param_slices_mut(), &grads);
        Ok((loss / n as f32, correct as f32 / n as f32))
    }
}

enum PolicyNets {
    Dual { online: DualHeadNet<f32>, target: DualHeadNet<f32> },
    Single { online: SingleHeadNet<f32>, target: SingleHeadNet<f32> },
    Motor { online: SingleHeadNet<f32>, target: SingleHeadNet<f32>, baseline: BaselinePolicy },
}

/// Per-element targets. Shared mode produces one scalar per transition
/// (against the sum of the two selected Q-values); separate mode routes the
/// environmental reward to the motor head and the scaled intrinsic reward to
/// the sensory head.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Shared(Vec<f32>),
    Separate { motor: Vec<f32>, sensory: Vec<f32> },
}

/// The learning agent: online and target networks, the optional reward
/// module, and the exploration RNG.
pub struct Agent {
    pub cfg: AgentConfig,
    nets: PolicyNets,
    opt: AdamState<f32>,
    pub reward_module: Option<RewardModule>,
    rng: ChaCha8Rng,
    n_motor: usize,
    n_sensory: usize,
    /// Resolved reward balance.
    pub beta: f32,
}

impl Agent {
    pub fn new(
        kind: AgentKind,
        cfg: &AgentConfig,
        obs_channels: usize,
        n_motor: usize,
        n_sensory: usize,
        beta: f32,
        seed: u64,
    ) -> Agent {
        let spec = cfg.encoder_spec(obs_channels);
        let (nets, reward_module) = match kind {
            AgentKind::Dual => {
                let online: DualHeadNet<f32> =
                    DualHeadNet::new(spec.clone(), n_motor, n_sensory, seed);
                let target = online.clone();
                let reward = match cfg.reward_mode {
                    RewardMode::Off => None,
                    _ => Some(RewardModule::new(
                        cfg,
                        obs_channels,
                        n_motor,
                        seed.wrapping_add(0x5EED),
                    )),
                };
                (PolicyNets::Dual { online, target }, reward)
            }
            AgentKind::SinglePolicy => {
                let online: SingleHeadNet<f32> =
                    SingleHeadNet::new(spec.clone(), n_motor * n_sensory, seed);
                let target = online.clone();
                (PolicyNets::Single { online, target }, None)
            }
            AgentKind::FixedSensory(kind) => {
                let online: SingleHeadNet<f32> = SingleHeadNet::new(spec.clone(), n_motor, seed);
                let target = online.clone();
                let baseline = BaselinePolicy::new(kind, seed.wrapping_add(0xBA5E));
                (PolicyNets::Motor { online, target, baseline }, None)
            }
        };
        let opt = match &nets {
            PolicyNets::Dual { online, .. } => AdamState::new(&online.param_slices(), cfg.lr),
            PolicyNets::Single { online, .. } | PolicyNets::Motor { online, .. } => {
                AdamState::new(&online.param_slices(), cfg.lr)
            }
        };
        Agent {
            cfg: cfg.clone(),
            nets,
            opt,
            reward_module,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xAC7)),
            n_motor,
            n_sensory,
            beta,
        }
    }

    /// Tabular dual agent for fixed-point tests: identity backbone, heads
    /// read the raw input.
    pub fn new_tabular(cfg: &AgentConfig, features: usize, n_motor: usize, n_sensory: usize, seed: u64) -> Agent {
        let online: DualHeadNet<f32> = DualHeadNet::with_identity(features, n_motor, n_sensory, seed);
        let target = online.clone();
        let opt = AdamState::new(&online.param_slices(), cfg.lr);
        Agent {
            cfg: cfg.clone(),
            nets: PolicyNets::Dual { online, target },
            opt,
            reward_module: None,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xAC7)),
            n_motor,
            n_sensory,
            beta: cfg.beta.unwrap_or(1.0),
        }
    }

    pub fn spaces(&self) -> (usize, usize) {
        (self.n_motor, self.n_sensory)
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.nets {
            PolicyNets::Dual { .. } => "dual",
            PolicyNets::Single { .. } => "single-policy",
            PolicyNets::Motor { .. } => "fixed-sensory",
        }
    }

    /// Resets per-episode state (the raster baseline cursor).
    pub fn begin_episode(&mut self) {
        if let PolicyNets::Motor { baseline, .. } = &mut self.nets {
            baseline.reset_cursor();
        }
    }

    /// Epsilon-greedy action selection. Each head draws independently:
    /// exploit with probability `1 - eps` (argmax, ties to the lowest
    /// index), otherwise a uniform action.
    pub fn select_actions(&mut self, input: &[f32], eps: f32) -> (usize, usize) {
        match &mut self.nets {
            PolicyNets::Dual { online, .. } => {
                let explore_m = self.rng.random::<f32>() < eps;
                let motor = if explore_m {
                    self.rng.random_range(0..self.n_motor)
                } else {
                    usize::MAX
                };
                let explore_s = self.rng.random::<f32>() < eps;
                let sensory = if explore_s {
                    self.rng.random_range(0..self.n_sensory)
                } else {
                    usize::MAX
                };
                if explore_m && explore_s {
                    return (motor, sensory);
                }
                let (qs, qo) = online.forward_one(input);
                (
                    if explore_m { motor } else { argmax_first(&qs) },
                    if explore_s { sensory } else { argmax_first(&qo) },
                )
            }
            PolicyNets::Single { online, .. } => {
                if self.rng.random::<f32>() < eps {
                    let k = self.rng.random_range(0..self.n_motor * self.n_sensory);
                    decode_product_action(k, self.n_sensory)
                } else {
                    let q = online.forward_one(input);
                    decode_product_action(argmax_first(&q), self.n_sensory)
                }
            }
            PolicyNets::Motor { online, baseline, .. } => {
                let motor = if self.rng.random::<f32>() < eps {
                    self.rng.random_range(0..self.n_motor)
                } else {
                    argmax_first(&online.forward_one(input))
                };
                (motor, baseline.next_action())
            }
        }
    }

    /// Sensorimotor reward for one transition; zero when the module is
    /// disabled.
    pub fn sensorimotor_reward(&self, obs: &[f32], next: &[f32], a_motor: usize) -> f32 {
        match &self.reward_module {
            Some(module) => module.reward(obs, next, a_motor),
            None => 0.0,
        }
    }

    /// Batch intrinsic rewards evaluated with the current module (sample
    /// time, not storage time).
    pub fn intrinsic_rewards(&self, batch: &Batch) -> Vec<f32> {
        match &self.reward_module {
            Some(module) => module.rewards(&batch.obs, &batch.next_obs, &batch.a_motor),
            None => vec![0.0; batch.len()],
        }
    }

    /// Bootstrapped targets from the target network. Terminal transitions
    /// contribute no bootstrap term.
    pub fn compute_targets(&self, batch: &Batch) -> Targets {
        let gamma = self.cfg.gamma;
        let r_int = self.intrinsic_rewards(batch);
        match &self.nets {
            PolicyNets::Dual { target, .. } => {
                let (qs, qo) = target.forward_batch(&batch.next_obs);
                match self.cfg.joint {
                    JointMode::Shared => {
                        let ys = (0..batch.len())
                            .map(|i| {
                                let r = combine_reward(
                                    batch.r_env[i],
                                    r_int[i],
                                    self.beta,
                                    self.cfg.balance,
                                );
                                if batch.done[i] {
                                    r
                                } else {
                                    let ms = qs.sample(i)[argmax_first(qs.sample(i))];
                                    let mo = qo.sample(i)[argmax_first(qo.sample(i))];
                                    r + gamma * (ms + mo)
                                }
                            })
                            .collect();
                        Targets::Shared(ys)
                    }
                    JointMode::Separate => {
                        let scale = if self.cfg.balance { self.beta } else { 1.0 };
                        let mut motor = Vec::with_capacity(batch.len());
                        let mut sensory = Vec::with_capacity(batch.len());
                        for i in 0..batch.len() {
                            let (bs, bo) = if batch.done[i] {
                                (0.0, 0.0)
                            } else {
                                (
                                    gamma * qs.sample(i)[argmax_first(qs.sample(i))],
                                    gamma * qo.sample(i)[argmax_first(qo.sample(i))],
                                )
                            };
                            motor.push(batch.r_env[i] + bs);
                            sensory.push(scale * r_int[i] + bo);
                        }
                        Targets::Separate { motor, sensory }
                    }
                }
            }
            PolicyNets::Single { target, .. } | PolicyNets::Motor { target, .. } => {
                let q = target.forward_batch(&batch.next_obs);
                let ys = (0..batch.len())
                    .map(|i| {
                        let r = batch.r_env[i];
                        if batch.done[i] {
                            r
                        } else {
                            r + gamma * q.sample(i)[argmax_first(q.sample(i))]
                        }
                    })
                    .collect();
                Targets::Shared(ys)
            }
        }
    }

    /// One squared-error step on the online network. Returns the batch mean
    /// loss.
    pub fn td_update(&mut self, batch: &Batch) -> Result<f32, AgentError> {
        let n = batch.len();
        if n == 0 {
            return Err(AgentError::EmptyBatch);
        }
        let targets = self.compute_targets(batch);
        let inv = 1.0 / n as f32;
        match (&mut self.nets, targets) {
            (PolicyNets::Dual { online, .. }, Targets::Shared(ys)) => {
                let (qs, qo, caches) = online.forward_batch_cached(&batch.obs);
                let mut dqs = Tensor::zeros(n, self.n_motor, 1, 1);
                let mut dqo = Tensor::zeros(n, self.n_sensory, 1, 1);
                let mut loss = 0.0f32;
                for i in 0..n {
                    let picked =
                        qs.sample(i)[batch.a_motor[i]] + qo.sample(i)[batch.a_sensory[i]];
                    let resid = ys[i] - picked;
                    loss += resid * resid;
                    let g = -2.0 * resid * inv;
                    dqs.sample_mut(i)[batch.a_motor[i]] = g;
                    dqo.sample_mut(i)[batch.a_sensory[i]] = g;
                }
                let grads = online.backward_batch(&caches, &dqs, &dqo);
                self.opt.step(online.param_slices_mut(), &grads);
                Ok(loss * inv)
            }
            (PolicyNets::Dual { online, .. }, Targets::Separate { motor, sensory }) => {
                let (qs, qo, caches) = online.forward_batch_cached(&batch.obs);
                let mut dqs = Tensor::zeros(n, self.n_motor, 1, 1);
                let mut dqo = Tensor::zeros(n, self.n_sensory, 1, 1);
                let mut loss = 0.0f32;
                for i in 0..n {
                    let es = motor[i] - qs.sample(i)[batch.a_motor[i]];
                    let eo = sensory[i] - qo.sample(i)[batch.a_sensory[i]];
                    loss += es * es + eo * eo;
                    dqs.sample_mut(i)[batch.a_motor[i]] = -2.0 * es * inv;
                    dqo.sample_mut(i)[batch.a_sensory[i]] = -2.0 * eo * inv;
                }
                let grads = online.backward_batch(&caches, &dqs, &dqo);
                self.opt.step(online.param_slices_mut(), &grads);
                Ok(loss * inv)
            }
            (PolicyNets::Single { online, .. }, Targets::Shared(ys)) => {
                let (q, caches) = online.forward_batch_cached(&batch.obs);
                let mut dq = Tensor::zeros(n, self.n_motor * self.n_sensory, 1, 1);
                let mut loss = 0.0f32;
                for i in 0..n {
                    let k = batch.a_motor[i] * self.n_sensory + batch.a_sensory[i];
                    let resid = ys[i] - q.sample(i)[k];
                    loss += resid * resid;
                    dq.sample_mut(i)[k] = -2.0 * resid * inv;
                }
                let grads = online.backward_batch(&caches, &dq);
                self.opt.step(online.param_slices_mut(), &grads);
                Ok(loss * inv)
            }
            (PolicyNets::Motor { online, .. }, Targets::Shared(ys)) => {
                let (q, caches) = online.forward_batch_cached(&batch.obs);
                let mut dq = Tensor::zeros(n, self.n_motor, 1, 1);
                let mut loss = 0.0f32;
                for i in 0..n {
                    let resid = ys[i] - q.sample(i)[batch.a_motor[i]];
                    loss += resid * resid;
                    dq.sample_mut(i)[batch.a_motor[i]] = -2.0 * resid * inv;
                }
                let grads = online.backward_batch(&caches, &dq);
                self.opt.step(online.param_slices_mut(), &grads);
                Ok(loss * inv)
            }
            _ => unreachable!("target kind matches net kind"),
        }
    }

    /// One inverse-dynamics step on the reward module, if present. Returns
    /// (loss, accuracy).
    pub fn train_reward_module(&mut self, batch: &Batch) -> Result<Option<(f32, f32)>, AgentError> {
        match &mut self.reward_module {
            Some(module) => {
                let out = module.train(&batch.obs, &batch.next_obs, &batch.a_motor)?;
                Ok(Some(out))
            }
            None => Ok(None),
        }
    }

    /// Copies online parameters into the target network, bit-exact.
    pub fn sync_target(&mut self) {
        match &mut self.nets {
            PolicyNets::Dual { online, target } => target.copy_params_from(online),
            PolicyNets::Single { online, target } | PolicyNets::Motor { online, target, .. } => {
                target.copy_params_from(online)
            }
        }
    }

    /// Greedy Q-values of the online net (dual agents only), for tests and
    /// analysis.
    pub fn q_values(&self, input: &[f32]) -> Option<(Vec<f32>, Vec<f32>)> {
        match &self.nets {
            PolicyNets::Dual { online, .. } => Some(online.forward_one(input)),
            _ => None,
        }
    }

    pub fn online_params(&self) -> Vec<&[f32]> {
        match &self.nets {
            PolicyNets::Dual { online, .. } => online.param_slices(),
            PolicyNets::Single { online, .. } | PolicyNets::Motor { online, .. } => {
                online.param_slices()
            }
        }
    }

    pub fn online_params_mut(&mut self) -> Vec<&mut [f32]> {
        match &mut self.nets {
            PolicyNets::Dual { online, .. } => online.param_slices_mut(),
            PolicyNets::Single { online, .. } | PolicyNets::Motor { online, .. } => {
                online.param_slices_mut()
            }
        }
    }

    pub fn target_params(&self) -> Vec<&[f32]> {
        match &self.nets {
            PolicyNets::Dual { target, .. } => target.param_slices(),
            PolicyNets::Single { target, .. } | PolicyNets::Motor { target, .. } => {
                target.param_slices()
            }
        }
    }

    pub fn target_params_mut(&mut self) -> Vec<&mut [f32]> {
        match &mut self.nets {
            PolicyNets::Dual { target, .. } => target.param_slices_mut(),
            PolicyNets::Single { target, .. } | PolicyNets::Motor { target, .. } => {
                target.param_slices_mut()
            }
        }
    }

    /// Fingerprint of the online network architecture, stored in checkpoint
    /// headers.
    pub fn arch_hash(&self) -> u64 {
        let s = match &self.nets {
            PolicyNets::Dual { online, .. } => online.arch_string(),
            PolicyNets::Single { online, .. } => format!("{}|product", online.arch_string()),
            PolicyNets::Motor { online, .. } => format!("{}|motor-only", online.arch_string()),
        };
        fnv1a64(s.as_bytes())
    }

    pub fn reward_arch_hash(&self) -> Option<u64> {
        self.reward_module
            .as_ref()
            .map(|m| fnv1a64(m.net.arch_string().as_bytes()))
    }

    /// Checksum over all online parameters (change detection in tests).
    pub fn online_checksum(&self) -> u64 {
        let mut bytes = Vec::new();
        for slice in self.online_params() {
            for v in slice {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fnv1a64(&bytes)
    }

    pub fn reward_checksum(&self) -> Option<u64> {
        self.reward_module.as_ref().map(|m| {
            let mut bytes = Vec::new();
            for slice in m.net.param_slices() {
                for v in slice {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            fnv1a64(&bytes)
        })
    }
}

/// Greedy (epsilon = 0) evaluation policy over a trained agent.
pub struct GreedyPolicy<'a> {
    pub agent: &'a Agent,
}

impl EvalPolicy for GreedyPolicy<'_> {
    fn act(&self, input: &[f32], step: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
        match &self.agent.nets {
            PolicyNets::Dual { online, .. } => {
                let (qs, qo) = online.forward_one(input);
                (argmax_first(&qs), argmax_first(&qo))
            }
            PolicyNets::Single { online, .. } => {
                let q = online.forward_one(input);
                decode_product_action(argmax_first(&q), self.agent.n_sensory)
            }
            PolicyNets::Motor { online, baseline, .. } => {
                let q = online.forward_one(input);
                let sensory =
                    crate::evalkit::baseline_sensory_action(baseline.kind(), step, rng);
                (argmax_first(&q), sensory)
            }
        }
    }

    fn expected_spaces(&self) -> Option<(usize, usize)> {
        Some(self.agent.spaces())
    }
}

#[cfg(test)]
mod tests;
