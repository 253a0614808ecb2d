//! The training loop: acting under the epsilon schedule, replay writes,
//! periodic Q and reward-module updates, target syncs, and per-episode
//! logging. Fully deterministic given the run seed.

use thiserror::Error;

use crate::envkit::{make_env, EnvConfig, EnvError};
use crate::par::derive_seed;
use crate::pvm::{ObsPipeline, PvmConfig, PvmError};

use super::{beta_from_max, Agent, AgentConfig, AgentError, AgentKind, ReplayBuffer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Pvm(#[from] PvmError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// One row of the learning-curve log, emitted per finished episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub step: usize,
    pub episode: usize,
    pub return_env: f32,
    pub return_combined: f32,
    pub epsilon: f32,
    pub td_loss: f32,
    pub reward_module_accuracy: f32,
}

pub struct TrainOutput {
    pub episodes: Vec<EpisodeRow>,
    pub agent: Agent,
    pub beta: f32,
}

/// Mean environmental return over the last `n` finished episodes.
pub fn final_mean_return(episodes: &[EpisodeRow], n: usize) -> f32 {
    let tail = &episodes[episodes.len().saturating_sub(n)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|e| e.return_env).sum::<f32>() / tail.len() as f32
}

/// Trains one agent for `total_steps` environment steps.
///
/// Seed derivation is fixed: the run seed splits into independent streams
/// for the network init, the replay sampler, the exploration RNG and the
/// per-episode environment seeds, so two runs with the same inputs produce
/// byte-identical logs and checkpoints.
pub fn train(
    kind: AgentKind,
    env_cfg: &EnvConfig,
    pvm_cfg: &PvmConfig,
    agent_cfg: &AgentConfig,
    total_steps: usize,
    seed: u64,
) -> Result<TrainOutput, TrainError> {
    let mut env = make_env(env_cfg)?;
    let mut pipe = ObsPipeline::new(
        pvm_cfg.kind,
        pvm_cfg.window,
        env_cfg.frame_size,
        env_cfg.frame_stack,
        agent_cfg.input_hw,
    );
    let channels = pipe.channels();
    let (n_motor, n_sensory) = env.action_spaces();
    let beta = agent_cfg
        .beta
        .unwrap_or_else(|| beta_from_max(env.max_episode_return(), env_cfg.max_episode_len));
    let mut agent = Agent::new(
        kind,
        agent_cfg,
        channels,
        n_motor,
        n_sensory,
        beta,
        derive_seed(seed, 1),
    );
    let mut replay = ReplayBuffer::new(
        agent_cfg.replay_capacity,
        channels,
        pipe.planes_per_step(),
        agent_cfg.input_hw,
        derive_seed(seed, 2),
    );

    let mut episode = 0usize;
    let packet = env.reset(derive_seed(seed, 1_000));
    pipe.reset();
    agent.begin_episode();
    pipe.push(&packet)?;
    let mut obs = pipe.input();

    let mut episodes = Vec::new();
    let mut ep_return_env = 0.0f32;
    let mut ep_return_combined = 0.0f32;
    let mut td_loss_sum = 0.0f32;
    let mut td_loss_count = 0usize;
    let mut rm_accuracy = 0.0f32;

    for step in 0..total_steps {
        let eps = agent_cfg.epsilon(step);
        let (a_motor, a_sensory) = agent.select_actions(&obs, eps);
        let out = env.step(a_motor, a_sensory)?;
        let new_planes = pipe.push(&out.packet)?;
        let next_obs = pipe.input();

        let mut tail = Vec::with_capacity(new_planes.len() * next_obs.len());
        for plane in &new_planes {
            tail.extend_from_slice(plane.as_slice());
        }
        replay.push(&obs, &tail, a_motor, a_sensory, out.reward, out.done);

        ep_return_env += out.reward;
        let r_sm = agent.sensorimotor_reward(&obs, &next_obs, a_motor);
        ep_return_combined +=
            super::combine_reward(out.reward, r_sm, agent.beta, agent_cfg.balance);

        if step >= agent_cfg.learn_start && replay.len() >= agent_cfg.batch_size {
            if step % agent_cfg.train_freq == 0 {
                let batch = replay.sample(agent_cfg.batch_size);
                td_loss_sum += agent.td_update(&batch)?;
                td_loss_count += 1;
            }
            if step % agent_cfg.reward_train_freq == 0 {
                let batch = replay.sample(agent_cfg.batch_size);
                if let Some((_, acc)) = agent.train_reward_module(&batch)? {
                    rm_accuracy = acc;
                }
            }
        }
        if step > 0 && step % agent_cfg.target_update_freq == 0 {
            agent.sync_target();
        }

        if out.done {
            episodes.push(EpisodeRow {
                step: step + 1,
                episode,
                return_env: ep_return_env,
                return_combined: ep_return_combined,
                epsilon: eps,
                td_loss: if td_loss_count > 0 { td_loss_sum / td_loss_count as f32 } else { 0.0 },
                reward_module_accuracy: rm_accuracy,
            });
            episode += 1;
            ep_return_env = 0.0;
            ep_return_combined = 0.0;
            td_loss_sum = 0.0;
            td_loss_count = 0;
            let packet = env.reset(derive_seed(seed, 1_000 + episode as u64));
            pipe.reset();
            agent.begin_episode();
            pipe.push(&packet)?;
            obs = pipe.input();
        } else {
            obs = next_obs;
        }
    }

    Ok(TrainOutput { episodes, agent, beta })
}
