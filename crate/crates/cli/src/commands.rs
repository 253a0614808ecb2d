//! Subcommand implementations. Every artifact lands under the configured
//! output directory; manifests record the config hash, the seed and the
//! version so any artifact can be regenerated bit-identically.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use gaze_core::agent::{trainer, Agent, AgentConfig, GreedyPolicy, JointMode, RewardMode};
use gaze_core::artifacts::{atomic_write, read_csv, write_csv, RunManifest};
use gaze_core::config::RunConfig;
use gaze_core::diffnet::{checkpoint, gradcheck as gc, Params};
use gaze_core::envkit::make_env;
use gaze_core::evalkit::{kl_to_uniform, run_eval, EpisodeTrace, SensoryTrace, TraceStep};
use gaze_core::image::counts_to_pgm;
use gaze_core::pvm::{ObsPipeline, PvmConfig, PvmKind};

fn version_string() -> String {
    format!("gaze-{}", env!("CARGO_PKG_VERSION"))
}

/// Builds an untrained agent matching the config (same construction path as
/// the trainer, so checkpoint shapes and hashes line up).
fn build_agent(cfg: &RunConfig, seed: u64) -> Result<Agent> {
    let env = make_env(&cfg.env)?;
    let (n_motor, n_sensory) = env.action_spaces();
    let channels = cfg.env.frame_stack * cfg.pvm.planes_per_step();
    let beta = cfg
        .agent
        .beta
        .unwrap_or_else(|| env.max_episode_return() / cfg.env.max_episode_len as f32);
    Ok(Agent::new(
        cfg.agent_kind(),
        &cfg.agent,
        channels,
        n_motor,
        n_sensory,
        beta,
        seed,
    ))
}

fn curve_rows(episodes: &[trainer::EpisodeRow]) -> Vec<Vec<String>> {
    episodes
        .iter()
        .map(|e| {
            vec![
                e.step.to_string(),
                e.episode.to_string(),
                e.return_env.to_string(),
                e.return_combined.to_string(),
                e.epsilon.to_string(),
                e.td_loss.to_string(),
                e.reward_module_accuracy.to_string(),
            ]
        })
        .collect()
}

pub const CURVE_HEADER: [&str; 7] = [
    "step",
    "episode",
    "return_env",
    "return_combined",
    "epsilon",
    "td_loss",
    "reward_module_accuracy",
];

pub fn train(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash_hex();
    for &seed in &cfg.seeds {
        let dir = cfg.out_dir.join(format!("train-seed{seed}"));
        let started = Instant::now();
        let out = trainer::train(
            cfg.agent_kind(),
            &cfg.env,
            &cfg.pvm,
            &cfg.agent,
            cfg.total_steps,
            seed,
        )?;
        let curve = dir.join("curve.csv");
        write_csv(&curve, &CURVE_HEADER, &curve_rows(&out.episodes))?;
        let mut artifacts = vec![("curve".to_string(), curve)];

        let online = dir.join("checkpoint_online.bin");
        checkpoint::save(&online, out.agent.arch_hash(), &out.agent.online_params())?;
        artifacts.push(("checkpoint_online".into(), online));
        let target = dir.join("checkpoint_target.bin");
        checkpoint::save(&target, out.agent.arch_hash(), &out.agent.target_params())?;
        artifacts.push(("checkpoint_target".into(), target));
        if let (Some(module), Some(hash)) = (&out.agent.reward_module, out.agent.reward_arch_hash())
        {
            let reward = dir.join("checkpoint_reward.bin");
            checkpoint::save(&reward, hash, &module.net.param_slices())?;
            artifacts.push(("checkpoint_reward".into(), reward));
        }
        RunManifest {
            config_hash: hash.clone(),
            seed,
            version: version_string(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
            artifacts,
        }
        .write(&dir.join("manifest.txt"))?;
        let final10 = trainer::final_mean_return(&out.episodes, 10);
        println!(
            "train seed {seed}: {} steps, {} episodes, beta {:.4}, final-10 return {final10:.2} -> {}",
            cfg.total_steps,
            out.episodes.len(),
            out.beta,
            dir.display()
        );
    }
    Ok(())
}

fn trace_rows(trace: &SensoryTrace) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(trace.total_steps());
    for ep in &trace.episodes {
        for (step, s) in ep.steps.iter().enumerate() {
            rows.push(vec![
                trace.frame_hw.to_string(),
                ep.seed.to_string(),
                ep.episode.to_string(),
                step.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.h.to_string(),
                s.w.to_string(),
                s.anchor.to_string(),
            ]);
        }
    }
    rows
}

const TRACE_HEADER: [&str; 9] =
    ["frame", "seed", "episode", "step", "x", "y", "h", "w", "anchor"];

pub fn eval(cfg: &RunConfig, checkpoint_path: &Path, dump_frames: usize) -> Result<()> {
    let started = Instant::now();
    let mut agent = build_agent(cfg, 0)?;
    // Verify the checkpoint against this config's architecture before
    // producing any output.
    checkpoint::load_into(checkpoint_path, agent.arch_hash(), agent.online_params_mut())
        .with_context(|| format!("loading {}", checkpoint_path.display()))?;
    agent.sync_target();

    let reference: Option<Vec<f64>> = match &cfg.eval_reference {
        Some(path) => Some(read_returns(path)?),
        None => None,
    };
    let policy = GreedyPolicy { agent: &agent };
    let (report, trace) = run_eval(
        &policy,
        &cfg.env,
        &cfg.pvm,
        cfg.agent.input_hw,
        cfg.eval_episodes,
        &cfg.seeds,
        reference.as_deref(),
    )?;

    let dir = &cfg.out_dir;
    let report_path = dir.join("report.csv");
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                r.episode.to_string(),
                r.return_env.to_string(),
                r.kl.to_string(),
            ]
        })
        .collect();
    write_csv(&report_path, &["seed", "episode", "return_env", "kl"], &rows)?;

    let summary = match report.normalized {
        Some(norm) => format!(
            "episodes = {}  iqm = {:.6}  normalized = {:.6}\n",
            report.rows.len(),
            report.iqm,
            norm
        ),
        None => format!("episodes = {}  iqm = {:.6}\n", report.rows.len(), report.iqm),
    };
    let summary_path = dir.join("summary.txt");
    atomic_write(&summary_path, summary.as_bytes())?;

    let trace_path = dir.join("trace.csv");
    write_csv(&trace_path, &TRACE_HEADER, &trace_rows(&trace))?;

    let mut artifacts = vec![
        ("report".to_string(), report_path),
        ("summary".to_string(), summary_path),
        ("trace".to_string(), trace_path),
    ];
    if dump_frames > 0 {
        artifacts.extend(dump_episode_frames(cfg, &agent, dump_frames)?);
    }
    RunManifest {
        config_hash: cfg.hash_hex(),
        seed: cfg.seeds.first().copied().unwrap_or(0),
        version: version_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        artifacts,
    }
    .write(&dir.join("manifest.txt"))?;
    print!("{summary}");
    Ok(())
}

fn read_returns(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_csv(path)?;
    let col = header
        .iter()
        .position(|h| h == "return_env")
        .ok_or_else(|| anyhow!("{} has no `return_env` column", path.display()))?;
    rows.iter()
        .map(|r| {
            r.get(col)
                .ok_or_else(|| anyhow!("short row in {}", path.display()))?
                .parse::<f64>()
                .map_err(|e| anyhow!("bad return in {}: {e}", path.display()))
        })
        .collect()
}

/// Greedy rollout of one episode, dumping full frames as numbered PGMs.
fn dump_episode_frames(
    cfg: &RunConfig,
    agent: &Agent,
    limit: usize,
) -> Result<Vec<(String, PathBuf)>> {
    use gaze_core::evalkit::EvalPolicy;
    let mut env = make_env(&cfg.env)?;
    let mut pipe = ObsPipeline::new(
        cfg.pvm.kind,
        cfg.pvm.window,
        cfg.env.frame_size,
        cfg.env.frame_stack,
        cfg.agent.input_hw,
    );
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let mut rng = gaze_core::evalkit::seeded_rng(seed);
    let packet = env.reset(seed);
    pipe.push(&packet)?;
    let policy = GreedyPolicy { agent };
    let mut artifacts = Vec::new();
    for step in 0..limit.min(cfg.env.max_episode_len) {
        let (motor, sensory) = policy.act(&pipe.input(), step, &mut rng);
        let out = env.step(motor, sensory)?;
        let path = cfg.out_dir.join(format!("frame_{step:04}.pgm"));
        atomic_write(&path, &env.full_frame().to_pgm())?;
        artifacts.push((format!("frame_{step:04}"), path));
        pipe.push(&out.packet)?;
        if out.done {
            break;
        }
    }
    Ok(artifacts)
}

pub fn analyze(traces: &[PathBuf], out: &Path) -> Result<()> {
    for path in traces {
        let trace = read_trace(path)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("trace")
            .to_string();
        let heatmap = trace.heatmap();
        let pgm_path = out.join(format!("{stem}-heatmap.pgm"));
        atomic_write(&pgm_path, &counts_to_pgm(&heatmap, trace.frame_hw, trace.frame_hw))?;

        let kl_path = out.join(format!("{stem}-kl.csv"));
        let rows: Vec<Vec<String>> = trace
            .episodes
            .iter()
            .map(|ep| {
                vec![
                    ep.seed.to_string(),
                    ep.episode.to_string(),
                    kl_to_uniform(&ep.anchor_histogram()).to_string(),
                ]
            })
            .collect();
        write_csv(&kl_path, &["seed", "episode", "kl"], &rows)?;
        let overall = kl_to_uniform(&trace.anchor_histogram());
        println!(
            "{}: {} episodes, {} steps, overall KL to uniform {overall:.4} -> {}, {}",
            path.display(),
            trace.episodes.len(),
            trace.total_steps(),
            pgm_path.display(),
            kl_path.display()
        );
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<SensoryTrace> {
    let (header, rows) = read_csv(path)?;
    if header != TRACE_HEADER {
        bail!("{} is not a sensory trace file", path.display());
    }
    let mut frame_hw = 0usize;
    let mut episodes: Vec<EpisodeTrace> = Vec::new();
    for row in rows {
        let get = |i: usize| -> Result<u64> {
            row.get(i)
                .ok_or_else(|| anyhow!("short row in {}", path.display()))?
                .parse::<u64>()
                .map_err(|e| anyhow!("bad trace value: {e}"))
        };
        frame_hw = get(0)? as usize;
        let (seed, episode) = (get(1)?, get(2)? as usize);
        let step = TraceStep {
            x: get(4)? as u16,
            y: get(5)? as u16,
            h: get(6)? as u16,
            w: get(7)? as u16,
            anchor: get(8)? as u8,
        };
        match episodes.last_mut() {
            Some(ep) if ep.seed == seed && ep.episode == episode => ep.steps.push(step),
            _ => episodes.push(EpisodeTrace { seed, episode, steps: vec![step] }),
        }
    }
    if episodes.is_empty() {
        bail!("{} holds no steps", path.display());
    }
    Ok(SensoryTrace { frame_hw, episodes })
}

/// The incremental ablation rows, in table order: each row toggles one design
/// component on top of the previous one.
fn ablation_rows(base: &AgentConfig, pvm: &PvmConfig) -> Vec<(&'static str, AgentConfig, PvmConfig)> {
    let off = PvmConfig { kind: PvmKind::Off, window: 1 };
    let rows: Vec<(&str, RewardMode, JointMode, PvmConfig, bool)> = vec![
        ("base", RewardMode::Off, JointMode::Separate, off, false),
        ("naive-positive-reward", RewardMode::Positive, JointMode::Separate, off, false),
        ("joint-learning", RewardMode::Positive, JointMode::Shared, off, false),
        ("negative-reward", RewardMode::Negative, JointMode::Shared, off, false),
        ("pvm", RewardMode::Negative, JointMode::Shared, *pvm, false),
        ("reward-balance", RewardMode::Negative, JointMode::Shared, *pvm, true),
    ];
    rows.into_iter()
        .map(|(name, reward, joint, pvm, balance)| {
            let cfg = AgentConfig {
                reward_mode: reward,
                joint,
                balance,
                ..base.clone()
            };
            (name, cfg, pvm)
        })
        .collect()
}

pub fn ablate(cfg: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let mut rows = Vec::new();
    for (name, agent_cfg, pvm_cfg) in ablation_rows(&cfg.agent, &cfg.pvm) {
        let mut finals = Vec::new();
        for &seed in &cfg.seeds {
            let out = trainer::train(
                gaze_core::agent::AgentKind::Dual,
                &cfg.env,
                &pvm_cfg,
                &agent_cfg,
                cfg.total_steps,
                seed,
            )?;
            finals.push(trainer::final_mean_return(&out.episodes, 10));
        }
        let mean = finals.iter().sum::<f32>() / finals.len() as f32;
        println!(
            "ablate {name:<22} reward={:<8?} joint={:?} pvm={:?} balance={} mean final-10 {mean:.2}",
            agent_cfg.reward_mode, agent_cfg.joint, pvm_cfg.kind, agent_cfg.balance
        );
        rows.push(vec![
            name.to_string(),
            format!("{:?}", agent_cfg.reward_mode).to_lowercase(),
            match agent_cfg.joint {
                JointMode::Shared => "shared".into(),
                JointMode::Separate => "separate".into(),
            },
            match pvm_cfg.kind {
                PvmKind::Stitch => "stitch".to_string(),
                PvmKind::Stack => "stack".to_string(),
                PvmKind::Off => "off".to_string(),
            },
            agent_cfg.balance.to_string(),
            finals.iter().map(f32::to_string).collect::<Vec<_>>().join(";"),
            mean.to_string(),
        ]);
    }
    let path = cfg.out_dir.join("ablation.csv");
    write_csv(
        &path,
        &["model", "reward_mode", "joint_learning", "pvm", "reward_balance", "per_seed", "mean_final10"],
        &rows,
    )?;
    RunManifest {
        config_hash: cfg.hash_hex(),
        seed: cfg.seeds.first().copied().unwrap_or(0),
        version: version_string(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        artifacts: vec![("ablation".into(), path.clone())],
    }
    .write(&cfg.out_dir.join("manifest.txt"))?;
    println!("ablation table -> {}", path.display());
    Ok(())
}

pub fn gradcheck(samples: usize, tolerance: f64) -> Result<()> {
    let reports = gc::run_suite(samples, tolerance);
    let mut ok = true;
    for r in &reports {
        println!("{}", r.line());
        ok &= r.pass();
    }
    if !ok {
        bail!("gradient check failed");
    }
    Ok(())
}

pub fn bench(steps: usize) -> Result<()> {
    use gaze_core::diffnet::{DualHeadNet, EncoderSpec, Tensor};
    use gaze_core::envkit::{EnvConfig, ToyKind};
    use gaze_core::par;

    let env_cfg = EnvConfig {
        name: ToyKind::Catch,
        fovea: (20, 20),
        foveal_res: (20, 20),
        frame_stack: 2,
        ..EnvConfig::default()
    };
    let mut env = make_env(&env_cfg)?;
    env.reset(0);
    let t0 = Instant::now();
    let mut t = 0usize;
    for _ in 0..steps {
        if env.step(t % 3, t % 16)?.done {
            env.reset(t as u64);
        }
        t += 1;
    }
    println!("env stepping:          {:>9.0} steps/s", steps as f64 / t0.elapsed().as_secs_f64());

    let spec = EncoderSpec::scaled(2, 36, [8, 16, 16], 64);
    let net: DualHeadNet<f32> = DualHeadNet::new(spec.clone(), 3, 16, 0);
    let xs = Tensor::from_vec(
        32,
        2,
        36,
        36,
        (0..32 * spec.input_len()).map(|i| (i % 97) as f32 / 97.0).collect(),
    );
    let iters = (steps / 10).max(20);
    let t0 = Instant::now();
    for _ in 0..iters {
        let _ = net.forward_batch(&xs);
    }
    let par_rate = iters as f64 / t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    for _ in 0..iters {
        let _: Vec<_> = par::map_indexed_seq(32, |i| net.forward_one(xs.sample(i)));
    }
    let seq_rate = iters as f64 / t0.elapsed().as_secs_f64();
    println!("batch-32 forward:      {par_rate:>9.1} batches/s parallel, {seq_rate:.1} sequential");

    let (_, _, caches) = net.forward_batch_cached(&xs);
    let dqs = Tensor::from_vec(32, 3, 1, 1, vec![0.1; 96]);
    let dqo = Tensor::from_vec(32, 16, 1, 1, vec![0.1; 512]);
    let t0 = Instant::now();
    for _ in 0..iters {
        let _ = net.backward_batch(&caches, &dqs, &dqo);
    }
    println!(
        "batch-32 backward:     {:>9.1} batches/s",
        iters as f64 / t0.elapsed().as_secs_f64()
    );
    Ok(())
}
