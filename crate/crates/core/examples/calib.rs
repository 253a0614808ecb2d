#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use gaze_core::agent::{trainer, AgentConfig, AgentKind, GreedyPolicy};
use gaze_core::envkit::{EnvConfig, ToyKind};
use gaze_core::evalkit::run_eval;
use gaze_core::pvm::{PvmConfig, PvmKind};
use std::time::Instant;

fn desk_agent() -> AgentConfig {
    let lr: f64 = std::env::var("LR").ok().and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    AgentConfig {
        eps_decay_steps: 20_000,
        learn_start: 5_000,
        replay_capacity: 20_000,
        input_hw: 36,
        conv_channels: [8, 16, 16],
        dense: 64,
        lr,
        reward_lr: lr,
        ..AgentConfig::default()
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("fullobs");
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(40_000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let fovea = if mode == "fullobs" { 84 } else { 20 };
    let env = EnvConfig {
        name: ToyKind::Catch,
        fovea: (fovea, fovea),
        foveal_res: (fovea, fovea),
        frame_stack: 2,
        ..EnvConfig::default()
    };
    let pvm = if mode == "fullobs" {
        PvmConfig { kind: PvmKind::Off, window: 1 }
    } else {
        PvmConfig::default()
    };
    let (kind, agent_cfg) = match mode {
        "fullobs" => (
            AgentKind::FixedSensory(gaze_core::evalkit::BaselineKind::Static(0)),
            desk_agent(),
        ),
        "sugarl" => (AgentKind::Dual, desk_agent()),
        "sugarl-unbal" => (AgentKind::Dual, AgentConfig { balance: false, ..desk_agent() }),
        "sugarl-pos" => (
            AgentKind::Dual,
            AgentConfig {
                balance: false,
                reward_mode: gaze_core::agent::RewardMode::Positive,
                ..desk_agent()
            },
        ),
        "random" => (
            AgentKind::FixedSensory(gaze_core::evalkit::BaselineKind::RandomView),
            desk_agent(),
        ),
        "single" => (AgentKind::SinglePolicy, desk_agent()),
        other => panic!("unknown mode {other}"),
    };

    let t0 = Instant::now();
    let out = trainer::train(kind, &env, &pvm, &agent_cfg, steps, seed).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let n = out.episodes.len();
    let final10 = trainer::final_mean_return(&out.episodes, 10);
    let max_ret = {
        let probe = gaze_core::envkit::make_env(&env).unwrap();
        probe.max_episode_return()
    };
    println!(
        "{mode} seed {seed}: {steps} steps in {dt:.0}s ({:.0}/s), {n} episodes, beta {:.3}",
        steps as f64 / dt,
        out.beta
    );
    println!("  final-10 train return: {final10:.2} (max possible {max_ret:.0})");
    for win in [0.25, 0.5, 0.75, 1.0] {
        let upto = ((n as f64) * win) as usize;
        let lo = upto.saturating_sub(10);
        let slice = &out.episodes[lo..upto.max(lo + 1).min(n)];
        let m: f32 = slice.iter().map(|e| e.return_env).sum::<f32>() / slice.len().max(1) as f32;
        print!("  r@{:.0}%={m:.1}", win * 100.0);
    }
    println!();
    let greedy = GreedyPolicy { agent: &out.agent };
    let (report, trace) = run_eval(&greedy, &env, &pvm, 36, 10, &[seed + 100], None).unwrap();
    println!(
        "  greedy eval IQM: {:.2}; sensory KL: {:.2}; rm_acc last: {:.2}",
        report.iqm,
        gaze_core::evalkit::kl_to_uniform(&trace.anchor_histogram()),
        out.episodes.last().map(|e| e.reward_module_accuracy).unwrap_or(0.0)
    );
}
