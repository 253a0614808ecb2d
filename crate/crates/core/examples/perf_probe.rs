#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use gaze_core::agent::{trainer, AgentConfig, AgentKind};
use gaze_core::envkit::{EnvConfig, ToyKind};
use gaze_core::pvm::PvmConfig;
use std::time::Instant;

fn main() {
    let fs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let env = EnvConfig {
        name: ToyKind::Catch,
        fovea: (20, 20),
        foveal_res: (20, 20),
        frame_stack: fs,
        ..EnvConfig::default()
    };
    let agent = AgentConfig {
        eps_decay_steps: 2_000,
        learn_start: 500,
        replay_capacity: 20_000,
        input_hw: 36,
        conv_channels: [8, 16, 16],
        dense: 64,
        ..AgentConfig::default()
    };
    let t0 = Instant::now();
    trainer::train(AgentKind::Dual, &env, &PvmConfig::default(), &agent, 4_000, 1).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    trainer::train(AgentKind::Dual, &env, &PvmConfig::default(), &agent, 8_000, 2).unwrap();
    let dt2 = t1.elapsed().as_secs_f64();
    let steady = 4_000.0 / (dt2 - dt);
    println!("frame_stack={fs}: steady {steady:.0} steps/s; 200k run {:.1} min; 25 seq runs {:.2} h",
        200_000.0 / steady / 60.0, 25.0 * 200_000.0 / steady / 3600.0);
}
