//! Parallel-versus-sequential benchmarks for the compute-heavy inner loops:
//! batch forward/backward through the dual-head net, PVM canvas rebuilds,
//! and greedy evaluation rollouts.
//!
//! Run with `cargo bench -p gaze-core`. The indexed-map helpers fan out over
//! rayon under the default `parallel` feature; the `*_seq` twins always run
//! inline, so one build measures both paths.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gaze_core::diffnet::{DualHeadNet, EncoderSpec, Tensor};
use gaze_core::envkit::{make_env, EnvConfig, ToyKind};
use gaze_core::par;
use gaze_core::pvm::{ObsPipeline, PvmBuffer, PvmConfig, PvmKind};
use gaze_core::evalkit::{run_eval, BaselineActor, BaselineKind};
use gaze_core::Image;

fn desk_net() -> (DualHeadNet<f32>, Tensor<f32>) {
    let spec = EncoderSpec::scaled(4, 36, [8, 16, 16], 64);
    let net = DualHeadNet::new(spec.clone(), 3, 16, 0);
    let data: Vec<f32> = (0..32 * spec.input_len())
        .map(|i| (i % 251) as f32 / 251.0)
        .collect();
    (net, Tensor::from_vec(32, 4, 36, 36, data))
}

fn bench_batch_forward(c: &mut Criterion) {
    let (net, xs) = desk_net();
    let mut group = c.benchmark_group("batch_forward_32");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(net.forward_batch(black_box(&xs))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let rows = par::map_indexed_seq(xs.batch(), |i| net.forward_one(xs.sample(i)));
            black_box(rows)
        })
    });
    group.finish();
}

fn bench_train_step(c: &mut Criterion) {
    let (net, xs) = desk_net();
    let mut group = c.benchmark_group("forward_backward_32");
    group.sample_size(20);
    let dqs = Tensor::from_vec(32, 3, 1, 1, vec![0.1; 96]);
    let dqo = Tensor::from_vec(32, 16, 1, 1, vec![0.1; 512]);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let (_, _, caches) = net.forward_batch_cached(&xs);
            black_box(net.backward_batch(&caches, &dqs, &dqo))
        })
    });
    group.finish();
}

fn bench_pvm_stitch(c: &mut Criterion) {
    let mut group = c.benchmark_group("pvm_stitch_canvas");
    group.bench_function("push_and_rebuild", |b| {
        let mut buf = PvmBuffer::new(3, 84, 84);
        let obs = Image::constant(20, 20, 0.5);
        let mut k = 0usize;
        b.iter(|| {
            let loc = ((k * 13) % 64, (k * 7) % 64);
            k += 1;
            black_box(buf.push_stitch(obs.clone(), loc).unwrap())
        })
    });
    group.finish();
}

fn bench_pipeline_step(c: &mut Criterion) {
    let cfg = EnvConfig {
        name: ToyKind::Catch,
        fovea: (20, 20),
        foveal_res: (20, 20),
        ..EnvConfig::default()
    };
    let mut group = c.benchmark_group("env_plus_pipeline_step");
    group.bench_function("step", |b| {
        let mut env = make_env(&cfg).unwrap();
        let mut pipe = ObsPipeline::new(PvmKind::Stitch, 3, 84, 4, 36);
        let packet = env.reset(0);
        pipe.push(&packet).unwrap();
        let mut t = 0usize;
        b.iter(|| {
            if env.step(t % 3, t % 16).map(|o| o.done).unwrap_or(true) {
                let packet = env.reset(t as u64);
                pipe.reset();
                pipe.push(&packet).unwrap();
            } else {
                // keep the pipeline warm with the latest packet
            }
            t += 1;
            black_box(pipe.input())
        })
    });
    group.finish();
}

fn bench_eval_rollouts(c: &mut Criterion) {
    let cfg = EnvConfig {
        name: ToyKind::Catch,
        fovea: (20, 20),
        foveal_res: (20, 20),
        max_episode_len: 50,
        ..EnvConfig::default()
    };
    let pvm = PvmConfig { kind: PvmKind::Stitch, window: 3 };
    let actor = BaselineActor { sensory: BaselineKind::RandomView, n_motor: 3 };
    let mut group = c.benchmark_group("eval_rollouts_8x50");
    group.sample_size(10);
    group.bench_function("parallel_feature", |b| {
        b.iter(|| black_box(run_eval(&actor, &cfg, &pvm, 36, 4, &[1, 2], None).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_batch_forward,
    bench_train_step,
    bench_pvm_stitch,
    bench_pipeline_step,
    bench_eval_rollouts
);
criterion_main!(benches);
