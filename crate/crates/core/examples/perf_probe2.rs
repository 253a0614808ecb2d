#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use gaze_core::diffnet::{DualHeadNet, EncoderSpec, SingleHeadNet, Tensor};
use std::time::Instant;

fn time<F: FnMut()>(label: &str, iters: usize, mut f: F) {
    let t0 = Instant::now();
    for _ in 0..iters {
        f();
    }
    println!("{label:<28} {:8.1} us", t0.elapsed().as_micros() as f64 / iters as f64);
}

fn main() {
    let spec = EncoderSpec::scaled(4, 36, [8, 16, 16], 64);
    let net: DualHeadNet<f32> = DualHeadNet::new(spec.clone(), 3, 16, 0);
    let xs = Tensor::from_vec(
        32, 4, 36, 36,
        (0..32 * spec.input_len()).map(|i| (i % 251) as f32 / 251.0).collect(),
    );
    let dqs = Tensor::from_vec(32, 3, 1, 1, vec![0.1; 96]);
    let dqo = Tensor::from_vec(32, 16, 1, 1, vec![0.1; 512]);

    time("policy fwd_cached b32", 100, || {
        let _ = net.forward_batch_cached(&xs);
    });
    time("policy fwd (nocache) b32", 100, || {
        let _ = net.forward_batch(&xs);
    });
    let (_, _, caches) = net.forward_batch_cached(&xs);
    time("policy backward b32", 100, || {
        let _ = net.backward_batch(&caches, &dqs, &dqo);
    });

    let rspec = EncoderSpec::scaled(8, 36, [8, 16, 16], 64);
    let rnet: SingleHeadNet<f32> = SingleHeadNet::new(rspec.clone(), 3, 0);
    let rx = Tensor::from_vec(
        32, 8, 36, 36,
        (0..32 * rspec.input_len()).map(|i| (i % 251) as f32 / 251.0).collect(),
    );
    time("reward fwd b32", 100, || {
        let _ = rnet.forward_batch(&rx);
    });
    let (_, rcaches) = rnet.forward_batch_cached(&rx);
    let rdy = Tensor::from_vec(32, 3, 1, 1, vec![0.1; 96]);
    time("reward backward b32", 100, || {
        let _ = rnet.backward_batch(&rcaches, &rdy);
    });
}
