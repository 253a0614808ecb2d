use gaze_core::diffnet::{Conv2d, Dense, EncoderSpec};
use gaze_core::diffnet::net::Encoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Policy conv1: 4 ch in, 8 out, k8 s4, input 36.
    let conv: Conv2d<f32> = Conv2d::new(4, 8, 8, 4, &mut rng);
    let x: Vec<f32> = (0..4 * 36 * 36).map(|i| (i % 97) as f32 / 97.0).collect();
    let p = 8 * 8;
    let q = conv.patch_len();
    let mut col = vec![0.0f32; q * p];
    let iters = 20000;

    let t0 = Instant::now();
    for _ in 0..iters {
        conv.im2col(black_box(&x), 36, black_box(&mut col));
    }
    println!("im2col conv1 (4ch):   {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    let mut out = vec![0.0f32; 8 * p];
    let t0 = Instant::now();
    for _ in 0..iters {
        conv.forward_from_col(black_box(&col), p, black_box(&mut out));
    }
    println!("gemm conv1 fwd:       {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    // Reward conv1: 8 ch.
    let conv8: Conv2d<f32> = Conv2d::new(8, 8, 8, 4, &mut rng);
    let x8: Vec<f32> = (0..8 * 36 * 36).map(|i| (i % 97) as f32 / 97.0).collect();
    let q8 = conv8.patch_len();
    let mut col8 = vec![0.0f32; q8 * p];
    let t0 = Instant::now();
    for _ in 0..iters {
        conv8.im2col(black_box(&x8), 36, black_box(&mut col8));
    }
    println!("im2col conv1 (8ch):   {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    // conv1 backward pieces.
    let dy = vec![0.1f32; 8 * p];
    let mut dw = vec![0.0f32; conv8.weight.len()];
    let mut db = vec![0.0f32; 8];
    let mut col_t = Vec::new();
    let mut dcol = Vec::new();
    let t0 = Instant::now();
    for _ in 0..iters {
        conv8.backward_ws(black_box(&col8), black_box(&dy), p, &mut dw, &mut db, None, &mut col_t, &mut dcol);
    }
    println!("conv1(8ch) backward:  {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    // Whole encoder forward, single sample.
    let spec = EncoderSpec::scaled(4, 36, [8, 16, 16], 64);
    let enc: Encoder<f32> = Encoder::new(spec.clone(), &mut rng);
    let t0 = Instant::now();
    for _ in 0..iters {
        black_box(enc.forward_one(black_box(&x)));
    }
    println!("encoder fwd_one:      {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);
    let t0 = Instant::now();
    for _ in 0..iters {
        black_box(enc.forward_cached_one(black_box(&x)));
    }
    println!("encoder fwd_cached:   {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    // Dense layer of the standard net for comparison.
    let dense: Dense<f32> = Dense::new(16, 64, &mut rng);
    let din = vec![0.5f32; 16];
    let mut dout = vec![0.0f32; 64];
    let t0 = Instant::now();
    for _ in 0..iters {
        dense.forward(black_box(&din), black_box(&mut dout));
    }
    println!("dense 16->64 fwd:     {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);
}
