use gaze_core::diffnet::kernels::{matmul_acc, transpose};
use std::hint::black_box;
use std::time::Instant;

fn main() {
    let iters = 20000;
    // Reward conv1 backward shapes: q=512, p=64.
    let col = vec![0.5f32; 512 * 64];
    let mut col_t = vec![0.0f32; 512 * 64];
    let t0 = Instant::now();
    for _ in 0..iters {
        transpose(512, 64, black_box(&col), black_box(&mut col_t));
    }
    println!("transpose 512x64:  {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);

    let dy = vec![0.1f32; 8 * 64];
    let mut dw = vec![0.0f32; 8 * 512];
    let t0 = Instant::now();
    for _ in 0..iters {
        matmul_acc(8, 64, 512, black_box(&dy), black_box(&col_t), black_box(&mut dw));
        dw.fill(0.0);
    }
    println!("dW gemm m8k64n512: {:6.2} us (incl fill)", t0.elapsed().as_micros() as f64 / iters as f64);

    let t0 = Instant::now();
    for _ in 0..iters {
        dw.fill(0.0);
    }
    println!("fill only:         {:6.2} us", t0.elapsed().as_micros() as f64 / iters as f64);
}
