use gaze_core::diffnet::kernels::{matmul_acc, transpose};
use std::time::Instant;

fn bench_mm(label: &str, m: usize, k: usize, n: usize, iters: usize) {
    let a = vec![0.5f32; m * k];
    let b = vec![0.25f32; k * n];
    let mut c = vec![0.0f32; m * n];
    let t0 = Instant::now();
    for _ in 0..iters {
        matmul_acc(m, k, n, &a, &b, &mut c);
    }
    let dt = t0.elapsed().as_secs_f64();
    let gflops = (2.0 * m as f64 * k as f64 * n as f64 * iters as f64) / dt / 1e9;
    println!("{label:<34} {gflops:6.2} GF/s  ({:.1} us/call)", dt * 1e6 / iters as f64);
}

fn main() {
    // conv1 forward: W(8 x 256) * col(256 x 64)
    bench_mm("conv1 fwd m8 k256 n64", 8, 256, 64, 20000);
    // conv1 reward fwd: W(8 x 512) * col(512 x 64)
    bench_mm("conv1r fwd m8 k512 n64", 8, 512, 64, 20000);
    // conv1 dW: dY(8 x 64) * colT(64 x 256)
    bench_mm("conv1 dW m8 k64 n256", 8, 64, 256, 20000);
    // dWt variant: col(256 x 64) * dYt(64 x 8)
    bench_mm("conv1 dWt m256 k64 n8", 256, 64, 8, 20000);
    // dense-ish: x(1 x 1024) * W(1024 x 64)
    bench_mm("dense m1 k1024 n64", 1, 1024, 64, 20000);

    // transpose cost conv1 col (256 x 64)
    let src = vec![0.5f32; 256 * 64];
    let mut dst = vec![0.0f32; 256 * 64];
    let t0 = Instant::now();
    for _ in 0..20000 {
        transpose(256, 64, &src, &mut dst);
    }
    println!("transpose 256x64: {:.1} us/call", t0.elapsed().as_micros() as f64 / 20000.0);
    let src = vec![0.5f32; 512 * 64];
    let mut dst = vec![0.0f32; 512 * 64];
    let t0 = Instant::now();
    for _ in 0..20000 {
        transpose(512, 64, &src, &mut dst);
    }
    println!("transpose 512x64: {:.1} us/call", t0.elapsed().as_micros() as f64 / 20000.0);
}
