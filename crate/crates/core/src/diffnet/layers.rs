//! Layers of the standardized encoder: valid (unpadded) convolution, dense,
//! rectifier, and the softmax cross-entropy loss head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::kernels::{matmul_acc, transpose};
use super::Scalar;

fn uniform_fan_in<T: Scalar>(n: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let scale = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::from_f64(rng.random_range(-scale..scale))).collect()
}

/// 2-D convolution, no padding. Weights are `[out_ch][in_ch * k * k]`
/// row-major, matching the im2col patch layout.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut ChaCha8Rng,
    ) -> Conv2d<T> {
        let fan_in = in_ch * kernel * kernel;
        Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            weight: uniform_fan_in(out_ch * fan_in, fan_in, rng),
            bias: vec![T::zero(); out_ch],
        }
    }

    /// Output spatial extent: `floor((n - k) / s) + 1`.
    pub fn out_hw(&self, in_hw: usize) -> usize {
        assert!(in_hw >= self.kernel, "input {in_hw} smaller than kernel {}", self.kernel);
        (in_hw - self.kernel) / self.stride + 1
    }

    /// Rows of the im2col matrix: one per patch element.
    pub fn patch_len(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    /// Unrolls `x` (`in_ch * in_hw * in_hw`) into `col` with shape
    /// `patch_len x out_hw^2`.
    pub fn im2col(&self, x: &[T], in_hw: usize, col: &mut [T]) {
        let o = self.out_hw(in_hw);
        let p = o * o;
        debug_assert_eq!(x.len(), self.in_ch * in_hw * in_hw);
        debug_assert_eq!(col.len(), self.patch_len() * p);
        let mut q = 0;
        for ci in 0..self.in_ch {
            let plane = &x[ci * in_hw * in_hw..(ci + 1) * in_hw * in_hw];
            for ki in 0..self.kernel {
                for kj in 0..self.kernel {
                    let row = &mut col[q * p..(q + 1) * p];
                    for oi in 0..o {
                        let src = (oi * self.stride + ki) * in_hw + kj;
                        for oj in 0..o {
                            row[oi * o + oj] = plane[src + oj * self.stride];
                        }
                    }
                    q += 1;
                }
            }
        }
    }

    /// `out[out_ch x p] = weight * col + bias`, from a prepared im2col matrix.
    pub fn forward_from_col(&self, col: &[T], p: usize, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.out_ch * p);
        for (oc, &b) in self.bias.iter().enumerate() {
            out[oc * p..(oc + 1) * p].fill(b);
        }
        matmul_acc(self.out_ch, self.patch_len(), p, &self.weight, col, out);
    }

    pub fn forward(&self, x: &[T], in_hw: usize) -> Vec<T> {
        let o = self.out_hw(in_hw);
        let p = o * o;
        let mut col = vec![T::zero(); self.patch_len() * p];
        self.im2col(x, in_hw, &mut col);
        let mut out = vec![T::zero(); self.out_ch * p];
        self.forward_from_col(&col, p, &mut out);
        out
    }

    /// Transposed weights (`patch_len x out_ch`), shared across a batch when
    /// input gradients are needed.
    pub fn weight_t(&self) -> Vec<T> {
        let mut wt = vec![T::zero(); self.weight.len()];
        transpose(self.out_ch, self.patch_len(), &self.weight, &mut wt);
        wt
    }

    /// Accumulates parameter gradients from a cached im2col matrix and the
    /// upstream gradient `dy` (`out_ch x p`), and optionally back-propagates
    /// into `dx` using precomputed transposed weights. `col_t` and `dcol`
    /// are reusable scratch buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_ws(
        &self,
        col: &[T],
        dy: &[T],
        p: usize,
        dw: &mut [T],
        db: &mut [T],
        dx: Option<(&[T], &mut [T], usize)>,
        col_t: &mut Vec<T>,
        dcol: &mut Vec<T>,
    ) {
        let q = self.patch_len();
        // db: row sums of dy.
        for (oc, dbv) in db.iter_mut().enumerate() {
            let mut acc = T::zero();
            for &v in &dy[oc * p..(oc + 1) * p] {
                acc = acc + v;
            }
            *dbv = *dbv + acc;
        }
        // dW = dy * col^T.
        col_t.resize(q * p, T::zero());
        transpose(q, p, col, col_t);
        matmul_acc(self.out_ch, p, q, dy, col_t, dw);
        // dX = fold(W^T * dy) back onto the input grid.
        if let Some((wt, dx, in_hw)) = dx {
            dcol.resize(q * p, T::zero());
            dcol.fill(T::zero());
            matmul_acc(q, self.out_ch, p, wt, dy, dcol);
            self.col2im_acc(dcol, in_hw, dx);
        }
    }

    pub fn backward(
        &self,
        col: &[T],
        dy: &[T],
        p: usize,
        dw: &mut [T],
        db: &mut [T],
        dx: Option<(&[T], &mut [T], usize)>,
    ) {
        let mut col_t = Vec::new();
        let mut dcol = Vec::new();
        self.backward_ws(col, dy, p, dw, db, dx, &mut col_t, &mut dcol);
    }

    fn col2im_acc(&self, dcol: &[T], in_hw: usize, dx: &mut [T]) {
        let o = self.out_hw(in_hw);
        let p = o * o;
        let mut q = 0;
        for ci in 0..self.in_ch {
            let plane = &mut dx[ci * in_hw * in_hw..(ci + 1) * in_hw * in_hw];
            for ki in 0..self.kernel {
                for kj in 0..self.kernel {
                    let row = &dcol[q * p..(q + 1) * p];
                    for oi in 0..o {
                        let dst = (oi * self.stride + ki) * in_hw + kj;
                        for oj in 0..o {
                            let idx = dst + oj * self.stride;
                            plane[idx] = plane[idx] + row[oi * o + oj];
                        }
                    }
                    q += 1;
                }
            }
        }
    }
}

/// Fully-connected layer. Weights are `[in_f][out_f]` (input-major), so the
/// forward pass accumulates whole output rows at once.
#[derive(Clone, Debug)]
pub struct Dense<T> {
    pub in_f: usize,
    pub out_f: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_f: usize, out_f: usize, rng: &mut ChaCha8Rng) -> Dense<T> {
        Dense {
            in_f,
            out_f,
            weight: uniform_fan_in(in_f * out_f, in_f, rng),
            bias: vec![T::zero(); out_f],
        }
    }

    pub fn forward(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.in_f);
        debug_assert_eq!(out.len(), self.out_f);
        out.copy_from_slice(&self.bias);
        matmul_acc(1, self.in_f, self.out_f, x, &self.weight, out);
    }

    /// Transposed weights (`out_f x in_f`) for input gradients.
    pub fn weight_t(&self) -> Vec<T> {
        let mut wt = vec![T::zero(); self.weight.len()];
        transpose(self.in_f, self.out_f, &self.weight, &mut wt);
        wt
    }

    pub fn backward(
        &self,
        x: &[T],
        dy: &[T],
        dw: &mut [T],
        db: &mut [T],
        dx: Option<(&[T], &mut [T])>,
    ) {
        for (dbv, &g) in db.iter_mut().zip(dy) {
            *dbv = *dbv + g;
        }
        // dW[q][o] += x[q] * dy[o]: one axpy row per input feature.
        for (q, &xv) in x.iter().enumerate() {
            if xv != T::zero() {
                let row = &mut dw[q * self.out_f..(q + 1) * self.out_f];
                for (dwv, &g) in row.iter_mut().zip(dy) {
                    *dwv = *dwv + xv * g;
                }
            }
        }
        if let Some((wt, dx)) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g != T::zero() {
                    let row = &wt[o * self.in_f..(o + 1) * self.in_f];
                    for (dxv, &wv) in dx.iter_mut().zip(row) {
                        *dxv = *dxv + g * wv;
                    }
                }
            }
        }
    }
}

/// Rectifier, in place.
pub fn relu_inplace<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks the upstream gradient by the rectifier's active set (`y > 0`).
pub fn relu_backward<T: Scalar>(dy: &mut [T], y: &[T]) {
    for (g, &v) in dy.iter_mut().zip(y) {
        if v <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let mut sum = T::zero();
    for &v in &out {
        sum = sum + v;
    }
    for v in &mut out {
        *v = *v / sum;
    }
    out
}

/// Cross-entropy against a hard label. Returns the loss, the predicted
/// probability of the label (used by the sensorimotor reward), and the
/// gradient with respect to the logits. Panics if `label` is out of range.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> (T, T, Vec<T>) {
    assert!(label < logits.len(), "label {label} out of range for {} logits", logits.len());
    let mut grad = softmax(logits);
    let p = grad[label];
    let tiny = T::from_f64(1e-30);
    let loss = -(p.max(tiny)).ln();
    grad[label] = grad[label] - T::one();
    (loss, p, grad)
}
