//! Network assemblies: the standardized convolutional encoder, the dual-head
//! Q-network, and the single-head variant used by the reward module and the
//! baseline agents.
//!
//! Batch work is processed in fixed chunks (not thread-count dependent):
//! each chunk walks its samples sequentially with one reusable workspace,
//! and chunk results are reduced in index order. Enabling the `parallel`
//! feature therefore changes scheduling, never results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::par;

use super::layers::{relu_backward, relu_inplace, Conv2d, Dense};
use super::tensor::Tensor;
use super::Scalar;

/// One convolution stage of the encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvShape {
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Architecture of the shared visual encoder: three valid convolutions, each
/// followed by a rectifier, then a dense layer with rectifier.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    pub in_ch: usize,
    pub in_hw: usize,
    pub convs: Vec<ConvShape>,
    pub dense: usize,
}

impl EncoderSpec {
    /// The standardized encoder: 84x84 input, conv 32/8/4, 64/4/2, 64/3/1,
    /// dense 512.
    pub fn standard(in_ch: usize) -> EncoderSpec {
        EncoderSpec {
            in_ch,
            in_hw: 84,
            convs: vec![
                ConvShape { out_ch: 32, kernel: 8, stride: 4 },
                ConvShape { out_ch: 64, kernel: 4, stride: 2 },
                ConvShape { out_ch: 64, kernel: 3, stride: 1 },
            ],
            dense: 512,
        }
    }

    /// Same kernel geometry at a reduced input size and width. Panics if the
    /// input is too small for the three-stage stack.
    pub fn scaled(in_ch: usize, in_hw: usize, channels: [usize; 3], dense: usize) -> EncoderSpec {
        let spec = EncoderSpec {
            in_ch,
            in_hw,
            convs: vec![
                ConvShape { out_ch: channels[0], kernel: 8, stride: 4 },
                ConvShape { out_ch: channels[1], kernel: 4, stride: 2 },
                ConvShape { out_ch: channels[2], kernel: 3, stride: 1 },
            ],
            dense,
        };
        spec.conv_out_hws();
        spec
    }

    /// Spatial extent after each convolution (`floor((n - k) / s) + 1`).
    pub fn conv_out_hws(&self) -> Vec<usize> {
        let mut hw = self.in_hw;
        self.convs
            .iter()
            .map(|c| {
                assert!(hw >= c.kernel, "input {hw} too small for kernel {}", c.kernel);
                hw = (hw - c.kernel) / c.stride + 1;
                hw
            })
            .collect()
    }

    /// Flattened length feeding the dense layer.
    pub fn flat_len(&self) -> usize {
        let hw = *self.conv_out_hws().last().expect("at least one conv");
        self.convs.last().unwrap().out_ch * hw * hw
    }

    pub fn input_len(&self) -> usize {
        self.in_ch * self.in_hw * self.in_hw
    }

    pub fn arch_string(&self) -> String {
        let mut s = format!("in{}x{}c{}", self.in_hw, self.in_hw, self.in_ch);
        for c in &self.convs {
            s.push_str(&format!("|conv{}k{}s{}", c.out_ch, c.kernel, c.stride));
        }
        s.push_str(&format!("|dense{}", self.dense));
        s
    }
}

/// Gradient buffers matching a network's parameter slots, in declaration
/// order.
#[derive(Clone, Debug)]
pub struct Grads<T> {
    pub slots: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(params: &[&[T]]) -> Grads<T> {
        Grads { slots: params.iter().map(|p| vec![T::zero(); p.len()]).collect() }
    }

    pub fn add(&mut self, other: &Grads<T>) {
        debug_assert_eq!(self.slots.len(), other.slots.len());
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (av, &bv) in a.iter_mut().zip(b) {
                *av = *av + bv;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for slot in &mut self.slots {
            for v in slot {
                *v = *v * s;
            }
        }
    }
}

/// Uniform access to a network's parameters in declaration order, used by the
/// optimizer, the checkpoint format and target-network syncing.
pub trait Params<T: Scalar> {
    fn param_slices(&self) -> Vec<&[T]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [T]>;

    fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Copies parameters from `src`, bit-exact.
    fn copy_params_from(&mut self, src: &Self) {
        let from = src.param_slices();
        let mut to = self.param_slices_mut();
        assert_eq!(from.len(), to.len());
        for (dst, src) in to.iter_mut().zip(from) {
            dst.copy_from_slice(src);
        }
    }
}

/// Reusable buffers for one worker's pass over a chunk of samples.
struct Workspace<T> {
    col: Vec<T>,
    act_a: Vec<T>,
    act_b: Vec<T>,
    features: Vec<T>,
    col_t: Vec<T>,
    dcol: Vec<T>,
    grad_a: Vec<T>,
    grad_b: Vec<T>,
    dfeat: Vec<T>,
}

impl<T> Default for Workspace<T> {
    fn default() -> Self {
        Workspace {
            col: Vec::new(),
            act_a: Vec::new(),
            act_b: Vec::new(),
            features: Vec::new(),
            col_t: Vec::new(),
            dcol: Vec::new(),
            grad_a: Vec::new(),
            grad_b: Vec::new(),
            dfeat: Vec::new(),
        }
    }
}

fn resized<T: Scalar>(buf: &mut Vec<T>, len: usize) -> &mut [T] {
    buf.resize(len, T::zero());
    &mut buf[..len]
}

/// The shared conv stem plus dense projection.
#[derive(Clone, Debug)]
pub struct Encoder<T> {
    pub spec: EncoderSpec,
    pub convs: Vec<Conv2d<T>>,
    pub dense: Dense<T>,
}

pub struct EncCache<T> {
    /// Per conv: the im2col matrix of its input.
    cols: Vec<Vec<T>>,
    /// Per conv: post-rectifier output.
    acts: Vec<Vec<T>>,
    /// Post-rectifier dense output.
    pub features: Vec<T>,
}

/// Per-batch transposed weights for input-gradient accumulation.
pub struct EncTables<T> {
    conv_wt: Vec<Vec<T>>,
    dense_wt: Vec<T>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(spec: EncoderSpec, rng: &mut ChaCha8Rng) -> Encoder<T> {
        let mut convs = Vec::with_capacity(spec.convs.len());
        let mut in_ch = spec.in_ch;
        for c in &spec.convs {
            convs.push(Conv2d::new(in_ch, c.out_ch, c.kernel, c.stride, rng));
            in_ch = c.out_ch;
        }
        let dense = Dense::new(spec.flat_len(), spec.dense, rng);
        Encoder { spec, convs, dense }
    }

    pub fn feature_len(&self) -> usize {
        self.spec.dense
    }

    fn in_hws(&self) -> Vec<usize> {
        let mut v = vec![self.spec.in_hw];
        v.extend(self.spec.conv_out_hws());
        v
    }

    /// Forward pass leaving the features in `ws.features`.
    fn forward_ws(&self, x: &[T], ws: &mut Workspace<T>) {
        let hws = self.in_hws();
        for (i, conv) in self.convs.iter().enumerate() {
            let o = hws[i + 1];
            let p = o * o;
            {
                let col = resized(&mut ws.col, conv.patch_len() * p);
                let input = if i == 0 { x } else if i % 2 == 1 { &ws.act_a } else { &ws.act_b };
                conv.im2col(input, hws[i], col);
            }
            let out = if i % 2 == 0 { &mut ws.act_a } else { &mut ws.act_b };
            out.resize(conv.out_ch * p, T::zero());
            conv.forward_from_col(&ws.col, p, out);
            relu_inplace(out);
        }
        let last = if self.convs.len() % 2 == 1 { &ws.act_a } else { &ws.act_b };
        ws.features.resize(self.spec.dense, T::zero());
        self.dense.forward(last, &mut ws.features);
        relu_inplace(&mut ws.features);
    }

    pub fn forward_one(&self, x: &[T]) -> Vec<T> {
        let mut ws = Workspace::default();
        self.forward_ws(x, &mut ws);
        ws.features
    }

    /// Forward pass that retains what backward needs.
    pub fn forward_cached_one(&self, x: &[T]) -> EncCache<T> {
        let hws = self.in_hws();
        let mut cols = Vec::with_capacity(self.convs.len());
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let input = if i == 0 { x } else { acts[i - 1].as_slice() };
            let o = hws[i + 1];
            let p = o * o;
            let mut col = vec![T::zero(); conv.patch_len() * p];
            conv.im2col(input, hws[i], &mut col);
            let mut out = vec![T::zero(); conv.out_ch * p];
            conv.forward_from_col(&col, p, &mut out);
            relu_inplace(&mut out);
            cols.push(col);
            acts.push(out);
        }
        let mut features = vec![T::zero(); self.spec.dense];
        self.dense.forward(acts.last().unwrap(), &mut features);
        relu_inplace(&mut features);
        EncCache { cols, acts, features }
    }

    pub fn back_tables(&self) -> EncTables<T> {
        EncTables {
            conv_wt: self.convs.iter().skip(1).map(|c| c.weight_t()).collect(),
            dense_wt: self.dense.weight_t(),
        }
    }

    /// Accumulates gradients into `grads[0..slot_count]` given the feature
    /// gradient (consumed in `ws.dfeat`). The input gradient is not produced;
    /// nothing sits below the encoder.
    fn backward_ws(
        &self,
        cache: &EncCache<T>,
        tables: &EncTables<T>,
        ws: &mut Workspace<T>,
        grads: &mut [Vec<T>],
    ) {
        let hws = self.in_hws();
        let n = self.convs.len();
        relu_backward(&mut ws.dfeat, &cache.features);
        let dense_slot = 2 * n;
        {
            let dflat = resized(&mut ws.grad_a, self.dense.in_f);
            dflat.fill(T::zero());
            let (dw, rest) = grads[dense_slot..].split_first_mut().unwrap();
            let db = &mut rest[0];
            self.dense.backward(
                cache.acts.last().unwrap(),
                &ws.dfeat,
                dw,
                db,
                Some((&tables.dense_wt, dflat)),
            );
        }
        // grad_a holds the gradient flowing into conv layer `n-1`'s output.
        let mut cur_in_a = true;
        for i in (0..n).rev() {
            let dcur = if cur_in_a { &mut ws.grad_a } else { &mut ws.grad_b };
            relu_backward(dcur, &cache.acts[i]);
            let o = hws[i + 1];
            let p = o * o;
            let (head, tail) = grads.split_at_mut(2 * i + 1);
            let dw = head.last_mut().unwrap();
            let db = &mut tail[0];
            if i > 0 {
                let dprev_len = self.convs[i].in_ch * hws[i] * hws[i];
                let (dcur, dprev) = if cur_in_a {
                    (&ws.grad_a, resized(&mut ws.grad_b, dprev_len))
                } else {
                    (&ws.grad_b, resized(&mut ws.grad_a, dprev_len))
                };
                dprev.fill(T::zero());
                self.convs[i].backward_ws(
                    &cache.cols[i],
                    dcur,
                    p,
                    dw,
                    db,
                    Some((&tables.conv_wt[i - 1], dprev, hws[i])),
                    &mut ws.col_t,
                    &mut ws.dcol,
                );
                cur_in_a = !cur_in_a;
            } else {
                let dcur = if cur_in_a { &ws.grad_a } else { &ws.grad_b };
                self.convs[i].backward_ws(
                    &cache.cols[i],
                    dcur,
                    p,
                    dw,
                    db,
                    None,
                    &mut ws.col_t,
                    &mut ws.dcol,
                );
            }
        }
    }

    fn slot_count(&self) -> usize {
        2 * self.convs.len() + 2
    }
}

impl<T: Scalar> Params<T> for Encoder<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut v = Vec::with_capacity(self.slot_count());
        for c in &self.convs {
            v.push(c.weight.as_slice());
            v.push(c.bias.as_slice());
        }
        v.push(self.dense.weight.as_slice());
        v.push(self.dense.bias.as_slice());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = Vec::new();
        for c in &mut self.convs {
            v.push(c.weight.as_mut_slice());
            v.push(c.bias.as_mut_slice());
        }
        v.push(self.dense.weight.as_mut_slice());
        v.push(self.dense.bias.as_mut_slice());
        v
    }
}

/// Feature extractor: the conv encoder, or a pass-through stub for tabular
/// tests where the heads read the raw input.
#[derive(Clone, Debug)]
pub enum Backbone<T> {
    Conv(Encoder<T>),
    Identity { features: usize },
}

pub enum BackboneCache<T> {
    Conv(EncCache<T>),
    Identity(Vec<T>),
}

pub enum BackboneTables<T> {
    Conv(EncTables<T>),
    Identity,
}

impl<T: Scalar> Backbone<T> {
    pub fn feature_len(&self) -> usize {
        match self {
            Backbone::Conv(e) => e.feature_len(),
            Backbone::Identity { features } => *features,
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Backbone::Conv(e) => e.spec.input_len(),
            Backbone::Identity { features } => *features,
        }
    }

    /// Runs forward, returning a reference to the features (either inside
    /// the workspace or the input itself).
    fn forward_ws<'a>(&self, x: &'a [T], ws: &'a mut Workspace<T>) -> &'a [T] {
        match self {
            Backbone::Conv(e) => {
                e.forward_ws(x, ws);
                &ws.features
            }
            Backbone::Identity { .. } => x,
        }
    }

    fn forward_cached_one(&self, x: &[T]) -> BackboneCache<T> {
        match self {
            Backbone::Conv(e) => BackboneCache::Conv(e.forward_cached_one(x)),
            Backbone::Identity { .. } => BackboneCache::Identity(x.to_vec()),
        }
    }

    fn features<'a>(&self, cache: &'a BackboneCache<T>) -> &'a [T] {
        match cache {
            BackboneCache::Conv(c) => &c.features,
            BackboneCache::Identity(x) => x,
        }
    }

    fn back_tables(&self) -> BackboneTables<T> {
        match self {
            Backbone::Conv(e) => BackboneTables::Conv(e.back_tables()),
            Backbone::Identity { .. } => BackboneTables::Identity,
        }
    }

    /// Consumes the feature gradient in `ws.dfeat`.
    fn backward_ws(
        &self,
        cache: &BackboneCache<T>,
        tables: &BackboneTables<T>,
        ws: &mut Workspace<T>,
        grads: &mut [Vec<T>],
    ) {
        match (self, cache, tables) {
            (Backbone::Conv(e), BackboneCache::Conv(c), BackboneTables::Conv(t)) => {
                e.backward_ws(c, t, ws, grads)
            }
            (Backbone::Identity { .. }, _, _) => {}
            _ => unreachable!("backbone cache mismatch"),
        }
    }

    fn slot_count(&self) -> usize {
        match self {
            Backbone::Conv(e) => e.slot_count(),
            Backbone::Identity { .. } => 0,
        }
    }

    fn arch_string(&self) -> String {
        match self {
            Backbone::Conv(e) => e.spec.arch_string(),
            Backbone::Identity { features } => format!("identity{features}"),
        }
    }
}

impl<T: Scalar> Params<T> for Backbone<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        match self {
            Backbone::Conv(e) => e.param_slices(),
            Backbone::Identity { .. } => Vec::new(),
        }
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Backbone::Conv(e) => e.param_slices_mut(),
            Backbone::Identity { .. } => Vec::new(),
        }
    }
}

/// How many samples each fixed work chunk covers; chunking is independent of
/// the thread count so float sums associate identically everywhere.
const BATCH_CHUNKS: usize = 8;

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    let chunks = BATCH_CHUNKS.min(n.max(1));
    let per = n.div_ceil(chunks);
    (0..chunks)
        .map(|c| (c * per, ((c + 1) * per).min(n)))
        .filter(|(lo, hi)| lo < hi)
        .collect()
}

/// Shared encoder stem with separate motor-Q and sensory-Q heads. Both heads
/// read the same features.
#[derive(Clone, Debug)]
pub struct DualHeadNet<T> {
    pub backbone: Backbone<T>,
    pub head_motor: Dense<T>,
    pub head_sensory: Dense<T>,
}

pub struct DualCache<T> {
    backbone: BackboneCache<T>,
}

impl<T: Scalar> DualHeadNet<T> {
    pub fn new(spec: EncoderSpec, n_motor: usize, n_sensory: usize, seed: u64) -> DualHeadNet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::Conv(Encoder::new(spec, &mut rng));
        let features = backbone.feature_len();
        DualHeadNet {
            backbone,
            head_motor: Dense::new(features, n_motor, &mut rng),
            head_sensory: Dense::new(features, n_sensory, &mut rng),
        }
    }

    /// Tabular variant: heads read the flattened input directly.
    pub fn with_identity(
        features: usize,
        n_motor: usize,
        n_sensory: usize,
        seed: u64,
    ) -> DualHeadNet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DualHeadNet {
            backbone: Backbone::Identity { features },
            head_motor: Dense::new(features, n_motor, &mut rng),
            head_sensory: Dense::new(features, n_sensory, &mut rng),
        }
    }

    pub fn n_motor(&self) -> usize {
        self.head_motor.out_f
    }

    pub fn n_sensory(&self) -> usize {
        self.head_sensory.out_f
    }

    pub fn arch_string(&self) -> String {
        format!(
            "{}|qheads{}+{}",
            self.backbone.arch_string(),
            self.n_motor(),
            self.n_sensory()
        )
    }

    fn heads_from(&self, features: &[T]) -> (Vec<T>, Vec<T>) {
        let mut qs = vec![T::zero(); self.n_motor()];
        let mut qo = vec![T::zero(); self.n_sensory()];
        self.head_motor.forward(features, &mut qs);
        self.head_sensory.forward(features, &mut qo);
        (qs, qo)
    }

    pub fn forward_one(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let mut ws = Workspace::default();
        let features = self.backbone.forward_ws(x, &mut ws);
        self.heads_from(features)
    }

    /// Batch forward without caches (target values, greedy evaluation).
    pub fn forward_batch(&self, xs: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
        let ranges = chunk_ranges(xs.batch());
        let chunks = par::map_slice(&ranges, |&(lo, hi)| {
            let mut ws = Workspace::default();
            (lo..hi)
                .map(|i| {
                    let features = self.backbone.forward_ws(xs.sample(i), &mut ws);
                    self.heads_from(features)
                })
                .collect::<Vec<_>>()
        });
        let mut qs_rows = Vec::with_capacity(xs.batch());
        let mut qo_rows = Vec::with_capacity(xs.batch());
        for chunk in chunks {
            for (qs, qo) in chunk {
                qs_rows.push(qs);
                qo_rows.push(qo);
            }
        }
        (Tensor::from_rows(qs_rows), Tensor::from_rows(qo_rows))
    }

    pub fn forward_batch_cached(
        &self,
        xs: &Tensor<T>,
    ) -> (Tensor<T>, Tensor<T>, Vec<DualCache<T>>) {
        let ranges = chunk_ranges(xs.batch());
        let chunks = par::map_slice(&ranges, |&(lo, hi)| {
            (lo..hi)
                .map(|i| {
                    let cache = self.backbone.forward_cached_one(xs.sample(i));
                    let (qs, qo) = self.heads_from(self.backbone.features(&cache));
                    (qs, qo, DualCache { backbone: cache })
                })
                .collect::<Vec<_>>()
        });
        let mut qs_rows = Vec::with_capacity(xs.batch());
        let mut qo_rows = Vec::with_capacity(xs.batch());
        let mut caches = Vec::with_capacity(xs.batch());
        for chunk in chunks {
            for (qs, qo, c) in chunk {
                qs_rows.push(qs);
                qo_rows.push(qo);
                caches.push(c);
            }
        }
        (Tensor::from_rows(qs_rows), Tensor::from_rows(qo_rows), caches)
    }

    /// Accumulates parameter gradients over the batch given per-sample
    /// gradients on both heads' outputs.
    pub fn backward_batch(
        &self,
        caches: &[DualCache<T>],
        dqs: &Tensor<T>,
        dqo: &Tensor<T>,
    ) -> Grads<T> {
        let tables = self.backbone.back_tables();
        let wt_motor = self.head_motor.weight_t();
        let wt_sensory = self.head_sensory.weight_t();
        let ranges = chunk_ranges(caches.len());
        let params = self.param_slices();
        let nb = self.backbone.slot_count();
        let mut partials = par::map_slice(&ranges, |&(lo, hi)| {
            let mut grads = Grads::zeros_like(&params);
            let mut ws = Workspace::default();
            for i in lo..hi {
                let cache = &caches[i].backbone;
                let features = self.backbone.features(cache);
                let dfeat = resized(&mut ws.dfeat, features.len());
                dfeat.fill(T::zero());
                {
                    let (_, head_slots) = grads.slots.split_at_mut(nb);
                    let (m, s) = head_slots.split_at_mut(2);
                    let (mw, mb) = m.split_at_mut(1);
                    self.head_motor.backward(
                        features,
                        dqs.sample(i),
                        &mut mw[0],
                        &mut mb[0],
                        Some((&wt_motor, dfeat)),
                    );
                    let (sw, sb) = s.split_at_mut(1);
                    self.head_sensory.backward(
                        features,
                        dqo.sample(i),
                        &mut sw[0],
                        &mut sb[0],
                        Some((&wt_sensory, dfeat)),
                    );
                }
                self.backbone
                    .backward_ws(cache, &tables, &mut ws, &mut grads.slots[..nb]);
            }
            grads
        });
        let mut total = partials.remove(0);
        for g in &partials {
            total.add(g);
        }
        total
    }
}

impl<T: Scalar> Params<T> for DualHeadNet<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut v = self.backbone.param_slices();
        v.push(&self.head_motor.weight);
        v.push(&self.head_motor.bias);
        v.push(&self.head_sensory.weight);
        v.push(&self.head_sensory.bias);
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.backbone.param_slices_mut();
        v.push(self.head_motor.weight.as_mut_slice());
        v.push(self.head_motor.bias.as_mut_slice());
        v.push(self.head_sensory.weight.as_mut_slice());
        v.push(self.head_sensory.bias.as_mut_slice());
        v
    }
}

/// Encoder plus a single linear head: the sensorimotor reward module (logits
/// over motor actions from a channel-concatenated observation pair), the
/// motor-only baselines, and the single-policy product-space agent.
#[derive(Clone, Debug)]
pub struct SingleHeadNet<T> {
    pub backbone: Backbone<T>,
    pub head: Dense<T>,
}

pub struct SingleCache<T> {
    backbone: BackboneCache<T>,
}

impl<T: Scalar> SingleHeadNet<T> {
    pub fn new(spec: EncoderSpec, n_out: usize, seed: u64) -> SingleHeadNet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let backbone = Backbone::Conv(Encoder::new(spec, &mut rng));
        let features = backbone.feature_len();
        SingleHeadNet { backbone, head: Dense::new(features, n_out, &mut rng) }
    }

    /// Tabular variant for tests.
    pub fn with_identity(features: usize, n_out: usize, seed: u64) -> SingleHeadNet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SingleHeadNet {
            backbone: Backbone::Identity { features },
            head: Dense::new(features, n_out, &mut rng),
        }
    }

    pub fn n_out(&self) -> usize {
        self.head.out_f
    }

    pub fn arch_string(&self) -> String {
        format!("{}|head{}", self.backbone.arch_string(), self.n_out())
    }

    pub fn forward_one(&self, x: &[T]) -> Vec<T> {
        let mut ws = Workspace::default();
        let features = self.backbone.forward_ws(x, &mut ws);
        let mut out = vec![T::zero(); self.n_out()];
        self.head.forward(features, &mut out);
        out
    }

    pub fn forward_batch(&self, xs: &Tensor<T>) -> Tensor<T> {
        let ranges = chunk_ranges(xs.batch());
        let chunks = par::map_slice(&ranges, |&(lo, hi)| {
            let mut ws = Workspace::default();
            (lo..hi)
                .map(|i| {
                    let features = self.backbone.forward_ws(xs.sample(i), &mut ws);
                    let mut out = vec![T::zero(); self.n_out()];
                    self.head.forward(features, &mut out);
                    out
                })
                .collect::<Vec<_>>()
        });
        Tensor::from_rows(chunks.into_iter().flatten().collect())
    }

    pub fn forward_batch_cached(&self, xs: &Tensor<T>) -> (Tensor<T>, Vec<SingleCache<T>>) {
        let ranges = chunk_ranges(xs.batch());
        let chunks = par::map_slice(&ranges, |&(lo, hi)| {
            (lo..hi)
                .map(|i| {
                    let cache = self.backbone.forward_cached_one(xs.sample(i));
                    let features = self.backbone.features(&cache);
                    let mut y = vec![T::zero(); self.n_out()];
                    self.head.forward(features, &mut y);
                    (y, SingleCache { backbone: cache })
                })
                .collect::<Vec<_>>()
        });
        let mut rows = Vec::with_capacity(xs.batch());
        let mut caches = Vec::with_capacity(xs.batch());
        for chunk in chunks {
            for (y, c) in chunk {
                rows.push(y);
                caches.push(c);
            }
        }
        (Tensor::from_rows(rows), caches)
    }

    pub fn backward_batch(&self, caches: &[SingleCache<T>], dy: &Tensor<T>) -> Grads<T> {
        let tables = self.backbone.back_tables();
        let wt = self.head.weight_t();
        let ranges = chunk_ranges(caches.len());
        let params = self.param_slices();
        let nb = self.backbone.slot_count();
        let mut partials = par::map_slice(&ranges, |&(lo, hi)| {
            let mut grads = Grads::zeros_like(&params);
            let mut ws = Workspace::default();
            for i in lo..hi {
                let cache = &caches[i].backbone;
                let features = self.backbone.features(cache);
                let dfeat = resized(&mut ws.dfeat, features.len());
                dfeat.fill(T::zero());
                {
                    let (_, head_slots) = grads.slots.split_at_mut(nb);
                    let (w, b) = head_slots.split_at_mut(1);
                    self.head.backward(
                        features,
                        dy.sample(i),
                        &mut w[0],
                        &mut b[0],
                        Some((&wt, dfeat)),
                    );
                }
                self.backbone
                    .backward_ws(cache, &tables, &mut ws, &mut grads.slots[..nb]);
            }
            grads
        });
        let mut total = partials.remove(0);
        for g in &partials {
            total.add(g);
        }
        total
    }
}

impl<T: Scalar> Params<T> for SingleHeadNet<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut v = self.backbone.param_slices();
        v.push(&self.head.weight);
        v.push(&self.head.bias);
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.backbone.param_slices_mut();
        v.push(self.head.weight.as_mut_slice());
        v.push(self.head.bias.as_mut_slice());
        v
    }
}
