//! Uniform replay buffer.
//!
//! Observations are stored 8-bit quantized (the environments render in
//! 1/255 steps, so stitched canvases without peripheral underlays round-trip
//! exactly). Each record holds the full observation stack plus only the
//! newest planes of the successor: the successor stack is the current stack
//! shifted by one step's planes with the tail appended, so stacked frames
//! are never stored twice.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffnet::Tensor;
use crate::image::{dequantize_unit, quantize_unit};

/// One sampled training batch, dequantized.
pub struct Batch {
    pub obs: Tensor<f32>,
    pub next_obs: Tensor<f32>,
    pub a_motor: Vec<usize>,
    pub a_sensory: Vec<usize>,
    pub r_env: Vec<f32>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r_env.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_env.is_empty()
    }
}

/// Ring of transitions with a uniform sampler over the filled region.
pub struct ReplayBuffer {
    cap: usize,
    obs_planes: usize,
    step_planes: usize,
    hw: usize,
    obs: Vec<u8>,
    next_tail: Vec<u8>,
    a_motor: Vec<u16>,
    a_sensory: Vec<u16>,
    r_env: Vec<f32>,
    done: Vec<bool>,
    len: usize,
    head: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    /// `obs_planes` is the channel count of a full observation stack;
    /// `step_planes` how many of those channels one step contributes.
    pub fn new(
        cap: usize,
        obs_planes: usize,
        step_planes: usize,
        input_hw: usize,
        seed: u64,
    ) -> ReplayBuffer {
        assert!(cap > 0 && obs_planes >= step_planes);
        let plane = input_hw * input_hw;
        ReplayBuffer {
            cap,
            obs_planes,
            step_planes,
            hw: input_hw,
            obs: vec![0u8; cap * obs_planes * plane],
            next_tail: vec![0u8; cap * step_planes * plane],
            a_motor: vec![0; cap],
            a_sensory: vec![0; cap],
            r_env: vec![0.0; cap],
            done: vec![false; cap],
            len: 0,
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    /// Stores one transition. `obs` is the full stack, `next_tail` the new
    /// planes of the successor observation.
    pub fn push(
        &mut self,
        obs: &[f32],
        next_tail: &[f32],
        a_motor: usize,
        a_sensory: usize,
        r_env: f32,
        done: bool,
    ) {
        let plane = self.hw * self.hw;
        assert_eq!(obs.len(), self.obs_planes * plane);
        assert_eq!(next_tail.len(), self.step_planes * plane);
        let i = self.head;
        let dst = &mut self.obs[i * obs.len()..(i + 1) * obs.len()];
        for (d, &v) in dst.iter_mut().zip(obs) {
            *d = quantize_unit(v);
        }
        let dst = &mut self.next_tail[i * next_tail.len()..(i + 1) * next_tail.len()];
        for (d, &v) in dst.iter_mut().zip(next_tail) {
            *d = quantize_unit(v);
        }
        self.a_motor[i] = a_motor as u16;
        self.a_sensory[i] = a_sensory as u16;
        self.r_env[i] = r_env;
        self.done[i] = done;
        self.head = (self.head + 1) % self.cap;
        self.len = (self.len + 1).min(self.cap);
    }

    /// Uniform indices over the filled region.
    pub fn sample_indices(&mut self, batch: usize) -> Vec<usize> {
        assert!(self.len > 0, "sampling from an empty buffer");
        (0..batch).map(|_| self.rng.random_range(0..self.len)).collect()
    }

    pub fn sample(&mut self, batch: usize) -> Batch {
        let idx = self.sample_indices(batch);
        self.gather(&idx)
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let plane = self.hw * self.hw;
        let obs_len = self.obs_planes * plane;
        let tail_len = self.step_planes * plane;
        let n = indices.len();
        let mut obs_data = Vec::with_capacity(n * obs_len);
        let mut next_data = Vec::with_capacity(n * obs_len);
        let mut a_motor = Vec::with_capacity(n);
        let mut a_sensory = Vec::with_capacity(n);
        let mut r_env = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        for &i in indices {
            debug_assert!(i < self.len);
            let src = &self.obs[i * obs_len..(i + 1) * obs_len];
            obs_data.extend(src.iter().map(|&q| dequantize_unit(q)));
            // Successor = current stack shifted one step, tail appended.
            next_data.extend(src[tail_len..].iter().map(|&q| dequantize_unit(q)));
            let tail = &self.next_tail[i * tail_len..(i + 1) * tail_len];
            next_data.extend(tail.iter().map(|&q| dequantize_unit(q)));
            a_motor.push(self.a_motor[i] as usize);
            a_sensory.push(self.a_sensory[i] as usize);
            r_env.push(self.r_env[i]);
            done.push(self.done[i]);
        }
        Batch {
            obs: Tensor::from_vec(n, self.obs_planes, self.hw, self.hw, obs_data),
            next_obs: Tensor::from_vec(n, self.obs_planes, self.hw, self.hw, next_data),
            a_motor,
            a_sensory,
            r_env,
            done,
        }
    }
}
