//! Active-vision reinforcement learning workbench.
//!
//! An agent in these environments controls two things at once: a motor
//! policy that plays the game and a sensory policy that decides where to
//! look, seeing only a foveal crop (and optionally a low-resolution
//! periphery) of each frame. The crate provides:
//!
//! - [`envkit`]: toy pixel environments behind a foveated observation
//!   wrapper with a 4x4 anchor grid for sensory control;
//! - [`pvm`]: persistence-of-vision memory that composes the last few
//!   partial observations into one agent-facing input;
//! - [`diffnet`]: a small differentiable network kernel (the standard conv
//!   encoder, dual Q-heads, Adam, finite-difference verification);
//! - [`agent`]: dual-head Q-learning with an intrinsic sensorimotor reward
//!   assigned by a learned inverse-dynamics module, plus baseline variants;
//! - [`evalkit`]: baseline sensory policies, IQM-based scoring and
//!   sensory-policy analysis (heatmaps, KL to uniform);
//! - [`config`] / [`artifacts`]: run configuration, canonical hashing and
//!   artifact emission for the command-line front end.

pub mod agent;
pub mod artifacts;
pub mod config;
pub mod diffnet;
pub mod envkit;
pub mod evalkit;
pub mod image;
pub mod par;
pub mod pvm;

pub use image::Image;
