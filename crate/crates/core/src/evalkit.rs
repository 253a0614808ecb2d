//! Evaluation toolkit: baseline sensory policies, robust statistics
//! (interquartile mean, normalized scores), greedy evaluation rollouts, and
//! sensory-policy analysis (pixel-frequency heatmaps, KL to uniform).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::envkit::{make_env, EnvConfig, EnvError, ANCHORS_PER_AXIS};
use crate::par;
use crate::pvm::{ObsPipeline, PvmConfig, PvmError};

pub const NUM_ANCHORS: usize = ANCHORS_PER_AXIS * ANCHORS_PER_AXIS;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 4 values for the interquartile mean, got {0}")]
    TooFewValues(usize),
    #[error("reference IQM must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("policy expects action spaces {expected:?} but environment provides {found:?}")]
    SpaceMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Pvm(#[from] PvmError),
}

/// Scripted sensory policies from the baseline suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// Uniform over the 16 anchors every step.
    RandomView,
    /// Left to right, top to bottom, cycling every 16 steps.
    RasterScan,
    /// Always the same anchor.
    Static(usize),
}

/// The canonical near-center anchor (row 1, col 1 of the 4x4 grid).
pub fn center_anchor() -> usize {
    ANCHORS_PER_AXIS + 1
}

/// A seeded policy RNG of the kind [`EvalPolicy::act`] expects.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One sensory action from a baseline policy at the given step.
pub fn baseline_sensory_action(kind: BaselineKind, step: usize, rng: &mut ChaCha8Rng) -> usize {
    match kind {
        BaselineKind::RandomView => rng.random_range(0..NUM_ANCHORS),
        BaselineKind::RasterScan => step % NUM_ANCHORS,
        BaselineKind::Static(anchor) => anchor,
    }
}

/// Stateful wrapper used by training loops: owns the raster cursor and the
/// random-view RNG.
pub struct BaselinePolicy {
    kind: BaselineKind,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BaselinePolicy {
    pub fn new(kind: BaselineKind, seed: u64) -> BaselinePolicy {
        BaselinePolicy { kind, cursor: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn next_action(&mut self) -> usize {
        let step = self.cursor;
        self.cursor = (self.cursor + 1) % NUM_ANCHORS;
        baseline_sensory_action(self.kind, step, &mut self.rng)
    }

    pub fn reset_cursor(&mut self) {
        self.cursor = 0;
    }
}

/// Interquartile mean: sort, drop `floor(n/4)` from each end, average the
/// rest. Needs at least 4 values.
pub fn iqm(values: &[f64]) -> Result<f64, EvalError> {
    if values.len() < 4 {
        return Err(EvalError::TooFewValues(values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite return"));
    let drop = sorted.len() / 4;
    let mid = &sorted[drop..sorted.len() - drop];
    Ok(mid.iter().sum::<f64>() / mid.len() as f64)
}

/// Score normalized by a reference agent's IQM. The reference IQM must be
/// strictly positive for the ratio to mean anything.
pub fn normalized_score(returns: &[f64], reference: &[f64]) -> Result<f64, EvalError> {
    let reference_iqm = iqm(reference)?;
    if reference_iqm <= 0.0 {
        return Err(EvalError::NonPositiveReference(reference_iqm));
    }
    Ok(iqm(returns)? / reference_iqm)
}

/// KL divergence from an anchor-visit histogram to the uniform distribution,
/// natural log, with the `0 log 0 = 0` convention.
pub fn kl_to_uniform(histogram: &[u64]) -> f64 {
    let total: u64 = histogram.iter().sum();
    assert!(total > 0, "empty histogram");
    let k = histogram.len() as f64;
    histogram
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * (p * k).ln()
        })
        .sum()
}

/// One step of a sensory trace: the fovea rectangle and the anchor it sits
/// on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub x: u16,
    pub y: u16,
    pub h: u16,
    pub w: u16,
    pub anchor: u8,
}

#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub episode: usize,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn anchor_histogram(&self) -> [u64; NUM_ANCHORS] {
        let mut hist = [0u64; NUM_ANCHORS];
        for s in &self.steps {
            hist[s.anchor as usize] += 1;
        }
        hist
    }
}

/// Per-step fovea rectangles for one or more evaluation episodes.
#[derive(Clone, Debug)]
pub struct SensoryTrace {
    pub frame_hw: usize,
    pub episodes: Vec<EpisodeTrace>,
}

impl SensoryTrace {
    /// `count[p]` = number of steps whose fovea rectangle covers pixel `p`.
    pub fn heatmap(&self) -> Vec<u32> {
        let hw = self.frame_hw;
        let mut counts = vec![0u32; hw * hw];
        for ep in &self.episodes {
            for s in &ep.steps {
                for i in s.x as usize..(s.x + s.h) as usize {
                    let row = &mut counts[i * hw..(i + 1) * hw];
                    for v in &mut row[s.y as usize..(s.y + s.w) as usize] {
                        *v += 1;
                    }
                }
            }
        }
        counts
    }

    pub fn anchor_histogram(&self) -> [u64; NUM_ANCHORS] {
        let mut hist = [0u64; NUM_ANCHORS];
        for ep in &self.episodes {
            for s in &ep.steps {
                hist[s.anchor as usize] += 1;
            }
        }
        hist
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }
}

/// Anything that can drive an evaluation rollout at epsilon = 0. The RNG is
/// per-episode (derived seed), which keeps parallel rollouts deterministic.
pub trait EvalPolicy: Sync {
    fn act(&self, input: &[f32], step: usize, rng: &mut ChaCha8Rng) -> (usize, usize);

    /// Action-space sizes the policy was built for, checked against the
    /// environment before rolling out. `None` skips the check (scripted
    /// baselines adapt to any motor space).
    fn expected_spaces(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Scripted baseline: random motor actions plus a baseline sensory policy.
/// Useful for sensory-trace analysis and as a floor reference.
pub struct BaselineActor {
    pub sensory: BaselineKind,
    pub n_motor: usize,
}

impl EvalPolicy for BaselineActor {
    fn act(&self, _input: &[f32], step: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let motor = rng.random_range(0..self.n_motor);
        (motor, baseline_sensory_action(self.sensory, step, rng))
    }
}

#[derive(Clone, Debug)]
pub struct EvalRow {
    pub seed: u64,
    pub episode: usize,
    pub return_env: f64,
    pub kl: f64,
}

/// Per-episode returns plus the aggregate statistics.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub iqm: f64,
    pub normalized: Option<f64>,
}

/// Greedy evaluation: `episodes_per_seed` rollouts per seed, each on a fresh
/// environment seeded from `(seed, episode)`, so results are identical no
/// matter how the rollouts are scheduled.
pub fn run_eval<P: EvalPolicy>(
    policy: &P,
    env_cfg: &EnvConfig,
    pvm_cfg: &PvmConfig,
    input_hw: usize,
    episodes_per_seed: usize,
    seeds: &[u64],
    reference: Option<&[f64]>,
) -> Result<(EvalReport, SensoryTrace), EvalError> {
    env_cfg.validate()?;
    if let Some(expected) = policy.expected_spaces() {
        let probe = make_env(env_cfg)?;
        let found = probe.action_spaces();
        if expected != found {
            return Err(EvalError::SpaceMismatch { expected, found });
        }
    }
    let mut jobs = Vec::new();
    for &seed in seeds {
        for episode in 0..episodes_per_seed {
            jobs.push((seed, episode));
        }
    }
    let outcomes = par::map_slice(&jobs, |&(seed, episode)| -> Result<_, EvalError> {
        let mut env = make_env(env_cfg)?;
        let mut pipe = ObsPipeline::new(
            pvm_cfg.kind,
            pvm_cfg.window,
            env_cfg.frame_size,
            env_cfg.frame_stack,
            input_hw,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, episode as u64));
        let packet = env.reset(par::derive_seed(seed, 1_000_003 + episode as u64));
        pipe.push(&packet)?;
        let mut ret = 0.0f64;
        let mut steps = Vec::with_capacity(env_cfg.max_episode_len);
        for step in 0..env_cfg.max_episode_len {
            let input = pipe.input();
            let (motor, sensory) = policy.act(&input, step, &mut rng);
            let out = env.step(motor, sensory)?;
            ret += out.reward as f64;
            let s = env.sensory_state();
            steps.push(TraceStep {
                x: s.x() as u16,
                y: s.y() as u16,
                h: s.size().0 as u16,
                w: s.size().1 as u16,
                anchor: s.anchor_index() as u8,
            });
            pipe.push(&out.packet)?;
            if out.done {
                break;
            }
        }
        Ok(EpisodeTrace { seed, episode, steps }.into_row(ret))
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut episodes = Vec::with_capacity(jobs.len());
    for outcome in outcomes {
        let (row, trace) = outcome?;
        rows.push(row);
        episodes.push(trace);
    }
    let returns: Vec<f64> = rows.iter().map(|r| r.return_env).collect();
    let report_iqm = iqm(&returns)?;
    let normalized = match reference {
        Some(reference) => Some(normalized_score(&returns, reference)?),
        None => None,
    };
    Ok((
        EvalReport { rows, iqm: report_iqm, normalized },
        SensoryTrace { frame_hw: env_cfg.frame_size, episodes },
    ))
}

impl EpisodeTrace {
    fn into_row(self, return_env: f64) -> (EvalRow, EpisodeTrace) {
        let row = EvalRow {
            seed: self.seed,
            episode: self.episode,
            return_env,
            kl: kl_to_uniform(&self.anchor_histogram()),
        };
        (row, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envkit::ToyKind;
    use crate::pvm::PvmKind;

    #[test]
    fn iqm_of_one_to_eight() {
        let values: Vec<f64> = (1..=8).map(|v| v as f64).collect();
        assert_eq!(iqm(&values).unwrap(), 4.5);
    }

    #[test]
    fn iqm_invariances() {
        assert_eq!(iqm(&[3.0; 7]).unwrap(), 3.0);
        // Permutation invariance.
        let a = [5.0, 1.0, 9.0, 2.0, 7.0];
        let b = [9.0, 7.0, 5.0, 2.0, 1.0];
        assert_eq!(iqm(&a).unwrap(), iqm(&b).unwrap());
        // Translation equivariance.
        let shifted: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        assert!((iqm(&shifted).unwrap() - iqm(&a).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn iqm_is_more_outlier_robust_than_mean() {
        let tight: Vec<f64> = (0..12).map(|i| 10.0 + 0.1 * i as f64).collect();
        let mut spiked = tight.clone();
        spiked.push(1e6);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let iqm_shift = (iqm(&spiked).unwrap() - iqm(&tight).unwrap()).abs();
        let mean_shift = (mean(&spiked) - mean(&tight)).abs();
        assert!(iqm_shift < mean_shift / 100.0);
    }

    #[test]
    fn iqm_needs_four_values() {
        assert!(matches!(iqm(&[1.0, 2.0, 3.0]), Err(EvalError::TooFewValues(3))));
    }

    #[test]
    fn normalized_score_basics() {
        let reference = [2.0, 4.0, 6.0, 8.0];
        assert_eq!(normalized_score(&reference, &reference).unwrap(), 1.0);
        let doubled: Vec<f64> = reference.iter().map(|v| v * 2.0).collect();
        assert_eq!(normalized_score(&doubled, &reference).unwrap(), 2.0);
        // A mixed-sign reference whose middle mass cancels is rejected, not
        // silently divided by.
        let mixed = [-1.0, -1.0, 1.0, 1.0];
        assert!(matches!(
            normalized_score(&reference, &mixed),
            Err(EvalError::NonPositiveReference(_))
        ));
    }

    #[test]
    fn kl_uniform_is_zero_and_fixation_is_log16() {
        assert!(kl_to_uniform(&[5u64; 16]).abs() < 1e-12);
        let mut one_bin = [0u64; 16];
        one_bin[3] = 42;
        assert!((kl_to_uniform(&one_bin) - 16f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn kl_matches_direct_summation() {
        // Half the mass on one bin, the rest spread evenly.
        let mut hist = [2u64; 16];
        hist[0] = 30;
        let total = 60.0;
        let mut want = (30.0 / total) * ((30.0 / total) * 16.0f64).ln();
        for _ in 0..15 {
            want += (2.0 / total) * ((2.0 / total) * 16.0f64).ln();
        }
        assert!((kl_to_uniform(&hist) - want).abs() < 1e-12);
        assert!(kl_to_uniform(&hist) >= 0.0);
    }

    #[test]
    fn raster_visits_all_anchors_each_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [false; 16];
        for step in 0..16 {
            let a = baseline_sensory_action(BaselineKind::RasterScan, step, &mut rng);
            assert!(!seen[a], "repeat within a cycle at step {step}");
            seen[a] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(baseline_sensory_action(BaselineKind::RasterScan, 16, &mut rng), 0);
    }

    #[test]
    fn raster_cursor_struct_matches_step_form() {
        let mut p = BaselinePolicy::new(BaselineKind::RasterScan, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for step in 0..40 {
            assert_eq!(
                p.next_action(),
                baseline_sensory_action(BaselineKind::RasterScan, step, &mut rng)
            );
        }
    }

    #[test]
    fn random_view_is_uniform_within_3_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let draws = 16_000;
        let mut counts = [0u32; 16];
        for step in 0..draws {
            counts[baseline_sensory_action(BaselineKind::RandomView, step, &mut rng)] += 1;
        }
        let expected = draws as f64 / 16.0;
        let sigma = (draws as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt();
        for (a, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "anchor {a}: {c} vs {expected}"
            );
        }
    }

    #[test]
    fn static_center_is_anchor_five() {
        assert_eq!(center_anchor(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            baseline_sensory_action(BaselineKind::Static(center_anchor()), 12, &mut rng),
            5
        );
    }

    #[test]
    fn heatmap_single_step_and_fixation() {
        let trace = SensoryTrace {
            frame_hw: 10,
            episodes: vec![EpisodeTrace {
                seed: 0,
                episode: 0,
                steps: vec![TraceStep { x: 2, y: 3, h: 4, w: 2, anchor: 0 }],
            }],
        };
        let hm = trace.heatmap();
        let total: u32 = hm.iter().sum();
        assert_eq!(total, 8, "mass = steps x fovea area");
        assert_eq!(hm[2 * 10 + 3], 1);
        assert_eq!(hm[0], 0);

        let fix = SensoryTrace {
            frame_hw: 10,
            episodes: vec![EpisodeTrace {
                seed: 0,
                episode: 0,
                steps: vec![TraceStep { x: 1, y: 1, h: 2, w: 2, anchor: 5 }; 7],
            }],
        };
        assert!(fix.heatmap().iter().all(|&c| c == 0 || c == 7));
    }

    #[test]
    fn heatmap_matches_per_pixel_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let hw = 24;
        let mut steps = Vec::new();
        for _ in 0..40 {
            let h = rng.random_range(1..8u16);
            let w = rng.random_range(1..8u16);
            let x = rng.random_range(0..=(hw as u16 - h));
            let y = rng.random_range(0..=(hw as u16 - w));
            steps.push(TraceStep { x, y, h, w, anchor: 0 });
        }
        let trace = SensoryTrace {
            frame_hw: hw,
            episodes: vec![EpisodeTrace { seed: 0, episode: 0, steps: steps.clone() }],
        };
        let got = trace.heatmap();
        for i in 0..hw {
            for j in 0..hw {
                let want = steps
                    .iter()
                    .filter(|s| {
                        (s.x as usize..(s.x + s.h) as usize).contains(&i)
                            && (s.y as usize..(s.y + s.w) as usize).contains(&j)
                    })
                    .count() as u32;
                assert_eq!(got[i * hw + j], want, "pixel ({i},{j})");
            }
        }
    }

    fn tiny_cfg() -> EnvConfig {
        EnvConfig {
            name: ToyKind::Catch,
            fovea: (20, 20),
            foveal_res: (20, 20),
            max_episode_len: 24,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn run_eval_is_deterministic() {
        let cfg = tiny_cfg();
        let pvm = PvmConfig { kind: PvmKind::Stitch, window: 3 };
        let actor = BaselineActor { sensory: BaselineKind::RandomView, n_motor: 3 };
        let (a, ta) = run_eval(&actor, &cfg, &pvm, 42, 3, &[1, 2], None).unwrap();
        let (b, tb) = run_eval(&actor, &cfg, &pvm, 42, 3, &[1, 2], None).unwrap();
        assert_eq!(a.iqm, b.iqm);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.return_env, rb.return_env);
        }
        assert_eq!(ta.anchor_histogram(), tb.anchor_histogram());
    }

    #[test]
    fn run_eval_baseline_kls() {
        let cfg = EnvConfig { max_episode_len: 400, ..tiny_cfg() };
        let pvm = PvmConfig { kind: PvmKind::Off, window: 1 };
        // Random view over many steps: KL near zero.
        let random = BaselineActor { sensory: BaselineKind::RandomView, n_motor: 3 };
        let (_, trace) = run_eval(&random, &cfg, &pvm, 42, 2, &[0, 1, 2], None).unwrap();
        assert_eq!(trace.total_steps(), 400 * 6);
        assert!(kl_to_uniform(&trace.anchor_histogram()) < 0.01);
        // Static fixation: KL = ln 16 exactly.
        let fixed = BaselineActor {
            sensory: BaselineKind::Static(center_anchor()),
            n_motor: 3,
        };
        let (_, trace) = run_eval(&fixed, &cfg, &pvm, 42, 4, &[0], None).unwrap();
        assert!((kl_to_uniform(&trace.anchor_histogram()) - 16f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn histogram_sums_to_step_count() {
        let cfg = tiny_cfg();
        let pvm = PvmConfig { kind: PvmKind::Stitch, window: 3 };
        let actor = BaselineActor { sensory: BaselineKind::RasterScan, n_motor: 3 };
        let (_, trace) = run_eval(&actor, &cfg, &pvm, 42, 4, &[7], None).unwrap();
        let hist = trace.anchor_histogram();
        assert_eq!(hist.iter().sum::<u64>() as usize, trace.total_steps());
    }
}
