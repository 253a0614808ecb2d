//! Partial-observation environments: built-in toy games plus the wrapper
//! that turns full frames into foveal/peripheral observations driven by a
//! discrete sensory action space.
//!
//! The agent never sees a full frame. Each step it picks a motor action
//! (forwarded to the underlying game with action repeat) and a sensory
//! action that moves the observable area across a 4x4 anchor grid, and gets
//! back an [`ObservationPacket`].

mod toy;

pub use toy::{ToyEnv, ToyKind};

use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment name `{0}`")]
    UnknownEnv(String),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("invalid {space} action {index} (space size {size})")]
    InvalidAction { space: &'static str, index: usize, size: usize },
    #[error("step called after the episode finished")]
    EpisodeOver,
}

/// How the sensory policy addresses the anchor grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlMode {
    /// 16 actions, one per anchor.
    Absolute,
    /// 5 actions: stay, up, down, left, right, clamped at grid edges.
    Relative,
}

impl ControlMode {
    pub fn num_actions(self) -> usize {
        match self {
            ControlMode::Absolute => ANCHORS_PER_AXIS * ANCHORS_PER_AXIS,
            ControlMode::Relative => 5,
        }
    }
}

pub const ANCHORS_PER_AXIS: usize = 4;

/// Evenly spaced, boundary-touching anchor coordinates along one axis:
/// `floor((frame - extent) * k / 3)` for `k = 0..4`. The extreme anchors sit
/// flush with the frame edges, so the observable area always stays inside.
pub fn anchor_positions(frame: usize, extent: usize) -> [usize; ANCHORS_PER_AXIS] {
    debug_assert!(extent <= frame);
    let span = frame - extent;
    let mut out = [0usize; ANCHORS_PER_AXIS];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = span * k / (ANCHORS_PER_AXIS - 1);
    }
    out
}

/// The agent's "eye": where the observable area sits, how large it is, and
/// at what resolutions its contents are delivered.
#[derive(Clone, Debug, PartialEq)]
pub struct SensoryState {
    x: usize,
    y: usize,
    h: usize,
    w: usize,
    foveal_res: (usize, usize),
    peripheral_res: (usize, usize),
    peripheral_enabled: bool,
    control: ControlMode,
    grid: (usize, usize),
}

impl SensoryState {
    /// Starts at the first anchor, i.e. location `(0, 0)`.
    pub fn new(
        h: usize,
        w: usize,
        foveal_res: (usize, usize),
        peripheral_res: (usize, usize),
        peripheral_enabled: bool,
        control: ControlMode,
    ) -> SensoryState {
        SensoryState {
            x: 0,
            y: 0,
            h,
            w,
            foveal_res,
            peripheral_res,
            peripheral_enabled,
            control,
            grid: (0, 0),
        }
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn y(&self) -> usize {
        self.y
    }

    pub fn size(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn foveal_res(&self) -> (usize, usize) {
        self.foveal_res
    }

    pub fn control(&self) -> ControlMode {
        self.control
    }

    pub fn num_actions(&self) -> usize {
        self.control.num_actions()
    }

    /// Row-major index of the current anchor on the 4x4 grid.
    pub fn anchor_index(&self) -> usize {
        self.grid.0 * ANCHORS_PER_AXIS + self.grid.1
    }

    pub fn reset(&mut self) {
        self.x = 0;
        self.y = 0;
        self.grid = (0, 0);
    }

    /// Applies one sensory action. Absolute actions jump to an anchor;
    /// relative ones move a single anchor step, clamped at the grid edges.
    pub fn apply_action(
        &mut self,
        action: usize,
        frame_h: usize,
        frame_w: usize,
    ) -> Result<(), EnvError> {
        let size = self.num_actions();
        if action >= size {
            return Err(EnvError::InvalidAction { space: "sensory", index: action, size });
        }
        match self.control {
            ControlMode::Absolute => {
                self.grid = (action / ANCHORS_PER_AXIS, action % ANCHORS_PER_AXIS);
            }
            ControlMode::Relative => {
                let (r, c) = self.grid;
                self.grid = match action {
                    0 => (r, c),
                    1 => (r.saturating_sub(1), c),
                    2 => ((r + 1).min(ANCHORS_PER_AXIS - 1), c),
                    3 => (r, c.saturating_sub(1)),
                    _ => (r, (c + 1).min(ANCHORS_PER_AXIS - 1)),
                };
            }
        }
        self.x = anchor_positions(frame_h, self.h)[self.grid.0];
        self.y = anchor_positions(frame_w, self.w)[self.grid.1];
        Ok(())
    }
}

/// One step's worth of agent-facing vision.
#[derive(Clone, Debug)]
pub struct ObservationPacket {
    /// Crop of the observable area, interpolated to the foveal resolution.
    pub foveal: Image,
    /// Downsampled rendering of everything outside the fovea; identically
    /// zero when peripheral vision is disabled.
    pub peripheral: Image,
    pub fovea_location: (usize, usize),
    pub fovea_size: (usize, usize),
}

/// Exact crop of the observable area: `out[i][j] = frame[x+i][y+j]`.
pub fn crop_fovea(frame: &Image, s: &SensoryState) -> Image {
    frame.crop(s.x, s.y, s.h, s.w)
}

/// Peripheral observation: the frame with the foveal rectangle zeroed in
/// place, downsampled to the peripheral resolution.
pub fn build_peripheral(frame: &Image, s: &SensoryState) -> Image {
    let mut masked = frame.clone();
    masked.zero_rect(s.x, s.y, s.h, s.w);
    masked.resize_bilinear(s.peripheral_res.0, s.peripheral_res.1)
}

/// Environment block of the run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub name: ToyKind,
    pub frame_size: usize,
    pub fovea: (usize, usize),
    pub foveal_res: (usize, usize),
    pub peripheral: bool,
    pub peripheral_res: (usize, usize),
    pub control: ControlMode,
    pub max_episode_len: usize,
    pub action_repeat: usize,
    pub frame_stack: usize,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            name: ToyKind::Catch,
            frame_size: 84,
            fovea: (50, 50),
            foveal_res: (50, 50),
            peripheral: false,
            peripheral_res: (20, 20),
            control: ControlMode::Absolute,
            max_episode_len: 200,
            action_repeat: 4,
            frame_stack: 4,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let err = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.frame_size < 24 {
            return err(format!("frame size {} is below the minimum of 24", self.frame_size));
        }
        if self.fovea.0 > self.frame_size || self.fovea.1 > self.frame_size {
            return err(format!(
                "fovea {}x{} does not fit in a {}x{} frame",
                self.fovea.0, self.fovea.1, self.frame_size, self.frame_size
            ));
        }
        if self.fovea.0 == 0 || self.fovea.1 == 0 {
            return err("fovea must be at least 1x1".into());
        }
        if self.foveal_res.0 == 0 || self.foveal_res.1 == 0 {
            return err("foveal resolution must be at least 1x1".into());
        }
        if self.peripheral_res.0 == 0 || self.peripheral_res.1 == 0 {
            return err("peripheral resolution must be at least 1x1".into());
        }
        if self.max_episode_len == 0 {
            return err("max episode length must be positive".into());
        }
        if self.action_repeat == 0 {
            return err("action repeat must be positive".into());
        }
        if self.frame_stack == 0 {
            return err("frame stack must be positive".into());
        }
        Ok(())
    }

    fn sensory_state(&self) -> SensoryState {
        SensoryState::new(
            self.fovea.0,
            self.fovea.1,
            self.foveal_res,
            self.peripheral_res,
            self.peripheral,
            self.control,
        )
    }
}

/// Result of one agent step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub packet: ObservationPacket,
    pub reward: f32,
    pub done: bool,
}

/// A toy environment behind the active-vision interface. Motor actions run
/// with action repeat (tick rewards summed); the sensory state updates once
/// per agent step; packets are built from the post-transition frame.
pub struct ActiveEnv {
    env: ToyEnv,
    cfg: EnvConfig,
    sensory: SensoryState,
    frame: Image,
    steps: usize,
    done: bool,
}

/// Builds an environment from a validated config, at its initial state with
/// the observable area at `(0, 0)`.
pub fn make_env(cfg: &EnvConfig) -> Result<ActiveEnv, EnvError> {
    cfg.validate()?;
    let env = ToyEnv::new(cfg.name, cfg.frame_size, cfg.seed);
    let mut frame = Image::zeros(cfg.frame_size, cfg.frame_size);
    env.render(&mut frame);
    Ok(ActiveEnv {
        env,
        cfg: cfg.clone(),
        sensory: cfg.sensory_state(),
        frame,
        steps: 0,
        done: false,
    })
}

impl ActiveEnv {
    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// (motor, sensory) action space sizes.
    pub fn action_spaces(&self) -> (usize, usize) {
        (self.env.n_motor(), self.sensory.num_actions())
    }

    pub fn sensory_state(&self) -> &SensoryState {
        &self.sensory
    }

    /// Full rendered frame. For analysis tooling and tests only; agent code
    /// must consume observation packets instead.
    pub fn full_frame(&self) -> &Image {
        &self.frame
    }

    /// Best possible return for one episode under this config.
    pub fn max_episode_return(&self) -> f32 {
        self.env
            .max_return((self.cfg.max_episode_len * self.cfg.action_repeat) as u64)
    }

    pub fn reset(&mut self, seed: u64) -> ObservationPacket {
        self.env.reset(seed);
        self.env.render(&mut self.frame);
        self.sensory.reset();
        self.steps = 0;
        self.done = false;
        self.packet()
    }

    pub fn step(&mut self, motor: usize, sensory: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let n_motor = self.env.n_motor();
        if motor >= n_motor {
            return Err(EnvError::InvalidAction { space: "motor", index: motor, size: n_motor });
        }
        self.sensory
            .apply_action(sensory, self.cfg.frame_size, self.cfg.frame_size)?;
        let mut reward = 0.0;
        for _ in 0..self.cfg.action_repeat {
            reward += self.env.tick(motor);
        }
        self.env.render(&mut self.frame);
        self.steps += 1;
        self.done = self.steps >= self.cfg.max_episode_len;
        Ok(StepOutcome { packet: self.packet(), reward, done: self.done })
    }

    fn packet(&self) -> ObservationPacket {
        let crop = crop_fovea(&self.frame, &self.sensory);
        let foveal = crop.resize_bilinear(self.sensory.foveal_res.0, self.sensory.foveal_res.1);
        let peripheral = if self.sensory.peripheral_enabled {
            build_peripheral(&self.frame, &self.sensory)
        } else {
            Image::zeros(self.sensory.peripheral_res.0, self.sensory.peripheral_res.1)
        };
        ObservationPacket {
            foveal,
            peripheral,
            fovea_location: (self.sensory.x, self.sensory.y),
            fovea_size: (self.sensory.h, self.sensory.w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_20(name: ToyKind) -> EnvConfig {
        EnvConfig {
            name,
            fovea: (20, 20),
            foveal_res: (20, 20),
            ..EnvConfig::default()
        }
    }

    #[test]
    fn make_env_defaults() {
        let env = make_env(&EnvConfig::default()).unwrap();
        assert_eq!(env.action_spaces(), (3, 16));
        assert_eq!(env.full_frame().h(), 84);
        assert_eq!((env.sensory_state().x(), env.sensory_state().y()), (0, 0));
    }

    #[test]
    fn make_env_rejects_oversized_fovea() {
        let cfg = EnvConfig { fovea: (100, 100), ..EnvConfig::default() };
        assert!(matches!(make_env(&cfg), Err(EnvError::InvalidConfig(_))));
    }

    #[test]
    fn determinism_same_seed_same_packets() {
        let cfg = cfg_20(ToyKind::Catch);
        let mut a = make_env(&cfg).unwrap();
        let mut b = make_env(&cfg).unwrap();
        a.reset(7);
        b.reset(7);
        for t in 0..100 {
            let sa = a.step(t % 3, t % 16).unwrap();
            let sb = b.step(t % 3, t % 16).unwrap();
            assert_eq!(sa.reward, sb.reward);
            assert_eq!(sa.packet.foveal, sb.packet.foveal);
            assert_eq!(sa.packet.peripheral, sb.packet.peripheral);
        }
    }

    #[test]
    fn anchor_formula_matches_hand_values() {
        // 84 frame, 50 extent: floor(34 * k / 3) = 0, 11, 22, 34.
        assert_eq!(anchor_positions(84, 50), [0, 11, 22, 34]);
        // 84 frame, 20 extent: floor(64 * k / 3) = 0, 21, 42, 64.
        assert_eq!(anchor_positions(84, 20), [0, 21, 42, 64]);
    }

    #[test]
    fn absolute_action_hits_anchor_corners() {
        let mut s = SensoryState::new(50, 50, (50, 50), (20, 20), false, ControlMode::Absolute);
        s.apply_action(0, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (0, 0));
        s.apply_action(15, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (34, 34));
        assert_eq!(s.anchor_index(), 15);
    }

    #[test]
    fn all_anchors_keep_fovea_inside_frame() {
        for &(fh, fw) in &[(20usize, 20usize), (50, 50), (84, 84), (33, 61)] {
            let mut s =
                SensoryState::new(fh, fw, (fh, fw), (20, 20), false, ControlMode::Absolute);
            for a in 0..16 {
                s.apply_action(a, 84, 84).unwrap();
                assert!(s.x() + fh <= 84 && s.y() + fw <= 84, "anchor {a} fovea {fh}x{fw}");
            }
        }
    }

    #[test]
    fn relative_moves_clamp_at_edges() {
        let mut s = SensoryState::new(20, 20, (20, 20), (20, 20), false, ControlMode::Relative);
        assert_eq!(s.num_actions(), 5);
        // Left from the leftmost column: unchanged.
        s.apply_action(3, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (0, 0));
        // Stay leaves state unchanged.
        s.apply_action(0, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (0, 0));
        s.apply_action(4, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (0, 21));
        s.apply_action(2, 84, 84).unwrap();
        assert_eq!((s.x(), s.y()), (21, 21));
    }

    #[test]
    fn relative_grid_fully_reachable_within_six_moves() {
        // BFS over the 4x4 grid: any anchor reaches any other in <= 6 moves.
        for start in 0..16usize {
            let mut dist = [usize::MAX; 16];
            dist[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(cur) = queue.pop_front() {
                let (r, c) = (cur / 4, cur % 4);
                let mut neighbors = Vec::new();
                if r > 0 {
                    neighbors.push((r - 1) * 4 + c);
                }
                if r < 3 {
                    neighbors.push((r + 1) * 4 + c);
                }
                if c > 0 {
                    neighbors.push(r * 4 + c - 1);
                }
                if c < 3 {
                    neighbors.push(r * 4 + c + 1);
                }
                for n in neighbors {
                    if dist[n] == usize::MAX {
                        dist[n] = dist[cur] + 1;
                        queue.push_back(n);
                    }
                }
            }
            assert!(dist.iter().all(|&d| d <= 6), "start {start}: {dist:?}");
        }
    }

    #[test]
    fn invalid_sensory_action_rejected() {
        let mut s = SensoryState::new(20, 20, (20, 20), (20, 20), false, ControlMode::Absolute);
        assert!(matches!(
            s.apply_action(16, 84, 84),
            Err(EnvError::InvalidAction { space: "sensory", .. })
        ));
    }

    #[test]
    fn crop_containment_every_foveal_pixel_is_a_frame_pixel() {
        let cfg = cfg_20(ToyKind::Chase);
        let mut env = make_env(&cfg).unwrap();
        env.reset(3);
        for t in 0..50 {
            let out = env.step(t % 5, t % 16).unwrap();
            let (x, y) = out.packet.fovea_location;
            let frame = env.full_frame();
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(out.packet.foveal.get(i, j), frame.get(x + i, y + j));
                }
            }
        }
    }

    #[test]
    fn sensory_actions_never_change_env_state() {
        let cfg = cfg_20(ToyKind::Catch);
        let mut a = make_env(&cfg).unwrap();
        let mut b = make_env(&cfg).unwrap();
        a.reset(42);
        b.reset(42);
        for t in 0..80 {
            // Same motor actions, different sensory actions.
            a.step(t % 3, t % 16).unwrap();
            b.step(t % 3, (t * 7 + 3) % 16).unwrap();
            assert_eq!(a.full_frame(), b.full_frame(), "frame diverged at step {t}");
        }
    }

    #[test]
    fn packet_fixed_point_before_first_drop() {
        // Catch opens with a short pre-drop phase: with a no-op motor action
        // and a "stay" sensory action the packet is a fixed point.
        let cfg = EnvConfig { control: ControlMode::Relative, ..cfg_20(ToyKind::Catch) };
        let mut env = make_env(&cfg).unwrap();
        env.reset(1);
        let s1 = env.step(1, 0).unwrap();
        let s2 = env.step(1, 0).unwrap();
        assert_eq!(s1.packet.foveal, s2.packet.foveal);
        assert_eq!(s1.packet.peripheral, s2.packet.peripheral);
        assert_eq!(s1.packet.fovea_location, s2.packet.fovea_location);
    }

    #[test]
    fn truncates_at_max_episode_length_and_rejects_further_steps() {
        let cfg = EnvConfig { max_episode_len: 5, ..cfg_20(ToyKind::Catch) };
        let mut env = make_env(&cfg).unwrap();
        env.reset(0);
        for t in 0..5 {
            let out = env.step(1, 0).unwrap();
            assert_eq!(out.done, t == 4);
        }
        assert!(matches!(env.step(1, 0), Err(EnvError::EpisodeOver)));
    }

    #[test]
    fn peripheral_disabled_is_identically_zero() {
        let cfg = cfg_20(ToyKind::Catch);
        let mut env = make_env(&cfg).unwrap();
        let packet = env.reset(0);
        assert_eq!(packet.peripheral, Image::zeros(20, 20));
    }

    #[test]
    fn peripheral_of_full_frame_fovea_is_zero() {
        let frame = Image::constant(84, 84, 0.8);
        let s = SensoryState::new(84, 84, (84, 84), (20, 20), true, ControlMode::Absolute);
        let p = build_peripheral(&frame, &s);
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn peripheral_matches_zeroing_plus_bilinear_oracle() {
        let frame = Image::from_fn(84, 84, |i, j| ((i * 84 + j) % 97) as f32 / 97.0);
        let mut s = SensoryState::new(30, 30, (30, 30), (21, 21), true, ControlMode::Absolute);
        s.apply_action(5, 84, 84).unwrap();
        let got = build_peripheral(&frame, &s);
        // Oracle: compose the zeroing and the resize explicitly.
        let mut masked = frame.clone();
        masked.zero_rect(s.x(), s.y(), 30, 30);
        let want = masked.resize_bilinear(21, 21);
        assert_eq!(got, want);
        // Constant frame: pixels outside the zeroed footprint keep the value.
        let c = Image::constant(84, 84, 0.5);
        let mut s2 = SensoryState::new(10, 10, (10, 10), (84, 84), true, ControlMode::Absolute);
        s2.apply_action(0, 84, 84).unwrap();
        let p = build_peripheral(&c, &s2);
        assert_eq!(p.get(83, 83), 0.5);
        assert_eq!(p.get(0, 0), 0.0);
    }
}
