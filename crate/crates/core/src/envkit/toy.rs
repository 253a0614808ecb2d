//! Built-in toy pixel environments. Each one renders its state into a square
//! grayscale frame every tick and is fully deterministic given a seed.
//!
//! All three run on an internal tick clock; the active-vision wrapper applies
//! action repeat on top. Object geometry scales with the frame size, with
//! 84x84 as the canonical layout.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::Image;

const OBJECT: f32 = 1.0;
const PLAYER: f32 = 128.0 / 255.0;

/// The available toy environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToyKind {
    /// Move a paddle to catch falling balls; +1 per catch, -1 per miss.
    Catch,
    /// Move a square toward a drifting target; +1 on contact.
    Chase,
    /// Avoid falling blocks; -1 on hit, small bonus per surviving tick.
    Dodge,
}

impl ToyKind {
    pub fn parse(name: &str) -> Option<ToyKind> {
        match name {
            "catch" => Some(ToyKind::Catch),
            "chase" => Some(ToyKind::Chase),
            "dodge" => Some(ToyKind::Dodge),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Catch => "catch",
            ToyKind::Chase => "chase",
            ToyKind::Dodge => "dodge",
        }
    }
}

/// A toy environment instance: kind-specific state plus its RNG and tick
/// counter. Reward is bounded per tick and the same seed always reproduces
/// the same frame sequence under the same actions.
pub struct ToyEnv {
    kind: ToyKind,
    sim: Sim,
    rng: ChaCha8Rng,
    size: usize,
    ticks: u64,
}

enum Sim {
    Catch(CatchSim),
    Chase(ChaseSim),
    Dodge(DodgeSim),
}

impl ToyEnv {
    pub fn new(kind: ToyKind, size: usize, seed: u64) -> ToyEnv {
        let mut env = ToyEnv {
            kind,
            sim: Sim::Catch(CatchSim::zeroed(size)),
            rng: ChaCha8Rng::seed_from_u64(seed),
            size,
            ticks: 0,
        };
        env.reset(seed);
        env
    }

    pub fn kind(&self) -> ToyKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_motor(&self) -> usize {
        match self.kind {
            ToyKind::Catch | ToyKind::Dodge => 3,
            ToyKind::Chase => 5,
        }
    }

    /// Restarts the episode from a fresh seed.
    pub fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.ticks = 0;
        self.sim = match self.kind {
            ToyKind::Catch => Sim::Catch(CatchSim::spawn(self.size, &mut self.rng)),
            ToyKind::Chase => Sim::Chase(ChaseSim::spawn(self.size, &mut self.rng)),
            ToyKind::Dodge => Sim::Dodge(DodgeSim::spawn(self.size, &mut self.rng)),
        };
    }

    /// Advances one internal frame and returns the tick reward.
    pub fn tick(&mut self, motor: usize) -> f32 {
        assert!(motor < self.n_motor(), "motor action out of range");
        self.ticks += 1;
        match &mut self.sim {
            Sim::Catch(s) => s.tick(motor, &mut self.rng),
            Sim::Chase(s) => s.tick(motor, &mut self.rng),
            Sim::Dodge(s) => s.tick(motor, &mut self.rng),
        }
    }

    pub fn render(&self, frame: &mut Image) {
        assert_eq!((frame.h(), frame.w()), (self.size, self.size));
        frame.fill(0.0);
        match &self.sim {
            Sim::Catch(s) => s.render(frame),
            Sim::Chase(s) => s.render(frame),
            Sim::Dodge(s) => s.render(frame),
        }
    }

    /// Highest return reachable in `ticks` internal frames. Exact for catch
    /// and dodge; a documented upper bound for chase (contacts cannot occur
    /// faster than the closing-speed limit allows).
    pub fn max_return(&self, ticks: u64) -> f32 {
        match &self.sim {
            Sim::Catch(s) => s.max_return(ticks),
            Sim::Chase(_) => (ticks / ChaseSim::MIN_TICKS_BETWEEN_CONTACTS) as f32,
            Sim::Dodge(_) => DodgeSim::SURVIVAL_PER_TICK * ticks as f32,
        }
    }

    #[cfg(test)]
    pub(crate) fn sim_catch(&self) -> &CatchSim {
        match &self.sim {
            Sim::Catch(s) => s,
            _ => panic!("not catch"),
        }
    }
}

fn fill_rect(frame: &mut Image, x: i64, y: i64, h: usize, w: usize, v: f32) {
    let (fh, fw) = (frame.h() as i64, frame.w() as i64);
    for i in 0..h as i64 {
        let r = x + i;
        if r < 0 || r >= fh {
            continue;
        }
        for j in 0..w as i64 {
            let c = y + j;
            if c >= 0 && c < fw {
                frame.set(r as usize, c as usize, v);
            }
        }
    }
}

/// Falling-ball catching. The ball descends at a fixed rate; the paddle slides
/// along the bottom. Exactly one ball is in play at a time and a new one
/// spawns the moment the previous one lands, so landing times (and therefore
/// the best possible return) are a pure function of the episode length.
pub(crate) struct CatchSim {
    size: usize,
    pub(crate) paddle_x: i64,
    pub(crate) ball_col: i64,
    /// Ball top row; starts negative so每 episode opens with a short
    /// pre-drop phase where nothing is falling yet.
    pub(crate) ball_row: i64,
}

impl CatchSim {
    const SPEED: i64 = 2;
    /// Ticks the ball stays hidden above the frame at episode start.
    const SPAWN_DELAY_TICKS: i64 = 12;

    fn zeroed(size: usize) -> CatchSim {
        CatchSim { size, paddle_x: 0, ball_col: 0, ball_row: 0 }
    }

    fn spawn(size: usize, rng: &mut ChaCha8Rng) -> CatchSim {
        let mut s = CatchSim::zeroed(size);
        s.paddle_x = ((size - s.paddle_w()) / 2) as i64;
        s.ball_row = -Self::SPEED * Self::SPAWN_DELAY_TICKS;
        s.ball_col = s.draw_col(rng);
        s
    }

    pub(crate) fn paddle_w(&self) -> usize {
        (self.size * 12 / 84).max(4)
    }

    pub(crate) fn ball_s(&self) -> usize {
        (self.size * 6 / 84).max(3)
    }

    fn paddle_top(&self) -> i64 {
        self.size as i64 - 4
    }

    /// Row at which the ball bottom touches the paddle top.
    fn land_row(&self) -> i64 {
        self.paddle_top() - self.ball_s() as i64
    }

    fn draw_col(&self, rng: &mut ChaCha8Rng) -> i64 {
        rng.random_range(0..=(self.size - self.ball_s()) as i64)
    }

    fn tick(&mut self, motor: usize, rng: &mut ChaCha8Rng) -> f32 {
        let dx = match motor {
            0 => -Self::SPEED,
            1 => 0,
            _ => Self::SPEED,
        };
        self.paddle_x = (self.paddle_x + dx).clamp(0, (self.size - self.paddle_w()) as i64);
        self.ball_row += Self::SPEED;
        if self.ball_row >= self.land_row() {
            let caught = self.ball_col + self.ball_s() as i64 > self.paddle_x
                && self.ball_col < self.paddle_x + self.paddle_w() as i64;
            self.ball_row = 0;
            self.ball_col = self.draw_col(rng);
            if caught {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    }

    fn render(&self, frame: &mut Image) {
        fill_rect(frame, self.paddle_top(), self.paddle_x, 3, self.paddle_w(), PLAYER);
        if self.ball_row >= 0 {
            fill_rect(frame, self.ball_row, self.ball_col, self.ball_s(), self.ball_s(), OBJECT);
        }
    }

    fn max_return(&self, ticks: u64) -> f32 {
        // First landing after the spawn delay plus a full descent, then one
        // landing per descent.
        let descent = self.land_row() / Self::SPEED;
        let first = (Self::SPAWN_DELAY_TICKS + descent) as u64;
        if ticks < first {
            0.0
        } else {
            (1 + (ticks - first) / descent as u64) as f32
        }
    }
}

/// Pursuit of a drifting target. Contact pays +1 and teleports the target to
/// a fresh spot at least a third of the frame away.
struct ChaseSim {
    size: usize,
    ax: i64,
    ay: i64,
    tx: i64,
    ty: i64,
    tvx: i64,
    tvy: i64,
}

impl ChaseSim {
    const SPEED: i64 = 2;
    const MIN_TICKS_BETWEEN_CONTACTS: u64 = 6;

    fn spawn(size: usize, rng: &mut ChaCha8Rng) -> ChaseSim {
        let mut s = ChaseSim {
            size,
            ax: (size / 2) as i64,
            ay: (size / 2) as i64,
            tx: 0,
            ty: 0,
            tvx: 0,
            tvy: 0,
        };
        s.respawn_target(rng);
        s
    }

    fn side(&self) -> i64 {
        ((self.size * 7 / 84).max(4)) as i64
    }

    fn respawn_target(&mut self, rng: &mut ChaCha8Rng) {
        let max = (self.size as i64 - self.side()).max(1);
        let min_dist = (self.size / 3) as i64;
        loop {
            let tx = rng.random_range(0..=max);
            let ty = rng.random_range(0..=max);
            if (tx - self.ax).abs() + (ty - self.ay).abs() >= min_dist {
                self.tx = tx;
                self.ty = ty;
                break;
            }
        }
        self.tvx = rng.random_range(-1..=1);
        self.tvy = rng.random_range(-1..=1);
    }

    fn tick(&mut self, motor: usize, rng: &mut ChaCha8Rng) -> f32 {
        let (dx, dy) = match motor {
            0 => (0, 0),
            1 => (-Self::SPEED, 0),
            2 => (Self::SPEED, 0),
            3 => (0, -Self::SPEED),
            _ => (0, Self::SPEED),
        };
        let max = (self.size as i64 - self.side()).max(1);
        self.ax = (self.ax + dx).clamp(0, max);
        self.ay = (self.ay + dy).clamp(0, max);

        if rng.random_range(0..20) == 0 {
            self.tvx = rng.random_range(-1..=1);
            self.tvy = rng.random_range(-1..=1);
        }
        self.tx += self.tvx;
        self.ty += self.tvy;
        if self.tx <= 0 || self.tx >= max {
            self.tvx = -self.tvx;
            self.tx = self.tx.clamp(0, max);
        }
        if self.ty <= 0 || self.ty >= max {
            self.tvy = -self.tvy;
            self.ty = self.ty.clamp(0, max);
        }

        let touching =
            (self.ax - self.tx).abs() < self.side() && (self.ay - self.ty).abs() < self.side();
        if touching {
            self.respawn_target(rng);
            1.0
        } else {
            0.0
        }
    }

    fn render(&self, frame: &mut Image) {
        let s = self.side() as usize;
        fill_rect(frame, self.tx, self.ty, s, s, OBJECT);
        fill_rect(frame, self.ax, self.ay, s, s, PLAYER);
    }
}

/// Falling-block avoidance: the mirror image of catch. Survival pays a small
/// bonus every tick; getting hit costs -1. A careful player can always escape,
/// so the best return is exactly the survival bonus over the episode.
struct DodgeSim {
    size: usize,
    player_x: i64,
    block_col: i64,
    block_row: i64,
}

impl DodgeSim {
    const SPEED: i64 = 2;
    /// Sums to +0.01 per agent step at the default action repeat of 4.
    const SURVIVAL_PER_TICK: f32 = 0.0025;

    fn spawn(size: usize, rng: &mut ChaCha8Rng) -> DodgeSim {
        let mut s = DodgeSim { size, player_x: 0, block_col: 0, block_row: 0 };
        s.player_x = ((size - s.player_w()) / 2) as i64;
        s.block_col = s.draw_col(rng);
        s
    }

    fn player_w(&self) -> usize {
        (self.size * 10 / 84).max(4)
    }

    fn block_s(&self) -> usize {
        (self.size * 8 / 84).max(3)
    }

    fn draw_col(&self, rng: &mut ChaCha8Rng) -> i64 {
        rng.random_range(0..=(self.size - self.block_s()) as i64)
    }

    fn tick(&mut self, motor: usize, rng: &mut ChaCha8Rng) -> f32 {
        let dx = match motor {
            0 => -Self::SPEED,
            1 => 0,
            _ => Self::SPEED,
        };
        self.player_x = (self.player_x + dx).clamp(0, (self.size - self.player_w()) as i64);
        self.block_row += Self::SPEED;
        let land = self.size as i64 - 4 - self.block_s() as i64;
        let mut reward = Self::SURVIVAL_PER_TICK;
        if self.block_row >= land {
            let hit = self.block_col + self.block_s() as i64 > self.player_x
                && self.block_col < self.player_x + self.player_w() as i64;
            if hit {
                reward -= 1.0;
            }
            self.block_row = 0;
            self.block_col = self.draw_col(rng);
        }
        reward
    }

    fn render(&self, frame: &mut Image) {
        let top = self.size as i64 - 4;
        fill_rect(frame, top, self.player_x, 3, self.player_w(), PLAYER);
        if self.block_row >= 0 {
            fill_rect(frame, self.block_row, self.block_col, self.block_s(), self.block_s(), OBJECT);
        }
    }
}
