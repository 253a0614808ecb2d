//! Run configuration: a flat INI-style file with `[env]`, `[pvm]`,
//! `[agent]`, `[eval]` and `[run]` sections. Every key has a default,
//! unknown keys are rejected with their full path, and the canonicalized
//! key-value form (sorted keys, LF endings) defines the config hash stored
//! with every artifact.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::{AgentConfig, AgentKind, JointMode, RewardMode};
use crate::artifacts::fnv1a64;
use crate::envkit::{ControlMode, EnvConfig, ToyKind};
use crate::evalkit::{center_anchor, BaselineKind};
use crate::pvm::{PvmConfig, PvmKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: expected `key = value` or `[section]`")]
    Syntax { line: usize },
    #[error("unknown config section `[{0}]`")]
    UnknownSection(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

/// Named default bundles: `desk` is the scaled-down schedule and network for
/// the toy environments; `paper` keeps the published table values (80k learn
/// start, 100k epsilon decay, 100k replay, the 84x84 standardized encoder).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "desk" => Some(Preset::Desk),
            "paper" => Some(Preset::Paper),
            _ => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

/// Which agent the run trains or evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKindCfg {
    Dual,
    Single,
    RandomView,
    RasterScan,
    Static,
}

impl AgentKindCfg {
    fn parse(s: &str) -> Option<AgentKindCfg> {
        match s {
            "dual" => Some(AgentKindCfg::Dual),
            "single" => Some(AgentKindCfg::Single),
            "random-view" => Some(AgentKindCfg::RandomView),
            "raster-scan" => Some(AgentKindCfg::RasterScan),
            "static" => Some(AgentKindCfg::Static),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            AgentKindCfg::Dual => "dual",
            AgentKindCfg::Single => "single",
            AgentKindCfg::RandomView => "random-view",
            AgentKindCfg::RasterScan => "raster-scan",
            AgentKindCfg::Static => "static",
        }
    }
}

/// The complete, validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub env: EnvConfig,
    pub pvm: PvmConfig,
    pub agent: AgentConfig,
    pub agent_kind: AgentKindCfg,
    pub static_anchor: usize,
    pub eval_episodes: usize,
    pub eval_reference: Option<PathBuf>,
    pub total_steps: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn defaults(preset: Preset) -> RunConfig {
        let agent = match preset {
            Preset::Paper => AgentConfig::default(),
            Preset::Desk => AgentConfig {
                eps_decay_steps: 20_000,
                learn_start: 5_000,
                replay_capacity: 20_000,
                input_hw: 36,
                conv_channels: [8, 16, 16],
                dense: 64,
                ..AgentConfig::default()
            },
        };
        let total_steps = match preset {
            Preset::Paper => 1_000_000,
            Preset::Desk => 200_000,
        };
        RunConfig {
            preset,
            env: EnvConfig::default(),
            pvm: PvmConfig::default(),
            agent,
            agent_kind: AgentKindCfg::Dual,
            static_anchor: center_anchor(),
            eval_episodes: 10,
            eval_reference: None,
            total_steps,
            seeds: vec![1],
            out_dir: PathBuf::from("runs"),
        }
    }

    pub fn from_file(path: &Path, preset_override: Option<Preset>) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_str_source(&text, preset_override)
    }

    pub fn from_str_source(
        text: &str,
        preset_override: Option<Preset>,
    ) -> Result<RunConfig, ConfigError> {
        let entries = parse_entries(text)?;
        // The preset decides the defaults, so resolve it first: CLI override
        // beats the file key beats `desk`.
        let preset = match preset_override {
            Some(p) => p,
            None => match entries.iter().find(|(k, _)| k == "run.preset") {
                Some((k, v)) => Preset::parse(v).ok_or_else(|| ConfigError::BadValue {
                    key: k.clone(),
                    reason: format!("expected `desk` or `paper`, got `{v}`"),
                })?,
                None => Preset::Desk,
            },
        };
        let mut cfg = RunConfig::defaults(preset);
        cfg.preset = preset;
        let mut foveal_res_set = false;
        for (key, value) in &entries {
            cfg.apply(key, value, &mut foveal_res_set)?;
        }
        if !foveal_res_set {
            cfg.env.foveal_res = cfg.env.fovea;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str, foveal_res_set: &mut bool) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue { key: key.to_string(), reason };
        macro_rules! parse {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|e| bad(e.to_string()))?
            };
        }
        match key {
            "env.name" => {
                self.env.name = ToyKind::parse(value)
                    .ok_or_else(|| bad(format!("unknown environment `{value}`")))?
            }
            "env.seed" => self.env.seed = parse!(u64),
            "env.frame_size" => self.env.frame_size = parse!(usize),
            "env.fovea" => {
                let v = parse!(usize);
                self.env.fovea = (v, v);
            }
            "env.foveal_res" => {
                let v = parse!(usize);
                self.env.foveal_res = (v, v);
                *foveal_res_set = true;
            }
            "env.peripheral" => self.env.peripheral = parse_bool(key, value)?,
            "env.peripheral_res" => {
                let v = parse!(usize);
                self.env.peripheral_res = (v, v);
            }
            "env.control" => {
                self.env.control = match value {
                    "absolute" => ControlMode::Absolute,
                    "relative" => ControlMode::Relative,
                    _ => return Err(bad(format!("expected `absolute` or `relative`, got `{value}`"))),
                }
            }
            "env.max_episode_len" => self.env.max_episode_len = parse!(usize),
            "env.action_repeat" => self.env.action_repeat = parse!(usize),
            "env.frame_stack" => self.env.frame_stack = parse!(usize),
            "pvm.kind" => {
                self.pvm.kind = match value {
                    "stitch" => PvmKind::Stitch,
                    "stack" => PvmKind::Stack,
                    "off" => PvmKind::Off,
                    _ => return Err(bad(format!("expected stitch|stack|off, got `{value}`"))),
                }
            }
            "pvm.window" => self.pvm.window = parse!(usize),
            "agent.kind" => {
                self.agent_kind = AgentKindCfg::parse(value)
                    .ok_or_else(|| bad(format!("unknown agent kind `{value}`")))?
            }
            "agent.static_anchor" => self.static_anchor = parse!(usize),
            "agent.gamma" => self.agent.gamma = parse!(f32),
            "agent.eps_start" => self.agent.eps_start = parse!(f32),
            "agent.eps_end" => self.agent.eps_end = parse!(f32),
            "agent.eps_decay_steps" => self.agent.eps_decay_steps = parse!(usize),
            "agent.learn_start" => self.agent.learn_start = parse!(usize),
            "agent.train_freq" => self.agent.train_freq = parse!(usize),
            "agent.target_update_freq" => self.agent.target_update_freq = parse!(usize),
            "agent.batch_size" => self.agent.batch_size = parse!(usize),
            "agent.reward_train_freq" => self.agent.reward_train_freq = parse!(usize),
            "agent.lr" => self.agent.lr = parse!(f64),
            "agent.reward_lr" => self.agent.reward_lr = parse!(f64),
            "agent.beta" => {
                self.agent.beta = if value == "auto" {
                    None
                } else {
                    Some(parse!(f32))
                }
            }
            "agent.balance" => self.agent.balance = parse_bool(key, value)?,
            "agent.reward_mode" => {
                self.agent.reward_mode = match value {
                    "negative" => RewardMode::Negative,
                    "positive" => RewardMode::Positive,
                    "off" => RewardMode::Off,
                    _ => return Err(bad(format!("expected negative|positive|off, got `{value}`"))),
                }
            }
            "agent.joint" => {
                self.agent.joint = match value {
                    "shared" => JointMode::Shared,
                    "separate" => JointMode::Separate,
                    _ => return Err(bad(format!("expected shared|separate, got `{value}`"))),
                }
            }
            "agent.replay_capacity" => self.agent.replay_capacity = parse!(usize),
            "agent.input_hw" => self.agent.input_hw = parse!(usize),
            "agent.conv_channels" => {
                let parts: Vec<_> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad(format!("expected three comma-separated values, got `{value}`")));
                }
                let mut out = [0usize; 3];
                for (slot, part) in out.iter_mut().zip(&parts) {
                    *slot = part.parse().map_err(|e| bad(format!("{e}")))?;
                }
                self.agent.conv_channels = out;
            }
            "agent.dense" => self.agent.dense = parse!(usize),
            "eval.episodes" => self.eval_episodes = parse!(usize),
            "eval.reference" => {
                self.eval_reference =
                    if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "run.total_steps" => self.total_steps = parse!(usize),
            "run.seeds" => {
                let mut seeds = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    seeds.push(part.parse::<u64>().map_err(|e| bad(format!("{e}")))?);
                }
                if seeds.is_empty() {
                    return Err(bad("need at least one seed".into()));
                }
                self.seeds = seeds;
            }
            "run.out" => self.out_dir = PathBuf::from(value),
            "run.preset" => {
                // Already consumed during preset resolution; accept silently
                // so canonical files re-parse.
                Preset::parse(value)
                    .ok_or_else(|| bad(format!("expected `desk` or `paper`, got `{value}`")))?;
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.env.fovea.0 > self.env.frame_size {
            return Err(ConfigError::BadValue {
                key: "env.fovea".into(),
                reason: format!(
                    "fovea {} does not fit in a {}x{} frame",
                    self.env.fovea.0, self.env.frame_size, self.env.frame_size
                ),
            });
        }
        self.env.validate().map_err(|e| ConfigError::BadValue {
            key: "env".into(),
            reason: e.to_string(),
        })?;
        if self.pvm.window == 0 {
            return Err(ConfigError::BadValue {
                key: "pvm.window".into(),
                reason: "window must be at least 1".into(),
            });
        }
        if self.static_anchor >= 16 {
            return Err(ConfigError::BadValue {
                key: "agent.static_anchor".into(),
                reason: format!("anchor {} out of range 0..16", self.static_anchor),
            });
        }
        if !(0.0..1.0).contains(&self.agent.gamma) {
            return Err(ConfigError::BadValue {
                key: "agent.gamma".into(),
                reason: format!("gamma {} outside (0, 1)", self.agent.gamma),
            });
        }
        if self.agent.eps_end > self.agent.eps_start {
            return Err(ConfigError::BadValue {
                key: "agent.eps_end".into(),
                reason: "eps_end must not exceed eps_start".into(),
            });
        }
        if self.agent.batch_size == 0 || self.agent.replay_capacity < self.agent.batch_size {
            return Err(ConfigError::BadValue {
                key: "agent.replay_capacity".into(),
                reason: "replay capacity must hold at least one batch".into(),
            });
        }
        // The encoder must fit the input; EncoderSpec::scaled panics on
        // impossible geometry, so probe it here and report properly.
        if self.agent.input_hw < 36 {
            return Err(ConfigError::BadValue {
                key: "agent.input_hw".into(),
                reason: format!("input {} too small for the conv stack (minimum 36)", self.agent.input_hw),
            });
        }
        Ok(())
    }

    /// Maps the configured agent kind onto the trainer's variant.
    pub fn agent_kind(&self) -> AgentKind {
        match self.agent_kind {
            AgentKindCfg::Dual => AgentKind::Dual,
            AgentKindCfg::Single => AgentKind::SinglePolicy,
            AgentKindCfg::RandomView => AgentKind::FixedSensory(BaselineKind::RandomView),
            AgentKindCfg::RasterScan => AgentKind::FixedSensory(BaselineKind::RasterScan),
            AgentKindCfg::Static => {
                AgentKind::FixedSensory(BaselineKind::Static(self.static_anchor))
            }
        }
    }

    /// Canonical serialization: every key, sorted, `section.key = value`,
    /// LF endings. This is what the config hash covers.
    pub fn canonical(&self) -> String {
        let mut pairs: Vec<(String, String)> = vec![
            ("agent.balance".into(), self.agent.balance.to_string()),
            ("agent.batch_size".into(), self.agent.batch_size.to_string()),
            (
                "agent.beta".into(),
                match self.agent.beta {
                    Some(b) => b.to_string(),
                    None => "auto".into(),
                },
            ),
            (
                "agent.conv_channels".into(),
                format!(
                    "{},{},{}",
                    self.agent.conv_channels[0],
                    self.agent.conv_channels[1],
                    self.agent.conv_channels[2]
                ),
            ),
            ("agent.dense".into(), self.agent.dense.to_string()),
            ("agent.eps_decay_steps".into(), self.agent.eps_decay_steps.to_string()),
            ("agent.eps_end".into(), self.agent.eps_end.to_string()),
            ("agent.eps_start".into(), self.agent.eps_start.to_string()),
            ("agent.gamma".into(), self.agent.gamma.to_string()),
            (
                "agent.joint".into(),
                match self.agent.joint {
                    JointMode::Shared => "shared".into(),
                    JointMode::Separate => "separate".into(),
                },
            ),
            ("agent.kind".into(), self.agent_kind.name().to_string()),
            ("agent.learn_start".into(), self.agent.learn_start.to_string()),
            ("agent.lr".into(), self.agent.lr.to_string()),
            ("agent.replay_capacity".into(), self.agent.replay_capacity.to_string()),
            ("agent.input_hw".into(), self.agent.input_hw.to_string()),
            (
                "agent.reward_mode".into(),
                match self.agent.reward_mode {
                    RewardMode::Negative => "negative".into(),
                    RewardMode::Positive => "positive".into(),
                    RewardMode::Off => "off".into(),
                },
            ),
            ("agent.reward_lr".into(), self.agent.reward_lr.to_string()),
            ("agent.reward_train_freq".into(), self.agent.reward_train_freq.to_string()),
            ("agent.static_anchor".into(), self.static_anchor.to_string()),
            ("agent.target_update_freq".into(), self.agent.target_update_freq.to_string()),
            ("agent.train_freq".into(), self.agent.train_freq.to_string()),
            ("env.action_repeat".into(), self.env.action_repeat.to_string()),
            (
                "env.control".into(),
                match self.env.control {
                    ControlMode::Absolute => "absolute".into(),
                    ControlMode::Relative => "relative".into(),
                },
            ),
            ("env.fovea".into(), self.env.fovea.0.to_string()),
            ("env.foveal_res".into(), self.env.foveal_res.0.to_string()),
            ("env.frame_size".into(), self.env.frame_size.to_string()),
            ("env.frame_stack".into(), self.env.frame_stack.to_string()),
            ("env.max_episode_len".into(), self.env.max_episode_len.to_string()),
            ("env.name".into(), self.env.name.name().to_string()),
            ("env.peripheral".into(), self.env.peripheral.to_string()),
            ("env.peripheral_res".into(), self.env.peripheral_res.0.to_string()),
            ("env.seed".into(), self.env.seed.to_string()),
            ("eval.episodes".into(), self.eval_episodes.to_string()),
            (
                "eval.reference".into(),
                self.eval_reference
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            (
                "pvm.kind".into(),
                match self.pvm.kind {
                    PvmKind::Stitch => "stitch".into(),
                    PvmKind::Stack => "stack".into(),
                    PvmKind::Off => "off".into(),
                },
            ),
            ("pvm.window".into(), self.pvm.window.to_string()),
            ("run.preset".into(), self.preset.to_string()),
            (
                "run.seeds".into(),
                self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            ("run.total_steps".into(), self.total_steps.to_string()),
        ];
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Hash of the canonical form, stored in manifests and reports. The
    /// output directory is deliberately excluded: where artifacts land does
    /// not change what they contain.
    pub fn hash_hex(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical().as_bytes()))
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: format!("expected a boolean, got `{value}`"),
        }),
    }
}

/// Parses INI-style text into `section.key`/value pairs, in file order.
fn parse_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    const SECTIONS: [&str; 5] = ["env", "pvm", "agent", "eval", "run"];
    let mut entries = Vec::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection(name.to_string()));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: lineno + 1 })?;
        let key = key.trim();
        if key.is_empty() || section.is_empty() {
            return Err(ConfigError::Syntax { line: lineno + 1 });
        }
        entries.push((format!("{section}.{key}"), value.trim().to_string()));
    }
    Ok(entries)
}
