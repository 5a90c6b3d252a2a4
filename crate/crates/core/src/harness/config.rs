//! Experiment configuration as flat `key = value` text.
//!
//! Lines are `key = value`; `#` starts a comment. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `problem` | `cooling`, `inverted` or `quartic` |
//! | `controller` | `zero`, `optimal`, `discretized`, `bang-bang`, `damping`, `quadratic`, `gaussian`, `dqn` |
//! | `input` | network input for training and `dqn`: `moments`, `wavefunction`, `measurement` |
//! | `checkpoint` | network file for the `dqn` controller |
//! | `episodes`, `seed`, `out` | run size, master seed, output directory |
//! | `workers` | actor threads for training (1 trains synchronously) |
//! | `m`, `gamma`, `dt`, `force_bound`, `controls_per_unit_time`, `t_max` | physics of the selected problem |
//! | `k`, `n_max`, `fail_index` | quadratic potential, basis size and the basis level watched for failure |
//! | `lambda`, `d`, `x_min`, `x_max`, `taylor_order`, `k_range`, `fail_energy` | quartic potential and grid |
//! | `levels`, `zeta`, `quadratic_k`, `damping_cancels_potential` | controller settings |
//! | `train.episodes`, `train.batch_size`, `train.replays`, `train.capacity_episodes`, `train.hidden` | training overrides |
//! | `surface.x`, `surface.p` | response-surface ranges as `lo:hi:count` |
//! | `riccati.r` | control-cost weight for the `riccati` subcommand |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::control::{ControlPolicy, PolicyKind};
use crate::osc::QuadraticParams;
use crate::quartic::QuarticParams;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Cooling,
    Inverted,
    Quartic,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Cooling => "cooling",
            Problem::Inverted => "inverted",
            Problem::Quartic => "quartic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cooling" => Problem::Cooling,
            "inverted" => Problem::Inverted,
            "quartic" => Problem::Quartic,
            _ => return None,
        })
    }
}

/// What the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputCase {
    /// (⟨x⟩, ⟨p⟩, Vx, Vp, C) for quadratic problems; the 20 moments up to fifth order for the quartic one.
    Moments,
    /// Real and imaginary parts of the state (first 40 basis amplitudes, or the grid without 15 points per border).
    Wavefunction,
    /// Force and measurement-signal history as two channels.
    Measurement,
}

impl InputCase {
    pub fn name(&self) -> &'static str {
        match self {
            InputCase::Moments => "moments",
            InputCase::Wavefunction => "wavefunction",
            InputCase::Measurement => "measurement",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "moments" => InputCase::Moments,
            "wavefunction" => InputCase::Wavefunction,
            "measurement" => InputCase::Measurement,
            _ => return None,
        })
    }

    /// 1-based case number used by the training presets.
    pub fn number(&self) -> usize {
        match self {
            InputCase::Moments => 1,
            InputCase::Wavefunction => 2,
            InputCase::Measurement => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64)
            .collect()
    }

    fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return None;
        }
        let r = Range {
            lo: parts[0].trim().parse().ok()?,
            hi: parts[1].trim().parse().ok()?,
            count: parts[2].trim().parse().ok()?,
        };
        (r.count >= 1 && r.hi >= r.lo).then_some(r)
    }
}

/// Training overrides on top of the problem presets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOverrides {
    pub episodes: Option<usize>,
    pub batch_size: Option<usize>,
    pub replays: Option<f64>,
    pub capacity_episodes: Option<usize>,
    /// Replaces the network widths: `trunk, branch` (e.g. `64,32`).
    pub hidden: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub policy: ControlPolicy,
    pub input: InputCase,
    pub checkpoint: Option<PathBuf>,
    pub episodes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub quadratic: QuadraticParams,
    pub quartic: QuarticParams,
    pub train: TrainOverrides,
    pub surface_x: Range,
    pub surface_p: Range,
    pub riccati_r: f64,
}

impl ExperimentConfig {
    /// Parameter tables of the three problems with their reference controller.
    pub fn preset(problem: Problem) -> Self {
        let quadratic = match problem {
            Problem::Inverted => QuadraticParams::inverted(),
            _ => QuadraticParams::cooling(),
        };
        let quartic = QuarticParams::default();
        let (kind, bound, episodes) = match problem {
            Problem::Cooling => (PolicyKind::OptimalTrajectory, quadratic.force_bound, 100),
            Problem::Inverted => (PolicyKind::OptimalTrajectory, quadratic.force_bound, 200),
            Problem::Quartic => (PolicyKind::GaussianApprox, quartic.force_bound, 30),
        };
        let span = if problem == Problem::Inverted { 3.0 } else { 2.0 };
        Self {
            problem,
            policy: ControlPolicy::new(kind, bound),
            input: InputCase::Moments,
            checkpoint: None,
            episodes,
            seed: 0,
            out: PathBuf::from("out"),
            workers: 1,
            quadratic,
            quartic,
            train: TrainOverrides::default(),
            surface_x: Range { lo: -span, hi: span, count: 101 },
            surface_p: Range { lo: -span, hi: span, count: 101 },
            riccati_r: 1e-2,
        }
    }

    pub fn preset_by_name(name: &str) -> Option<Self> {
        Some(Self::preset(match name {
            "cooling-paper" => Problem::Cooling,
            "inverted-paper" => Problem::Inverted,
            "quartic-paper" => Problem::Quartic,
            _ => return None,
        }))
    }

    /// Parses `key = value` text on top of a preset chosen by `problem`
    /// (default cooling).
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let pairs = parse_pairs(text)?;
        let problem = match pairs.get("problem") {
            Some(p) => Problem::parse(p).ok_or_else(|| cfg(format!("unknown problem '{p}'")))?,
            None => Problem::Cooling,
        };
        let mut c = Self::preset(problem);
        c.apply(&pairs)?;
        Ok(c)
    }

    /// Applies overrides; `problem` is ignored here.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), HarnessError> {
        for (key, value) in pairs {
            self.set(key, value)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
            v.parse().map_err(|_| cfg(format!("{key}: cannot parse '{v}'")))
        }
        let quartic = self.problem == Problem::Quartic;
        let q = &mut self.quadratic;
        let w = &mut self.quartic;
        match key {
            "problem" => {}
            "controller" => {
                self.policy.kind = PolicyKind::parse(value).ok_or_else(|| cfg(format!("unknown controller '{value}'")))?
            }
            "input" => self.input = InputCase::parse(value).ok_or_else(|| cfg(format!("unknown input '{value}'")))?,
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "episodes" => self.episodes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = num(key, value)?,
            "k" => q.k = num(key, value)?,
            "m" if quartic => w.m = num(key, value)?,
            "m" => q.m = num(key, value)?,
            "gamma" if quartic => w.gamma = num(key, value)?,
            "gamma" => q.gamma = num(key, value)?,
            "dt" if quartic => w.dt = num(key, value)?,
            "dt" => q.dt = num(key, value)?,
            "n_max" => q.n_max = num(key, value)?,
            "fail_index" => q.fail_index = num(key, value)?,
            "force_bound" => {
                let b = num(key, value)?;
                if quartic {
                    w.force_bound = b;
                } else {
                    q.force_bound = b;
                }
                self.policy.bound = b;
            }
            "controls_per_unit_time" if quartic => w.controls_per_unit_time = num(key, value)?,
            "controls_per_unit_time" => q.controls_per_unit_time = num(key, value)?,
            "t_max" if quartic => w.t_max = num(key, value)?,
            "t_max" => q.t_max = num(key, value)?,
            "lambda" => w.lambda = num(key, value)?,
            "d" => w.d = num(key, value)?,
            "x_min" => w.x_min = num(key, value)?,
            "x_max" => w.x_max = num(key, value)?,
            "taylor_order" => w.taylor_order = num(key, value)?,
            "k_range" => w.init.k_range = num(key, value)?,
            "fail_energy" => w.fail_energy = num(key, value)?,
            "levels" => self.policy.levels = num(key, value)?,
            "zeta" => self.policy.zeta = num(key, value)?,
            "quadratic_k" => self.policy.quadratic_k = num(key, value)?,
            "damping_cancels_potential" => self.policy.damping_cancels_potential = num(key, value)?,
            "train.episodes" => self.train.episodes = Some(num(key, value)?),
            "train.batch_size" => self.train.batch_size = Some(num(key, value)?),
            "train.replays" => self.train.replays = Some(num(key, value)?),
            "train.capacity_episodes" => self.train.capacity_episodes = Some(num(key, value)?),
            "train.hidden" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(cfg(format!("{key}: expected 'trunk,branch'")));
                }
                self.train.hidden = Some((num(key, parts[0])?, num(key, parts[1])?));
            }
            "surface.x" => self.surface_x = Range::parse(value).ok_or_else(|| cfg(format!("{key}: expected lo:hi:count")))?,
            "surface.p" => self.surface_p = Range::parse(value).ok_or_else(|| cfg(format!("{key}: expected lo:hi:count")))?,
            "riccati.r" => self.riccati_r = num(key, value)?,
            _ => return Err(cfg(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match self.problem {
            Problem::Quartic => self.quartic.validate(),
            _ => self.quadratic.validate(),
        }
        .map_err(|e| cfg(e.to_string()))?;
        if self.episodes == 0 {
            return Err(cfg("episodes must be positive".into()));
        }
        if self.policy.levels < 2 {
            return Err(cfg("levels must be at least 2".into()));
        }
        let quartic_kind = self.policy.kind.is_quartic();
        if self.problem == Problem::Quartic && !quartic_kind && !matches!(self.policy.kind, PolicyKind::Zero | PolicyKind::Dqn) {
            return Err(cfg(format!("controller '{}' does not apply to the quartic problem", self.policy.kind.name())));
        }
        if self.problem != Problem::Quartic && quartic_kind {
            return Err(cfg(format!("controller '{}' only applies to the quartic problem", self.policy.kind.name())));
        }
        if self.problem == Problem::Quartic && self.input == InputCase::Measurement {
            return Err(cfg("the quartic problem supports moments or wavefunction input".into()));
        }
        if !(self.riccati_r > 0.0) {
            return Err(cfg("riccati.r must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces the configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let q = &self.quadratic;
        let w = &self.quartic;
        let _ = writeln!(s, "problem = {}", self.problem.name());
        let _ = writeln!(s, "controller = {}", self.policy.kind.name());
        let _ = writeln!(s, "input = {}", self.input.name());
        if let Some(p) = &self.checkpoint {
            let _ = writeln!(s, "checkpoint = {}", p.display());
        }
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "workers = {}", self.workers);
        let (m, gamma, dt, bound, n_con, t_max) = match self.problem {
            Problem::Quartic => (w.m, w.gamma, w.dt, w.force_bound, w.controls_per_unit_time, w.t_max),
            _ => (q.m, q.gamma, q.dt, q.force_bound, q.controls_per_unit_time, q.t_max),
        };
        let _ = writeln!(s, "m = {m:?}\ngamma = {gamma:?}\ndt = {dt:?}\nforce_bound = {bound:?}");
        let _ = writeln!(s, "controls_per_unit_time = {n_con}\nt_max = {t_max:?}");
        if self.problem == Problem::Quartic {
            let _ = writeln!(s, "lambda = {:?}\nd = {:?}\nx_min = {:?}\nx_max = {:?}", w.lambda, w.d, w.x_min, w.x_max);
            let _ = writeln!(s, "taylor_order = {}\nk_range = {:?}\nfail_energy = {:?}", w.taylor_order, w.init.k_range, w.fail_energy);
        } else {
            let _ = writeln!(s, "k = {:?}\nn_max = {}\nfail_index = {}", q.k, q.n_max, q.fail_index);
        }
        let p = &self.policy;
        let _ = writeln!(s, "levels = {}\nzeta = {:?}\nquadratic_k = {:?}", p.levels, p.zeta, p.quadratic_k);
        let _ = writeln!(s, "damping_cancels_potential = {}", p.damping_cancels_potential);
        let t = &self.train;
        if let Some(v) = t.episodes {
            let _ = writeln!(s, "train.episodes = {v}");
        }
        if let Some(v) = t.batch_size {
            let _ = writeln!(s, "train.batch_size = {v}");
        }
        if let Some(v) = t.replays {
            let _ = writeln!(s, "train.replays = {v:?}");
        }
        if let Some(v) = t.capacity_episodes {
            let _ = writeln!(s, "train.capacity_episodes = {v}");
        }
        if let Some((a, b)) = t.hidden {
            let _ = writeln!(s, "train.hidden = {a},{b}");
        }
        let r = |r: &Range| format!("{:?}:{:?}:{}", r.lo, r.hi, r.count);
        let _ = writeln!(s, "surface.x = {}\nsurface.p = {}", r(&self.surface_x), r(&self.surface_p));
        let _ = writeln!(s, "riccati.r = {:?}", self.riccati_r);
        s
    }
}

fn cfg(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(cfg(format!("line {}: empty key", i + 1)));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(cfg(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(map)
}
