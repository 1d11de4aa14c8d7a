//! Structured trace dropping.
//!
//! Three primitives act on a trace: removing `close` clauses, removing cost tokens, and
//! removing `create` clauses. They are only exposed composed into cumulative levels:
//!
//! | level | effect                                                     |
//! |-------|------------------------------------------------------------|
//! | 0     | full trace                                                 |
//! | 1     | every `close` clause removed                               |
//! | 2     | level 1, then cost tokens stripped from every clause       |
//! | 3     | level 2, then each `create` clause dropped i.i.d. at a rate |
//! | 4     | empty trace                                                |
//!
//! A [`DropPolicy`] is a categorical distribution over the five levels.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::search::EventKind;
use crate::tokenize::Clause;

/// Default create-clause drop rate at level 3.
pub const DEFAULT_CREATE_DROP_RATE: f64 = 0.3;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DropError {
    #[error("dropping level must be 0..=4, got {0}")]
    InvalidLevel(u8),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("unknown policy preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DropLevel(u8);

impl DropLevel {
    pub const FULL: DropLevel = DropLevel(0);
    pub const NO_CLOSE: DropLevel = DropLevel(1);
    pub const NO_COSTS: DropLevel = DropLevel(2);
    pub const SPARSE_CREATE: DropLevel = DropLevel(3);
    pub const NO_TRACE: DropLevel = DropLevel(4);

    pub const ALL: [DropLevel; 5] = [DropLevel(0), DropLevel(1), DropLevel(2), DropLevel(3), DropLevel(4)];

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for DropLevel {
    type Error = DropError;

    fn try_from(v: u8) -> Result<Self, DropError> {
        if v <= 4 {
            Ok(DropLevel(v))
        } else {
            Err(DropError::InvalidLevel(v))
        }
    }
}

impl fmt::Display for DropLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Categorical level distribution plus the level-3 create-drop rate.
#[derive(Clone, Debug, PartialEq)]
pub struct DropPolicy {
    probs: [f64; 5],
    create_drop_rate: f64,
}

impl DropPolicy {
    pub fn new(probs: [f64; 5], create_drop_rate: f64) -> Result<Self, DropError> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(DropError::InvalidPolicy(format!("probability {p} is negative or not finite")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DropError::InvalidPolicy(format!("probabilities sum to {sum}, not 1")));
        }
        if !(0.0..=1.0).contains(&create_drop_rate) {
            return Err(DropError::InvalidPolicy(format!("create drop rate {create_drop_rate} is outside [0, 1]")));
        }
        Ok(DropPolicy { probs, create_drop_rate })
    }

    pub fn with_default_rate(probs: [f64; 5]) -> Result<Self, DropError> {
        DropPolicy::new(probs, DEFAULT_CREATE_DROP_RATE)
    }

    pub fn probs(&self) -> [f64; 5] {
        self.probs
    }

    pub fn create_drop_rate(&self) -> f64 {
        self.create_drop_rate
    }

    pub fn with_create_drop_rate(self, rate: f64) -> Result<Self, DropError> {
        DropPolicy::new(self.probs, rate)
    }

    /// Looks up a named preset. Besides the fixed names in [`PRESETS`], `mix-<p>` mixes a
    /// fraction `p` of solution-only targets into full-trace data.
    pub fn preset(name: &str) -> Result<Self, DropError> {
        if let Some(&(_, probs, _)) = PRESETS.iter().find(|(n, _, _)| *n == name) {
            return DropPolicy::with_default_rate(probs);
        }
        if let Some(p) = name.strip_prefix("mix-") {
            let p: f64 = p.parse().map_err(|_| DropError::UnknownPreset(name.into()))?;
            return DropPolicy::mix(p);
        }
        Err(DropError::UnknownPreset(name.into()))
    }

    /// Fraction `p` of solution-only examples, the rest full traces.
    pub fn mix(p: f64) -> Result<Self, DropError> {
        DropPolicy::with_default_rate([1.0 - p, 0.0, 0.0, 0.0, p])
    }
}

const SIXTH: f64 = 1.0 / 6.0;

/// Named presets: `(name, [p0..p4], description)`.
pub const PRESETS: &[(&str, [f64; 5], &str)] = &[
    ("maze-default", [0.45, SIXTH, SIXTH, SIXTH, 0.05], "maze training mix"),
    ("sokoban-default", [0.7, 0.05, 0.1, 0.1, 0.05], "sokoban training mix"),
    ("level1", [0.5, 0.5, 0.0, 0.0, 0.0], "maze ablation: level 1 only"),
    ("level12", [0.5, 0.25, 0.25, 0.0, 0.0], "maze ablation: levels 1-2"),
    ("level123", [0.5, SIXTH, SIXTH, SIXTH, 0.0], "maze ablation: levels 1-3"),
    ("sokoban-level1", [0.95, 0.05, 0.0, 0.0, 0.0], "sokoban ablation: level 1 only"),
    ("sokoban-level12", [0.85, 0.05, 0.1, 0.0, 0.0], "sokoban ablation: levels 1-2"),
    ("sokoban-level123", [0.75, 0.05, 0.1, 0.1, 0.0], "sokoban ablation: levels 1-3"),
    ("complete-trace", [1.0, 0.0, 0.0, 0.0, 0.0], "full traces only"),
    ("solution-only", [0.0, 0.0, 0.0, 0.0, 1.0], "plans only"),
];

/// Draws a level with probability `p_k`.
pub fn sample_level<R: Rng + ?Sized>(policy: &DropPolicy, rng: &mut R) -> DropLevel {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in policy.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return DropLevel(k as u8);
        }
    }
    // Rounding left `u` above the cumulative sum: take the last level with mass.
    let last = policy.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    DropLevel(last as u8)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedTrace {
    pub clauses: Vec<Clause>,
    pub level: DropLevel,
}

impl DroppedTrace {
    pub fn costs_present(&self) -> bool {
        self.level < DropLevel::NO_COSTS
    }
}

fn drop_closes(trace: &[Clause]) -> Vec<Clause> {
    trace.iter().filter(|c| c.kind != EventKind::Close).cloned().collect()
}

fn strip_costs(trace: Vec<Clause>) -> Vec<Clause> {
    trace.into_iter().map(|c| Clause { costs: None, ..c }).collect()
}

fn drop_creates<R: Rng + ?Sized>(trace: Vec<Clause>, rate: f64, rng: &mut R) -> Vec<Clause> {
    trace.into_iter().filter(|c| c.kind != EventKind::Create || !rng.gen_bool(rate)).collect()
}

/// Applies one cumulative dropping level. `rng` is only consumed at level 3, one draw per
/// `create` clause.
pub fn apply_level<R: Rng + ?Sized>(
    trace: &[Clause],
    level: DropLevel,
    rng: &mut R,
    create_drop_rate: f64,
) -> DroppedTrace {
    let clauses = match level.0 {
        0 => trace.to_vec(),
        1 => drop_closes(trace),
        2 => strip_costs(drop_closes(trace)),
        3 => drop_creates(strip_costs(drop_closes(trace)), create_drop_rate, rng),
        _ => Vec::new(),
    };
    DroppedTrace { clauses, level }
}

/// Keeps each step independently with probability `1 - p`, preserving order.
///
/// # Panics
/// If `p` is outside `[0, 1]`.
pub fn drop_steps_uniform<T: Clone, R: Rng + ?Sized>(steps: &[T], p: f64, rng: &mut R) -> Vec<T> {
    assert!((0.0..=1.0).contains(&p), "drop probability {p} outside [0, 1]");
    steps.iter().filter(|_| !rng.gen_bool(p)).cloned().collect()
}
