//! Plan validation and rollout metrics.
//!
//! Each evaluation task gets `N` rollouts (64 by default). Per task we record a verdict for
//! every rollout and derive k-Solved-N and k-Optimal-N for k in {1, 3}, success weighted by
//! cost (SWC), the number of distinct correct plans, and the mean trace length in tokens.
//! Aggregates are plain means over tasks.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::RawExample;
use crate::grid::{Cell, Direction, Task};
use crate::scalar::{mean, Scalar};
use crate::search::SokobanState;
use crate::tokenize::{
    continuation_after_control, decode_rollout, encode_response, ControlMode, ParsedRollout, TokenError, TokenSeq,
    Vocab,
};

pub const DEFAULT_ROLLOUTS_PER_TASK: usize = 64;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("task {id}: expected {expected} rollouts, found {found}")]
    RolloutCount { id: u64, expected: usize, found: usize },
    #[error("rollout file names task {id}, which is not in the evaluation set")]
    UnknownTask { id: u64 },
    #[error("rollout line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PlanVerdict {
    /// Feasible from the initial state and ends in a goal state.
    pub correct: bool,
    /// Number of moves, when correct.
    pub cost: Option<u32>,
    pub optimal: bool,
}

impl PlanVerdict {
    pub const INCORRECT: PlanVerdict = PlanVerdict { correct: false, cost: None, optimal: false };

    fn correct(cost: u32, optimal_cost: u32) -> Self {
        PlanVerdict { correct: true, cost: Some(cost), optimal: cost == optimal_cost }
    }
}

/// Checks a plan of agent positions against the task's dynamics. Never fails; anything
/// infeasible is simply incorrect.
pub fn validate_plan(task: &Task, plan: &[Cell], optimal_cost: u32) -> PlanVerdict {
    let Some((&first, _)) = plan.split_first() else {
        return PlanVerdict::INCORRECT;
    };
    let moves = (plan.len() - 1) as u32;
    match task {
        Task::Maze(m) => {
            let feasible = first == m.start()
                && plan.last() == Some(&m.goal())
                && plan.iter().all(|&c| m.is_free(c))
                && plan.windows(2).all(|w| w[0].is_adjacent(w[1]));
            if feasible {
                PlanVerdict::correct(moves, optimal_cost)
            } else {
                PlanVerdict::INCORRECT
            }
        }
        Task::Sokoban(s) => {
            if first != s.worker() {
                return PlanVerdict::INCORRECT;
            }
            let mut state = SokobanState::initial(s);
            for w in plan.windows(2) {
                let next = Direction::between(w[0], w[1]).and_then(|d| state.apply(s, d));
                match next {
                    Some(n) => state = n,
                    None => return PlanVerdict::INCORRECT,
                }
            }
            if state.is_solved(s) {
                PlanVerdict::correct(moves, optimal_cost)
            } else {
                PlanVerdict::INCORRECT
            }
        }
    }
}

/// Mean over rollouts of `1(correct) * c* / c`. A correct zero-move plan scores 1.
pub fn swc<S: Scalar>(verdicts: &[PlanVerdict], optimal_cost: u32) -> S {
    if verdicts.is_empty() {
        return S::zero();
    }
    let total = verdicts.iter().filter(|v| v.correct).fold(S::zero(), |acc, v| match v.cost {
        Some(0) | None => acc + S::one(),
        Some(c) => acc + S::from_ratio(u64::from(optimal_cost), u64::from(c)),
    });
    total / S::from_count(verdicts.len() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Solved,
    Optimal,
}

/// At least `k` verdicts meet the criterion.
pub fn k_of_n(verdicts: &[PlanVerdict], k: usize, criterion: Criterion) -> bool {
    let hits = verdicts
        .iter()
        .filter(|v| match criterion {
            Criterion::Solved => v.correct,
            Criterion::Optimal => v.optimal,
        })
        .count();
    hits >= k
}

/// Number of distinct correct plans, compared as exact cell sequences.
pub fn diversity(plans: &[Vec<Cell>], verdicts: &[PlanVerdict]) -> usize {
    plans.iter().zip(verdicts).filter(|(_, v)| v.correct).map(|(p, _)| p.as_slice()).collect::<HashSet<_>>().len()
}

/// Mean trace tokens per rollout (clause tokens only).
pub fn avg_trace_length<S: Scalar>(rollouts: &[ParsedRollout]) -> S {
    let lens: Vec<S> = rollouts.iter().map(|r| S::from_count(r.trace_token_count() as u64)).collect();
    mean(&lens)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskMetrics<S> {
    pub id: u64,
    pub optimal_cost: u32,
    pub verdicts: Vec<PlanVerdict>,
    pub swc: S,
    pub unique_correct: usize,
    pub trace_lengths: Vec<usize>,
    pub avg_trace_length: S,
    pub solved_1: bool,
    pub solved_3: bool,
    pub optimal_1: bool,
    pub optimal_3: bool,
    /// Rollouts with an empty trace.
    pub fast_rollouts: usize,
    pub diagnostics: usize,
}

impl<S: Scalar> TaskMetrics<S> {
    pub fn compute(id: u64, task: &Task, optimal_cost: u32, rollouts: &[ParsedRollout]) -> Self {
        let verdicts: Vec<PlanVerdict> = rollouts.iter().map(|r| validate_plan(task, &r.plan, optimal_cost)).collect();
        let plans: Vec<Vec<Cell>> = rollouts.iter().map(|r| r.plan.clone()).collect();
        TaskMetrics {
            id,
            optimal_cost,
            swc: swc(&verdicts, optimal_cost),
            unique_correct: diversity(&plans, &verdicts),
            trace_lengths: rollouts.iter().map(ParsedRollout::trace_token_count).collect(),
            avg_trace_length: avg_trace_length(rollouts),
            solved_1: k_of_n(&verdicts, 1, Criterion::Solved),
            solved_3: k_of_n(&verdicts, 3, Criterion::Solved),
            optimal_1: k_of_n(&verdicts, 1, Criterion::Optimal),
            optimal_3: k_of_n(&verdicts, 3, Criterion::Optimal),
            fast_rollouts: rollouts.iter().filter(|r| r.trace.is_empty()).count(),
            diagnostics: rollouts.iter().map(|r| r.diagnostics.len()).sum(),
            verdicts,
        }
    }
}

/// Means over tasks. Rates are fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport<S> {
    pub method: String,
    pub mode: ControlMode,
    pub n_per_task: usize,
    pub task_count: usize,
    pub avg_trace_length: S,
    pub optimal_1: S,
    pub optimal_3: S,
    pub solved_1: S,
    pub solved_3: S,
    pub swc: S,
    pub diversity: S,
    pub fast_fraction: S,
}

impl<S: Scalar> AggregateReport<S> {
    pub fn from_tasks(method: &str, mode: ControlMode, n_per_task: usize, tasks: &[TaskMetrics<S>]) -> Self {
        let rate = |f: fn(&TaskMetrics<S>) -> bool| -> S {
            mean(&tasks.iter().map(|t| if f(t) { S::one() } else { S::zero() }).collect::<Vec<_>>())
        };
        let avg = |f: fn(&TaskMetrics<S>) -> S| -> S { mean(&tasks.iter().map(f).collect::<Vec<_>>()) };
        AggregateReport {
            method: method.to_owned(),
            mode,
            n_per_task,
            task_count: tasks.len(),
            avg_trace_length: avg(|t| t.avg_trace_length.clone()),
            optimal_1: rate(|t| t.optimal_1),
            optimal_3: rate(|t| t.optimal_3),
            solved_1: rate(|t| t.solved_1),
            solved_3: rate(|t| t.solved_3),
            swc: avg(|t| t.swc.clone()),
            diversity: avg(|t| S::from_count(t.unique_correct as u64)),
            fast_fraction: avg(|t| S::from_ratio(t.fast_rollouts as u64, t.verdicts.len().max(1) as u64)),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "method": self.method,
            "mode": self.mode,
            "n_per_task": self.n_per_task,
            "task_count": self.task_count,
            "avg_trace_length": self.avg_trace_length.as_f64(),
            "optimal_1": self.optimal_1.as_f64(),
            "optimal_3": self.optimal_3.as_f64(),
            "solved_1": self.solved_1.as_f64(),
            "solved_3": self.solved_3.as_f64(),
            "swc": self.swc.as_f64(),
            "diversity": self.diversity.as_f64(),
            "fast_fraction": self.fast_fraction.as_f64(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation<S> {
    pub report: AggregateReport<S>,
    pub tasks: Vec<TaskMetrics<S>>,
}

impl<S: Scalar> Evaluation<S> {
    /// Full report: aggregate plus per-task detail, in task-id order.
    pub fn to_json(&self) -> Value {
        let tasks: Vec<Value> = self
            .tasks
            .iter()
            .map(|t| {
                json!({
                    "id": t.id,
                    "optimal_cost": t.optimal_cost,
                    "verdicts": t.verdicts,
                    "swc": t.swc.as_f64(),
                    "unique_correct": t.unique_correct,
                    "trace_lengths": t.trace_lengths,
                    "avg_trace_length": t.avg_trace_length.as_f64(),
                    "solved_1": t.solved_1,
                    "solved_3": t.solved_3,
                    "optimal_1": t.optimal_1,
                    "optimal_3": t.optimal_3,
                    "fast_rollouts": t.fast_rollouts,
                    "diagnostics": t.diagnostics,
                })
            })
            .collect();
        json!({ "report": self.report.to_json(), "tasks": tasks })
    }
}

/// Aligned text table, one row per report: trace length, k-Optimal, k-Solved (as
/// percentages), SWC and diversity.
pub fn render_table<S: Scalar>(reports: &[AggregateReport<S>]) -> String {
    let n = reports.first().map_or(DEFAULT_ROLLOUTS_PER_TASK, |r| r.n_per_task);
    let header: Vec<String> = [
        "Method".to_owned(),
        "Avg Trace Length".to_owned(),
        format!("1-Optimal-{n}"),
        format!("3-Optimal-{n}"),
        format!("1-Solved-{n}"),
        format!("3-Solved-{n}"),
        "SWC".to_owned(),
        "Diversity".to_owned(),
    ]
    .into();
    let pct = |s: &S| format!("{:.1}", 100.0 * s.as_f64());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                format!("{:.1}", r.avg_trace_length.as_f64()),
                pct(&r.optimal_1),
                pct(&r.optimal_3),
                pct(&r.solved_1),
                pct(&r.solved_3),
                format!("{:.3}", r.swc.as_f64()),
                format!("{:.2}", r.diversity.as_f64()),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// One line of a rollout file: `task id TAB tokens`, further tab-separated columns ignored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RolloutLine {
    pub id: u64,
    pub tokens: TokenSeq,
    /// Names in the token column that are not vocabulary tokens; they are dropped.
    pub unknown: Vec<String>,
}

pub fn read_rollouts<R: BufRead>(r: R) -> Result<Vec<RolloutLine>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let id_col = cols.next().unwrap_or_default().trim();
        let id =
            id_col.parse().map_err(|_| EvalError::Parse { line: i + 1, msg: format!("bad task id `{id_col}`") })?;
        let (tokens, unknown) = TokenSeq::parse_lossy(cols.next().unwrap_or_default());
        out.push(RolloutLine { id, tokens, unknown });
    }
    Ok(out)
}

pub fn write_rollouts<W: Write>(lines: &[RolloutLine], mut w: W) -> io::Result<()> {
    for l in lines {
        writeln!(w, "{}\t{}", l.id, l.tokens)?;
    }
    w.flush()
}

/// What a perfect model would generate after the controlled prompt: the stored plan, with the
/// full trace in slow and auto mode. Useful as an evaluator self-test.
pub fn oracle_rollouts(
    examples: &[RawExample],
    n_per_task: usize,
    mode: ControlMode,
) -> Result<Vec<RolloutLine>, EvalError> {
    let mut out = Vec::with_capacity(examples.len() * n_per_task);
    for ex in examples {
        let vocab = Vocab::for_task(&ex.task);
        let trace = if mode == ControlMode::Fast { Vec::new() } else { ex.trace_clauses()? };
        let response = encode_response(&trace, &ex.plan_cells()?, &vocab)?;
        let tokens = continuation_after_control(&response, mode)
            .ok_or_else(|| EvalError::Invalid(format!("task {}: oracle response does not fit {mode} mode", ex.id)))?;
        out.extend((0..n_per_task).map(|_| RolloutLine { id: ex.id, tokens: tokens.clone(), unknown: Vec::new() }));
    }
    Ok(out)
}

/// Scores rollouts against their tasks. Every evaluation task needs exactly `n_per_task`
/// rollouts and every rollout must name an evaluation task.
pub fn evaluate<S: Scalar>(
    examples: &[RawExample],
    rollouts: &[RolloutLine],
    n_per_task: usize,
    control: ControlMode,
    method: &str,
) -> Result<Evaluation<S>, EvalError> {
    if n_per_task == 0 {
        return Err(EvalError::Invalid("rollouts per task must be at least 1".into()));
    }
    let mut by_id: BTreeMap<u64, Vec<&RolloutLine>> = examples.iter().map(|e| (e.id, Vec::new())).collect();
    for r in rollouts {
        by_id.get_mut(&r.id).ok_or(EvalError::UnknownTask { id: r.id })?.push(r);
    }
    for (&id, rs) in &by_id {
        if rs.len() != n_per_task {
            return Err(EvalError::RolloutCount { id, expected: n_per_task, found: rs.len() });
        }
    }
    let mut ordered: Vec<&RawExample> = examples.iter().collect();
    ordered.sort_by_key(|e| e.id);
    let tasks: Vec<TaskMetrics<S>> = ordered
        .par_iter()
        .map(|ex| {
            let parsed: Vec<ParsedRollout> =
                by_id[&ex.id].iter().map(|r| decode_rollout(r.tokens.as_slice(), ex.task.kind(), control)).collect();
            TaskMetrics::compute(ex.id, &ex.task, ex.optimal_cost, &parsed)
        })
        .collect();
    Ok(Evaluation { report: AggregateReport::from_tasks(method, control, n_per_task, &tasks), tasks })
}
