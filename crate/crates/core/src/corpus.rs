//! Raw datasets, disjoint splits and per-epoch dropped training files.
//!
//! Every file is JSONL with token fields written as space-separated token names. Raw records
//! always hold the complete trace; dropping only happens when an epoch file is materialized,
//! and is reproducible from `(train file, policy, seed, epoch)`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dropping::{apply_level, sample_level, DropError, DropPolicy};
use crate::grid::{generate_maze, generate_sokoban, Cell, GridError, MazeParams, Task, TaskFingerprint, TaskKind};
use crate::search::{astar, bfs_optimal_cost, sokoban_optimal_cost, SearchError};
use crate::seed::{stream_for, SeedStream};
use crate::tokenize::{
    clauses_from_maze_trace, clauses_from_sokoban_trace, control_prompt, decode_plan, decode_trace, encode_plan,
    encode_prompt, encode_response, encode_trace, Clause, ControlMode, TokenError, TokenSeq, Vocab,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Drop(#[from] DropError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("example {id}: {msg}")]
    Example { id: u64, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Which environment a dataset is drawn from.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvConfig {
    Maze(MazeParams),
    Sokoban,
}

impl EnvConfig {
    pub fn kind(&self) -> TaskKind {
        match self {
            EnvConfig::Maze(_) => TaskKind::Maze,
            EnvConfig::Sokoban => TaskKind::Sokoban,
        }
    }

    pub fn vocab(&self) -> Vocab {
        match self {
            EnvConfig::Maze(p) => Vocab::for_maze(p.dim),
            EnvConfig::Sokoban => Vocab::for_sokoban(),
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        match self {
            EnvConfig::Maze(p) => p.validate(),
            EnvConfig::Sokoban => Ok(()),
        }
    }

    pub fn generate<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Task, GridError> {
        Ok(match self {
            EnvConfig::Maze(p) => generate_maze(rng, p)?.into(),
            EnvConfig::Sokoban => generate_sokoban(rng)?.into(),
        })
    }
}

/// A search trace in clause form with the plan's agent positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub trace: Vec<Clause>,
    pub plan: Vec<Cell>,
    pub cost: u32,
}

/// Exact optimal cost by exhaustive search.
pub fn oracle_cost(task: &Task) -> Option<u32> {
    match task {
        Task::Maze(m) => bfs_optimal_cost(m),
        Task::Sokoban(s) => sokoban_optimal_cost(s),
    }
}

/// Runs randomized A* and converts the result to clauses and plan cells.
pub fn solve_task<R: rand::Rng + ?Sized>(task: &Task, rng: &mut R) -> Result<Solution, SearchError> {
    match task {
        Task::Maze(m) => {
            let r = astar(m, rng)?;
            Ok(Solution { trace: clauses_from_maze_trace(&r.trace), cost: r.cost(), plan: r.plan })
        }
        Task::Sokoban(s) => {
            let r = astar(s, rng)?;
            Ok(Solution {
                trace: clauses_from_sokoban_trace(&r.trace, s.docks()),
                cost: r.cost(),
                plan: r.plan.iter().map(|st| st.worker).collect(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLine {
    pub id: u64,
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub id: u64,
    pub task: Task,
    pub prompt: TokenSeq,
    pub trace: TokenSeq,
    pub plan: TokenSeq,
    pub optimal_cost: u32,
}

impl RawExample {
    pub fn trace_clauses(&self) -> Result<Vec<Clause>, TokenError> {
        decode_trace(self.trace.as_slice(), self.task.kind())
    }

    pub fn plan_cells(&self) -> Result<Vec<Cell>, TokenError> {
        decode_plan(self.plan.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochExample {
    pub id: u64,
    pub input: TokenSeq,
    pub target: TokenSeq,
    pub level: u8,
}

fn try_generate(id: u64, env: &EnvConfig, master_seed: u64) -> Result<(Task, SeedStream), GridError> {
    let mut rng = stream_for(&[master_seed, id]);
    let task = env.generate(&mut rng)?;
    Ok((task, rng))
}

/// Builds one raw record. The same stream first draws the task, then drives the search.
pub fn build_example(id: u64, env: &EnvConfig, master_seed: u64, vocab: &Vocab) -> Result<RawExample, CorpusError> {
    let (task, mut rng) = try_generate(id, env, master_seed)?;
    let solution = solve_task(&task, &mut rng)?;
    let oracle =
        oracle_cost(&task).ok_or_else(|| CorpusError::Example { id, msg: "oracle found no solution".into() })?;
    if solution.cost != oracle {
        return Err(CorpusError::Example {
            id,
            msg: format!("search cost {} differs from oracle cost {oracle}", solution.cost),
        });
    }
    Ok(RawExample {
        id,
        prompt: encode_prompt(&task, vocab)?,
        trace: encode_trace(&solution.trace, vocab)?,
        plan: encode_plan(&solution.plan, vocab)?,
        optimal_cost: oracle,
        task,
    })
}

/// `n` raw examples with ids `0..n`, each seeded from `(master_seed, id)`.
pub fn build_dataset(n: u64, env: &EnvConfig, master_seed: u64) -> Result<Vec<RawExample>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::Invalid("dataset size must be at least 1".into()));
    }
    env.validate()?;
    let vocab = env.vocab();
    (0..n).into_par_iter().map(|id| build_example(id, env, master_seed, &vocab)).collect()
}

/// The tasks [`build_dataset`] would produce, without searching.
pub fn generate_tasks(n: u64, env: &EnvConfig, master_seed: u64) -> Result<Vec<TaskLine>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::Invalid("task count must be at least 1".into()));
    }
    env.validate()?;
    (0..n).into_par_iter().map(|id| Ok(TaskLine { id, task: try_generate(id, env, master_seed)?.0 })).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<RawExample>,
    pub eval: Vec<RawExample>,
    /// Extra copies of duplicated tasks chosen for evaluation, kept out of both sides.
    pub discarded: Vec<u64>,
}

/// Sends `eval_count` distinct tasks to the evaluation side and everything else to training,
/// so that no fingerprint appears on both sides.
///
/// Tasks are taken from the end of the dataset, preferring those that occur exactly once.
/// If a duplicated task has to be used for evaluation, one copy is kept and the others are
/// discarded. Both outputs are ordered by id.
pub fn split_disjoint(raw: Vec<RawExample>, eval_count: usize) -> Result<Split, CorpusError> {
    let mut groups: Vec<(TaskFingerprint, Vec<usize>)> = Vec::new();
    let mut index: HashMap<TaskFingerprint, usize> = HashMap::new();
    for (i, ex) in raw.iter().enumerate() {
        let fp = ex.task.fingerprint();
        let g = *index.entry(fp).or_insert_with(|| {
            groups.push((fp, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    if eval_count == 0 || eval_count >= groups.len() {
        return Err(CorpusError::Invalid(format!(
            "cannot hold out {eval_count} tasks: need 1 <= eval count < {} distinct tasks",
            groups.len()
        )));
    }

    let singles = groups.iter().rev().filter(|(_, m)| m.len() == 1);
    let multis = groups.iter().rev().filter(|(_, m)| m.len() > 1);
    let chosen: Vec<&(TaskFingerprint, Vec<usize>)> = singles.chain(multis).take(eval_count).collect();

    let mut side = vec![Side::Train; raw.len()];
    for (_, members) in &chosen {
        side[members[0]] = Side::Eval;
        for &m in &members[1..] {
            side[m] = Side::Discard;
        }
    }
    let mut split = Split { train: Vec::new(), eval: Vec::new(), discarded: Vec::new() };
    for (ex, s) in raw.into_iter().zip(side) {
        match s {
            Side::Train => split.train.push(ex),
            Side::Eval => split.eval.push(ex),
            Side::Discard => split.discarded.push(ex.id),
        }
    }
    split.train.sort_by_key(|e| e.id);
    split.eval.sort_by_key(|e| e.id);
    Ok(split)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Train,
    Eval,
    Discard,
}

/// One epoch of training pairs: each example gets a level drawn from `policy` with the stream
/// seeded by `(master_seed, epoch, id)`, and its full trace is reduced accordingly.
pub fn materialize_epoch(
    train: &[RawExample],
    policy: &DropPolicy,
    vocab: &Vocab,
    master_seed: u64,
    epoch: u64,
) -> Result<Vec<EpochExample>, CorpusError> {
    train
        .par_iter()
        .map(|ex| {
            let mut rng = stream_for(&[master_seed, epoch, ex.id]);
            let level = sample_level(policy, &mut rng);
            let dropped = apply_level(&ex.trace_clauses()?, level, &mut rng, policy.create_drop_rate());
            let target = encode_response(&dropped.clauses, &ex.plan_cells()?, vocab)?;
            for t in ex.prompt.iter() {
                vocab.check(*t)?;
            }
            Ok(EpochExample { id: ex.id, input: ex.prompt.clone(), target, level: level.get() })
        })
        .collect()
}

/// Writes `id TAB control-prompt` lines for a trainer to sample from.
pub fn write_prompt_file<W: Write>(examples: &[RawExample], mode: ControlMode, mut w: W) -> Result<(), CorpusError> {
    for ex in examples {
        writeln!(w, "{}\t{}", ex.id, control_prompt(&ex.prompt, mode)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<(), CorpusError> {
    for (i, item) in items.iter().enumerate() {
        serde_json::to_writer(&mut w, item).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one record per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl_file<T: Serialize>(items: &[T], path: &Path) -> Result<(), CorpusError> {
    write_jsonl(items, BufWriter::new(File::create(path)?))
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    read_jsonl(BufReader::new(File::open(path)?))
}
