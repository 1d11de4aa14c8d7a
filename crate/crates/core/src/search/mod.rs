//! Randomized A* with execution-trace recording, and exact optimal-cost oracles.
//!
//! The engine is generic over [`SearchProblem`]. Every frontier insertion (or g-improvement)
//! is recorded as a `create` event and every expansion as a `close` event, in execution
//! order. Frontier ties on `f = g + h` are broken by a random key drawn per insertion, and
//! successors are visited in a fresh random permutation at each expansion.

mod maze;
mod sokoban;

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::grid::Cell;

pub use maze::bfs_optimal_cost;
pub use sokoban::{sokoban_heuristic, sokoban_optimal_cost, SokobanState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("search exhausted the reachable state space without reaching a goal")]
    Exhausted,
}

/// A unit-cost state space with an admissible heuristic.
pub trait SearchProblem {
    type State: Clone + Eq + Hash;

    fn start(&self) -> Self::State;

    fn is_goal(&self, state: &Self::State) -> bool;

    fn heuristic(&self, state: &Self::State) -> u32;

    /// Appends the states reachable in one move to `out`.
    fn successors(&self, state: &Self::State, out: &mut Vec<Self::State>);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Create,
    Close,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TraceEvent<S> {
    pub kind: EventKind,
    pub state: S,
    /// Cost since start.
    pub g: u32,
    /// Heuristic estimate of the remaining cost.
    pub h: u32,
}

impl<S> TraceEvent<S> {
    pub fn f(&self) -> u32 {
        self.g + self.h
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult<S> {
    pub trace: Vec<TraceEvent<S>>,
    /// States from start to goal inclusive.
    pub plan: Vec<S>,
}

impl<S> SearchResult<S> {
    /// Number of moves in the plan.
    pub fn cost(&self) -> u32 {
        self.plan.len().saturating_sub(1) as u32
    }
}

pub fn manhattan(a: Cell, b: Cell) -> u32 {
    a.manhattan(b)
}

struct Node<S> {
    state: S,
    g: u32,
    parent: Option<usize>,
    closed: bool,
}

/// Runs A* from the problem's start state. Closed states are never reopened, which is exact
/// for consistent heuristics.
pub fn astar<P, R>(problem: &P, rng: &mut R) -> Result<SearchResult<P::State>, SearchError>
where
    P: SearchProblem,
    R: Rng + ?Sized,
{
    let mut nodes: Vec<Node<P::State>> = Vec::new();
    let mut index: HashMap<P::State, usize> = HashMap::new();
    // (f, tie key, g, node); stale entries are skipped on pop.
    let mut open: BinaryHeap<Reverse<(u32, u64, u32, usize)>> = BinaryHeap::new();
    let mut trace = Vec::new();
    let mut children = Vec::new();

    let start = problem.start();
    let h0 = problem.heuristic(&start);
    trace.push(TraceEvent { kind: EventKind::Create, state: start.clone(), g: 0, h: h0 });
    index.insert(start.clone(), 0);
    nodes.push(Node { state: start, g: 0, parent: None, closed: false });
    open.push(Reverse((h0, rng.gen(), 0, 0)));

    while let Some(Reverse((f, _, g, id))) = open.pop() {
        let node = &mut nodes[id];
        if node.closed || node.g != g {
            continue;
        }
        node.closed = true;
        let state = node.state.clone();
        trace.push(TraceEvent { kind: EventKind::Close, state: state.clone(), g, h: f - g });
        if problem.is_goal(&state) {
            let mut plan = vec![state];
            let mut at = nodes[id].parent;
            while let Some(p) = at {
                plan.push(nodes[p].state.clone());
                at = nodes[p].parent;
            }
            plan.reverse();
            return Ok(SearchResult { trace, plan });
        }

        children.clear();
        problem.successors(&state, &mut children);
        children.shuffle(rng);
        let child_g = g + 1;
        for child in children.drain(..) {
            let child_id = match index.entry(child) {
                Entry::Occupied(e) => {
                    let n = &mut nodes[*e.get()];
                    if n.closed || child_g >= n.g {
                        continue;
                    }
                    n.g = child_g;
                    n.parent = Some(id);
                    *e.get()
                }
                Entry::Vacant(e) => {
                    let new_id = nodes.len();
                    nodes.push(Node { state: e.key().clone(), g: child_g, parent: Some(id), closed: false });
                    e.insert(new_id);
                    new_id
                }
            };
            let child_state = nodes[child_id].state.clone();
            let h = problem.heuristic(&child_state);
            trace.push(TraceEvent { kind: EventKind::Create, state: child_state, g: child_g, h });
            open.push(Reverse((child_g + h, rng.gen(), child_g, child_id)));
        }
    }
    Err(SearchError::Exhausted)
}

/// A violation found by [`check_trace`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceViolation {
    CloseWithoutCreate { index: usize },
    ClosedTwice { index: usize },
    DecreasingF { index: usize, previous: u32, current: u32 },
    LastCloseNotGoal,
    Empty,
}

/// Checks trace well-formedness: each close is preceded by a create of the same state with
/// the same g, no state is closed twice, closes have non-decreasing f, and the last close
/// is a goal state.
pub fn check_trace<P: SearchProblem>(problem: &P, trace: &[TraceEvent<P::State>]) -> Vec<TraceViolation> {
    let mut violations = Vec::new();
    let mut created: HashMap<&P::State, Vec<u32>> = HashMap::new();
    let mut closed = std::collections::HashSet::new();
    let mut last_f: Option<u32> = None;
    let mut last_close = None;
    for (i, ev) in trace.iter().enumerate() {
        match ev.kind {
            EventKind::Create => created.entry(&ev.state).or_default().push(ev.g),
            EventKind::Close => {
                if !created.get(&ev.state).is_some_and(|gs| gs.contains(&ev.g)) {
                    violations.push(TraceViolation::CloseWithoutCreate { index: i });
                }
                if !closed.insert(&ev.state) {
                    violations.push(TraceViolation::ClosedTwice { index: i });
                }
                if let Some(prev) = last_f {
                    if ev.f() < prev {
                        violations.push(TraceViolation::DecreasingF { index: i, previous: prev, current: ev.f() });
                    }
                }
                last_f = Some(ev.f());
                last_close = Some(ev);
            }
        }
    }
    match last_close {
        None => violations.push(TraceViolation::Empty),
        Some(ev) if !problem.is_goal(&ev.state) => violations.push(TraceViolation::LastCloseNotGoal),
        Some(_) => {}
    }
    violations
}
