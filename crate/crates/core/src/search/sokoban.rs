use std::collections::{HashSet, VecDeque};

use super::SearchProblem;
use crate::grid::{Cell, Direction, SokobanTask};

/// A full Sokoban configuration: worker cell plus every box cell, sorted.
///
/// Docked boxes are kept here so that distinct configurations never collide; the token
/// view that omits them is built by the tokenizer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SokobanState {
    pub worker: Cell,
    pub boxes: Vec<Cell>,
}

impl SokobanState {
    pub fn initial(task: &SokobanTask) -> Self {
        SokobanState { worker: task.worker(), boxes: task.boxes().to_vec() }
    }

    pub fn is_solved(&self, task: &SokobanTask) -> bool {
        self.boxes.iter().all(|b| task.docks().contains(b))
    }

    /// Boxes not resting on a dock, sorted.
    pub fn off_dock_boxes(&self, docks: &[Cell]) -> Vec<Cell> {
        self.boxes.iter().copied().filter(|b| !docks.contains(b)).collect()
    }

    /// Moves the worker one step. Walking into a box pushes it one cell further, which
    /// must be free of walls and boxes. Returns `None` for an illegal move.
    pub fn apply(&self, task: &SokobanTask, dir: Direction) -> Option<SokobanState> {
        let (w, h) = (task.width(), task.height());
        let next = self.worker.step(dir, w, h)?;
        if task.is_wall(next) {
            return None;
        }
        let mut boxes = self.boxes.clone();
        if let Some(i) = boxes.iter().position(|&b| b == next) {
            let beyond = next.step(dir, w, h)?;
            if task.is_wall(beyond) || boxes.contains(&beyond) {
                return None;
            }
            boxes[i] = beyond;
            boxes.sort();
        }
        Some(SokobanState { worker: next, boxes })
    }
}

/// Sum over off-dock boxes of the Manhattan distance to the nearest dock.
pub fn sokoban_heuristic(boxes: &[Cell], docks: &[Cell]) -> u32 {
    boxes.iter().filter(|b| !docks.contains(b)).map(|b| docks.iter().map(|d| b.manhattan(*d)).min().unwrap_or(0)).sum()
}

impl SearchProblem for SokobanTask {
    type State = SokobanState;

    fn start(&self) -> SokobanState {
        SokobanState::initial(self)
    }

    fn is_goal(&self, state: &SokobanState) -> bool {
        state.is_solved(self)
    }

    fn heuristic(&self, state: &SokobanState) -> u32 {
        sokoban_heuristic(&state.boxes, self.docks())
    }

    fn successors(&self, state: &SokobanState, out: &mut Vec<SokobanState>) {
        out.extend(Direction::ALL.into_iter().filter_map(|d| state.apply(self, d)));
    }
}

/// Exact minimal number of worker moves (pushes included) that docks every box, by
/// breadth-first search over full configurations; `None` when no solution exists.
pub fn sokoban_optimal_cost(task: &SokobanTask) -> Option<u32> {
    let start = SokobanState::initial(task);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0u32)]);
    while let Some((state, d)) = queue.pop_front() {
        if state.is_solved(task) {
            return Some(d);
        }
        for dir in Direction::ALL {
            if let Some(next) = state.apply(task, dir) {
                if seen.insert(next.clone()) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{astar, check_trace, EventKind};
    use crate::seed::stream;

    fn c(x: u8, y: u8) -> Cell {
        Cell::new(x, y)
    }

    /// Brute-force oracle: iterative deepening over raw move sequences.
    fn iddfs_cost(task: &SokobanTask, limit: u32) -> Option<u32> {
        fn dfs(task: &SokobanTask, s: &SokobanState, depth: u32) -> bool {
            if s.is_solved(task) {
                return true;
            }
            depth > 0 && Direction::ALL.into_iter().any(|d| s.apply(task, d).is_some_and(|n| dfs(task, &n, depth - 1)))
        }
        let s = SokobanState::initial(task);
        (0..=limit).find(|&d| dfs(task, &s, d))
    }

    #[test]
    fn heuristic_fixture_values() {
        assert_eq!(sokoban_heuristic(&[c(2, 4), c(3, 4)], &[c(1, 3), c(4, 4)]), 3);
        assert_eq!(sokoban_heuristic(&[c(1, 3), c(4, 4)], &[c(1, 3), c(4, 4)]), 0);
        assert_eq!(sokoban_heuristic(&[c(0, 0)], &[c(3, 0), c(0, 5)]), 3);
    }

    #[test]
    fn docked_start_costs_zero() {
        let t = SokobanTask::new([], [c(2, 2), c(4, 4)], [c(2, 2), c(4, 4)], c(3, 3)).unwrap();
        assert_eq!(sokoban_optimal_cost(&t), Some(0));
    }

    #[test]
    fn single_push_up_a_clear_column() {
        // Worker directly below the box, dock directly above it; the other box is docked.
        let t = SokobanTask::new([], [c(2, 2), c(4, 4)], [c(2, 3), c(4, 4)], c(2, 4)).unwrap();
        assert_eq!(iddfs_cost(&t, 6), Some(1));
        assert_eq!(sokoban_optimal_cost(&t), Some(1));
        // Worker three moves from the pushing position.
        let t = SokobanTask::new([], [c(2, 2), c(4, 4)], [c(2, 3), c(4, 4)], c(4, 5)).unwrap();
        assert_eq!(iddfs_cost(&t, 8), Some(4));
        assert_eq!(sokoban_optimal_cost(&t), Some(4));
    }

    #[test]
    fn push_dynamics() {
        let t = SokobanTask::new([c(3, 1)], [c(1, 1), c(5, 5)], [c(3, 2), c(4, 3)], c(3, 3)).unwrap();
        let s = SokobanState::initial(&t);
        // Box at (3,2) is blocked by the wall at (3,1).
        assert_eq!(s.apply(&t, Direction::Up), None);
        let pushed = s.apply(&t, Direction::Right).unwrap();
        assert_eq!(pushed.worker, c(4, 3));
        assert_eq!(pushed.boxes, vec![c(3, 2), c(5, 3)]);
        // Box pushed against the boundary ring cannot move further.
        assert_eq!(pushed.apply(&t, Direction::Right), None);
        let walked = s.apply(&t, Direction::Down).unwrap();
        assert_eq!(walked.boxes, s.boxes);
    }

    #[test]
    fn box_against_box_is_blocked() {
        let t = SokobanTask::new([], [c(1, 1), c(5, 5)], [c(2, 3), c(3, 3)], c(1, 3)).unwrap();
        assert_eq!(SokobanState::initial(&t).apply(&t, Direction::Right), None);
    }

    #[test]
    fn fixture_trace_starts_with_create_then_close() {
        let t = SokobanTask::new([c(1, 1), c(5, 5)], [c(1, 3), c(4, 4)], [c(2, 4), c(3, 4)], c(2, 3)).unwrap();
        let r = astar(&t, &mut stream(0)).unwrap();
        assert_eq!(r.trace[0].kind, EventKind::Create);
        assert_eq!((r.trace[0].g, r.trace[0].h), (0, 3));
        assert_eq!(r.trace[0].state.worker, c(2, 3));
        assert_eq!(r.trace[1].kind, EventKind::Close);
        assert_eq!(r.trace[1].state, r.trace[0].state);
        assert_eq!(Some(r.cost()), sokoban_optimal_cost(&t));
        assert!(check_trace(&t, &r.trace).is_empty());
    }

    #[test]
    fn astar_matches_brute_force_on_small_instances() {
        let t = SokobanTask::new([], [c(2, 1), c(5, 3)], [c(2, 2), c(4, 3)], c(2, 3)).unwrap();
        let brute = iddfs_cost(&t, 10);
        assert!(brute.is_some());
        assert_eq!(sokoban_optimal_cost(&t), brute);
        for seed in 0..10 {
            assert_eq!(Some(astar(&t, &mut stream(seed)).unwrap().cost()), brute);
        }
    }

    #[test]
    fn corner_box_is_unsolvable() {
        let t = SokobanTask::new([], [c(3, 3), c(4, 4)], [c(1, 1), c(2, 4)], c(3, 2)).unwrap();
        assert_eq!(sokoban_optimal_cost(&t), None);
    }
}
