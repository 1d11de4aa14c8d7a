use std::collections::VecDeque;

use super::SearchProblem;
use crate::grid::{Cell, Direction, MazeTask};

impl SearchProblem for MazeTask {
    type State = Cell;

    fn start(&self) -> Cell {
        MazeTask::start(self)
    }

    fn is_goal(&self, state: &Cell) -> bool {
        *state == self.goal()
    }

    fn heuristic(&self, state: &Cell) -> u32 {
        state.manhattan(self.goal())
    }

    fn successors(&self, state: &Cell, out: &mut Vec<Cell>) {
        out.extend(
            Direction::ALL
                .into_iter()
                .filter_map(|d| state.step(d, self.width(), self.height()))
                .filter(|&c| self.is_free(c)),
        );
    }
}

/// Exact shortest-path move count by breadth-first search; `None` when the goal is unreachable.
pub fn bfs_optimal_cost(task: &MazeTask) -> Option<u32> {
    let (w, h) = (usize::from(task.width()), usize::from(task.height()));
    let idx = |c: Cell| usize::from(c.y) * w + usize::from(c.x);
    let mut dist = vec![u32::MAX; w * h];
    let mut queue = VecDeque::from([task.start()]);
    dist[idx(task.start())] = 0;
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)];
        if c == task.goal() {
            return Some(d);
        }
        for dir in Direction::ALL {
            if let Some(n) = c.step(dir, task.width(), task.height()) {
                if task.is_free(n) && dist[idx(n)] == u32::MAX {
                    dist[idx(n)] = d + 1;
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_manhattan() {
        let m = MazeTask::new(3, 3, [], Cell::new(0, 0), Cell::new(2, 2)).unwrap();
        assert_eq!(bfs_optimal_cost(&m), Some(4));
    }

    #[test]
    fn walled_in_goal() {
        let walls = [Cell::new(3, 2), Cell::new(1, 2), Cell::new(2, 1), Cell::new(2, 3)];
        let m = MazeTask::new(5, 5, walls, Cell::new(0, 0), Cell::new(2, 2)).unwrap();
        assert_eq!(bfs_optimal_cost(&m), None);
    }

    #[test]
    fn detour_around_wall() {
        // Wall column at x = 1 leaves only the bottom row open.
        let walls = [Cell::new(1, 0), Cell::new(1, 1)];
        let m = MazeTask::new(3, 3, walls, Cell::new(0, 0), Cell::new(2, 0)).unwrap();
        assert_eq!(bfs_optimal_cost(&m), Some(6));
    }
}
