//! Maze and Sokoban task instances.
//!
//! Tasks are immutable once built. Generation is a pure function of the random stream and
//! the parameters; rejected candidates (unsolvable layouts) are redrawn from fresh randomness
//! until a retry budget runs out.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::search::{bfs_optimal_cost, sokoban_optimal_cost};

/// Default number of candidate layouts drawn before giving up.
pub const DEFAULT_RETRY_BUDGET: u32 = 10_000;

/// Largest supported grid side.
pub const MAX_DIM: u8 = 30;

/// Side length of every Sokoban board.
pub const SOKOBAN_DIM: u8 = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("no solvable task found within {0} attempts")]
    Exhausted(u32),
    #[error("overlay cell ({x}, {y}) is outside the {width}x{height} grid")]
    OverlayOutOfBounds { x: u8, y: u8, width: u8, height: u8 },
}

/// A grid cell. Ordering is lexicographic by `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u8; 2]", into = "[u8; 2]")]
pub struct Cell {
    pub x: u8,
    pub y: u8,
}

impl Cell {
    pub const fn new(x: u8, y: u8) -> Self {
        Cell { x, y }
    }

    /// The neighbour in `dir`, if it stays inside a `width` x `height` grid.
    pub fn step(self, dir: Direction, width: u8, height: u8) -> Option<Cell> {
        let (dx, dy) = dir.delta();
        let x = i16::from(self.x) + dx;
        let y = i16::from(self.y) + dy;
        if x < 0 || y < 0 || x >= i16::from(width) || y >= i16::from(height) {
            return None;
        }
        Some(Cell::new(x as u8, y as u8))
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        u32::from(self.x.abs_diff(other.x)) + u32::from(self.y.abs_diff(other.y))
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }

    /// Row-major ordering key (y first, then x).
    pub fn row_major(self) -> (u8, u8) {
        (self.y, self.x)
    }
}

impl From<[u8; 2]> for Cell {
    fn from([x, y]: [u8; 2]) -> Self {
        Cell::new(x, y)
    }
}

impl From<Cell> for [u8; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// 4-connected moves. `Up` decreases `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn delta(self) -> (i16, i16) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    /// Direction of a unit move from `from` to `to`, if they are 4-adjacent.
    pub fn between(from: Cell, to: Cell) -> Option<Direction> {
        let dx = i16::from(to.x) - i16::from(from.x);
        let dy = i16::from(to.y) - i16::from(from.y);
        Direction::ALL.into_iter().find(|d| d.delta() == (dx, dy))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Maze,
    Sokoban,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Maze => "maze",
            TaskKind::Sokoban => "sokoban",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MazeTask {
    width: u8,
    height: u8,
    walls: BTreeSet<Cell>,
    start: Cell,
    goal: Cell,
}

impl MazeTask {
    /// Checks the structural invariants. Solvability is not checked here; the generator
    /// guarantees it for the tasks it returns.
    pub fn new(
        width: u8,
        height: u8,
        walls: impl IntoIterator<Item = Cell>,
        start: Cell,
        goal: Cell,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || width > MAX_DIM || height > MAX_DIM {
            return Err(GridError::InvalidTask(format!("unsupported size {width}x{height}")));
        }
        let walls: BTreeSet<Cell> = walls.into_iter().collect();
        let inside = |c: &Cell| c.x < width && c.y < height;
        if let Some(c) = walls.iter().find(|c| !inside(c)) {
            return Err(GridError::InvalidTask(format!("wall {c} out of bounds")));
        }
        for (name, c) in [("start", start), ("goal", goal)] {
            if !inside(&c) {
                return Err(GridError::InvalidTask(format!("{name} {c} out of bounds")));
            }
            if walls.contains(&c) {
                return Err(GridError::InvalidTask(format!("{name} {c} is a wall")));
            }
        }
        if start == goal {
            return Err(GridError::InvalidTask("start equals goal".into()));
        }
        Ok(MazeTask { width, height, walls, start, goal })
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn height(&self) -> u8 {
        self.height
    }

    pub fn walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height && !self.walls.contains(&c)
    }

    /// Walls in row-major order, the order used in prompts.
    pub fn walls_row_major(&self) -> Vec<Cell> {
        let mut walls: Vec<Cell> = self.walls.iter().copied().collect();
        walls.sort_by_key(|c| c.row_major());
        walls
    }
}

/// A 7x7 Sokoban board. The boundary ring is always wall; `walls` holds the interior
/// obstacles only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SokobanTask {
    walls: BTreeSet<Cell>,
    docks: Vec<Cell>,
    boxes: Vec<Cell>,
    worker: Cell,
}

impl SokobanTask {
    pub fn new(
        interior_walls: impl IntoIterator<Item = Cell>,
        docks: impl IntoIterator<Item = Cell>,
        boxes: impl IntoIterator<Item = Cell>,
        worker: Cell,
    ) -> Result<Self, GridError> {
        let walls: BTreeSet<Cell> = interior_walls.into_iter().collect();
        let docks: BTreeSet<Cell> = docks.into_iter().collect();
        let boxes: BTreeSet<Cell> = boxes.into_iter().collect();
        if docks.len() != 2 || boxes.len() != 2 {
            return Err(GridError::InvalidTask(format!(
                "need 2 distinct docks and 2 distinct boxes, got {} and {}",
                docks.len(),
                boxes.len()
            )));
        }
        let interior = |c: &Cell| (1..SOKOBAN_DIM - 1).contains(&c.x) && (1..SOKOBAN_DIM - 1).contains(&c.y);
        for c in walls.iter().chain(&docks).chain(&boxes).chain(std::iter::once(&worker)) {
            if !interior(c) {
                return Err(GridError::InvalidTask(format!("cell {c} is not in the board interior")));
            }
        }
        if let Some(c) = docks.iter().chain(&boxes).chain(std::iter::once(&worker)).find(|c| walls.contains(c)) {
            return Err(GridError::InvalidTask(format!("cell {c} overlaps a wall")));
        }
        if boxes.contains(&worker) {
            return Err(GridError::InvalidTask(format!("worker {worker} stands on a box")));
        }
        Ok(SokobanTask { walls, docks: docks.into_iter().collect(), boxes: boxes.into_iter().collect(), worker })
    }

    pub fn width(&self) -> u8 {
        SOKOBAN_DIM
    }

    pub fn height(&self) -> u8 {
        SOKOBAN_DIM
    }

    pub fn interior_walls(&self) -> &BTreeSet<Cell> {
        &self.walls
    }

    /// Every wall cell including the boundary ring, sorted by `(x, y)`.
    pub fn all_walls(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = (0..SOKOBAN_DIM)
            .flat_map(|x| (0..SOKOBAN_DIM).map(move |y| Cell::new(x, y)))
            .filter(|&c| self.is_wall(c))
            .collect();
        out.sort();
        out
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        c.x == 0 || c.y == 0 || c.x >= SOKOBAN_DIM - 1 || c.y >= SOKOBAN_DIM - 1 || self.walls.contains(&c)
    }

    /// Docks, sorted.
    pub fn docks(&self) -> &[Cell] {
        &self.docks
    }

    /// Initial box positions, sorted.
    pub fn boxes(&self) -> &[Cell] {
        &self.boxes
    }

    pub fn worker(&self) -> Cell {
        self.worker
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TaskRecord", into = "TaskRecord")]
pub enum Task {
    Maze(MazeTask),
    Sokoban(SokobanTask),
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Maze(_) => TaskKind::Maze,
            Task::Sokoban(_) => TaskKind::Sokoban,
        }
    }

    pub fn width(&self) -> u8 {
        match self {
            Task::Maze(m) => m.width(),
            Task::Sokoban(s) => s.width(),
        }
    }

    pub fn height(&self) -> u8 {
        match self {
            Task::Maze(m) => m.height(),
            Task::Sokoban(s) => s.height(),
        }
    }

    /// Canonical JSON serialization: sets are sorted, key order is fixed.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("task records always serialize")
    }

    pub fn fingerprint(&self) -> TaskFingerprint {
        task_fingerprint(self)
    }
}

impl From<MazeTask> for Task {
    fn from(t: MazeTask) -> Self {
        Task::Maze(t)
    }
}

impl From<SokobanTask> for Task {
    fn from(t: SokobanTask) -> Self {
        Task::Sokoban(t)
    }
}

/// On-disk task layout. Field order here is the canonical key order.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TaskRecord {
    Maze { w: u8, h: u8, walls: Vec<Cell>, start: Cell, goal: Cell },
    Sokoban { w: u8, h: u8, walls: Vec<Cell>, docks: Vec<Cell>, boxes: Vec<Cell>, worker: Cell },
}

impl From<Task> for TaskRecord {
    fn from(task: Task) -> Self {
        match task {
            Task::Maze(m) => TaskRecord::Maze {
                w: m.width,
                h: m.height,
                walls: m.walls.into_iter().collect(),
                start: m.start,
                goal: m.goal,
            },
            Task::Sokoban(s) => TaskRecord::Sokoban {
                w: SOKOBAN_DIM,
                h: SOKOBAN_DIM,
                walls: s.walls.into_iter().collect(),
                docks: s.docks,
                boxes: s.boxes,
                worker: s.worker,
            },
        }
    }
}

impl TryFrom<TaskRecord> for Task {
    type Error = GridError;

    fn try_from(rec: TaskRecord) -> Result<Self, GridError> {
        match rec {
            TaskRecord::Maze { w, h, walls, start, goal } => Ok(Task::Maze(MazeTask::new(w, h, walls, start, goal)?)),
            TaskRecord::Sokoban { w, h, walls, docks, boxes, worker } => {
                if w != SOKOBAN_DIM || h != SOKOBAN_DIM {
                    return Err(GridError::InvalidTask(format!("sokoban boards are 7x7, got {w}x{h}")));
                }
                Ok(Task::Sokoban(SokobanTask::new(walls, docks, boxes, worker)?))
            }
        }
    }
}

/// SHA-256 digest of a task's canonical serialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskFingerprint([u8; 32]);

impl TaskFingerprint {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for TaskFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

pub fn task_fingerprint(task: &Task) -> TaskFingerprint {
    TaskFingerprint(Sha256::digest(task.canonical_json().as_bytes()).into())
}

/// Maze generation parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeParams {
    pub dim: u8,
    pub wall_lo: f64,
    pub wall_hi: f64,
    pub retry_budget: u32,
}

impl MazeParams {
    pub fn new(dim: u8, wall_lo: f64, wall_hi: f64) -> Self {
        MazeParams { dim, wall_lo, wall_hi, retry_budget: DEFAULT_RETRY_BUDGET }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(3..=MAX_DIM).contains(&self.dim) {
            return Err(GridError::InvalidParams(format!("dim must be in 3..=30, got {}", self.dim)));
        }
        if !(self.wall_lo > 0.0 && self.wall_lo <= self.wall_hi && self.wall_hi < 1.0) {
            return Err(GridError::InvalidParams(format!(
                "wall fraction range must satisfy 0 < lo <= hi < 1, got [{}, {}]",
                self.wall_lo, self.wall_hi
            )));
        }
        if self.retry_budget == 0 {
            return Err(GridError::InvalidParams("retry budget must be positive".into()));
        }
        Ok(())
    }

    /// Wall count for a drawn fraction.
    pub fn wall_count(&self, fraction: f64) -> usize {
        let cells = f64::from(self.dim) * f64::from(self.dim);
        (fraction * cells).round() as usize
    }
}

/// Draws a solvable square maze: `round(f * dim^2)` walls for `f ~ U[lo, hi]`, then distinct
/// start and goal cells uniformly among the free cells.
pub fn generate_maze<R: Rng + ?Sized>(rng: &mut R, params: &MazeParams) -> Result<MazeTask, GridError> {
    params.validate()?;
    let dim = params.dim;
    let cells = usize::from(dim) * usize::from(dim);
    let at = |i: usize| Cell::new((i % usize::from(dim)) as u8, (i / usize::from(dim)) as u8);
    for _ in 0..params.retry_budget {
        let fraction = rng.gen_range(params.wall_lo..=params.wall_hi);
        let n_walls = params.wall_count(fraction);
        if n_walls + 2 > cells {
            continue;
        }
        let mut is_wall = vec![false; cells];
        for i in sample(rng, cells, n_walls) {
            is_wall[i] = true;
        }
        let free: Vec<usize> = (0..cells).filter(|&i| !is_wall[i]).collect();
        let picks = sample(rng, free.len(), 2);
        let (start, goal) = (at(free[picks.index(0)]), at(free[picks.index(1)]));
        let walls = (0..cells).filter(|&i| is_wall[i]).map(at);
        let task = MazeTask::new(dim, dim, walls, start, goal)?;
        if bfs_optimal_cost(&task).is_some() {
            return Ok(task);
        }
    }
    Err(GridError::Exhausted(params.retry_budget))
}

/// Draws a solvable 7x7 Sokoban task with default retry budget.
pub fn generate_sokoban<R: Rng + ?Sized>(rng: &mut R) -> Result<SokobanTask, GridError> {
    generate_sokoban_with_budget(rng, DEFAULT_RETRY_BUDGET)
}

/// Two interior walls, two docks, two boxes and the worker on seven distinct interior cells;
/// kept only if the exact oracle finds a solution.
pub fn generate_sokoban_with_budget<R: Rng + ?Sized>(rng: &mut R, budget: u32) -> Result<SokobanTask, GridError> {
    let side = usize::from(SOKOBAN_DIM - 2);
    let at = |i: usize| Cell::new((i % side) as u8 + 1, (i / side) as u8 + 1);
    for _ in 0..budget {
        let picks: Vec<Cell> = sample(rng, side * side, 7).into_iter().map(at).collect();
        let task = SokobanTask::new(picks[0..2].to_vec(), picks[2..4].to_vec(), picks[4..6].to_vec(), picks[6])?;
        if sokoban_optimal_cost(&task).is_some() {
            return Ok(task);
        }
    }
    Err(GridError::Exhausted(budget))
}

/// Cells drawn on top of a task by [`render_ascii`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Overlay {
    pub plan: Vec<Cell>,
    pub explored: Vec<Cell>,
}

pub mod glyph {
    pub const FREE: char = '.';
    pub const WALL: char = '#';
    pub const START: char = 'S';
    pub const GOAL: char = 'G';
    pub const WORKER: char = '@';
    pub const BOX: char = 'B';
    pub const DOCK: char = 'D';
    pub const BOX_ON_DOCK: char = '*';
    pub const PLAN: char = 'o';
    pub const EXPLORED: char = '+';
}

/// Fixed-width text picture of a task, one row per line (y = 0 first), newline-terminated.
/// Task markers take precedence over plan cells, which take precedence over explored cells.
pub fn render_ascii(task: &Task, overlay: &Overlay) -> Result<String, GridError> {
    let (w, h) = (task.width(), task.height());
    if let Some(c) = overlay.plan.iter().chain(&overlay.explored).find(|c| c.x >= w || c.y >= h) {
        return Err(GridError::OverlayOutOfBounds { x: c.x, y: c.y, width: w, height: h });
    }
    let mut rows = vec![vec![glyph::FREE; usize::from(w)]; usize::from(h)];
    let mut put = |c: Cell, g: char| rows[usize::from(c.y)][usize::from(c.x)] = g;
    for &c in &overlay.explored {
        put(c, glyph::EXPLORED);
    }
    for &c in &overlay.plan {
        put(c, glyph::PLAN);
    }
    match task {
        Task::Maze(m) => {
            for &c in m.walls() {
                put(c, glyph::WALL);
            }
            put(m.start(), glyph::START);
            put(m.goal(), glyph::GOAL);
        }
        Task::Sokoban(s) => {
            for c in s.all_walls() {
                put(c, glyph::WALL);
            }
            for &c in s.docks() {
                put(c, glyph::DOCK);
            }
            for &c in s.boxes() {
                put(c, if s.docks().contains(&c) { glyph::BOX_ON_DOCK } else { glyph::BOX });
            }
            put(s.worker(), glyph::WORKER);
        }
    }
    let mut out = String::with_capacity(usize::from(h) * (usize::from(w) + 1));
    for row in rows {
        out.extend(row);
        out.push('\n');
    }
    Ok(out)
}

/// RGB raster of the same picture, `scale` pixels per cell.
pub fn render_image(task: &Task, overlay: &Overlay, scale: u32) -> Result<image::RgbImage, GridError> {
    let text = render_ascii(task, overlay)?;
    let scale = scale.max(1);
    let (w, h) = (u32::from(task.width()), u32::from(task.height()));
    let mut img = image::RgbImage::new(w * scale, h * scale);
    for (y, line) in text.lines().enumerate() {
        for (x, g) in line.chars().enumerate() {
            let colour = match g {
                glyph::WALL => [40, 40, 40],
                glyph::START | glyph::WORKER => [40, 170, 60],
                glyph::GOAL | glyph::DOCK => [210, 50, 50],
                glyph::BOX => [150, 100, 40],
                glyph::BOX_ON_DOCK => [220, 150, 40],
                glyph::PLAN => [240, 210, 40],
                glyph::EXPLORED => [230, 140, 140],
                _ => [170, 170, 170],
            };
            for py in 0..scale {
                for px in 0..scale {
                    img.put_pixel(x as u32 * scale + px, y as u32 * scale + py, image::Rgb(colour));
                }
            }
        }
    }
    Ok(img)
}
