//! Prompt and response grammars.
//!
//! Maze prompt: `bos start x y goal x y (wall x y)* eos`, walls in row-major order.
//! Sokoban prompt: `bos worker x y (box x y)* (dock x y)* (wall x y)* eos`, every wall
//! including the boundary ring, sorted by `(x, y)`.
//!
//! Response: `bos clause* (plan x y)* eos`, where a clause is `create|close <state> [cg ch]`
//! and a Sokoban state is `worker x y (box x y)*` listing only boxes that are not docked.

use crate::grid::{Cell, GridError, MazeTask, SokobanTask, Task, TaskKind, SOKOBAN_DIM};
use crate::search::{EventKind, SokobanState, TraceEvent};

use super::{Token, TokenError, TokenSeq, Vocab};

/// State as it appears in a clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StateView {
    Maze(Cell),
    Sokoban { worker: Cell, boxes: Vec<Cell> },
}

impl StateView {
    /// The cell the agent occupies.
    pub fn agent(&self) -> Cell {
        match self {
            StateView::Maze(c) => *c,
            StateView::Sokoban { worker, .. } => *worker,
        }
    }

    fn token_len(&self) -> usize {
        match self {
            StateView::Maze(_) => 2,
            StateView::Sokoban { boxes, .. } => 3 + 3 * boxes.len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Costs {
    pub g: u32,
    pub h: u32,
}

/// One trace clause; costs are absent once they have been dropped.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub kind: EventKind,
    pub state: StateView,
    pub costs: Option<Costs>,
}

impl Clause {
    pub fn from_maze_event(ev: &TraceEvent<Cell>) -> Self {
        Clause { kind: ev.kind, state: StateView::Maze(ev.state), costs: Some(Costs { g: ev.g, h: ev.h }) }
    }

    pub fn from_sokoban_event(ev: &TraceEvent<SokobanState>, docks: &[Cell]) -> Self {
        Clause {
            kind: ev.kind,
            state: StateView::Sokoban { worker: ev.state.worker, boxes: ev.state.off_dock_boxes(docks) },
            costs: Some(Costs { g: ev.g, h: ev.h }),
        }
    }

    pub fn without_costs(&self) -> Self {
        Clause { costs: None, ..self.clone() }
    }

    /// Number of tokens this clause encodes to.
    pub fn token_len(&self) -> usize {
        1 + self.state.token_len() + if self.costs.is_some() { 2 } else { 0 }
    }
}

pub fn clauses_from_maze_trace(trace: &[TraceEvent<Cell>]) -> Vec<Clause> {
    trace.iter().map(Clause::from_maze_event).collect()
}

pub fn clauses_from_sokoban_trace(trace: &[TraceEvent<SokobanState>], docks: &[Cell]) -> Vec<Clause> {
    trace.iter().map(|ev| Clause::from_sokoban_event(ev, docks)).collect()
}

struct Emitter<'v> {
    vocab: &'v Vocab,
    out: TokenSeq,
}

impl<'v> Emitter<'v> {
    fn new(vocab: &'v Vocab) -> Self {
        Emitter { vocab, out: TokenSeq::new() }
    }

    fn push(&mut self, t: Token) -> Result<(), TokenError> {
        self.out.push(self.vocab.check(t)?);
        Ok(())
    }

    fn cell(&mut self, c: Cell) -> Result<(), TokenError> {
        self.push(Token::Num(c.x.into()))?;
        self.push(Token::Num(c.y.into()))
    }

    fn tagged(&mut self, tag: Token, c: Cell) -> Result<(), TokenError> {
        self.push(tag)?;
        self.cell(c)
    }

    fn clause(&mut self, clause: &Clause) -> Result<(), TokenError> {
        self.push(match clause.kind {
            EventKind::Create => Token::Create,
            EventKind::Close => Token::Close,
        })?;
        match &clause.state {
            StateView::Maze(c) => self.cell(*c)?,
            StateView::Sokoban { worker, boxes } => {
                self.tagged(Token::Worker, *worker)?;
                for &b in boxes {
                    self.tagged(Token::Box, b)?;
                }
            }
        }
        if let Some(Costs { g, h }) = clause.costs {
            self.push(Token::Cost(g))?;
            self.push(Token::Cost(h))?;
        }
        Ok(())
    }
}

pub fn encode_prompt(task: &Task, vocab: &Vocab) -> Result<TokenSeq, TokenError> {
    let mut e = Emitter::new(vocab);
    e.push(Token::Bos)?;
    match task {
        Task::Maze(m) => {
            e.tagged(Token::Start, m.start())?;
            e.tagged(Token::Goal, m.goal())?;
            for w in m.walls_row_major() {
                e.tagged(Token::Wall, w)?;
            }
        }
        Task::Sokoban(s) => {
            e.tagged(Token::Worker, s.worker())?;
            for &b in s.boxes() {
                e.tagged(Token::Box, b)?;
            }
            for &d in s.docks() {
                e.tagged(Token::Dock, d)?;
            }
            for w in s.all_walls() {
                e.tagged(Token::Wall, w)?;
            }
        }
    }
    e.push(Token::Eos)?;
    Ok(e.out)
}

/// Clause tokens only, without `bos`/`eos`.
pub fn encode_trace(clauses: &[Clause], vocab: &Vocab) -> Result<TokenSeq, TokenError> {
    let mut e = Emitter::new(vocab);
    for c in clauses {
        e.clause(c)?;
    }
    Ok(e.out)
}

/// `(plan x y)*`, without `bos`/`eos`.
pub fn encode_plan(plan: &[Cell], vocab: &Vocab) -> Result<TokenSeq, TokenError> {
    let mut e = Emitter::new(vocab);
    for &c in plan {
        e.tagged(Token::Plan, c)?;
    }
    Ok(e.out)
}

pub fn encode_response(clauses: &[Clause], plan: &[Cell], vocab: &Vocab) -> Result<TokenSeq, TokenError> {
    let mut e = Emitter::new(vocab);
    e.push(Token::Bos)?;
    for c in clauses {
        e.clause(c)?;
    }
    for &c in plan {
        e.tagged(Token::Plan, c)?;
    }
    e.push(Token::Eos)?;
    Ok(e.out)
}

/// Position-tracking reader shared by the strict and tolerant parsers.
pub(super) struct Cursor<'a> {
    tokens: &'a [Token],
    pub(super) pos: usize,
}

impl<'a> Cursor<'a> {
    pub(super) fn new(tokens: &'a [Token]) -> Self {
        Cursor { tokens, pos: 0 }
    }

    pub(super) fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    pub(super) fn advance(&mut self) -> Option<Token> {
        let t = self.peek()?;
        self.pos += 1;
        Some(t)
    }

    pub(super) fn eat(&mut self, t: Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(super) fn skip_to_segment(&mut self) {
        while self.peek().is_some_and(|t| !t.is_segment_start()) {
            self.pos += 1;
        }
    }

    pub(super) fn cell(&mut self) -> Result<Cell, String> {
        let mut coord = || match self.peek() {
            Some(Token::Num(n)) if n <= u16::from(u8::MAX) => {
                self.pos += 1;
                Ok(n as u8)
            }
            Some(t) => Err(format!("expected a coordinate, found `{t}`")),
            None => Err("expected a coordinate, found end of sequence".into()),
        };
        let x = coord()?;
        let y = coord()?;
        Ok(Cell::new(x, y))
    }

    fn tagged_cell(&mut self, tag: Token) -> Result<Cell, String> {
        if !self.eat(tag) {
            return Err(match self.peek() {
                Some(t) => format!("expected `{tag}`, found `{t}`"),
                None => format!("expected `{tag}`, found end of sequence"),
            });
        }
        self.cell()
    }

    /// State and optional cost pair following a clause keyword.
    pub(super) fn clause_body(&mut self, kind: TaskKind) -> Result<(StateView, Option<Costs>), String> {
        let state = match kind {
            TaskKind::Maze => StateView::Maze(self.cell()?),
            TaskKind::Sokoban => {
                let worker = self.tagged_cell(Token::Worker)?;
                let mut boxes = Vec::new();
                while self.peek() == Some(Token::Box) {
                    boxes.push(self.tagged_cell(Token::Box)?);
                }
                StateView::Sokoban { worker, boxes }
            }
        };
        let costs = match self.peek() {
            Some(Token::Cost(g)) => {
                self.pos += 1;
                match self.peek() {
                    Some(Token::Cost(h)) => {
                        self.pos += 1;
                        Some(Costs { g, h })
                    }
                    _ => return Err("cost-since-start token without a heuristic token".into()),
                }
            }
            _ => None,
        };
        Ok((state, costs))
    }

    pub(super) fn clause(&mut self, kind: TaskKind) -> Result<Clause, String> {
        let event = match self.peek() {
            Some(Token::Create) => EventKind::Create,
            Some(Token::Close) => EventKind::Close,
            _ => return Err("expected `create` or `close`".into()),
        };
        self.pos += 1;
        let (state, costs) = self.clause_body(kind)?;
        Ok(Clause { kind: event, state, costs })
    }
}

fn malformed(pos: usize, msg: impl Into<String>) -> TokenError {
    TokenError::Malformed { pos, msg: msg.into() }
}

fn expect(cur: &mut Cursor<'_>, t: Token) -> Result<(), TokenError> {
    if cur.eat(t) {
        Ok(())
    } else {
        Err(malformed(cur.pos, format!("expected `{t}`")))
    }
}

fn expect_end(cur: &Cursor<'_>) -> Result<(), TokenError> {
    match cur.peek() {
        None => Ok(()),
        Some(t) => Err(malformed(cur.pos, format!("trailing token `{t}`"))),
    }
}

fn repeated_cells(cur: &mut Cursor<'_>, tag: Token) -> Result<Vec<Cell>, TokenError> {
    let mut out = Vec::new();
    while cur.eat(tag) {
        out.push(cur.cell().map_err(|m| malformed(cur.pos, m))?);
    }
    Ok(out)
}

/// Inverse of [`encode_prompt`]. Prompts do not carry the grid size, so it is supplied.
pub fn decode_prompt(tokens: &[Token], width: u8, height: u8) -> Result<Task, TokenError> {
    let mut cur = Cursor::new(tokens);
    expect(&mut cur, Token::Bos)?;
    let grid_err = |e: GridError| malformed(0, e.to_string());
    let task = match cur.peek() {
        Some(Token::Start) => {
            cur.advance();
            let start = cur.cell().map_err(|m| malformed(cur.pos, m))?;
            expect(&mut cur, Token::Goal)?;
            let goal = cur.cell().map_err(|m| malformed(cur.pos, m))?;
            let walls = repeated_cells(&mut cur, Token::Wall)?;
            Task::Maze(MazeTask::new(width, height, walls, start, goal).map_err(grid_err)?)
        }
        Some(Token::Worker) => {
            if (width, height) != (SOKOBAN_DIM, SOKOBAN_DIM) {
                return Err(malformed(1, "sokoban prompts describe 7x7 boards"));
            }
            cur.advance();
            let worker = cur.cell().map_err(|m| malformed(cur.pos, m))?;
            let boxes = repeated_cells(&mut cur, Token::Box)?;
            let docks = repeated_cells(&mut cur, Token::Dock)?;
            let walls = repeated_cells(&mut cur, Token::Wall)?;
            let interior = |c: &Cell| (1..SOKOBAN_DIM - 1).contains(&c.x) && (1..SOKOBAN_DIM - 1).contains(&c.y);
            let ring = usize::from(4 * (SOKOBAN_DIM - 1));
            let ring_listed = walls.iter().filter(|c| !interior(c)).collect::<std::collections::BTreeSet<_>>().len();
            if ring_listed != ring {
                return Err(malformed(0, "sokoban prompt does not list the full boundary ring"));
            }
            let inner: Vec<Cell> = walls.into_iter().filter(interior).collect();
            Task::Sokoban(SokobanTask::new(inner, docks, boxes, worker).map_err(grid_err)?)
        }
        _ => return Err(malformed(1, "expected `start` or `worker`")),
    };
    expect(&mut cur, Token::Eos)?;
    expect_end(&cur)?;
    Ok(task)
}

fn clauses(cur: &mut Cursor<'_>, kind: TaskKind) -> Result<Vec<Clause>, TokenError> {
    let mut out = Vec::new();
    while cur.peek().is_some_and(Token::is_clause_keyword) {
        out.push(cur.clause(kind).map_err(|m| malformed(cur.pos, m))?);
    }
    Ok(out)
}

/// Strict inverse of [`encode_response`].
pub fn decode_response(tokens: &[Token], kind: TaskKind) -> Result<(Vec<Clause>, Vec<Cell>), TokenError> {
    let mut cur = Cursor::new(tokens);
    expect(&mut cur, Token::Bos)?;
    let trace = clauses(&mut cur, kind)?;
    let plan = repeated_cells(&mut cur, Token::Plan)?;
    expect(&mut cur, Token::Eos)?;
    expect_end(&cur)?;
    Ok((trace, plan))
}

/// Strict inverse of [`encode_trace`].
pub fn decode_trace(tokens: &[Token], kind: TaskKind) -> Result<Vec<Clause>, TokenError> {
    let mut cur = Cursor::new(tokens);
    let trace = clauses(&mut cur, kind)?;
    expect_end(&cur)?;
    Ok(trace)
}

/// Strict inverse of [`encode_plan`].
pub fn decode_plan(tokens: &[Token]) -> Result<Vec<Cell>, TokenError> {
    let mut cur = Cursor::new(tokens);
    let plan = repeated_cells(&mut cur, Token::Plan)?;
    expect_end(&cur)?;
    Ok(plan)
}
