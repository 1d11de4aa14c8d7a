//! Mode-control prompts and the tolerant rollout parser.
//!
//! A controlled prompt is the task prompt followed by `bos` and, for fast and slow mode, a
//! control token (`plan` or `create`). The model's continuation therefore starts mid-clause:
//! a fast rollout begins with the first plan coordinates, a slow rollout with the state of the
//! first `create` clause. The parser puts the absorbed keyword back before reading.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, TaskKind};

use super::codec::{Clause, Cursor};
use super::{Token, TokenError, TokenSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Fast,
    Slow,
    Auto,
}

impl ControlMode {
    /// Keyword appended after `bos`, if any.
    pub fn control_token(self) -> Option<Token> {
        match self {
            ControlMode::Fast => Some(Token::Plan),
            ControlMode::Slow => Some(Token::Create),
            ControlMode::Auto => None,
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Fast => "fast",
            ControlMode::Slow => "slow",
            ControlMode::Auto => "auto",
        })
    }
}

impl FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fast" => Ok(ControlMode::Fast),
            "slow" => Ok(ControlMode::Slow),
            "auto" => Ok(ControlMode::Auto),
            other => Err(format!("unknown mode `{other}` (expected fast, slow or auto)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservedMode {
    Fast,
    Slow,
}

/// What could be recovered from one model continuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedRollout {
    pub trace: Vec<Clause>,
    pub plan: Vec<Cell>,
    pub diagnostics: Vec<String>,
    pub mode_observed: ObservedMode,
    /// The sequence ended without `eos`.
    pub truncated: bool,
}

impl ParsedRollout {
    /// Trace length in tokens, counting each recovered clause as it would be encoded
    /// (keyword included, even when the keyword was supplied by the control prompt).
    pub fn trace_token_count(&self) -> usize {
        self.trace.iter().map(Clause::token_len).sum()
    }
}

/// Appends `bos` and the mode's control token to a task prompt.
pub fn control_prompt(prompt: &TokenSeq, mode: ControlMode) -> Result<TokenSeq, TokenError> {
    if prompt.as_slice().last() != Some(&Token::Eos) {
        return Err(TokenError::Malformed { pos: prompt.len(), msg: "prompt must end with `eos`".into() });
    }
    let mut out = prompt.clone();
    out.push(Token::Bos);
    out.extend(mode.control_token());
    Ok(out)
}

/// The part of a full response a model would generate after the controlled prompt, or `None`
/// if the response does not start the way `mode` forces it to.
pub fn continuation_after_control(response: &TokenSeq, mode: ControlMode) -> Option<TokenSeq> {
    let rest = response.as_slice().strip_prefix(&[Token::Bos])?;
    let rest = match mode.control_token() {
        Some(t) => rest.strip_prefix(&[t])?,
        None => rest,
    };
    Some(TokenSeq(rest.to_vec()))
}

/// Recovers trace clauses and plan from a continuation. Never fails: malformed pieces are
/// skipped and reported in `diagnostics`. Clauses after the first plan step are ignored.
/// A leading `bos` is tolerated, as is a continuation that repeats the control token.
pub fn decode_rollout(tokens: &[Token], kind: TaskKind, control: ControlMode) -> ParsedRollout {
    let mut body = tokens;
    let mut offset: isize = 0;
    if body.first() == Some(&Token::Bos) {
        body = &body[1..];
        offset += 1;
    }
    let mut stream = Vec::with_capacity(body.len() + 1);
    if let Some(k) = control.control_token() {
        if body.first() != Some(&k) {
            stream.push(k);
            offset -= 1;
        }
    }
    stream.extend_from_slice(body);
    let at = |pos: usize| (pos as isize + offset).max(0);

    let mut trace = Vec::new();
    let mut plan = Vec::new();
    let mut diagnostics = Vec::new();
    let mut saw_eos = false;
    let mut cur = Cursor::new(&stream);
    while let Some(tok) = cur.peek() {
        let start = cur.pos;
        match tok {
            Token::Eos => {
                saw_eos = true;
                break;
            }
            Token::Create | Token::Close => match cur.clause(kind) {
                Ok(clause) if plan.is_empty() => trace.push(clause),
                Ok(_) => diagnostics.push(format!("token {}: clause after the plan segment ignored", at(start))),
                Err(msg) => {
                    diagnostics.push(format!("token {}: malformed clause skipped: {msg}", at(start)));
                    cur.skip_to_segment();
                }
            },
            Token::Plan => {
                cur.advance();
                match cur.cell() {
                    Ok(c) => plan.push(c),
                    Err(msg) => {
                        diagnostics.push(format!("token {}: malformed plan step skipped: {msg}", at(start)));
                        cur.skip_to_segment();
                    }
                }
            }
            other => {
                diagnostics.push(format!("token {}: unexpected `{other}` skipped", at(start)));
                cur.advance();
                cur.skip_to_segment();
            }
        }
    }
    if !saw_eos {
        diagnostics.push("sequence ended without `eos`".into());
    }
    if plan.is_empty() {
        diagnostics.push("no plan segment recovered".into());
    }
    let mode_observed = if trace.is_empty() { ObservedMode::Fast } else { ObservedMode::Slow };
    ParsedRollout { trace, plan, diagnostics, mode_observed, truncated: !saw_eos }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::EventKind;
    use crate::tokenize::{Costs, StateView};

    fn seq(s: &str) -> TokenSeq {
        s.parse().unwrap()
    }

    #[test]
    fn control_suffixes() {
        let p = seq("bos start 0 0 goal 1 1 eos");
        assert_eq!(control_prompt(&p, ControlMode::Fast).unwrap().to_string(), "bos start 0 0 goal 1 1 eos bos plan");
        assert_eq!(control_prompt(&p, ControlMode::Slow).unwrap().to_string(), "bos start 0 0 goal 1 1 eos bos create");
        assert_eq!(control_prompt(&p, ControlMode::Auto).unwrap().to_string(), "bos start 0 0 goal 1 1 eos bos");
        assert!(control_prompt(&seq("bos start 0 0"), ControlMode::Fast).is_err());
    }

    #[test]
    fn fast_continuation_parses() {
        let r = decode_rollout(seq("9 10 plan 8 10 plan 7 10 eos").as_slice(), TaskKind::Maze, ControlMode::Fast);
        assert_eq!(r.plan, vec![Cell::new(9, 10), Cell::new(8, 10), Cell::new(7, 10)]);
        assert!(r.trace.is_empty());
        assert!(r.diagnostics.is_empty());
        assert_eq!(r.mode_observed, ObservedMode::Fast);
    }

    #[test]
    fn slow_continuation_parses() {
        let r = decode_rollout(
            seq("9 10 c0 c10 create 8 10 c1 c9 plan 9 10 plan 8 10 eos").as_slice(),
            TaskKind::Maze,
            ControlMode::Slow,
        );
        assert_eq!(
            r.trace[0],
            Clause {
                kind: EventKind::Create,
                state: StateView::Maze(Cell::new(9, 10)),
                costs: Some(Costs { g: 0, h: 10 })
            }
        );
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.plan.len(), 2);
        assert_eq!(r.trace_token_count(), 10);
        assert_eq!(r.mode_observed, ObservedMode::Slow);
    }

    #[test]
    fn auto_mode_reads_the_chosen_keyword() {
        let r = decode_rollout(
            seq("create 0 0 c0 c2 close 0 0 c0 c2 plan 0 0 eos").as_slice(),
            TaskKind::Maze,
            ControlMode::Auto,
        );
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace[1].kind, EventKind::Close);
        let r = decode_rollout(seq("bos plan 0 0 plan 0 1 eos").as_slice(), TaskKind::Maze, ControlMode::Auto);
        assert_eq!(r.plan.len(), 2);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn garbage_before_plan_is_skipped() {
        let r =
            decode_rollout(seq("c3 wall 4 4 goal plan 1 1 plan 1 2 eos").as_slice(), TaskKind::Maze, ControlMode::Auto);
        assert_eq!(r.plan, vec![Cell::new(1, 1), Cell::new(1, 2)]);
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn malformed_clauses_and_steps() {
        let r = decode_rollout(
            seq("create 1 c0 create 2 2 c1 plan 2 close 3 3 plan 3 3 create 4 4 eos plan 9 9").as_slice(),
            TaskKind::Maze,
            ControlMode::Auto,
        );
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].state, StateView::Maze(Cell::new(3, 3)));
        assert_eq!(r.plan, vec![Cell::new(3, 3)]);
        assert_eq!(r.diagnostics.len(), 4);
    }

    #[test]
    fn empty_and_truncated() {
        let r = decode_rollout(&[], TaskKind::Maze, ControlMode::Fast);
        assert!(r.plan.is_empty());
        assert!(r.truncated);
        assert!(!r.diagnostics.is_empty());
        let r = decode_rollout(seq("0 0 plan 0 1").as_slice(), TaskKind::Maze, ControlMode::Fast);
        assert_eq!(r.plan.len(), 2);
        assert!(r.truncated);
    }

    #[test]
    fn sokoban_slow_continuation() {
        let r = decode_rollout(
            seq("worker 2 3 box 2 4 box 3 4 c0 c3 close worker 2 3 box 2 4 box 3 4 c0 c3 plan 2 3 eos").as_slice(),
            TaskKind::Sokoban,
            ControlMode::Slow,
        );
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace[0].kind, EventKind::Create);
        assert_eq!(r.trace[0].token_len(), 12);
        assert_eq!(r.plan, vec![Cell::new(2, 3)]);
    }

    #[test]
    fn continuation_strips_control() {
        let full = seq("bos plan 1 1 plan 1 2 eos");
        assert_eq!(continuation_after_control(&full, ControlMode::Fast).unwrap().to_string(), "1 1 plan 1 2 eos");
        assert_eq!(continuation_after_control(&full, ControlMode::Auto).unwrap().to_string(), "plan 1 1 plan 1 2 eos");
        assert_eq!(continuation_after_control(&full, ControlMode::Slow), None);
        let r = decode_rollout(
            continuation_after_control(&full, ControlMode::Fast).unwrap().as_slice(),
            TaskKind::Maze,
            ControlMode::Fast,
        );
        assert_eq!(r.plan.len(), 2);
    }
}
