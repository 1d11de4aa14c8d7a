//! Token vocabulary and codecs between tasks, traces, plans and token sequences.
//!
//! Sequences are written on disk as whitespace-separated token names. The vocabulary fixes
//! integer ids for a trainer: eleven keywords, then numerals `0..D-1`, then cost tokens
//! `c0..cCmax`.

mod codec;
mod rollout;

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::grid::{Task, TaskKind, MAX_DIM, SOKOBAN_DIM};

pub use codec::{
    clauses_from_maze_trace, clauses_from_sokoban_trace, decode_plan, decode_prompt, decode_response, decode_trace,
    encode_plan, encode_prompt, encode_response, encode_trace, Clause, Costs, StateView,
};
pub use rollout::{
    continuation_after_control, control_prompt, decode_rollout, ControlMode, ObservedMode, ParsedRollout,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("coordinate {value} does not fit a vocabulary with {limit} numerals")]
    CoordinateOverflow { value: u16, limit: u16 },
    #[error("cost {value} exceeds the vocabulary maximum c{max}")]
    CostOverflow { value: u32, max: u32 },
    #[error("malformed sequence at token {pos}: {msg}")]
    Malformed { pos: usize, msg: String },
    #[error("invalid vocabulary file: {0}")]
    BadVocab(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Bos,
    Eos,
    Start,
    Goal,
    Wall,
    Plan,
    Create,
    Close,
    Worker,
    Box,
    Dock,
    Num(u16),
    Cost(u32),
}

const KEYWORDS: [(Token, &str); 11] = [
    (Token::Bos, "bos"),
    (Token::Eos, "eos"),
    (Token::Start, "start"),
    (Token::Goal, "goal"),
    (Token::Wall, "wall"),
    (Token::Plan, "plan"),
    (Token::Create, "create"),
    (Token::Close, "close"),
    (Token::Worker, "worker"),
    (Token::Box, "box"),
    (Token::Dock, "dock"),
];

impl Token {
    pub fn is_clause_keyword(self) -> bool {
        matches!(self, Token::Create | Token::Close)
    }

    /// Tokens a tolerant parser can resynchronise on.
    pub fn is_segment_start(self) -> bool {
        matches!(self, Token::Create | Token::Close | Token::Plan | Token::Eos)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(n) => write!(f, "{n}"),
            Token::Cost(c) => write!(f, "c{c}"),
            kw => {
                let name = KEYWORDS.iter().find(|(t, _)| t == kw).map(|(_, n)| *n).expect("keyword table is complete");
                f.write_str(name)
            }
        }
    }
}

impl FromStr for Token {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, TokenError> {
        if let Some((t, _)) = KEYWORDS.iter().find(|(_, n)| *n == s) {
            return Ok(*t);
        }
        let digits =
            |d: &str| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) && (d == "0" || !d.starts_with('0'));
        if digits(s) {
            return s.parse().map(Token::Num).map_err(|_| TokenError::UnknownToken(s.into()));
        }
        if let Some(rest) = s.strip_prefix('c') {
            if digits(rest) {
                return rest.parse().map(Token::Cost).map_err(|_| TokenError::UnknownToken(s.into()));
            }
        }
        Err(TokenError::UnknownToken(s.into()))
    }
}

/// An ordered token sequence. Displays and serializes as single-space-separated names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn new() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn as_slice(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, t: Token) {
        self.0.push(t);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Token> {
        self.0.iter()
    }

    /// Parses names, collecting unrecognised ones instead of failing.
    pub fn parse_lossy(s: &str) -> (TokenSeq, Vec<String>) {
        let mut unknown = Vec::new();
        let seq = s
            .split_whitespace()
            .filter_map(|w| match w.parse() {
                Ok(t) => Some(t),
                Err(_) => {
                    unknown.push(w.to_string());
                    None
                }
            })
            .collect();
        (TokenSeq(seq), unknown)
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(v: Vec<Token>) -> Self {
        TokenSeq(v)
    }
}

impl FromIterator<Token> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = Token>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().collect())
    }
}

impl Extend<Token> for TokenSeq {
    fn extend<I: IntoIterator<Item = Token>>(&mut self, iter: I) {
        self.0.extend(iter);
    }
}

impl<'a> IntoIterator for &'a TokenSeq {
    type Item = &'a Token;
    type IntoIter = std::slice::Iter<'a, Token>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for TokenSeq {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, TokenError> {
        s.split_whitespace().map(str::parse).collect::<Result<Vec<_>, _>>().map(TokenSeq)
    }
}

impl Serialize for TokenSeq {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TokenSeq {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Closed vocabulary: eleven keywords, numerals `0..numerals`, costs `c0..=max_cost`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Vocab {
    numerals: u16,
    max_cost: u32,
}

impl Default for Vocab {
    /// Covers every grid up to 30x30 with the maze cost bound.
    fn default() -> Self {
        Vocab::for_maze(MAX_DIM)
    }
}

impl Vocab {
    pub fn new(numerals: u16, max_cost: u32) -> Self {
        Vocab { numerals, max_cost }
    }

    /// Numerals `0..dim`, costs up to `2 * dim^2`.
    pub fn for_maze(dim: u8) -> Self {
        let d = u32::from(dim);
        Vocab::new(u16::from(dim), 2 * d * d)
    }

    /// Numerals `0..7`, costs up to `4 * 49`.
    pub fn for_sokoban() -> Self {
        let d = u32::from(SOKOBAN_DIM);
        Vocab::new(u16::from(SOKOBAN_DIM), 4 * d * d)
    }

    pub fn for_task(task: &Task) -> Self {
        match task.kind() {
            TaskKind::Maze => Vocab::for_maze(task.width().max(task.height())),
            TaskKind::Sokoban => Vocab::for_sokoban(),
        }
    }

    pub fn numerals(&self) -> u16 {
        self.numerals
    }

    pub fn max_cost(&self) -> u32 {
        self.max_cost
    }

    pub fn len(&self) -> usize {
        KEYWORDS.len() + usize::from(self.numerals) + self.max_cost as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, t: Token) -> Result<Token, TokenError> {
        match t {
            Token::Num(n) if n >= self.numerals => {
                Err(TokenError::CoordinateOverflow { value: n, limit: self.numerals })
            }
            Token::Cost(c) if c > self.max_cost => Err(TokenError::CostOverflow { value: c, max: self.max_cost }),
            t => Ok(t),
        }
    }

    pub fn id(&self, t: Token) -> Result<u32, TokenError> {
        self.check(t)?;
        let kw = KEYWORDS.len() as u32;
        Ok(match t {
            Token::Num(n) => kw + u32::from(n),
            Token::Cost(c) => kw + u32::from(self.numerals) + c,
            other => KEYWORDS.iter().position(|(k, _)| *k == other).expect("keyword table is complete") as u32,
        })
    }

    pub fn token(&self, id: u32) -> Option<Token> {
        let kw = KEYWORDS.len() as u32;
        let nums = u32::from(self.numerals);
        if id < kw {
            Some(KEYWORDS[id as usize].0)
        } else if id < kw + nums {
            Some(Token::Num((id - kw) as u16))
        } else if id - kw - nums <= self.max_cost {
            Some(Token::Cost(id - kw - nums))
        } else {
            None
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = Token> + '_ {
        (0..self.len() as u32).map(|i| self.token(i).expect("ids below len are valid"))
    }

    /// One token name per line; line number is the token id.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for t in self.tokens() {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    /// Reads a vocabulary file, which must be in the canonical layout.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self, TokenError> {
        let mut names = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| TokenError::BadVocab(e.to_string()))?;
            let name = line.trim();
            if !name.is_empty() {
                names.push(name.to_string());
            }
        }
        let numerals = names.iter().filter(|n| matches!(n.parse(), Ok(Token::Num(_)))).count();
        let costs = names.iter().filter(|n| matches!(n.parse(), Ok(Token::Cost(_)))).count();
        if costs == 0 {
            return Err(TokenError::BadVocab("no cost tokens".into()));
        }
        let vocab = Vocab::new(numerals as u16, costs as u32 - 1);
        let expected: Vec<String> = vocab.tokens().map(|t| t.to_string()).collect();
        if expected != names {
            return Err(TokenError::BadVocab("tokens are not in canonical order".into()));
        }
        Ok(vocab)
    }

    pub fn encode_ids(&self, seq: &TokenSeq) -> Result<Vec<u32>, TokenError> {
        seq.iter().map(|&t| self.id(t)).collect()
    }
}
