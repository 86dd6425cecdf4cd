use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based source position. `0:0` marks apps built in code rather than parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: duplicate widget id `{id}`")]
    DuplicateWidget { pos: Pos, id: String },
    #[error("{pos}: type error: {msg}")]
    Type { pos: Pos, msg: String },
    #[error("{pos}: unknown sink `{name}`")]
    UnknownSink { pos: Pos, name: String },
    #[error("{pos}: {msg}")]
    Invalid { pos: Pos, msg: String },
}

impl IrError {
    pub fn pos(&self) -> Pos {
        match self {
            IrError::Syntax { pos, .. }
            | IrError::DuplicateWidget { pos, .. }
            | IrError::Type { pos, .. }
            | IrError::UnknownSink { pos, .. }
            | IrError::Invalid { pos, .. } => *pos,
        }
    }
}
