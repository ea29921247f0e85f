// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Technology-independent cell kind.
///
/// The declaration order is the one-hot feature index and must never change:
/// checkpoints trained on one ordering are meaningless under another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellKind {
    Inv,
    Buf,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Mux2,
    Dff,
    Latch,
    InputPort,
    OutputPort,
    Const0,
    Const1,
}

impl CellKind {
    pub const COUNT: usize = 15;

    pub const ALL: [CellKind; CellKind::COUNT] = [
        CellKind::Inv,
        CellKind::Buf,
        CellKind::And,
        CellKind::Or,
        CellKind::Nand,
        CellKind::Nor,
        CellKind::Xor,
        CellKind::Xnor,
        CellKind::Mux2,
        CellKind::Dff,
        CellKind::Latch,
        CellKind::InputPort,
        CellKind::OutputPort,
        CellKind::Const0,
        CellKind::Const1,
    ];

    /// Position of this kind in the one-hot feature encoding.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<CellKind> {
        Self::ALL.get(index).copied()
    }

    pub fn is_register(self) -> bool {
        matches!(self, CellKind::Dff | CellKind::Latch)
    }

    /// Kinds that only exist as pseudo-cells created during mapping.
    pub fn is_pseudo(self) -> bool {
        matches!(
            self,
            CellKind::InputPort | CellKind::OutputPort | CellKind::Const0 | CellKind::Const1
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Inv => "INV",
            CellKind::Buf => "BUF",
            CellKind::And => "AND",
            CellKind::Or => "OR",
            CellKind::Nand => "NAND",
            CellKind::Nor => "NOR",
            CellKind::Xor => "XOR",
            CellKind::Xnor => "XNOR",
            CellKind::Mux2 => "MUX2",
            CellKind::Dff => "DFF",
            CellKind::Latch => "LATCH",
            CellKind::InputPort => "INPUT_PORT",
            CellKind::OutputPort => "OUTPUT_PORT",
            CellKind::Const0 => "CONST0",
            CellKind::Const1 => "CONST1",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CellKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown cell kind `{s}`"))
    }
}
