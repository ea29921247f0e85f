// SPDX-License-Identifier: Apache-2.0
//! Technology library description: vendor cell name to generic cell kind.
//!
//! The on-disk format is a JSON object keyed by library cell name:
//!
//! ```json
//! { "DFFRX1": { "kind": "DFF", "inputs": ["D"], "output": "Q", "clock": "CK", "reset": "RN" } }
//! ```
//!
//! `clock`, `reset`, `set` and `enable` are optional control pins. They are
//! recorded on mapped cells but never become data-dependency edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::CellKind;
use crate::{Error, Result};

/// Role of a control pin on a sequential cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlRole {
    Clock,
    Reset,
    Set,
    Enable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibCell {
    pub kind: CellKind,
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enable: Option<String>,
}

impl LibCell {
    pub fn new(kind: CellKind, inputs: &[&str], output: &str) -> Self {
        LibCell {
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
            clock: None,
            reset: None,
            set: None,
            enable: None,
        }
    }

    pub fn with_control(mut self, role: ControlRole, pin: &str) -> Self {
        let slot = match role {
            ControlRole::Clock => &mut self.clock,
            ControlRole::Reset => &mut self.reset,
            ControlRole::Set => &mut self.set,
            ControlRole::Enable => &mut self.enable,
        };
        *slot = Some(pin.to_string());
        self
    }

    /// Control pins in role order.
    pub fn controls(&self) -> impl Iterator<Item = (ControlRole, &str)> {
        [
            (ControlRole::Clock, &self.clock),
            (ControlRole::Reset, &self.reset),
            (ControlRole::Set, &self.set),
            (ControlRole::Enable, &self.enable),
        ]
        .into_iter()
        .filter_map(|(role, pin)| pin.as_deref().map(|p| (role, p)))
    }

    pub fn is_register(&self) -> bool {
        self.kind.is_register()
    }

    fn validate(&self, name: &str) -> Result<()> {
        let fail = |msg: String| Err(Error::Library(format!("cell `{name}`: {msg}")));
        if self.kind.is_pseudo() && !matches!(self.kind, CellKind::Const0 | CellKind::Const1) {
            return fail(format!("kind {} is reserved for port pseudo-cells", self.kind));
        }
        let arity_ok = match self.kind {
            CellKind::Inv | CellKind::Buf | CellKind::Dff | CellKind::Latch => self.inputs.len() == 1,
            CellKind::Mux2 => self.inputs.len() == 3,
            CellKind::Const0 | CellKind::Const1 => self.inputs.is_empty(),
            _ => self.inputs.len() >= 2,
        };
        if !arity_ok {
            return fail(format!(
                "kind {} does not accept {} data input(s)",
                self.kind,
                self.inputs.len()
            ));
        }
        if self.output.is_empty() {
            return fail("empty output pin name".into());
        }
        let mut seen = BTreeSet::new();
        let all_pins = self
            .inputs
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.output.as_str()))
            .chain(self.controls().map(|(_, p)| p));
        for pin in all_pins {
            if pin.is_empty() {
                return fail("empty pin name".into());
            }
            if !seen.insert(pin) {
                return fail(format!("pin `{pin}` listed more than once"));
            }
        }
        if !self.kind.is_register() && self.controls().next().is_some() {
            return fail("control pins are only allowed on DFF and LATCH cells".into());
        }
        Ok(())
    }
}

/// Validated mapping from library cell names to generic cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TechLibrary {
    entries: BTreeMap<String, LibCell>,
}

impl TechLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, cell: LibCell) -> Result<()> {
        let name = name.into();
        cell.validate(&name)?;
        if self.entries.contains_key(&name) {
            return Err(Error::Library(format!("duplicate cell `{name}`")));
        }
        self.entries.insert(name, cell);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&LibCell> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LibCell)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: OrderedEntries =
            serde_json::from_str(text).map_err(|e| Error::json("tech library", e))?;
        let mut lib = TechLibrary::new();
        for (name, cell) in raw.0 {
            lib.insert(name, cell)?;
        }
        Ok(lib)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("library serialization")
    }

    /// A small generic library covering every kind; used by the synthetic
    /// benchmark generator.
    pub fn builtin() -> Self {
        use CellKind::*;
        let mut lib = TechLibrary::new();
        let mut add = |name: &str, cell: LibCell| lib.insert(name, cell).expect("builtin library");
        add("INVX1", LibCell::new(Inv, &["A"], "Y"));
        add("BUFX1", LibCell::new(Buf, &["A"], "Y"));
        for (kind, stem) in [(And, "AND"), (Or, "OR"), (Nand, "NAND"), (Nor, "NOR")] {
            add(&format!("{stem}2X1"), LibCell::new(kind, &["A", "B"], "Y"));
            add(&format!("{stem}3X1"), LibCell::new(kind, &["A", "B", "C"], "Y"));
            add(&format!("{stem}4X1"), LibCell::new(kind, &["A", "B", "C", "D"], "Y"));
        }
        add("XOR2X1", LibCell::new(Xor, &["A", "B"], "Y"));
        add("XOR3X1", LibCell::new(Xor, &["A", "B", "C"], "Y"));
        add("XNOR2X1", LibCell::new(Xnor, &["A", "B"], "Y"));
        add("MUX2X1", LibCell::new(Mux2, &["A", "B", "S"], "Y"));
        add(
            "DFFRX1",
            LibCell::new(Dff, &["D"], "Q")
                .with_control(ControlRole::Clock, "CK")
                .with_control(ControlRole::Reset, "RN"),
        );
        add(
            "DFFSX1",
            LibCell::new(Dff, &["D"], "Q")
                .with_control(ControlRole::Clock, "CK")
                .with_control(ControlRole::Set, "SN"),
        );
        add(
            "LATCHX1",
            LibCell::new(Latch, &["D"], "Q").with_control(ControlRole::Enable, "G"),
        );
        add("TIELO", LibCell::new(Const0, &[], "Y"));
        add("TIEHI", LibCell::new(Const1, &[], "Y"));
        lib
    }
}

/// Reads and validates a tech library JSON file.
pub fn load_tech_library(path: impl AsRef<Path>) -> Result<TechLibrary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TechLibrary::from_json_str(&text).map_err(|e| match e {
        Error::Json {
            line,
            column,
            message,
            ..
        } => Error::Json {
            context: path.display().to_string(),
            line,
            column,
            message,
        },
        other => other,
    })
}

/// Object entries in file order, keeping duplicates so they can be reported.
struct OrderedEntries(Vec<(String, LibCell)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping cell names to cell descriptions")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, LibCell>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}
