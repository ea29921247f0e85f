// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::library::{ControlRole, TechLibrary};
use super::verilog::{NetRef, PortDirection, RawNetlist};
use super::CellKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: usize,
    pub name: String,
}

/// Control pin of a sequential cell. Never a data-dependency edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPin {
    pub role: ControlRole,
    pub net: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub kind: CellKind,
    /// Instance name, or the port bit name for port pseudo-cells.
    pub name: String,
    /// Library cell name; `None` for pseudo-cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lib_cell: Option<String>,
    /// Data input nets in library pin order.
    pub inputs: Vec<usize>,
    pub output: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<ControlPin>,
}

/// Technology-independent netlist.
///
/// Cell ids are dense and ordered: input ports, instances (source order),
/// output ports, then the shared constant drivers if any pin is tied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub name: String,
    pub cells: Vec<Cell>,
    pub nets: Vec<Net>,
    /// INPUT_PORT cell ids.
    pub inputs: Vec<usize>,
    /// OUTPUT_PORT cell ids.
    pub outputs: Vec<usize>,
}

impl Netlist {
    pub fn cell(&self, id: usize) -> Option<&Cell> {
        self.cells.get(id)
    }

    /// Driver cell of every net (`None` when undriven).
    pub fn drivers(&self) -> Vec<Option<usize>> {
        let mut d = vec![None; self.nets.len()];
        for c in &self.cells {
            if let Some(o) = c.output {
                d[o] = Some(c.id);
            }
        }
        d
    }

    /// Checks the structural invariants; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("netlist `{}`: {m}", self.name)));
        for (i, n) in self.nets.iter().enumerate() {
            if n.id != i {
                return bad(format!("net id {} at position {i}", n.id));
            }
        }
        let mut driver: Vec<Option<usize>> = vec![None; self.nets.len()];
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return bad(format!("cell id {} at position {i}", c.id));
            }
            let nets = c.inputs.iter().chain(c.output.iter()).chain(c.controls.iter().map(|p| &p.net));
            for &n in nets {
                if n >= self.nets.len() {
                    return bad(format!("cell `{}` references missing net {n}", c.name));
                }
            }
            if c.kind.is_register() && c.inputs.len() != 1 {
                return bad(format!("register `{}` must have one data input", c.name));
            }
            if let Some(o) = c.output {
                if let Some(prev) = driver[o] {
                    return Err(Error::MultipleDrivers {
                        net: self.nets[o].name.clone(),
                        first: self.cells[prev].name.clone(),
                        second: c.name.clone(),
                    });
                }
                driver[o] = Some(i);
            }
        }
        Ok(())
    }
}

/// Rewrites every instance onto the generic cell model.
pub fn map_to_independent(raw: &RawNetlist, lib: &TechLibrary) -> Result<Netlist> {
    let mut nets: Vec<Net> = raw
        .nets
        .iter()
        .enumerate()
        .map(|(id, name)| Net {
            id,
            name: name.clone(),
        })
        .collect();
    let mut cells = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    // net -> name of the driving cell
    let mut driven_by: Vec<Option<String>> = vec![None; nets.len()];
    let claim = |net: usize, by: &str, driven_by: &mut Vec<Option<String>>, names: &[Net]| {
        if net >= driven_by.len() {
            driven_by.resize(net + 1, None);
        }
        match &driven_by[net] {
            Some(first) => Err(Error::MultipleDrivers {
                net: names[net].name.clone(),
                first: first.clone(),
                second: by.to_string(),
            }),
            None => {
                driven_by[net] = Some(by.to_string());
                Ok(())
            }
        }
    };

    for p in raw.ports.iter().filter(|p| p.direction == PortDirection::Input) {
        let id = cells.len();
        claim(p.net, &p.name, &mut driven_by, &nets)?;
        cells.push(Cell {
            id,
            kind: CellKind::InputPort,
            name: p.name.clone(),
            lib_cell: None,
            inputs: Vec::new(),
            output: Some(p.net),
            controls: Vec::new(),
        });
        inputs.push(id);
    }

    // constant nets are materialized lazily and driven by shared pseudo-cells
    let mut const_net: [Option<usize>; 2] = [None, None];
    let mut resolve = |r: NetRef, nets: &mut Vec<Net>| -> Option<usize> {
        match r {
            NetRef::Net(n) => Some(n),
            NetRef::Open => None,
            NetRef::Const(v) => {
                let slot = &mut const_net[v as usize];
                Some(*slot.get_or_insert_with(|| {
                    let id = nets.len();
                    nets.push(Net {
                        id,
                        name: if v { "1'b1" } else { "1'b0" }.to_string(),
                    });
                    id
                }))
            }
        }
    };

    for inst in &raw.instances {
        let lc = lib.get(&inst.cell).ok_or_else(|| Error::UnmappedCell {
            instance: inst.name.clone(),
            cell: inst.cell.clone(),
        })?;
        let mismatch = |message: String| Error::PinMismatch {
            instance: inst.name.clone(),
            cell: inst.cell.clone(),
            message,
        };
        let by_pin: BTreeMap<&str, NetRef> = inst
            .connections
            .iter()
            .map(|c| (c.pin.as_str(), c.net))
            .collect();
        for c in &inst.connections {
            let known = lc.inputs.contains(&c.pin)
                || lc.output == c.pin
                || lc.controls().any(|(_, p)| p == c.pin);
            if !known && c.net != NetRef::Open {
                return Err(mismatch(format!("pin `{}` is not defined by the library cell", c.pin)));
            }
        }
        let connected = by_pin.values().filter(|r| **r != NetRef::Open).count();
        let mut data = Vec::with_capacity(lc.inputs.len());
        for pin in &lc.inputs {
            match by_pin.get(pin.as_str()).copied() {
                None | Some(NetRef::Open) => {
                    return Err(mismatch(format!(
                        "input pin `{pin}` is unconnected ({} of {} library pins connected)",
                        connected,
                        lc.inputs.len() + 1 + lc.controls().count()
                    )))
                }
                Some(r) => data.push(resolve(r, &mut nets).expect("connected")),
            }
        }
        let mut controls = Vec::new();
        for (role, pin) in lc.controls() {
            if let Some(net) = by_pin.get(pin).and_then(|r| resolve(*r, &mut nets)) {
                controls.push(ControlPin { role, net });
            }
        }
        let output = match by_pin.get(lc.output.as_str()) {
            Some(NetRef::Const(_)) => {
                return Err(mismatch(format!("output pin `{}` tied to a constant", lc.output)))
            }
            Some(NetRef::Net(n)) => Some(*n),
            _ => None,
        };
        if let Some(o) = output {
            claim(o, &inst.name, &mut driven_by, &nets)?;
        }
        let id = cells.len();
        cells.push(Cell {
            id,
            kind: lc.kind,
            name: inst.name.clone(),
            lib_cell: Some(inst.cell.clone()),
            inputs: data,
            output,
            controls,
        });
    }

    for p in raw.ports.iter().filter(|p| p.direction == PortDirection::Output) {
        let id = cells.len();
        cells.push(Cell {
            id,
            kind: CellKind::OutputPort,
            name: p.name.clone(),
            lib_cell: None,
            inputs: vec![p.net],
            output: None,
            controls: Vec::new(),
        });
        outputs.push(id);
    }

    for (value, kind) in [(false, CellKind::Const0), (true, CellKind::Const1)] {
        if let Some(net) = const_net[value as usize] {
            let id = cells.len();
            let name = nets[net].name.clone();
            claim(net, &name, &mut driven_by, &nets)?;
            cells.push(Cell {
                id,
                kind,
                name,
                lib_cell: None,
                inputs: Vec::new(),
                output: Some(net),
                controls: Vec::new(),
            });
        }
    }

    Ok(Netlist {
        name: raw.name.clone(),
        cells,
        nets,
        inputs,
        outputs,
    })
}

/// Register cells (DFF and LATCH) in id order.
pub fn registers_of(netlist: &Netlist) -> Vec<usize> {
    netlist
        .cells
        .iter()
        .filter(|c| c.kind.is_register())
        .map(|c| c.id)
        .collect()
}
