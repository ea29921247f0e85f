// SPDX-License-Identifier: Apache-2.0
//! Netlist frontend: structural Verilog in, technology-independent netlist out.

mod cell;
pub mod library;
mod map;
pub mod verilog;

pub use cell::CellKind;
pub use library::{load_tech_library, ControlRole, LibCell, TechLibrary};
pub use map::{map_to_independent, registers_of, Cell, ControlPin, Net, Netlist};
pub use verilog::{parse_netlist, RawNetlist};

/// Parses and maps in one step.
pub fn load_netlist(text: &str, lib: &TechLibrary) -> crate::Result<Netlist> {
    map_to_independent(&parse_netlist(text)?, lib)
}
