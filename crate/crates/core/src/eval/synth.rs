// SPDX-License-Identifier: Apache-2.0
//! Synthetic benchmark netlists with known state registers.
//!
//! A design is a one-hot FSM next to a datapath. FSM state `k` is set by
//! `k + 1` transition terms `AND(state_src, cond)` merged by an OR tree, so
//! states differ structurally. The datapath is a ring of words; every bit of
//! a word is built from the same gate template over rotated bit indices of
//! the previous word and a private input bus, so all bits of a word share
//! one path structure.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub fsm_states: usize,
    pub data_regs: usize,
    pub datapath_width: usize,
    pub comb_depth: usize,
    pub fanin_max: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            fsm_states: 4,
            data_regs: 60,
            datapath_width: 8,
            comb_depth: 3,
            fanin_max: 4,
        }
    }
}

pub const MAX_COMB_DEPTH: usize = 8;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fanin_max < 2 {
            return Err(Error::InvalidArgument(format!(
                "fanin_max must be at least 2, got {}",
                self.fanin_max
            )));
        }
        if self.datapath_width == 0 {
            return Err(Error::InvalidArgument("datapath_width must be positive".into()));
        }
        if self.comb_depth > MAX_COMB_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "comb_depth must be at most {MAX_COMB_DEPTH}, got {}",
                self.comb_depth
            )));
        }
        Ok(())
    }

    pub fn design_name(&self) -> String {
        format!("synth_s{}_f{}_d{}", self.seed, self.fsm_states, self.data_regs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthDesign {
    pub name: String,
    pub verilog: String,
    pub truth: GroundTruth,
}

const TWO_INPUT: [&str; 6] = ["AND2X1", "OR2X1", "XOR2X1", "NAND2X1", "NOR2X1", "XNOR2X1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WordKind {
    /// Output-visible pipeline stage.
    Plain,
    /// Holds its value unless enabled.
    LoadEnable,
    /// XORs the new value into its own state.
    Accumulate,
}

struct Builder {
    inputs: Vec<String>,
    outputs: Vec<String>,
    wires: Vec<String>,
    body: String,
    next: usize,
    fanin: usize,
}

impl Builder {
    fn fresh(&mut self) -> String {
        let n = format!("n{}", self.next);
        self.next += 1;
        self.wires.push(n.clone());
        n
    }

    fn instance(&mut self, cell: &str, pins: &[(&str, &str)]) {
        let inst = format!("g{}", self.next);
        self.next += 1;
        let conns: Vec<String> = pins.iter().map(|(p, n)| format!(".{p}({n})")).collect();
        let _ = writeln!(self.body, "  {cell} {inst} ({});", conns.join(", "));
    }

    fn gate(&mut self, cell: &str, inputs: &[&str]) -> String {
        const PINS: [&str; 4] = ["A", "B", "C", "D"];
        const MUX_PINS: [&str; 3] = ["A", "B", "S"];
        let names: &[&str] = if cell.starts_with("MUX") { &MUX_PINS } else { &PINS };
        let out = self.fresh();
        let mut pins: Vec<(&str, &str)> = inputs.iter().enumerate().map(|(i, n)| (names[i], *n)).collect();
        pins.push(("Y", &out));
        self.instance(cell, &pins);
        out
    }

    fn dff(&mut self, name: &str, d: &str, q: &str) {
        let _ = writeln!(self.body, "  DFFRX1 {name} (.D({d}), .CK(clk), .RN(rst_n), .Q({q}));");
    }

    /// Reduces `nodes` with `stem` gates of at most `fanin` inputs.
    fn reduce(&mut self, stem: &str, mut nodes: Vec<String>) -> String {
        let arity = self.fanin.min(4);
        while nodes.len() > 1 {
            let mut next = Vec::new();
            for chunk in nodes.chunks(arity) {
                if chunk.len() == 1 {
                    next.push(chunk[0].clone());
                } else {
                    let refs: Vec<&str> = chunk.iter().map(String::as_str).collect();
                    next.push(self.gate(&format!("{stem}{}X1", chunk.len()), &refs));
                }
            }
            nodes = next;
        }
        nodes.pop().expect("non-empty reduction")
    }

    /// Balanced binary tree over `leaves`; gate types depend only on the
    /// template, level and position.
    fn template_tree(&mut self, template: usize, mut nodes: Vec<String>) -> String {
        let mut level = 0;
        while nodes.len() > 1 {
            let mut next = Vec::new();
            for (pos, pair) in nodes.chunks(2).enumerate() {
                let cell = TWO_INPUT[(template * 2 + level + pos) % TWO_INPUT.len()];
                next.push(self.gate(cell, &[&pair[0], &pair[1]]));
            }
            nodes = next;
            level += 1;
        }
        nodes.pop().expect("non-empty tree")
    }

    fn render(&self, name: &str) -> String {
        let mut v = String::new();
        let ports: Vec<&str> = self.inputs.iter().chain(&self.outputs).map(String::as_str).collect();
        let _ = writeln!(v, "// synthetic benchmark {name}");
        let _ = writeln!(v, "module {name} (");
        for (i, p) in ports.iter().enumerate() {
            let sep = if i + 1 == ports.len() { "" } else { "," };
            let _ = writeln!(v, "  {p}{sep}");
        }
        let _ = writeln!(v, ");");
        for p in &self.inputs {
            let _ = writeln!(v, "  input {p};");
        }
        for p in &self.outputs {
            let _ = writeln!(v, "  output {p};");
        }
        for w in &self.wires {
            let _ = writeln!(v, "  wire {w};");
        }
        v.push_str(&self.body);
        v.push_str("endmodule\n");
        v
    }
}

struct Word {
    index: usize,
    width: usize,
    kind: WordKind,
    template: usize,
    /// Index into the word list of the word feeding this one.
    prev: usize,
}

fn q_net(word: usize, bit: usize) -> String {
    format!("w{word}_q_{bit}")
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthDesign> {
    spec.validate()?;
    let name = spec.design_name();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut b = Builder {
        inputs: vec!["clk".into(), "rst_n".into()],
        outputs: Vec::new(),
        wires: Vec::new(),
        body: String::new(),
        next: 0,
        fanin: spec.fanin_max,
    };

    // FSM
    let n = spec.fsm_states;
    let m = n.max(2);
    if n > 0 {
        b.inputs.extend((0..m).map(|c| format!("c_{c}")));
        b.outputs.extend((0..n).map(|k| format!("state_{k}")));
    }
    let arity = spec.fanin_max.min(4);
    let cap = arity * arity;
    let mut truth = BTreeSet::new();
    for k in 0..n {
        let terms = if k < cap { k + 1 } else { 1 + k % cap };
        let mut products = Vec::with_capacity(terms);
        for t in 0..terms {
            let src = format!("state_{}", (k + n - 1 - t % n) % n);
            let mut cond = format!("c_{}", (k + t) % m);
            if (k + t) % 2 == 1 {
                cond = b.gate("INVX1", &[&cond]);
            }
            products.push(b.gate("AND2X1", &[&src, &cond]));
        }
        let d = b.reduce("OR", products);
        let reg = format!("fsm_q_reg_{k}");
        b.dff(&reg, &d, &format!("state_{k}"));
        truth.insert(reg);
    }

    // Datapath: full-width words form one ring, a narrower remainder word
    // feeds itself.
    let w = spec.datapath_width;
    let full = spec.data_regs / w;
    let rem = spec.data_regs % w;
    let mut words = Vec::new();
    let pick = |index: usize, width: usize, prev: usize, rng: &mut ChaCha8Rng| Word {
        index,
        width,
        kind: [WordKind::Plain, WordKind::LoadEnable, WordKind::Accumulate][rng.gen_range(0..3)],
        template: rng.gen_range(0..4),
        prev,
    };
    for j in 0..full {
        words.push(pick(j, w, (j + full - 1) % full, &mut rng));
    }
    if rem > 0 {
        words.push(pick(full, rem, full, &mut rng));
    }

    let depth = spec.comb_depth;
    for word in &words {
        if depth >= 2 {
            b.inputs.extend((0..word.width).map(|i| format!("in{}_{i}", word.index)));
        }
        if word.kind == WordKind::LoadEnable {
            b.inputs.push(format!("en_{}", word.index));
            if spec.fanin_max < 3 {
                b.inputs.push(format!("enb_{}", word.index));
            }
        }
        for i in 0..word.width {
            let q = q_net(word.index, i);
            if word.kind == WordKind::Plain {
                b.outputs.push(q.clone());
            } else {
                b.wires.push(q.clone());
            }
        }
    }

    for word in &words {
        let prev = &words[word.prev];
        for i in 0..word.width {
            let p0 = q_net(prev.index, i % prev.width);
            let p1 = q_net(prev.index, (i + 1) % prev.width);
            let value = match depth {
                0 => p0,
                _ => {
                    let count = 1usize << depth;
                    let leaves: Vec<String> = (0..count)
                        .map(|j| {
                            if j == 0 {
                                p0.clone()
                            } else if j == count / 2 {
                                p1.clone()
                            } else {
                                format!("in{}_{}", word.index, (i + j) % word.width)
                            }
                        })
                        .collect();
                    b.template_tree(word.template, leaves)
                }
            };
            let q = q_net(word.index, i);
            let d = match word.kind {
                WordKind::Plain => value,
                WordKind::Accumulate => b.gate("XOR2X1", &[&q, &value]),
                WordKind::LoadEnable if spec.fanin_max >= 3 => {
                    b.gate("MUX2X1", &[&q, &value, &format!("en_{}", word.index)])
                }
                WordKind::LoadEnable => {
                    let load = b.gate("AND2X1", &[&value, &format!("en_{}", word.index)]);
                    let hold = b.gate("AND2X1", &[&q, &format!("enb_{}", word.index)]);
                    b.gate("OR2X1", &[&load, &hold])
                }
            };
            b.dff(&format!("w{}_q_reg_{i}", word.index), &d, &q);
        }
    }

    Ok(SynthDesign {
        verilog: b.render(&name),
        truth: GroundTruth {
            design: name.clone(),
            state_registers: truth,
        },
        name,
    })
}

/// The 19 designs used for leave-one-out evaluation: 2 to 8 state
/// registers and 16 to 512 data registers.
pub fn loocv_suite() -> Vec<SynthSpec> {
    const DATA: [usize; 19] = [
        16, 24, 32, 40, 48, 64, 80, 96, 128, 160, 192, 224, 256, 288, 320, 384, 416, 448, 512,
    ];
    DATA.iter()
        .enumerate()
        .map(|(i, &data)| SynthSpec {
            seed: 1000 + i as u64,
            fsm_states: 2 + i % 7,
            data_regs: data,
            datapath_width: if data <= 32 { 4 } else { 8 },
            comb_depth: 2 + i % 3,
            fanin_max: 4,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{load_netlist, registers_of, TechLibrary};

    fn registers(spec: &SynthSpec) -> (usize, SynthDesign) {
        let d = generate_synthetic(spec).unwrap();
        let nl = load_netlist(&d.verilog, &TechLibrary::builtin()).unwrap();
        (registers_of(&nl).len(), d)
    }

    #[test]
    fn counts_match_spec() {
        let (r, d) = registers(&SynthSpec {
            fsm_states: 4,
            data_regs: 60,
            ..Default::default()
        });
        assert_eq!(r, 64);
        assert_eq!(d.truth.state_registers.len(), 4);
        let (r, d) = registers(&SynthSpec {
            fsm_states: 0,
            data_regs: 8,
            ..Default::default()
        });
        assert_eq!(r, 8);
        assert!(d.truth.state_registers.is_empty());
    }

    #[test]
    fn deterministic() {
        let s = SynthSpec {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&s).unwrap(), generate_synthetic(&s).unwrap());
    }

    #[test]
    fn narrow_fanin_and_edge_depths() {
        for (fanin, depth, fsm) in [(2, 0, 1), (2, 1, 9), (3, 5, 3), (4, 2, 20)] {
            let s = SynthSpec {
                fsm_states: fsm,
                data_regs: 13,
                datapath_width: 4,
                comb_depth: depth,
                fanin_max: fanin,
                seed: 3,
            };
            let (r, _) = registers(&s);
            assert_eq!(r, fsm + 13);
        }
    }

    #[test]
    fn invalid_specs() {
        for s in [
            SynthSpec { fanin_max: 1, ..Default::default() },
            SynthSpec { datapath_width: 0, ..Default::default() },
            SynthSpec { comb_depth: 9, ..Default::default() },
        ] {
            assert!(generate_synthetic(&s).is_err());
        }
    }

    #[test]
    fn suite_shape() {
        let suite = loocv_suite();
        assert_eq!(suite.len(), 19);
        assert!(suite.iter().all(|s| (2..=8).contains(&s.fsm_states)));
        assert_eq!(suite.iter().map(|s| s.data_regs).min(), Some(16));
        assert_eq!(suite.iter().map(|s| s.data_regs).max(), Some(512));
    }
}
