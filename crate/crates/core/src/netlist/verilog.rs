// SPDX-License-Identifier: Apache-2.0
//! Structural Verilog reader.
//!
//! Accepted subset: a single flat module with `input`/`output`/`wire`
//! declarations (optionally vectors), and cell instances with named port
//! connections. Connections may be a scalar net, a bit select, a 1-bit
//! constant, or empty. Anything behavioral is a syntax error.

use std::collections::HashMap;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortDirection {
    Input,
    Output,
}

/// Net reference on an instance pin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetRef {
    Net(usize),
    Const(bool),
    /// `.PIN()`
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPort {
    /// Bit-level name, e.g. `data[3]`.
    pub name: String,
    pub direction: PortDirection,
    pub net: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConnection {
    pub pin: String,
    pub net: NetRef,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInstance {
    pub cell: String,
    pub name: String,
    pub line: usize,
    pub connections: Vec<RawConnection>,
}

/// Parsed netlist before technology mapping. Net ids follow declaration
/// order; instance order follows the source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawNetlist {
    pub name: String,
    pub nets: Vec<String>,
    pub ports: Vec<RawPort>,
    pub instances: Vec<RawInstance>,
}

impl RawNetlist {
    pub fn net_id(&self, name: &str) -> Option<usize> {
        self.nets.iter().position(|n| n == name)
    }
}

pub fn parse_netlist(text: &str) -> Result<RawNetlist> {
    let tokens = lex(text)?;
    Parser::new(tokens).module()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(u64),
    /// Sized or unsized based literal, e.g. `1'b0`: (width, value).
    Based(Option<u64>, u64),
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(syntax(tl, tc, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
        } else if c == '(' && chars.get(i + 1) == Some(&'*') {
            // attribute instance, ignored
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&')')) {
                bump!();
            }
            if i >= chars.len() {
                return Err(syntax(tl, tc, "unterminated attribute"));
            }
            bump!();
            bump!();
        } else if c == '`' {
            return Err(syntax(tl, tc, "compiler directives are not supported"));
        } else if c == '\\' {
            bump!();
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() {
                bump!();
            }
            if start == i {
                return Err(syntax(tl, tc, "empty escaped identifier"));
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
        } else if c.is_ascii_digit() || c == '\'' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                bump!();
            }
            let digits: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            let width = if digits.is_empty() {
                None
            } else {
                Some(
                    digits
                        .parse::<u64>()
                        .map_err(|_| syntax(tl, tc, "number out of range"))?,
                )
            };
            if i < chars.len() && chars[i] == '\'' {
                bump!();
                if i < chars.len() && (chars[i] == 's' || chars[i] == 'S') {
                    bump!();
                }
                let radix = match chars.get(i).map(|c| c.to_ascii_lowercase()) {
                    Some('b') => 2,
                    Some('o') => 8,
                    Some('d') => 10,
                    Some('h') => 16,
                    _ => return Err(syntax(line, col, "expected base specifier")),
                };
                bump!();
                let vstart = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    bump!();
                }
                let vdigits: String = chars[vstart..i].iter().filter(|c| **c != '_').collect();
                let value = u64::from_str_radix(&vdigits, radix)
                    .map_err(|_| syntax(tl, tc, format!("invalid literal value `{vdigits}`")))?;
                out.push(Token {
                    tok: Tok::Based(width, value),
                    line: tl,
                    column: tc,
                });
            } else {
                out.push(Token {
                    tok: Tok::Number(width.expect("digits present")),
                    line: tl,
                    column: tc,
                });
            }
        } else if "()[],;.:{}=#".contains(c) {
            bump!();
            out.push(Token {
                tok: Tok::Sym(c),
                line: tl,
                column: tc,
            });
        } else {
            return Err(syntax(tl, tc, format!("unexpected character `{c}`")));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

const BEHAVIORAL: &[&str] = &[
    "assign", "always", "initial", "reg", "parameter", "localparam", "generate", "function",
    "task", "integer", "defparam", "inout", "supply0", "supply1", "tri",
];

/// Declared signal: scalar or vector `[msb:lsb]`.
#[derive(Debug, Clone)]
struct Signal {
    range: Option<(u64, u64)>,
    direction: Option<PortDirection>,
}

impl Signal {
    fn bits(&self, name: &str) -> Vec<String> {
        match self.range {
            None => vec![name.to_string()],
            Some((msb, lsb)) => {
                let idx: Vec<u64> = if msb >= lsb {
                    (lsb..=msb).rev().collect()
                } else {
                    (msb..=lsb).collect()
                };
                idx.into_iter().map(|i| format!("{name}[{i}]")).collect()
            }
        }
    }

    fn contains(&self, bit: u64) -> bool {
        match self.range {
            None => false,
            Some((a, b)) => bit >= a.min(b) && bit <= a.max(b),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    signals: HashMap<String, Signal>,
    signal_order: Vec<String>,
    net_ids: HashMap<String, usize>,
    out: RawNetlist,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            signals: HashMap::new(),
            signal_order: Vec::new(),
            net_ids: HashMap::new(),
            out: RawNetlist::default(),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> Error {
        let t = self.peek();
        syntax(t.line, t.column, message)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        match self.peek().tok {
            Tok::Sym(s) if s == c => {
                self.next();
                Ok(())
            }
            ref other => Err(self.err_here(format!("expected `{c}`, found {}", describe(other)))),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.err_here(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn number(&mut self) -> Result<u64> {
        match self.peek().tok {
            Tok::Number(n) => {
                self.next();
                Ok(n)
            }
            ref other => Err(self.err_here(format!("expected number, found {}", describe(other)))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn module(mut self) -> Result<RawNetlist> {
        if !self.is_keyword("module") {
            return Err(self.err_here("expected `module`"));
        }
        self.next();
        self.out.name = self.ident()?;
        let mut header_ports: Vec<(String, usize, usize)> = Vec::new();
        if self.eat_sym('(') {
            if !self.eat_sym(')') {
                loop {
                    let dir = if self.is_keyword("input") {
                        self.next();
                        Some(PortDirection::Input)
                    } else if self.is_keyword("output") {
                        self.next();
                        Some(PortDirection::Output)
                    } else if self.is_keyword("inout") {
                        return Err(self.err_here("inout ports are not supported"));
                    } else {
                        None
                    };
                    if dir.is_some() && self.is_keyword("wire") {
                        self.next();
                    }
                    let range = if dir.is_some() { self.opt_range()? } else { None };
                    let t = self.peek().clone();
                    let name = self.ident()?;
                    if let Some(d) = dir {
                        self.declare(&name, range, Some(d), t.line, t.column)?;
                    }
                    header_ports.push((name, t.line, t.column));
                    if self.eat_sym(')') {
                        break;
                    }
                    self.expect_sym(',')?;
                }
            }
        }
        self.expect_sym(';')?;

        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Ident(kw) if kw == "endmodule" => {
                    self.next();
                    break;
                }
                Tok::Ident(kw) if kw == "input" || kw == "output" || kw == "wire" => {
                    let kw = kw.clone();
                    self.next();
                    self.declaration(&kw)?;
                }
                Tok::Ident(kw) if kw == "module" => {
                    return Err(syntax(t.line, t.column, "nested module declaration"));
                }
                Tok::Ident(kw) if BEHAVIORAL.contains(&kw.as_str()) => {
                    return Err(syntax(
                        t.line,
                        t.column,
                        format!("`{kw}` is not supported in structural netlists"),
                    ));
                }
                Tok::Ident(_) => self.instance()?,
                Tok::Eof => return Err(syntax(t.line, t.column, "missing `endmodule`")),
                other => {
                    return Err(syntax(t.line, t.column, format!("unexpected {}", describe(other))))
                }
            }
        }
        if self.peek().tok != Tok::Eof {
            let t = self.peek();
            return Err(syntax(t.line, t.column, "only one flattened module is supported"));
        }

        let header_names: std::collections::HashSet<String> =
            header_ports.iter().map(|(n, _, _)| n.clone()).collect();
        // ports in header order, bit-blasted
        for (name, line, column) in header_ports {
            let sig = self.signals.get(&name).cloned().ok_or_else(|| {
                syntax(line, column, format!("port `{name}` has no direction declaration"))
            })?;
            let direction = sig.direction.ok_or_else(|| {
                syntax(line, column, format!("port `{name}` has no direction declaration"))
            })?;
            for bit in sig.bits(&name) {
                let net = self.net_ids[&bit];
                self.out.ports.push(RawPort {
                    name: bit,
                    direction,
                    net,
                });
            }
        }
        for name in &self.signal_order {
            if self.signals[name].direction.is_some() && !header_names.contains(name.as_str()) {
                return Err(syntax(
                    1,
                    1,
                    format!("`{name}` is declared as a port but missing from the module header"),
                ));
            }
        }
        Ok(self.out)
    }

    fn opt_range(&mut self) -> Result<Option<(u64, u64)>> {
        if !self.eat_sym('[') {
            return Ok(None);
        }
        let msb = self.number()?;
        self.expect_sym(':')?;
        let lsb = self.number()?;
        self.expect_sym(']')?;
        Ok(Some((msb, lsb)))
    }

    fn declaration(&mut self, kw: &str) -> Result<()> {
        let direction = match kw {
            "input" => Some(PortDirection::Input),
            "output" => Some(PortDirection::Output),
            _ => None,
        };
        if direction.is_some() && self.is_keyword("wire") {
            self.next();
        }
        let range = self.opt_range()?;
        loop {
            let t = self.peek().clone();
            let name = self.ident()?;
            self.declare(&name, range, direction, t.line, t.column)?;
            if self.eat_sym(';') {
                return Ok(());
            }
            self.expect_sym(',')?;
        }
    }

    fn declare(
        &mut self,
        name: &str,
        range: Option<(u64, u64)>,
        direction: Option<PortDirection>,
        line: usize,
        column: usize,
    ) -> Result<()> {
        if let Some(existing) = self.signals.get_mut(name) {
            // `output y; wire y;` is legal: a port may be redeclared as a wire
            let compatible = existing.range == range
                && (existing.direction.is_none() != direction.is_none());
            if !compatible {
                return Err(syntax(line, column, format!("`{name}` declared more than once")));
            }
            if direction.is_some() {
                existing.direction = direction;
            }
            return Ok(());
        }
        let sig = Signal { range, direction };
        for bit in sig.bits(name) {
            let id = self.out.nets.len();
            self.out.nets.push(bit.clone());
            self.net_ids.insert(bit, id);
        }
        self.signals.insert(name.to_string(), sig);
        self.signal_order.push(name.to_string());
        Ok(())
    }

    fn instance(&mut self) -> Result<()> {
        let start = self.peek().clone();
        let cell = self.ident()?;
        if self.peek().tok == Tok::Sym('#') {
            return Err(self.err_here("parameterized instances are not supported"));
        }
        let name = self.ident()?;
        if self.peek().tok == Tok::Sym('[') {
            return Err(self.err_here("instance arrays are not supported"));
        }
        self.expect_sym('(')?;
        let mut connections = Vec::new();
        if !self.eat_sym(')') {
            loop {
                if self.peek().tok != Tok::Sym('.') {
                    return Err(self.err_here("positional port connections are not supported"));
                }
                self.next();
                let pin = self.ident()?;
                self.expect_sym('(')?;
                let net = if self.peek().tok == Tok::Sym(')') {
                    NetRef::Open
                } else {
                    self.net_expr()?
                };
                self.expect_sym(')')?;
                if connections.iter().any(|c: &RawConnection| c.pin == pin) {
                    return Err(syntax(
                        start.line,
                        start.column,
                        format!("instance `{name}` connects pin `{pin}` twice"),
                    ));
                }
                connections.push(RawConnection { pin, net });
                if self.eat_sym(')') {
                    break;
                }
                self.expect_sym(',')?;
            }
        }
        self.expect_sym(';')?;
        if self.out.instances.iter().any(|i| i.name == name) {
            return Err(syntax(
                start.line,
                start.column,
                format!("duplicate instance name `{name}`"),
            ));
        }
        self.out.instances.push(RawInstance {
            cell,
            name,
            line: start.line,
            connections,
        });
        Ok(())
    }

    fn net_expr(&mut self) -> Result<NetRef> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Based(width, value) => {
                self.next();
                if width.is_some_and(|w| w != 1) || value > 1 {
                    return Err(syntax(t.line, t.column, "only 1-bit constants can drive a pin"));
                }
                Ok(NetRef::Const(value == 1))
            }
            Tok::Number(v) if v <= 1 => {
                self.next();
                Ok(NetRef::Const(v == 1))
            }
            Tok::Sym('{') => Err(syntax(t.line, t.column, "concatenations are not supported")),
            Tok::Ident(name) => {
                self.next();
                let sig = self.signals.get(&name).cloned().ok_or_else(|| Error::UndeclaredNet {
                    line: t.line,
                    column: t.column,
                    net: name.clone(),
                })?;
                if self.eat_sym('[') {
                    let bit = self.number()?;
                    if self.peek().tok == Tok::Sym(':') {
                        return Err(self.err_here("part selects are not supported on single-bit pins"));
                    }
                    self.expect_sym(']')?;
                    if !sig.contains(bit) {
                        return Err(Error::UndeclaredNet {
                            line: t.line,
                            column: t.column,
                            net: format!("{name}[{bit}]"),
                        });
                    }
                    Ok(NetRef::Net(self.net_ids[&format!("{name}[{bit}]")]))
                } else if sig.range.is_some() {
                    match sig.range {
                        Some((a, b)) if a == b => Ok(NetRef::Net(self.net_ids[&format!("{name}[{a}]")])),
                        _ => Err(syntax(
                            t.line,
                            t.column,
                            format!("vector `{name}` connected to a single-bit pin"),
                        )),
                    }
                } else {
                    Ok(NetRef::Net(self.net_ids[&name]))
                }
            }
            other => Err(syntax(t.line, t.column, format!("unexpected {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(n) => format!("number {n}"),
        Tok::Based(_, v) => format!("literal {v}"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Eof => "end of file".to_string(),
    }
}
