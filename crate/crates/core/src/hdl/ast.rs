// SPDX-License-Identifier: Apache-2.0

//! Dialect-neutral syntax tree of the emitted subset.
//!
//! Every statement is three-address: one target, one operator, operands
//! that are nets or literals. The three printers render the same tree and
//! the three parsers read it back, so `parse(print(ast)) == ast` including
//! source spans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::CompareOp;
use crate::types::{SignalType, Signedness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Verilog,
    Vhdl,
    SystemVerilog,
}

impl Dialect {
    pub const ALL: [Dialect; 3] = [Dialect::Verilog, Dialect::Vhdl, Dialect::SystemVerilog];

    pub fn extension(self) -> &'static str {
        match self {
            Dialect::Verilog => "v",
            Dialect::Vhdl => "vhd",
            Dialect::SystemVerilog => "sv",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dialect::Verilog => "verilog",
            Dialect::Vhdl => "vhdl",
            Dialect::SystemVerilog => "systemverilog",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "verilog" | "v" => Ok(Dialect::Verilog),
            "vhdl" | "vhd" => Ok(Dialect::Vhdl),
            "systemverilog" | "sv" => Ok(Dialect::SystemVerilog),
            other => Err(format!("unknown dialect `{other}`")),
        }
    }
}

/// HDL-side type. Unlike [`SignalType`] it allows the 128-bit products
/// that Gain lowers through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HType {
    pub sign: Signedness,
    pub width: u32,
}

pub const MAX_HDL_WIDTH: u32 = 128;

impl HType {
    pub const BOOL: HType = HType {
        sign: Signedness::Boolean,
        width: 1,
    };

    pub fn new(sign: Signedness, width: u32) -> Self {
        debug_assert!((1..=MAX_HDL_WIDTH).contains(&width));
        debug_assert!(sign != Signedness::Boolean || width == 1);
        HType { sign, width }
    }

    pub fn is_bool(self) -> bool {
        self.sign == Signedness::Boolean
    }

    pub fn is_signed(self) -> bool {
        self.sign == Signedness::Signed
    }

    pub fn mask(self) -> u128 {
        mask128(self.width)
    }

    /// Sign- or zero-extends a stored pattern to a full `i128`.
    pub fn value(self, bits: u128) -> i128 {
        let bits = bits & self.mask();
        if self.is_signed() && self.width < 128 && (bits >> (self.width - 1)) & 1 == 1 {
            (bits | !self.mask()) as i128
        } else {
            bits as i128
        }
    }
}

impl From<SignalType> for HType {
    fn from(t: SignalType) -> Self {
        HType {
            sign: t.signedness,
            width: t.word_length,
        }
    }
}

pub fn mask128(width: u32) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

/// Start of a statement in the printed text, 1-based.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub dir: Dir,
    pub ty: HType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub name: String,
    pub ty: HType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lit {
    pub ty: HType,
    pub bits: u128,
}

impl Lit {
    pub fn new(ty: HType, bits: u128) -> Self {
        Lit {
            ty,
            bits: bits & ty.mask(),
        }
    }

    pub fn zero(ty: HType) -> Self {
        Lit { ty, bits: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Net(String),
    Lit(Lit),
}

impl Operand {
    pub fn net(name: impl Into<String>) -> Self {
        Operand::Net(name.into())
    }

    pub fn as_net(&self) -> Option<&str> {
        match self {
            Operand::Net(n) => Some(n),
            Operand::Lit(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    /// Full product: the target is as wide as both operands together.
    Mul,
    And,
    Or,
    Xor,
}

/// Right-hand sides. Operands of arithmetic, logic, comparison and mux
/// forms share one type; width changes are explicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rhs {
    Copy(Operand),
    Unary(UnOp, Operand),
    Binary(BinOp, Operand, Operand),
    Compare(CompareOp, Operand, Operand),
    Mux(Operand, Operand, Operand),
    /// Sign- or zero-extension to the target width.
    Resize(Operand),
    Slice(Operand, u32, u32),
    /// First operand is most significant.
    Concat(Vec<Operand>),
    /// Same bits, other signedness.
    Cast(Operand),
    /// Unsigned division; a zero divisor yields all ones.
    SafeDiv(Operand, Operand),
}

impl Rhs {
    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            Rhs::Copy(a)
            | Rhs::Unary(_, a)
            | Rhs::Resize(a)
            | Rhs::Slice(a, _, _)
            | Rhs::Cast(a) => vec![a],
            Rhs::Binary(_, a, b) | Rhs::Compare(_, a, b) | Rhs::SafeDiv(a, b) => vec![a, b],
            Rhs::Mux(c, a, b) => vec![c, a, b],
            Rhs::Concat(v) => v.iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assign {
    pub target: String,
    pub rhs: Rhs,
    pub span: Span,
}

/// Combinational if/else process driving one target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comb {
    pub target: String,
    pub cond: Operand,
    pub then: Operand,
    pub els: Operand,
    pub span: Span,
}

/// One register inside the module's clocked process:
/// `if reset then target := init elsif enable then target := d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegUpdate {
    pub target: String,
    pub reset: String,
    pub init: u128,
    pub enable: Option<Operand>,
    pub d: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clocked {
    pub regs: Vec<RegUpdate>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub module: String,
    pub name: String,
    /// Port name and actual, in the child's port order.
    pub conns: Vec<(String, Operand)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Item {
    Assign(Assign),
    Comb(Comb),
    Clocked(Clocked),
    Instance(Instance),
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Assign(a) => a.span,
            Item::Comb(c) => c.span,
            Item::Clocked(c) => c.span,
            Item::Instance(i) => i.span,
        }
    }

    pub(crate) fn span_mut(&mut self) -> &mut Span {
        match self {
            Item::Assign(a) => &mut a.span,
            Item::Comb(c) => &mut c.span,
            Item::Clocked(c) => &mut c.span,
            Item::Instance(i) => &mut i.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Module {
    pub name: String,
    pub ports: Vec<Port>,
    pub nets: Vec<Net>,
    pub items: Vec<Item>,
    pub span: Span,
}

impl Module {
    /// Type of a port or net.
    pub fn type_of(&self, name: &str) -> Option<HType> {
        self.ports
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.ty)
            .or_else(|| self.nets.iter().find(|n| n.name == name).map(|n| n.ty))
    }

    pub fn operand_type(&self, op: &Operand) -> Option<HType> {
        match op {
            Operand::Net(n) => self.type_of(n),
            Operand::Lit(l) => Some(l.ty),
        }
    }

    /// Names assigned from inside a process, which Verilog declares `reg`.
    pub fn process_targets(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                Item::Comb(c) => out.push(c.target.as_str()),
                Item::Clocked(c) => out.extend(c.regs.iter().map(|r| r.target.as_str())),
                _ => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HdlAst {
    /// Children before parents; the last module is the top.
    pub modules: Vec<Module>,
}

impl HdlAst {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn top(&self) -> Option<&Module> {
        self.modules.last()
    }

    /// Same tree with every span cleared, for comparisons that ignore layout.
    pub fn without_spans(&self) -> HdlAst {
        let mut a = self.clone();
        for m in &mut a.modules {
            m.span = Span::default();
            for it in &mut m.items {
                *it.span_mut() = Span::default();
            }
        }
        a
    }
}
