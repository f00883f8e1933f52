// SPDX-License-Identifier: Apache-2.0

//! The block library: four functional groups, port signatures, type rules,
//! timing weights and rates for every kind the generator may place.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;
use crate::types::{SamplePeriod, SignalType, MAX_WORD_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockGroup {
    SourceSink,
    Math,
    HdlSpecific,
    ControlFlow,
}

impl BlockGroup {
    pub const ALL: [BlockGroup; 4] = [
        BlockGroup::SourceSink,
        BlockGroup::Math,
        BlockGroup::HdlSpecific,
        BlockGroup::ControlFlow,
    ];
}

/// Semantic identity of a kind; emitters and the interpreter dispatch on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Constant,
    Inport,
    Outport,
    StimulusSource,
    Abs,
    Add,
    Bias,
    Divide,
    Gain,
    MinMax,
    UnaryMinus,
    BitClear,
    BitSet,
    Bitwise,
    BitToInteger,
    CompareToConstant,
    CompareToZero,
    DetectChange,
    DetectIncrease,
    DetectDecrease,
    Delay,
    If,
    IfAction,
    ModelRef,
}

impl Op {
    pub fn is_source(self) -> bool {
        matches!(self, Op::Constant | Op::Inport | Op::StimulusSource)
    }

    /// Sources whose values come from the stimulus.
    pub fn is_external_input(self) -> bool {
        matches!(self, Op::Inport | Op::StimulusSource)
    }

    pub fn is_composite(self) -> bool {
        matches!(self, Op::IfAction | Op::ModelRef)
    }

    pub fn is_detect(self) -> bool {
        matches!(
            self,
            Op::DetectChange | Op::DetectIncrease | Op::DetectDecrease
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortConstraint {
    Any,
    /// Any integer type except boolean.
    Integer,
    Unsigned,
    Signed,
    Boolean,
}

impl PortConstraint {
    pub fn admits(self, ty: SignalType) -> bool {
        match self {
            PortConstraint::Any => true,
            PortConstraint::Integer => !ty.is_bool(),
            PortConstraint::Unsigned => ty.is_unsigned(),
            PortConstraint::Signed => ty.is_signed(),
            PortConstraint::Boolean => ty.is_bool(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: &'static str,
    pub constraint: PortConstraint,
}

const fn port(name: &'static str, constraint: PortConstraint) -> PortSpec {
    PortSpec { name, constraint }
}

/// Input arity. Variadic kinds repeat their last port spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Fixed(u32),
    Variadic {
        min: u32,
        max: u32,
    },
    /// Fixed leading ports plus as many data ports as the body has inports.
    Composite {
        leading: u32,
    },
}

impl Arity {
    pub fn accepts(self, n: u32) -> bool {
        match self {
            Arity::Fixed(k) => n == k,
            Arity::Variadic { min, max } => (min..=max).contains(&n),
            Arity::Composite { leading } => n >= leading,
        }
    }

    pub fn min(self) -> u32 {
        match self {
            Arity::Fixed(k) => k,
            Arity::Variadic { min, .. } => min,
            Arity::Composite { leading } => leading + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockKind {
    pub name: &'static str,
    pub op: Op,
    pub group: BlockGroup,
    pub inputs: Vec<PortSpec>,
    pub arity: Arity,
    pub outputs: u32,
    /// Holds state across clock cycles.
    pub is_sequential: bool,
    /// Output depends only on registered state, so combinational paths stop here.
    pub breaks_path: bool,
    pub delay_weight: f64,
    /// Native sample period; the generator only chains kinds of equal rate.
    pub rate: SamplePeriod,
    /// Emission template identifier, shared by every dialect backend.
    pub template: &'static str,
}

impl BlockKind {
    pub fn input_spec(&self, index: u32) -> Option<&PortSpec> {
        match self.arity {
            Arity::Fixed(k) if index >= k => None,
            Arity::Variadic { max, .. } if index >= max => None,
            _ => self
                .inputs
                .get(index as usize)
                .or_else(|| self.inputs.last()),
        }
    }

    pub fn is_source(&self) -> bool {
        self.op.is_source()
    }

    pub fn has_output(&self) -> bool {
        self.outputs > 0
    }

    /// Output type for a leaf kind given its input types.
    ///
    /// Sources take their type from the instance and composite kinds from
    /// their body; both are rejected here.
    pub fn infer_output_type(&self, inputs: &[SignalType]) -> Result<SignalType, CatalogError> {
        let name = self.name;
        let n = inputs.len() as u32;
        if self.op.is_source() {
            return Err(CatalogError::violation(
                name,
                "source kinds carry their own type",
            ));
        }
        if self.op.is_composite() {
            return Err(CatalogError::violation(
                name,
                "composite output type is defined by its body",
            ));
        }
        if !self.arity.accepts(n) {
            return Err(CatalogError::violation(
                name,
                format!("arity {n} not accepted"),
            ));
        }
        for (i, ty) in inputs.iter().enumerate() {
            let spec = self.input_spec(i as u32).expect("arity checked");
            if !spec.constraint.admits(*ty) {
                return Err(CatalogError::violation(
                    name,
                    format!("input {} ({}) rejects {ty}", i, spec.name),
                ));
            }
        }
        let first = inputs[0];
        let widest = inputs.iter().map(|t| t.width()).max().unwrap_or(1);
        let same_class = |tys: &[SignalType]| tys.iter().all(|t| t.signedness == tys[0].signedness);
        match self.op {
            Op::Outport | Op::Bias | Op::Gain | Op::BitClear | Op::BitSet | Op::Delay => Ok(first),
            Op::UnaryMinus => Ok(first),
            Op::Abs => Ok(SignalType::ufix(first.width())),
            Op::Add => {
                if !same_class(inputs) {
                    return Err(CatalogError::violation(name, "mixed signedness"));
                }
                let growth = ceil_log2(n);
                Ok(
                    SignalType::new(first.signedness, (widest + growth).min(MAX_WORD_LENGTH))
                        .expect("width clamped"),
                )
            }
            Op::Divide | Op::MinMax => {
                if !same_class(inputs) {
                    return Err(CatalogError::violation(name, "mixed signedness"));
                }
                Ok(SignalType::new(first.signedness, widest).expect("width in range"))
            }
            Op::Bitwise => {
                if !same_class(inputs) {
                    return Err(CatalogError::violation(name, "mixed operand classes"));
                }
                Ok(SignalType::new(first.signedness, widest).expect("width in range"))
            }
            Op::BitToInteger => Ok(SignalType::ufix(n)),
            Op::CompareToConstant
            | Op::CompareToZero
            | Op::DetectChange
            | Op::DetectIncrease
            | Op::DetectDecrease => Ok(SignalType::boolean()),
            Op::If => {
                let (a, b) = (inputs[1], inputs[2]);
                if a.signedness != b.signedness {
                    return Err(CatalogError::violation(
                        name,
                        "branches disagree on signedness",
                    ));
                }
                Ok(
                    SignalType::new(a.signedness, a.width().max(b.width()))
                        .expect("width in range"),
                )
            }
            Op::Constant | Op::Inport | Op::StimulusSource | Op::IfAction | Op::ModelRef => {
                unreachable!("handled above")
            }
        }
    }
}

pub(crate) fn ceil_log2(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

/// Largest variadic arity any kind accepts.
pub const MAX_VARIADIC: u32 = 32;

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// Immutable set of block kinds. Cheap to share across worker threads.
#[derive(Debug, Clone)]
pub struct BlockCatalog {
    kinds: Vec<BlockKind>,
    index: HashMap<&'static str, usize>,
}

impl BlockCatalog {
    pub fn standard() -> Self {
        use BlockGroup::*;
        use PortConstraint::*;
        let base = SamplePeriod::BASE;
        let mk = |name: &'static str,
                  op: Op,
                  group: BlockGroup,
                  inputs: Vec<PortSpec>,
                  arity: Arity,
                  outputs: u32,
                  template: &'static str| BlockKind {
            name,
            op,
            group,
            inputs,
            arity,
            outputs,
            is_sequential: false,
            breaks_path: false,
            delay_weight: 1.0,
            rate: base,
            template,
        };
        let var = |max| Arity::Variadic { min: 2, max };
        let mut kinds = vec![
            mk(
                "Constant",
                Op::Constant,
                SourceSink,
                vec![],
                Arity::Fixed(0),
                1,
                "const",
            ),
            mk(
                "Inport",
                Op::Inport,
                SourceSink,
                vec![],
                Arity::Fixed(0),
                1,
                "inport",
            ),
            mk(
                "Outport",
                Op::Outport,
                SourceSink,
                vec![port("u", Any)],
                Arity::Fixed(1),
                0,
                "outport",
            ),
            mk(
                "StimulusSource",
                Op::StimulusSource,
                SourceSink,
                vec![],
                Arity::Fixed(0),
                1,
                "stimulus",
            ),
            mk(
                "Abs",
                Op::Abs,
                Math,
                vec![port("u", Integer)],
                Arity::Fixed(1),
                1,
                "abs",
            ),
            mk(
                "Add",
                Op::Add,
                Math,
                vec![port("u", Integer)],
                var(MAX_VARIADIC),
                1,
                "add",
            ),
            mk(
                "Bias",
                Op::Bias,
                Math,
                vec![port("u", Integer)],
                Arity::Fixed(1),
                1,
                "bias",
            ),
            mk(
                "Divide",
                Op::Divide,
                Math,
                vec![port("num", Unsigned), port("den", Unsigned)],
                Arity::Fixed(2),
                1,
                "divide",
            ),
            mk(
                "Gain",
                Op::Gain,
                Math,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "gain",
            ),
            mk(
                "MinMax",
                Op::MinMax,
                Math,
                vec![port("u", Integer)],
                var(MAX_VARIADIC),
                1,
                "minmax",
            ),
            mk(
                "Unary Minus",
                Op::UnaryMinus,
                Math,
                vec![port("u", Signed)],
                Arity::Fixed(1),
                1,
                "neg",
            ),
            mk(
                "Bit Clear",
                Op::BitClear,
                HdlSpecific,
                vec![port("u", Integer)],
                Arity::Fixed(1),
                1,
                "bitclear",
            ),
            mk(
                "Bit Set",
                Op::BitSet,
                HdlSpecific,
                vec![port("u", Integer)],
                Arity::Fixed(1),
                1,
                "bitset",
            ),
            mk(
                "Bitwise Operator",
                Op::Bitwise,
                HdlSpecific,
                vec![port("u", Any)],
                var(MAX_VARIADIC),
                1,
                "bitwise",
            ),
            mk(
                "Bit to Integer Converter",
                Op::BitToInteger,
                HdlSpecific,
                vec![port("b", Boolean)],
                var(MAX_WORD_LENGTH),
                1,
                "bit2int",
            ),
            mk(
                "Compare To Constant",
                Op::CompareToConstant,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "cmpconst",
            ),
            mk(
                "Compare To Zero",
                Op::CompareToZero,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "cmpzero",
            ),
            mk(
                "Detect Change",
                Op::DetectChange,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "detect",
            ),
            mk(
                "Detect Increase",
                Op::DetectIncrease,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "detect",
            ),
            mk(
                "Detect Decrease",
                Op::DetectDecrease,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "detect",
            ),
            mk(
                "Delay",
                Op::Delay,
                HdlSpecific,
                vec![port("u", Any)],
                Arity::Fixed(1),
                1,
                "delay",
            ),
            mk(
                "If",
                Op::If,
                ControlFlow,
                vec![port("cond", Boolean), port("then", Any), port("else", Any)],
                Arity::Fixed(3),
                1,
                "if",
            ),
            mk(
                "If Action Subsystem",
                Op::IfAction,
                ControlFlow,
                vec![port("action", Boolean), port("u", Any)],
                Arity::Composite { leading: 1 },
                1,
                "ifaction",
            ),
            mk(
                "Model",
                Op::ModelRef,
                ControlFlow,
                vec![port("u", Any)],
                Arity::Composite { leading: 0 },
                1,
                "modelref",
            ),
        ];
        for k in &mut kinds {
            match k.op {
                Op::Constant | Op::Inport | Op::Outport | Op::StimulusSource => {
                    k.delay_weight = 0.0
                }
                Op::Delay => {
                    k.is_sequential = true;
                    k.breaks_path = true;
                    k.delay_weight = 0.0;
                }
                Op::DetectChange | Op::DetectIncrease | Op::DetectDecrease | Op::IfAction => {
                    k.is_sequential = true;
                }
                _ => {}
            }
        }
        Self::from_kinds(kinds)
    }

    fn from_kinds(kinds: Vec<BlockKind>) -> Self {
        let index = kinds.iter().enumerate().map(|(i, k)| (k.name, i)).collect();
        BlockCatalog { kinds, index }
    }

    pub fn lookup_kind(&self, name: &str) -> Result<&BlockKind, CatalogError> {
        self.index
            .get(name)
            .map(|&i| &self.kinds[i])
            .ok_or_else(|| CatalogError::UnknownBlockKind(name.to_string()))
    }

    pub fn kinds(&self) -> &[BlockKind] {
        &self.kinds
    }

    pub fn kind_by_op(&self, op: Op) -> &BlockKind {
        self.kinds
            .iter()
            .find(|k| k.op == op)
            .expect("every op has a kind")
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn in_group(&self, group: BlockGroup) -> impl Iterator<Item = &BlockKind> {
        self.kinds.iter().filter(move |k| k.group == group)
    }

    /// Overrides combinational delay weights. Register elements stay at zero.
    pub fn with_delay_weights(
        mut self,
        weights: &BTreeMap<String, f64>,
    ) -> Result<Self, CatalogError> {
        for (name, &w) in weights {
            let i = *self
                .index
                .get(name.as_str())
                .ok_or_else(|| CatalogError::UnknownBlockKind(name.clone()))?;
            let kind = &mut self.kinds[i];
            if kind.breaks_path || !w.is_finite() || w <= 0.0 {
                return Err(CatalogError::violation(
                    kind.name,
                    format!("delay weight {w} not allowed"),
                ));
            }
            kind.delay_weight = w;
        }
        Ok(self)
    }

    pub fn with_rates(
        mut self,
        rates: &BTreeMap<String, SamplePeriod>,
    ) -> Result<Self, CatalogError> {
        for (name, &p) in rates {
            let i = *self
                .index
                .get(name.as_str())
                .ok_or_else(|| CatalogError::UnknownBlockKind(name.clone()))?;
            self.kinds[i].rate = p;
        }
        Ok(self)
    }
}

impl Default for BlockCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn infer_output_type(
    kind: &BlockKind,
    inputs: &[SignalType],
) -> Result<SignalType, CatalogError> {
    kind.infer_output_type(inputs)
}
