// SPDX-License-Identifier: Apache-2.0

//! Two-state, cycle-accurate reference simulator for model graphs.
//!
//! Each cycle evaluates every block in combinational order against the
//! current register state, then commits the next state. Registers start at
//! zero. A register whose block carries `reset_stage = s` is also forced to
//! zero at the clock edges ending cycles `0..s`; nested bodies inherit the
//! stage of the block that instantiates them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{BlockCatalog, Op};
use crate::error::HarnessError;
use crate::model::{resolve_with_chain, BitwiseOp, BlockId, BlockParams, MinMaxMode, ModelGraph};
use crate::rng;
use crate::types::{mask, SignalType};

/// Raw bit patterns per top-level input block, one per cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub cycles: usize,
    /// Keyed by input block id.
    pub inputs: BTreeMap<BlockId, Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOutput {
    pub name: String,
    pub width: u32,
    pub values: Vec<u64>,
}

/// Output values per cycle. Cycle 0 is the first cycle after reset deasserts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub cycles: usize,
    /// Number of cycles the reset is held before cycle 0.
    pub reset_cycles: usize,
    pub outputs: Vec<TraceOutput>,
}

/// Cycles of reset the testbenches apply before cycle 0.
pub const RESET_CYCLES: usize = 2;

pub fn input_name(id: BlockId) -> String {
    format!("in{id}")
}

pub fn output_name(id: BlockId) -> String {
    format!("out{id}")
}

impl Trace {
    /// Lines of the form `<name>=<hex>@<cycle>`, cycle-major, outputs in
    /// port order. Hex digits are lowercase and padded to the port width.
    pub fn to_text(&self) -> String {
        let mut s = format!("# reset={}\n", self.reset_cycles);
        for t in 0..self.cycles {
            for o in &self.outputs {
                let digits = o.width.div_ceil(4) as usize;
                let _ = writeln!(s, "{}={:0digits$x}@{}", o.name, o.values[t], t);
            }
        }
        s
    }

    /// Parses the golden trace grammar. Every value must be a defined hex
    /// number; widths are recovered from the digit count.
    pub fn from_text(text: &str) -> Result<Trace, HarnessError> {
        let mut reset_cycles = 0;
        let mut outputs: Vec<TraceOutput> = Vec::new();
        let mut cycles = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# reset=") {
                reset_cycles = rest.parse().map_err(|_| bad(i, line))?;
                continue;
            }
            let (name, value, cycle) = split_line(line).ok_or_else(|| bad(i, line))?;
            let bits = u64::from_str_radix(value, 16).map_err(|_| bad(i, line))?;
            let pos = match outputs.iter().position(|o| o.name == name) {
                Some(p) => p,
                None => {
                    outputs.push(TraceOutput {
                        name: name.to_string(),
                        width: 4 * value.len() as u32,
                        values: Vec::new(),
                    });
                    outputs.len() - 1
                }
            };
            if outputs[pos].values.len() != cycle {
                return Err(bad(i, line));
            }
            outputs[pos].values.push(bits);
            cycles = cycles.max(cycle + 1);
        }
        if outputs.iter().any(|o| o.values.len() != cycles) {
            return Err(HarnessError::Trace {
                line: 0,
                text: "ragged trace".into(),
            });
        }
        Ok(Trace {
            cycles,
            reset_cycles,
            outputs,
        })
    }

    pub fn output(&self, name: &str) -> Option<&TraceOutput> {
        self.outputs.iter().find(|o| o.name == name)
    }
}

fn bad(i: usize, line: &str) -> HarnessError {
    HarnessError::Trace {
        line: i + 1,
        text: line.to_string(),
    }
}

/// Splits `name=value@cycle`.
pub(crate) fn split_line(line: &str) -> Option<(&str, &str, usize)> {
    let (name, rest) = line.split_once('=')?;
    let (value, cycle) = rest.split_once('@')?;
    if name.is_empty()
        || value.is_empty()
        || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return None;
    }
    Some((name, value, cycle.trim().parse().ok()?))
}

/// Seeded stimulus over the top-level inputs. The first four cycles are the
/// boundary vectors all-zero, all-ones, minimum and maximum.
pub fn make_stimulus(m: &ModelGraph, catalog: &BlockCatalog, seed: u64, cycles: usize) -> Stimulus {
    let mut r = rng::seeded(seed);
    let mut inputs = BTreeMap::new();
    for b in m.inports(catalog) {
        let ty = b.output_type;
        let boundary = [
            0,
            ty.mask(),
            ty.wrap(ty.min_value()),
            ty.wrap(ty.max_value()),
        ];
        let values = (0..cycles)
            .map(|t| {
                if t < boundary.len() {
                    boundary[t]
                } else {
                    r.gen::<u64>() & ty.mask()
                }
            })
            .collect();
        inputs.insert(b.id, values);
    }
    Stimulus { cycles, inputs }
}

/// Runs `m` for `s.cycles` cycles.
///
/// # Panics
/// If `m` does not validate or the stimulus misses an input.
pub fn simulate(m: &ModelGraph, s: &Stimulus, catalog: &BlockCatalog) -> Trace {
    let compiled = Compiled::new(m, &[], catalog);
    let mut state = compiled.initial_state();
    let outs = m.outports(catalog);
    let mut outputs: Vec<TraceOutput> = outs
        .iter()
        .map(|b| TraceOutput {
            name: output_name(b.id),
            width: b.output_type.width(),
            values: Vec::new(),
        })
        .collect();
    let input_ids: Vec<BlockId> = m.inports(catalog).iter().map(|b| b.id).collect();
    for t in 0..s.cycles {
        let inputs: Vec<u64> = input_ids
            .iter()
            .map(|id| s.inputs.get(id).expect("stimulus covers every input")[t])
            .collect();
        let (values, next) = compiled.step(
            &state,
            &inputs,
            Ctx {
                t: t as u64,
                offset: 0,
                enabled: true,
            },
        );
        for (o, v) in outputs.iter_mut().zip(values) {
            o.values.push(v);
        }
        state = next;
    }
    Trace {
        cycles: s.cycles,
        reset_cycles: RESET_CYCLES,
        outputs,
    }
}

#[derive(Debug, Clone, Copy)]
struct Ctx {
    t: u64,
    offset: u32,
    enabled: bool,
}

#[derive(Debug, Clone)]
struct State {
    regs: Vec<u64>,
    children: Vec<Option<State>>,
}

struct Node<'a> {
    op: Op,
    ty: SignalType,
    params: &'a BlockParams,
    drivers: Vec<usize>,
    in_types: Vec<SignalType>,
    child: Option<Box<Compiled<'a>>>,
    stage: u32,
}

struct Compiled<'a> {
    nodes: Vec<Node<'a>>,
    order: Vec<usize>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl<'a> Compiled<'a> {
    fn new(g: &'a ModelGraph, scopes: &[&'a ModelGraph], catalog: &BlockCatalog) -> Self {
        let pos: BTreeMap<BlockId, usize> = g
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect();
        let mut inner: Vec<&'a ModelGraph> = scopes.to_vec();
        inner.push(g);
        let nodes = g
            .blocks
            .iter()
            .map(|b| {
                let kind = catalog.lookup_kind(&b.kind).expect("validated kind");
                let arity = g.arity_of(b, kind, scopes);
                let drivers: Vec<usize> = g
                    .input_drivers(b.id, arity)
                    .into_iter()
                    .map(|d| pos[&d.expect("validated: every input driven").block])
                    .collect();
                let in_types = drivers.iter().map(|&i| g.blocks[i].output_type).collect();
                let child = match kind.op {
                    Op::IfAction => Some(Box::new(Compiled::new(
                        g.subsystem(b.id).expect("body"),
                        &inner,
                        catalog,
                    ))),
                    Op::ModelRef => {
                        let name = b.params.model.as_deref().expect("model name");
                        let (body, chain) =
                            resolve_with_chain(g, scopes, name).expect("resolvable reference");
                        Some(Box::new(Compiled::new(body, &chain, catalog)))
                    }
                    _ => None,
                };
                Node {
                    op: kind.op,
                    ty: b.output_type,
                    params: &b.params,
                    drivers,
                    in_types,
                    child,
                    stage: b.reset_stage(),
                }
            })
            .collect();
        let order = g
            .eval_order(catalog)
            .expect("validated: no combinational loop")
            .iter()
            .map(|id| pos[id])
            .collect();
        let inputs = g.inports(catalog).iter().map(|b| pos[&b.id]).collect();
        let outputs = g.outports(catalog).iter().map(|b| pos[&b.id]).collect();
        Compiled {
            nodes,
            order,
            inputs,
            outputs,
        }
    }

    fn initial_state(&self) -> State {
        State {
            regs: vec![0; self.nodes.len()],
            children: self
                .nodes
                .iter()
                .map(|n| n.child.as_ref().map(|c| c.initial_state()))
                .collect(),
        }
    }

    fn step(&self, state: &State, inputs: &[u64], ctx: Ctx) -> (Vec<u64>, State) {
        let mut v = vec![0u64; self.nodes.len()];
        let mut next = state.clone();
        for (k, &i) in self.inputs.iter().enumerate() {
            v[i] = inputs[k] & self.nodes[i].ty.mask();
        }
        // Register outputs are known before the sweep; readers may precede them.
        for (i, n) in self.nodes.iter().enumerate() {
            if n.op == Op::Delay {
                v[i] = state.regs[i];
            }
        }
        for &i in &self.order {
            let n = &self.nodes[i];
            let ins: Vec<u64> = n.drivers.iter().map(|&d| v[d]).collect();
            let stage = ctx.offset + n.stage;
            let in_reset = ctx.t < stage as u64;
            let commit = |old: u64, d: u64| {
                if in_reset {
                    0
                } else if ctx.enabled {
                    d
                } else {
                    old
                }
            };
            v[i] = match n.op {
                Op::Constant => n.ty.wrap(n.params.value.unwrap_or(0)),
                Op::Inport | Op::StimulusSource => v[i],
                // The driver may come later in the order; commit after the sweep.
                Op::Delay => v[i],
                Op::DetectChange | Op::DetectIncrease | Op::DetectDecrease => {
                    let ty = n.in_types[0];
                    let (x, prev) = (ty.interpret(ins[0]), ty.interpret(state.regs[i]));
                    next.regs[i] = commit(state.regs[i], ins[0]);
                    let hit = match n.op {
                        Op::DetectChange => x != prev,
                        Op::DetectIncrease => x > prev,
                        _ => x < prev,
                    };
                    hit as u64
                }
                Op::IfAction => {
                    let child = n.child.as_ref().expect("body");
                    let cond = ins[0] & 1 == 1;
                    let cctx = Ctx {
                        t: ctx.t,
                        offset: stage,
                        enabled: ctx.enabled && cond,
                    };
                    let cstate = state.children[i].as_ref().expect("child state");
                    let (outs, cnext) = child.step(cstate, &ins[1..], cctx);
                    next.children[i] = Some(cnext);
                    let out = if cond { outs[0] } else { state.regs[i] };
                    next.regs[i] = commit(state.regs[i], out);
                    out
                }
                Op::ModelRef => {
                    let child = n.child.as_ref().expect("body");
                    let cctx = Ctx {
                        t: ctx.t,
                        offset: stage,
                        enabled: ctx.enabled,
                    };
                    let cstate = state.children[i].as_ref().expect("child state");
                    let (outs, cnext) = child.step(cstate, &ins, cctx);
                    next.children[i] = Some(cnext);
                    outs[0]
                }
                _ => eval_comb(n.op, n.ty, n.params, &ins, &n.in_types),
            };
        }
        for (i, n) in self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.op == Op::Delay)
        {
            let in_reset = ctx.t < (ctx.offset + n.stage) as u64;
            next.regs[i] = if in_reset {
                0
            } else if ctx.enabled {
                v[n.drivers[0]]
            } else {
                state.regs[i]
            };
        }
        let outs = self.outputs.iter().map(|&i| v[i]).collect();
        (outs, next)
    }
}

/// Sign- or zero-extends `bits` of type `from` to `width` bits.
pub fn extend(bits: u64, from: SignalType, width: u32) -> u64 {
    (from.interpret(bits) as u64) & mask(width)
}

/// Stateless block semantics on raw bit patterns.
pub fn eval_comb(op: Op, out: SignalType, p: &BlockParams, ins: &[u64], tys: &[SignalType]) -> u64 {
    let val = |k: usize| tys[k].interpret(ins[k]);
    match op {
        Op::Outport => ins[0],
        Op::Abs => out.wrap(val(0).abs()),
        Op::Add => {
            let signs: Vec<char> = p
                .signs
                .as_deref()
                .map(|s| s.chars().collect())
                .unwrap_or_default();
            let sum: i128 = (0..ins.len())
                .map(|k| {
                    if signs.get(k) == Some(&'-') {
                        -val(k)
                    } else {
                        val(k)
                    }
                })
                .sum();
            out.wrap(sum)
        }
        Op::Bias => out.wrap(val(0) + p.value.unwrap_or(0)),
        Op::Divide => ins[0]
            .checked_div(ins[1])
            .map_or(out.mask(), |q| q & out.mask()),
        Op::Gain => out.wrap(val(0).wrapping_mul(p.value.unwrap_or(0))),
        Op::MinMax => {
            let it = (0..ins.len()).map(val);
            let v = match p.minmax.unwrap_or(MinMaxMode::Min) {
                MinMaxMode::Min => it.min(),
                MinMaxMode::Max => it.max(),
            };
            out.wrap(v.unwrap_or(0))
        }
        Op::UnaryMinus => out.wrap(-val(0)),
        Op::BitClear => ins[0] & !(1u64 << p.bit.unwrap_or(0)) & out.mask(),
        Op::BitSet => (ins[0] | (1u64 << p.bit.unwrap_or(0))) & out.mask(),
        Op::Bitwise => {
            let w = out.width();
            let xs = (0..ins.len()).map(|k| extend(ins[k], tys[k], w));
            let op = p.bitwise.unwrap_or(BitwiseOp::And);
            let r = match op {
                BitwiseOp::And | BitwiseOp::Nand => xs.fold(u64::MAX, |a, x| a & x),
                BitwiseOp::Or | BitwiseOp::Nor => xs.fold(0, |a, x| a | x),
                BitwiseOp::Xor | BitwiseOp::Xnor => xs.fold(0, |a, x| a ^ x),
            };
            let r = if matches!(op, BitwiseOp::Nand | BitwiseOp::Nor | BitwiseOp::Xnor) {
                !r
            } else {
                r
            };
            r & out.mask()
        }
        Op::BitToInteger => {
            let n = ins.len();
            ins.iter()
                .enumerate()
                .fold(0, |acc, (k, &b)| acc | ((b & 1) << (n - 1 - k)))
        }
        Op::CompareToConstant => p
            .compare
            .expect("compare")
            .eval(val(0), p.value.unwrap_or(0)) as u64,
        Op::CompareToZero => p.compare.expect("compare").eval(val(0), 0) as u64,
        Op::If => {
            let pick = if ins[0] & 1 == 1 { 1 } else { 2 };
            extend(ins[pick], tys[pick], out.width())
        }
        other => unreachable!("{other:?} is not a stateless leaf"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockInstance, CompareOp, PortRef};

    fn cat() -> BlockCatalog {
        BlockCatalog::standard()
    }

    fn io(kind: &str, ty: SignalType, port: u32) -> BlockInstance {
        let mut b = BlockInstance::new(0, kind, ty);
        b.params.port = Some(port);
        b
    }

    fn unary(kind: &str, input: SignalType, out: SignalType, params: BlockParams) -> ModelGraph {
        let mut g = ModelGraph::new("top");
        let i = g.push_block(io("Inport", input, 0));
        let b = g.push_block(BlockInstance::new(0, kind, out).with_params(params));
        let o = g.push_block(io("Outport", out, 0));
        g.connect(PortRef::out(i), PortRef::new(b, 0));
        g.connect(PortRef::out(b), PortRef::new(o, 0));
        assert_eq!(crate::model::validate(&g, &cat()), vec![]);
        g
    }

    fn run(g: &ModelGraph, inputs: &[&[u64]]) -> Vec<u64> {
        let ids: Vec<BlockId> = g.inports(&cat()).iter().map(|b| b.id).collect();
        let cycles = inputs[0].len();
        let s = Stimulus {
            cycles,
            inputs: ids
                .into_iter()
                .zip(inputs.iter().map(|v| v.to_vec()))
                .collect(),
        };
        simulate(g, &s, &cat()).outputs[0].values.clone()
    }

    #[test]
    fn constant_source() {
        let u = SignalType::ufix(4);
        let mut g = ModelGraph::new("top");
        let mut c = BlockInstance::new(0, "Constant", u);
        c.params.value = Some(5);
        let c = g.push_block(c);
        let o = g.push_block(io("Outport", u, 0));
        g.connect(PortRef::out(c), PortRef::new(o, 0));
        let s = Stimulus {
            cycles: 3,
            inputs: BTreeMap::new(),
        };
        assert_eq!(simulate(&g, &s, &cat()).outputs[0].values, vec![5, 5, 5]);
    }

    #[test]
    fn add_of_two_inports() {
        let u = SignalType::ufix(4);
        let mut g = ModelGraph::new("top");
        let a = g.push_block(io("Inport", u, 0));
        let b = g.push_block(io("Inport", u, 1));
        let mut add = BlockInstance::new(0, "Add", SignalType::ufix(5));
        add.params.inputs = Some(2);
        let s = g.push_block(add);
        let o = g.push_block(io("Outport", SignalType::ufix(5), 0));
        g.connect(PortRef::out(a), PortRef::new(s, 0));
        g.connect(PortRef::out(b), PortRef::new(s, 1));
        g.connect(PortRef::out(s), PortRef::new(o, 0));
        assert_eq!(run(&g, &[&[3], &[5]]), vec![8]);
    }

    #[test]
    fn bit_set_index_two() {
        let u = SignalType::ufix(4);
        let g = unary(
            "Bit Set",
            u,
            u,
            BlockParams {
                bit: Some(2),
                ..Default::default()
            },
        );
        assert_eq!(run(&g, &[&[0b0001]]), vec![0b0101]);
    }

    #[test]
    fn detect_change_starts_from_zero() {
        let u = SignalType::ufix(4);
        let g = unary(
            "Detect Change",
            u,
            SignalType::boolean(),
            BlockParams::default(),
        );
        assert_eq!(run(&g, &[&[0, 3, 3, 1]]), vec![0, 1, 0, 1]);
        let g = unary(
            "Detect Decrease",
            SignalType::sfix(4),
            SignalType::boolean(),
            BlockParams::default(),
        );
        assert_eq!(run(&g, &[&[0xf, 0x1, 0x8]]), vec![1, 0, 1]);
    }

    #[test]
    fn divide_by_zero_saturates_and_abs_of_min() {
        let s8 = SignalType::sfix(8);
        let g = unary("Abs", s8, SignalType::ufix(8), BlockParams::default());
        assert_eq!(run(&g, &[&[0x80, 0xff, 0x05]]), vec![128, 1, 5]);
        let g = unary(
            "Compare To Zero",
            s8,
            SignalType::boolean(),
            BlockParams {
                compare: Some(CompareOp::Lt),
                ..Default::default()
            },
        );
        assert_eq!(run(&g, &[&[0x80, 0x00, 0x05]]), vec![1, 0, 0]);
        let ops = [SignalType::ufix(4), SignalType::ufix(4)];
        assert_eq!(
            eval_comb(
                Op::Divide,
                SignalType::ufix(4),
                &BlockParams::default(),
                &[7, 0],
                &ops
            ),
            15
        );
        assert_eq!(
            eval_comb(
                Op::Divide,
                SignalType::ufix(4),
                &BlockParams::default(),
                &[7, 2],
                &ops
            ),
            3
        );
    }

    #[test]
    fn delay_stage_holds_reset() {
        let u = SignalType::ufix(4);
        let g = unary(
            "Delay",
            u,
            u,
            BlockParams {
                reset_stage: Some(2),
                ..Default::default()
            },
        );
        assert_eq!(run(&g, &[&[1, 2, 3, 4, 5]]), vec![0, 0, 0, 3, 4]);
        let g = unary("Delay", u, u, BlockParams::default());
        assert_eq!(run(&g, &[&[1, 2, 3]]), vec![0, 1, 2]);
    }

    #[test]
    fn stimulus_boundary_and_range() {
        let g = unary(
            "Gain",
            SignalType::sfix(4),
            SignalType::sfix(4),
            BlockParams {
                value: Some(1),
                ..Default::default()
            },
        );
        let s = make_stimulus(&g, &cat(), 9, 1000);
        let v = &s.inputs[&0];
        assert_eq!(&v[..4], &[0, 0xf, 0x8, 0x7]);
        assert!(v.iter().all(|&x| x <= 0xf));
        assert_eq!(s, make_stimulus(&g, &cat(), 9, 1000));
    }

    #[test]
    fn trace_text_round_trip() {
        let t = Trace {
            cycles: 2,
            reset_cycles: 2,
            outputs: vec![
                TraceOutput {
                    name: "out3".into(),
                    width: 5,
                    values: vec![0x1f, 0],
                },
                TraceOutput {
                    name: "out4".into(),
                    width: 1,
                    values: vec![1, 0],
                },
            ],
        };
        let text = t.to_text();
        assert_eq!(
            text,
            "# reset=2\nout3=1f@0\nout4=1@0\nout3=00@1\nout4=0@1\n"
        );
        let back = Trace::from_text(&text).unwrap();
        assert_eq!(back.outputs[0].values, t.outputs[0].values);
        assert_eq!(back.outputs[1].values, t.outputs[1].values);
        assert!(Trace::from_text("out3=zz@0").is_err());
    }
}
