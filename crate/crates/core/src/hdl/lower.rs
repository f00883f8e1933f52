// SPDX-License-Identifier: Apache-2.0

//! Model graph to three-address HDL syntax tree.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::*;
use crate::catalog::{BlockCatalog, Op};
use crate::error::HdlError;
use crate::interp::{input_name, output_name};
use crate::model::{
    resolve_with_chain, BitwiseOp, BlockId, BlockInstance, CompareOp, MinMaxMode, ModelGraph,
};

/// Lowered design plus the top module's net-to-block map.
pub(crate) struct Lowered {
    pub ast: HdlAst,
    /// Net name in the top module to the block whose output it carries.
    pub net_map: BTreeMap<String, BlockId>,
}

pub(crate) fn lower(m: &ModelGraph, catalog: &BlockCatalog) -> Result<Lowered, HdlError> {
    let mut l = Lowerer {
        catalog,
        modules: Vec::new(),
        names: HashSet::new(),
        graph_module: HashMap::new(),
    };
    let top = if m.name.is_empty() {
        "top".to_string()
    } else {
        m.name.clone()
    };
    let (_, net_map) = l.graph(m, &[], &top, true)?;
    Ok(Lowered {
        ast: HdlAst { modules: l.modules },
        net_map,
    })
}

const RESERVED: &[&str] = &[
    "abs",
    "all",
    "and",
    "architecture",
    "array",
    "assign",
    "begin",
    "bit",
    "block",
    "body",
    "buffer",
    "case",
    "component",
    "configuration",
    "constant",
    "default",
    "downto",
    "else",
    "elsif",
    "end",
    "endmodule",
    "entity",
    "exit",
    "file",
    "for",
    "function",
    "generate",
    "generic",
    "if",
    "in",
    "inout",
    "input",
    "integer",
    "is",
    "label",
    "library",
    "logic",
    "loop",
    "map",
    "mod",
    "module",
    "nand",
    "new",
    "next",
    "nor",
    "not",
    "null",
    "of",
    "on",
    "open",
    "or",
    "others",
    "out",
    "output",
    "package",
    "port",
    "process",
    "range",
    "record",
    "reg",
    "rem",
    "report",
    "return",
    "rising_edge",
    "select",
    "signal",
    "signed",
    "std_logic",
    "subtype",
    "then",
    "to",
    "type",
    "units",
    "unsigned",
    "until",
    "use",
    "variable",
    "wait",
    "when",
    "while",
    "wire",
    "with",
    "work",
    "xnor",
    "xor",
];

/// Lowercase identifier legal in all three dialects.
pub(crate) fn sanitize(raw: &str) -> String {
    let mut s = String::new();
    for c in raw.chars() {
        let c = c.to_ascii_lowercase();
        if c.is_ascii_alphanumeric() {
            s.push(c);
        } else if !s.ends_with('_') && !s.is_empty() {
            s.push('_');
        }
    }
    while s.ends_with('_') {
        s.pop();
    }
    if s.is_empty() || !s.starts_with(|c: char| c.is_ascii_alphabetic()) {
        s.insert(0, 'm');
    }
    if RESERVED.contains(&s.as_str()) {
        s.push_str("_m");
    }
    s
}

struct Lowerer<'a> {
    catalog: &'a BlockCatalog,
    modules: Vec<Module>,
    names: HashSet<String>,
    graph_module: HashMap<*const ModelGraph, String>,
}

struct Body<'m> {
    ports: Vec<Port>,
    nets: Vec<Net>,
    items: Vec<Item>,
    regs: Vec<RegUpdate>,
    top: bool,
    temps: HashMap<BlockId, u32>,
    types: HashMap<String, HType>,
    graph: &'m ModelGraph,
}

impl Body<'_> {
    fn net(&mut self, name: String, ty: HType) -> String {
        self.types.insert(name.clone(), ty);
        self.nets.push(Net {
            name: name.clone(),
            ty,
        });
        name
    }

    fn tmp(&mut self, id: BlockId, ty: HType) -> String {
        let k = self.temps.entry(id).or_insert(0);
        let name = format!("t{id}_{k}");
        *k += 1;
        self.net(name, ty)
    }

    fn ty(&self, op: &Operand) -> HType {
        match op {
            Operand::Net(n) => self.types[n],
            Operand::Lit(l) => l.ty,
        }
    }

    fn assign(&mut self, target: &str, rhs: Rhs) {
        self.items.push(Item::Assign(Assign {
            target: target.to_string(),
            rhs,
            span: Span::default(),
        }));
    }

    /// `rhs` into a fresh temporary of type `ty`.
    fn temp_assign(&mut self, id: BlockId, ty: HType, rhs: Rhs) -> Operand {
        let t = self.tmp(id, ty);
        self.assign(&t, rhs);
        Operand::Net(t)
    }

    fn extend(&mut self, id: BlockId, x: Operand, width: u32) -> Operand {
        let ty = self.ty(&x);
        if ty.width == width {
            return x;
        }
        debug_assert!(!ty.is_bool() && width > ty.width);
        self.temp_assign(id, HType::new(ty.sign, width), Rhs::Resize(x))
    }

    fn enable(&self) -> Option<Operand> {
        (!self.top).then(|| Operand::net("en"))
    }

    fn driver_name(&self, id: BlockId) -> String {
        let b = self.graph.block(id).expect("driver exists");
        if b.kind == "Inport" || b.kind == "StimulusSource" {
            input_name(id)
        } else {
            format!("n{id}")
        }
    }
}

fn reset_name(stage: u32) -> String {
    if stage == 0 {
        "rst".to_string()
    } else {
        format!("rs{stage}")
    }
}

fn lit(ty: HType, value: i128) -> Operand {
    Operand::Lit(Lit::new(ty, value as u128))
}

impl<'a> Lowerer<'a> {
    fn unique(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut k = 1;
        while self.names.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.names.insert(name.clone());
        name
    }

    fn graph(
        &mut self,
        g: &'a ModelGraph,
        scopes: &[&'a ModelGraph],
        raw_name: &str,
        top: bool,
    ) -> Result<(String, BTreeMap<String, BlockId>), HdlError> {
        let name = self.unique(sanitize(raw_name));
        self.graph_module.insert(g as *const _, name.clone());
        let catalog = self.catalog;
        let mut inner = scopes.to_vec();
        inner.push(g);

        let mut body = Body {
            ports: Vec::new(),
            nets: Vec::new(),
            items: Vec::new(),
            regs: Vec::new(),
            top,
            temps: HashMap::new(),
            types: HashMap::new(),
            graph: g,
        };
        let mut control = vec![("clk", HType::BOOL), ("rst", HType::BOOL)];
        if !top {
            control.push(("en", HType::BOOL));
        }
        for (n, ty) in control {
            body.ports.push(Port {
                name: n.into(),
                dir: Dir::In,
                ty,
            });
            body.types.insert(n.into(), ty);
        }
        for b in g.inports(catalog) {
            let ty = HType::from(b.output_type);
            body.ports.push(Port {
                name: input_name(b.id),
                dir: Dir::In,
                ty,
            });
            body.types.insert(input_name(b.id), ty);
        }
        for b in g.outports(catalog) {
            let ty = HType::from(b.output_type);
            body.ports.push(Port {
                name: output_name(b.id),
                dir: Dir::Out,
                ty,
            });
            body.types.insert(output_name(b.id), ty);
        }

        // Output nets are declared up front so register outputs exist
        // before any statement reads them.
        let mut net_map = BTreeMap::new();
        for b in &g.blocks {
            let kind = catalog
                .lookup_kind(&b.kind)
                .map_err(|_| unsupported(&b.kind))?;
            if kind.op.is_external_input() {
                net_map.insert(input_name(b.id), b.id);
            } else if kind.has_output() {
                let n = body.net(format!("n{}", b.id), b.output_type.into());
                net_map.insert(n, b.id);
            }
        }

        let max_stage = g.blocks.iter().map(|b| b.reset_stage()).max().unwrap_or(0);
        // rq<k> stays set for k cycles after reset; rs<k> also covers the
        // reset cycles themselves so nested bodies start from zero.
        for k in 1..=max_stage {
            let q = body.net(format!("rq{k}"), HType::BOOL);
            let rs = body.net(reset_name(k), HType::BOOL);
            let d = if k == 1 {
                lit(HType::BOOL, 0)
            } else {
                Operand::net(format!("rq{}", k - 1))
            };
            body.regs.push(RegUpdate {
                target: q.clone(),
                reset: "rst".into(),
                init: 1,
                enable: None,
                d,
            });
            body.assign(
                &rs,
                Rhs::Binary(BinOp::Or, Operand::net("rst"), Operand::Net(q)),
            );
        }

        let order = g
            .eval_order(catalog)
            .ok_or_else(|| unsupported("combinational loop"))?;
        for id in order {
            let b = g.block(id).expect("ordered block");
            let kind = catalog
                .lookup_kind(&b.kind)
                .map_err(|_| unsupported(&b.kind))?;
            let arity = g.arity_of(b, kind, scopes);
            let ins: Vec<Operand> = g
                .input_drivers(id, arity)
                .into_iter()
                .map(|d| {
                    d.map(|p| Operand::Net(body.driver_name(p.block)))
                        .ok_or_else(|| unsupported("undriven input"))
                })
                .collect::<Result<_, _>>()?;
            match kind.op {
                Op::IfAction => {
                    let child = g
                        .subsystem(id)
                        .ok_or_else(|| unsupported("missing subsystem"))?;
                    let (module, _) = self.graph(child, &inner, &format!("{name}_s{id}"), false)?;
                    self.lower_instance(&mut body, b, &module, child, ins, true);
                }
                Op::ModelRef => {
                    let ref_name = b.params.model.as_deref().unwrap_or_default();
                    let (def, chain) = resolve_with_chain(g, scopes, ref_name)
                        .ok_or_else(|| unsupported("unresolved reference"))?;
                    let module = match self.graph_module.get(&(def as *const _)) {
                        Some(m) => m.clone(),
                        None => {
                            let owner = chain
                                .last()
                                .map(|o| self.graph_module[&(*o as *const _)].clone());
                            let base = format!("{}_r_{}", owner.unwrap_or_default(), ref_name);
                            self.graph(def, &chain, &base, false)?.0
                        }
                    };
                    self.lower_instance(&mut body, b, &module, def, ins, false);
                }
                op => lower_leaf(&mut body, b, op, ins),
            }
        }

        if !body.regs.is_empty() {
            let regs = std::mem::take(&mut body.regs);
            body.items.push(Item::Clocked(Clocked {
                regs,
                span: Span::default(),
            }));
        }
        self.modules.push(Module {
            name: name.clone(),
            ports: body.ports,
            nets: body.nets,
            items: body.items,
            span: Span::default(),
        });
        Ok((name, net_map))
    }

    fn lower_instance(
        &mut self,
        body: &mut Body<'_>,
        b: &BlockInstance,
        module: &str,
        child: &ModelGraph,
        ins: Vec<Operand>,
        action: bool,
    ) {
        let id = b.id;
        let out_ty = HType::from(b.output_type);
        let stage = b.reset_stage();
        let mut conns = vec![
            ("clk".to_string(), Operand::net("clk")),
            ("rst".to_string(), Operand::net(reset_name(stage))),
        ];
        let data = if action { &ins[1..] } else { &ins[..] };
        let en = if action {
            match body.enable() {
                Some(en) => {
                    body.temp_assign(id, HType::BOOL, Rhs::Binary(BinOp::And, en, ins[0].clone()))
                }
                None => ins[0].clone(),
            }
        } else {
            body.enable().unwrap_or(lit(HType::BOOL, 1))
        };
        conns.push(("en".to_string(), en));
        for (port, x) in child.inports(self.catalog).iter().zip(data) {
            conns.push((input_name(port.id), x.clone()));
        }
        let out_port = child.outports(self.catalog)[0].id;
        let out = format!("n{id}");
        let result = if action {
            body.tmp(id, out_ty)
        } else {
            out.clone()
        };
        conns.push((output_name(out_port), Operand::Net(result.clone())));
        body.items.push(Item::Instance(Instance {
            module: module.to_string(),
            name: format!("u{id}"),
            conns,
            span: Span::default(),
        }));
        if action {
            let held = body.net(format!("h{id}"), out_ty);
            body.regs.push(RegUpdate {
                target: held.clone(),
                reset: reset_name(stage),
                init: 0,
                enable: body.enable(),
                d: Operand::Net(out.clone()),
            });
            body.items.push(Item::Comb(Comb {
                target: out,
                cond: ins[0].clone(),
                then: Operand::Net(result),
                els: Operand::Net(held),
                span: Span::default(),
            }));
        }
    }
}

fn unsupported(kind: &str) -> HdlError {
    HdlError::UnsupportedConstruct {
        kind: kind.to_string(),
        dialect: "any".into(),
    }
}

fn lower_leaf(body: &mut Body<'_>, b: &BlockInstance, op: Op, ins: Vec<Operand>) {
    let id = b.id;
    let t = HType::from(b.output_type);
    let out = format!("n{id}");
    let p = &b.params;
    let value = p.value.unwrap_or(0);
    match op {
        Op::Inport | Op::StimulusSource => {}
        Op::Constant => body.assign(&out, Rhs::Copy(lit(t, value))),
        Op::Outport => body.assign(&output_name(id), Rhs::Copy(ins[0].clone())),
        Op::Abs => {
            let x = ins[0].clone();
            let xt = body.ty(&x);
            if xt.is_signed() {
                let neg = body.temp_assign(
                    id,
                    HType::BOOL,
                    Rhs::Compare(CompareOp::Lt, x.clone(), lit(xt, 0)),
                );
                let flipped = body.temp_assign(id, xt, Rhs::Unary(UnOp::Neg, x.clone()));
                let sel = body.temp_assign(id, xt, Rhs::Mux(neg, flipped, x));
                body.assign(&out, Rhs::Cast(sel));
            } else {
                body.assign(&out, Rhs::Copy(x));
            }
        }
        Op::Add => {
            let xs: Vec<Operand> = ins
                .into_iter()
                .map(|x| body.extend(id, x, t.width))
                .collect();
            let signs: Vec<char> = p
                .signs
                .as_deref()
                .map(|s| s.chars().collect())
                .unwrap_or_default();
            let minus = |k: usize| signs.get(k) == Some(&'-');
            let mut acc = if minus(0) {
                body.temp_assign(id, t, Rhs::Binary(BinOp::Sub, lit(t, 0), xs[0].clone()))
            } else {
                xs[0].clone()
            };
            for k in 1..xs.len() {
                let op = if minus(k) { BinOp::Sub } else { BinOp::Add };
                let rhs = Rhs::Binary(op, acc, xs[k].clone());
                if k + 1 == xs.len() {
                    body.assign(&out, rhs);
                    acc = Operand::net(out.clone());
                } else {
                    acc = body.temp_assign(id, t, rhs);
                }
            }
        }
        Op::Bias => body.assign(&out, Rhs::Binary(BinOp::Add, ins[0].clone(), lit(t, value))),
        Op::Divide => {
            let a = body.extend(id, ins[0].clone(), t.width);
            let d = body.extend(id, ins[1].clone(), t.width);
            body.assign(&out, Rhs::SafeDiv(a, d));
        }
        Op::Gain => {
            if t.is_bool() {
                body.assign(&out, Rhs::Binary(BinOp::And, ins[0].clone(), lit(t, value)));
            } else {
                let wide = HType::new(t.sign, 2 * t.width);
                let prod = body.temp_assign(
                    id,
                    wide,
                    Rhs::Binary(BinOp::Mul, ins[0].clone(), lit(t, value)),
                );
                body.assign(&out, Rhs::Slice(prod, t.width - 1, 0));
            }
        }
        Op::MinMax => {
            let xs: Vec<Operand> = ins
                .into_iter()
                .map(|x| body.extend(id, x, t.width))
                .collect();
            let cmp = match p.minmax.unwrap_or(MinMaxMode::Min) {
                MinMaxMode::Min => CompareOp::Lt,
                MinMaxMode::Max => CompareOp::Gt,
            };
            let mut acc = xs[0].clone();
            for k in 1..xs.len() {
                let better = body.temp_assign(
                    id,
                    HType::BOOL,
                    Rhs::Compare(cmp, xs[k].clone(), acc.clone()),
                );
                let rhs = Rhs::Mux(better, xs[k].clone(), acc);
                if k + 1 == xs.len() {
                    body.assign(&out, rhs);
                    acc = Operand::net(out.clone());
                } else {
                    acc = body.temp_assign(id, t, rhs);
                }
            }
        }
        Op::UnaryMinus => body.assign(&out, Rhs::Unary(UnOp::Neg, ins[0].clone())),
        Op::BitClear => {
            let m = !(1u128 << p.bit.unwrap_or(0));
            body.assign(
                &out,
                Rhs::Binary(BinOp::And, ins[0].clone(), Operand::Lit(Lit::new(t, m))),
            );
        }
        Op::BitSet => {
            let m = 1u128 << p.bit.unwrap_or(0);
            body.assign(
                &out,
                Rhs::Binary(BinOp::Or, ins[0].clone(), Operand::Lit(Lit::new(t, m))),
            );
        }
        Op::Bitwise => {
            let xs: Vec<Operand> = ins
                .into_iter()
                .map(|x| body.extend(id, x, t.width))
                .collect();
            let op = p.bitwise.unwrap_or(BitwiseOp::And);
            let (bin, invert) = match op {
                BitwiseOp::And => (BinOp::And, false),
                BitwiseOp::Or => (BinOp::Or, false),
                BitwiseOp::Xor => (BinOp::Xor, false),
                BitwiseOp::Nand => (BinOp::And, true),
                BitwiseOp::Nor => (BinOp::Or, true),
                BitwiseOp::Xnor => (BinOp::Xor, true),
            };
            let mut acc = xs[0].clone();
            for k in 1..xs.len() {
                let rhs = Rhs::Binary(bin, acc, xs[k].clone());
                if k + 1 == xs.len() && !invert {
                    body.assign(&out, rhs);
                    acc = Operand::net(out.clone());
                } else {
                    acc = body.temp_assign(id, t, rhs);
                }
            }
            if invert {
                body.assign(&out, Rhs::Unary(UnOp::Not, acc));
            }
        }
        Op::BitToInteger => body.assign(&out, Rhs::Concat(ins)),
        Op::CompareToConstant | Op::CompareToZero => {
            let x = ins[0].clone();
            let xt = body.ty(&x);
            let k = if op == Op::CompareToZero { 0 } else { value };
            body.assign(
                &out,
                Rhs::Compare(p.compare.unwrap_or(CompareOp::Eq), x, lit(xt, k)),
            );
        }
        Op::DetectChange | Op::DetectIncrease | Op::DetectDecrease => {
            let x = ins[0].clone();
            let xt = body.ty(&x);
            let prev = body.net(format!("r{id}"), xt);
            body.regs.push(RegUpdate {
                target: prev.clone(),
                reset: reset_name(b.reset_stage()),
                init: 0,
                enable: body.enable(),
                d: x.clone(),
            });
            let cmp = match op {
                Op::DetectChange => CompareOp::Ne,
                Op::DetectIncrease => CompareOp::Gt,
                _ => CompareOp::Lt,
            };
            body.assign(&out, Rhs::Compare(cmp, x, Operand::Net(prev)));
        }
        Op::Delay => body.regs.push(RegUpdate {
            target: out,
            reset: reset_name(b.reset_stage()),
            init: 0,
            enable: body.enable(),
            d: ins[0].clone(),
        }),
        Op::If => {
            let a = body.extend(id, ins[1].clone(), t.width);
            let e = body.extend(id, ins[2].clone(), t.width);
            body.items.push(Item::Comb(Comb {
                target: out,
                cond: ins[0].clone(),
                then: a,
                els: e,
                span: Span::default(),
            }));
        }
        Op::IfAction | Op::ModelRef => unreachable!("composites lowered by the caller"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_is_legal_everywhere() {
        assert_eq!(sanitize("top"), "top");
        assert_eq!(sanitize("My Model!"), "my_model");
        assert_eq!(sanitize("__x__y"), "x_y");
        assert_eq!(sanitize("9lives"), "m9lives");
        assert_eq!(sanitize("entity"), "entity_m");
        assert_eq!(sanitize(""), "m");
    }

    #[test]
    fn signedness_of_bool_lit() {
        let l = Lit::new(HType::BOOL, 3);
        assert_eq!(l.bits, 1);
        assert_eq!(HType::BOOL.sign, crate::types::Signedness::Boolean);
    }
}
