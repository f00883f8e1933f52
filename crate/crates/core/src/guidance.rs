// SPDX-License-Identifier: Apache-2.0

//! Def/use, control and resource facts over emitted HDL, and the choice of
//! the next insertion point.
//!
//! Nodes are numbered in textual order per module, preceded by a node that
//! defines the module inputs and one that defines every register, so a
//! register read before its clocked process still has an earlier def.
//! Net names in the relations are qualified as `module.net`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{BlockCatalog, Op};
use crate::error::GuidanceError;
use crate::hdl::{Dir, HdlAst, HdlDesign, Item, Operand, Span};
use crate::model::{ModelGraph, PortRef, Site};
use crate::rng::FuzzRng;
use crate::types::{SamplePeriod, SignalType, Signedness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// Defines the module's input ports.
    Ports,
    /// Defines every register of the module.
    State,
    Assign,
    /// If/else selection of a combinational process.
    Select,
    /// One branch assignment inside a process.
    Branch,
    /// Clocked process as a whole.
    Clocked,
    /// Reset/enable test of one register.
    RegisterIf,
    Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactNode {
    pub module: String,
    pub kind: NodeKind,
    pub span: Span,
}

/// Relations over AST nodes. Node ids are indices into `nodes`, which is
/// also the evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefUseFacts {
    pub nodes: Vec<FactNode>,
    pub defs: BTreeSet<(usize, String)>,
    pub uses: BTreeSet<(usize, String)>,
    pub controls: BTreeSet<(usize, usize)>,
    pub resources: BTreeSet<(usize, String)>,
}

fn q(module: &str, net: &str) -> String {
    format!("{module}.{net}")
}

struct Builder<'a> {
    f: &'a mut DefUseFacts,
    module: String,
}

impl Builder<'_> {
    fn node(&mut self, kind: NodeKind, span: Span) -> usize {
        self.f.nodes.push(FactNode {
            module: self.module.clone(),
            kind,
            span,
        });
        self.f.nodes.len() - 1
    }

    fn def(&mut self, n: usize, net: &str) {
        self.f.defs.insert((n, q(&self.module, net)));
    }

    fn use_op(&mut self, n: usize, o: &Operand) {
        if let Some(net) = o.as_net() {
            self.f.uses.insert((n, q(&self.module, net)));
        }
    }

    fn resource(&mut self, n: usize, o: &Operand) {
        if let Some(net) = o.as_net() {
            self.f.resources.insert((n, q(&self.module, net)));
        }
    }
}

pub fn extract_facts(ast: &HdlAst) -> Result<DefUseFacts, GuidanceError> {
    let mut f = DefUseFacts::default();
    for m in &ast.modules {
        let mut b = Builder {
            f: &mut f,
            module: m.name.clone(),
        };
        let ports = b.node(NodeKind::Ports, m.span);
        for p in m.ports.iter().filter(|p| p.dir == Dir::In) {
            b.def(ports, &p.name);
        }
        let state = b.node(NodeKind::State, m.span);
        for t in m.process_targets() {
            let is_reg = m
                .items
                .iter()
                .any(|it| matches!(it, Item::Clocked(c) if c.regs.iter().any(|r| r.target == t)));
            if is_reg {
                b.def(state, t);
            }
        }
        for item in &m.items {
            match item {
                Item::Assign(a) => {
                    let n = b.node(NodeKind::Assign, a.span);
                    b.def(n, &a.target);
                    for o in a.rhs.operands() {
                        b.use_op(n, o);
                    }
                }
                Item::Comb(c) => {
                    let sel = b.node(NodeKind::Select, c.span);
                    b.use_op(sel, &c.cond);
                    for o in [&c.cond, &c.then, &c.els] {
                        b.resource(sel, o);
                    }
                    for o in [&c.then, &c.els] {
                        let br = b.node(NodeKind::Branch, c.span);
                        b.def(br, &c.target);
                        b.use_op(br, o);
                        b.f.controls.insert((sel, br));
                    }
                }
                Item::Clocked(c) => {
                    let clk = b.node(NodeKind::Clocked, c.span);
                    b.f.uses.insert((clk, q(&m.name, "clk")));
                    for r in &c.regs {
                        let reset = Operand::net(r.reset.clone());
                        b.resource(clk, &reset);
                        b.resource(clk, &r.d);
                        let test = b.node(NodeKind::RegisterIf, c.span);
                        b.use_op(test, &reset);
                        if let Some(e) = &r.enable {
                            b.use_op(test, e);
                            b.resource(clk, e);
                        }
                        b.f.controls.insert((clk, test));
                        let init = b.node(NodeKind::Branch, c.span);
                        b.def(init, &r.target);
                        let load = b.node(NodeKind::Branch, c.span);
                        b.def(load, &r.target);
                        b.use_op(load, &r.d);
                        b.f.controls.insert((test, init));
                        b.f.controls.insert((test, load));
                    }
                }
                Item::Instance(i) => {
                    let n = b.node(NodeKind::Instance, i.span);
                    let child = ast.module(&i.module).ok_or_else(|| {
                        GuidanceError::FactExtraction(format!("unknown module `{}`", i.module))
                    })?;
                    for (port, actual) in &i.conns {
                        let dir = child
                            .ports
                            .iter()
                            .find(|p| p.name == *port)
                            .map(|p| p.dir)
                            .ok_or_else(|| {
                                GuidanceError::FactExtraction(format!("unknown port `{port}`"))
                            })?;
                        match (dir, actual) {
                            (Dir::Out, Operand::Net(net)) => b.def(n, net),
                            (Dir::Out, Operand::Lit(_)) => {
                                return Err(GuidanceError::FactExtraction(
                                    "literal bound to an output".into(),
                                ))
                            }
                            (Dir::In, o) => {
                                b.use_op(n, o);
                                b.resource(n, o);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(f)
}

impl DefUseFacts {
    /// Uses with no def earlier in node order.
    pub fn use_before_def(&self) -> Vec<(usize, String)> {
        let mut first_def: BTreeMap<&str, usize> = BTreeMap::new();
        for (n, x) in &self.defs {
            let e = first_def.entry(x.as_str()).or_insert(*n);
            *e = (*e).min(*n);
        }
        self.uses
            .iter()
            .filter(|(m, x)| first_def.get(x.as_str()).is_none_or(|n| n >= m))
            .cloned()
            .collect()
    }

    /// Nodes that define `net` (qualified).
    pub fn defs_of(&self, net: &str) -> Vec<usize> {
        self.defs
            .iter()
            .filter(|(_, x)| x == net)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn controllers_of(&self, node: usize) -> Vec<usize> {
        self.controls
            .iter()
            .filter(|(_, m)| *m == node)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn controlled_count(&self, node: usize) -> usize {
        self.controls.iter().filter(|(n, _)| *n == node).count()
    }

    /// Every def of `net` is either uncontrolled or controlled by a node
    /// with a single controlled exit.
    pub fn single_exit(&self, net: &str) -> bool {
        self.defs_of(net).into_iter().all(|d| {
            self.controllers_of(d)
                .into_iter()
                .all(|c| self.controlled_count(c) <= 1)
        })
    }

    /// Distinct concurrent nodes claiming `net` as a resource.
    pub fn claimants(&self, net: &str) -> usize {
        self.resources.iter().filter(|(_, x)| x == net).count()
    }

    /// Relation tuples as text, one per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {i} {} {:?} {}", n.module, n.kind, n.span);
        }
        for (n, x) in &self.defs {
            let _ = writeln!(s, "def {n} {x}");
        }
        for (n, x) in &self.uses {
            let _ = writeln!(s, "use {n} {x}");
        }
        for (n, m) in &self.controls {
            let _ = writeln!(s, "control {n} {m}");
        }
        for (n, x) in &self.resources {
            let _ = writeln!(s, "resource {n} {x}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionPoint {
    /// Net name in the top module.
    pub net: String,
    /// Span of the statement defining the net.
    pub span: Span,
    #[serde(skip)]
    pub site: Option<Site>,
    pub ty: SignalType,
    pub admissible_types: Vec<SignalType>,
    pub required_period: SamplePeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintInfo {
    pub net: String,
    pub span: Span,
    #[serde(skip)]
    pub site: Option<Site>,
    /// Kind of the block currently driving the net.
    pub driver_kind: String,
    pub ty: SignalType,
    pub admissible_types: Vec<SignalType>,
    pub required_period: SamplePeriod,
    pub forbidden_kinds: BTreeSet<String>,
}

/// Every SignalType the catalog can express.
pub fn all_types() -> Vec<SignalType> {
    let mut v = vec![SignalType::boolean()];
    for w in 1..=crate::types::MAX_WORD_LENGTH {
        v.push(SignalType::ufix(w));
    }
    for w in 2..=crate::types::MAX_WORD_LENGTH {
        v.push(SignalType::sfix(w));
    }
    v
}

/// Types a new driver of the net may produce: same-class widenings that
/// every direct consumer still accepts.
pub fn admissible_types(m: &ModelGraph, net: PortRef, catalog: &BlockCatalog) -> Vec<SignalType> {
    let Some(driver) = m.block(net.block) else {
        return Vec::new();
    };
    let ty = driver.output_type;
    let consumers = m.consumers(net);
    let pool = all_types()
        .into_iter()
        .filter(|t| t.signedness == ty.signedness && t.word_length >= ty.word_length);
    pool.into_iter()
        .filter(|cand| {
            consumers.iter().all(|c| {
                let Some(b) = m.block(c.block) else {
                    return false;
                };
                let Ok(kind) = catalog.lookup_kind(&b.kind) else {
                    return false;
                };
                match kind.op {
                    Op::Outport => true,
                    Op::IfAction | Op::ModelRef => *cand == ty,
                    _ => {
                        let arity = m.arity_of(b, kind, &[]);
                        let types: Option<Vec<SignalType>> = m
                            .input_drivers(b.id, arity)
                            .into_iter()
                            .enumerate()
                            .map(|(k, d)| {
                                if k as u32 == c.port {
                                    Some(*cand)
                                } else {
                                    d.and_then(|p| m.block(p.block)).map(|s| s.output_type)
                                }
                            })
                            .collect();
                        types.is_some_and(|t| kind.infer_output_type(&t).is_ok())
                    }
                }
            })
        })
        .collect()
}

/// Top-level nets where a new block may be spliced without breaking
/// use-after-def, adding a second controlled exit, or contending for a
/// resource already claimed by two concurrent nodes.
pub fn candidate_points(
    facts: &DefUseFacts,
    design: &HdlDesign,
    m: &ModelGraph,
    catalog: &BlockCatalog,
) -> Vec<InsertionPoint> {
    let top = &design.top;
    let mut out = Vec::new();
    let bad_uses: BTreeSet<String> = facts.use_before_def().into_iter().map(|(_, x)| x).collect();
    for (net, &block) in &design.net_map {
        let qn = q(top, net);
        if bad_uses.contains(&qn) || !facts.single_exit(&qn) || facts.claimants(&qn) >= 2 {
            continue;
        }
        let Some(b) = m.block(block) else { continue };
        let span = facts
            .defs_of(&qn)
            .first()
            .map(|&n| facts.nodes[n].span)
            .unwrap_or_default();
        let port = PortRef::out(block);
        out.push(InsertionPoint {
            net: net.clone(),
            span,
            site: Some(Site::top(port)),
            ty: b.output_type,
            admissible_types: admissible_types(m, port, catalog),
            required_period: b.sample_period,
        });
    }
    out
}

/// Picks one point uniformly and packages it for kind selection.
pub fn next_constraint(
    points: &[InsertionPoint],
    m: &ModelGraph,
    catalog: &BlockCatalog,
    rng: &mut FuzzRng,
) -> Result<ConstraintInfo, GuidanceError> {
    if points.is_empty() {
        return Err(GuidanceError::NoInsertionPoint);
    }
    let p = &points[rng.gen_range(0..points.len())];
    let driver_kind = p
        .site
        .as_ref()
        .and_then(|s| m.block(s.net.block))
        .map(|b| b.kind.clone())
        .unwrap_or_default();
    let mut forbidden: BTreeSet<String> = catalog
        .kinds()
        .iter()
        .filter(|k| k.op.is_source() || k.op == Op::Outport)
        .map(|k| k.name.to_string())
        .collect();
    forbidden.insert("Outport".into());
    let mut admissible = p.admissible_types.clone();
    if admissible.is_empty() {
        admissible.push(p.ty);
    }
    Ok(ConstraintInfo {
        net: p.net.clone(),
        span: p.span,
        site: p.site.clone(),
        driver_kind,
        ty: p.ty,
        admissible_types: admissible,
        required_period: p.required_period,
        forbidden_kinds: forbidden,
    })
}

/// Emits `m`, extracts facts and draws the next constraint.
pub fn guide(
    m: &ModelGraph,
    catalog: &BlockCatalog,
    rng: &mut FuzzRng,
) -> Result<ConstraintInfo, GuidanceError> {
    let design = crate::hdl::emit(m, crate::hdl::Dialect::Verilog, catalog)?;
    let facts = extract_facts(&design.ast)?;
    let points = candidate_points(&facts, &design, m, catalog);
    next_constraint(&points, m, catalog, rng)
}

/// Widening fallback: any unsigned type at least as wide as `ty`.
pub fn widen_to_unsigned(ty: SignalType) -> Vec<SignalType> {
    let from = if ty.signedness == Signedness::Boolean {
        1
    } else {
        ty.word_length
    };
    (from..=crate::types::MAX_WORD_LENGTH)
        .map(SignalType::ufix)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdl::{emit, Dialect};
    use crate::model::BlockInstance;
    use crate::rng;

    fn two_inputs_add() -> ModelGraph {
        let mut g = ModelGraph::new("top");
        let mut a = BlockInstance::new(0, "Inport", SignalType::ufix(10));
        a.params.port = Some(0);
        let a = g.push_block(a);
        let mut b = BlockInstance::new(0, "Inport", SignalType::ufix(4));
        b.params.port = Some(1);
        let b = g.push_block(b);
        let mut add = BlockInstance::new(0, "Add", SignalType::ufix(11));
        add.params.inputs = Some(2);
        let add = g.push_block(add);
        let mut o = BlockInstance::new(0, "Outport", SignalType::ufix(11));
        o.params.port = Some(0);
        let o = g.push_block(o);
        g.connect(PortRef::out(a), PortRef::new(add, 0));
        g.connect(PortRef::out(b), PortRef::new(add, 1));
        g.connect(PortRef::out(add), PortRef::new(o, 0));
        g
    }

    #[test]
    fn assign_defs_and_uses() {
        let cat = BlockCatalog::standard();
        let d = emit(&two_inputs_add(), Dialect::Verilog, &cat).unwrap();
        let f = extract_facts(&d.ast).unwrap();
        let add_node = f.defs.iter().find(|(_, x)| x == "top.n2").unwrap().0;
        assert!(f.uses.contains(&(add_node, "top.t2_0".into())));
        assert!(f.use_before_def().is_empty());
    }

    #[test]
    fn straight_line_nets_are_all_candidates() {
        let cat = BlockCatalog::standard();
        let m = two_inputs_add();
        let d = emit(&m, Dialect::Verilog, &cat).unwrap();
        let f = extract_facts(&d.ast).unwrap();
        let pts = candidate_points(&f, &d, &m, &cat);
        let nets: Vec<&str> = pts.iter().map(|p| p.net.as_str()).collect();
        assert_eq!(nets, vec!["in0", "in1", "n2"]);
    }

    #[test]
    fn widths_beyond_the_add_operand() {
        let cat = BlockCatalog::standard();
        let m = two_inputs_add();
        let t = admissible_types(&m, PortRef::out(0), &cat);
        assert!(t
            .iter()
            .all(|t| t.word_length >= 10 && t.signedness == Signedness::Unsigned));
        assert!(t.contains(&SignalType::ufix(20)));
    }

    #[test]
    fn empty_points_fail() {
        let cat = BlockCatalog::standard();
        let mut r = rng::seeded(1);
        let e = next_constraint(&[], &two_inputs_add(), &cat, &mut r).unwrap_err();
        assert_eq!(e, GuidanceError::NoInsertionPoint);
    }
}
