// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{resolve_in, BlockId, BlockInstance, ModelGraph, PortRef};
use crate::catalog::{BlockCatalog, BlockKind, Op, PortConstraint};
use crate::types::SignalType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    TypeDomain,
    RateMismatch,
    CombinationalLoop,
    UndrivenPort,
    RecursiveReference,
    /// Malformed records: unknown kinds, dangling or doubled connections,
    /// missing bodies, bad boundary indices.
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Hierarchical location, e.g. `top/sub7` or `top/ref:m2`.
    pub scope: String,
    pub ids: Vec<BlockId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at {} {:?}: {}",
            self.rule, self.scope, self.ids, self.detail
        )
    }
}

/// Checks every structural, type, rate, loop and reference rule. An empty
/// result means the model is well formed.
pub fn validate(m: &ModelGraph, catalog: &BlockCatalog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut scopes = Vec::new();
    check_graph(m, catalog, &mut scopes, "top".to_string(), &mut out);
    let mut done = HashSet::new();
    let mut stack = Vec::new();
    reference_cycles(m, &[], &mut stack, &mut done, "top", &mut out);
    out
}

struct Ctx<'a> {
    out: &'a mut Vec<Violation>,
    scope: &'a str,
}

impl Ctx<'_> {
    fn push(&mut self, rule: Rule, ids: Vec<BlockId>, detail: impl Into<String>) {
        self.out.push(Violation {
            rule,
            scope: self.scope.to_string(),
            ids,
            detail: detail.into(),
        });
    }
}

fn check_graph<'a>(
    g: &'a ModelGraph,
    catalog: &BlockCatalog,
    scopes: &mut Vec<&'a ModelGraph>,
    scope: String,
    out: &mut Vec<Violation>,
) {
    {
        let mut cx = Ctx { out, scope: &scope };
        check_blocks(g, catalog, scopes, &mut cx);
    }
    scopes.push(g);
    for s in &g.subsystems {
        check_graph(
            &s.graph,
            catalog,
            scopes,
            format!("{scope}/sub{}", s.block),
            out,
        );
    }
    for r in &g.references {
        check_graph(
            &r.graph,
            catalog,
            scopes,
            format!("{scope}/ref:{}", r.name),
            out,
        );
    }
    scopes.pop();
}

fn check_blocks(g: &ModelGraph, catalog: &BlockCatalog, scopes: &[&ModelGraph], cx: &mut Ctx<'_>) {
    let mut kinds: HashMap<BlockId, &BlockKind> = HashMap::new();
    let mut seen_ids = BTreeSet::new();
    for b in &g.blocks {
        if !seen_ids.insert(b.id) {
            cx.push(Rule::Structure, vec![b.id], "duplicate block id");
        }
        match catalog.lookup_kind(&b.kind) {
            Ok(k) => {
                kinds.insert(b.id, k);
            }
            Err(e) => cx.push(Rule::Structure, vec![b.id], e.to_string()),
        }
        if let Err(e) = b.output_type.check() {
            cx.push(Rule::TypeDomain, vec![b.id], e.to_string());
        }
    }

    // Arity per block; composite arity depends on the body.
    let mut arity: HashMap<BlockId, u32> = HashMap::new();
    let mut bodies: HashMap<BlockId, &ModelGraph> = HashMap::new();
    for b in &g.blocks {
        let Some(kind) = kinds.get(&b.id) else {
            continue;
        };
        if kind.op.is_composite() {
            let body = match kind.op {
                Op::IfAction => g.subsystem(b.id),
                _ => b
                    .params
                    .model
                    .as_deref()
                    .and_then(|n| resolve_in(g, scopes, n)),
            };
            match body {
                Some(body) => {
                    bodies.insert(b.id, body);
                }
                None => {
                    cx.push(Rule::Structure, vec![b.id], "composite block has no body");
                    continue;
                }
            }
        }
        arity.insert(b.id, g.arity_of(b, kind, scopes));
    }
    for s in &g.subsystems {
        let owner_ok = g
            .block(s.block)
            .map(|b| b.kind == "If Action Subsystem")
            .unwrap_or(false);
        if !owner_ok {
            cx.push(
                Rule::Structure,
                vec![s.block],
                "subsystem without an If Action owner",
            );
        }
    }

    // Connections.
    let mut drivers: BTreeMap<PortRef, PortRef> = BTreeMap::new();
    let mut good_edges = Vec::new();
    for c in &g.connections {
        let (Some(src), Some(dst)) = (g.block(c.src.block), g.block(c.dst.block)) else {
            cx.push(
                Rule::Structure,
                vec![c.src.block, c.dst.block],
                "connection to a missing block",
            );
            continue;
        };
        let src_ok = kinds
            .get(&src.id)
            .map(|k| k.has_output() && c.src.port < k.outputs)
            .unwrap_or(false);
        let dst_ok = arity.get(&dst.id).map(|&a| c.dst.port < a).unwrap_or(false);
        if !src_ok || !dst_ok {
            cx.push(
                Rule::Structure,
                vec![src.id, dst.id],
                format!("bad port in {} -> {}", c.src, c.dst),
            );
            continue;
        }
        if drivers.insert(c.dst, c.src).is_some() {
            cx.push(
                Rule::Structure,
                vec![dst.id],
                format!("input {} has several drivers", c.dst),
            );
            continue;
        }
        good_edges.push(*c);
        if src.sample_period != dst.sample_period {
            cx.push(
                Rule::RateMismatch,
                vec![src.id, dst.id],
                format!(
                    "period {} feeds period {}",
                    src.sample_period, dst.sample_period
                ),
            );
        }
    }

    // Boundary indices.
    let mut in_ports = BTreeMap::new();
    let mut out_ports = BTreeMap::new();
    for b in &g.blocks {
        let Some(kind) = kinds.get(&b.id) else {
            continue;
        };
        let table = match kind.op {
            Op::Inport | Op::StimulusSource => &mut in_ports,
            Op::Outport => &mut out_ports,
            _ => continue,
        };
        match b.params.port {
            Some(p) => {
                if let Some(other) = table.insert(p, b.id) {
                    cx.push(
                        Rule::Structure,
                        vec![other, b.id],
                        format!("boundary index {p} reused"),
                    );
                }
            }
            None => cx.push(
                Rule::Structure,
                vec![b.id],
                "boundary block without a port index",
            ),
        }
    }
    for (table, what) in [(&in_ports, "input"), (&out_ports, "output")] {
        if table.keys().enumerate().any(|(i, &p)| i as u32 != p) {
            cx.push(
                Rule::Structure,
                table.values().copied().collect(),
                format!("{what} indices are not dense"),
            );
        }
    }

    // Types and parameters.
    for b in &g.blocks {
        let (Some(kind), Some(&n)) = (kinds.get(&b.id), arity.get(&b.id)) else {
            continue;
        };
        let mut input_types = Vec::with_capacity(n as usize);
        let mut undriven = false;
        for port in 0..n {
            match drivers.get(&PortRef::new(b.id, port)) {
                Some(src) => input_types.push(g.block(src.block).expect("checked").output_type),
                None => undriven = true,
            }
        }
        if undriven {
            cx.push(
                Rule::UndrivenPort,
                vec![b.id],
                format!("{} has an undriven input", b.kind),
            );
            continue;
        }
        if let Some(reason) = check_params(b, kind, &input_types) {
            cx.push(Rule::TypeDomain, vec![b.id], reason);
        }
        if kind.op.is_source() {
            continue;
        }
        if let Some(body) = bodies.get(&b.id) {
            check_composite(b, kind, body, &input_types, catalog, cx);
            continue;
        }
        match kind.infer_output_type(&input_types) {
            Ok(t) if t == b.output_type => {}
            Ok(t) => cx.push(
                Rule::TypeDomain,
                vec![b.id],
                format!("{} declares {} but inputs give {t}", b.kind, b.output_type),
            ),
            Err(e) => cx.push(Rule::TypeDomain, vec![b.id], e.to_string()),
        }
    }

    // Combinational loops.
    for scc in combinational_sccs(g, &kinds, &good_edges) {
        cx.push(Rule::CombinationalLoop, scc, "cycle without a register");
    }

    // Every Outport must be fed from a source.
    let sources: Vec<BlockId> = g
        .blocks
        .iter()
        .filter(|b| kinds.get(&b.id).map(|k| k.is_source()).unwrap_or(false))
        .map(|b| b.id)
        .collect();
    let mut reached: HashSet<BlockId> = HashSet::new();
    let mut queue: VecDeque<BlockId> = sources.into_iter().collect();
    while let Some(id) = queue.pop_front() {
        if !reached.insert(id) {
            continue;
        }
        for e in &good_edges {
            if e.src.block == id {
                queue.push_back(e.dst.block);
            }
        }
    }
    for b in &g.blocks {
        if b.kind == "Outport" && !reached.contains(&b.id) {
            cx.push(
                Rule::UndrivenPort,
                vec![b.id],
                "outport not reachable from any source",
            );
        }
    }
}

fn check_composite(
    b: &BlockInstance,
    kind: &BlockKind,
    body: &ModelGraph,
    inputs: &[SignalType],
    catalog: &BlockCatalog,
    cx: &mut Ctx<'_>,
) {
    let Some(iface) = body.interface(catalog) else {
        cx.push(
            Rule::Structure,
            vec![b.id],
            "body must have exactly one outport",
        );
        return;
    };
    let leading = match kind.arity {
        crate::catalog::Arity::Composite { leading } => leading as usize,
        _ => 0,
    };
    for (i, ty) in inputs.iter().take(leading).enumerate() {
        let spec = kind.input_spec(i as u32).expect("leading ports exist");
        if !spec.constraint.admits(*ty) {
            cx.push(
                Rule::TypeDomain,
                vec![b.id],
                format!("{} input {i} rejects {ty}", b.kind),
            );
        }
    }
    if inputs[leading..] != iface.inputs[..] {
        cx.push(
            Rule::TypeDomain,
            vec![b.id],
            format!("{} inputs do not match its body's inports", b.kind),
        );
    }
    if b.output_type != iface.output {
        cx.push(
            Rule::TypeDomain,
            vec![b.id],
            format!(
                "{} declares {} but its body yields {}",
                b.kind, b.output_type, iface.output
            ),
        );
    }
    for port in body.inports(catalog) {
        if port.sample_period != b.sample_period {
            cx.push(
                Rule::RateMismatch,
                vec![b.id],
                format!("body inport {} runs at another rate", port.id),
            );
        }
    }
}

fn check_params(b: &BlockInstance, kind: &BlockKind, inputs: &[SignalType]) -> Option<String> {
    let p = &b.params;
    let out = b.output_type;
    let need_value = |ty: SignalType| match p.value {
        None => Some("missing value".to_string()),
        Some(v) if !ty.contains(v) => Some(format!("value {v} not representable in {ty}")),
        _ => None,
    };
    match kind.op {
        Op::Constant | Op::Bias | Op::Gain => need_value(out),
        Op::CompareToConstant => {
            if p.compare.is_none() {
                return Some("missing comparison".into());
            }
            need_value(inputs[0])
        }
        Op::CompareToZero => p.compare.is_none().then(|| "missing comparison".into()),
        Op::BitClear | Op::BitSet => match p.bit {
            Some(bit) if bit < out.width() => None,
            Some(bit) => Some(format!("bit {bit} outside {out}")),
            None => Some("missing bit index".into()),
        },
        Op::Bitwise => p
            .bitwise
            .is_none()
            .then(|| "missing bitwise operator".into()),
        Op::MinMax => p.minmax.is_none().then(|| "missing min/max mode".into()),
        Op::Add => match &p.signs {
            Some(s) if s.len() != inputs.len() || s.chars().any(|c| c != '+' && c != '-') => {
                Some(format!("signs `{s}` do not match {} inputs", inputs.len()))
            }
            _ => None,
        },
        Op::ModelRef => p.model.is_none().then(|| "missing model name".into()),
        Op::If => {
            (!PortConstraint::Boolean.admits(inputs[0])).then(|| "condition must be boolean".into())
        }
        _ => None,
    }
}

fn combinational_sccs(
    g: &ModelGraph,
    kinds: &HashMap<BlockId, &BlockKind>,
    edges: &[super::Connection],
) -> Vec<Vec<BlockId>> {
    let ids: Vec<BlockId> = g.blocks.iter().map(|b| b.id).collect();
    let pos: HashMap<BlockId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    let mut self_loop = vec![false; ids.len()];
    for e in edges {
        if kinds
            .get(&e.src.block)
            .map(|k| k.breaks_path)
            .unwrap_or(false)
        {
            continue;
        }
        let (s, d) = (pos[&e.src.block], pos[&e.dst.block]);
        adj[s].push(d);
        if s == d {
            self_loop[s] = true;
        }
    }
    let mut sccs = Vec::new();
    for comp in tarjan(&adj) {
        if comp.len() > 1 || self_loop[comp[0]] {
            let mut v: Vec<BlockId> = comp.iter().map(|&i| ids[i]).collect();
            v.sort();
            sccs.push(v);
        }
    }
    sccs.sort();
    sccs
}

/// Iterative Tarjan strongly-connected components.
pub(crate) fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 && index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn reference_cycles<'a>(
    g: &'a ModelGraph,
    scopes: &[&'a ModelGraph],
    stack: &mut Vec<*const ModelGraph>,
    done: &mut HashSet<*const ModelGraph>,
    scope: &str,
    out: &mut Vec<Violation>,
) {
    // Model blocks in this graph and its subsystems, with the scope chain
    // each one resolves against.
    let mut sites: Vec<(&'a ModelGraph, Vec<&'a ModelGraph>)> = vec![(g, scopes.to_vec())];
    let mut i = 0;
    while i < sites.len() {
        let (graph, chain) = sites[i].clone();
        for s in &graph.subsystems {
            let mut c = chain.clone();
            c.push(graph);
            sites.push((&s.graph, c));
        }
        i += 1;
    }
    for (graph, chain) in &sites {
        for b in &graph.blocks {
            if b.kind != "Model" {
                continue;
            }
            let Some(name) = b.params.model.as_deref() else {
                continue;
            };
            let Some((target, target_chain)) = resolve_with_chain(graph, chain, name) else {
                continue;
            };
            let ptr = target as *const ModelGraph;
            if stack.contains(&ptr) {
                out.push(Violation {
                    rule: Rule::RecursiveReference,
                    scope: scope.to_string(),
                    ids: vec![b.id],
                    detail: format!("model `{name}` references itself"),
                });
                continue;
            }
            if done.contains(&ptr) {
                continue;
            }
            stack.push(ptr);
            reference_cycles(target, &target_chain, stack, done, scope, out);
            stack.pop();
            done.insert(ptr);
        }
    }
    // Definitions that are never instantiated still have to be acyclic.
    for r in &g.references {
        let ptr = &r.graph as *const ModelGraph;
        if done.contains(&ptr) || stack.contains(&ptr) {
            continue;
        }
        let mut chain = scopes.to_vec();
        chain.push(g);
        stack.push(ptr);
        reference_cycles(&r.graph, &chain, stack, done, scope, out);
        stack.pop();
        done.insert(ptr);
    }
}

pub(crate) fn resolve_with_chain<'a>(
    g: &'a ModelGraph,
    chain: &[&'a ModelGraph],
    name: &str,
) -> Option<(&'a ModelGraph, Vec<&'a ModelGraph>)> {
    if let Some(t) = g.reference(name) {
        let mut c = chain.to_vec();
        c.push(g);
        return Some((t, c));
    }
    for (i, s) in chain.iter().enumerate().rev() {
        if let Some(t) = s.reference(name) {
            return Some((t, chain[..=i].to_vec()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockInstance, Reference, Subsystem};

    fn cat() -> BlockCatalog {
        BlockCatalog::standard()
    }

    fn rules(v: &[Violation]) -> Vec<Rule> {
        v.iter().map(|x| x.rule).collect()
    }

    fn inport(id_ty: SignalType, port: u32) -> BlockInstance {
        let mut b = BlockInstance::new(0, "Inport", id_ty);
        b.params.port = Some(port);
        b
    }

    fn outport(ty: SignalType, port: u32) -> BlockInstance {
        let mut b = BlockInstance::new(0, "Outport", ty);
        b.params.port = Some(port);
        b
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate(&ModelGraph::new("top"), &cat()).is_empty());
    }

    #[test]
    fn self_loop_on_add_is_a_combinational_loop() {
        let u = SignalType::ufix(8);
        let mut g = ModelGraph::new("top");
        let a = g.push_block(inport(u, 0));
        let mut add = BlockInstance::new(0, "Add", SignalType::ufix(9));
        add.params.inputs = Some(2);
        let s = g.push_block(add);
        g.connect(PortRef::out(a), PortRef::new(s, 0));
        g.connect(PortRef::out(s), PortRef::new(s, 1));
        let v = validate(&g, &cat());
        assert!(rules(&v).contains(&Rule::CombinationalLoop), "{v:?}");
    }

    #[test]
    fn loop_through_delay_is_allowed() {
        let u = SignalType::ufix(8);
        let mut g = ModelGraph::new("top");
        let a = g.push_block(inport(u, 0));
        let mut bw = BlockInstance::new(0, "Bitwise Operator", u);
        bw.params.inputs = Some(2);
        bw.params.bitwise = Some(crate::model::BitwiseOp::Xor);
        let x = g.push_block(bw);
        let d = g.push_block(BlockInstance::new(0, "Delay", u));
        let o = g.push_block(outport(u, 0));
        g.connect(PortRef::out(a), PortRef::new(x, 0));
        g.connect(PortRef::out(d), PortRef::new(x, 1));
        g.connect(PortRef::out(x), PortRef::new(d, 0));
        g.connect(PortRef::out(x), PortRef::new(o, 0));
        assert_eq!(validate(&g, &cat()), vec![]);
    }

    #[test]
    fn undriven_and_rate_and_type_rules() {
        let u = SignalType::ufix(8);
        let mut g = ModelGraph::new("top");
        let a = g.push_block(inport(u, 0));
        let mut gain = BlockInstance::new(0, "Gain", u);
        gain.params.value = Some(3);
        gain.sample_period = crate::types::SamplePeriod::ticks(2);
        let k = g.push_block(gain);
        let o = g.push_block(outport(SignalType::ufix(4), 0));
        g.connect(PortRef::out(a), PortRef::new(k, 0));
        g.connect(PortRef::out(k), PortRef::new(o, 0));
        let v = validate(&g, &cat());
        let r = rules(&v);
        assert!(r.contains(&Rule::RateMismatch));
        assert!(r.contains(&Rule::TypeDomain));
        let mut h = ModelGraph::new("top");
        h.push_block(outport(u, 0));
        let r = rules(&validate(&h, &cat()));
        assert!(r.contains(&Rule::UndrivenPort));
    }

    #[test]
    fn recursive_reference_is_detected() {
        let u = SignalType::ufix(8);
        let mut body = ModelGraph::new("m");
        let i = body.push_block(inport(u, 0));
        let mut mb = BlockInstance::new(0, "Model", u);
        mb.params.model = Some("m".into());
        let m = body.push_block(mb);
        let o = body.push_block(outport(u, 0));
        body.connect(PortRef::out(i), PortRef::new(m, 0));
        body.connect(PortRef::out(m), PortRef::new(o, 0));
        let mut top = ModelGraph::new("top");
        let i = top.push_block(inport(u, 0));
        let mut mb = BlockInstance::new(0, "Model", u);
        mb.params.model = Some("m".into());
        let m = top.push_block(mb);
        let o = top.push_block(outport(u, 0));
        top.connect(PortRef::out(i), PortRef::new(m, 0));
        top.connect(PortRef::out(m), PortRef::new(o, 0));
        top.references.push(Reference {
            name: "m".into(),
            graph: body,
        });
        let v = validate(&top, &cat());
        assert!(rules(&v).contains(&Rule::RecursiveReference), "{v:?}");
    }

    #[test]
    fn subsystem_interface_is_checked() {
        let u = SignalType::ufix(8);
        let mut body = ModelGraph::new("s");
        let i = body.push_block(inport(u, 0));
        let o = body.push_block(outport(u, 0));
        body.connect(PortRef::out(i), PortRef::new(o, 0));
        let mut top = ModelGraph::new("top");
        let c = top.push_block(inport(SignalType::boolean(), 0));
        let d = top.push_block(inport(u, 1));
        let s = top.push_block(BlockInstance::new(0, "If Action Subsystem", u));
        let o = top.push_block(outport(u, 0));
        top.connect(PortRef::out(c), PortRef::new(s, 0));
        top.connect(PortRef::out(d), PortRef::new(s, 1));
        top.connect(PortRef::out(s), PortRef::new(o, 0));
        top.subsystems.push(Subsystem {
            block: s,
            graph: body,
        });
        assert_eq!(validate(&top, &cat()), vec![]);
        top.block_mut(d).unwrap().output_type = SignalType::ufix(4);
        let v = validate(&top, &cat());
        assert!(rules(&v).contains(&Rule::TypeDomain));
    }

    #[test]
    fn tarjan_finds_components() {
        let adj = vec![vec![1], vec![2], vec![0], vec![3], vec![]];
        let mut comps: Vec<Vec<usize>> = tarjan(&adj)
            .into_iter()
            .map(|mut c| {
                c.sort();
                c
            })
            .collect();
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3], vec![4]]);
    }
}
