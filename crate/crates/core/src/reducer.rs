// SPDX-License-Identifier: Apache-2.0

//! Trigger minimization over the model graph. Candidates are produced by
//! deleting elements with splice repair, validated, and handed to a
//! predicate; delta debugging runs over references, then subsystems, then
//! blocks, and a final sweep certifies 1-minimality.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::catalog::{BlockCatalog, Op};
use crate::error::ReduceError;
use crate::hdl::{emit, Dialect, HdlDesign};
use crate::model::{
    validate, BlockId, BlockInstance, BlockParams, ComplexityMetrics, ModelGraph, PortRef,
};
use crate::rng::seeded;

/// Default cap on predicate evaluations per reduction.
pub const DEFAULT_BUDGET: usize = 500;

/// What a re-run must reproduce for a candidate to count as triggering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerPredicate {
    /// Adapters re-run per candidate; empty means every configured one.
    #[serde(default)]
    pub adapters: Vec<String>,
    /// Verdict label, e.g. `crash` or `miscompilation`.
    pub classification: String,
    /// Signature hash the verdict must carry.
    pub signature: String,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceOptions {
    pub budget: usize,
    /// Seeds the element order used for partitioning.
    pub seed: u64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            budget: DEFAULT_BUDGET,
            seed: 0,
        }
    }
}

/// A removable piece of the top-level model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "element", content = "id")]
pub enum Element {
    /// Every instance of a referenced model, and its definition.
    Reference(String),
    /// An If Action Subsystem block with its body.
    Subsystem(BlockId),
    Block(BlockId),
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Reference(n) => write!(f, "ref:{n}"),
            Element::Subsystem(id) => write!(f, "sub:{id}"),
            Element::Block(id) => write!(f, "block:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refutation {
    /// The candidate failed validation or lost every output.
    Invalid,
    /// The candidate was evaluated and did not trigger.
    NoTrigger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub removed: Vec<Element>,
    pub accepted: bool,
    pub node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub reduced: ModelGraph,
    pub designs: Vec<HdlDesign>,
    pub steps: Vec<ReductionStep>,
    pub evaluations: usize,
    pub before: ComplexityMetrics,
    pub after: ComplexityMetrics,
    /// Every single-element removal from `reduced` and why it was refused.
    /// Empty when the budget ran out first.
    pub certificate: Vec<(Element, Refutation)>,
}

/// Removes block `removed` and rewires its consumers: to the first input
/// driver of the same type and period when that keeps the model valid,
/// otherwise to a fresh zero Constant of the removed block's type.
pub fn splice_repair(m: &ModelGraph, removed: BlockId, catalog: &BlockCatalog) -> ModelGraph {
    let Some(b) = m.block(removed) else {
        return m.clone();
    };
    let mut inputs: Vec<(u32, PortRef)> = m
        .connections
        .iter()
        .filter(|c| c.dst.block == removed)
        .map(|c| (c.dst.port, c.src))
        .collect();
    inputs.sort();
    let through = inputs.iter().map(|&(_, src)| src).find(|src| {
        src.block != removed
            && m.block(src.block).is_some_and(|s| {
                s.output_type == b.output_type && s.sample_period == b.sample_period
            })
    });
    if let Some(src) = through {
        let g = rewire(m, removed, Some(src), catalog);
        if validate(&g, catalog).is_empty() {
            return g;
        }
    }
    rewire(m, removed, None, catalog)
}

fn rewire(
    m: &ModelGraph,
    removed: BlockId,
    through: Option<PortRef>,
    catalog: &BlockCatalog,
) -> ModelGraph {
    let b = m.block(removed).expect("checked by caller").clone();
    let mut g = m.clone();
    g.connections.retain(|c| c.dst.block != removed);
    let has_consumers = g.connections.iter().any(|c| c.src.block == removed);
    g.blocks.retain(|x| x.id != removed);
    g.subsystems.retain(|s| s.block != removed);
    if has_consumers {
        let src = match through {
            Some(p) => p,
            None => {
                let zero = BlockInstance::new(0, "Constant", b.output_type)
                    .with_period(b.sample_period)
                    .with_params(BlockParams {
                        value: Some(0),
                        ..Default::default()
                    });
                PortRef::out(g.push_block(zero))
            }
        };
        for c in &mut g.connections {
            if c.src.block == removed {
                c.src = src;
            }
        }
    }
    tidy(&mut g, catalog);
    g
}

/// Drops unused reference definitions and renumbers boundary ports densely
/// in their original order.
fn tidy(g: &mut ModelGraph, catalog: &BlockCatalog) {
    let used: BTreeSet<String> = g
        .blocks
        .iter()
        .chain(g.subsystems.iter().flat_map(|s| s.graph.blocks.iter()))
        .filter(|b| b.kind == "Model")
        .filter_map(|b| b.params.model.clone())
        .collect();
    g.references.retain(|r| used.contains(&r.name));
    for outputs in [false, true] {
        let mut ports: Vec<(u32, BlockId)> = g
            .blocks
            .iter()
            .filter(|b| {
                catalog.lookup_kind(&b.kind).is_ok_and(|k| {
                    if outputs {
                        k.op == Op::Outport
                    } else {
                        k.op.is_external_input()
                    }
                })
            })
            .map(|b| (b.params.port.unwrap_or(u32::MAX), b.id))
            .collect();
        ports.sort();
        for (i, (_, id)) in ports.into_iter().enumerate() {
            g.block_mut(id).expect("listed").params.port = Some(i as u32);
        }
    }
}

fn is_zero_constant(b: &BlockInstance) -> bool {
    b.kind == "Constant" && b.params.value.unwrap_or(0) == 0
}

/// Elements of one granularity level. Driven zero Constants are what
/// removal leaves behind, so they are not offered again.
fn elements(g: &ModelGraph, level: usize, catalog: &BlockCatalog) -> Vec<Element> {
    match level {
        0 => g
            .references
            .iter()
            .map(|r| Element::Reference(r.name.clone()))
            .collect(),
        1 => g
            .subsystems
            .iter()
            .map(|s| Element::Subsystem(s.block))
            .collect(),
        _ => g
            .blocks
            .iter()
            .filter(|b| !(is_zero_constant(b) && g.connections.iter().any(|c| c.src.block == b.id)))
            .filter(|b| catalog.lookup_kind(&b.kind).is_ok())
            .map(|b| Element::Block(b.id))
            .collect(),
    }
}

/// Applies removals in a fixed order. Elements already gone are skipped.
pub fn remove_elements(m: &ModelGraph, removed: &[Element], catalog: &BlockCatalog) -> ModelGraph {
    let mut sorted = removed.to_vec();
    sorted.sort();
    let mut g = m.clone();
    for e in &sorted {
        match e {
            Element::Reference(name) => {
                let ids: Vec<BlockId> = g
                    .blocks
                    .iter()
                    .filter(|b| b.kind == "Model" && b.params.model.as_deref() == Some(name))
                    .map(|b| b.id)
                    .collect();
                for id in ids {
                    g = splice_repair(&g, id, catalog);
                }
                g.references.retain(|r| &r.name != name);
            }
            Element::Subsystem(id) | Element::Block(id) => {
                if g.block(*id).is_some() {
                    g = splice_repair(&g, *id, catalog);
                }
            }
        }
    }
    g
}

fn admissible(g: &ModelGraph, catalog: &BlockCatalog) -> bool {
    !g.outports(catalog).is_empty() && validate(g, catalog).is_empty()
}

struct Search<'a, 'p> {
    catalog: &'a BlockCatalog,
    predicate: &'p mut dyn FnMut(&ModelGraph) -> Result<bool, ReduceError>,
    budget: usize,
    evaluations: usize,
    cache: HashMap<String, bool>,
    steps: Vec<ReductionStep>,
}

enum Test {
    Holds(ModelGraph),
    Fails(Refutation),
    OutOfBudget,
}

impl Search<'_, '_> {
    fn test(&mut self, base: &ModelGraph, removed: &[Element]) -> Result<Test, ReduceError> {
        let g = remove_elements(base, removed, self.catalog);
        if !admissible(&g, self.catalog) {
            return Ok(Test::Fails(Refutation::Invalid));
        }
        let key = g.to_json();
        let holds = match self.cache.get(&key) {
            Some(&h) => h,
            None => {
                if self.evaluations >= self.budget {
                    return Ok(Test::OutOfBudget);
                }
                self.evaluations += 1;
                let h = (self.predicate)(&g)?;
                self.cache.insert(key, h);
                h
            }
        };
        self.steps.push(ReductionStep {
            removed: removed.to_vec(),
            accepted: holds,
            node_count: g.metrics().node_count,
        });
        Ok(if holds {
            Test::Holds(g)
        } else {
            Test::Fails(Refutation::NoTrigger)
        })
    }

    /// Delta debugging over `elems` of `base`. Returns the smallest
    /// triggering model found and whether the budget ran out.
    fn ddmin(
        &mut self,
        base: &ModelGraph,
        elems: Vec<Element>,
    ) -> Result<(ModelGraph, bool), ReduceError> {
        let mut keep = elems;
        let mut best = base.clone();
        let mut n = 2usize;
        while !keep.is_empty() {
            let all: BTreeSet<&Element> = keep.iter().collect();
            let n_eff = n.min(keep.len());
            let chunks = partition(&keep, n_eff);
            let mut next: Option<(Vec<Element>, usize)> = None;
            // Reduce to a subset, then to a complement.
            let mut tries: Vec<(Vec<Element>, usize)> = Vec::new();
            if n_eff > 2 {
                for c in &chunks {
                    tries.push((c.clone(), 2));
                }
            }
            for (i, _) in chunks.iter().enumerate() {
                let comp: Vec<Element> = chunks
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .flat_map(|(_, c)| c.iter().cloned())
                    .collect();
                tries.push((comp, (n_eff - 1).max(2)));
            }
            for (kept, next_n) in tries {
                let kept_set: BTreeSet<&Element> = kept.iter().collect();
                let removed: Vec<Element> =
                    all.difference(&kept_set).map(|e| (*e).clone()).collect();
                match self.test(base, &removed)? {
                    Test::Holds(g) => {
                        best = g;
                        next = Some((kept, next_n));
                        break;
                    }
                    Test::Fails(_) => {}
                    Test::OutOfBudget => return Ok((best, true)),
                }
            }
            match next {
                Some((kept, next_n)) => {
                    keep = kept;
                    n = next_n;
                }
                None if n_eff >= keep.len() => break,
                None => n = (2 * n_eff).min(keep.len()),
            }
        }
        Ok((best, false))
    }
}

fn partition(elems: &[Element], n: usize) -> Vec<Vec<Element>> {
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let end = start + (elems.len() - start) / (n - i);
        out.push(elems[start..end].to_vec());
        start = end;
    }
    out
}

/// Minimizes `m` while `predicate` keeps holding.
///
/// Candidates that fail validation, or have no outputs, are refused
/// without calling the predicate. Identical candidates are evaluated once.
pub fn reduce(
    m: &ModelGraph,
    catalog: &BlockCatalog,
    opts: ReduceOptions,
    predicate: &mut dyn FnMut(&ModelGraph) -> Result<bool, ReduceError>,
) -> Result<ReductionResult, ReduceError> {
    let mut s = Search {
        catalog,
        predicate,
        budget: opts.budget,
        evaluations: 0,
        cache: HashMap::new(),
        steps: Vec::new(),
    };
    if opts.budget == 0 {
        return Err(ReduceError::Predicate("budget must be positive".into()));
    }
    s.evaluations = 1;
    if !(s.predicate)(m)? {
        return Err(ReduceError::TriggerLost);
    }
    s.cache.insert(m.to_json(), true);
    let mut rng = seeded(opts.seed);
    let mut cur = m.clone();
    let mut exhausted = false;
    for level in 0..3 {
        let mut elems = elements(&cur, level, catalog);
        elems.shuffle(&mut rng);
        let (g, out) = s.ddmin(&cur, elems)?;
        cur = g;
        if out {
            exhausted = true;
            break;
        }
    }
    // Certify: every single removal from the result must be refused.
    let mut certificate = Vec::new();
    while !exhausted {
        certificate.clear();
        let mut improved = false;
        for e in elements(&cur, 0, catalog)
            .into_iter()
            .chain(elements(&cur, 1, catalog))
            .chain(elements(&cur, 2, catalog))
        {
            match s.test(&cur, std::slice::from_ref(&e))? {
                Test::Holds(g) => {
                    cur = g;
                    improved = true;
                    break;
                }
                Test::Fails(r) => certificate.push((e, r)),
                Test::OutOfBudget => {
                    exhausted = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let designs = Dialect::ALL
        .iter()
        .map(|&d| emit(&cur, d, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    let result = ReductionResult {
        before: m.metrics(),
        after: cur.metrics(),
        reduced: cur,
        designs,
        steps: s.steps,
        evaluations: s.evaluations,
        certificate: if exhausted { Vec::new() } else { certificate },
    };
    if exhausted {
        return Err(ReduceError::BudgetExhausted(Box::new(result)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SignalType;

    fn line(kinds: &[&str], ty: SignalType) -> ModelGraph {
        let mut g = ModelGraph::new("top");
        let mut c = BlockInstance::new(0, "Constant", ty);
        c.params.value = Some(5);
        let mut prev = g.push_block(c);
        for k in kinds {
            let mut b = BlockInstance::new(0, k, ty);
            b.params.value = Some(2);
            let id = g.push_block(b);
            g.connect(PortRef::out(prev), PortRef::new(id, 0));
            prev = id;
        }
        let mut o = BlockInstance::new(0, "Outport", ty);
        o.params.port = Some(0);
        let o = g.push_block(o);
        g.connect(PortRef::out(prev), PortRef::new(o, 0));
        g
    }

    #[test]
    fn gain_is_spliced_out() {
        let cat = BlockCatalog::standard();
        let g = splice_repair(&line(&["Gain"], SignalType::ufix(8)), 1, &cat);
        assert!(validate(&g, &cat).is_empty());
        assert_eq!(
            g.blocks.iter().map(|b| b.kind.as_str()).collect::<Vec<_>>(),
            ["Constant", "Outport"]
        );
        assert_eq!(g.driver(PortRef::new(2, 0)), Some(PortRef::out(0)));
    }

    #[test]
    fn width_change_gets_a_zero_constant() {
        let cat = BlockCatalog::standard();
        let u8t = SignalType::ufix(8);
        let mut g = line(&[], u8t);
        // Constant(8) + Constant(8) -> Add(9) -> Outport(9)
        let mut k = BlockInstance::new(0, "Constant", u8t);
        k.params.value = Some(1);
        let k = g.push_block(k);
        let add = g.push_block(
            BlockInstance::new(0, "Add", SignalType::ufix(9)).with_params(BlockParams {
                signs: Some("++".into()),
                inputs: Some(2),
                ..Default::default()
            }),
        );
        g.connections.clear();
        g.connect(PortRef::out(0), PortRef::new(add, 0));
        g.connect(PortRef::out(k), PortRef::new(add, 1));
        g.block_mut(1).unwrap().output_type = SignalType::ufix(9);
        g.connect(PortRef::out(add), PortRef::new(1, 0));
        assert!(validate(&g, &cat).is_empty(), "{:?}", validate(&g, &cat));
        let r = splice_repair(&g, add, &cat);
        assert!(validate(&r, &cat).is_empty());
        let d = r.driver(PortRef::new(1, 0)).unwrap();
        let z = r.block(d.block).unwrap();
        assert_eq!(
            (z.kind.as_str(), z.output_type, z.params.value),
            ("Constant", SignalType::ufix(9), Some(0))
        );
    }

    #[test]
    fn minimal_pair_is_a_fixpoint() {
        let cat = BlockCatalog::standard();
        let m = line(&[], SignalType::ufix(8));
        let mut calls = 0;
        let mut p = |g: &ModelGraph| {
            calls += 1;
            Ok(g.block(0).is_some())
        };
        let r = reduce(&m, &cat, ReduceOptions::default(), &mut p).unwrap();
        assert!(calls <= 2);
        assert_eq!(r.reduced, m);
        assert_eq!(r.before, r.after);
    }

    #[test]
    fn marked_block_survives_alone() {
        let cat = BlockCatalog::standard();
        let m = line(&["Gain", "Bias", "Delay", "Gain"], SignalType::sfix(8));
        assert!(validate(&m, &cat).is_empty(), "{:?}", validate(&m, &cat));
        let mut p = |g: &ModelGraph| Ok(g.blocks.iter().any(|b| b.id == 3));
        let r = reduce(&m, &cat, ReduceOptions::default(), &mut p).unwrap();
        assert!(r.reduced.block(3).is_some());
        assert!(r.after.node_count < r.before.node_count);
        for (e, _) in &r.certificate {
            let g = remove_elements(&r.reduced, std::slice::from_ref(e), &cat);
            assert!(!admissible(&g, &cat) || g.block(3).is_none());
        }
    }

    #[test]
    fn lost_trigger() {
        let cat = BlockCatalog::standard();
        let mut p = |_: &ModelGraph| Ok(false);
        let e = reduce(
            &line(&["Gain"], SignalType::ufix(4)),
            &cat,
            ReduceOptions::default(),
            &mut p,
        );
        assert!(matches!(e, Err(ReduceError::TriggerLost)));
    }
}
