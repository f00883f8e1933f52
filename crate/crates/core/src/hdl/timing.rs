// SPDX-License-Identifier: Apache-2.0

//! Critical-path delay and the pipelining strategy selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{BlockCatalog, Op};
use crate::model::{resolve_with_chain, BlockId, BlockInstance, BlockParams, ModelGraph, PortRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Direct translation, no added registers.
    Legacy,
    /// This many rounds of pipeline registers.
    Level(u32),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Legacy => f.write_str("legacy"),
            Strategy::Level(i) => write!(f, "level{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub critical_delay: f64,
    /// Top-level blocks along one longest path, source first.
    pub critical_path: Vec<BlockId>,
    /// Filled by [`optimize`]; empty from [`critical_path`].
    pub strategy_delays: Vec<(Strategy, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationChoice {
    pub strategies: Vec<Strategy>,
    /// Metric per strategy: the negated critical delay.
    pub metrics: Vec<f64>,
    pub chosen: usize,
    /// Cycles the chosen graph's outputs lag the input graph's.
    pub latency: u32,
}

impl OptimizationChoice {
    pub fn chosen_strategy(&self) -> Strategy {
        self.strategies[self.chosen]
    }
}

/// Arrival time at each top-level block output and the predecessor that
/// set it. Edges leaving path-breaking blocks start fresh paths.
fn arrivals(
    g: &ModelGraph,
    scopes: &[&ModelGraph],
    catalog: &BlockCatalog,
) -> (BTreeMap<BlockId, f64>, BTreeMap<BlockId, Option<BlockId>>) {
    let mut finish: BTreeMap<BlockId, f64> = BTreeMap::new();
    let mut pred: BTreeMap<BlockId, Option<BlockId>> = BTreeMap::new();
    let order = g
        .eval_order(catalog)
        .unwrap_or_else(|| g.blocks.iter().map(|b| b.id).collect());
    let mut inner = scopes.to_vec();
    inner.push(g);
    for id in order {
        let b = g.block(id).expect("ordered");
        let Ok(kind) = catalog.lookup_kind(&b.kind) else {
            continue;
        };
        let mut w = kind.delay_weight;
        w += match kind.op {
            Op::IfAction => g
                .subsystem(id)
                .map(|c| graph_delay(c, &inner, catalog))
                .unwrap_or(0.0),
            Op::ModelRef => b
                .params
                .model
                .as_deref()
                .and_then(|n| resolve_with_chain(g, scopes, n))
                .map(|(body, chain)| graph_delay(body, &chain, catalog))
                .unwrap_or(0.0),
            _ => 0.0,
        };
        let mut best: Option<(f64, BlockId)> = None;
        let mut srcs: Vec<BlockId> = g
            .connections
            .iter()
            .filter(|c| c.dst.block == id)
            .map(|c| c.src.block)
            .collect();
        srcs.sort_unstable();
        srcs.dedup();
        for s in srcs {
            let breaks = g
                .block(s)
                .and_then(|sb| catalog.lookup_kind(&sb.kind).ok())
                .map(|k| k.breaks_path)
                .unwrap_or(false);
            if breaks {
                continue;
            }
            let f = finish.get(&s).copied().unwrap_or(0.0);
            if best.is_none_or(|(bf, _)| f > bf) {
                best = Some((f, s));
            }
        }
        finish.insert(id, w + best.map_or(0.0, |(f, _)| f));
        pred.insert(id, best.map(|(_, s)| s));
    }
    (finish, pred)
}

fn graph_delay(g: &ModelGraph, scopes: &[&ModelGraph], catalog: &BlockCatalog) -> f64 {
    arrivals(g, scopes, catalog)
        .0
        .values()
        .copied()
        .fold(0.0, f64::max)
}

/// Longest combinational path over the top-level graph. Composite blocks
/// weigh their own delay plus their body's critical delay.
pub fn critical_path(m: &ModelGraph, catalog: &BlockCatalog) -> TimingReport {
    let (finish, pred) = arrivals(m, &[], catalog);
    let mut end: Option<(f64, BlockId)> = None;
    for (&id, &f) in &finish {
        if end.is_none_or(|(bf, _)| f > bf) {
            end = Some((f, id));
        }
    }
    let mut path = Vec::new();
    let mut cur = end.map(|(_, id)| id);
    while let Some(id) = cur {
        path.push(id);
        cur = pred.get(&id).copied().flatten();
    }
    path.reverse();
    TimingReport {
        critical_delay: end.map_or(0.0, |(f, _)| f),
        critical_path: path,
        strategy_delays: Vec::new(),
    }
}

/// One round of registers across the cut at half the critical delay.
///
/// Blocks finishing after the midpoint, everything downstream of them and
/// every Outport form the late set; every net from the early set into it
/// gets one Delay. Each input-to-output path therefore crosses exactly one
/// new register, and every late block holds its state in reset one cycle
/// longer, so outputs lag by exactly one cycle.
fn pipeline_round(g: &mut ModelGraph, catalog: &BlockCatalog) {
    let (finish, _) = arrivals(g, &[], catalog);
    let tau = finish.values().copied().fold(0.0, f64::max) / 2.0;
    let op_of = |b: &BlockInstance| catalog.lookup_kind(&b.kind).map(|k| k.op).ok();
    let mut late: BTreeSet<BlockId> = g
        .blocks
        .iter()
        .filter(|b| match op_of(b) {
            Some(Op::Outport) => true,
            Some(op) if op.is_source() => false,
            _ => finish.get(&b.id).copied().unwrap_or(0.0) > tau,
        })
        .map(|b| b.id)
        .collect();
    let mut stack: Vec<BlockId> = late.iter().copied().collect();
    while let Some(id) = stack.pop() {
        for c in g.connections.iter().filter(|c| c.src.block == id) {
            if late.insert(c.dst.block) {
                stack.push(c.dst.block);
            }
        }
    }
    let crossing: BTreeSet<PortRef> = g
        .connections
        .iter()
        .filter(|c| !late.contains(&c.src.block) && late.contains(&c.dst.block))
        .map(|c| c.src)
        .collect();
    for net in crossing {
        let src = g.block(net.block).expect("net driver").clone();
        let delay = BlockInstance::new(0, "Delay", src.output_type)
            .with_period(src.sample_period)
            .with_params(BlockParams {
                reset_stage: Some(src.reset_stage()),
                ..Default::default()
            });
        let d = g.push_block(delay);
        for c in &mut g.connections {
            if c.src == net && late.contains(&c.dst.block) {
                c.src = PortRef::out(d);
            }
        }
        g.connect(net, PortRef::new(d, 0));
    }
    for id in late {
        let b = g.block_mut(id).expect("late block");
        b.params.reset_stage = Some(b.reset_stage() + 1);
    }
}

/// Evaluates legacy translation and `levels` pipelining depths and returns
/// the graph of the best one. Ties go to legacy, then to the deeper level.
pub fn optimize(
    m: &ModelGraph,
    levels: u32,
    catalog: &BlockCatalog,
) -> (ModelGraph, OptimizationChoice, TimingReport) {
    let mut strategies = vec![Strategy::Legacy];
    let mut graphs = vec![m.clone()];
    let mut g = m.clone();
    for i in 0..=levels {
        if i > 0 {
            pipeline_round(&mut g, catalog);
        }
        strategies.push(Strategy::Level(i));
        graphs.push(g.clone());
    }
    let delays: Vec<f64> = graphs
        .iter()
        .map(|x| critical_path(x, catalog).critical_delay)
        .collect();
    let metrics: Vec<f64> = delays.iter().map(|d| -d).collect();
    let mut chosen = 0;
    for k in 1..metrics.len() {
        if metrics[k] > metrics[0] && metrics[k] >= metrics[chosen] {
            chosen = k;
        }
    }
    let latency = match strategies[chosen] {
        Strategy::Legacy => 0,
        Strategy::Level(i) => i,
    };
    let graph = graphs.swap_remove(chosen);
    let mut report = critical_path(&graph, catalog);
    report.strategy_delays = strategies.iter().copied().zip(delays).collect();
    (
        graph,
        OptimizationChoice {
            strategies,
            metrics,
            chosen,
            latency,
        },
        report,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{make_stimulus, simulate};
    use crate::model::validate;
    use crate::types::SignalType;

    fn chain(kinds: &[&str]) -> ModelGraph {
        let u = SignalType::ufix(8);
        let mut g = ModelGraph::new("top");
        let mut i = BlockInstance::new(0, "Inport", u);
        i.params.port = Some(0);
        let mut prev = g.push_block(i);
        for k in kinds {
            let mut b = BlockInstance::new(0, k, u);
            b.params.value = Some(3);
            let id = g.push_block(b);
            g.connect(PortRef::out(prev), PortRef::new(id, 0));
            prev = id;
        }
        let mut o = BlockInstance::new(0, "Outport", u);
        o.params.port = Some(0);
        let o = g.push_block(o);
        g.connect(PortRef::out(prev), PortRef::new(o, 0));
        g
    }

    #[test]
    fn summed_chain() {
        let cat = BlockCatalog::standard();
        let r = critical_path(&chain(&["Bias", "Gain", "Abs"]), &cat);
        assert_eq!(r.critical_delay, 3.0);
        assert_eq!(r.critical_path, vec![0, 1, 2, 3]);
        assert_eq!(critical_path(&chain(&["Bias"]), &cat).critical_delay, 1.0);
    }

    #[test]
    fn chain_of_four_picks_level_two() {
        let cat = BlockCatalog::standard();
        let m = chain(&["Bias", "Gain", "Abs", "Bias"]);
        let (p, choice, report) = optimize(&m, 2, &cat);
        assert_eq!(choice.chosen_strategy(), Strategy::Level(2));
        assert_eq!(choice.latency, 2);
        assert_eq!(report.critical_delay, 2.0);
        assert!(validate(&p, &cat).is_empty());
        let s = make_stimulus(&m, &cat, 9, 24);
        let (a, b) = (simulate(&m, &s, &cat), simulate(&p, &s, &cat));
        for t in 0..22 {
            assert_eq!(b.outputs[0].values[t + 2], a.outputs[0].values[t]);
        }
    }

    #[test]
    fn registered_design_keeps_legacy() {
        let cat = BlockCatalog::standard();
        let m = chain(&["Delay"]);
        let (p, choice, _) = optimize(&m, 3, &cat);
        assert_eq!(choice.chosen_strategy(), Strategy::Legacy);
        assert_eq!(p, m);
    }
}
