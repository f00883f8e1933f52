// SPDX-License-Identifier: Apache-2.0

//! Hierarchical block-diagram IR.
//!
//! A [`ModelGraph`] owns its blocks, the single-driver connections between
//! them, the bodies of its If Action subsystems (keyed by the owning block)
//! and the definitions of models it references by name. Model blocks resolve
//! names lexically: first in their own graph's `references`, then outward.

mod insert;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::catalog::{Arity, BlockCatalog, BlockKind, Op};
use crate::types::{SamplePeriod, SignalType};

pub use insert::{insert_block, Body, Feed, NewBlock, Site};

pub(crate) use validate::resolve_with_chain;
pub use validate::{validate, Rule, Violation};

pub type BlockId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Eq,
        CompareOp::Ne,
        CompareOp::Lt,
        CompareOp::Le,
        CompareOp::Gt,
        CompareOp::Ge,
    ];

    pub fn eval(self, a: i128, b: i128) -> bool {
        match self {
            CompareOp::Eq => a == b,
            CompareOp::Ne => a != b,
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Gt => a > b,
            CompareOp::Ge => a >= b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitwiseOp {
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Xnor,
}

impl BitwiseOp {
    pub const ALL: [BitwiseOp; 6] = [
        BitwiseOp::And,
        BitwiseOp::Or,
        BitwiseOp::Xor,
        BitwiseOp::Nand,
        BitwiseOp::Nor,
        BitwiseOp::Xnor,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinMaxMode {
    Min,
    Max,
}

/// Kind-specific constants. Unused fields are omitted from the JSON form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockParams {
    /// Constant value, Bias amount, Gain factor or comparison constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitwise: Option<BitwiseOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minmax: Option<MinMaxMode>,
    /// One `+` or `-` per Add input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<String>,
    /// Boundary index of an Inport/Outport/StimulusSource.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u32>,
    /// Input count of a variadic kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<u32>,
    /// Referenced model name for Model blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Cycles this block's state is held in reset after the module reset
    /// deasserts. Set by pipelining so retimed state starts in step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset_stage: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInstance {
    pub id: BlockId,
    pub kind: String,
    pub output_type: SignalType,
    pub sample_period: SamplePeriod,
    #[serde(default)]
    pub params: BlockParams,
}

impl BlockInstance {
    pub fn new(id: BlockId, kind: &str, output_type: SignalType) -> Self {
        BlockInstance {
            id,
            kind: kind.to_string(),
            output_type,
            sample_period: SamplePeriod::BASE,
            params: BlockParams::default(),
        }
    }

    pub fn with_params(mut self, params: BlockParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_period(mut self, period: SamplePeriod) -> Self {
        self.sample_period = period;
        self
    }

    pub fn reset_stage(&self) -> u32 {
        self.params.reset_stage.unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortRef {
    pub block: BlockId,
    pub port: u32,
}

impl PortRef {
    pub const fn new(block: BlockId, port: u32) -> Self {
        PortRef { block, port }
    }

    pub const fn out(block: BlockId) -> Self {
        PortRef { block, port: 0 }
    }
}

impl std::fmt::Display for PortRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.block, self.port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Connection {
    pub src: PortRef,
    pub dst: PortRef,
}

/// Body of an If Action Subsystem, owned by the block with id `block`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsystem {
    pub block: BlockId,
    pub graph: ModelGraph,
}

/// A named model definition that Model blocks may instantiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub graph: ModelGraph,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelGraph {
    #[serde(default)]
    pub name: String,
    pub blocks: Vec<BlockInstance>,
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub subsystems: Vec<Subsystem>,
    #[serde(default)]
    pub references: Vec<Reference>,
}

/// Counts used to compare generated-model complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ComplexityMetrics {
    pub node_count: usize,
    pub connection_count: usize,
    pub reference_count: usize,
}

/// Boundary signature of a graph used as a composite body.
#[derive(Debug, Clone, PartialEq)]
pub struct Interface {
    pub inputs: Vec<SignalType>,
    pub output: SignalType,
}

impl ModelGraph {
    pub fn new(name: impl Into<String>) -> Self {
        ModelGraph {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn block(&self, id: BlockId) -> Option<&BlockInstance> {
        self.blocks
            .binary_search_by_key(&id, |b| b.id)
            .ok()
            .map(|i| &self.blocks[i])
    }

    pub fn block_mut(&mut self, id: BlockId) -> Option<&mut BlockInstance> {
        match self.blocks.binary_search_by_key(&id, |b| b.id) {
            Ok(i) => Some(&mut self.blocks[i]),
            Err(_) => None,
        }
    }

    pub fn next_id(&self) -> BlockId {
        self.blocks.last().map(|b| b.id + 1).unwrap_or(0)
    }

    /// Appends a block, assigning the next dense id.
    pub fn push_block(&mut self, mut block: BlockInstance) -> BlockId {
        let id = self.next_id();
        block.id = id;
        self.blocks.push(block);
        id
    }

    pub fn connect(&mut self, src: PortRef, dst: PortRef) {
        self.connections.push(Connection { src, dst });
    }

    pub fn driver(&self, dst: PortRef) -> Option<PortRef> {
        self.connections
            .iter()
            .find(|c| c.dst == dst)
            .map(|c| c.src)
    }

    pub fn consumers(&self, src: PortRef) -> Vec<PortRef> {
        let mut out: Vec<PortRef> = self
            .connections
            .iter()
            .filter(|c| c.src == src)
            .map(|c| c.dst)
            .collect();
        out.sort();
        out
    }

    /// Drivers of `id`'s input ports, in port order. Missing ports are `None`.
    pub fn input_drivers(&self, id: BlockId, arity: u32) -> Vec<Option<PortRef>> {
        let mut drivers = vec![None; arity as usize];
        for c in &self.connections {
            if c.dst.block == id && (c.dst.port as usize) < drivers.len() {
                drivers[c.dst.port as usize] = Some(c.src);
            }
        }
        drivers
    }

    pub fn subsystem(&self, block: BlockId) -> Option<&ModelGraph> {
        self.subsystems
            .iter()
            .find(|s| s.block == block)
            .map(|s| &s.graph)
    }

    pub fn subsystem_mut(&mut self, block: BlockId) -> Option<&mut ModelGraph> {
        self.subsystems
            .iter_mut()
            .find(|s| s.block == block)
            .map(|s| &mut s.graph)
    }

    pub fn reference(&self, name: &str) -> Option<&ModelGraph> {
        self.references
            .iter()
            .find(|r| r.name == name)
            .map(|r| &r.graph)
    }

    /// Inport-like boundary blocks in port order.
    pub fn inports(&self, catalog: &BlockCatalog) -> Vec<&BlockInstance> {
        let mut v: Vec<&BlockInstance> = self
            .blocks
            .iter()
            .filter(|b| {
                catalog
                    .lookup_kind(&b.kind)
                    .map(|k| k.op.is_external_input())
                    .unwrap_or(false)
            })
            .collect();
        v.sort_by_key(|b| (b.params.port.unwrap_or(u32::MAX), b.id));
        v
    }

    pub fn outports(&self, catalog: &BlockCatalog) -> Vec<&BlockInstance> {
        let mut v: Vec<&BlockInstance> = self
            .blocks
            .iter()
            .filter(|b| {
                catalog
                    .lookup_kind(&b.kind)
                    .map(|k| k.op == Op::Outport)
                    .unwrap_or(false)
            })
            .collect();
        v.sort_by_key(|b| (b.params.port.unwrap_or(u32::MAX), b.id));
        v
    }

    pub fn interface(&self, catalog: &BlockCatalog) -> Option<Interface> {
        let outs = self.outports(catalog);
        if outs.len() != 1 {
            return None;
        }
        Some(Interface {
            inputs: self
                .inports(catalog)
                .iter()
                .map(|b| b.output_type)
                .collect(),
            output: outs[0].output_type,
        })
    }

    /// Number of input ports the instance `b` exposes.
    pub fn arity_of(&self, b: &BlockInstance, kind: &BlockKind, scopes: &[&ModelGraph]) -> u32 {
        match kind.arity {
            Arity::Fixed(k) => k,
            Arity::Variadic { min, .. } => b.params.inputs.unwrap_or(min),
            Arity::Composite { leading } => {
                let body = match kind.op {
                    Op::IfAction => self.subsystem(b.id),
                    _ => b
                        .params
                        .model
                        .as_deref()
                        .and_then(|n| resolve_in(self, scopes, n)),
                };
                leading + body.map(|g| g.inports_count_raw()).unwrap_or(0)
            }
        }
    }

    fn inports_count_raw(&self) -> u32 {
        self.blocks
            .iter()
            .filter(|b| b.kind == "Inport" || b.kind == "StimulusSource")
            .count() as u32
    }

    /// Sorts blocks by id and connections by destination, so serialization is canonical.
    pub fn canonicalize(&mut self) {
        self.blocks.sort_by_key(|b| b.id);
        self.connections.sort_by_key(|c| (c.dst, c.src));
        self.subsystems.sort_by_key(|s| s.block);
        self.references.sort_by(|a, b| a.name.cmp(&b.name));
        for s in &mut self.subsystems {
            s.graph.canonicalize();
        }
        for r in &mut self.references {
            r.graph.canonicalize();
        }
    }

    pub fn to_json(&self) -> String {
        let mut g = self.clone();
        g.canonicalize();
        let mut s = serde_json::to_string_pretty(&g).expect("model graphs always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let mut g: ModelGraph = serde_json::from_str(text)?;
        g.canonicalize();
        Ok(g)
    }

    /// Evaluation order over combinational dependencies. Path-breaking
    /// blocks publish registered state, so edges leaving them are ignored.
    /// Returns `None` if a combinational loop exists.
    pub fn eval_order(&self, catalog: &BlockCatalog) -> Option<Vec<BlockId>> {
        let breaks: HashMap<BlockId, bool> = self
            .blocks
            .iter()
            .map(|b| {
                (
                    b.id,
                    catalog
                        .lookup_kind(&b.kind)
                        .map(|k| k.breaks_path)
                        .unwrap_or(false),
                )
            })
            .collect();
        let mut indeg: BTreeMap<BlockId, usize> = self.blocks.iter().map(|b| (b.id, 0)).collect();
        let mut succ: HashMap<BlockId, Vec<BlockId>> = HashMap::new();
        for c in &self.connections {
            if breaks.get(&c.src.block).copied().unwrap_or(false) {
                continue;
            }
            if !indeg.contains_key(&c.src.block) || !indeg.contains_key(&c.dst.block) {
                continue;
            }
            *indeg.get_mut(&c.dst.block).unwrap() += 1;
            succ.entry(c.src.block).or_default().push(c.dst.block);
        }
        let mut ready: BTreeSet<BlockId> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.blocks.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            if let Some(next) = succ.get(&id) {
                for &n in next {
                    let d = indeg.get_mut(&n).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(n);
                    }
                }
            }
        }
        (order.len() == self.blocks.len()).then_some(order)
    }

    /// Blocks reachable from `start` following connections forward.
    pub fn descendants(&self, start: &[BlockId]) -> BTreeSet<BlockId> {
        let mut seen: BTreeSet<BlockId> = BTreeSet::new();
        let mut queue: VecDeque<BlockId> = start.iter().copied().collect();
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            for c in &self.connections {
                if c.src.block == id && !seen.contains(&c.dst.block) {
                    queue.push_back(c.dst.block);
                }
            }
        }
        seen
    }

    pub fn metrics(&self) -> ComplexityMetrics {
        let mut nodes = 0;
        let mut conns = 0;
        self.count_recursive(&mut nodes, &mut conns);
        let mut names = BTreeSet::new();
        self.collect_reference_names(&mut names);
        ComplexityMetrics {
            node_count: nodes,
            connection_count: conns,
            reference_count: names.len(),
        }
    }

    fn count_recursive(&self, nodes: &mut usize, conns: &mut usize) {
        *nodes += self.blocks.len();
        *conns += self.connections.len();
        for s in &self.subsystems {
            s.graph.count_recursive(nodes, conns);
        }
        for r in &self.references {
            r.graph.count_recursive(nodes, conns);
        }
    }

    fn collect_reference_names(&self, names: &mut BTreeSet<String>) {
        for b in &self.blocks {
            if b.kind == "Model" {
                if let Some(n) = &b.params.model {
                    names.insert(n.clone());
                }
            }
        }
        for s in &self.subsystems {
            s.graph.collect_reference_names(names);
        }
    }
}

/// Resolves a reference name from `graph` outward through `scopes`
/// (innermost last).
pub fn resolve_in<'a>(
    graph: &'a ModelGraph,
    scopes: &[&'a ModelGraph],
    name: &str,
) -> Option<&'a ModelGraph> {
    graph
        .reference(name)
        .or_else(|| scopes.iter().rev().find_map(|g| g.reference(name)))
}

pub fn metrics(m: &ModelGraph) -> ComplexityMetrics {
    m.metrics()
}
