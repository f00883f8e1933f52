// SPDX-License-Identifier: Apache-2.0

//! Model growth: kind selection from a transition matrix and guided,
//! transactional block insertion.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Arity, BlockCatalog, BlockGroup, BlockKind, Op};
use crate::error::{GenerationError, GuidanceError};
use crate::guidance::{self, ConstraintInfo};
use crate::hdl::Dialect;
use crate::model::{insert_block, Body, Feed, NewBlock, Site};
use crate::model::{
    BitwiseOp, BlockId, BlockInstance, CompareOp, MinMaxMode, ModelGraph, PortRef, Reference,
};
use crate::rng::{self, FuzzRng};
use crate::types::{SamplePeriod, SignalType, Signedness};

/// Group weights of the default matrix, calibrated so 35-block models carry
/// 120 to 210 connections.
pub const DEFAULT_GROUP_WEIGHTS: [(BlockGroup, f64); 4] = [
    (BlockGroup::SourceSink, 0.05),
    (BlockGroup::Math, 0.55),
    (BlockGroup::HdlSpecific, 0.25),
    (BlockGroup::ControlFlow, 0.15),
];

/// Row label of the transition out of the empty model.
pub const START_ROW: &str = "start";

/// Transition weights between kinds. Row 0 is the start row, row `i + 1`
/// belongs to column kind `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    kinds: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ProbabilityMatrix {
    /// Builds a matrix from raw weights, zeroing the diagonal and
    /// normalizing every row.
    pub fn new(kinds: Vec<String>, mut rows: Vec<Vec<f64>>) -> Result<Self, GenerationError> {
        let n = kinds.len();
        if rows.len() != n + 1 || rows.iter().any(|r| r.len() != n) {
            return Err(GenerationError::Matrix(format!(
                "expected {} rows of {n} entries",
                n + 1
            )));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(GenerationError::Matrix(format!(
                    "row {} has a negative or non-finite entry",
                    row_label(&kinds, i)
                )));
            }
            if i > 0 {
                row[i - 1] = 0.0;
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(GenerationError::Matrix(format!(
                    "row {} has no weight",
                    row_label(&kinds, i)
                )));
            }
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(ProbabilityMatrix { kinds, rows })
    }

    pub fn kinds(&self) -> &[String] {
        &self.kinds
    }

    /// Normalized row for `current`, or the start row for `None`.
    pub fn row(&self, current: Option<&str>) -> Option<&[f64]> {
        match current {
            None => Some(&self.rows[0]),
            Some(k) => self.column(k).map(|i| self.rows[i + 1].as_slice()),
        }
    }

    pub fn column(&self, kind: &str) -> Option<usize> {
        self.kinds.iter().position(|k| k == kind)
    }

    pub fn get(&self, row: Option<&str>, col: &str) -> Option<f64> {
        Some(self.row(row)?[self.column(col)?])
    }

    /// Applies `{"matrix": {row: {col: weight}}}`; unnamed entries keep
    /// their current values before rows are renormalized.
    pub fn with_overrides(&self, text: &str) -> Result<Self, GenerationError> {
        #[derive(Deserialize)]
        struct File {
            matrix: BTreeMap<String, BTreeMap<String, f64>>,
        }
        let f: File =
            serde_json::from_str(text).map_err(|e| GenerationError::Matrix(e.to_string()))?;
        let mut rows = self.rows.clone();
        for (row, cols) in &f.matrix {
            let r = if row == START_ROW {
                0
            } else {
                self.column(row)
                    .ok_or_else(|| GenerationError::Matrix(format!("unknown row `{row}`")))?
                    + 1
            };
            for (col, &w) in cols {
                let c = self
                    .column(col)
                    .ok_or_else(|| GenerationError::Matrix(format!("unknown column `{col}`")))?;
                rows[r][c] = w;
            }
        }
        ProbabilityMatrix::new(self.kinds.clone(), rows)
    }

    pub fn to_json(&self) -> String {
        let mut rows = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let cols: BTreeMap<&str, f64> = self
                .kinds
                .iter()
                .map(String::as_str)
                .zip(row.iter().copied())
                .collect();
            rows.insert(row_label(&self.kinds, i), cols);
        }
        serde_json::to_string_pretty(&serde_json::json!({ "matrix": rows })).expect("plain data")
    }
}

fn row_label(kinds: &[String], i: usize) -> String {
    if i == 0 {
        START_ROW.to_string()
    } else {
        kinds[i - 1].clone()
    }
}

/// Group weights spread evenly over each group's kinds.
pub fn default_matrix(catalog: &BlockCatalog) -> ProbabilityMatrix {
    matrix_from_groups(catalog, &DEFAULT_GROUP_WEIGHTS)
}

pub fn matrix_from_groups(
    catalog: &BlockCatalog,
    weights: &[(BlockGroup, f64)],
) -> ProbabilityMatrix {
    let kinds: Vec<String> = catalog.kinds().iter().map(|k| k.name.to_string()).collect();
    let col: Vec<f64> = catalog
        .kinds()
        .iter()
        .map(|k| {
            let w = weights
                .iter()
                .find(|(g, _)| *g == k.group)
                .map_or(0.0, |(_, w)| *w);
            w / catalog.in_group(k.group).count() as f64
        })
        .collect();
    let rows = vec![col; kinds.len() + 1];
    ProbabilityMatrix::new(kinds, rows).expect("group weights are positive")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub seed: u64,
    /// Target node count; the result lands within 10% of it.
    pub block_count_target: usize,
    /// Insertions per guidance round.
    pub b_max: usize,
    /// Guidance rounds before giving up.
    pub hdl_max: usize,
    pub max_depth: usize,
    /// Distinct referenced models per design.
    pub max_references: usize,
    /// Input count range drawn for variadic kinds.
    pub min_fan_in: u32,
    pub max_fan_in: u32,
    /// Chance that an extra input reads an existing net instead of a new source.
    pub reuse_probability: f64,
    pub dialects: Vec<Dialect>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: 0,
            block_count_target: 35,
            b_max: 4,
            hdl_max: 2000,
            max_depth: 4,
            max_references: 8,
            min_fan_in: 24,
            max_fan_in: 32,
            reuse_probability: 0.95,
            dialects: Dialect::ALL.to_vec(),
        }
    }
}

impl GenerationConfig {
    pub fn with_seed(seed: u64, block_count_target: usize) -> Self {
        GenerationConfig {
            seed,
            block_count_target,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::Config(m.to_string()));
        if self.block_count_target < 2 {
            return bad("block_count_target must be at least 2");
        }
        if self.b_max < 1 || self.hdl_max < 1 {
            return bad("b_max and hdl_max must be at least 1");
        }
        if self.min_fan_in < 2 || self.max_fan_in < self.min_fan_in {
            return bad("fan-in range must satisfy 2 <= min_fan_in <= max_fan_in");
        }
        if !(0.0..=1.0).contains(&self.reuse_probability) {
            return bad("reuse_probability must lie in [0, 1]");
        }
        if self.dialects.is_empty() {
            return bad("no dialect selected");
        }
        Ok(())
    }

    fn bounds(&self) -> (usize, usize) {
        let n = self.block_count_target as f64;
        let lo = (n * 0.9).ceil() as usize;
        let hi = ((n * 1.1).floor() as usize).max(self.block_count_target);
        (lo, hi)
    }
}

/// Representative input types for `kind` when `ty` arrives at its first
/// admitting port.
fn probe_inputs(kind: &BlockKind, ty: SignalType) -> Option<Vec<SignalType>> {
    match kind.op {
        Op::If => Some(vec![SignalType::boolean(), ty, ty]),
        Op::Divide => Some(vec![ty, ty]),
        _ => match kind.arity {
            Arity::Fixed(1) => Some(vec![ty]),
            Arity::Variadic { min, .. } => Some(vec![ty; min as usize]),
            _ => None,
        },
    }
    .filter(|v| {
        v.iter().enumerate().all(|(i, t)| {
            kind.input_spec(i as u32)
                .is_some_and(|s| s.constraint.admits(*t))
        })
    })
}

/// Whether `kind` may be spliced into a net of type `ty` and produce one of
/// `admissible`.
pub fn type_admissible(kind: &BlockKind, ty: SignalType, admissible: &[SignalType]) -> bool {
    if kind.op.is_composite() {
        return admissible.contains(&ty);
    }
    if kind.is_source() || !kind.has_output() {
        return false;
    }
    probe_inputs(kind, ty)
        .and_then(|ins| kind.infer_output_type(&ins).ok())
        .is_some_and(|out| admissible.contains(&out))
}

/// Kinds `choose_next_kind` may return, with their row weights.
pub fn eligible_kinds<'c>(
    matrix: &ProbabilityMatrix,
    current: Option<&str>,
    constraint: &ConstraintInfo,
    catalog: &'c BlockCatalog,
) -> Vec<(&'c BlockKind, f64)> {
    let Some(row) = matrix.row(current) else {
        return Vec::new();
    };
    catalog
        .kinds()
        .iter()
        .filter_map(|k| {
            let w = matrix.column(k.name).map(|c| row[c])?;
            let ok = w > 0.0
                && Some(k.name) != current
                && !constraint.forbidden_kinds.contains(k.name)
                && k.rate == constraint.required_period
                && type_admissible(k, constraint.ty, &constraint.admissible_types);
            ok.then_some((k, w))
        })
        .collect()
}

/// Samples the next kind from `current`'s row restricted to eligible kinds.
pub fn choose_next_kind<'c>(
    matrix: &ProbabilityMatrix,
    current: Option<&str>,
    constraint: &ConstraintInfo,
    catalog: &'c BlockCatalog,
    rng: &mut FuzzRng,
) -> Result<&'c BlockKind, GenerationError> {
    let eligible = eligible_kinds(matrix, current, constraint, catalog);
    if eligible.is_empty() {
        return Err(GenerationError::NoEligibleKind);
    }
    let dist = WeightedIndex::new(eligible.iter().map(|(_, w)| *w))
        .map_err(|_| GenerationError::NoEligibleKind)?;
    Ok(eligible[dist.sample(rng)].0)
}

/// Callback producing the constraint for the next round.
pub type Guidance<'a> =
    dyn FnMut(&ModelGraph, &mut FuzzRng) -> Result<ConstraintInfo, GuidanceError> + 'a;

/// Guidance backed by the emitted design's facts.
pub fn syntax_guidance(
    catalog: &BlockCatalog,
) -> impl FnMut(&ModelGraph, &mut FuzzRng) -> Result<ConstraintInfo, GuidanceError> + '_ {
    move |m, r| guidance::guide(m, catalog, r)
}

fn random_type(r: &mut FuzzRng) -> SignalType {
    match r.gen_range(0..20) {
        0..=1 => SignalType::boolean(),
        2..=10 => SignalType::ufix(r.gen_range(2..=16)),
        _ => SignalType::sfix(r.gen_range(2..=16)),
    }
}

fn random_value(ty: SignalType, r: &mut FuzzRng) -> i128 {
    r.gen_range(ty.min_value()..=ty.max_value())
}

/// Another type of the same class, for fresh sources feeding a block.
fn sibling_type(ty: SignalType, r: &mut FuzzRng) -> SignalType {
    match ty.signedness {
        Signedness::Boolean => ty,
        Signedness::Unsigned => SignalType::ufix(r.gen_range(1..=ty.width())),
        Signedness::Signed => SignalType::sfix(r.gen_range(2..=ty.width().max(2))),
    }
}

/// Mutable growth state around one model.
struct Grower<'a> {
    cfg: &'a GenerationConfig,
    catalog: &'a BlockCatalog,
    rng: FuzzRng,
    m: ModelGraph,
}

/// Inputs under construction for one new block.
struct Wiring<'g> {
    pool: Vec<&'g BlockInstance>,
    inputs: Vec<Feed>,
    types: Vec<SignalType>,
    sources: Vec<BlockInstance>,
    next_port: u32,
    period: SamplePeriod,
}

impl Wiring<'_> {
    fn push(&mut self, feed: Feed, ty: SignalType) {
        self.inputs.push(feed);
        self.types.push(ty);
    }

    /// Adds an input of a type accepted by `want`, reusing an existing net
    /// when one fits.
    fn extra(
        &mut self,
        want: impl Fn(SignalType) -> bool,
        fresh: SignalType,
        reuse: f64,
        r: &mut FuzzRng,
    ) {
        let fits: Vec<&BlockInstance> = self
            .pool
            .iter()
            .copied()
            .filter(|b| want(b.output_type))
            .collect();
        if !fits.is_empty() && r.gen_bool(reuse) {
            let b = fits[r.gen_range(0..fits.len())];
            self.push(Feed::Net(PortRef::out(b.id)), b.output_type);
            return;
        }
        let src = if r.gen_bool(0.5) {
            let mut c = BlockInstance::new(0, "Constant", fresh).with_period(self.period);
            c.params.value = Some(random_value(fresh, r));
            c
        } else {
            let mut i = BlockInstance::new(0, "Inport", fresh).with_period(self.period);
            i.params.port = Some(self.next_port);
            self.next_port += 1;
            i
        };
        self.sources.push(src);
        self.push(Feed::Source(self.sources.len() - 1), fresh);
    }
}

/// Existing top-level nets a block spliced at `site` may read without
/// closing a loop.
fn pool<'g>(
    m: &'g ModelGraph,
    catalog: &BlockCatalog,
    site: PortRef,
    period: SamplePeriod,
) -> Vec<&'g BlockInstance> {
    let consumers: Vec<BlockId> = m.consumers(site).iter().map(|p| p.block).collect();
    let downstream = m.descendants(&consumers);
    m.blocks
        .iter()
        .filter(|b| {
            !downstream.contains(&b.id)
                && b.sample_period == period
                && catalog.lookup_kind(&b.kind).is_ok_and(|k| k.has_output())
        })
        .collect()
}

/// Body of a composite: one inport, a short chain of type-keeping blocks,
/// one outport.
fn composite_body(name: &str, ty: SignalType, period: SamplePeriod, r: &mut FuzzRng) -> ModelGraph {
    let mut g = ModelGraph::new(name);
    let mut inp = BlockInstance::new(0, "Inport", ty).with_period(period);
    inp.params.port = Some(0);
    let mut prev = g.push_block(inp);
    let choices: &[&str] = if ty.is_bool() {
        &["Gain", "Delay"]
    } else {
        &["Gain", "Bias", "Bit Set", "Bit Clear", "Delay"]
    };
    for _ in 0..r.gen_range(1..=3) {
        let kind = choices[r.gen_range(0..choices.len())];
        let mut b = BlockInstance::new(0, kind, ty).with_period(period);
        match kind {
            "Gain" | "Bias" => b.params.value = Some(random_value(ty, r)),
            "Bit Set" | "Bit Clear" => b.params.bit = Some(r.gen_range(0..ty.width())),
            _ => {}
        }
        let id = g.push_block(b);
        g.connect(PortRef::out(prev), PortRef::new(id, 0));
        prev = id;
    }
    let mut out = BlockInstance::new(0, "Outport", ty).with_period(period);
    out.params.port = Some(0);
    let o = g.push_block(out);
    g.connect(PortRef::out(prev), PortRef::new(o, 0));
    g
}

impl<'a> Grower<'a> {
    fn node_count(&self) -> usize {
        self.m.metrics().node_count
    }

    fn next_inport(&self) -> u32 {
        self.m.inports(self.catalog).len() as u32
    }

    fn next_outport(&self) -> u32 {
        self.m.outports(self.catalog).len() as u32
    }

    /// Assembles `kind` spliced at `site`. `None` when the kind cannot be
    /// wired here.
    fn build(&mut self, kind: &BlockKind, site: PortRef, period: SamplePeriod) -> Option<NewBlock> {
        let ty = self.m.block(site.block)?.output_type;
        let next_port = self.next_inport();
        let (m, catalog, cfg, r) = (&self.m, self.catalog, self.cfg, &mut self.rng);
        let reuse = cfg.reuse_probability;
        let mut w = Wiring {
            pool: pool(m, catalog, site, period),
            inputs: Vec::new(),
            types: Vec::new(),
            sources: Vec::new(),
            next_port,
            period,
        };
        let same_class = move |t: SignalType| t.signedness == ty.signedness;
        let boolean = |t: SignalType| t.is_bool();
        let mut b = BlockInstance::new(0, kind.name, ty).with_period(period);
        let mut body = None;
        match kind.op {
            Op::If => {
                w.extra(boolean, SignalType::boolean(), reuse, r);
                if r.gen_bool(0.5) {
                    w.push(Feed::Site, ty);
                    w.extra(same_class, sibling_type(ty, r), reuse, r);
                } else {
                    w.extra(same_class, sibling_type(ty, r), reuse, r);
                    w.push(Feed::Site, ty);
                }
            }
            Op::Divide => {
                w.push(Feed::Site, ty);
                w.extra(same_class, sibling_type(ty, r), reuse, r);
            }
            Op::IfAction => {
                if cfg.max_depth < 1 {
                    return None;
                }
                w.extra(boolean, SignalType::boolean(), reuse, r);
                w.push(Feed::Site, ty);
                let id = m.next_id() + w.sources.len() as u32;
                body = Some(Body::Subsystem(composite_body(
                    &format!("{}_sub{id}", m.name),
                    ty,
                    period,
                    r,
                )));
            }
            Op::ModelRef => {
                w.push(Feed::Site, ty);
                let fits: Vec<&Reference> = m
                    .references
                    .iter()
                    .filter(|x| {
                        x.graph
                            .interface(catalog)
                            .is_some_and(|i| i.inputs == [ty] && i.output == ty)
                    })
                    .collect();
                let full = m.references.len() >= cfg.max_references;
                let reference = if !fits.is_empty() && (full || r.gen_bool(0.5)) {
                    fits[r.gen_range(0..fits.len())].clone()
                } else if !full {
                    let name = format!("model{}", m.references.len());
                    let graph = composite_body(&name, ty, period, r);
                    Reference { name, graph }
                } else {
                    return None;
                };
                b.params.model = Some(reference.name.clone());
                body = Some(Body::Reference(reference));
            }
            _ => match kind.arity {
                Arity::Fixed(1) => w.push(Feed::Site, ty),
                Arity::Variadic { min, max } => {
                    let hi = max.min(cfg.max_fan_in).max(min);
                    let n = r.gen_range(cfg.min_fan_in.clamp(min, hi)..=hi);
                    w.push(Feed::Site, ty);
                    let bits = kind.op == Op::BitToInteger;
                    for _ in 1..n {
                        let fresh = sibling_type(ty, r);
                        if bits {
                            w.extra(boolean, fresh, reuse, r);
                        } else {
                            w.extra(same_class, fresh, reuse, r);
                        }
                    }
                }
                _ => return None,
            },
        }
        if !kind.op.is_composite()
            && w.types.iter().enumerate().any(|(i, t)| {
                kind.input_spec(i as u32)
                    .is_some_and(|s| !s.constraint.admits(*t))
            })
        {
            return None;
        }
        b.output_type = if kind.op.is_composite() {
            ty
        } else {
            kind.infer_output_type(&w.types).ok()?
        };
        let out = b.output_type;
        let p = &mut b.params;
        match kind.op {
            Op::Bias | Op::Gain => p.value = Some(random_value(out, r)),
            Op::CompareToConstant => {
                p.compare = Some(CompareOp::ALL[r.gen_range(0..6)]);
                p.value = Some(random_value(w.types[0], r));
            }
            Op::CompareToZero => p.compare = Some(CompareOp::ALL[r.gen_range(0..6)]),
            Op::BitClear | Op::BitSet => p.bit = Some(r.gen_range(0..out.width())),
            Op::Bitwise => p.bitwise = Some(BitwiseOp::ALL[r.gen_range(0..6)]),
            Op::MinMax => {
                p.minmax = Some(if r.gen_bool(0.5) {
                    MinMaxMode::Min
                } else {
                    MinMaxMode::Max
                })
            }
            Op::Add => {
                let signs: String = (0..w.types.len())
                    .map(|k| if k > 0 && r.gen_bool(0.3) { '-' } else { '+' })
                    .collect();
                p.signs = Some(signs);
            }
            _ => {}
        }
        if matches!(kind.arity, Arity::Variadic { .. }) {
            p.inputs = Some(w.types.len() as u32);
        }
        Some(NewBlock {
            instance: b,
            inputs: w.inputs,
            sources: w.sources,
            body,
        })
    }

    fn added_nodes(new: &NewBlock) -> usize {
        1 + new.sources.len()
            + match &new.body {
                Some(Body::Subsystem(g)) => g.metrics().node_count,
                Some(Body::Reference(r)) => r.graph.metrics().node_count,
                None => 0,
            }
    }

    /// One guided insertion at `site`. Returns the new block's id.
    fn place(
        &mut self,
        kind: &BlockKind,
        site: PortRef,
        c: &ConstraintInfo,
        cap: usize,
    ) -> Option<BlockId> {
        let new = self.build(kind, site, c.required_period)?;
        if !c.admissible_types.contains(&new.instance.output_type) {
            return None;
        }
        let mut extra = Self::added_nodes(&new);
        if let Some(Body::Reference(r)) = &new.body {
            if self.m.reference(&r.name).is_some() {
                extra -= r.graph.metrics().node_count;
            }
        }
        if self.node_count() + extra > cap {
            return None;
        }
        let (g, id) = insert_block(&self.m, &Site::top(site), new, self.catalog).ok()?;
        self.m = g;
        Some(id)
    }

    /// Terminates `site` with a fresh Outport.
    fn terminate(&mut self, site: PortRef, cap: usize) -> bool {
        if self.node_count() + 1 > cap {
            return false;
        }
        let Some(src) = self.m.block(site.block) else {
            return false;
        };
        let mut o =
            BlockInstance::new(0, "Outport", src.output_type).with_period(src.sample_period);
        o.params.port = Some(self.next_outport());
        let mut g = self.m.clone();
        let id = g.push_block(o);
        g.connect(site, PortRef::new(id, 0));
        if crate::model::validate(&g, self.catalog).is_empty() {
            self.m = g;
            true
        } else {
            false
        }
    }

    /// Adds a fresh Constant -> Outport pair when guidance has excluded
    /// every existing net.
    fn reseed(&mut self, cap: usize) -> bool {
        if self.node_count() + 2 > cap {
            return false;
        }
        let ty = random_type(&mut self.rng);
        let mut c = BlockInstance::new(0, "Constant", ty);
        c.params.value = Some(random_value(ty, &mut self.rng));
        let mut o = BlockInstance::new(0, "Outport", ty);
        o.params.port = Some(self.next_outport());
        let mut g = self.m.clone();
        let c = g.push_block(c);
        let o = g.push_block(o);
        g.connect(PortRef::out(c), PortRef::new(o, 0));
        if crate::model::validate(&g, self.catalog).is_empty() {
            self.m = g;
            true
        } else {
            false
        }
    }

    fn chained_constraint(&self, round: &ConstraintInfo, site: PortRef) -> Option<ConstraintInfo> {
        let b = self.m.block(site.block)?;
        let mut c = round.clone();
        c.site = Some(Site::top(site));
        c.driver_kind = b.kind.clone();
        c.ty = b.output_type;
        c.admissible_types = guidance::admissible_types(&self.m, site, self.catalog);
        if c.admissible_types.is_empty() {
            c.admissible_types.push(c.ty);
        }
        Some(c)
    }
}

/// The smallest closed design: one Constant feeding one Outport.
pub fn seed_model(r: &mut FuzzRng) -> ModelGraph {
    let ty = random_type(r);
    let mut g = ModelGraph::new("top");
    let mut c = BlockInstance::new(0, "Constant", ty);
    c.params.value = Some(random_value(ty, r));
    let c = g.push_block(c);
    let mut o = BlockInstance::new(0, "Outport", ty);
    o.params.port = Some(0);
    let o = g.push_block(o);
    g.connect(PortRef::out(c), PortRef::new(o, 0));
    g
}

/// Grows a model to the configured size. Guidance runs once per round and
/// each round chains up to `b_max` blocks from the guided net.
pub fn generate_model(
    cfg: &GenerationConfig,
    catalog: &BlockCatalog,
    matrix: &ProbabilityMatrix,
    guidance: &mut Guidance<'_>,
) -> Result<ModelGraph, GenerationError> {
    cfg.check()?;
    let mut rng = rng::seeded(cfg.seed);
    let m = seed_model(&mut rng);
    let mut g = Grower {
        cfg,
        catalog,
        rng,
        m,
    };
    let (lo, hi) = cfg.bounds();
    let mut first = true;
    let mut stalls = 0usize;
    let stall_limit = cfg.block_count_target.max(8);
    for _ in 0..cfg.hdl_max {
        if g.node_count() >= cfg.block_count_target {
            break;
        }
        let round = match guidance(&g.m, &mut g.rng) {
            Ok(c) => c,
            Err(GuidanceError::NoInsertionPoint) => {
                if g.reseed(hi) {
                    continue;
                }
                stalls += 1;
                if stalls > stall_limit {
                    return Err(GenerationError::GenerationStalled(stalls));
                }
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let Some(mut site) = round.site.as_ref().map(|s| s.net) else {
            continue;
        };
        let mut c = round.clone();
        for _ in 0..cfg.b_max {
            if g.node_count() >= cfg.block_count_target {
                break;
            }
            let current = if first {
                None
            } else {
                Some(c.driver_kind.as_str())
            };
            let kind = match choose_next_kind(matrix, current, &c, catalog, &mut g.rng) {
                Ok(k) => Some(k),
                Err(GenerationError::NoEligibleKind) => {
                    let mut wide = c.clone();
                    wide.admissible_types = guidance::widen_to_unsigned(c.ty);
                    wide.admissible_types
                        .retain(|t| c.admissible_types.contains(t) || t.width() >= c.ty.width());
                    choose_next_kind(matrix, current, &wide, catalog, &mut g.rng)
                        .ok()
                        .inspect(|_k| {
                            c = wide;
                        })
                }
                Err(e) => return Err(e),
            };
            let placed = kind.and_then(|k| g.place(k, site, &c, hi));
            match placed {
                Some(id) => {
                    first = false;
                    stalls = 0;
                    site = PortRef::out(id);
                    match g.chained_constraint(&round, site) {
                        Some(next) => c = next,
                        None => break,
                    }
                }
                None => {
                    if kind.is_none() && g.terminate(site, hi) {
                        stalls = 0;
                    } else {
                        stalls += 1;
                    }
                    if stalls > stall_limit * 4 {
                        return Err(GenerationError::GenerationStalled(stalls));
                    }
                    break;
                }
            }
        }
    }
    let n = g.node_count();
    if n < lo || n > hi {
        return Err(GenerationError::GenerationStalled(stalls));
    }
    Ok(g.m)
}

/// [`generate_model`] with the default matrix and syntax guidance.
pub fn generate_default(
    cfg: &GenerationConfig,
    catalog: &BlockCatalog,
) -> Result<ModelGraph, GenerationError> {
    let matrix = default_matrix(catalog);
    let mut guide = syntax_guidance(catalog);
    generate_model(cfg, catalog, &matrix, &mut guide)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    fn cat() -> BlockCatalog {
        BlockCatalog::standard()
    }

    fn constraint(ty: SignalType, admissible: Vec<SignalType>) -> ConstraintInfo {
        ConstraintInfo {
            net: "n0".into(),
            span: Default::default(),
            site: None,
            driver_kind: "Constant".into(),
            ty,
            admissible_types: admissible,
            required_period: SamplePeriod::BASE,
            forbidden_kinds: ["Constant", "Inport", "StimulusSource", "Outport"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    #[test]
    fn default_rows_are_normalized() {
        let m = default_matrix(&cat());
        for k in std::iter::once(None).chain(m.kinds().iter().map(|k| Some(k.as_str()))) {
            let s: f64 = m.row(k).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert_eq!(m.get(Some("Add"), "Add"), Some(0.0));
    }

    #[test]
    fn overrides_keep_rows_normalized() {
        let m = default_matrix(&cat())
            .with_overrides(r#"{"matrix": {"Add": {"Gain": 5.0, "Add": 3.0}}}"#)
            .unwrap();
        let row = m.row(Some("Add")).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.get(Some("Add"), "Add"), Some(0.0));
        assert!(m.get(Some("Add"), "Gain").unwrap() > 0.5);
        assert!(default_matrix(&cat())
            .with_overrides(r#"{"matrix": {"Nope": {}}}"#)
            .is_err());
    }

    #[test]
    fn singleton_support() {
        let c = cat();
        let kinds = vec!["Gain".to_string(), "Add".to_string()];
        let m = ProbabilityMatrix::new(kinds, vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]])
            .unwrap();
        let u = SignalType::ufix(4);
        let info = constraint(u, vec![u]);
        let mut r = rng::seeded(3);
        for _ in 0..50 {
            assert_eq!(
                choose_next_kind(&m, None, &info, &c, &mut r).unwrap().name,
                "Gain"
            );
        }
    }

    #[test]
    fn self_and_rate_are_excluded() {
        let rates = [("Bias".to_string(), SamplePeriod::ticks(2))]
            .into_iter()
            .collect();
        let c = cat().with_rates(&rates).unwrap();
        let kinds: Vec<String> = ["Gain", "Bias", "Add"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let m = ProbabilityMatrix::new(kinds, vec![vec![1.0; 3]; 4]).unwrap();
        let u = SignalType::ufix(4);
        let info = constraint(u, (4..=64).map(SignalType::ufix).collect());
        let mut r = rng::seeded(9);
        for _ in 0..100 {
            assert_eq!(
                choose_next_kind(&m, Some("Add"), &info, &c, &mut r)
                    .unwrap()
                    .name,
                "Gain"
            );
        }
    }

    #[test]
    fn two_blocks_make_constant_to_outport() {
        let c = cat();
        let m = generate_default(&GenerationConfig::with_seed(4, 2), &c).unwrap();
        let kinds: Vec<&str> = m.blocks.iter().map(|b| b.kind.as_str()).collect();
        assert_eq!(kinds, vec!["Constant", "Outport"]);
    }

    #[test]
    fn same_seed_same_json() {
        let c = cat();
        let cfg = GenerationConfig::with_seed(11, 30);
        let a = generate_default(&cfg, &c).unwrap();
        let b = generate_default(&cfg, &c).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(validate(&a, &c).is_empty());
        let n = a.metrics().node_count;
        assert!((27..=33).contains(&n), "{n}");
    }

    #[test]
    fn bad_config() {
        let c = cat();
        let cfg = GenerationConfig {
            block_count_target: 1,
            ..Default::default()
        };
        assert!(matches!(
            generate_default(&cfg, &c),
            Err(GenerationError::Config(_))
        ));
    }
}
