// SPDX-License-Identifier: Apache-2.0

//! Transactional block insertion.

use super::{validate, BlockId, BlockInstance, ModelGraph, PortRef, Reference, Subsystem};
use crate::catalog::{BlockCatalog, Op};
use crate::error::ModelError;
use crate::model::{Rule, Violation};

/// A net (single output port) inside the graph reached by descending
/// through the If Action subsystems named in `scope`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub scope: Vec<BlockId>,
    pub net: PortRef,
}

impl Site {
    pub fn top(net: PortRef) -> Self {
        Site {
            scope: Vec::new(),
            net,
        }
    }
}

/// Where one input of the inserted block comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Feed {
    /// The spliced net itself.
    Site,
    /// Another existing net in the same graph.
    Net(PortRef),
    /// The n-th entry of [`NewBlock::sources`].
    Source(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Subsystem(ModelGraph),
    /// A model definition added to the owning graph if not already present.
    Reference(Reference),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewBlock {
    pub instance: BlockInstance,
    /// One feed per input port, in port order.
    pub inputs: Vec<Feed>,
    /// Fresh source blocks created alongside the new block.
    pub sources: Vec<BlockInstance>,
    pub body: Option<Body>,
}

impl NewBlock {
    /// A single-input block fed by the spliced net.
    pub fn unary(instance: BlockInstance) -> Self {
        NewBlock {
            instance,
            inputs: vec![Feed::Site],
            sources: Vec::new(),
            body: None,
        }
    }
}

/// Splices `new` into the net named by `at`: every former consumer of the
/// net now reads the new block's output, and the new block's inputs are
/// wired per [`NewBlock::inputs`]. Downstream types are re-inferred. The
/// input graph is untouched; an invalid result is rejected as a whole.
pub fn insert_block(
    m: &ModelGraph,
    at: &Site,
    new: NewBlock,
    catalog: &BlockCatalog,
) -> Result<(ModelGraph, BlockId), ModelError> {
    let mut result = m.clone();
    let id = {
        let g = scope_mut(&mut result, &at.scope)?;
        let driver = g
            .block(at.net.block)
            .ok_or(ModelError::NoSuchBlock(at.net.block))?;
        let kind = catalog.lookup_kind(&driver.kind)?;
        if !kind.has_output() || at.net.port >= kind.outputs {
            return Err(ModelError::NoSuchNet(at.net.to_string()));
        }
        splice(g, at.net, new)?
    };
    retype(&mut result, catalog);
    let violations = validate(&result, catalog);
    if violations.is_empty() {
        Ok((result, id))
    } else {
        Err(ModelError::ConstraintViolated(violations))
    }
}

fn scope_mut<'a>(
    m: &'a mut ModelGraph,
    scope: &[BlockId],
) -> Result<&'a mut ModelGraph, ModelError> {
    let mut g = m;
    for &id in scope {
        g = g.subsystem_mut(id).ok_or(ModelError::NoSuchBlock(id))?;
    }
    Ok(g)
}

fn splice(g: &mut ModelGraph, net: PortRef, new: NewBlock) -> Result<BlockId, ModelError> {
    let source_ids: Vec<BlockId> = new.sources.into_iter().map(|s| g.push_block(s)).collect();
    let id = g.push_block(new.instance);
    for c in &mut g.connections {
        if c.src == net {
            c.src = PortRef::out(id);
        }
    }
    for (port, feed) in new.inputs.iter().enumerate() {
        let src = match feed {
            Feed::Site => net,
            Feed::Net(p) => *p,
            Feed::Source(i) => PortRef::out(
                *source_ids
                    .get(*i)
                    .ok_or_else(|| structure(id, "missing source"))?,
            ),
        };
        g.connect(src, PortRef::new(id, port as u32));
    }
    match new.body {
        None => {}
        Some(Body::Subsystem(body)) => g.subsystems.push(Subsystem {
            block: id,
            graph: body,
        }),
        Some(Body::Reference(r)) => match g.reference(&r.name) {
            None => g.references.push(r),
            Some(existing) if *existing == r.graph => {}
            Some(_) => {
                return Err(structure(
                    id,
                    "reference name already bound to another model",
                ))
            }
        },
    }
    Ok(id)
}

fn structure(id: BlockId, detail: &str) -> ModelError {
    ModelError::ConstraintViolated(vec![Violation {
        rule: Rule::Structure,
        scope: "top".into(),
        ids: vec![id],
        detail: detail.into(),
    }])
}

/// Re-infers output types after rewiring. Subsystem inports follow their
/// drivers; shared reference bodies are left alone so a mismatch surfaces
/// as a validation error.
pub(crate) fn retype(m: &mut ModelGraph, catalog: &BlockCatalog) {
    let mut scopes = Vec::new();
    retype_graph(m, &mut scopes, catalog);
}

fn retype_graph(g: &mut ModelGraph, scopes: &mut Vec<ModelGraph>, catalog: &BlockCatalog) {
    let passes = g.blocks.len() + 2;
    for _ in 0..passes {
        let mut changed = false;
        let order = g
            .eval_order(catalog)
            .unwrap_or_else(|| g.blocks.iter().map(|b| b.id).collect());
        for id in order {
            let b = g.block(id).expect("order lists blocks");
            let Ok(kind) = catalog.lookup_kind(&b.kind) else {
                continue;
            };
            if kind.op.is_source() {
                continue;
            }
            let scope_refs: Vec<&ModelGraph> = scopes.iter().collect();
            let arity = g.arity_of(b, kind, &scope_refs);
            let drivers = g.input_drivers(id, arity);
            let Some(types) = drivers
                .iter()
                .map(|d| d.and_then(|p| g.block(p.block)).map(|s| s.output_type))
                .collect::<Option<Vec<_>>>()
            else {
                continue;
            };
            let new_ty = match kind.op {
                Op::IfAction => {
                    let mut parent = g.clone();
                    parent.subsystems.clear();
                    let Some(body) = g.subsystem_mut(id) else {
                        continue;
                    };
                    let mut inports: Vec<BlockId> = body
                        .blocks
                        .iter()
                        .filter(|c| c.kind == "Inport" || c.kind == "StimulusSource")
                        .map(|c| (c.params.port.unwrap_or(u32::MAX), c.id))
                        .collect::<std::collections::BTreeSet<_>>()
                        .into_iter()
                        .map(|(_, cid)| cid)
                        .collect();
                    inports.truncate(types.len().saturating_sub(1));
                    for (cid, ty) in inports.into_iter().zip(types.iter().skip(1)) {
                        body.block_mut(cid).expect("listed").output_type = *ty;
                    }
                    scopes.push(parent);
                    retype_graph(body, scopes, catalog);
                    scopes.pop();
                    body.interface(catalog).map(|i| i.output)
                }
                Op::ModelRef => {
                    let scope_refs: Vec<&ModelGraph> = scopes.iter().collect();
                    b.params
                        .model
                        .as_deref()
                        .and_then(|n| super::resolve_in(g, &scope_refs, n))
                        .and_then(|body| body.interface(catalog))
                        .map(|i| i.output)
                }
                _ => kind.infer_output_type(&types).ok(),
            };
            if let Some(ty) = new_ty {
                let b = g.block_mut(id).expect("exists");
                if b.output_type != ty {
                    b.output_type = ty;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
