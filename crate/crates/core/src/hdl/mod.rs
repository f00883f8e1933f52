// SPDX-License-Identifier: Apache-2.0

//! HDL emission, subset parsing and timing analysis.

mod ast;
mod eval;
mod lower;
mod text;
mod timing;
mod verilog;
mod vhdl;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ast::*;
pub use eval::simulate_ast;
pub use timing::{critical_path, optimize, OptimizationChoice, Strategy, TimingReport};
pub(crate) use verilog::lit as verilog_lit;
pub(crate) use vhdl::vtype as vhdl_type;

use crate::catalog::BlockCatalog;
use crate::error::HdlError;
use crate::model::{BlockId, ModelGraph};

/// Default number of pipelining levels offered to [`optimize`].
pub const DEFAULT_LEVELS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdlDesign {
    pub dialect: Dialect,
    pub text: String,
    pub ast: HdlAst,
    pub top: String,
    /// Top-module net name to the model block driving it.
    pub net_map: BTreeMap<String, BlockId>,
}

impl HdlDesign {
    pub fn file_name(&self) -> String {
        format!("design.{}", self.dialect.extension())
    }
}

/// Lowers `m` and renders it. The returned tree carries the spans of the
/// returned text.
pub fn emit(
    m: &ModelGraph,
    dialect: Dialect,
    catalog: &BlockCatalog,
) -> Result<HdlDesign, HdlError> {
    let lowered = lower::lower(m, catalog)?;
    let mut ast = lowered.ast;
    let text = print(&mut ast, dialect);
    let top = ast.top().map(|t| t.name.clone()).unwrap_or_default();
    Ok(HdlDesign {
        dialect,
        text,
        ast,
        top,
        net_map: lowered.net_map,
    })
}

/// Renders `ast`, overwriting its spans with the positions in the result.
pub fn print(ast: &mut HdlAst, dialect: Dialect) -> String {
    match dialect {
        Dialect::Verilog => verilog::print(ast, false),
        Dialect::SystemVerilog => verilog::print(ast, true),
        Dialect::Vhdl => vhdl::print(ast),
    }
}

/// Reads text in the emitted subset of `dialect`.
pub fn parse(text: &str, dialect: Dialect) -> Result<HdlAst, HdlError> {
    match dialect {
        Dialect::Verilog => verilog::parse(text, false),
        Dialect::SystemVerilog => verilog::parse(text, true),
        Dialect::Vhdl => vhdl::parse(text),
    }
}
