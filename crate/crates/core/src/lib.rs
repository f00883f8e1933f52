// SPDX-License-Identifier: Apache-2.0

//! Block-diagram driven fuzzing of HDL synthesis and simulation tools.
//!
//! Models are grown block by block from a probability matrix, lowered to
//! Verilog, VHDL and SystemVerilog, simulated by a reference interpreter,
//! and run through external tools whose results are compared.

pub mod campaign;
pub mod catalog;
pub mod error;
pub mod generator;
pub mod guidance;
pub mod harness;
pub mod hdl;
pub mod interp;
pub mod model;
pub mod reducer;
pub mod rng;
pub mod types;

pub use campaign::{CampaignConfig, CampaignStats};
pub use catalog::{BlockCatalog, BlockGroup, BlockKind, Op};
pub use error::{CatalogError, ModelError, TypeError};
pub use generator::{generate_default, generate_model, GenerationConfig, ProbabilityMatrix};
pub use harness::{Classification, DefectReport, ToolAdapter};
pub use hdl::{Dialect, HdlDesign};
pub use interp::{Stimulus, Trace};
pub use model::{
    validate, BlockId, BlockInstance, ComplexityMetrics, Connection, ModelGraph, PortRef, Rule,
    Violation,
};
pub use reducer::{ReductionResult, TriggerPredicate};
pub use types::{SamplePeriod, SignalType, Signedness};
