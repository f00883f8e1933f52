// SPDX-License-Identifier: Apache-2.0

//! Self-checking testbenches. Each one holds reset for the interpreter's
//! reset cycles, then per cycle drives the stimulus, lets the logic settle,
//! prints every output as `<name>=<hex>@<cycle>`, compares it with the
//! golden value (printing `MISMATCH <name> <cycle>` on a difference) and
//! pulses the clock.

use std::fmt::Write as _;

use crate::hdl::{vhdl_type, Dialect, Dir, HType, HdlDesign, Lit, Port};
use crate::interp::{Stimulus, Trace, RESET_CYCLES};
use crate::model::BlockId;

/// Name of the testbench top unit.
pub const TB_NAME: &str = "blockfuzz_tb";

fn data_ports(design: &HdlDesign) -> (Vec<(&Port, BlockId)>, Vec<&Port>) {
    let Some(top) = design.ast.top() else {
        return (Vec::new(), Vec::new());
    };
    let ins = top
        .ports
        .iter()
        .filter(|p| p.dir == Dir::In)
        .filter_map(|p| {
            p.name
                .strip_prefix("in")
                .and_then(|d| d.parse().ok())
                .map(|id| (p, id))
        })
        .collect();
    let outs = top.ports.iter().filter(|p| p.dir == Dir::Out).collect();
    (ins, outs)
}

fn input_at(s: &Stimulus, id: BlockId, t: usize) -> u128 {
    s.inputs
        .get(&id)
        .and_then(|v| v.get(t))
        .copied()
        .unwrap_or(0) as u128
}

fn golden_at(golden: &Trace, name: &str, t: usize) -> Option<u128> {
    golden
        .output(name)
        .and_then(|o| o.values.get(t))
        .map(|v| *v as u128)
}

/// Testbench source in the design's dialect.
pub fn make_testbench(design: &HdlDesign, stimulus: &Stimulus, golden: &Trace) -> String {
    match design.dialect {
        Dialect::Verilog => verilog(design, stimulus, golden, false),
        Dialect::SystemVerilog => verilog(design, stimulus, golden, true),
        Dialect::Vhdl => vhdl(design, stimulus, golden),
    }
}

/// File name the testbench is written under.
pub fn testbench_file(dialect: Dialect) -> String {
    format!("tb.{}", dialect.extension())
}

fn vlit(ty: HType, bits: u128) -> String {
    crate::hdl::verilog_lit(&Lit::new(
        HType {
            sign: crate::types::Signedness::Unsigned,
            ..ty
        },
        bits,
    ))
    .replace("'s", "'")
}

fn vdecl(ty: HType) -> String {
    if ty.is_bool() {
        String::new()
    } else {
        format!("[{}:0] ", ty.width - 1)
    }
}

fn verilog(design: &HdlDesign, s: &Stimulus, golden: &Trace, sv: bool) -> String {
    let (ins, outs) = data_ports(design);
    let (reg, wire) = if sv {
        ("logic", "logic")
    } else {
        ("reg", "wire")
    };
    let mut o = String::new();
    let _ = writeln!(o, "`timescale 1ns/1ps");
    let _ = writeln!(o, "module {TB_NAME};");
    let _ = writeln!(o, "  {reg} clk = 1'b0;");
    let _ = writeln!(o, "  {reg} rst = 1'b1;");
    for (p, _) in &ins {
        let _ = writeln!(o, "  {reg} {}{} = {};", vdecl(p.ty), p.name, vlit(p.ty, 0));
    }
    for p in &outs {
        let _ = writeln!(o, "  {wire} {}{};", vdecl(p.ty), p.name);
    }
    let _ = writeln!(o, "  integer errors = 0;");
    let conns: Vec<String> = std::iter::once("clk")
        .chain(std::iter::once("rst"))
        .map(str::to_string)
        .chain(ins.iter().map(|(p, _)| p.name.clone()))
        .chain(outs.iter().map(|p| p.name.clone()))
        .map(|n| format!(".{n}({n})"))
        .collect();
    let _ = writeln!(o, "  {} dut ({});", design.top, conns.join(", "));
    let _ = writeln!(o, "  initial begin");
    let _ = writeln!(o, "    $display(\"# reset={RESET_CYCLES}\");");
    let _ = writeln!(
        o,
        "    repeat ({RESET_CYCLES}) begin #5 clk = 1'b1; #5 clk = 1'b0; end"
    );
    let _ = writeln!(o, "    rst = 1'b0;");
    for t in 0..s.cycles {
        for (p, id) in &ins {
            let _ = writeln!(o, "    {} = {};", p.name, vlit(p.ty, input_at(s, *id, t)));
        }
        let _ = writeln!(o, "    #1;");
        for p in &outs {
            let _ = writeln!(o, "    $display(\"{}=%h@{t}\", {});", p.name, p.name);
            if let Some(g) = golden_at(golden, &p.name, t) {
                let _ = writeln!(
                    o,
                    "    if ({} !== {}) begin $display(\"MISMATCH {} {t}\"); errors = errors + 1; end",
                    p.name,
                    vlit(p.ty, g),
                    p.name
                );
            }
        }
        let _ = writeln!(o, "    #4 clk = 1'b1; #5 clk = 1'b0;");
    }
    let _ = writeln!(o, "    $finish;");
    let _ = writeln!(o, "  end");
    let _ = writeln!(o, "endmodule");
    o
}

fn vhdl_bits(ty: HType, bits: u128) -> String {
    if ty.is_bool() {
        return format!("'{}'", bits & 1);
    }
    let b: String = (0..ty.width)
        .rev()
        .map(|k| if (bits >> k) & 1 == 1 { '1' } else { '0' })
        .collect();
    format!("\"{b}\"")
}

fn vhdl_slv(p: &Port) -> String {
    if p.ty.is_bool() {
        format!("std_logic_vector'(0 => {})", p.name)
    } else {
        format!("std_logic_vector({})", p.name)
    }
}

fn vhdl(design: &HdlDesign, s: &Stimulus, golden: &Trace) -> String {
    let (ins, outs) = data_ports(design);
    let mut o = String::new();
    let _ = writeln!(o, "library ieee;");
    let _ = writeln!(o, "use ieee.std_logic_1164.all;");
    let _ = writeln!(o, "use ieee.numeric_std.all;");
    let _ = writeln!(o, "use std.textio.all;");
    let _ = writeln!(o);
    let _ = writeln!(o, "entity {TB_NAME} is");
    let _ = writeln!(o, "end entity;");
    let _ = writeln!(o);
    let _ = writeln!(o, "architecture sim of {TB_NAME} is");
    let _ = writeln!(o, "  signal clk : std_logic := '0';");
    let _ = writeln!(o, "  signal rst : std_logic := '1';");
    for (p, _) in &ins {
        let init = if p.ty.is_bool() {
            "'0'".to_string()
        } else {
            "(others => '0')".to_string()
        };
        let _ = writeln!(o, "  signal {} : {} := {init};", p.name, vhdl_type(p.ty));
    }
    for p in &outs {
        let _ = writeln!(o, "  signal {} : {};", p.name, vhdl_type(p.ty));
    }
    let _ = writeln!(o, "begin");
    let conns: Vec<String> = ["clk", "rst"]
        .iter()
        .map(|s| s.to_string())
        .chain(ins.iter().map(|(p, _)| p.name.clone()))
        .chain(outs.iter().map(|p| p.name.clone()))
        .map(|n| format!("{n} => {n}"))
        .collect();
    let _ = writeln!(
        o,
        "  dut: entity work.{} port map ({});",
        design.top,
        conns.join(", ")
    );
    let _ = writeln!(o, "  stim: process");
    let _ = writeln!(o, "    variable l : line;");
    let _ = writeln!(o, "  begin");
    let _ = writeln!(
        o,
        "    write(l, string'(\"# reset={RESET_CYCLES}\")); writeline(output, l);"
    );
    let _ = writeln!(
        o,
        "    for i in 1 to {RESET_CYCLES} loop wait for 5 ns; clk <= '1'; wait for 5 ns; clk <= '0'; end loop;"
    );
    let _ = writeln!(o, "    rst <= '0';");
    for t in 0..s.cycles {
        for (p, id) in &ins {
            let v = vhdl_bits(p.ty, input_at(s, *id, t));
            let rhs = if p.ty.is_bool() {
                v
            } else {
                format!(
                    "{}'({v})",
                    if p.ty.is_signed() {
                        "signed"
                    } else {
                        "unsigned"
                    }
                )
            };
            let _ = writeln!(o, "    {} <= {rhs};", p.name);
        }
        let _ = writeln!(o, "    wait for 1 ns;");
        for p in &outs {
            let _ = writeln!(
                o,
                "    write(l, string'(\"{}=\") & to_hstring({}) & string'(\"@{t}\")); writeline(output, l);",
                p.name,
                vhdl_slv(p)
            );
            if let Some(g) = golden_at(golden, &p.name, t) {
                let lhs = if p.ty.is_bool() {
                    p.name.clone()
                } else {
                    vhdl_slv(p)
                };
                let _ = writeln!(
                    o,
                    "    if {lhs} /= {} then write(l, string'(\"MISMATCH {} {t}\")); writeline(output, l); end if;",
                    vhdl_bits(p.ty, g),
                    p.name
                );
            }
        }
        let _ = writeln!(
            o,
            "    wait for 4 ns; clk <= '1'; wait for 5 ns; clk <= '0';"
        );
    }
    let _ = writeln!(o, "    std.env.finish;");
    let _ = writeln!(o, "    wait;");
    let _ = writeln!(o, "  end process;");
    let _ = writeln!(o, "end architecture;");
    o
}

/// C++ driver for a CXXRTL model of the design (`write_cxxrtl` output
/// included as `design.cpp`), printing the same trace grammar.
pub fn make_cxxrtl_driver(design: &HdlDesign, s: &Stimulus, golden: &Trace) -> String {
    let (ins, outs) = data_ports(design);
    let mangle = |n: &str| format!("p_{}", n.replace('_', "__"));
    let top = format!("cxxrtl_design::{}", mangle(&design.top));
    let mut o = String::new();
    let _ = writeln!(o, "#include <cstdio>");
    let _ = writeln!(o, "#include <cstdint>");
    let _ = writeln!(o, "#include \"design.cpp\"");
    let _ = writeln!(o);
    let _ = writeln!(o, "int main() {{");
    let _ = writeln!(o, "  {top} dut;");
    let _ = writeln!(o, "  int errors = 0;");
    let _ = writeln!(o, "  std::printf(\"# reset={RESET_CYCLES}\\n\");");
    let _ = writeln!(o, "  dut.p_rst.set<bool>(true);");
    for (p, _) in &ins {
        let _ = writeln!(o, "  dut.{}.set<uint64_t>(0);", mangle(&p.name));
    }
    let _ = writeln!(o, "  for (int i = 0; i < {RESET_CYCLES}; i++) {{");
    let _ = writeln!(o, "    dut.p_clk.set<bool>(false); dut.step();");
    let _ = writeln!(o, "    dut.p_clk.set<bool>(true); dut.step();");
    let _ = writeln!(o, "  }}");
    let _ = writeln!(o, "  dut.p_rst.set<bool>(false);");
    for t in 0..s.cycles {
        for (p, id) in &ins {
            let _ = writeln!(
                o,
                "  dut.{}.set<uint64_t>({}ull);",
                mangle(&p.name),
                input_at(s, *id, t)
            );
        }
        let _ = writeln!(o, "  dut.p_clk.set<bool>(false); dut.step();");
        for p in &outs {
            let digits = p.ty.width.div_ceil(4);
            let name = mangle(&p.name);
            let _ = writeln!(
                o,
                "  {{ uint64_t v = dut.{name}.get<uint64_t>(); std::printf(\"{}=%0{digits}llx@{t}\\n\", (unsigned long long)v);",
                p.name
            );
            if let Some(g) = golden_at(golden, &p.name, t) {
                let _ = writeln!(
                    o,
                    "    if (v != {g}ull) {{ std::printf(\"MISMATCH {} {t}\\n\"); errors++; }}",
                    p.name
                );
            }
            let _ = writeln!(o, "  }}");
        }
        let _ = writeln!(o, "  dut.p_clk.set<bool>(true); dut.step();");
    }
    let _ = writeln!(o, "  return 0;");
    let _ = writeln!(o, "}}");
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::BlockCatalog;
    use crate::hdl::emit;
    use crate::interp::{make_stimulus, simulate};
    use crate::model::{BlockInstance, ModelGraph, PortRef};
    use crate::types::SignalType;

    fn gain_model() -> ModelGraph {
        let u = SignalType::ufix(6);
        let mut g = ModelGraph::new("top");
        let mut i = BlockInstance::new(0, "Inport", u);
        i.params.port = Some(0);
        let i = g.push_block(i);
        let mut k = BlockInstance::new(0, "Gain", u);
        k.params.value = Some(3);
        let k = g.push_block(k);
        let mut o = BlockInstance::new(0, "Outport", u);
        o.params.port = Some(0);
        let o = g.push_block(o);
        g.connect(PortRef::out(i), PortRef::new(k, 0));
        g.connect(PortRef::out(k), PortRef::new(o, 0));
        g
    }

    #[test]
    fn one_trace_line_per_output_and_cycle() {
        let cat = BlockCatalog::standard();
        let m = gain_model();
        let s = make_stimulus(&m, &cat, 1, 3);
        let golden = simulate(&m, &s, &cat);
        for d in Dialect::ALL {
            let design = emit(&m, d, &cat).unwrap();
            let tb = make_testbench(&design, &s, &golden);
            let prints = tb.lines().filter(|l| l.contains("out2=")).count();
            assert_eq!(prints, 3, "{d}\n{tb}");
            assert_eq!(tb.matches("MISMATCH out2").count(), 3, "{d}");
        }
        let design = emit(&m, Dialect::Verilog, &cat).unwrap();
        let cpp = make_cxxrtl_driver(&design, &s, &golden);
        assert_eq!(cpp.matches("out2=%02llx").count(), 3, "{cpp}");
    }
}
