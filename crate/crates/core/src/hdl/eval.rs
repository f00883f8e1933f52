// SPDX-License-Identifier: Apache-2.0

//! Two-state cycle simulator over the syntax tree, mirroring what an
//! external simulator does with the emitted text and a testbench.

use std::collections::HashMap;

use super::ast::*;
use crate::error::HdlError;
use crate::interp::{Stimulus, Trace, TraceOutput, RESET_CYCLES};
use crate::model::BlockId;

struct Inst {
    regs: HashMap<String, u128>,
    children: HashMap<String, Inst>,
}

struct Frame {
    env: HashMap<String, u128>,
    children: HashMap<String, Frame>,
}

fn undefined(what: &str) -> HdlError {
    HdlError::UnsupportedConstruct {
        kind: what.to_string(),
        dialect: "ast".into(),
    }
}

struct Sim<'a> {
    modules: HashMap<&'a str, &'a Module>,
}

impl<'a> Sim<'a> {
    fn module(&self, name: &str) -> Result<&'a Module, HdlError> {
        self.modules
            .get(name)
            .copied()
            .ok_or_else(|| undefined(&format!("module {name}")))
    }

    fn instantiate(&self, m: &Module) -> Result<Inst, HdlError> {
        let mut regs = HashMap::new();
        let mut children = HashMap::new();
        for item in &m.items {
            match item {
                Item::Clocked(c) => {
                    for r in &c.regs {
                        regs.insert(r.target.clone(), 0);
                    }
                }
                Item::Instance(i) => {
                    children.insert(i.name.clone(), self.instantiate(self.module(&i.module)?)?);
                }
                _ => {}
            }
        }
        Ok(Inst { regs, children })
    }

    fn comb(
        &self,
        m: &Module,
        st: &Inst,
        inputs: HashMap<String, u128>,
    ) -> Result<Frame, HdlError> {
        let mut env = inputs;
        env.extend(st.regs.iter().map(|(k, v)| (k.clone(), *v)));
        let mut children = HashMap::new();
        for item in &m.items {
            match item {
                Item::Assign(a) => {
                    let ty = m.type_of(&a.target).ok_or_else(|| undefined(&a.target))?;
                    let v = eval_rhs(m, &env, ty, &a.rhs)?;
                    env.insert(a.target.clone(), v);
                }
                Item::Comb(c) => {
                    let v = if value(&env, &c.cond)? & 1 == 1 {
                        value(&env, &c.then)?
                    } else {
                        value(&env, &c.els)?
                    };
                    env.insert(c.target.clone(), v);
                }
                Item::Clocked(_) => {}
                Item::Instance(i) => {
                    let child = self.module(&i.module)?;
                    let mut ins = HashMap::new();
                    for p in child.ports.iter().filter(|p| p.dir == Dir::In) {
                        let (_, a) = i
                            .conns
                            .iter()
                            .find(|(n, _)| *n == p.name)
                            .ok_or_else(|| undefined(&p.name))?;
                        ins.insert(p.name.clone(), value(&env, a)? & p.ty.mask());
                    }
                    let cst = st.children.get(&i.name).ok_or_else(|| undefined(&i.name))?;
                    let fr = self.comb(child, cst, ins)?;
                    for p in child.ports.iter().filter(|p| p.dir == Dir::Out) {
                        let (_, a) = i
                            .conns
                            .iter()
                            .find(|(n, _)| *n == p.name)
                            .ok_or_else(|| undefined(&p.name))?;
                        let target = a
                            .as_net()
                            .ok_or_else(|| undefined("literal bound to output"))?;
                        env.insert(target.to_string(), fr.env[&p.name]);
                    }
                    children.insert(i.name.clone(), fr);
                }
            }
        }
        Ok(Frame { env, children })
    }

    fn tick(&self, m: &Module, st: &mut Inst, fr: &Frame) -> Result<(), HdlError> {
        for item in &m.items {
            match item {
                Item::Clocked(c) => {
                    for r in &c.regs {
                        let reset =
                            fr.env.get(&r.reset).ok_or_else(|| undefined(&r.reset))? & 1 == 1;
                        let enabled = match &r.enable {
                            Some(e) => value(&fr.env, e)? & 1 == 1,
                            None => true,
                        };
                        let ty = m.type_of(&r.target).ok_or_else(|| undefined(&r.target))?;
                        let old = st.regs[&r.target];
                        let next = if reset {
                            r.init & ty.mask()
                        } else if enabled {
                            value(&fr.env, &r.d)? & ty.mask()
                        } else {
                            old
                        };
                        st.regs.insert(r.target.clone(), next);
                    }
                }
                Item::Instance(i) => {
                    let child = self.module(&i.module)?;
                    let cst = st.children.get_mut(&i.name).expect("instantiated");
                    self.tick(child, cst, &fr.children[&i.name])?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn value(env: &HashMap<String, u128>, o: &Operand) -> Result<u128, HdlError> {
    match o {
        Operand::Net(n) => env.get(n).copied().ok_or_else(|| undefined(n)),
        Operand::Lit(l) => Ok(l.bits),
    }
}

fn eval_rhs(m: &Module, env: &HashMap<String, u128>, ty: HType, r: &Rhs) -> Result<u128, HdlError> {
    let tyof = |o: &Operand| m.operand_type(o).ok_or_else(|| undefined("operand"));
    let v = |o: &Operand| value(env, o);
    let ext = |o: &Operand| -> Result<u128, HdlError> { Ok(tyof(o)?.value(v(o)?) as u128) };
    let mask = ty.mask();
    let bits = match r {
        Rhs::Copy(a) => v(a)?,
        Rhs::Unary(UnOp::Not, a) => !v(a)?,
        Rhs::Unary(UnOp::Neg, a) => 0u128.wrapping_sub(v(a)?),
        Rhs::Binary(op, a, b) => {
            let (x, y) = (ext(a)?, ext(b)?);
            match op {
                BinOp::Add => x.wrapping_add(y),
                BinOp::Sub => x.wrapping_sub(y),
                BinOp::Mul => x.wrapping_mul(y),
                BinOp::And => x & y,
                BinOp::Or => x | y,
                BinOp::Xor => x ^ y,
            }
        }
        Rhs::Compare(op, a, b) => {
            let (ta, tb) = (tyof(a)?, tyof(b)?);
            let (x, y) = if ta.is_signed() && tb.is_signed() {
                (ta.value(v(a)?), tb.value(v(b)?))
            } else {
                (v(a)? as i128, v(b)? as i128)
            };
            op.eval(x, y) as u128
        }
        Rhs::Mux(c, a, b) => {
            if v(c)? & 1 == 1 {
                v(a)?
            } else {
                v(b)?
            }
        }
        Rhs::Resize(a) => ext(a)?,
        Rhs::Slice(a, hi, lo) => (v(a)? >> lo) & mask128(hi - lo + 1),
        Rhs::Concat(xs) => {
            let mut acc = 0u128;
            for x in xs {
                let w = tyof(x)?.width;
                acc = if w >= 128 {
                    v(x)?
                } else {
                    (acc << w) | (v(x)? & mask128(w))
                };
            }
            acc
        }
        Rhs::Cast(a) => v(a)?,
        Rhs::SafeDiv(a, b) => {
            let (x, y) = (v(a)?, v(b)?);
            x.checked_div(y).unwrap_or(mask)
        }
    };
    Ok(bits & mask)
}

/// Holds reset for [`RESET_CYCLES`] cycles with all inputs at zero, then
/// applies the stimulus and samples the top outputs before each edge.
pub fn simulate_ast(ast: &HdlAst, s: &Stimulus) -> Result<Trace, HdlError> {
    let sim = Sim {
        modules: ast.modules.iter().map(|m| (m.name.as_str(), m)).collect(),
    };
    let top = ast.top().ok_or_else(|| undefined("empty design"))?;
    let mut st = sim.instantiate(top)?;
    let data_inputs: Vec<(&Port, BlockId)> = top
        .ports
        .iter()
        .filter(|p| p.dir == Dir::In && p.name != "clk" && p.name != "rst")
        .map(|p| {
            let id = p
                .name
                .strip_prefix("in")
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| undefined(&p.name))?;
            Ok((p, id))
        })
        .collect::<Result<_, HdlError>>()?;
    let outs: Vec<&Port> = top.ports.iter().filter(|p| p.dir == Dir::Out).collect();
    let mut outputs: Vec<TraceOutput> = outs
        .iter()
        .map(|p| TraceOutput {
            name: p.name.clone(),
            width: p.ty.width,
            values: Vec::new(),
        })
        .collect();
    for t in 0..RESET_CYCLES + s.cycles {
        let reset = t < RESET_CYCLES;
        let mut ins: HashMap<String, u128> = HashMap::new();
        ins.insert("clk".into(), 0);
        ins.insert("rst".into(), reset as u128);
        for (p, id) in &data_inputs {
            let x = if reset {
                0
            } else {
                let seq = s.inputs.get(id).ok_or_else(|| undefined(&p.name))?;
                seq[t - RESET_CYCLES] as u128
            };
            ins.insert(p.name.clone(), x & p.ty.mask());
        }
        let fr = sim.comb(top, &st, ins)?;
        if !reset {
            for (o, p) in outputs.iter_mut().zip(&outs) {
                o.values.push(fr.env[&p.name] as u64);
            }
        }
        sim.tick(top, &mut st, &fr)?;
    }
    Ok(Trace {
        cycles: s.cycles,
        reset_cycles: RESET_CYCLES,
        outputs,
    })
}
