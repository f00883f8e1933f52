// SPDX-License-Identifier: Apache-2.0

//! Verilog-2005 and SystemVerilog-2017 printer and subset parser.

use super::ast::*;
use super::text::{lex, Cursor, Tok, Writer};
use crate::error::HdlError;
use crate::model::CompareOp;
use crate::types::Signedness;

fn range(ty: HType) -> String {
    match ty.sign {
        Signedness::Boolean => String::new(),
        Signedness::Unsigned => format!("[{}:0] ", ty.width - 1),
        Signedness::Signed => format!("signed [{}:0] ", ty.width - 1),
    }
}

pub(crate) fn lit(l: &Lit) -> String {
    if l.ty.is_bool() {
        return format!("1'b{}", l.bits & 1);
    }
    let s = if l.ty.is_signed() { "s" } else { "" };
    format!("{}'{s}h{:x}", l.ty.width, l.bits)
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Net(n) => n.clone(),
        Operand::Lit(l) => lit(l),
    }
}

pub(crate) fn compare_sym(op: CompareOp) -> &'static str {
    match op {
        CompareOp::Eq => "==",
        CompareOp::Ne => "!=",
        CompareOp::Lt => "<",
        CompareOp::Le => "<=",
        CompareOp::Gt => ">",
        CompareOp::Ge => ">=",
    }
}

fn bin_sym(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::And => "&",
        BinOp::Or => "|",
        BinOp::Xor => "^",
    }
}

fn rhs(m: &Module, target: HType, r: &Rhs, sv: bool) -> String {
    match r {
        Rhs::Copy(a) => operand(a),
        Rhs::Unary(UnOp::Not, a) => format!("~{}", operand(a)),
        Rhs::Unary(UnOp::Neg, a) => format!("-{}", operand(a)),
        Rhs::Binary(op, a, b) => format!("{} {} {}", operand(a), bin_sym(*op), operand(b)),
        Rhs::Compare(op, a, b) => format!("{} {} {}", operand(a), compare_sym(*op), operand(b)),
        Rhs::Mux(c, a, b) => format!("{} ? {} : {}", operand(c), operand(a), operand(b)),
        Rhs::Resize(a) => {
            let from = m.operand_type(a).unwrap_or(target);
            let k = target.width.saturating_sub(from.width);
            let fill = if from.is_signed() {
                format!("{}[{}]", operand(a), from.width - 1)
            } else {
                "1'b0".into()
            };
            format!("{{{{{k}{{{fill}}}}}, {}}}", operand(a))
        }
        Rhs::Slice(a, hi, lo) => {
            if target.is_bool() && hi == lo {
                format!("{}[{hi}]", operand(a))
            } else {
                format!("{}[{hi}:{lo}]", operand(a))
            }
        }
        Rhs::Concat(xs) => format!(
            "{{{}}}",
            xs.iter().map(operand).collect::<Vec<_>>().join(", ")
        ),
        Rhs::Cast(a) => match (sv, target.is_signed()) {
            (false, true) => format!("$signed({})", operand(a)),
            (false, false) => format!("$unsigned({})", operand(a)),
            (true, true) => format!("signed'({})", operand(a)),
            (true, false) => format!("unsigned'({})", operand(a)),
        },
        Rhs::SafeDiv(a, b) => {
            let ty = m.operand_type(b).unwrap_or(target);
            format!(
                "({} == {}) ? {} : {} / {}",
                operand(b),
                lit(&Lit::zero(ty)),
                lit(&Lit::new(target, u128::MAX)),
                operand(a),
                operand(b)
            )
        }
    }
}

/// Renders the tree and records each module and item start in place.
pub(crate) fn print(ast: &mut HdlAst, sv: bool) -> String {
    let mut w = Writer::new();
    let kw = if sv { "logic" } else { "wire" };
    let n_modules = ast.modules.len();
    for (mi, m) in ast.modules.iter_mut().enumerate() {
        m.span = w.start(0);
        w.push(&format!("module {} (\n", m.name));
        for (k, p) in m.ports.iter().enumerate() {
            let dir = if p.dir == Dir::In { "input" } else { "output" };
            let sep = if k + 1 == m.ports.len() { "" } else { "," };
            w.line(2, &format!("{dir} {kw} {}{}{sep}", range(p.ty), p.name));
        }
        w.line(0, ");");
        let regs: Vec<String> = m.process_targets().into_iter().map(String::from).collect();
        for n in &m.nets {
            let decl = if sv || !regs.contains(&n.name) {
                kw
            } else {
                "reg"
            };
            w.line(2, &format!("{decl} {}{};", range(n.ty), n.name));
        }
        let snapshot = m.clone();
        for item in &mut m.items {
            match item {
                Item::Assign(a) => {
                    let ty = snapshot.type_of(&a.target).unwrap_or(HType::BOOL);
                    a.span = w.start(2);
                    w.push(&format!(
                        "assign {} = {};\n",
                        a.target,
                        rhs(&snapshot, ty, &a.rhs, sv)
                    ));
                }
                Item::Comb(c) => {
                    c.span = w.start(2);
                    w.push(if sv {
                        "always_comb begin\n"
                    } else {
                        "always @* begin\n"
                    });
                    w.line(
                        4,
                        &format!(
                            "if ({}) {} = {};",
                            operand(&c.cond),
                            c.target,
                            operand(&c.then)
                        ),
                    );
                    w.line(4, &format!("else {} = {};", c.target, operand(&c.els)));
                    w.line(2, "end");
                }
                Item::Clocked(c) => {
                    c.span = w.start(2);
                    w.push(if sv {
                        "always_ff @(posedge clk) begin\n"
                    } else {
                        "always @(posedge clk) begin\n"
                    });
                    for r in &c.regs {
                        let ty = snapshot.type_of(&r.target).unwrap_or(HType::BOOL);
                        w.line(
                            4,
                            &format!(
                                "if ({}) {} <= {};",
                                r.reset,
                                r.target,
                                lit(&Lit::new(ty, r.init))
                            ),
                        );
                        match &r.enable {
                            Some(e) => w.line(
                                4,
                                &format!(
                                    "else if ({}) {} <= {};",
                                    operand(e),
                                    r.target,
                                    operand(&r.d)
                                ),
                            ),
                            None => w.line(4, &format!("else {} <= {};", r.target, operand(&r.d))),
                        };
                    }
                    w.line(2, "end");
                }
                Item::Instance(i) => {
                    i.span = w.start(2);
                    w.push(&format!("{} {} (\n", i.module, i.name));
                    for (k, (p, a)) in i.conns.iter().enumerate() {
                        let sep = if k + 1 == i.conns.len() { "" } else { "," };
                        w.line(4, &format!(".{p}({}){sep}", operand(a)));
                    }
                    w.line(2, ");");
                }
            }
        }
        w.line(0, "endmodule");
        if mi + 1 < n_modules {
            w.push("\n");
        }
    }
    w.finish()
}

pub(crate) fn parse(text: &str, sv: bool) -> Result<HdlAst, HdlError> {
    let dialect = if sv {
        Dialect::SystemVerilog
    } else {
        Dialect::Verilog
    };
    let mut c = Cursor::new(lex(text, dialect)?);
    let mut modules = Vec::new();
    if c.at_eof() {
        return c.err("expected `module`");
    }
    while !c.at_eof() {
        modules.push(module(&mut c, sv)?);
    }
    Ok(HdlAst { modules })
}

fn module(c: &mut Cursor, sv: bool) -> Result<Module, HdlError> {
    let span = c.span();
    c.word("module")?;
    let name = c.ident()?;
    c.sym("(")?;
    let mut ports = Vec::new();
    while !c.is_sym(")") {
        let dir = if c.eat_word("input") {
            Dir::In
        } else if c.eat_word("output") {
            Dir::Out
        } else {
            return c.err("expected port direction");
        };
        c.word(if sv { "logic" } else { "wire" })?;
        let ty = htype(c)?;
        ports.push(Port {
            name: c.ident()?,
            dir,
            ty,
        });
        if !c.eat_sym(",") {
            break;
        }
    }
    c.sym(")")?;
    c.sym(";")?;
    let mut nets = Vec::new();
    loop {
        let decl = if sv {
            c.is_word("logic")
        } else {
            c.is_word("wire") || c.is_word("reg")
        };
        if !decl {
            break;
        }
        c.next();
        let ty = htype(c)?;
        nets.push(Net {
            name: c.ident()?,
            ty,
        });
        c.sym(";")?;
    }
    let mut items = Vec::new();
    loop {
        let span = c.span();
        if c.eat_word("endmodule") {
            break;
        }
        if c.eat_word("assign") {
            let target = c.ident()?;
            c.sym("=")?;
            let r = parse_rhs(c, sv)?;
            c.sym(";")?;
            items.push(Item::Assign(Assign {
                target,
                rhs: r,
                span,
            }));
        } else if (sv && c.is_word("always_comb"))
            || (!sv && c.is_word("always") && *c.peek_at(2) == Tok::Sym("*"))
        {
            c.next();
            if !sv {
                c.sym("@")?;
                c.sym("*")?;
            }
            c.word("begin")?;
            c.word("if")?;
            c.sym("(")?;
            let cond = parse_operand(c)?;
            c.sym(")")?;
            let target = c.ident()?;
            c.sym("=")?;
            let then = parse_operand(c)?;
            c.sym(";")?;
            c.word("else")?;
            if c.ident()? != target {
                return c.err("comb process must drive one target");
            }
            c.sym("=")?;
            let els = parse_operand(c)?;
            c.sym(";")?;
            c.word("end")?;
            items.push(Item::Comb(Comb {
                target,
                cond,
                then,
                els,
                span,
            }));
        } else if c.is_word(if sv { "always_ff" } else { "always" }) {
            c.next();
            c.sym("@")?;
            c.sym("(")?;
            c.word("posedge")?;
            c.word("clk")?;
            c.sym(")")?;
            c.word("begin")?;
            let mut regs = Vec::new();
            while !c.eat_word("end") {
                regs.push(reg_update(c)?);
            }
            items.push(Item::Clocked(Clocked { regs, span }));
        } else if matches!(c.peek(), Tok::Ident(_)) {
            let module = c.ident()?;
            let name = c.ident()?;
            c.sym("(")?;
            let mut conns = Vec::new();
            while c.eat_sym(".") {
                let p = c.ident()?;
                c.sym("(")?;
                conns.push((p, parse_operand(c)?));
                c.sym(")")?;
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.sym(")")?;
            c.sym(";")?;
            items.push(Item::Instance(Instance {
                module,
                name,
                conns,
                span,
            }));
        } else {
            return c.err("expected module item");
        }
    }
    Ok(Module {
        name,
        ports,
        nets,
        items,
        span,
    })
}

fn reg_update(c: &mut Cursor) -> Result<RegUpdate, HdlError> {
    c.word("if")?;
    c.sym("(")?;
    let reset = c.ident()?;
    c.sym(")")?;
    let target = c.ident()?;
    c.sym("<=")?;
    let init = match parse_operand(c)? {
        Operand::Lit(l) => l.bits,
        Operand::Net(_) => return c.err("register reset value must be a literal"),
    };
    c.sym(";")?;
    c.word("else")?;
    let enable = if c.eat_word("if") {
        c.sym("(")?;
        let e = parse_operand(c)?;
        c.sym(")")?;
        Some(e)
    } else {
        None
    };
    if c.ident()? != target {
        return c.err("register update must drive one target");
    }
    c.sym("<=")?;
    let d = parse_operand(c)?;
    c.sym(";")?;
    Ok(RegUpdate {
        target,
        reset,
        init,
        enable,
        d,
    })
}

fn htype(c: &mut Cursor) -> Result<HType, HdlError> {
    let signed = c.eat_word("signed");
    if !c.eat_sym("[") {
        if signed {
            return c.err("signed type needs a range");
        }
        return Ok(HType::BOOL);
    }
    let hi = c.num()?;
    c.sym(":")?;
    if c.num()? != 0 {
        return c.err("range must end at 0");
    }
    c.sym("]")?;
    let width = hi as u32 + 1;
    if width > MAX_HDL_WIDTH {
        return c.err("width out of range");
    }
    Ok(HType::new(
        if signed {
            Signedness::Signed
        } else {
            Signedness::Unsigned
        },
        width,
    ))
}

fn parse_operand(c: &mut Cursor) -> Result<Operand, HdlError> {
    match c.peek().clone() {
        Tok::Ident(n) => {
            c.next();
            Ok(Operand::Net(n))
        }
        Tok::Based(width, signed, base, digits) => {
            let bits = u128::from_str_radix(&digits, radix(base)).map_err(|_| {
                crate::error::HdlError::parse(c.span().line, c.span().col, "bad literal digits")
            })?;
            let ty = if base == 'b' && width == 1 && !signed {
                HType::BOOL
            } else if width == 0 || width > MAX_HDL_WIDTH {
                return c.err("literal width out of range");
            } else {
                HType::new(
                    if signed {
                        Signedness::Signed
                    } else {
                        Signedness::Unsigned
                    },
                    width,
                )
            };
            c.next();
            Ok(Operand::Lit(Lit::new(ty, bits)))
        }
        _ => c.err("expected net or literal"),
    }
}

fn radix(base: char) -> u32 {
    match base {
        'b' => 2,
        'o' => 8,
        'd' => 10,
        _ => 16,
    }
}

fn parse_rhs(c: &mut Cursor, sv: bool) -> Result<Rhs, HdlError> {
    if c.eat_sym("(") {
        let b = parse_operand(c)?;
        c.sym("==")?;
        parse_operand(c)?;
        c.sym(")")?;
        c.sym("?")?;
        parse_operand(c)?;
        c.sym(":")?;
        let a = parse_operand(c)?;
        c.sym("/")?;
        if parse_operand(c)? != b {
            return c.err("divisor mismatch in guarded division");
        }
        return Ok(Rhs::SafeDiv(a, b));
    }
    if c.eat_sym("~") {
        return Ok(Rhs::Unary(UnOp::Not, parse_operand(c)?));
    }
    if c.eat_sym("-") {
        return Ok(Rhs::Unary(UnOp::Neg, parse_operand(c)?));
    }
    let cast = if sv {
        (c.is_word("signed") || c.is_word("unsigned")) && *c.peek_at(1) == Tok::Sym("'")
    } else {
        c.is_word("$signed") || c.is_word("$unsigned")
    };
    if cast {
        c.next();
        if sv {
            c.sym("'")?;
        }
        c.sym("(")?;
        let a = parse_operand(c)?;
        c.sym(")")?;
        return Ok(Rhs::Cast(a));
    }
    if c.eat_sym("{") {
        if c.eat_sym("{") {
            c.num()?;
            c.sym("{")?;
            parse_operand(c)?;
            if c.eat_sym("[") {
                c.num()?;
                c.sym("]")?;
            }
            c.sym("}")?;
            c.sym("}")?;
            c.sym(",")?;
            let a = parse_operand(c)?;
            c.sym("}")?;
            return Ok(Rhs::Resize(a));
        }
        let mut xs = vec![parse_operand(c)?];
        while c.eat_sym(",") {
            xs.push(parse_operand(c)?);
        }
        c.sym("}")?;
        return Ok(Rhs::Concat(xs));
    }
    let a = parse_operand(c)?;
    if c.eat_sym("[") {
        let hi = c.num()? as u32;
        let lo = if c.eat_sym(":") { c.num()? as u32 } else { hi };
        c.sym("]")?;
        return Ok(Rhs::Slice(a, hi, lo));
    }
    if c.eat_sym("?") {
        let x = parse_operand(c)?;
        c.sym(":")?;
        let y = parse_operand(c)?;
        return Ok(Rhs::Mux(a, x, y));
    }
    let bin = [
        ("+", BinOp::Add),
        ("-", BinOp::Sub),
        ("*", BinOp::Mul),
        ("&", BinOp::And),
        ("|", BinOp::Or),
        ("^", BinOp::Xor),
    ];
    for (s, op) in bin {
        if c.eat_sym(s) {
            return Ok(Rhs::Binary(op, a, parse_operand(c)?));
        }
    }
    for op in CompareOp::ALL {
        if c.eat_sym(compare_sym(op)) {
            return Ok(Rhs::Compare(op, a, parse_operand(c)?));
        }
    }
    Ok(Rhs::Copy(a))
}
