// SPDX-License-Identifier: Apache-2.0

//! VHDL-93 printer and subset parser.

use super::ast::*;
use super::text::{lex, Cursor, Tok, Writer};
use crate::error::HdlError;
use crate::model::CompareOp;
use crate::types::Signedness;

pub(crate) fn vtype(ty: HType) -> String {
    match ty.sign {
        Signedness::Boolean => "std_logic".into(),
        Signedness::Unsigned => format!("unsigned({} downto 0)", ty.width - 1),
        Signedness::Signed => format!("signed({} downto 0)", ty.width - 1),
    }
}

pub(crate) fn lit(l: &Lit) -> String {
    if l.ty.is_bool() {
        return format!("'{}'", l.bits & 1);
    }
    let bits: String = (0..l.ty.width)
        .rev()
        .map(|k| if (l.bits >> k) & 1 == 1 { '1' } else { '0' })
        .collect();
    let q = if l.ty.is_signed() {
        "signed"
    } else {
        "unsigned"
    };
    format!("{q}'(\"{bits}\")")
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Net(n) => n.clone(),
        Operand::Lit(l) => lit(l),
    }
}

fn compare_sym(op: CompareOp) -> &'static str {
    match op {
        CompareOp::Eq => "=",
        CompareOp::Ne => "/=",
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
        BinOp::And => "and",
        BinOp::Or => "or",
        BinOp::Xor => "xor",
    }
}

fn rhs(m: &Module, target: HType, r: &Rhs) -> String {
    match r {
        Rhs::Copy(a) => operand(a),
        Rhs::Unary(UnOp::Not, a) => format!("not {}", operand(a)),
        Rhs::Unary(UnOp::Neg, a) => format!("-{}", operand(a)),
        Rhs::Binary(op, a, b) => format!("{} {} {}", operand(a), bin_sym(*op), operand(b)),
        Rhs::Compare(op, a, b) => format!(
            "'1' when ({} {} {}) else '0'",
            operand(a),
            compare_sym(*op),
            operand(b)
        ),
        Rhs::Mux(c, a, b) => format!(
            "{} when {} = '1' else {}",
            operand(a),
            operand(c),
            operand(b)
        ),
        Rhs::Resize(a) => format!("resize({}, {})", operand(a), target.width),
        Rhs::Slice(a, hi, lo) => {
            if target.is_bool() && hi == lo {
                format!("{}({hi})", operand(a))
            } else {
                format!("{}({hi} downto {lo})", operand(a))
            }
        }
        Rhs::Concat(xs) if xs.len() == 1 => format!("(0 => {})", operand(&xs[0])),
        Rhs::Concat(xs) => xs.iter().map(operand).collect::<Vec<_>>().join(" & "),
        Rhs::Cast(a) => {
            let f = if target.is_signed() {
                "signed"
            } else {
                "unsigned"
            };
            format!("{f}({})", operand(a))
        }
        Rhs::SafeDiv(a, b) => {
            let ty = m.operand_type(b).unwrap_or(target);
            format!(
                "{} when {} = {} else {} / {}",
                lit(&Lit::new(target, u128::MAX)),
                operand(b),
                lit(&Lit::zero(ty)),
                operand(a),
                operand(b)
            )
        }
    }
}

const PRELUDE: [&str; 3] = [
    "library ieee;",
    "use ieee.std_logic_1164.all;",
    "use ieee.numeric_std.all;",
];

pub(crate) fn print(ast: &mut HdlAst) -> String {
    let mut w = Writer::new();
    let n_modules = ast.modules.len();
    for (mi, m) in ast.modules.iter_mut().enumerate() {
        for l in PRELUDE {
            w.line(0, l);
        }
        w.push("\n");
        m.span = w.start(0);
        w.push(&format!("entity {} is\n", m.name));
        w.line(2, "port (");
        for (k, p) in m.ports.iter().enumerate() {
            let dir = if p.dir == Dir::In { "in" } else { "out" };
            let sep = if k + 1 == m.ports.len() { "" } else { ";" };
            w.line(4, &format!("{} : {dir} {}{sep}", p.name, vtype(p.ty)));
        }
        w.line(2, ");");
        w.line(0, &format!("end entity {};", m.name));
        w.push("\n");
        w.line(0, &format!("architecture rtl of {} is", m.name));
        for n in &m.nets {
            w.line(2, &format!("signal {} : {};", n.name, vtype(n.ty)));
        }
        w.line(0, "begin");
        let snapshot = m.clone();
        for item in &mut m.items {
            match item {
                Item::Assign(a) => {
                    let ty = snapshot.type_of(&a.target).unwrap_or(HType::BOOL);
                    a.span = w.start(2);
                    w.push(&format!(
                        "{} <= {};\n",
                        a.target,
                        rhs(&snapshot, ty, &a.rhs)
                    ));
                }
                Item::Comb(c) => {
                    let mut sens: Vec<&str> = Vec::new();
                    for o in [&c.cond, &c.then, &c.els] {
                        if let Some(n) = o.as_net() {
                            if !sens.contains(&n) {
                                sens.push(n);
                            }
                        }
                    }
                    c.span = w.start(2);
                    w.push(&format!("process ({})\n", sens.join(", ")));
                    w.line(2, "begin");
                    w.line(4, &format!("if {} = '1' then", operand(&c.cond)));
                    w.line(6, &format!("{} <= {};", c.target, operand(&c.then)));
                    w.line(4, "else");
                    w.line(6, &format!("{} <= {};", c.target, operand(&c.els)));
                    w.line(4, "end if;");
                    w.line(2, "end process;");
                }
                Item::Clocked(c) => {
                    c.span = w.start(2);
                    w.push("process (clk)\n");
                    w.line(2, "begin");
                    w.line(4, "if rising_edge(clk) then");
                    for r in &c.regs {
                        let ty = snapshot.type_of(&r.target).unwrap_or(HType::BOOL);
                        w.line(6, &format!("if {} = '1' then", r.reset));
                        w.line(
                            8,
                            &format!("{} <= {};", r.target, lit(&Lit::new(ty, r.init))),
                        );
                        match &r.enable {
                            Some(e) => w.line(6, &format!("elsif {} = '1' then", operand(e))),
                            None => w.line(6, "else"),
                        };
                        w.line(8, &format!("{} <= {};", r.target, operand(&r.d)));
                        w.line(6, "end if;");
                    }
                    w.line(4, "end if;");
                    w.line(2, "end process;");
                }
                Item::Instance(i) => {
                    i.span = w.start(2);
                    w.push(&format!("{} : entity work.{}\n", i.name, i.module));
                    w.line(4, "port map (");
                    for (k, (p, a)) in i.conns.iter().enumerate() {
                        let sep = if k + 1 == i.conns.len() { "" } else { "," };
                        w.line(6, &format!("{p} => {}{sep}", operand(a)));
                    }
                    w.line(4, ");");
                }
            }
        }
        w.line(0, "end architecture rtl;");
        if mi + 1 < n_modules {
            w.push("\n");
        }
    }
    w.finish()
}

pub(crate) fn parse(text: &str) -> Result<HdlAst, HdlError> {
    let mut c = Cursor::new(lex(text, Dialect::Vhdl)?);
    let mut modules = Vec::new();
    if c.at_eof() {
        return c.err("expected design unit");
    }
    while !c.at_eof() {
        modules.push(design_unit(&mut c)?);
    }
    Ok(HdlAst { modules })
}

fn selected_name(c: &mut Cursor) -> Result<(), HdlError> {
    c.ident()?;
    while c.eat_sym(".") {
        c.ident()?;
    }
    Ok(())
}

fn design_unit(c: &mut Cursor) -> Result<Module, HdlError> {
    loop {
        if c.eat_word("library") {
            c.ident()?;
            c.sym(";")?;
        } else if c.eat_word("use") {
            selected_name(c)?;
            c.sym(";")?;
        } else {
            break;
        }
    }
    let span = c.span();
    c.word("entity")?;
    let name = c.ident()?;
    c.word("is")?;
    c.word("port")?;
    c.sym("(")?;
    let mut ports = Vec::new();
    loop {
        let pname = c.ident()?;
        c.sym(":")?;
        let dir = if c.eat_word("in") {
            Dir::In
        } else if c.eat_word("out") {
            Dir::Out
        } else {
            return c.err("expected port mode");
        };
        ports.push(Port {
            name: pname,
            dir,
            ty: vtype_parse(c)?,
        });
        if !c.eat_sym(";") {
            break;
        }
    }
    c.sym(")")?;
    c.sym(";")?;
    c.word("end")?;
    c.eat_word("entity");
    if !c.is_sym(";") && c.ident()? != name {
        return c.err("mismatched entity name");
    }
    c.sym(";")?;
    c.word("architecture")?;
    let arch = c.ident()?;
    c.word("of")?;
    if c.ident()? != name {
        return c.err("architecture of another entity");
    }
    c.word("is")?;
    let mut nets = Vec::new();
    while c.eat_word("signal") {
        let n = c.ident()?;
        c.sym(":")?;
        let ty = vtype_parse(c)?;
        c.sym(";")?;
        nets.push(Net { name: n, ty });
    }
    c.word("begin")?;
    let mut items = Vec::new();
    loop {
        let ispan = c.span();
        if c.eat_word("end") {
            c.eat_word("architecture");
            if matches!(c.peek(), Tok::Ident(_)) && c.ident()? != arch {
                return c.err("mismatched architecture name");
            }
            c.sym(";")?;
            break;
        }
        if c.eat_word("process") {
            items.push(process(c, ispan)?);
            continue;
        }
        let target = c.ident()?;
        if c.eat_sym(":") {
            c.word("entity")?;
            c.word("work")?;
            c.sym(".")?;
            let module = c.ident()?;
            c.word("port")?;
            c.word("map")?;
            c.sym("(")?;
            let mut conns = Vec::new();
            loop {
                let p = c.ident()?;
                c.sym("=>")?;
                conns.push((p, operand_parse(c)?));
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.sym(")")?;
            c.sym(";")?;
            items.push(Item::Instance(Instance {
                module,
                name: target,
                conns,
                span: ispan,
            }));
            continue;
        }
        c.sym("<=")?;
        let r = rhs_parse(c)?;
        c.sym(";")?;
        items.push(Item::Assign(Assign {
            target,
            rhs: r,
            span: ispan,
        }));
    }
    Ok(Module {
        name,
        ports,
        nets,
        items,
        span,
    })
}

fn vtype_parse(c: &mut Cursor) -> Result<HType, HdlError> {
    let sign = if c.eat_word("std_logic") {
        return Ok(HType::BOOL);
    } else if c.eat_word("unsigned") {
        Signedness::Unsigned
    } else if c.eat_word("signed") {
        Signedness::Signed
    } else {
        return c.err("expected type");
    };
    c.sym("(")?;
    let hi = c.num()?;
    c.word("downto")?;
    if c.num()? != 0 {
        return c.err("range must end at 0");
    }
    c.sym(")")?;
    if hi as u32 + 1 > MAX_HDL_WIDTH {
        return c.err("width out of range");
    }
    Ok(HType::new(sign, hi as u32 + 1))
}

fn operand_parse(c: &mut Cursor) -> Result<Operand, HdlError> {
    match c.peek().clone() {
        Tok::Char(ch @ ('0' | '1')) => {
            c.next();
            Ok(Operand::Lit(Lit::new(HType::BOOL, (ch == '1') as u128)))
        }
        Tok::Ident(n) if (n == "unsigned" || n == "signed") && *c.peek_at(1) == Tok::Sym("'") => {
            c.next();
            c.next();
            c.sym("(")?;
            let Tok::Str(bits) = c.peek().clone() else {
                return c.err("expected bit string");
            };
            if bits.is_empty()
                || bits.len() > MAX_HDL_WIDTH as usize
                || !bits.chars().all(|b| b == '0' || b == '1')
            {
                return c.err("bad bit string");
            }
            c.next();
            c.sym(")")?;
            let sign = if n == "signed" {
                Signedness::Signed
            } else {
                Signedness::Unsigned
            };
            let v = u128::from_str_radix(&bits, 2).expect("checked digits");
            Ok(Operand::Lit(Lit::new(
                HType::new(sign, bits.len() as u32),
                v,
            )))
        }
        Tok::Ident(n) => {
            c.next();
            Ok(Operand::Net(n))
        }
        _ => c.err("expected signal or literal"),
    }
}

fn expect_one(c: &mut Cursor) -> Result<(), HdlError> {
    c.sym("=")?;
    match c.next() {
        Tok::Char('1') => Ok(()),
        _ => c.err("expected '1'"),
    }
}

fn rhs_parse(c: &mut Cursor) -> Result<Rhs, HdlError> {
    if c.eat_word("not") {
        return Ok(Rhs::Unary(UnOp::Not, operand_parse(c)?));
    }
    if c.eat_sym("-") {
        return Ok(Rhs::Unary(UnOp::Neg, operand_parse(c)?));
    }
    if c.eat_word("resize") {
        c.sym("(")?;
        let a = operand_parse(c)?;
        c.sym(",")?;
        c.num()?;
        c.sym(")")?;
        return Ok(Rhs::Resize(a));
    }
    if (c.is_word("unsigned") || c.is_word("signed")) && *c.peek_at(1) == Tok::Sym("(") {
        c.next();
        c.sym("(")?;
        let a = operand_parse(c)?;
        c.sym(")")?;
        return Ok(Rhs::Cast(a));
    }
    if c.eat_sym("(") {
        if c.num()? != 0 {
            return c.err("expected single-element aggregate");
        }
        c.sym("=>")?;
        let a = operand_parse(c)?;
        c.sym(")")?;
        return Ok(Rhs::Concat(vec![a]));
    }
    let a = operand_parse(c)?;
    if c.eat_word("when") {
        if c.eat_sym("(") {
            let x = operand_parse(c)?;
            let op = CompareOp::ALL
                .into_iter()
                .find(|op| c.is_sym(compare_sym(*op)))
                .ok_or(())
                .or_else(|_| c.err("expected comparison"))?;
            c.next();
            let y = operand_parse(c)?;
            c.sym(")")?;
            c.word("else")?;
            operand_parse(c)?;
            return Ok(Rhs::Compare(op, x, y));
        }
        let cond = operand_parse(c)?;
        c.sym("=")?;
        let rhs_lit = operand_parse(c)?;
        c.word("else")?;
        let other = operand_parse(c)?;
        if c.eat_sym("/") {
            if operand_parse(c)? != cond {
                return c.err("divisor mismatch in guarded division");
            }
            return Ok(Rhs::SafeDiv(other, cond));
        }
        if rhs_lit != Operand::Lit(Lit::new(HType::BOOL, 1)) {
            return c.err("mux condition must test '1'");
        }
        return Ok(Rhs::Mux(cond, a, other));
    }
    if c.eat_sym("(") {
        let hi = c.num()? as u32;
        let lo = if c.eat_word("downto") {
            c.num()? as u32
        } else {
            hi
        };
        c.sym(")")?;
        return Ok(Rhs::Slice(a, hi, lo));
    }
    if c.is_sym("&") {
        let mut xs = vec![a];
        while c.eat_sym("&") {
            xs.push(operand_parse(c)?);
        }
        return Ok(Rhs::Concat(xs));
    }
    let bin = [("+", BinOp::Add), ("-", BinOp::Sub), ("*", BinOp::Mul)];
    for (s, op) in bin {
        if c.eat_sym(s) {
            return Ok(Rhs::Binary(op, a, operand_parse(c)?));
        }
    }
    for (w, op) in [("and", BinOp::And), ("or", BinOp::Or), ("xor", BinOp::Xor)] {
        if c.eat_word(w) {
            return Ok(Rhs::Binary(op, a, operand_parse(c)?));
        }
    }
    Ok(Rhs::Copy(a))
}

fn process(c: &mut Cursor, span: Span) -> Result<Item, HdlError> {
    c.sym("(")?;
    loop {
        c.ident()?;
        if !c.eat_sym(",") {
            break;
        }
    }
    c.sym(")")?;
    c.word("begin")?;
    c.word("if")?;
    let item = if c.eat_word("rising_edge") {
        c.sym("(")?;
        c.word("clk")?;
        c.sym(")")?;
        c.word("then")?;
        let mut regs = Vec::new();
        while c.eat_word("if") {
            let reset = c.ident()?;
            expect_one(c)?;
            c.word("then")?;
            let target = c.ident()?;
            c.sym("<=")?;
            let Operand::Lit(init) = operand_parse(c)? else {
                return c.err("reset value must be a literal");
            };
            c.sym(";")?;
            let enable = if c.eat_word("elsif") {
                let e = operand_parse(c)?;
                expect_one(c)?;
                c.word("then")?;
                Some(e)
            } else {
                c.word("else")?;
                None
            };
            if c.ident()? != target {
                return c.err("register update must drive one target");
            }
            c.sym("<=")?;
            let d = operand_parse(c)?;
            c.sym(";")?;
            c.word("end")?;
            c.word("if")?;
            c.sym(";")?;
            regs.push(RegUpdate {
                target,
                reset,
                init: init.bits,
                enable,
                d,
            });
        }
        c.word("end")?;
        c.word("if")?;
        c.sym(";")?;
        Item::Clocked(Clocked { regs, span })
    } else {
        let cond = operand_parse(c)?;
        expect_one(c)?;
        c.word("then")?;
        let target = c.ident()?;
        c.sym("<=")?;
        let then = operand_parse(c)?;
        c.sym(";")?;
        c.word("else")?;
        if c.ident()? != target {
            return c.err("process must drive one target");
        }
        c.sym("<=")?;
        let els = operand_parse(c)?;
        c.sym(";")?;
        c.word("end")?;
        c.word("if")?;
        c.sym(";")?;
        Item::Comb(Comb {
            target,
            cond,
            then,
            els,
            span,
        })
    };
    c.word("end")?;
    c.word("process")?;
    c.sym(";")?;
    Ok(item)
}
