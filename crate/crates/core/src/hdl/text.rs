// SPDX-License-Identifier: Apache-2.0

//! Position-tracking writer and the shared lexer for the emitted subset.

use super::ast::{Dialect, Span};
use crate::error::HdlError;

pub(crate) struct Writer {
    out: String,
    line: usize,
    col: usize,
}

impl Writer {
    pub fn new() -> Self {
        Writer {
            out: String::new(),
            line: 1,
            col: 1,
        }
    }

    pub fn pos(&self) -> Span {
        Span {
            line: self.line,
            col: self.col,
        }
    }

    pub fn push(&mut self, s: &str) {
        for c in s.chars() {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.out.push_str(s);
    }

    /// Writes `indent` spaces and returns the position of what follows.
    pub fn start(&mut self, indent: usize) -> Span {
        self.push(&" ".repeat(indent));
        self.pos()
    }

    pub fn line(&mut self, indent: usize, s: &str) -> Span {
        let at = self.start(indent);
        self.push(s);
        self.push("\n");
        at
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Num(u128),
    /// Verilog sized literal: width, signed, base, digits.
    Based(u32, bool, char, String),
    /// VHDL character literal.
    Char(char),
    /// VHDL string literal.
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMS2: [&str; 6] = ["<=", ">=", "==", "!=", "/=", "=>"];
const SYMS1: [&str; 22] = [
    "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*", "/", "&", "|",
    "^", "~", "?",
];

pub(crate) fn lex(text: &str, dialect: Dialect) -> Result<Vec<Token>, HdlError> {
    let vhdl = dialect == Dialect::Vhdl;
    let chars: Vec<char> = text.chars().collect();
    let mut toks: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        let rest2: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if (vhdl && rest2 == "--") || (!vhdl && rest2 == "//") {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if !vhdl && rest2 == "/*" {
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                advance(&mut i, &mut line, &mut col, 1);
            }
            if i >= chars.len() {
                return Err(HdlError::parse(span.line, span.col, "unterminated comment"));
            }
            advance(&mut i, &mut line, &mut col, 2);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || (!vhdl && c == '$') {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric()
                    || chars[j] == '_'
                    || (!vhdl && chars[j] == '$'))
            {
                j += 1;
            }
            let mut word: String = chars[i..j].iter().collect();
            if vhdl {
                word = word.to_ascii_lowercase();
            }
            {
                let n = j - i;
                advance(&mut i, &mut line, &mut col, n);
            }
            toks.push(Token {
                tok: Tok::Ident(word),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[i..j].iter().collect();
            let n: u128 = digits
                .parse()
                .map_err(|_| HdlError::parse(line, col, "number out of range"))?;
            if !vhdl && chars.get(j) == Some(&'\'') {
                let mut k = j + 1;
                let signed = matches!(chars.get(k), Some('s') | Some('S'));
                if signed {
                    k += 1;
                }
                let base = chars.get(k).copied().unwrap_or(' ').to_ascii_lowercase();
                if !matches!(base, 'b' | 'h' | 'd' | 'o') {
                    return Err(HdlError::parse(line, col, "bad literal base"));
                }
                k += 1;
                let start = k;
                while k < chars.len()
                    && (chars[k].is_ascii_hexdigit()
                        || matches!(chars[k], '_' | 'x' | 'z' | 'X' | 'Z'))
                {
                    k += 1;
                }
                if k == start {
                    return Err(HdlError::parse(line, col, "literal without digits"));
                }
                let body: String = chars[start..k].iter().filter(|c| **c != '_').collect();
                {
                    let n = k - i;
                    advance(&mut i, &mut line, &mut col, n);
                }
                toks.push(Token {
                    tok: Tok::Based(n as u32, signed, base, body.to_ascii_lowercase()),
                    span,
                });
                continue;
            }
            {
                let n = j - i;
                advance(&mut i, &mut line, &mut col, n);
            }
            toks.push(Token {
                tok: Tok::Num(n),
                span,
            });
            continue;
        }
        if c == '\'' {
            // A qualified expression tick is always followed by `(`.
            if vhdl && chars.get(i + 1) != Some(&'(') && chars.get(i + 2) == Some(&'\'') {
                let ch = chars[i + 1];
                advance(&mut i, &mut line, &mut col, 3);
                toks.push(Token {
                    tok: Tok::Char(ch),
                    span,
                });
                continue;
            }
            advance(&mut i, &mut line, &mut col, 1);
            toks.push(Token {
                tok: Tok::Sym("'"),
                span,
            });
            continue;
        }
        if vhdl && c == '"' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != '"' {
                j += 1;
            }
            if j >= chars.len() {
                return Err(HdlError::parse(line, col, "unterminated string"));
            }
            let s: String = chars[i + 1..j].iter().collect();
            {
                let n = j + 1 - i;
                advance(&mut i, &mut line, &mut col, n);
            }
            toks.push(Token {
                tok: Tok::Str(s),
                span,
            });
            continue;
        }
        if let Some(sym) = SYMS2.iter().find(|s| **s == rest2) {
            advance(&mut i, &mut line, &mut col, 2);
            toks.push(Token {
                tok: Tok::Sym(sym),
                span,
            });
            continue;
        }
        let one = c.to_string();
        let extra: &[&'static str] = if vhdl { &[] } else { &["@", "#"] };
        if let Some(sym) = SYMS1.iter().chain(extra.iter()).find(|s| **s == one) {
            advance(&mut i, &mut line, &mut col, 1);
            toks.push(Token {
                tok: Tok::Sym(sym),
                span,
            });
            continue;
        }
        return Err(HdlError::parse(
            line,
            col,
            format!("unexpected character `{c}`"),
        ));
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(toks)
}

/// Cursor over a token stream with error helpers.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn err<T>(&self, msg: impl Into<String>) -> Result<T, HdlError> {
        let s = self.span();
        Err(HdlError::parse(
            s.line,
            s.col,
            format!("{} (found {:?})", msg.into(), self.peek()),
        ))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    pub fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn sym(&mut self, s: &str) -> Result<(), HdlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    pub fn word(&mut self, w: &str) -> Result<(), HdlError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            self.err(format!("expected `{w}`"))
        }
    }

    pub fn ident(&mut self) -> Result<String, HdlError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    pub fn num(&mut self) -> Result<u128, HdlError> {
        match *self.peek() {
            Tok::Num(n) => {
                self.next();
                Ok(n)
            }
            _ => self.err("expected number"),
        }
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verilog_tokens() {
        let t = lex("assign n1 = 8'sh7f + {4{1'b0}}; // c\n", Dialect::Verilog).unwrap();
        let kinds: Vec<Tok> = t.into_iter().map(|t| t.tok).collect();
        assert_eq!(kinds[3], Tok::Based(8, true, 'h', "7f".into()));
        assert_eq!(kinds[5], Tok::Sym("{"));
        assert_eq!(*kinds.last().unwrap(), Tok::Eof);
    }

    #[test]
    fn vhdl_ticks_and_chars() {
        let t = lex(
            "x <= unsigned'(\"01\") when c = '1' else y; -- c",
            Dialect::Vhdl,
        )
        .unwrap();
        let kinds: Vec<Tok> = t.into_iter().map(|t| t.tok).collect();
        assert_eq!(kinds[2], Tok::Ident("unsigned".into()));
        assert_eq!(kinds[3], Tok::Sym("'"));
        assert_eq!(kinds[5], Tok::Str("01".into()));
        assert!(kinds.contains(&Tok::Char('1')));
    }

    #[test]
    fn spans_are_one_based() {
        let t = lex("\n  foo", Dialect::Verilog).unwrap();
        assert_eq!(t[0].span, Span { line: 2, col: 3 });
    }
}
