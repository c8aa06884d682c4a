//! Text grammar for polynomials in model files.
//!
//! The grammar is deliberately small — sums of products of powers, with
//! exact rational literals:
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' integer)?
//! atom   := rational | name | '(' expr ')'
//! ```
//!
//! A rational literal is `integer` or `integer '/' integer` (`1/3`,
//! possibly with spaces around the slash); `/` is not a general division
//! operator, so `x / 2` is rejected where it appears rather than silently
//! reinterpreted. Every error carries the 1-based line and column of the
//! offending token, because model files are written by hand.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use bvqft::algebra::{Element, VariableTable};
use bvqft::scalar::Rat;

/// A parse failure, pointing at the offending position in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyError {
    /// 1-based line of the problem.
    pub line: usize,
    /// 1-based column of the problem.
    pub column: usize,
    /// What went wrong.
    pub message: String,
}

impl fmt::Display for PolyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for PolyError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Number(String),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    /// Byte offset into `src`.
    pos: usize,
    line: usize,
    column: usize,
}

type Spanned = (Tok, usize, usize);

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, column: 1 }
    }

    fn error(&self, message: impl Into<String>) -> PolyError {
        PolyError { line: self.line, column: self.column, message: message.into() }
    }

    fn bump(&mut self, c: char) {
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, PolyError> {
        let mut out = Vec::new();
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.bump(c);
                continue;
            }
            let (line, column) = (self.line, self.column);
            let tok = match c {
                '+' => Tok::Plus,
                '-' | '−' => Tok::Minus,
                '*' | '·' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '0'..='9' => {
                    let mut digits = String::new();
                    while let Some(d) = self.src[self.pos..].chars().next() {
                        if d.is_ascii_digit() {
                            digits.push(d);
                            self.bump(d);
                        } else {
                            break;
                        }
                    }
                    out.push((Tok::Number(digits), line, column));
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut name = String::new();
                    while let Some(d) = self.src[self.pos..].chars().next() {
                        if d.is_alphanumeric() || d == '_' {
                            name.push(d);
                            self.bump(d);
                        } else {
                            break;
                        }
                    }
                    out.push((Tok::Name(name), line, column));
                    continue;
                }
                other => return Err(self.error(format!("unexpected character `{other}`"))),
            };
            self.bump(c);
            out.push((tok, line, column));
        }
        Ok(out)
    }
}

struct Parser<'t> {
    table: &'t Arc<VariableTable>,
    toks: Vec<Spanned>,
    at: usize,
    /// Position just past the final token, for end-of-input errors.
    end: (usize, usize),
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _, _)| t)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.at).map(|&(_, l, c)| (l, c)).unwrap_or(self.end)
    }

    fn error_here(&self, message: impl Into<String>) -> PolyError {
        let (line, column) = self.here();
        PolyError { line, column, message: message.into() }
    }

    fn next(&mut self, expected: &str) -> Result<Spanned, PolyError> {
        let t = self
            .toks
            .get(self.at)
            .cloned()
            .ok_or_else(|| self.error_here(format!("expected {expected}, found end of input")))?;
        self.at += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok) -> Result<(), PolyError> {
        let (t, line, column) = self.next(&format!("{want}"))?;
        if t == want {
            Ok(())
        } else {
            Err(PolyError { line, column, message: format!("expected {want}, found {t}") })
        }
    }

    fn integer(&mut self, what: &str) -> Result<Rat, PolyError> {
        let (t, line, column) = self.next(what)?;
        match t {
            Tok::Number(s) => Rat::from_str(&s)
                .map_err(|_| PolyError { line, column, message: format!("invalid integer `{s}`") }),
            other => Err(PolyError { line, column, message: format!("expected {what}, found {other}") }),
        }
    }

    fn expr(&mut self) -> Result<Element, PolyError> {
        let mut negate = false;
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.at += 1;
            negate = true;
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Element, PolyError> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Tok::Star)) {
            self.at += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Element, PolyError> {
        let base = self.atom()?;
        if !matches!(self.peek(), Some(Tok::Caret)) {
            return Ok(base);
        }
        self.at += 1;
        let (line, column) = self.here();
        let exp = self.integer("an integer exponent")?;
        if !exp.is_integer() || exp < Rat::from_integer(0.into()) {
            return Err(PolyError {
                line,
                column,
                message: "exponent must be a non-negative integer".into(),
            });
        }
        let k = u64::try_from(exp.to_integer()).map_err(|_| PolyError {
            line,
            column,
            message: "exponent is too large".into(),
        })?;
        let mut acc = Element::one(self.table);
        for _ in 0..k {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<Element, PolyError> {
        let (t, line, column) = self.next("a number, a variable, or `(`")?;
        match t {
            Tok::Number(n) => {
                let mut value = Rat::from_str(&n)
                    .map_err(|_| PolyError { line, column, message: format!("invalid number `{n}`") })?;
                if matches!(self.peek(), Some(Tok::Slash)) {
                    self.at += 1;
                    let (dl, dc) = self.here();
                    let den = self.integer("a denominator")?;
                    if den == Rat::from_integer(0.into()) {
                        return Err(PolyError {
                            line: dl,
                            column: dc,
                            message: "denominator must be nonzero".into(),
                        });
                    }
                    value /= den;
                }
                Ok(Element::one(self.table).scale(&value))
            }
            Tok::Name(name) => match self.table.index_of(&name) {
                Some(i) => Element::variable(self.table, i).map_err(|e| PolyError {
                    line,
                    column,
                    message: e.to_string(),
                }),
                None => Err(PolyError {
                    line,
                    column,
                    message: format!("unknown variable `{name}`"),
                }),
            },
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(PolyError {
                line,
                column,
                message: format!("expected a number, a variable, or `(`, found {other}"),
            }),
        }
    }
}

/// Parses `src` as a polynomial over the table's variables.
pub fn parse_polynomial(table: &Arc<VariableTable>, src: &str) -> Result<Element, PolyError> {
    let mut end = (1usize, 1usize);
    for c in src.chars() {
        if c == '\n' {
            end = (end.0 + 1, 1);
        } else {
            end = (end.0, end.1 + 1);
        }
    }
    let toks = Lexer::new(src).tokens()?;
    let mut p = Parser { table, toks, at: 0, end };
    let out = p.expr()?;
    if p.at != p.toks.len() {
        return Err(p.error_here(format!(
            "trailing input after the expression, starting with {}",
            p.toks[p.at].0
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bvqft::algebra::{Parity, Variable, VariableTable};
    use bvqft::scalar::rat;

    fn table() -> Arc<VariableTable> {
        VariableTable::new(vec![
            Variable { name: "x".into(), ghost: 0, parity: Parity::Even, weight: 1, partner: Some(1) },
            Variable { name: "eta".into(), ghost: -1, parity: Parity::Odd, weight: 1, partner: Some(0) },
        ])
        .unwrap()
    }

    #[test]
    fn parses_the_model_file_idiom() {
        let t = table();
        let x = Element::variable(&t, 0).unwrap();
        let expected = x.mul(&x).mul(&x).scale(&rat(1, 3));
        assert_eq!(parse_polynomial(&t, "1/3 * x^3").unwrap(), expected);
        assert_eq!(parse_polynomial(&t, "1 / 3 * x^3").unwrap(), expected);
        assert_eq!(parse_polynomial(&t, "(x^3 + x^3 - x^3) * 1/3").unwrap(), expected);
    }

    #[test]
    fn signs_and_odd_variables() {
        let t = table();
        let x = Element::variable(&t, 0).unwrap();
        let eta = Element::variable(&t, 1).unwrap();
        assert_eq!(parse_polynomial(&t, "-x + x").unwrap(), Element::zero(&t));
        assert_eq!(parse_polynomial(&t, "x * eta").unwrap(), x.mul(&eta));
        // An odd square collapses to zero rather than erroring.
        assert!(parse_polynomial(&t, "eta^2").unwrap().is_zero());
    }

    #[test]
    fn errors_carry_positions() {
        let t = table();
        let err = parse_polynomial(&t, "x +\n  y^2").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
        assert!(err.message.contains("unknown variable `y`"));

        let err = parse_polynomial(&t, "x / 2").unwrap_err();
        assert_eq!((err.line, err.column), (1, 3));

        let err = parse_polynomial(&t, "1/0 * x").unwrap_err();
        assert!(err.message.contains("denominator"));

        let err = parse_polynomial(&t, "x^x").unwrap_err();
        assert!(err.message.contains("exponent"));

        let err = parse_polynomial(&t, "x x").unwrap_err();
        assert!(err.message.contains("trailing input"));
    }
}
