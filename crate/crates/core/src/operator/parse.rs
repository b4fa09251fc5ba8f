//! Infix syntax for operators, e.g. `(j+1)*(-j+i+k+1)*S_i + 53/4*i` or
//! `2*s^2*D_s^2 - 2*s^2`. Products are taken in the written order, so the
//! text denotes the noncommutative product it spells.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{DiffOp, Rational, ShiftOp};
use crate::error::{Error, Result};

pub trait OperatorAlgebra: Sized + Clone {
    fn empty(vars: &[&str], params: &[&str]) -> Self;
    fn constant(&self, c: Rational) -> Self;
    /// A variable, parameter, `D_v` or `S_v`.
    fn generator(&self, name: &str) -> Result<Self>;
    fn add(&self, other: &Self) -> Result<Self>;
    fn mul(&self, other: &Self) -> Result<Self>;
    fn scale_by(&self, c: &Rational) -> Self;
    fn power(&self, e: i64) -> Result<Self>;
    fn as_constant(&self) -> Option<Rational>;

    fn parse(expr: &str, vars: &[&str], params: &[&str]) -> Result<Self> {
        let tokens = tokenize(expr)?;
        let mut p = Parser {
            src: expr,
            tokens,
            pos: 0,
            space: Self::empty(vars, params),
        };
        let out = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error_here("unexpected trailing input"));
        }
        Ok(out)
    }
}

impl OperatorAlgebra for DiffOp {
    fn empty(vars: &[&str], params: &[&str]) -> Self {
        DiffOp::zero(vars, params)
    }
    fn constant(&self, c: Rational) -> Self {
        self.constant_like(c)
    }
    fn generator(&self, name: &str) -> Result<Self> {
        match name.strip_prefix("D_") {
            Some(v) => self.derivation(v),
            None => self.symbol(name),
        }
    }
    fn add(&self, other: &Self) -> Result<Self> {
        self.checked_add(other)
    }
    fn mul(&self, other: &Self) -> Result<Self> {
        self.checked_mul(other)
    }
    fn scale_by(&self, c: &Rational) -> Self {
        self.scale(c)
    }
    fn power(&self, e: i64) -> Result<Self> {
        if e < 0 {
            return Err(Error::usage(
                "negative powers are not defined for differential operators",
            ));
        }
        Ok(self.pow(e as u32))
    }
    fn as_constant(&self) -> Option<Rational> {
        constant_of(self.terms().map(|(m, c)| (m.total_degree(), c)))
    }
}

impl OperatorAlgebra for ShiftOp {
    fn empty(vars: &[&str], params: &[&str]) -> Self {
        ShiftOp::zero(vars, params)
    }
    fn constant(&self, c: Rational) -> Self {
        self.constant_like(c)
    }
    fn generator(&self, name: &str) -> Result<Self> {
        match name.strip_prefix("S_") {
            Some(v) => self.shift(v, 1),
            None => self.symbol(name),
        }
    }
    fn add(&self, other: &Self) -> Result<Self> {
        self.checked_add(other)
    }
    fn mul(&self, other: &Self) -> Result<Self> {
        self.checked_mul(other)
    }
    fn scale_by(&self, c: &Rational) -> Self {
        self.scale(c)
    }
    fn power(&self, e: i64) -> Result<Self> {
        if e >= 0 {
            return Ok(self.pow(e as u32));
        }
        // only a bare shift monomial has an inverse in this ring
        let mut terms = self.terms();
        match (terms.next(), terms.next()) {
            (Some((m, c)), None) if c.is_one() && m.pows.iter().all(|&p| p == 0) => {
                let mut out = self.zero_like();
                let mut inv = m.clone();
                for s in &mut inv.shifts {
                    *s = -*s * (-e) as i32;
                }
                out.add_term(inv, Rational::one());
                Ok(out)
            }
            _ => Err(Error::usage("only shift monomials can be raised to negative powers")),
        }
    }
    fn as_constant(&self) -> Option<Rational> {
        constant_of(self.terms().map(|(m, c)| (m.total_degree(), c)))
    }
}

fn constant_of<'a>(mut terms: impl Iterator<Item = (u32, &'a Rational)>) -> Option<Rational> {
    match (terms.next(), terms.next()) {
        (None, _) => Some(Rational::zero()),
        (Some((0, c)), None) => Some(c.clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut k = 0;
    while k < chars.len() {
        let (at, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() {
            let start = k;
            while k < chars.len() && chars[k].1.is_ascii_digit() {
                k += 1;
            }
            let end = chars.get(k).map(|x| x.0).unwrap_or(src.len());
            let n: BigInt = src[chars[start].0..end].parse().expect("digits");
            out.push((Tok::Num(n), at));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = k;
            while k < chars.len() && (chars[k].1.is_ascii_alphanumeric() || chars[k].1 == '_') {
                k += 1;
            }
            let end = chars.get(k).map(|x| x.0).unwrap_or(src.len());
            out.push((Tok::Ident(src[chars[start].0..end].to_string()), at));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), at));
            k += 1;
        } else {
            let (line, column) = line_col(src, at);
            return Err(Error::parse(line, column, format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|s| s.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

struct Parser<'a, T> {
    src: &'a str,
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    space: T,
}

impl<T: OperatorAlgebra> Parser<'_, T> {
    fn error_here(&self, msg: &str) -> Error {
        let offset = self.tokens.get(self.pos).map(|t| t.1).unwrap_or(self.src.len());
        let (line, column) = line_col(self.src, offset);
        Error::parse(line, column, msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn located<R>(&self, at: usize, r: Result<R>) -> Result<R> {
        r.map_err(|e| match e {
            Error::Usage(m) | Error::Domain(m) => {
                let offset = self.tokens.get(at).map(|t| t.1).unwrap_or(self.src.len());
                let (line, column) = line_col(self.src, offset);
                Error::parse(line, column, m)
            }
            other => other,
        })
    }

    fn expr(&mut self) -> Result<T> {
        let mut acc = if self.eat('-') {
            self.term()?.scale_by(&-Rational::one())
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            let at = self.pos;
            if self.eat('+') {
                let rhs = self.term()?;
                acc = self.located(at, acc.add(&rhs))?;
            } else if self.eat('-') {
                let rhs = self.term()?.scale_by(&-Rational::one());
                acc = self.located(at, acc.add(&rhs))?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<T> {
        let mut acc = self.unary()?;
        loop {
            let at = self.pos;
            if self.eat('*') {
                let rhs = self.unary()?;
                acc = self.located(at, acc.mul(&rhs))?;
            } else if self.eat('/') {
                let rhs = self.unary()?;
                match rhs.as_constant() {
                    Some(c) if !c.is_zero() => acc = acc.scale_by(&(Rational::one() / c)),
                    _ => {
                        self.pos = at;
                        return Err(self.error_here("division is only allowed by nonzero constants"));
                    }
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<T> {
        if self.eat('-') {
            Ok(self.unary()?.scale_by(&-Rational::one()))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<T> {
        let base = self.atom()?;
        let at = self.pos;
        if !self.eat('^') {
            return Ok(base);
        }
        let neg = self.eat('-');
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                let e: i64 = i64::try_from(n).map_err(|_| self.error_here("exponent too large"))?;
                self.located(at, base.power(if neg { -e } else { e }))
            }
            _ => Err(self.error_here("expected an integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<T> {
        let at = self.pos;
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(self.space.constant(Rational::from_integer(n)))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let g = self.space.generator(&name);
                self.located(at, g)
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error_here("expected ')'"));
                }
                Ok(inner)
            }
            _ => Err(self.error_here("expected a number, symbol or '('")),
        }
    }
}
