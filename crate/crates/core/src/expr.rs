//! A small arithmetic expression language over [`Jet`] values.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names resolve to variables first, then to named constants, then to `pi`.
//! Constant subtrees are folded when the expression is compiled.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Atan,
    Atan2,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "atan" => (Func::Atan, 1),
            "atan2" => (Func::Atan2, 2),
            _ => return None,
        })
    }

    fn apply(self, a: &[Jet]) -> Jet {
        match self {
            Func::Sin => a[0].sin(),
            Func::Cos => a[0].cos(),
            Func::Tan => a[0].tan(),
            Func::Exp => a[0].exp(),
            Func::Ln => a[0].ln(),
            Func::Sqrt => a[0].sqrt(),
            Func::Atan => a[0].atan(),
            Func::Atan2 => a[0].atan2(a[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[Jet]) -> Jet {
        match self {
            Expr::Num(v) => Jet::constant(*v),
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x),
            Expr::Bin(op, a, b) => {
                if let (BinOp::Pow, Expr::Num(r)) = (op, &**b) {
                    let base = a.eval(x);
                    return if r.fract() == 0.0 && r.abs() <= 64.0 {
                        base.powi(*r as i32)
                    } else {
                        base.powf(*r)
                    };
                }
                let (u, v) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => u / v,
                    BinOp::Pow => u.pow(v),
                }
            }
            Expr::Call(f, args) => {
                let vals: Vec<Jet> = args.iter().map(|a| a.eval(x)).collect();
                f.apply(&vals)
            }
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let lifted: Vec<Jet> = x.iter().copied().map(Jet::constant).collect();
        self.eval(&lifted).value()
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_var(),
            Expr::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }

    fn fold(self) -> Expr {
        let constant = match &self {
            Expr::Neg(e) => e.as_constant().is_some(),
            Expr::Bin(_, a, b) => a.as_constant().is_some() && b.as_constant().is_some(),
            Expr::Call(_, args) => args.iter().all(|a| a.as_constant().is_some()),
            _ => false,
        };
        if constant {
            Expr::Num(self.eval(&[]).value())
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
}

fn tokenize(src: &str) -> std::result::Result<Vec<(usize, Tok)>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| format!("bad number `{text}` at column {}", start + 1))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Name(chars[start..i].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if c == '−' {
            out.push((i, Tok::Op('-')));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}` at column {}", i + 1));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: &'a [String],
    consts: &'a HashMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(usize::MAX, |(c, _)| c + 1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> std::result::Result<T, String> {
        let col = self.column();
        if col == usize::MAX {
            Err(format!("{} at end of input", msg.into()))
        } else {
            Err(format!("{} at column {col}", msg.into()))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs)).fold();
        }
    }

    fn term(&mut self) -> std::result::Result<Expr, String> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs)).fold();
        }
    }

    fn unary(&mut self) -> std::result::Result<Expr, String> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)).fold());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> std::result::Result<Expr, String> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)).fold());
        }
        Ok(base)
    }

    fn atom(&mut self) -> std::result::Result<Expr, String> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Name(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Op('(')) {
                    self.pos += 1;
                    let Some((f, arity)) = Func::lookup(&name) else {
                        self.pos -= 2;
                        return self.err(format!("unknown function `{name}`"));
                    };
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return self.err("expected `)` after arguments");
                    }
                    if args.len() != arity {
                        return Err(format!("`{name}` takes {arity} argument(s), got {}", args.len()));
                    }
                    return Ok(Expr::Call(f, args).fold());
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Expr::Var(i))
                } else if let Some(&c) = self.consts.get(&name) {
                    Ok(Expr::Num(c))
                } else if name == "pi" {
                    Ok(Expr::Num(std::f64::consts::PI))
                } else {
                    self.pos -= 1;
                    self.err(format!("unknown name `{name}`"))
                }
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Compiles `src` against variable names (resolved to their index) and
/// named constants. Errors carry `key` for reporting.
pub fn parse(key: &str, src: &str, vars: &[String], consts: &HashMap<String, f64>) -> Result<Expr> {
    let run = || -> std::result::Result<Expr, String> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            vars,
            consts,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    };
    run().map_err(|m| Error::parse(key, m))
}

/// Parses an expression that must not reference any variable.
pub fn parse_constant(key: &str, src: &str, consts: &HashMap<String, f64>) -> Result<f64> {
    let e = parse(key, src, &[], consts)?;
    e.as_constant()
        .ok_or_else(|| Error::parse(key, "expression is not constant"))
}
