//! Arithmetic expressions for user supplied spherical profiles.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | constant | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `theta`, `phi` (spherical angles of the unit direction) and
//! `x`, `y`, `z` (its Cartesian components). In the plane `theta` is the polar
//! angle measured from the first axis; in space `theta` is the colatitude from
//! the third axis and `phi` the azimuth. Functions: `sin cos tan exp log sqrt
//! abs pow`. Constants: `pi`, `e`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Theta,
    Phi,
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
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
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

/// Values bound to the expression variables.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<T: Real> {
    pub theta: T,
    pub phi: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl Expression {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self {
            source: src.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval<T: Real>(&self, b: &Bindings<T>) -> T {
        eval_node(&self.root, b)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expression {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expression::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn eval_node<T: Real>(node: &Node, b: &Bindings<T>) -> T {
    match node {
        Node::Num(v) => T::c(*v),
        Node::Var(v) => match v {
            Var::Theta => b.theta,
            Var::Phi => b.phi,
            Var::X => b.x,
            Var::Y => b.y,
            Var::Z => b.z,
        },
        Node::Neg(inner) => -eval_node(inner, b),
        Node::Bin(op, l, r) => {
            let (l, r) = (eval_node(l, b), eval_node(r, b));
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => l / r,
                BinOp::Pow => pow(l, r),
            }
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], b);
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Pow => pow(a, eval_node(&args[1], b)),
            }
        }
    }
}

fn pow<T: Real>(base: T, exponent: T) -> T {
    if exponent == exponent.round() && exponent.abs() < T::c(64.0) {
        base.powi(exponent.to_i32().unwrap_or(0))
    } else {
        base.powf(exponent)
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|(o, _)| *o)
            .unwrap_or(self.src.len())
    }

    fn err(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.offset(),
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
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
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
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
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let start_offset = self.offset();
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|(_, c)| *c).collect();
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Parse {
            offset: start_offset,
            message: format!("invalid number '{text}'"),
        })
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        let start_offset = self.offset();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().map(|(_, c)| *c).collect();
        let var = match name.as_str() {
            "theta" => Some(Var::Theta),
            "phi" => Some(Var::Phi),
            "x" => Some(Var::X),
            "y" => Some(Var::Y),
            "z" => Some(Var::Z),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Node::Var(v));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        let func = match name.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => {
                return Err(Error::Parse {
                    offset: start_offset,
                    message: format!("unknown identifier '{name}'"),
                })
            }
        };
        if !self.eat('(') {
            return Err(self.err("expected '(' after function name"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(',') {
            args.push(self.expr()?);
        }
        if !self.eat(')') {
            return Err(self.err("expected ')'"));
        }
        if args.len() != func.arity() {
            return Err(Error::Parse {
                offset: start_offset,
                message: format!("'{name}' takes {} argument(s), got {}", func.arity(), args.len()),
            });
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(theta: f64, phi: f64) -> Bindings<f64> {
        Bindings {
            theta,
            phi,
            x: theta.cos(),
            y: theta.sin(),
            z: 0.0,
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expression::parse("1 + 2 * 3 ^ 2 - 4 / 2").unwrap();
        assert_eq!(e.eval(&at(0.0, 0.0)), 17.0);
        let e = Expression::parse("-2^2").unwrap();
        assert_eq!(e.eval(&at(0.0, 0.0)), -4.0);
        let e = Expression::parse("2^3^2").unwrap();
        assert_eq!(e.eval(&at(0.0, 0.0)), 512.0);
    }

    #[test]
    fn functions_and_variables() {
        let e = Expression::parse("exp(0.1*cos(theta)) * pow(2, phi) + sqrt(abs(-4))").unwrap();
        let v = e.eval(&at(0.3, 2.0));
        assert!((v - ((0.1 * 0.3f64.cos()).exp() * 4.0 + 2.0)).abs() < 1e-14);
        let e = Expression::parse("x*x + y*y").unwrap();
        assert!((e.eval(&at(1.1, 0.0)) - 1.0).abs() < 1e-15);
        let e = Expression::parse("1.5e-1 * pi + e").unwrap();
        assert!((e.eval(&at(0.0, 0.0)) - (0.15 * std::f64::consts::PI + std::f64::consts::E)).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_offsets() {
        match Expression::parse("1 + sin(theta") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
        match Expression::parse("2 * foo(1)") {
            Err(Error::Parse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
        match Expression::parse("1 + $") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expression::parse("pow(1)"), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(Expression::parse("(1 + 2) 3"), Err(Error::Parse { offset: 8, .. })));
    }

    #[test]
    fn generic_evaluation_in_f32() {
        let e = Expression::parse("cos(theta)^2 + sin(theta)^2").unwrap();
        let b = Bindings::<f32> {
            theta: 0.7,
            phi: 0.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        };
        assert!((e.eval(&b) - 1.0).abs() < 1e-6);
    }
}
