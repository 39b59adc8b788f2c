//! Arithmetic expressions over `x1..xn`, parsed once and evaluated as a
//! [`ScalarField`].
//!
//! ```
//! use massroot::expr::Expression;
//! use massroot::field::ScalarField;
//!
//! let e = Expression::parse("abs(x1 - 0.6) * (2 + sin(40*x))", 1)?;
//! let f = e.to_field();
//! assert_eq!(f.eval(&[0.6])?, 0.0);
//! # Ok::<(), massroot::Error>(())
//! ```
//!
//! Precedence from tightest to loosest is `^`, unary `-`, `* /`, `+ -`, so
//! `-2^2` is `-4` and `2^3^2` is `2^9`. The exponent of `^` may itself start
//! with a unary minus: `2^-1` is `0.5`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }

    fn lookup(name: &str) -> Option<Self> {
        [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs]
            .into_iter()
            .find(|f| f.name() == name)
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

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => a / b,
            BinOp::Pow => a.powf(b),
        }
    }

    /// Left and right binding power.
    fn power(self) -> (u8, u8) {
        match self {
            BinOp::Add | BinOp::Sub => (1, 2),
            BinOp::Mul | BinOp::Div => (3, 4),
            BinOp::Pow => (8, 7),
        }
    }
}

const UNARY_POWER: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// Syntax tree node. Variables are zero-based: `Var(0)` is `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Literal(f64),
    Const(Constant),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Literal(_) | Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

/// Fully parenthesized, so the text parses back to the same tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Literal(v) => write!(f, "{v:?}"),
            Node::Const(Constant::Pi) => f.write_str("pi"),
            Node::Const(Constant::E) => f.write_str("e"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed expression in `arity` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    arity: usize,
}

impl Expression {
    /// Parses `text` with variables `x1..x{arity}`; `x`, `y`, `z` name the
    /// first three when `arity <= 3`.
    pub fn parse(text: &str, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidConfig("expressions need at least one variable".into()));
        }
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0, end: text.len(), arity };
        let root = p.expr(0)?;
        if let Some(t) = p.peek() {
            return Err(Error::Syntax { offset: t.offset, message: format!("unexpected {}", t.kind) });
        }
        Ok(Self { root, arity })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Number of leading variables the expression can depend on: the
    /// largest index used, or 0 for a constant expression.
    pub fn variables_used(&self) -> usize {
        self.root.max_var().map_or(0, |i| i + 1)
    }

    /// Compiles to a stack program.
    pub fn to_field(&self) -> ExprField {
        let mut program = Vec::new();
        compile(&self.root, &mut program);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &program {
            match op {
                Op::Push(_) | Op::Load(_) => depth += 1,
                Op::Bin(_) => depth -= 1,
                Op::Neg | Op::Call(_) => {}
            }
            max_depth = max_depth.max(depth);
        }
        ExprField { program, arity: self.arity, stack: max_depth, text: self.to_string() }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Push(f64),
    Load(usize),
    Neg,
    Bin(BinOp),
    Call(Func),
}

fn compile(node: &Node, out: &mut Vec<Op>) {
    match node {
        Node::Literal(v) => out.push(Op::Push(*v)),
        Node::Const(c) => out.push(Op::Push(c.value())),
        Node::Var(i) => out.push(Op::Load(*i)),
        Node::Neg(a) => {
            compile(a, out);
            out.push(Op::Neg);
        }
        Node::Binary(op, a, b) => {
            compile(a, out);
            compile(b, out);
            out.push(Op::Bin(*op));
        }
        Node::Call(f, a) => {
            compile(a, out);
            out.push(Op::Call(*f));
        }
    }
}

/// A compiled expression. Cheap to share between threads.
#[derive(Debug, Clone)]
pub struct ExprField {
    program: Vec<Op>,
    arity: usize,
    stack: usize,
    text: String,
}

impl ExprField {
    pub fn source(&self) -> &str {
        &self.text
    }
}

impl ScalarField for ExprField {
    fn arity(&self) -> usize {
        self.arity
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.stack);
        for op in &self.program {
            match *op {
                Op::Push(v) => stack.push(v),
                Op::Load(i) => stack.push(x[i]),
                Op::Neg => {
                    let a = stack.last_mut().expect("compiled program is balanced");
                    *a = -*a;
                }
                Op::Call(f) => {
                    let a = stack.last_mut().expect("compiled program is balanced");
                    *a = f.apply(*a);
                }
                Op::Bin(op) => {
                    let b = stack.pop().expect("compiled program is balanced");
                    let a = stack.last_mut().expect("compiled program is balanced");
                    *a = op.apply(*a, b);
                }
            }
        }
        stack[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Sym(char),
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Sym(c) => write!(f, "`{c}`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when digits follow, so `2e` stays a syntax error
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v = f64::from_str(s)
                .map_err(|_| Error::Syntax { offset: start, message: format!("malformed number `{s}`") })?;
            if !v.is_finite() {
                return Err(Error::Syntax { offset: start, message: format!("number `{s}` is out of range") });
            }
            out.push(Token { kind: TokenKind::Number(v), offset: start });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { kind: TokenKind::Ident(text[start..i].to_string()), offset: start });
        } else if b"+-*/^()".contains(&c) {
            out.push(Token { kind: TokenKind::Sym(c as char), offset: start });
            i += 1;
        } else {
            let ch = text[start..].chars().next().expect("in bounds");
            return Err(Error::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Token> {
        let t = self.tokens.get(self.pos).cloned().ok_or_else(|| Error::Syntax {
            offset: self.end,
            message: "unexpected end of input".into(),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, sym: char) -> Result<()> {
        let t = self.next().map_err(|_| Error::Syntax { offset: self.end, message: format!("expected `{sym}`") })?;
        if t.kind == TokenKind::Sym(sym) {
            Ok(())
        } else {
            Err(Error::Syntax { offset: t.offset, message: format!("expected `{sym}`, found {}", t.kind) })
        }
    }

    fn expr(&mut self, min_power: u8) -> Result<Node> {
        let mut lhs = self.operand()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokenKind::Sym('+') => BinOp::Add,
                TokenKind::Sym('-') => BinOp::Sub,
                TokenKind::Sym('*') => BinOp::Mul,
                TokenKind::Sym('/') => BinOp::Div,
                TokenKind::Sym('^') => BinOp::Pow,
                _ => break,
            };
            let (left, right) = op.power();
            if left < min_power {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(right)?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn operand(&mut self) -> Result<Node> {
        let t = self.next()?;
        match t.kind {
            TokenKind::Number(v) => Ok(Node::Literal(v)),
            TokenKind::Sym('-') => Ok(Node::Neg(Box::new(self.expr(UNARY_POWER)?))),
            TokenKind::Sym('(') => {
                let inner = self.expr(0)?;
                self.expect(')')?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.identifier(name, t.offset),
            other => Err(Error::Syntax { offset: t.offset, message: format!("expected an operand, found {other}") }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Node> {
        if let Some(f) = Func::lookup(&name) {
            self.expect('(')?;
            let arg = self.expr(0)?;
            self.expect(')')?;
            return Ok(Node::Call(f, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Const(Constant::Pi)),
            "e" => return Ok(Node::Const(Constant::E)),
            _ => {}
        }
        let index = match name.as_str() {
            "x" | "y" | "z" if self.arity <= 3 => Some(usize::from(name.as_bytes()[0] - b'x') + 1),
            _ => name
                .strip_prefix('x')
                .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) && !d.starts_with('0'))
                .and_then(|d| d.parse::<usize>().ok()),
        };
        match index {
            Some(i) if i <= self.arity => Ok(Node::Var(i - 1)),
            Some(i) => Err(Error::ArityExceeded { index: i, arity: self.arity }),
            None => Err(Error::UnknownIdentifier { name, offset }),
        }
    }
}
