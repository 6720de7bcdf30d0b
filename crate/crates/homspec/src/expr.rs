//! Arithmetic expressions over the slow variables `x1..xd` and the fast
//! periodic variables `y1..yd`.
//!
//! The grammar is a small infix language: `+ - * /`, `^` with integer
//! exponents, the functions `sin`, `cos`, `exp`, the named constant `pi`,
//! and parentheses. Coefficient fields in config files are written in this
//! grammar; see `docs/config.md`.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Slow variable x_i, zero-based component index.
    X(usize),
    /// Fast variable y_i, zero-based component index.
    Y(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Integer power; the exponent is restricted to integers by the grammar.
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

/// A parsed expression, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    source: String,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expression()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Syntax {
                position: parser.tokens[parser.pos].1,
                message: "trailing input".into(),
            });
        }
        Ok(Expression {
            root,
            source: source.to_string(),
        })
    }

    pub fn constant(v: f64) -> Expression {
        Expression {
            root: Node::Const(v),
            source: format!("{v}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate at slow point `x` and fast point `y`. Total on finite
    /// inputs; out-of-range variable indices are reported as errors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        eval_node(&self.root, x, y)
    }

    /// Largest variable component index referenced, as (max_x, max_y),
    /// one-based; (0, 0) for a constant expression.
    pub fn max_indices(&self) -> (usize, usize) {
        let mut mx = 0;
        let mut my = 0;
        walk(&self.root, &mut |n| {
            if let Node::Var(v) = n {
                match v {
                    Var::X(i) => mx = mx.max(i + 1),
                    Var::Y(i) => my = my.max(i + 1),
                }
            }
        });
        (mx, my)
    }

    pub fn depends_on_y(&self) -> bool {
        self.max_indices().1 > 0
    }

    /// Canonical printed form; `parse(print(e))` evaluates identically.
    pub fn print(&self) -> String {
        let mut s = String::new();
        print_node(&self.root, 0, &mut s);
        s
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

fn eval_node(node: &Node, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Const(v) => *v,
        Node::Var(Var::X(i)) => *x.get(*i).ok_or_else(|| {
            Error::IndexOutOfRange(format!("x{} in a {}-dimensional point", i + 1, x.len()))
        })?,
        Node::Var(Var::Y(i)) => *y.get(*i).ok_or_else(|| {
            Error::IndexOutOfRange(format!("y{} in a {}-dimensional point", i + 1, y.len()))
        })?,
        Node::Neg(a) => -eval_node(a, x, y)?,
        Node::Add(a, b) => eval_node(a, x, y)? + eval_node(b, x, y)?,
        Node::Sub(a, b) => eval_node(a, x, y)? - eval_node(b, x, y)?,
        Node::Mul(a, b) => eval_node(a, x, y)? * eval_node(b, x, y)?,
        Node::Div(a, b) => eval_node(a, x, y)? / eval_node(b, x, y)?,
        Node::Pow(a, n) => eval_node(a, x, y)?.powi(*n),
        Node::Call(f, a) => f.apply(eval_node(a, x, y)?),
    })
}

fn walk(node: &Node, f: &mut impl FnMut(&Node)) {
    f(node);
    match node {
        Node::Const(_) | Node::Var(_) => {}
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a, f),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            walk(a, f);
            walk(b, f);
        }
    }
}

// Precedence levels: 0 additive, 1 multiplicative, 2 unary, 3 power/atom.
fn print_node(node: &Node, parent_prec: u8, out: &mut String) {
    let prec = match node {
        Node::Add(..) | Node::Sub(..) => 0,
        Node::Mul(..) | Node::Div(..) => 1,
        Node::Neg(..) => 2,
        // a leading minus sign binds like negation when reparsed
        Node::Const(v) if v.is_sign_negative() => 2,
        Node::Pow(..) => 3,
        _ => 4,
    };
    let need_parens = prec < parent_prec;
    if need_parens {
        out.push('(');
    }
    match node {
        Node::Const(v) => out.push_str(&format!("{v}")),
        Node::Var(Var::X(i)) => out.push_str(&format!("x{}", i + 1)),
        Node::Var(Var::Y(i)) => out.push_str(&format!("y{}", i + 1)),
        Node::Neg(a) => {
            out.push('-');
            print_node(a, 2, out);
        }
        Node::Add(a, b) => {
            print_node(a, 0, out);
            out.push_str(" + ");
            print_node(b, 1, out);
        }
        Node::Sub(a, b) => {
            print_node(a, 0, out);
            out.push_str(" - ");
            print_node(b, 1, out);
        }
        Node::Mul(a, b) => {
            print_node(a, 1, out);
            out.push('*');
            print_node(b, 2, out);
        }
        Node::Div(a, b) => {
            print_node(a, 1, out);
            out.push('/');
            print_node(b, 2, out);
        }
        Node::Pow(a, n) => {
            // `^` is non-associative: a nested power base needs parens
            print_node(a, 4, out);
            out.push_str(&format!("^{n}"));
        }
        Node::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            print_node(a, 0, out);
            out.push(')');
        }
    }
    if need_parens {
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == b'.'
                        || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    position: start,
                    message: format!("invalid number `{text}`"),
                })?;
                out.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Syntax {
                    position: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or_else(|| self.tokens.last().map(|(_, p)| p + 1).unwrap_or(0))
    }

    fn expression(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let neg = if let Some(Tok::Minus) = self.peek() {
                self.pos += 1;
                true
            } else {
                false
            };
            let p = self.here();
            match self.peek().cloned() {
                Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                    self.pos += 1;
                    let n = v as i32;
                    return Ok(Node::Pow(Box::new(base), if neg { -n } else { n }));
                }
                _ => {
                    return Err(Error::Syntax {
                        position: p,
                        message: "exponent must be an integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let p = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expression()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(Error::Syntax {
                        position: self.here(),
                        message: "expected `)`".into(),
                    }),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "pi" {
                    return Ok(Node::Const(std::f64::consts::PI));
                }
                if let Some(func) = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                } {
                    match self.peek() {
                        Some(Tok::LParen) => {
                            self.pos += 1;
                            let arg = self.expression()?;
                            match self.peek() {
                                Some(Tok::RParen) => {
                                    self.pos += 1;
                                    Ok(Node::Call(func, Box::new(arg)))
                                }
                                _ => Err(Error::Syntax {
                                    position: self.here(),
                                    message: "expected `)`".into(),
                                }),
                            }
                        }
                        _ => Err(Error::ArityMismatch {
                            name,
                            expected: 1,
                            got: 0,
                        }),
                    }
                } else if let Some(v) = parse_var(&name) {
                    Ok(Node::Var(v))
                } else {
                    Err(Error::UnknownIdentifier(name))
                }
            }
            _ => Err(Error::Syntax {
                position: p,
                message: "expected a number, variable, function, or `(`".into(),
            }),
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let (head, tail) = name.split_at(1);
    let idx: usize = tail.parse().ok()?;
    if idx == 0 {
        return None;
    }
    match head {
        "x" => Some(Var::X(idx - 1)),
        "y" => Some(Var::Y(idx - 1)),
        _ => None,
    }
}
