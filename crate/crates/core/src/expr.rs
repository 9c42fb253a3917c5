//! Arithmetic expressions in `x` and `y` for analytic initial and boundary
//! data, e.g. `sin(pi*x)*sin(pi*y)` or `x^2 - y^2`.
//!
//! Grammar (recursive descent, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'y' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp'
//! ```
//!
//! `·` and `−` are accepted as spellings of `*` and `-`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("expression `{source_text}`: {message} at column {column}")]
    Syntax {
        source_text: String,
        message: String,
        column: usize,
    },
    #[error("expression `{source_text}` is not finite at ({x}, {y})")]
    NotFinite { source_text: String, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Exp(Box<Node>),
    /// Only produced by differentiation of general powers.
    Ln(Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

impl Node {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::X => x,
            Node::Y => y,
            Node::Neg(a) => -a.eval(x, y),
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Pow(a, b) => pow(a.eval(x, y), b.eval(x, y)),
            Node::Sin(a) => a.eval(x, y).sin(),
            Node::Cos(a) => a.eval(x, y).cos(),
            Node::Exp(a) => a.eval(x, y).exp(),
            Node::Ln(a) => a.eval(x, y).ln(),
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Symbolic partial derivative with light constant folding.
    pub fn derivative(&self, var: Var) -> Node {
        use Node::*;
        match self {
            Const(_) => Const(0.0),
            X => Const(if var == Var::X { 1.0 } else { 0.0 }),
            Y => Const(if var == Var::Y { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                mul((**b).clone(), (**b).clone()),
            ),
            Pow(a, b) => match b.constant() {
                Some(c) => mul(
                    mul(Const(c), pow_node((**a).clone(), Const(c - 1.0))),
                    a.derivative(var),
                ),
                None => mul(
                    self.clone(),
                    add(
                        mul(b.derivative(var), Ln(a.clone())),
                        div(mul((**b).clone(), a.derivative(var)), (**a).clone()),
                    ),
                ),
            },
            Sin(a) => mul(Cos(a.clone()), a.derivative(var)),
            Cos(a) => neg(mul(Sin(a.clone()), a.derivative(var))),
            Exp(a) => mul(Exp(a.clone()), a.derivative(var)),
            Ln(a) => div(a.derivative(var), (**a).clone()),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(c) => Node::Const(-c),
        a => Node::Neg(Box::new(a)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Node::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Node::Const(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Node::Const(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Node::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a.constant(), b.constant()) {
        (Some(0.0), _) => Node::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow_node(a: Node, b: Node) -> Node {
    match b.constant() {
        Some(0.0) => Node::Const(1.0),
        Some(1.0) => a,
        _ => Node::Pow(Box::new(a), Box::new(b)),
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let source = text.trim().to_string();
        let tokens = tokenize(&source)?;
        let mut parser = Parser {
            source: &source,
            tokens,
            pos: 0,
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(parser.error("unexpected trailing input", tok.column));
        }
        Ok(Self { source, root })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            source: format!("{c:?}"),
            root: Node::Const(c),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.root.eval(x, y)
    }

    /// Evaluates and rejects non-finite results.
    pub fn eval_checked(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        let v = self.eval(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NotFinite {
                source_text: self.source.clone(),
                x,
                y,
            })
        }
    }

    /// `∂²/∂x² + ∂²/∂y²` as a new expression tree.
    pub fn laplacian(&self) -> Node {
        let xx = self.root.derivative(Var::X).derivative(Var::X);
        let yy = self.root.derivative(Var::Y).derivative(Var::Y);
        add(xx, yy)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.root == Node::Const(0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |message: &str, column: usize| ExprError::Syntax {
        source_text: src.to_string(),
        message: message.to_string(),
        column,
    };
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, only when followed by digits
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
            let v: f64 = text.parse().map_err(|_| err("malformed number", column))?;
            out.push(Token { tok: Tok::Num(v), column });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            let tok = match c {
                '+' => Tok::Op('+'),
                '-' | '−' => Tok::Op('-'),
                '*' | '·' => Tok::Op('*'),
                '/' => Tok::Op('/'),
                '^' => Tok::Op('^'),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(&format!("unexpected character `{c}`"), column)),
            };
            out.push(Token { tok, column });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str, column: usize) -> ExprError {
        ExprError::Syntax {
            source_text: self.source.to_string(),
            message: message.to_string(),
            column,
        }
    }

    fn end_column(&self) -> usize {
        self.source.chars().count() + 1
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::RParen, .. }) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error("expected `)`", t.column)),
            None => Err(self.error("expected `)`", self.end_column())),
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression", self.end_column()));
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "pi" => Ok(Node::Const(std::f64::consts::PI)),
                "e" => Ok(Node::Const(std::f64::consts::E)),
                "sin" | "cos" | "exp" => {
                    match self.tokens.get(self.pos) {
                        Some(Token { tok: Tok::LParen, .. }) => self.pos += 1,
                        Some(t) => return Err(self.error("expected `(` after function", t.column)),
                        None => return Err(self.error("expected `(` after function", self.end_column())),
                    }
                    let arg = Box::new(self.expr()?);
                    self.expect_rparen()?;
                    Ok(match name.as_str() {
                        "sin" => Node::Sin(arg),
                        "cos" => Node::Cos(arg),
                        _ => Node::Exp(arg),
                    })
                }
                other => Err(self.error(&format!("unknown identifier `{other}`"), token.column)),
            },
            Tok::Op(c) => Err(self.error(&format!("unexpected operator `{c}`"), token.column)),
            Tok::RParen => Err(self.error("unexpected `)`", token.column)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eval(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1 + 2*3", 0.0, 0.0), 7.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(eval("(1+2)*3", 0.0, 0.0), 9.0);
        assert_eq!(eval("x/y - 1", 6.0, 3.0), 1.0);
        assert_eq!(eval("2·x − 1", 2.0, 0.0), 3.0);
        assert_eq!(eval("1.5e-1*x", 2.0, 0.0), 0.3);
        assert!((eval("e", 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert!((eval("exp(1)", 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn sine_product_vanishes_on_square_boundary() {
        let e = Expr::parse("sin(pi*x)*sin(pi*y)").unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert!(e.eval(0.0, t).abs() < 1e-15);
            assert!(e.eval(1.0, t).abs() < 1e-15);
            assert!(e.eval(t, 1.0).abs() < 1e-15);
        }
        assert!((e.eval(0.5, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_columns() {
        let err = Expr::parse("sin(x").unwrap_err();
        assert!(matches!(err, ExprError::Syntax { column: 6, .. }), "{err:?}");
        assert!(matches!(Expr::parse("x + $"), Err(ExprError::Syntax { column: 5, .. })));
        assert!(matches!(Expr::parse("foo(x)"), Err(ExprError::Syntax { column: 1, .. })));
        assert!(matches!(Expr::parse(""), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("x y"), Err(ExprError::Syntax { column: 3, .. })));
    }

    #[test]
    fn laplacians() {
        let h = Expr::parse("x^2 - y^2").unwrap();
        assert_eq!(h.laplacian().eval(0.3, 0.7), 0.0);
        let s = Expr::parse("sin(pi*x)*sin(pi*y)").unwrap();
        let (x, y) = (0.3, 0.6);
        let expect = -2.0 * PI * PI * s.eval(x, y);
        assert!((s.laplacian().eval(x, y) - expect).abs() < 1e-12);
        let g = Expr::parse("exp(x)^y").unwrap();
        // exp(x y): Δ = (x² + y²) exp(x y)
        let lap = g.laplacian().eval(0.4, 0.5);
        assert!((lap - 0.41 * (0.2f64).exp()).abs() < 1e-12);
        let q = Expr::parse("1/(1+x)").unwrap();
        assert!((q.laplacian().eval(1.0, 0.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn non_finite_is_reported() {
        let e = Expr::parse("1/x").unwrap();
        assert!(matches!(e.eval_checked(0.0, 0.0), Err(ExprError::NotFinite { .. })));
    }
}
