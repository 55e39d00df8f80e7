//! A minimal arithmetic expression language for analytic fields.
//!
//! Grammar (recursive descent, `^` is right associative and binds tighter
//! than unary minus):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('+' | '-') unary | power
//! power   := primary ('^' unary)?
//! primary := number | constant | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Constants are `pi` and `e`; variables are `x1..xk` (base-plane
//! coordinates), `y1..ym` (normal coordinates) and `t`; functions are
//! `sin cos tan log exp sqrt abs` and the two-argument `pow`.

use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Log,
    Exp,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Self, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "log" => (Func::Log, 1),
            "exp" => (Func::Exp, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    X(usize),
    Y(usize),
    T,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_x: usize,
    max_y: usize,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            chars: source.chars().collect(),
            pos: 0,
            max_x: 0,
            max_y: 0,
        };
        p.skip_ws();
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error(format!("unexpected '{}'", p.chars[p.pos])));
        }
        Ok(Self {
            source: source.to_string(),
            root,
            max_x: p.max_x,
            max_y: p.max_y,
        })
    }

    /// A constant expression.
    pub fn constant(c: f64) -> Self {
        Self {
            source: format!("{c:e}"),
            root: Node::Num(c),
            max_x: 0,
            max_y: 0,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Rejects variables beyond `x{k}` or `y{codim}`.
    pub fn check_dims(&self, k: usize, codim: usize) -> Result<()> {
        if self.max_x > k {
            return Err(Error::Expr {
                column: 0,
                message: format!("x{} used but k = {k}", self.max_x),
            });
        }
        if self.max_y > codim {
            return Err(Error::Expr {
                column: 0,
                message: format!("y{} used but codimension is {codim}", self.max_y),
            });
        }
        Ok(())
    }

    /// Evaluates at base point `x`, normal coordinates `y` and time `t`.
    /// Missing variables read as zero.
    pub fn eval<T: Real>(&self, x: &[T], y: &[T], t: T) -> T {
        eval(&self.root, x, y, t)
    }
}

fn eval<T: Real>(n: &Node, x: &[T], y: &[T], t: T) -> T {
    match n {
        Node::Num(c) => T::lit(*c),
        Node::Var(Var::X(i)) => x.get(*i).copied().unwrap_or_else(T::zero),
        Node::Var(Var::Y(i)) => y.get(*i).copied().unwrap_or_else(T::zero),
        Node::Var(Var::T) => t,
        Node::Neg(a) => -eval(a, x, y, t),
        Node::Add(a, b) => eval(a, x, y, t) + eval(b, x, y, t),
        Node::Sub(a, b) => eval(a, x, y, t) - eval(b, x, y, t),
        Node::Mul(a, b) => eval(a, x, y, t) * eval(b, x, y, t),
        Node::Div(a, b) => eval(a, x, y, t) / eval(b, x, y, t),
        Node::Pow(a, b) => pow(eval(a, x, y, t), eval(b, x, y, t)),
        Node::Call(f, args) => {
            let a = eval(&args[0], x, y, t);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Log => a.ln(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Pow => pow(a, eval(&args[1], x, y, t)),
            }
        }
    }
}

/// Integer exponents use repeated multiplication so that `x^2` is exact.
fn pow<T: Real>(a: T, b: T) -> T {
    if b == b.round() && b.abs() <= T::lit(64.0) {
        a.powi(b.to_i32().unwrap_or(0))
    } else {
        a.powf(b)
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    max_x: usize,
    max_y: usize,
}

impl Parser {
    fn error(&self, message: String) -> Error {
        Error::Expr {
            column: self.pos + 1,
            message,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
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
        let base = self.primary()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of expression".into())),
            Some('(') => {
                self.eat('(');
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'".into()));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value = text.parse::<f64>().map_err(|_| Error::Expr {
            column: start + 1,
            message: format!("malformed number '{text}'"),
        })?;
        self.skip_ws();
        Ok(Node::Num(value))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        self.skip_ws();
        let bad = |message: String| Error::Expr {
            column: start + 1,
            message,
        };
        if let Some((func, arity)) = Func::lookup(&name) {
            if !self.eat('(') {
                return Err(self.error(format!("expected '(' after {name}")));
            }
            let mut args = vec![self.expr()?];
            while self.eat(',') {
                args.push(self.expr()?);
            }
            if !self.eat(')') {
                return Err(self.error("expected ')'".into()));
            }
            if args.len() != arity {
                return Err(bad(format!("{name} takes {arity} argument(s), got {}", args.len())));
            }
            return Ok(Node::Call(func, args));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "t" => return Ok(Node::Var(Var::T)),
            _ => {}
        }
        let (head, tail) = name.split_at(1);
        if let (Some(kind @ ('x' | 'y')), Ok(i)) = (head.chars().next(), tail.parse::<usize>()) {
            if i == 0 {
                return Err(bad(format!("variable indices start at 1, got {name}")));
            }
            return Ok(if kind == 'x' {
                self.max_x = self.max_x.max(i);
                Node::Var(Var::X(i - 1))
            } else {
                self.max_y = self.max_y.max(i);
                Node::Var(Var::Y(i - 1))
            });
        }
        Err(bad(format!("unknown identifier '{name}'")))
    }
}
