//! Expression trees in the single variable `x`.

use std::fmt;

use super::parse::{parse, ParseError};

/// Unary functions understood by the grammar.
///
/// `Sgn` is not usually written by hand; it appears when differentiating
/// `abs`, and is printable/parseable so derivative trees round-trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Sgn,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sgn" => Func::Sgn,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Sgn => sgn(v),
        }
    }
}

/// Sign with the convention `sgn(0) = 0`.
pub fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        v * 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    X,
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Power with a constant exponent; `f(x)^g(x)` is not representable.
    Pow(Box<Node>, f64),
}

/// A parsed scalar function of `x`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileExpr {
    root: Node,
}

impl ProfileExpr {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn parse(source: &str) -> Result<Self, ParseError> {
        parse(source)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    /// Exact symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> ProfileExpr {
        ProfileExpr::new(self.root.derivative())
    }

    pub fn is_constant(&self) -> bool {
        !self.root.contains_x()
    }

    /// True when some `abs`/`sgn` argument vanishes at `x`, i.e. the
    /// derivative there is only one-sided.
    pub fn is_kink(&self, x: f64) -> bool {
        self.root.kink_at(x)
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl std::str::FromStr for ProfileExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Node {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::X => x,
            Node::Neg(u) => -u.eval(x),
            Node::Call(func, u) => func.apply(u.eval(x)),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(u, p) => pow(u.eval(x), *p),
        }
    }

    pub fn contains_x(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::X => true,
            Node::Neg(u) | Node::Call(_, u) | Node::Pow(u, _) => u.contains_x(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.contains_x() || b.contains_x()
            }
        }
    }

    fn kink_at(&self, x: f64) -> bool {
        match self {
            Node::Const(_) | Node::X => false,
            Node::Call(Func::Abs | Func::Sgn, u) => u.eval(x).abs() < 1e-12 || u.kink_at(x),
            Node::Neg(u) | Node::Call(_, u) | Node::Pow(u, _) => u.kink_at(x),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.kink_at(x) || b.kink_at(x)
            }
        }
    }

    pub fn derivative(&self) -> Node {
        match self {
            Node::Const(_) => Node::Const(0.0),
            Node::X => Node::Const(1.0),
            Node::Neg(u) => neg(u.derivative()),
            Node::Add(a, b) => add(a.derivative(), b.derivative()),
            Node::Sub(a, b) => sub(a.derivative(), b.derivative()),
            Node::Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Node::Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                power((**b).clone(), 2.0),
            ),
            Node::Pow(u, p) => mul(
                mul(Node::Const(*p), power((**u).clone(), p - 1.0)),
                u.derivative(),
            ),
            Node::Call(func, u) => {
                let inner = (**u).clone();
                let outer = match func {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Sqrt => div(
                        Node::Const(1.0),
                        mul(Node::Const(2.0), call(Func::Sqrt, inner)),
                    ),
                    Func::Abs => call(Func::Sgn, inner),
                    Func::Sgn => return Node::Const(0.0),
                };
                mul(outer, u.derivative())
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            Node::Const(_) | Node::X | Node::Call(..) => 5,
        }
    }
}

fn pow(base: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        base.powi(p as i32)
    } else {
        base.powf(p)
    }
}

// Constructors with constant folding and the 0/1 identities. Nothing more:
// derivative trees stay readable without a simplifier.

fn as_const(n: &Node) -> Option<f64> {
    match n {
        Node::Const(c) => Some(*c),
        _ => None,
    }
}

fn neg(u: Node) -> Node {
    match u {
        Node::Const(c) => Node::Const(-c),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Node::Const(x + y),
        (Some(z), _) if z == 0.0 => b,
        (_, Some(z)) if z == 0.0 => a,
        _ => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Node::Const(x - y),
        (Some(z), _) if z == 0.0 => neg(b),
        (_, Some(z)) if z == 0.0 => a,
        _ => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Node::Const(x * y),
        (Some(z), _) | (_, Some(z)) if z == 0.0 => Node::Const(0.0),
        (Some(o), _) if o == 1.0 => b,
        (_, Some(o)) if o == 1.0 => a,
        (Some(m), _) if m == -1.0 => neg(b),
        (_, Some(m)) if m == -1.0 => neg(a),
        _ => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Node::Const(x / y),
        (Some(z), _) if z == 0.0 => Node::Const(0.0),
        (_, Some(o)) if o == 1.0 => a,
        _ => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn power(u: Node, p: f64) -> Node {
    if p == 0.0 {
        return Node::Const(1.0);
    }
    if p == 1.0 {
        return u;
    }
    match u {
        Node::Const(c) => Node::Const(pow(c, p)),
        other => Node::Pow(Box::new(other), p),
    }
}

fn call(func: Func, u: Node) -> Node {
    Node::Call(func, Box::new(u))
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_nan() {
        write!(f, "(0/0)")
    } else if c.is_infinite() {
        write!(f, "({}1/0)", if c < 0.0 { "-" } else { "" })
    } else if c.is_sign_negative() {
        write!(f, "(-{})", -c)
    } else {
        write!(f, "{c}")
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Parenthesise every operand below its parent's precedence, and
        // the right operand of - and / at equal precedence.
        let wrap = |f: &mut fmt::Formatter<'_>, child: &Node, min: u8| -> fmt::Result {
            if child.precedence() < min {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        };
        match self {
            Node::Const(c) => write_const(f, *c),
            Node::X => write!(f, "x"),
            Node::Neg(u) => match **u {
                // keep `-(2)` apart from the literal `-2`
                Node::Const(c) if !c.is_sign_negative() => write!(f, "-({c})"),
                _ => {
                    write!(f, "-")?;
                    wrap(f, u, 4)
                }
            },
            Node::Call(func, u) => write!(f, "{}({u})", func.name()),
            Node::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Node::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Node::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Node::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Node::Pow(u, p) => {
                wrap(f, u, 5)?;
                write!(f, "^")?;
                write_const(f, *p)
            }
        }
    }
}
