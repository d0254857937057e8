//! Scalar expressions on the torus and permittivity grids.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := number | 'pi' | 'x' INT | FUNC '(' expr ')' | '(' expr ')' | '-' factor
//! FUNC   := cos | sin | exp | sqrt
//! ```
//!
//! Variables are 1-based torus coordinates `x1 … xn`. `sqrt` only accepts
//! nonnegative constant arguments, which is what projection-matrix entries
//! such as `sqrt(5)` need.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Constant(f64),
    /// Zero-based variable index.
    Variable(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// A parsed scalar expression over `n` torus variables.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    n: usize,
    source: String,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.n == other.n
    }
}

impl Expression {
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let mut parser = Parser {
            src: text.as_bytes(),
            pos: 0,
            n,
        };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Self {
            root,
            n,
            source: text.to_string(),
        })
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            root: Node::Constant(value),
            n,
            source: format!("{value:?}"),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Constant value when the expression does not reference any variable.
    pub fn as_constant(&self) -> Option<f64> {
        if contains_variable(&self.root) {
            None
        } else {
            eval_node(&self.root, &[]).ok()
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        eval_node(&self.root, x)
    }
}

impl Expression {
    /// Partial derivative with respect to the zero-based variable `var`.
    pub fn derivative(&self, var: usize) -> Expression {
        let root = simplify(differentiate(&self.root, var));
        let mut text = String::new();
        let _ = fmt::write(&mut text, format_args!("{}", Shown(&root)));
        Expression {
            root,
            n: self.n,
            source: text,
        }
    }
}

struct Shown<'a>(&'a Node);

impl fmt::Display for Shown<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(self.0, f)
    }
}

fn differentiate(node: &Node, var: usize) -> Node {
    use BinaryOp::*;
    use UnaryOp::*;
    let c = Node::Constant;
    let un = |op, a: Node| Node::Unary(op, Box::new(a));
    let bin = |op, a: Node, b: Node| Node::Binary(op, Box::new(a), Box::new(b));
    match node {
        Node::Constant(_) => c(0.0),
        Node::Variable(i) => c(if *i == var { 1.0 } else { 0.0 }),
        Node::Unary(op, a) => {
            let da = differentiate(a, var);
            match op {
                Neg => un(Neg, da),
                Exp => bin(Mul, node.clone(), da),
                Sin => bin(Mul, un(Cos, (**a).clone()), da),
                Cos => bin(Mul, un(Neg, un(Sin, (**a).clone())), da),
                // argument is constant by construction
                Sqrt => c(0.0),
            }
        }
        Node::Binary(op, a, b) => {
            let (da, db) = (differentiate(a, var), differentiate(b, var));
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                Add => bin(Add, da, db),
                Sub => bin(Sub, da, db),
                Mul => bin(Add, bin(Mul, da, b), bin(Mul, a, db)),
                Div => bin(
                    Div,
                    bin(Sub, bin(Mul, da, b.clone()), bin(Mul, a, db)),
                    bin(Mul, b.clone(), b),
                ),
            }
        }
    }
}

fn is_const(node: &Node, v: f64) -> bool {
    matches!(node, Node::Constant(x) if *x == v)
}

/// Removes the zeros and ones that differentiation leaves behind.
fn simplify(node: Node) -> Node {
    use BinaryOp::*;
    match node {
        Node::Unary(op, a) => {
            let a = simplify(*a);
            if op == UnaryOp::Neg && is_const(&a, 0.0) {
                return Node::Constant(0.0);
            }
            Node::Unary(op, Box::new(a))
        }
        Node::Binary(op, a, b) => {
            let (a, b) = (simplify(*a), simplify(*b));
            match op {
                Add if is_const(&a, 0.0) => b,
                Add | Sub if is_const(&b, 0.0) => a,
                Sub if is_const(&a, 0.0) => Node::Unary(UnaryOp::Neg, Box::new(b)),
                Mul if is_const(&a, 0.0) || is_const(&b, 0.0) => Node::Constant(0.0),
                Mul if is_const(&a, 1.0) => b,
                Mul | Div if is_const(&b, 1.0) => a,
                Div if is_const(&a, 0.0) => Node::Constant(0.0),
                _ => Node::Binary(op, Box::new(a), Box::new(b)),
            }
        }
        other => other,
    }
}

impl fmt::Display for Expression {
    /// Fully parenthesized form; reparsing it yields the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Constant(v) => write!(f, "{v:?}"),
        Node::Variable(i) => write!(f, "x{}", i + 1),
        Node::Unary(UnaryOp::Neg, a) => {
            write!(f, "(-")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Unary(op, a) => {
            let name = match op {
                UnaryOp::Exp => "exp",
                UnaryOp::Sin => "sin",
                UnaryOp::Cos => "cos",
                UnaryOp::Sqrt => "sqrt",
                UnaryOp::Neg => unreachable!(),
            };
            write!(f, "{name}(")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Binary(op, a, b) => {
            let sym = match op {
                BinaryOp::Add => '+',
                BinaryOp::Sub => '-',
                BinaryOp::Mul => '*',
                BinaryOp::Div => '/',
            };
            write!(f, "(")?;
            write_node(a, f)?;
            write!(f, "{sym}")?;
            write_node(b, f)?;
            write!(f, ")")
        }
    }
}

fn contains_variable(node: &Node) -> bool {
    match node {
        Node::Constant(_) => false,
        Node::Variable(_) => true,
        Node::Unary(_, a) => contains_variable(a),
        Node::Binary(_, a, b) => contains_variable(a) || contains_variable(b),
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64> {
    Ok(match node {
        Node::Constant(v) => *v,
        Node::Variable(i) => x[*i],
        Node::Unary(op, a) => {
            let a = eval_node(a, x)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Sqrt => a.sqrt(),
            }
        }
        Node::Binary(op, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(Error::DivisionByZero);
                    }
                    a / b
                }
            }
        }
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", ch as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinaryOp::Add,
                Some(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinaryOp::Mul,
                Some(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Unary(UnaryOp::Neg, Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < s.len() && (s[p] == b'+' || s[p] == b'-') {
                p += 1;
            }
            if p < s.len() && s[p].is_ascii_digit() {
                while p < s.len() && s[p].is_ascii_digit() {
                    p += 1;
                }
                self.pos = p;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii slice");
        text.parse::<f64>().map(Node::Constant).map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number '{text}'"),
        })
    }

    fn word(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let func = match word {
            "pi" => return Ok(Node::Constant(PI)),
            "cos" => UnaryOp::Cos,
            "sin" => UnaryOp::Sin,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            _ => return self.variable(word, start),
        };
        self.expect(b'(')?;
        let arg_start = self.pos;
        let arg = self.expr()?;
        self.expect(b')')?;
        if func == UnaryOp::Sqrt {
            if contains_variable(&arg) {
                return Err(Error::Syntax {
                    offset: arg_start,
                    message: "sqrt argument must be constant".into(),
                });
            }
            let value = eval_node(&arg, &[])?;
            if value < 0.0 {
                return Err(Error::NegativeSqrt(value));
            }
        }
        Ok(Node::Unary(func, Box::new(arg)))
    }

    fn variable(&self, word: &str, start: usize) -> Result<Node> {
        let index = word
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| Error::Syntax {
                offset: start,
                message: format!("unknown identifier '{word}'"),
            })?;
        if index == 0 || index > self.n {
            return Err(Error::VariableOutOfRange { index, n: self.n });
        }
        Ok(Node::Variable(index - 1))
    }
}

/// Convenience wrapper for [`Expression::parse`].
pub fn parse_expression(text: &str, n: usize) -> Result<Expression> {
    Expression::parse(text, n)
}

/// Evaluates `e` at every point `x = (m₁h, …, m_nh)` of the uniform torus
/// grid with `points` points per dimension, column-major (first index
/// fastest).
pub fn sample_scalar(e: &Expression, points: usize) -> Result<Vec<f64>> {
    let n = e.num_vars();
    let total = u32::try_from(n)
        .ok()
        .and_then(|p| points.checked_pow(p))
        .ok_or_else(|| Error::InvalidParameter(format!("grid {points}^{n} is too large")))?;
    if points == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    let h = 2.0 * PI / points as f64;
    let mut m = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        if idx > 0 {
            for (mi, xi) in m.iter_mut().zip(x.iter_mut()) {
                *mi += 1;
                if *mi < points {
                    *xi = *mi as f64 * h;
                    break;
                }
                *mi = 0;
                *xi = 0.0;
            }
        }
        let v = eval_node(e.root(), &x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                index: idx,
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Permittivity sampled on the torus grid together with its reciprocal.
#[derive(Debug, Clone)]
pub struct PermittivityField {
    points_per_dim: usize,
    values: Vec<f64>,
    inverse: Vec<f64>,
    bounds: (f64, f64),
}

impl PermittivityField {
    /// Samples `e` and checks that every value is strictly positive.
    pub fn sample(e: &Expression, points_per_dim: usize) -> Result<Self> {
        let values = sample_scalar(e, points_per_dim)?;
        Self::from_values(values, points_per_dim)
    }

    pub fn from_values(values: Vec<f64>, points_per_dim: usize) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositivePermittivity { value, index });
            }
            lo = lo.min(value);
            hi = hi.max(value);
        }
        let inverse = values.iter().map(|v| 1.0 / v).collect();
        Ok(Self {
            points_per_dim,
            values,
            inverse,
            bounds: (lo, hi),
        })
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }

    /// Observed `(ε_A, ε_B)`.
    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Grid mean of `ε⁻¹`, i.e. its zeroth Fourier coefficient.
    pub fn mean_inverse(&self) -> f64 {
        self.inverse.iter().sum::<f64>() / self.inverse.len() as f64
    }

    /// True when `ε` takes a single value on the whole grid.
    pub fn is_uniform(&self) -> bool {
        self.bounds.0 == self.bounds.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_permittivities() {
        let e = parse_expression("3+cos(x1)*cos(x2)*cos(x3)+cos(x4)*cos(x5)*cos(x6)", 6).unwrap();
        assert_eq!(e.evaluate(&[0.0; 6]).unwrap(), 5.0);
        let e = parse_expression(
            "1/(10+cos(x1)+cos(x2)+cos(x3)+cos(x4)+cos(x5)+cos(x6))",
            6,
        )
        .unwrap();
        assert!((e.evaluate(&[0.0; 6]).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert_eq!(parse_expression("2", 3).unwrap().as_constant(), Some(2.0));
    }

    #[test]
    fn evaluation() {
        let e = parse_expression("cos(x1)", 1).unwrap();
        assert_eq!(e.evaluate(&[0.0]).unwrap(), 1.0);
        let e = parse_expression("exp(sin(x1)*sin(x2)*sin(x3))", 6).unwrap();
        let h = PI / 2.0;
        let v = e.evaluate(&[h, h, h, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-12);
        let e = parse_expression("1/(x1-1)", 1).unwrap();
        assert_eq!(e.evaluate(&[1.0]).unwrap_err(), Error::DivisionByZero);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expression(" 2 + 3 * 4 - -1 ", 0).unwrap();
        assert_eq!(e.as_constant(), Some(15.0));
        let e = parse_expression("8/2/2", 0).unwrap();
        assert_eq!(e.as_constant(), Some(2.0));
        let e = parse_expression("1e-4*2.5E2 + sqrt(5)", 0).unwrap();
        assert!((e.as_constant().unwrap() - (0.025 + 5f64.sqrt())).abs() < 1e-15);
        assert!((parse_expression("pi", 0).unwrap().as_constant().unwrap() - PI).abs() == 0.0);
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_expression("1 +", 1),
            Err(Error::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse_expression("cos x1", 1),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_expression("foo(1)", 1),
            Err(Error::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("(1", 1),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(parse_expression("1 2", 1), Err(Error::Syntax { offset: 2, .. })));
        assert_eq!(
            parse_expression("x7", 6).unwrap_err(),
            Error::VariableOutOfRange { index: 7, n: 6 }
        );
        assert!(parse_expression("x0", 6).is_err());
        assert!(matches!(
            parse_expression("sqrt(x1)", 1),
            Err(Error::Syntax { .. })
        ));
        assert_eq!(
            parse_expression("sqrt(1-5)", 1).unwrap_err(),
            Error::NegativeSqrt(-4.0)
        );
    }

    #[test]
    fn display_reparses() {
        let text = "-(x1+2)*cos(x2)/sqrt(2) - exp(-x3)";
        let e = parse_expression(text, 3).unwrap();
        let again = parse_expression(&e.to_string(), 3).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn grid_sampling() {
        let e = parse_expression("2", 3).unwrap();
        let field = PermittivityField::sample(&e, 4).unwrap();
        assert_eq!(field.values().len(), 64);
        assert!(field.values().iter().all(|&v| v == 2.0));
        assert_eq!(field.bounds(), (2.0, 2.0));
        assert!(field.is_uniform());

        let e = parse_expression("3+cos(x1)", 1).unwrap();
        let values = sample_scalar(&e, 4).unwrap();
        let expected = [4.0, 3.0, 2.0, 3.0];
        for (v, x) in values.iter().zip(expected) {
            assert!((v - x).abs() < 1e-15);
        }
    }

    #[test]
    fn column_major_grid_order() {
        let e = parse_expression("x1 + 10*x2", 2).unwrap();
        let v = sample_scalar(&e, 2).unwrap();
        assert_eq!(v, vec![0.0, PI, 10.0 * PI, 11.0 * PI]);
    }

    #[test]
    fn example_four_bounds() {
        let e = parse_expression(
            "1/(10+cos(x1)+cos(x2)+cos(x3)+cos(x4)+cos(x5)+cos(x6))",
            6,
        )
        .unwrap();
        let field = PermittivityField::sample(&e, 4).unwrap();
        let (lo, hi) = field.bounds();
        assert!(lo >= 1.0 / 16.0 - 1e-15 && hi <= 0.25 + 1e-15);
        assert!((lo - 1.0 / 16.0).abs() < 1e-15);
        assert!((hi - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        let e = parse_expression("cos(x1)", 1).unwrap();
        assert!(matches!(
            PermittivityField::sample(&e, 4),
            Err(Error::NonPositivePermittivity { index: 2, .. })
        ));
        let e = parse_expression("1/cos(x1)", 1).unwrap();
        assert!(PermittivityField::sample(&e, 4).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = parse_expression("exp(sin(x1)*sin(x2))/(2+cos(x3)) - x1*x3 + sqrt(5)*x2", 3).unwrap();
        let x = [0.3, -1.1, 2.2];
        for var in 0..3 {
            let d = e.derivative(var);
            let h = 1e-5;
            let mut xp = x;
            let mut xm = x;
            xp[var] += h;
            xm[var] -= h;
            let fd = (e.evaluate(&xp).unwrap() - e.evaluate(&xm).unwrap()) / (2.0 * h);
            assert!((d.evaluate(&x).unwrap() - fd).abs() < 1e-8, "var {var}");
            // the printed form reparses to the same tree
            assert_eq!(parse_expression(&d.to_string(), 3).unwrap(), d);
        }
        assert_eq!(parse_expression("7", 2).unwrap().derivative(0).as_constant(), Some(0.0));
    }

}
