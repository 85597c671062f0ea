//! Arithmetic expression parsing and forward-mode differentiation.
//!
//! Expressions define the potentials from text: constants, declared
//! variables, `+ - * / ^`, unary minus, and the functions `sin`, `cos`,
//! `exp`, `sqrt`, `abs`, `min` (two arguments). `pi` is a builtin
//! constant. Precedence is `^` above unary minus above `* /` above
//! `+ -`; `+ - * /` associate left, `^` associates right.
//!
//! Differentiation is forward-mode along a seed direction, exact up to
//! rounding. `abs` uses the convention `sign(0) = 0`; `min` at a tie
//! takes the smaller of the two branch derivatives (the one-sided
//! directional derivative).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its declared variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Node,
    vars: Vec<String>,
}

/// Value/derivative pair for forward-mode evaluation.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Eval(format!("{what} produced a non-finite value")))
    }
}

impl ExprAst {
    /// Parses `text` against the declared variable names.
    pub fn parse(text: &str, vars: &[&str]) -> Result<ExprAst> {
        let owned: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let mut parser = Parser {
            bytes: text.as_bytes(),
            pos: 0,
            vars: &owned,
        };
        parser.skip_ws();
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(Error::Syntax {
                position: parser.pos,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(ExprAst { root, vars: owned })
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates at the given bindings (indexed like the declared vars).
    pub fn eval(&self, bindings: &[f64]) -> Result<f64> {
        assert_eq!(bindings.len(), self.vars.len(), "binding count mismatch");
        eval_node(&self.root, bindings)
    }

    /// Evaluates value and directional derivative along `seed`.
    pub fn eval_dual(&self, bindings: &[f64], seed: &[f64]) -> Result<(f64, f64)> {
        assert_eq!(bindings.len(), self.vars.len(), "binding count mismatch");
        assert_eq!(seed.len(), self.vars.len(), "seed count mismatch");
        let out = eval_dual_node(&self.root, bindings, seed)?;
        Ok((out.v, out.d))
    }
}

fn eval_node(node: &Node, bindings: &[f64]) -> Result<f64> {
    match node {
        Node::Const(c) => Ok(*c),
        Node::Var(i) => Ok(bindings[*i]),
        Node::Neg(a) => Ok(-eval_node(a, bindings)?),
        Node::Bin(op, a, b) => {
            let a = eval_node(a, bindings)?;
            let b = eval_node(b, bindings)?;
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            };
            finite(v, op_name(*op))
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], bindings)?;
            let v = match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Min => a.min(eval_node(&args[1], bindings)?),
            };
            finite(v, f.name())
        }
    }
}

fn eval_dual_node(node: &Node, bindings: &[f64], seed: &[f64]) -> Result<Dual> {
    match node {
        Node::Const(c) => Ok(Dual { v: *c, d: 0.0 }),
        Node::Var(i) => Ok(Dual {
            v: bindings[*i],
            d: seed[*i],
        }),
        Node::Neg(a) => {
            let a = eval_dual_node(a, bindings, seed)?;
            Ok(Dual { v: -a.v, d: -a.d })
        }
        Node::Bin(op, a, b) => {
            let a = eval_dual_node(a, bindings, seed)?;
            let b = eval_dual_node(b, bindings, seed)?;
            let out = match op {
                BinOp::Add => Dual {
                    v: a.v + b.v,
                    d: a.d + b.d,
                },
                BinOp::Sub => Dual {
                    v: a.v - b.v,
                    d: a.d - b.d,
                },
                BinOp::Mul => Dual {
                    v: a.v * b.v,
                    d: a.d * b.v + a.v * b.d,
                },
                BinOp::Div => Dual {
                    v: a.v / b.v,
                    d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
                },
                BinOp::Pow => {
                    let v = a.v.powf(b.v);
                    // Split the derivative so that integer powers of negative
                    // bases stay differentiable when the exponent is constant.
                    let mut d = 0.0;
                    if a.d != 0.0 {
                        d += b.v * a.v.powf(b.v - 1.0) * a.d;
                    }
                    if b.d != 0.0 {
                        d += v * a.v.ln() * b.d;
                    }
                    Dual { v, d }
                }
            };
            finite(out.v, op_name(*op))?;
            finite(out.d, op_name(*op))?;
            Ok(out)
        }
        Node::Call(f, args) => {
            let a = eval_dual_node(&args[0], bindings, seed)?;
            let out = match f {
                Func::Sin => Dual {
                    v: a.v.sin(),
                    d: a.d * a.v.cos(),
                },
                Func::Cos => Dual {
                    v: a.v.cos(),
                    d: -a.d * a.v.sin(),
                },
                Func::Exp => {
                    let e = a.v.exp();
                    Dual { v: e, d: a.d * e }
                }
                Func::Sqrt => {
                    let s = a.v.sqrt();
                    let d = if a.d == 0.0 { 0.0 } else { a.d * 0.5 / s };
                    Dual { v: s, d }
                }
                Func::Abs => Dual {
                    v: a.v.abs(),
                    d: a.d * sign_zero(a.v),
                },
                Func::Min => {
                    let b = eval_dual_node(&args[1], bindings, seed)?;
                    if a.v < b.v {
                        a
                    } else if b.v < a.v {
                        b
                    } else {
                        Dual {
                            v: a.v,
                            d: a.d.min(b.d),
                        }
                    }
                }
            };
            finite(out.v, f.name())?;
            finite(out.d, f.name())?;
            Ok(out)
        }
    }
}

fn sign_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn op_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Pow => "^",
    }
}

// Fully parenthesized printer; `parse(print(ast))` reproduces the tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

fn write_node(node: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Const(c) => {
            if *c == std::f64::consts::PI {
                write!(f, "pi")
            } else if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) {
                // The parser only ever yields nonnegative literals (a minus
                // sign parses as negation), so print negatives that way too.
                write!(f, "(-{:e})", -*c)
            } else {
                write!(f, "{c:e}")
            }
        }
        Node::Var(i) => write!(f, "{}", vars[*i]),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, vars, f)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            write!(f, "(")?;
            write_node(a, vars, f)?;
            write!(f, "{}", op_name(*op))?;
            write_node(b, vars, f)?;
            write!(f, ")")
        }
        Node::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (k, a) in args.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write_node(a, vars, f)?;
            }
            write!(f, ")")
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                position: self.pos,
                message: format!("expected `{}`", ch as char),
            })
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Node::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Node::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Node::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // factor := '-' factor | power
    fn factor(&mut self) -> Result<Node> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom ('^' factor)?   -- right associative, rhs admits unary minus
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        match self.peek() {
            None => Err(Error::Syntax {
                position: self.pos,
                message: "unexpected end of input".into(),
            }),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                self.expect(b')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(Error::Syntax {
                position: self.pos,
                message: format!("unexpected character `{}`", c as char),
            }),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // `1e` followed by a non-digit: the `e` was not an exponent.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii slice");
        text.parse::<f64>().map(Node::Const).map_err(|_| Error::Syntax {
            position: start,
            message: format!("invalid number `{text}`"),
        })
    }

    fn identifier(&mut self) -> Result<Node> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii slice");
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let func = Func::from_name(name).ok_or_else(|| Error::UnknownIdentifier(name.to_string()))?;
            self.pos += 1;
            let mut args = vec![self.expr()?];
            loop {
                self.skip_ws();
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => {
                        return Err(Error::Syntax {
                            position: self.pos,
                            message: "expected `,` or `)` in argument list".into(),
                        })
                    }
                }
            }
            if args.len() != func.arity() {
                return Err(Error::Syntax {
                    position: start,
                    message: format!(
                        "`{}` takes {} argument(s), got {}",
                        func.name(),
                        func.arity(),
                        args.len()
                    ),
                });
            }
            return Ok(Node::Call(func, args));
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(idx) = self.vars.iter().position(|v| v == name) {
            return Ok(Node::Var(idx));
        }
        Err(Error::UnknownIdentifier(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse1(text: &str) -> ExprAst {
        ExprAst::parse(text, &["t", "x1"]).expect("parse")
    }

    #[test]
    fn precedence_and_arithmetic() {
        assert_eq!(parse1("2+3*4").eval(&[0.0, 0.0]).unwrap(), 14.0);
        assert_eq!(parse1("(x1^2-1)^2").eval(&[0.0, 2.0]).unwrap(), 9.0);
        assert_eq!(parse1("abs(-2)^3").eval(&[0.0, 0.0]).unwrap(), 8.0);
        // unary minus binds below ^
        assert_eq!(parse1("-x1^2").eval(&[0.0, 3.0]).unwrap(), -9.0);
        assert_eq!(parse1("2^-1").eval(&[0.0, 0.0]).unwrap(), 0.5);
        // right associativity of ^
        assert_eq!(parse1("2^3^2").eval(&[0.0, 0.0]).unwrap(), 512.0);
        // left associativity of -
        assert_eq!(parse1("8-4-2").eval(&[0.0, 0.0]).unwrap(), 2.0);
        assert!((parse1("min(2,1+0.5)").eval(&[0.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn truncated_input_positions() {
        match ExprAst::parse("x1 +", &["x1"]) {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match ExprAst::parse("(1+2", &["x1"]) {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier() {
        match ExprAst::parse("sin(q)", &["t"]) {
            Err(Error::UnknownIdentifier(name)) => assert_eq!(name, "q"),
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn eval_error_on_non_finite() {
        assert!(matches!(parse1("sqrt(-1)").eval(&[0.0, 0.0]), Err(Error::Eval(_))));
        assert!(matches!(parse1("1/0").eval(&[0.0, 0.0]), Err(Error::Eval(_))));
    }

    #[test]
    fn pi_constant() {
        let v = parse1("sin(pi/2)").eval(&[0.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_polynomial() {
        let ast = ExprAst::parse("x1^2*x2", &["x1", "x2"]).unwrap();
        let (v, d) = ast.eval_dual(&[3.0, 2.0], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 18.0);
        assert_eq!(d, 12.0);
    }

    #[test]
    fn dual_zero_seed_is_zero() {
        for text in ["sqrt(x1)", "abs(x1)", "sin(t)*x1^3", "min(t,x1)"] {
            let ast = parse1(text);
            let (_, d) = ast.eval_dual(&[0.7, 0.0], &[0.0, 0.0]).unwrap();
            assert_eq!(d, 0.0, "{text}");
        }
    }

    #[test]
    fn dual_matches_central_difference() {
        let ast = parse1("sin(t)");
        let (_, d) = ast.eval_dual(&[0.3, 0.0], &[1.0, 0.0]).unwrap();
        let h = 1e-6;
        let fd = (ast.eval(&[0.3 + h, 0.0]).unwrap() - ast.eval(&[0.3 - h, 0.0]).unwrap()) / (2.0 * h);
        assert!((d - fd).abs() < 1e-8, "{d} vs {fd}");
    }

    #[test]
    fn abs_sign_convention_at_zero() {
        let ast = parse1("abs(x1)");
        let (v, d) = ast.eval_dual(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(d, 0.0);
    }

    // Smooth random expressions for the derivative/finite-difference
    // property. Literals are nonnegative, as the parser produces them;
    // negative values arise through negation nodes.
    fn smooth_node(vars: usize) -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..2.0).prop_map(Node::Const),
            (0..vars).prop_map(Node::Var),
        ];
        leaf.prop_recursive(4, 48, 4, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Bin(
                    BinOp::Add,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Bin(
                    BinOp::Sub,
                    Box::new(a),
                    Box::new(b)
                )),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Node::Bin(
                    BinOp::Mul,
                    Box::new(a),
                    Box::new(b)
                )),
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                inner.clone().prop_map(|a| Node::Call(Func::Sin, vec![a])),
                inner.clone().prop_map(|a| Node::Call(Func::Cos, vec![a])),
                (inner.clone(), 2u32..4).prop_map(|(a, k)| Node::Bin(
                    BinOp::Pow,
                    Box::new(a),
                    Box::new(Node::Const(k as f64))
                )),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn derivative_matches_finite_difference(
            node in smooth_node(2),
            x in -1.5f64..1.5,
            y in -1.5f64..1.5,
        ) {
            let ast = ExprAst { root: node, vars: vec!["x1".into(), "x2".into()] };
            let seed = [1.0, -0.5];
            if let Ok((v, d)) = ast.eval_dual(&[x, y], &seed) {
                prop_assume!(v.abs() < 1e6 && d.abs() < 1e6);
                let h = 1e-6;
                let plus = ast.eval(&[x + h * seed[0], y + h * seed[1]]);
                let minus = ast.eval(&[x - h * seed[0], y - h * seed[1]]);
                if let (Ok(p), Ok(m)) = (plus, minus) {
                    let fd = (p - m) / (2.0 * h);
                    let tol = 1e-6 * (1.0 + d.abs().max(fd.abs()));
                    prop_assert!((d - fd).abs() <= tol.max(2e-5), "d={d} fd={fd}");
                }
            }
        }

        #[test]
        fn print_parse_round_trip(node in smooth_node(2)) {
            let ast = ExprAst { root: node, vars: vec!["x1".into(), "x2".into()] };
            let printed = ast.to_string();
            let reparsed = ExprAst::parse(&printed, &["x1", "x2"]).expect("reparse");
            prop_assert_eq!(&reparsed, &ast);
            // idempotence: printing again yields the same text
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
