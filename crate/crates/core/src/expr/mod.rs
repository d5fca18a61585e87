//! Closed-form coordinate expressions with exact derivatives.
//!
//! Expressions are parsed once and then evaluated as truncated Taylor
//! values ([`Jet`]) of order 0..=3 at arbitrary points. Derivatives are
//! propagated algebraically; no finite differences are involved.
//!
//! Non-integer powers lower to `exp(b * log(a))` and require `a > 0`;
//! integer exponents (literal, possibly negated) use repeated
//! multiplication and accept any nonzero base.

mod jet;
mod parse;

use std::fmt;

pub use jet::{Jet, MAX_ORDER};

use crate::error::{GeomError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    /// Literal integer exponent, if the node is one (`3`, `-2`, ...).
    fn integer_literal(&self) -> Option<i32> {
        let v = match self {
            Node::Const(c) => *c,
            Node::Neg(inner) => match inner.as_ref() {
                Node::Const(c) => -*c,
                _ => return None,
            },
            _ => return None,
        };
        (v.fract() == 0.0 && v.abs() <= 1024.0).then_some(v as i32)
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            Node::Const(_) | Node::Var(_) | Node::Call(..) => 5,
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }
}

/// A parsed coordinate expression over a fixed number of variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Node,
    names: Vec<String>,
}

fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

impl Expression {
    /// Parses `source` over variables `x1..x<dim>`.
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        Self::parse_with_names(source, &default_names(dim))
    }

    /// Parses `source` with `names` as coordinate aliases; the canonical
    /// `x1..xn` spellings stay valid.
    pub fn parse_with_names(source: &str, names: &[String]) -> Result<Self> {
        let root = parse::Parser::new(source, names)?.parse_all()?;
        Ok(Expression {
            root,
            names: names.to_vec(),
        })
    }

    pub fn from_node(root: Node, dim: usize) -> Result<Self> {
        if let Some(i) = root.max_var() {
            if i >= dim {
                return Err(GeomError::VariableOutOfRange {
                    name: format!("x{}", i + 1),
                    dim,
                });
            }
        }
        Ok(Expression {
            root,
            names: default_names(dim),
        })
    }

    pub fn constant(c: f64, dim: usize) -> Self {
        Expression {
            root: Node::Const(c),
            names: default_names(dim),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// True when the expression contains no variables.
    pub fn is_constant(&self) -> bool {
        self.root.max_var().is_none()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(self.eval_taylor(point, 0)?.value())
    }

    /// Value and all partial derivatives up to `order` at `point`.
    pub fn eval_taylor(&self, point: &[f64], order: usize) -> Result<Jet> {
        if point.len() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        assert!(order <= MAX_ORDER);
        let out = self.eval_node(&self.root, point, order)?;
        if !out.is_finite() {
            return Err(self.domain_error(&self.root, point, "non-finite result"));
        }
        Ok(out)
    }

    fn domain_error(&self, node: &Node, point: &[f64], reason: &str) -> GeomError {
        GeomError::Domain {
            expr: Unparse { node, names: &self.names }.to_string(),
            point: point.to_vec(),
            reason: reason.to_string(),
        }
    }

    fn eval_node(&self, node: &Node, x: &[f64], order: usize) -> Result<Jet> {
        let n = x.len();
        Ok(match node {
            Node::Const(c) => Jet::constant(n, order, *c),
            Node::Var(i) => Jet::variable(n, order, *i, x[*i]),
            Node::Neg(a) => -self.eval_node(a, x, order)?,
            Node::Add(a, b) => self.eval_node(a, x, order)? + self.eval_node(b, x, order)?,
            Node::Sub(a, b) => self.eval_node(a, x, order)? - self.eval_node(b, x, order)?,
            Node::Mul(a, b) => self.eval_node(a, x, order)? * self.eval_node(b, x, order)?,
            Node::Div(a, b) => {
                let num = self.eval_node(a, x, order)?;
                let den = self.eval_node(b, x, order)?;
                if den.value() == 0.0 {
                    return Err(self.domain_error(node, x, "division by zero"));
                }
                num * den.recip()
            }
            Node::Pow(a, b) => {
                let base = self.eval_node(a, x, order)?;
                if let Some(k) = b.integer_literal() {
                    if k < 0 && base.value() == 0.0 {
                        return Err(self.domain_error(node, x, "zero raised to a negative power"));
                    }
                    base.powi(k)
                } else {
                    if base.value() <= 0.0 {
                        return Err(self.domain_error(node, x, "non-integer power of a non-positive base"));
                    }
                    let exp = self.eval_node(b, x, order)?;
                    (exp * base.ln()).exp()
                }
            }
            Node::Call(f, a) => {
                let arg = self.eval_node(a, x, order)?;
                let v = arg.value();
                let out = match f {
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Tan => {
                        if v.cos() == 0.0 {
                            return Err(self.domain_error(node, x, "tan pole"));
                        }
                        arg.tan()
                    }
                    Func::Sinh => arg.sinh(),
                    Func::Cosh => arg.cosh(),
                    Func::Tanh => arg.tanh(),
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(self.domain_error(node, x, "log of a non-positive value"));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 || (v == 0.0 && order > 0) {
                            return Err(self.domain_error(node, x, "sqrt outside its smooth domain"));
                        }
                        arg.sqrt()
                    }
                };
                if !out.is_finite() {
                    return Err(self.domain_error(node, x, "non-finite result"));
                }
                out
            }
        })
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Unparse {
            node: &self.root,
            names: &self.names,
        }
        .fmt(f)
    }
}

struct Unparse<'a> {
    node: &'a Node,
    names: &'a [String],
}

impl Unparse<'_> {
    fn child(&self, node: &Node, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = Unparse {
            node,
            names: self.names,
        };
        if node.precedence() < min_prec {
            write!(f, "({inner})")
        } else {
            write!(f, "{inner}")
        }
    }
}

impl fmt::Display for Unparse<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => match self.names.get(*i) {
                Some(name) => f.write_str(name),
                None => write!(f, "x{}", i + 1),
            },
            Node::Neg(a) => {
                f.write_str("-")?;
                self.child(a, 3, f)
            }
            Node::Add(a, b) | Node::Sub(a, b) => {
                self.child(a, 1, f)?;
                f.write_str(if matches!(self.node, Node::Add(..)) { " + " } else { " - " })?;
                self.child(b, 2, f)
            }
            Node::Mul(a, b) | Node::Div(a, b) => {
                self.child(a, 2, f)?;
                f.write_str(if matches!(self.node, Node::Mul(..)) { "*" } else { "/" })?;
                self.child(b, 3, f)
            }
            Node::Pow(a, b) => {
                self.child(a, 5, f)?;
                f.write_str("^")?;
                self.child(b, 3, f)
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.child(a, 1, f)?;
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> Box<Node> {
        Box::new(Node::Var(i))
    }

    #[test]
    fn precedence_and_calls() {
        let e = Expression::parse("x1^2 + sin(x2)", 2).unwrap();
        assert_eq!(
            *e.root(),
            Node::Add(
                Box::new(Node::Pow(v(0), Box::new(Node::Const(2.0)))),
                Box::new(Node::Call(Func::Sin, v(1)))
            )
        );
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let e = Expression::parse("-x1^2^3", 1).unwrap();
        let expected = Node::Neg(Box::new(Node::Pow(
            v(0),
            Box::new(Node::Pow(Box::new(Node::Const(2.0)), Box::new(Node::Const(3.0)))),
        )));
        assert_eq!(*e.root(), expected);
    }

    #[test]
    fn rational_expression_parses() {
        let e = Expression::parse("1/(1+x1*x1)", 1).unwrap();
        assert!((e.eval(&[1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_variable_is_reported() {
        let err = Expression::parse("x3", 2).unwrap_err();
        assert!(matches!(err, GeomError::VariableOutOfRange { dim: 2, .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Expression::parse("x1 + * x2", 2).unwrap_err() {
            GeomError::Syntax { pos, .. } => assert_eq!(pos, 5),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            Expression::parse("foo(x1)", 1).unwrap_err(),
            GeomError::UnknownIdentifier { .. }
        ));
        assert!(matches!(Expression::parse("", 1).unwrap_err(), GeomError::Syntax { .. }));
        assert!(matches!(Expression::parse("(x1", 1).unwrap_err(), GeomError::Syntax { .. }));
    }

    #[test]
    fn aliases_and_builtin_constants() {
        let names = vec!["r".to_string(), "theta".to_string()];
        let e = Expression::parse_with_names("r^2*sin(theta) + pi - e + x1", &names).unwrap();
        let val = e.eval(&[2.0, 0.5]).unwrap();
        let want = 4.0 * 0.5f64.sin() + std::f64::consts::PI - std::f64::consts::E + 2.0;
        assert!((val - want).abs() < 1e-14);
        assert_eq!(e.to_string(), "r^2*sin(theta) + 3.141592653589793 - 2.718281828459045 + r");
    }

    #[test]
    fn taylor_examples() {
        let e = Expression::parse("x1*x2", 2).unwrap();
        let j = e.eval_taylor(&[1.0, 1.0], 2).unwrap();
        assert_eq!(j.value(), 1.0);
        assert_eq!(j.gradient(), &[1.0, 1.0]);
        assert_eq!(j.hessian(), &[0.0, 1.0, 1.0, 0.0]);

        let e = Expression::parse("x1^2+sin(x2)", 2).unwrap();
        let j = e.eval_taylor(&[2.0, 0.0], 1).unwrap();
        assert_eq!(j.value(), 4.0);
        assert_eq!(j.gradient(), &[4.0, 1.0]);

        let e = Expression::parse("exp(x1)", 1).unwrap();
        let j = e.eval_taylor(&[0.0], 3).unwrap();
        assert_eq!((j.value(), j.d1(0), j.d2(0, 0), j.d3(0, 0, 0)), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn non_integer_power_lowers_through_log() {
        let e = Expression::parse("x1^0.5", 1).unwrap();
        let j = e.eval_taylor(&[4.0], 3).unwrap();
        assert!((j.value() - 2.0).abs() < 1e-15);
        assert!((j.d1(0) - 0.25).abs() < 1e-15);
        assert!((j.d3(0, 0, 0) - 3.0 / 8.0 * 4f64.powf(-2.5)).abs() < 1e-15);
        assert!(matches!(e.eval_taylor(&[-1.0], 0), Err(GeomError::Domain { .. })));
        // integer exponents accept negative bases
        let e = Expression::parse("x1^3 + x1^-2", 1).unwrap();
        assert!((e.eval(&[-2.0]).unwrap() - (-8.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn domain_violations_name_the_subexpression() {
        let e = Expression::parse("1 + log(x1 - 1)", 1).unwrap();
        match e.eval_taylor(&[0.5], 1).unwrap_err() {
            GeomError::Domain { expr, point, .. } => {
                assert_eq!(expr, "log(x1 - 1)");
                assert_eq!(point, vec![0.5]);
            }
            other => panic!("unexpected {other}"),
        }
        let e = Expression::parse("1/(x1 - x2)", 2).unwrap();
        assert!(matches!(e.eval(&[1.0, 1.0]), Err(GeomError::Domain { .. })));
    }

    #[test]
    fn unparse_keeps_structure() {
        for src in ["(x1 - x2) - x3", "x1 - (x2 - x3)", "x1/(x2*x3)", "(-x1)^2", "-x1^2", "2^-x1", "(x1^x2)^x3"] {
            let e = Expression::parse(src, 3).unwrap();
            let again = Expression::parse(&e.to_string(), 3).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
