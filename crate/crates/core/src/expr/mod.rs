//! Scalar expressions over named variables.
//!
//! An [`Expression`] is parsed once from text and is immutable afterwards.
//! It can be evaluated at a point with [`Expression::eval`], or evaluated
//! together with its exact gradient and Hessian with respect to a chosen
//! subset of variables with [`Expression::eval_dual2`].
//!
//! Every admitted primitive is twice continuously differentiable on its
//! domain; `abs` is rejected by the parser for that reason.

mod dual;
mod parser;

use std::fmt;

pub use dual::Dual2;
pub use parser::{ParseError, ParseErrorKind};

/// Smooth unary functions accepted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Node of the abstract syntax tree.
///
/// `PowInt` is produced when the exponent is a variable-free expression
/// with an integral value; any other exponent yields `Pow`, which requires a
/// strictly positive base at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    PowInt(Box<Node>, i32),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its ordered variable table.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    variables: Vec<String>,
}

/// Failure while evaluating an expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("point has {found} coordinates, expression has {expected} variables")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("active index {index} out of range for {len} variables")]
    ActiveOutOfRange { index: usize, len: usize },
    #[error("{operation} undefined at argument {argument} in `{subexpression}`")]
    Domain {
        operation: &'static str,
        argument: f64,
        subexpression: String,
    },
    #[error("non-finite value in `{subexpression}`")]
    NonFinite { subexpression: String },
}

impl Expression {
    /// Parses `source` against the declared variable names.
    pub fn parse<S: AsRef<str>>(source: &str, variables: &[S]) -> Result<Self, ParseError> {
        let variables: Vec<String> = variables.iter().map(|s| s.as_ref().to_string()).collect();
        let root = parser::parse(source, &variables)?;
        Ok(Expression { root, variables })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    /// Indices of variables that actually occur in the tree, ascending.
    pub fn referenced_variables(&self) -> Vec<usize> {
        let mut used = vec![false; self.variables.len()];
        fn walk(node: &Node, used: &mut [bool]) {
            match node {
                Node::Const(_) => {}
                Node::Var(i) => used[*i] = true,
                Node::Neg(a) | Node::PowInt(a, _) | Node::Call(_, a) => walk(a, used),
                Node::Binary(_, a, b) | Node::Pow(a, b) => {
                    walk(a, used);
                    walk(b, used);
                }
            }
        }
        walk(&self.root, &mut used);
        used.iter()
            .enumerate()
            .filter_map(|(i, &u)| u.then_some(i))
            .collect()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.check_len(point)?;
        eval_node(&self.root, point, &self.variables)
    }

    /// Value, gradient and Hessian with respect to the variables listed in
    /// `active`, in that order. Inactive variables are held constant.
    pub fn eval_dual2(&self, point: &[f64], active: &[usize]) -> Result<Dual2, EvalError> {
        self.check_len(point)?;
        let mut slot = vec![None; point.len()];
        for (k, &i) in active.iter().enumerate() {
            if i >= point.len() {
                return Err(EvalError::ActiveOutOfRange {
                    index: i,
                    len: point.len(),
                });
            }
            slot[i] = Some(k);
        }
        dual::eval_node(&self.root, point, &slot, active.len(), &self.variables)
    }

    fn check_len(&self, point: &[f64]) -> Result<(), EvalError> {
        if point.len() != self.variables.len() {
            return Err(EvalError::DimensionMismatch {
                expected: self.variables.len(),
                found: point.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn display_node<'a>(&'a self, node: &'a Node) -> NodeDisplay<'a> {
        NodeDisplay {
            node,
            variables: &self.variables,
        }
    }
}

fn eval_node(node: &Node, x: &[f64], names: &[String]) -> Result<f64, EvalError> {
    let eval = |n: &Node| eval_node(n, x, names);
    let value = match node {
        Node::Const(c) => *c,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a)?,
        Node::Binary(op, a, b) => {
            let (a_val, b_val) = (eval(a)?, eval(b)?);
            match op {
                BinOp::Add => a_val + b_val,
                BinOp::Sub => a_val - b_val,
                BinOp::Mul => a_val * b_val,
                BinOp::Div => {
                    if b_val == 0.0 {
                        return Err(domain("division", b_val, node, names));
                    }
                    a_val / b_val
                }
            }
        }
        Node::PowInt(a, n) => {
            let base = eval(a)?;
            if base == 0.0 && *n < 0 {
                return Err(domain("negative power", base, node, names));
            }
            base.powi(*n)
        }
        Node::Pow(a, b) => {
            let base = eval(a)?;
            if base <= 0.0 {
                return Err(domain("real power", base, node, names));
            }
            base.powf(eval(b)?)
        }
        Node::Call(f, a) => {
            let u = eval(a)?;
            match f {
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Tan => u.tan(),
                Func::Exp => u.exp(),
                Func::Ln => {
                    if u <= 0.0 {
                        return Err(domain("ln", u, node, names));
                    }
                    u.ln()
                }
                Func::Sqrt => {
                    if u < 0.0 {
                        return Err(domain("sqrt", u, node, names));
                    }
                    u.sqrt()
                }
            }
        }
    };
    if !value.is_finite() {
        return Err(EvalError::NonFinite {
            subexpression: subexpression(node, names),
        });
    }
    Ok(value)
}

pub(crate) fn domain(operation: &'static str, argument: f64, node: &Node, names: &[String]) -> EvalError {
    EvalError::Domain {
        operation,
        argument,
        subexpression: subexpression(node, names),
    }
}

pub(crate) fn subexpression(node: &Node, names: &[String]) -> String {
    NodeDisplay {
        node,
        variables: names,
    }
    .to_string()
}

/// Printer for a subtree. Compound nodes are always parenthesized so the
/// printed form re-parses to an identical tree.
pub struct NodeDisplay<'a> {
    node: &'a Node,
    variables: &'a [String],
}

impl fmt::Display for NodeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |node| NodeDisplay {
            node,
            variables: self.variables,
        };
        match self.node {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(i) => match self.variables.get(*i) {
                Some(name) => f.write_str(name),
                None => write!(f, "#{i}"),
            },
            Node::Neg(a) => write!(f, "(-{})", sub(a)),
            Node::Binary(op, a, b) => write!(f, "({} {} {})", sub(a), op.symbol(), sub(b)),
            Node::PowInt(a, n) => write!(f, "({}^{})", sub(a), n),
            Node::Pow(a, b) => write!(f, "({}^{})", sub(a), sub(b)),
            Node::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display_node(&self.root).fmt(f)
    }
}

/// Variable names `q1..qn` followed by `v1..vn`.
pub fn lagrangian_variables(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("q{i}"))
        .chain((1..=n).map(|i| format!("v{i}")))
        .collect()
}

/// Variable names `x1..xn` for free-standing functions.
pub fn function_variables(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Variable names `q1..qn`.
pub fn coordinate_variables(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("q{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn eval_basic_examples() {
        let e = Expression::parse("0.5*(v1+v2)^2", &vars(&["q1", "q2", "v1", "v2"])).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0, 1.0, 2.0]).unwrap(), 4.5);

        let e = Expression::parse("q1*v1", &vars(&["q1", "v1"])).unwrap();
        assert_eq!(e.eval(&[0.0, 7.0]).unwrap(), 0.0);

        let e = Expression::parse("exp(0)", &Vec::<String>::new()).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 1.0);
    }

    #[test]
    fn constants_resolve() {
        let e = Expression::parse("pi + e", &Vec::<String>::new()).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), std::f64::consts::PI + std::f64::consts::E);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = Expression::parse("1 + ln(x)", &vars(&["x"])).unwrap();
        match e.eval(&[-1.0]) {
            Err(EvalError::Domain {
                operation,
                subexpression,
                ..
            }) => {
                assert_eq!(operation, "ln");
                assert_eq!(subexpression, "ln(x)");
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = Expression::parse("1/(x-1)", &vars(&["x"])).unwrap();
        assert!(matches!(
            e.eval(&[1.0]),
            Err(EvalError::Domain {
                operation: "division",
                ..
            })
        ));
        let e = Expression::parse("x^0.5", &vars(&["x"])).unwrap();
        assert!(e.eval(&[0.0]).is_err());
        assert_eq!(e.eval(&[4.0]).unwrap(), 2.0);
    }

    #[test]
    fn wrong_point_length_is_rejected() {
        let e = Expression::parse("x", &vars(&["x"])).unwrap();
        assert_eq!(
            e.eval(&[1.0, 2.0]),
            Err(EvalError::DimensionMismatch {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn printing_parenthesizes_everything() {
        let e = Expression::parse("-x^2 + sin(y)/2", &vars(&["x", "y"])).unwrap();
        assert_eq!(e.to_string(), "((-(x^2)) + (sin(y) / 2.0))");
    }

    #[test]
    fn referenced_variables_are_reported() {
        let e = Expression::parse("q2*v1 + 3", &lagrangian_variables(2)).unwrap();
        assert_eq!(e.referenced_variables(), vec![1, 2]);
    }
}
