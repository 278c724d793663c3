//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' factor)?
//! base   := number | identifier | function '(' expr ')' | '(' expr ')' | '-' factor
//! ```
//!
//! Unary minus takes a whole `factor`, so `-x^2` reads as `-(x^2)`.

use std::fmt;

use super::{BinOp, Func, Node};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedToken { found: String, expected: &'static str },
    UnexpectedEnd { expected: &'static str },
    UnknownIdentifier(String),
    UnknownFunction(String),
    NonSmoothFunction(String),
    Arity { function: String, expected: usize, found: usize },
    InvalidNumber(String),
    UnexpectedCharacter(char),
}

/// A parse failure at a 1-based character column.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub column: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: ", self.column)?;
        match &self.kind {
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(f, "unexpected `{found}`, expected {expected}")
            }
            ParseErrorKind::UnexpectedEnd { expected } => {
                write!(f, "unexpected end of input, expected {expected}")
            }
            ParseErrorKind::UnknownIdentifier(name) => write!(f, "unknown identifier `{name}`"),
            ParseErrorKind::UnknownFunction(name) => write!(f, "unknown function `{name}`"),
            ParseErrorKind::NonSmoothFunction(name) => {
                write!(f, "`{name}` is not twice differentiable and is not supported")
            }
            ParseErrorKind::Arity {
                function,
                expected,
                found,
            } => write!(
                f,
                "`{function}` takes {expected} argument(s), {found} given"
            ),
            ParseErrorKind::InvalidNumber(text) => write!(f, "invalid number `{text}`"),
            ParseErrorKind::UnexpectedCharacter(c) => write!(f, "unexpected character `{c}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("{x}"),
            Tok::Ident(s) => s.clone(),
            Tok::Sym(c) => c.to_string(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
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
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push((Tok::Num(x), column)),
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::InvalidNumber(text),
                        column,
                    })
                }
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), column));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Sym(c), column));
            i += 1;
        } else {
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedCharacter(c),
                column,
            });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    variables: &'a [String],
}

pub(crate) fn parse(source: &str, variables: &[String]) -> Result<Node, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        pos: 0,
        variables,
    };
    let node = p.expr()?;
    match p.peek() {
        Tok::End => Ok(node),
        _ => Err(p.unexpected("an operator or end of input")),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let kind = match self.peek() {
            Tok::End => ParseErrorKind::UnexpectedEnd { expected },
            t => ParseErrorKind::UnexpectedToken {
                found: t.describe(),
                expected,
            },
        };
        ParseError {
            kind,
            column: self.column(),
        }
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        let base = self.base()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exponent = self.factor()?;
        Ok(match integral_constant(&exponent) {
            Some(n) => Node::PowInt(Box::new(base), n),
            None => Node::Pow(Box::new(base), Box::new(exponent)),
        })
    }

    fn base(&mut self) -> Result<Node, ParseError> {
        let column = self.column();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Node::Const(x))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')', "`)`")?;
                Ok(inner)
            }
            Tok::Sym('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.factor()?)))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    self.call(name, column)
                } else {
                    self.identifier(name, column)
                }
            }
            _ => Err(self.unexpected("a number, identifier or `(`")),
        }
    }

    fn identifier(&self, name: String, column: usize) -> Result<Node, ParseError> {
        if let Some(i) = self.variables.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        match name.as_str() {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            _ => Err(ParseError {
                kind: ParseErrorKind::UnknownIdentifier(name),
                column,
            }),
        }
    }

    fn call(&mut self, name: String, column: usize) -> Result<Node, ParseError> {
        let func = match Func::from_name(&name) {
            Some(f) => f,
            None if name == "abs" => {
                return Err(ParseError {
                    kind: ParseErrorKind::NonSmoothFunction(name),
                    column,
                })
            }
            None => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnknownFunction(name),
                    column,
                })
            }
        };
        self.expect('(', "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::Sym(')') {
            args.push(self.expr()?);
            while self.eat(',') {
                args.push(self.expr()?);
            }
        }
        self.expect(')', "`,` or `)`")?;
        if args.len() != 1 {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    function: name,
                    expected: 1,
                    found: args.len(),
                },
                column,
            });
        }
        Ok(Node::Call(func, Box::new(args.pop().unwrap())))
    }
}

/// Value of a variable-free exponent if it is an integer that fits `i32`.
fn integral_constant(node: &Node) -> Option<i32> {
    fn fold(node: &Node) -> Option<f64> {
        Some(match node {
            Node::Const(c) => *c,
            Node::Var(_) => return None,
            Node::Neg(a) => -fold(a)?,
            Node::Binary(op, a, b) => {
                let (a, b) = (fold(a)?, fold(b)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Node::PowInt(a, n) => fold(a)?.powi(*n),
            Node::Pow(..) | Node::Call(..) => return None,
        })
    }
    let v = fold(node)?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
}
