//! Scalar expression language for metric components, connection
//! coefficients and potentials.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' '-'? number)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus sits below `^`, so `-u^2` reads as `-(u^2)`. Exponents must be
//! numeric literals. The function names `sin cos exp log sqrt tanh` are
//! reserved; every other name must be one of the declared coordinates.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Jet, JetError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier \"{name}\" at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function {function} takes 1 argument but {found} were given (byte {offset})")]
    Arity {
        function: String,
        found: usize,
        offset: usize,
    },
    #[error("exponent at byte {offset} must be a numeric literal")]
    VariableExponent { offset: usize },
    #[error("invalid coordinate list: {0}")]
    InvalidCoordinates(String),
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. }
            | ParseError::VariableExponent { offset } => Some(*offset),
            ParseError::InvalidCoordinates(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source} (expression byte {offset})")]
pub struct EvalError {
    pub offset: usize,
    #[source]
    pub source: JetError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Function {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Function::Sin,
            "cos" => Function::Cos,
            "exp" => Function::Exp,
            "log" => Function::Log,
            "sqrt" => Function::Sqrt,
            "tanh" => Function::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Log => "log",
            Function::Sqrt => "sqrt",
            Function::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// AST node; `offset` is the byte position of the node in the source text.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Constant { value: f64, offset: usize },
    Variable { index: usize, offset: usize },
    Negate { arg: Box<Node>, offset: usize },
    Binary { op: BinaryOp, lhs: Box<Node>, rhs: Box<Node>, offset: usize },
    Power { base: Box<Node>, exponent: f64, offset: usize },
    Call { function: Function, arg: Box<Node>, offset: usize },
}

impl Node {
    fn offset(&self) -> usize {
        match self {
            Node::Constant { offset, .. }
            | Node::Variable { offset, .. }
            | Node::Negate { offset, .. }
            | Node::Binary { offset, .. }
            | Node::Power { offset, .. }
            | Node::Call { offset, .. } => *offset,
        }
    }

    /// Structural equality ignoring source offsets.
    fn same_shape(&self, other: &Node) -> bool {
        match (self, other) {
            (Node::Constant { value: a, .. }, Node::Constant { value: b, .. }) => a == b,
            (Node::Variable { index: a, .. }, Node::Variable { index: b, .. }) => a == b,
            (Node::Negate { arg: a, .. }, Node::Negate { arg: b, .. }) => a.same_shape(b),
            (
                Node::Binary { op: oa, lhs: la, rhs: ra, .. },
                Node::Binary { op: ob, lhs: lb, rhs: rb, .. },
            ) => oa == ob && la.same_shape(lb) && ra.same_shape(rb),
            (
                Node::Power { base: a, exponent: ea, .. },
                Node::Power { base: b, exponent: eb, .. },
            ) => ea == eb && a.same_shape(b),
            (
                Node::Call { function: fa, arg: a, .. },
                Node::Call { function: fb, arg: b, .. },
            ) => fa == fb && a.same_shape(b),
            _ => false,
        }
    }
}

/// A parsed expression bound to a coordinate list.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    coords: Arc<[String]>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords && self.root.same_shape(&other.root)
    }
}

pub fn valid_coordinate_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_coords(coords: &[String]) -> Result<(), ParseError> {
    if coords.is_empty() {
        return Err(ParseError::InvalidCoordinates("no coordinates declared".into()));
    }
    for (i, name) in coords.iter().enumerate() {
        if !valid_coordinate_name(name) {
            return Err(ParseError::InvalidCoordinates(format!(
                "\"{name}\" is not a valid coordinate name"
            )));
        }
        if Function::from_name(name).is_some() {
            return Err(ParseError::InvalidCoordinates(format!(
                "\"{name}\" is a reserved function name"
            )));
        }
        if coords[..i].contains(name) {
            return Err(ParseError::InvalidCoordinates(format!(
                "\"{name}\" is declared twice"
            )));
        }
    }
    Ok(())
}

impl Expr {
    pub fn parse<S: AsRef<str>>(text: &str, coords: &[S]) -> Result<Expr, ParseError> {
        let coords: Vec<String> = coords.iter().map(|c| c.as_ref().to_string()).collect();
        check_coords(&coords)?;
        let coords: Arc<[String]> = coords.into();
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            coords: &coords,
        };
        let root = parser.expr()?;
        let next = parser.peek();
        if next.kind != TokenKind::End {
            return Err(ParseError::Syntax {
                offset: next.offset,
                message: format!("unexpected {}", next.kind.describe()),
            });
        }
        Ok(Expr { root, coords })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    /// Jet-valued evaluation; all arguments must share `(arity, order)`.
    pub fn evaluate(&self, args: &[Jet]) -> Result<Jet, EvalError> {
        assert_eq!(
            args.len(),
            self.coords.len(),
            "expression expects {} arguments",
            self.coords.len()
        );
        eval_jet(&self.root, args)
    }

    /// Plain floating-point evaluation. Kept separate from the jet path so it
    /// can serve as a finite-difference oracle.
    pub fn evaluate_f64(&self, args: &[f64]) -> Result<f64, EvalError> {
        assert_eq!(args.len(), self.coords.len());
        eval_real(&self.root, args)
    }

    pub fn free_coordinates(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        collect_vars(&self.root, &mut out);
        out
    }

    /// The literal value when the expression is a bare (possibly negated) constant.
    pub fn as_constant(&self) -> Option<f64> {
        fn walk(node: &Node) -> Option<f64> {
            match node {
                Node::Constant { value, .. } => Some(*value),
                Node::Negate { arg, .. } => walk(arg).map(|v| -v),
                _ => None,
            }
        }
        walk(&self.root)
    }
}

fn collect_vars(node: &Node, out: &mut BTreeSet<usize>) {
    match node {
        Node::Constant { .. } => {}
        Node::Variable { index, .. } => {
            out.insert(*index);
        }
        Node::Negate { arg, .. } | Node::Power { base: arg, .. } | Node::Call { arg, .. } => {
            collect_vars(arg, out)
        }
        Node::Binary { lhs, rhs, .. } => {
            collect_vars(lhs, out);
            collect_vars(rhs, out);
        }
    }
}

fn eval_jet(node: &Node, args: &[Jet]) -> Result<Jet, EvalError> {
    let located = |offset: usize| move |source: JetError| EvalError { offset, source };
    Ok(match node {
        Node::Constant { value, .. } => args[0].lift(*value),
        Node::Variable { index, .. } => args[*index].clone(),
        Node::Negate { arg, .. } => -eval_jet(arg, args)?,
        Node::Binary { op, lhs, rhs, offset } => {
            let a = eval_jet(lhs, args)?;
            let b = eval_jet(rhs, args)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a.checked_div(&b).map_err(located(*offset))?,
            }
        }
        Node::Power { base, exponent, offset } => eval_jet(base, args)?
            .powf(*exponent)
            .map_err(located(*offset))?,
        Node::Call { function, arg, offset } => {
            let a = eval_jet(arg, args)?;
            match function {
                Function::Sin => a.sin(),
                Function::Cos => a.cos(),
                Function::Exp => a.exp(),
                Function::Tanh => a.tanh(),
                Function::Log => a.ln().map_err(located(*offset))?,
                Function::Sqrt => a.sqrt().map_err(located(*offset))?,
            }
        }
    })
}

fn eval_real(node: &Node, args: &[f64]) -> Result<f64, EvalError> {
    let domain = |op: &'static str, value: f64, offset: usize| EvalError {
        offset,
        source: JetError::Domain { op, value },
    };
    Ok(match node {
        Node::Constant { value, .. } => *value,
        Node::Variable { index, .. } => args[*index],
        Node::Negate { arg, .. } => -eval_real(arg, args)?,
        Node::Binary { op, lhs, rhs, offset } => {
            let a = eval_real(lhs, args)?;
            let b = eval_real(rhs, args)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b == 0.0 => return Err(domain("division", b, *offset)),
                BinaryOp::Div => a / b,
            }
        }
        Node::Power { base, exponent, offset } => {
            let a = eval_real(base, args)?;
            if exponent.fract() == 0.0 {
                if a == 0.0 && *exponent < 0.0 {
                    return Err(domain("pow", a, *offset));
                }
                a.powi(*exponent as i32)
            } else if a > 0.0 {
                a.powf(*exponent)
            } else {
                return Err(domain("pow", a, *offset));
            }
        }
        Node::Call { function, arg, offset } => {
            let a = eval_real(arg, args)?;
            match function {
                Function::Sin => a.sin(),
                Function::Cos => a.cos(),
                Function::Exp => a.exp(),
                Function::Tanh => a.tanh(),
                Function::Log if a > 0.0 => a.ln(),
                Function::Log => return Err(domain("log", a, *offset)),
                Function::Sqrt if a > 0.0 => a.sqrt(),
                Function::Sqrt => return Err(domain("sqrt", a, *offset)),
            }
        }
    })
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Name(n) => format!("name \"{n}\""),
            TokenKind::Plus => "'+'".into(),
            TokenKind::Minus => "'-'".into(),
            TokenKind::Star => "'*'".into(),
            TokenKind::Slash => "'/'".into(),
            TokenKind::Caret => "'^'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(TokenKind::Plus),
            b'-' => Some(TokenKind::Minus),
            b'*' => Some(TokenKind::Star),
            b'/' => Some(TokenKind::Slash),
            b'^' => Some(TokenKind::Caret),
            b'(' => Some(TokenKind::LParen),
            b')' => Some(TokenKind::RParen),
            b',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            tokens.push(Token { kind, offset: start });
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal = &text[start..i];
            let value: f64 = literal.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number \"{literal}\""),
            })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Name(text[start..i].to_string()),
                offset: start,
            });
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                offset: start,
                message: format!("unexpected character '{ch}'"),
            });
        }
    }
    tokens.push(Token {
        kind: TokenKind::End,
        offset: text.len(),
    });
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if token.kind != TokenKind::End {
            self.pos += 1;
        }
        token
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, ParseError> {
        let token = self.bump();
        if token.kind == kind {
            Ok(token)
        } else {
            Err(ParseError::Syntax {
                offset: token.offset,
                message: format!("expected {}, found {}", kind.describe(), token.kind.describe()),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinaryOp::Add,
                TokenKind::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            let offset = self.bump().offset;
            let rhs = self.term()?;
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                offset,
            };
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinaryOp::Mul,
                TokenKind::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            let offset = self.bump().offset;
            let rhs = self.factor()?;
            lhs = Node::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                offset,
            };
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.peek().kind == TokenKind::Minus {
            let offset = self.bump().offset;
            let arg = self.factor()?;
            return Ok(Node::Negate {
                arg: Box::new(arg),
                offset,
            });
        }
        let base = self.atom()?;
        if self.peek().kind != TokenKind::Caret {
            return Ok(base);
        }
        let offset = self.bump().offset;
        let negative = if self.peek().kind == TokenKind::Minus {
            self.bump();
            true
        } else {
            false
        };
        let token = self.bump();
        let exponent = match token.kind {
            TokenKind::Number(v) => v,
            TokenKind::Name(_) | TokenKind::LParen => {
                return Err(ParseError::VariableExponent {
                    offset: token.offset,
                })
            }
            other => {
                return Err(ParseError::Syntax {
                    offset: token.offset,
                    message: format!("expected exponent, found {}", other.describe()),
                })
            }
        };
        Ok(Node::Power {
            base: Box::new(base),
            exponent: if negative { -exponent } else { exponent },
            offset,
        })
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let token = self.bump();
        match token.kind {
            TokenKind::Number(value) => Ok(Node::Constant {
                value,
                offset: token.offset,
            }),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Name(name) => {
                if let Some(function) = Function::from_name(&name) {
                    return self.call(function, token.offset);
                }
                match self.coords.iter().position(|c| *c == name) {
                    Some(index) => {
                        if self.peek().kind == TokenKind::LParen {
                            return Err(ParseError::Syntax {
                                offset: self.peek().offset,
                                message: format!("coordinate \"{name}\" cannot be called"),
                            });
                        }
                        Ok(Node::Variable {
                            index,
                            offset: token.offset,
                        })
                    }
                    None => Err(ParseError::UnknownIdentifier {
                        name,
                        offset: token.offset,
                    }),
                }
            }
            other => Err(ParseError::Syntax {
                offset: token.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn call(&mut self, function: Function, offset: usize) -> Result<Node, ParseError> {
        if self.peek().kind != TokenKind::LParen {
            return Err(ParseError::Arity {
                function: function.name().into(),
                found: 0,
                offset,
            });
        }
        self.bump();
        if self.peek().kind == TokenKind::RParen {
            return Err(ParseError::Arity {
                function: function.name().into(),
                found: 0,
                offset,
            });
        }
        let mut args = vec![self.expr()?];
        while self.peek().kind == TokenKind::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RParen)?;
        if args.len() != 1 {
            return Err(ParseError::Arity {
                function: function.name().into(),
                found: args.len(),
                offset,
            });
        }
        Ok(Node::Call {
            function,
            arg: Box::new(args.pop().unwrap()),
            offset,
        })
    }
}

// ---------------------------------------------------------------------------
// Printing

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_FACTOR: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Binary { op: BinaryOp::Add | BinaryOp::Sub, .. } => PREC_SUM,
        Node::Binary { .. } => PREC_PRODUCT,
        Node::Negate { .. } => PREC_FACTOR,
        Node::Power { .. } => 4,
        Node::Constant { .. } | Node::Variable { .. } | Node::Call { .. } => PREC_ATOM,
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, coords: &[String], min: u8) -> fmt::Result {
    let wrap = precedence(node) < min;
    if wrap {
        f.write_str("(")?;
    }
    match node {
        Node::Constant { value, .. } => write!(f, "{value}")?,
        Node::Variable { index, .. } => f.write_str(&coords[*index])?,
        Node::Negate { arg, .. } => {
            f.write_str("-")?;
            write_node(f, arg, coords, PREC_FACTOR)?;
        }
        Node::Binary { op, lhs, rhs, .. } => {
            let (left, right) = match op {
                BinaryOp::Add | BinaryOp::Sub => (PREC_SUM, PREC_PRODUCT),
                BinaryOp::Mul | BinaryOp::Div => (PREC_PRODUCT, PREC_FACTOR),
            };
            write_node(f, lhs, coords, left)?;
            write!(f, " {} ", op.symbol())?;
            write_node(f, rhs, coords, right)?;
        }
        Node::Power { base, exponent, .. } => {
            write_node(f, base, coords, PREC_ATOM)?;
            write!(f, "^{exponent}")?;
        }
        Node::Call { function, arg, .. } => {
            write!(f, "{}(", function.name())?;
            write_node(f, arg, coords, 0)?;
            f.write_str(")")?;
        }
    }
    if wrap {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, &self.coords, 0)
    }
}

impl Node {
    /// Byte offset of this node in the source text.
    pub fn source_offset(&self) -> usize {
        self.offset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::seed;

    const UV: [&str; 2] = ["u", "v"];

    fn eval(text: &str, at: &[f64]) -> f64 {
        Expr::parse(text, &UV).unwrap().evaluate_f64(at).unwrap()
    }

    #[test]
    fn evaluates_polynomial() {
        assert_eq!(eval("u^2 + 2*v", &[1.0, 2.0]), 5.0);
        let e = Expr::parse("u^2 + 2*v", &UV).unwrap();
        let jets = seed(&[1.0, 2.0], 1).unwrap();
        assert_eq!(e.evaluate(&jets).unwrap().value(), 5.0);
    }

    #[test]
    fn exp_at_origin() {
        assert_eq!(eval("exp(u)", &[0.0, 17.0]), 1.0);
    }

    #[test]
    fn unknown_identifier_reports_offset() {
        let err = Expr::parse("w + 1", &UV).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "w".into(),
                offset: 0
            }
        );
        let err = Expr::parse("u + wq", &UV).unwrap_err();
        assert_eq!(err.offset(), Some(4));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(Expr::parse("u + ", &UV).unwrap_err().offset(), Some(4));
        assert_eq!(Expr::parse("(u", &UV).unwrap_err().offset(), Some(2));
        assert_eq!(Expr::parse("u $ v", &UV).unwrap_err().offset(), Some(2));
        assert_eq!(Expr::parse("u v", &UV).unwrap_err().offset(), Some(2));
        assert!(matches!(
            Expr::parse("u^2^3", &UV).unwrap_err(),
            ParseError::Syntax { offset: 3, .. }
        ));
    }

    #[test]
    fn arity_errors() {
        assert!(matches!(
            Expr::parse("sin(u, v)", &UV).unwrap_err(),
            ParseError::Arity { found: 2, .. }
        ));
        assert!(matches!(
            Expr::parse("cos()", &UV).unwrap_err(),
            ParseError::Arity { found: 0, .. }
        ));
        assert!(matches!(
            Expr::parse("exp + 1", &UV).unwrap_err(),
            ParseError::Arity { found: 0, .. }
        ));
    }

    #[test]
    fn variable_exponent_rejected() {
        assert_eq!(
            Expr::parse("u^v", &UV).unwrap_err(),
            ParseError::VariableExponent { offset: 2 }
        );
        assert!(matches!(
            Expr::parse("u^(2)", &UV).unwrap_err(),
            ParseError::VariableExponent { .. }
        ));
    }

    #[test]
    fn bad_coordinate_lists() {
        assert!(Expr::parse("1", &[] as &[&str]).is_err());
        assert!(Expr::parse("u", &["u", "u"]).is_err());
        assert!(Expr::parse("u", &["1u"]).is_err());
        assert!(Expr::parse("u", &["exp"]).is_err());
    }

    #[test]
    fn unary_minus_below_power() {
        assert_eq!(eval("-u^2", &[3.0, 0.0]), -9.0);
        assert_eq!(eval("(-u)^2", &[3.0, 0.0]), 9.0);
        assert_eq!(eval("2*-u", &[3.0, 0.0]), -6.0);
        assert_eq!(eval("u^-1", &[4.0, 0.0]), 0.25);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(eval("1.5e2 + 2E-1", &[0.0, 0.0]), 150.2);
        assert_eq!(eval(".5", &[0.0, 0.0]), 0.5);
    }

    #[test]
    fn left_associativity() {
        assert_eq!(eval("8 - 3 - 2", &[0.0, 0.0]), 3.0);
        assert_eq!(eval("8 / 4 / 2", &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn product_rule_through_parser() {
        let e = Expr::parse("u*v", &UV).unwrap();
        let jets = seed(&[2.0, 5.0], 1).unwrap();
        assert_eq!(e.evaluate(&jets).unwrap().partial(&[0]), 5.0);
    }

    #[test]
    fn log_domain_error_located() {
        let e = Expr::parse("1 + log(u)", &UV).unwrap();
        let jets = seed(&[-1.0, 0.0], 1).unwrap();
        let err = e.evaluate(&jets).unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(matches!(err.source, JetError::Domain { op: "log", .. }));
        assert_eq!(e.evaluate_f64(&[-1.0, 0.0]).unwrap_err().offset, 4);
    }

    #[test]
    fn division_by_zero_located() {
        let e = Expr::parse("v / u", &UV).unwrap();
        let jets = seed(&[0.0, 1.0], 1).unwrap();
        assert_eq!(e.evaluate(&jets).unwrap_err().offset, 2);
    }

    #[test]
    fn pythagorean_identity() {
        use rand::{Rng, SeedableRng};
        let e = Expr::parse("sin(u)^2 + cos(u)^2", &UV).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let u: f64 = rng.random_range(-10.0..10.0);
            let jets = seed(&[u, 0.0], 2).unwrap();
            let r = e.evaluate(&jets).unwrap();
            assert!((r.value() - 1.0).abs() <= 1e-12);
            assert!(r.partial(&[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn free_coordinate_sets() {
        let set = |t: &str| Expr::parse(t, &UV).unwrap().free_coordinates();
        assert_eq!(set("u^2 + 2*v"), BTreeSet::from([0, 1]));
        assert_eq!(set("3.5"), BTreeSet::new());
        assert_eq!(set("exp(v)"), BTreeSet::from([1]));
    }

    #[test]
    fn printing_is_minimal_and_stable() {
        let cases = [
            ("u^2 + 2*v", "u^2 + 2 * v"),
            ("-u^2", "-u^2"),
            ("(-u)^2", "(-u)^2"),
            ("u - (v - 1)", "u - (v - 1)"),
            ("(u - v) - 1", "u - v - 1"),
            ("u / (v * 2)", "u / (v * 2)"),
            ("-(u + v)", "-(u + v)"),
            ("sin(u + v)^-2", "sin(u + v)^-2"),
            ("exp(sqrt(u*u))", "exp(sqrt(u * u))"),
        ];
        for (input, printed) in cases {
            let e = Expr::parse(input, &UV).unwrap();
            assert_eq!(e.to_string(), printed, "printing {input}");
            let again = Expr::parse(&e.to_string(), &UV).unwrap();
            assert_eq!(again, e);
        }
    }

    #[test]
    fn constants_detected() {
        assert_eq!(Expr::parse("-2", &UV).unwrap().as_constant(), Some(-2.0));
        assert_eq!(Expr::parse("u", &UV).unwrap().as_constant(), None);
    }
}
