//! A small arithmetic language for coefficient fields.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | 'pi' | var | func '(' args ')' | '(' expr ')'
//! var     := 'x1' | 'x2' | 'x3'
//! func    := sin | cos | exp | abs | min | max
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at byte {offset}")]
    Lex { offset: usize, ch: char },
    #[error("malformed number literal at byte {offset}")]
    BadNumber { offset: usize },
    #[error("unexpected {found} at byte {offset}, expected {expected}")]
    Unexpected {
        offset: usize,
        found: String,
        expected: &'static str,
    },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {got}")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
}

impl ParseError {
    /// Byte offset of the first offending character.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Lex { offset, .. }
            | ParseError::BadNumber { offset }
            | ParseError::Unexpected { offset, .. }
            | ParseError::Arity { offset, .. }
            | ParseError::UnknownIdent { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable x{index} used but the point has only {dim} coordinate(s)")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result {value} in {context}")]
    NonFinite { value: f64, context: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree. Variables are zero-based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Self {
        Expr::Num(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn call1(f: Func, a: Expr) -> Self {
        Expr::Call(f, vec![a])
    }

    /// One more than the highest variable index referenced (0 if none).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Binary(_, a, b) => a.arity().max(b.arity()),
            Expr::Call(_, args) => args.iter().map(Expr::arity).max().unwrap_or(0),
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => *point.get(*i).ok_or(EvalError::VariableOutOfRange {
                index: i + 1,
                dim: point.len(),
            })?,
            Expr::Neg(a) => -a.eval(point)?,
            Expr::Binary(op, a, b) => {
                let (x, y) = (a.eval(point)?, b.eval(point)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(point)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(point)?),
                    Func::Max => x.max(args[1].eval(point)?),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                value: v,
                context: self.kind_name(),
            })
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            Expr::Num(_) => "literal",
            Expr::Pi => "pi",
            Expr::Var(_) => "variable",
            Expr::Neg(_) => "negation",
            Expr::Binary(BinOp::Add, ..) => "addition",
            Expr::Binary(BinOp::Sub, ..) => "subtraction",
            Expr::Binary(BinOp::Mul, ..) => "multiplication",
            Expr::Binary(BinOp::Div, ..) => "division",
            Expr::Binary(BinOp::Pow, ..) => "power",
            Expr::Call(f, _) => f.name(),
        }
    }
}

/// Fully parenthesized; literals use shortest round-trip formatting so that
/// printing and re-parsing reproduces every value bit for bit.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{})", -v)
            }
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
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
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| ParseError::BadNumber { offset: start })?;
                if !v.is_finite() {
                    return Err(ParseError::BadNumber { offset: start });
                }
                out.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError::Lex { offset: i, ch });
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

/// Nesting limit; keeps adversarial inputs from overflowing the stack.
const MAX_DEPTH: usize = 256;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError::Unexpected {
            offset: self.offset(),
            found: self.peek().describe(),
            expected,
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::Unexpected {
                offset: self.offset(),
                found: self.peek().describe(),
                expected: "shallower nesting",
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(if c == '+' { BinOp::Add } else { BinOp::Sub }, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(if c == '*' { BinOp::Mul } else { BinOp::Div }, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let e = if *self.peek() == Tok::Op('-') {
            self.bump();
            Expr::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected("`)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(idx) = variable_index(&name) {
                    return Ok(Expr::Var(idx));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdent { offset, name });
                };
                if *self.peek() != Tok::LParen {
                    return Err(self.unexpected("`(` after function name"));
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        match self.peek() {
                            Tok::Comma => {
                                self.bump();
                            }
                            Tok::RParen => break,
                            _ => return Err(self.unexpected("`,` or `)`")),
                        }
                    }
                }
                self.bump();
                if args.len() != func.arity() {
                    return Err(ParseError::Arity {
                        offset,
                        name,
                        expected: func.arity(),
                        got: args.len(),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("a number, variable, function call or `(`")),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x1" => Some(0),
        "x2" => Some(1),
        "x3" => Some(2),
        _ => None,
    }
}

/// Parse source text into an expression tree.
pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval_str(s: &str, p: &[f64]) -> f64 {
        parse_expression(s).unwrap().eval(p).unwrap()
    }

    #[test]
    fn sine_source_shape() {
        let e = parse_expression("2 + sin(2*pi*x1)").unwrap();
        let want = Expr::bin(
            BinOp::Add,
            Expr::Num(2.0),
            Expr::call1(
                Func::Sin,
                Expr::bin(
                    BinOp::Mul,
                    Expr::bin(BinOp::Mul, Expr::Num(2.0), Expr::Pi),
                    Expr::Var(0),
                ),
            ),
        );
        assert_eq!(e, want);
        assert_eq!(e.eval(&[0.25]).unwrap(), 3.0);
    }

    #[test]
    fn trailing_operator_reports_end_offset() {
        let err = parse_expression("x1 +").unwrap_err();
        assert!(matches!(err, ParseError::Unexpected { .. }));
        assert_eq!(err.offset(), 4);
    }

    #[test]
    fn min_with_power() {
        let e = parse_expression("min(1, x2^2)").unwrap();
        assert_eq!(e.eval(&[0.0, 0.5]).unwrap(), 0.25);
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_str("1", &[0.3, 0.7]), 1.0);
        assert_eq!(eval_str("2 + sin(2*pi*x1)*cos(2*pi*x2)", &[0.25, 0.0]), 3.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_str("2^3^2", &[]), 512.0);
        assert_eq!(eval_str("-2^2", &[]), -4.0);
        assert_eq!(eval_str("2^-1", &[]), 0.5);
        assert_eq!(eval_str("8 - 3 - 2", &[]), 3.0);
        assert_eq!(eval_str("8 / 4 / 2", &[]), 1.0);
        assert_eq!(eval_str("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval_str("-x1 * 3", &[2.0]), -6.0);
        assert_eq!(eval_str("max(abs(-3), exp(0))", &[]), 3.0);
        assert_eq!(eval_str("1.5e2 + .5", &[]), 150.5);
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(
            parse_expression("2 $ 3"),
            Err(ParseError::Lex { offset: 2, ch: '$' })
        ));
        assert!(matches!(
            parse_expression("sin(1, 2)"),
            Err(ParseError::Arity { offset: 0, expected: 1, got: 2, .. })
        ));
        assert!(matches!(
            parse_expression("1 + y"),
            Err(ParseError::UnknownIdent { offset: 4, .. })
        ));
        assert!(matches!(parse_expression("1..2"), Err(ParseError::BadNumber { offset: 0 })));
        assert!(matches!(parse_expression("1e999"), Err(ParseError::BadNumber { .. })));
        assert!(matches!(parse_expression(""), Err(ParseError::Unexpected { offset: 0, .. })));
        assert!(matches!(parse_expression("(1"), Err(ParseError::Unexpected { offset: 2, .. })));
        assert!(matches!(parse_expression("1 2"), Err(ParseError::Unexpected { offset: 2, .. })));
        assert_eq!(parse_expression("x1 + é").unwrap_err().offset(), 5);
    }

    #[test]
    fn evaluation_errors() {
        let e = parse_expression("1/x1").unwrap();
        assert_eq!(e.eval(&[0.0]), Err(EvalError::DivisionByZero));
        assert!(matches!(e.eval(&[]), Err(EvalError::VariableOutOfRange { index: 1, dim: 0 })));
        let e = parse_expression("exp(1000)").unwrap();
        assert!(matches!(e.eval(&[]), Err(EvalError::NonFinite { .. })));
        let e = parse_expression("(-1)^0.5").unwrap();
        assert!(matches!(e.eval(&[]), Err(EvalError::NonFinite { .. })));
        assert_eq!(parse_expression("x3 + x1").unwrap().arity(), 3);
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let src = "(".repeat(10_000) + "1" + &")".repeat(10_000);
        assert!(parse_expression(&src).is_err());
        let src = "-".repeat(10_000) + "1";
        assert!(parse_expression(&src).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e6f64..1e6).prop_map(Expr::Num),
            Just(Expr::Pi),
            (0usize..3).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
                (
                    prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Abs)],
                    inner.clone()
                )
                    .prop_map(|(f, a)| Expr::call1(f, a)),
                (prop_oneof![Just(Func::Min), Just(Func::Max)], inner.clone(), inner)
                    .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr(), p in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let printed = e.to_string();
            let back = parse_expression(&printed).unwrap();
            match (e.eval(&p), back.eval(&p)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?} for {}", a, b, printed),
            }
        }

        #[test]
        fn random_token_streams_never_panic(
            toks in proptest::collection::vec(
                prop_oneof![
                    Just("x1"), Just("x2"), Just("x4"), Just("pi"), Just("sin"), Just("min"),
                    Just("("), Just(")"), Just(","), Just("+"), Just("-"), Just("*"),
                    Just("/"), Just("^"), Just("1"), Just("2.5e3"), Just("."), Just("#"),
                    Just(" "), Just("é"),
                ],
                0..40,
            )
        ) {
            let src: String = toks.concat();
            match parse_expression(&src) {
                Ok(e) => { let _ = e.eval(&[0.1, 0.2, 0.3]); }
                Err(err) => prop_assert!(err.offset() <= src.len()),
            }
        }

        #[test]
        fn arbitrary_strings_never_panic(s in "\\PC{0,64}") {
            let _ = parse_expression(&s);
        }
    }
}
