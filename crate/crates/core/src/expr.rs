//! A small recursive-descent parser and evaluator for scalar coefficient
//! expressions in one variable `r`.
//!
//! The grammar is deliberately minimal. Supported forms:
//!
//! * decimal literals with optional exponent (`1`, `0.5`, `1e-3`, `.25`)
//! * the variable `r` and the constants `pi`, `e`
//! * binary `+ - * / ^` with the usual precedence, `^` right-associative
//! * unary minus (binds looser than `^`, so `-r^2` is `-(r^2)`)
//! * functions `exp log sqrt abs` (one argument) and `min max pow` (two)
//!
//! Parsing never panics; malformed input yields a [`ParseError`] carrying the
//! byte offset of the offending token. Evaluation is IEEE double precision and
//! rejects domain violations (division by zero, `log` of a nonpositive value,
//! any non-finite intermediate) instead of silently producing `inf`/`NaN`.

use std::fmt;
use thiserror::Error;

/// Named mathematical constants recognised by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions. `Min`, `Max` and `Pow` take two arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Exp | Func::Log | Func::Sqrt | Func::Abs => 1,
            Func::Min | Func::Max | Func::Pow => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }
}

/// Abstract syntax tree of a parsed expression. Immutable and shareable
/// across threads; evaluation is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    Var,
    Const(NamedConst),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Vec<Expression>),
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of nonpositive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("non-finite result in `{0}`")]
    NonFinite(&'static str),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token together with its starting byte offset. `None` at input end.
    fn next(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'/' => {
                self.pos += 1;
                Tok::Slash
            }
            b'^' => {
                self.pos += 1;
                Tok::Caret
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => self.lex_number(start)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii ident")
                    .to_string();
                Tok::Ident(name)
            }
            other => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Some((tok, start)))
    }

    fn lex_number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let mut saw_digit = false;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
            saw_digit = true;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                saw_digit = true;
            }
        }
        if !saw_digit {
            return Err(ParseError {
                offset: start,
                message: "expected digits in numeric literal".into(),
            });
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let mut exp_digits = false;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
                exp_digits = true;
            }
            if !exp_digits {
                // `1e` followed by non-digit: the `e` is the Euler constant,
                // back off and let the next token pick it up.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            message: format!("invalid numeric literal `{text}`"),
        })?;
        Ok(Tok::Num(value))
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.idx)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.idx).cloned();
        if t.is_some() {
            self.idx += 1;
        }
        t
    }

    fn offset(&self) -> usize {
        self.toks.get(self.idx).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some((ref t, _)) if *t == want => Ok(()),
            Some((_, o)) => Err(ParseError {
                offset: o,
                message: format!("expected {what}"),
            }),
            None => Err(ParseError {
                offset: self.end,
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn sum(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.product()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        while let Some((tok, _)) = self.peek() {
            let op = match tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary()?;
            return Ok(Expression::Binary(
                BinOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        match self.bump() {
            Some((Tok::Num(v), _)) => Ok(Expression::Literal(v)),
            Some((Tok::LParen, _)) => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            Some((Tok::Ident(name), off)) => self.ident(name, off),
            Some((_, off)) => Err(ParseError {
                offset: off,
                message: "expected a value".into(),
            }),
            None => Err(ParseError {
                offset: self.end,
                message: "unexpected end of input".into(),
            }),
        }
    }

    fn ident(&mut self, name: String, off: usize) -> Result<Expression, ParseError> {
        match name.as_str() {
            "r" => return Ok(Expression::Var),
            "pi" => return Ok(Expression::Const(NamedConst::Pi)),
            "e" => return Ok(Expression::Const(NamedConst::E)),
            _ => {}
        }
        let func = match name.as_str() {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => {
                return Err(ParseError {
                    offset: off,
                    message: format!("unknown identifier `{name}`"),
                })
            }
        };
        self.expect(Tok::LParen, "`(` after function name")?;
        let mut args = vec![self.sum()?];
        while let Some((Tok::Comma, _)) = self.peek() {
            self.bump();
            args.push(self.sum()?);
        }
        self.expect(Tok::RParen, "closing `)`")?;
        if args.len() != func.arity() {
            return Err(ParseError {
                offset: off,
                message: format!(
                    "`{}` takes {} argument(s), got {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            });
        }
        Ok(Expression::Call(func, args))
    }
}

/// Parse `text` into an [`Expression`].
pub fn parse(text: &str) -> Result<Expression, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    if toks.is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let expr = parser.sum()?;
    if let Some((_, off)) = parser.peek() {
        return Err(ParseError {
            offset: *off,
            message: "trailing tokens after expression".into(),
        });
    }
    Ok(expr)
}

impl Expression {
    /// Evaluate at `r`. Domain violations and non-finite intermediates are
    /// reported as errors rather than propagated as `inf`/`NaN`.
    pub fn eval(&self, r: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expression::Literal(v) => *v,
            Expression::Var => r,
            Expression::Const(NamedConst::Pi) => std::f64::consts::PI,
            Expression::Const(NamedConst::E) => std::f64::consts::E,
            Expression::Neg(inner) => -inner.eval(r)?,
            Expression::Binary(op, a, b) => {
                let x = a.eval(r)?;
                let y = b.eval(r)?;
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
                    BinOp::Pow => pow_checked(x, y)?,
                }
            }
            Expression::Call(func, args) => {
                let x = args[0].eval(r)?;
                match func {
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogDomain(x));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::SqrtDomain(x));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(r)?),
                    Func::Max => x.max(args[1].eval(r)?),
                    Func::Pow => pow_checked(x, args[1].eval(r)?)?,
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite(self.node_name()))
        }
    }

    fn node_name(&self) -> &'static str {
        match self {
            Expression::Literal(_) => "literal",
            Expression::Var => "r",
            Expression::Const(_) => "constant",
            Expression::Neg(_) => "negation",
            Expression::Binary(BinOp::Add, _, _) => "+",
            Expression::Binary(BinOp::Sub, _, _) => "-",
            Expression::Binary(BinOp::Mul, _, _) => "*",
            Expression::Binary(BinOp::Div, _, _) => "/",
            Expression::Binary(BinOp::Pow, _, _) => "^",
            Expression::Call(f, _) => f.name(),
        }
    }

    /// Render back to source text. The output reparses to a structurally
    /// identical tree.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out
    }

    // Precedence levels: 0 sum, 1 product, 2 unary minus, 3 power, 4 atom.
    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary(BinOp::Add | BinOp::Sub, _, _) => 0,
            Expression::Binary(BinOp::Mul | BinOp::Div, _, _) => 1,
            Expression::Neg(_) => 2,
            Expression::Binary(BinOp::Pow, _, _) => 3,
            _ => 4,
        }
    }

    fn write(&self, out: &mut String, min_prec: u8) {
        let prec = self.precedence();
        let parens = prec < min_prec;
        if parens {
            out.push('(');
        }
        match self {
            Expression::Literal(v) => out.push_str(&format!("{v:?}")),
            Expression::Var => out.push('r'),
            Expression::Const(NamedConst::Pi) => out.push_str("pi"),
            Expression::Const(NamedConst::E) => out.push('e'),
            Expression::Neg(inner) => {
                out.push('-');
                inner.write(out, 2);
            }
            Expression::Binary(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 0, 1),
                    // Subtraction is left-associative: the right operand must
                    // bind tighter than another sum.
                    BinOp::Sub => ("-", 0, 1),
                    BinOp::Mul => ("*", 1, 2),
                    BinOp::Div => ("/", 1, 2),
                    // `^` is right-associative and binds tighter than unary
                    // minus, so a Neg or Pow on the left needs parentheses.
                    BinOp::Pow => ("^", 4, 3),
                };
                a.write(out, lp);
                out.push_str(sym);
                b.write(out, rp);
            }
            Expression::Call(func, args) => {
                out.push_str(func.name());
                out.push('(');
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    arg.write(out, 0);
                }
                out.push(')');
            }
        }
        if parens {
            out.push(')');
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse())
    }
}

fn pow_checked(x: f64, y: f64) -> Result<f64, EvalError> {
    if x == 0.0 && y < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if x < 0.0 && y.fract() != 0.0 {
        return Err(EvalError::NonFinite("^"));
    }
    Ok(x.powf(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_str(text: &str, r: f64) -> f64 {
        parse(text).unwrap().eval(r).unwrap()
    }

    #[test]
    fn exponential_at_one() {
        let v = eval_str("exp(-2*r)", 1.0);
        assert!((v - 0.13533528323661269).abs() < 1e-15);
    }

    #[test]
    fn fractional_power() {
        let v = eval_str("(1+r^2)^1.5", 2.0);
        assert!((v - 11.180339887498949).abs() < 1e-12);
    }

    #[test]
    fn unterminated_call_reports_offset() {
        let err = parse("exp(").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn identity_and_min() {
        assert_eq!(eval_str("r", 3.5), 3.5);
        assert_eq!(eval_str("min(r, 2)", 5.0), 2.0);
        assert_eq!(eval_str("max(r, 2)", 5.0), 5.0);
    }

    #[test]
    fn log_domain_error() {
        let expr = parse("log(r-1)").unwrap();
        assert!(matches!(expr.eval(1.0), Err(EvalError::LogDomain(_))));
        assert!(expr.eval(2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let expr = parse("1/r").unwrap();
        assert_eq!(expr.eval(0.0), Err(EvalError::DivisionByZero));
        let expr = parse("r^-1").unwrap();
        assert_eq!(expr.eval(0.0), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn overflow_is_an_error() {
        let expr = parse("exp(r)").unwrap();
        assert!(matches!(expr.eval(1e6), Err(EvalError::NonFinite(_))));
    }

    #[test]
    fn precedence_and_associativity() {
        // ^ binds tighter than unary minus.
        assert_eq!(eval_str("-2^2", 0.0), -4.0);
        // ^ is right-associative.
        assert_eq!(eval_str("2^3^2", 0.0), 512.0);
        // left-associativity of subtraction and division.
        assert_eq!(eval_str("8-3-2", 0.0), 3.0);
        assert_eq!(eval_str("8/4/2", 0.0), 1.0);
        assert_eq!(eval_str("1+2*3", 0.0), 7.0);
        // exponent may be negative.
        assert_eq!(eval_str("2^-1", 0.0), 0.5);
    }

    #[test]
    fn unknown_identifier() {
        let err = parse("foo(1)").unwrap_err();
        assert_eq!(err.offset, 0);
        let err = parse("1 + bar").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn trailing_tokens() {
        let err = parse("1 2").unwrap_err();
        assert_eq!(err.offset, 2);
    }

    #[test]
    fn unbalanced_parentheses() {
        let err = parse("(1+r").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(parse("1+r)").is_err());
    }

    #[test]
    fn wrong_arity() {
        assert!(parse("exp(1, 2)").is_err());
        assert!(parse("min(1)").is_err());
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(eval_str("1e-3", 0.0), 1e-3);
        assert_eq!(eval_str("2.5e2", 0.0), 250.0);
        assert_eq!(eval_str(".5", 0.0), 0.5);
        // `1e` with no exponent digits: `e` is the Euler constant times... no,
        // it lexes as the literal 1 followed by the constant e -> trailing tokens.
        assert!(parse("1e").is_err());
    }

    #[test]
    fn unparse_round_trip_samples() {
        for src in [
            "exp(-2*r)",
            "(1+r^2)^1.5",
            "-r^2",
            "(-r)^2",
            "2^3^2",
            "8-3-2",
            "min(r, max(1, r))",
            "pi*e/r",
            "1/(1+r)",
            "r^(1-3)*exp(-r+4*r^2)",
        ] {
            let ast = parse(src).unwrap();
            let printed = ast.unparse();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(ast, reparsed, "round trip failed for `{src}` -> `{printed}`");
        }
    }
}
