//! Arithmetic expression language for metric entries.
//!
//! Grammar (usual precedence, `^` binds tightest and associates right):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | variable | function '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp log sin cos sinh cosh sqrt`. Variables are `t` and
//! `x1 .. xn` where `n+1` is the chart dimension fixed at parse time.
//! `log` is the natural logarithm. All errors carry 1-based line/column
//! positions; when an expression is embedded in a larger document the caller
//! supplies the base position so errors point into that document.

use crate::{Error, Result};

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
}

impl Func {
    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Sqrt => x.sqrt(),
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Parsed expression tree. `Var(k)` indexes the chart coordinate vector
/// (`0` = `t`, `k` = `xk`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Evaluates at the given coordinate values (`coords[0]` = `t`).
    pub fn eval(&self, coords: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(k) => coords[*k],
            Expr::Add(a, b) => a.eval(coords) + b.eval(coords),
            Expr::Sub(a, b) => a.eval(coords) - b.eval(coords),
            Expr::Mul(a, b) => a.eval(coords) * b.eval(coords),
            Expr::Div(a, b) => a.eval(coords) / b.eval(coords),
            Expr::Pow(a, b) => a.eval(coords).powf(b.eval(coords)),
            Expr::Neg(a) => -a.eval(coords),
            Expr::Call(f, a) => f.apply(a.eval(coords)),
        }
    }

    /// True when the expression references no coordinate at all, in which
    /// case it evaluates to the same number everywhere.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) => false,
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
        }
    }

    /// True when the expression does not reference coordinate `k`.
    pub fn is_independent_of(&self, k: usize) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(j) => *j != k,
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_independent_of(k) && b.is_independent_of(k),
            Expr::Neg(a) | Expr::Call(_, a) => a.is_independent_of(k),
        }
    }
}

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
    End,
}

#[derive(Debug, Clone)]
struct Located {
    tok: Tok,
    line: usize,
    col: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, base_line: usize, base_col: usize) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: base_line, col: base_col }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn tokens(mut self) -> Result<Vec<Located>> {
        let mut out = Vec::new();
        loop {
            while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\r') | Some(b'\n')) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Located { tok: Tok::End, line, col });
                return Ok(out);
            };
            let tok = match c {
                b'+' => {
                    self.bump();
                    Tok::Plus
                }
                b'-' => {
                    self.bump();
                    Tok::Minus
                }
                b'*' => {
                    self.bump();
                    Tok::Star
                }
                b'/' => {
                    self.bump();
                    Tok::Slash
                }
                b'^' => {
                    self.bump();
                    Tok::Caret
                }
                b'(' => {
                    self.bump();
                    Tok::LParen
                }
                b')' => {
                    self.bump();
                    Tok::RParen
                }
                b'0'..=b'9' | b'.' => self.number()?,
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => self.ident(),
                other => {
                    return Err(self.error(format!(
                        "unexpected character '{}'",
                        (other as char).escape_default()
                    )))
                }
            };
            out.push(Located { tok, line, col });
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let (line, col) = (self.line, self.col);
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
        }
        if self.peek() == Some(b'.') {
            self.bump();
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.bump();
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.bump();
            }
            if matches!(self.peek(), Some(b'0'..=b'9')) {
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.bump();
                }
            } else {
                // Not an exponent after all ("2e" could start an identifier
                // elsewhere, but here it is simply a malformed number).
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Parse {
            line,
            col,
            msg: format!("malformed number '{text}'"),
        })
    }

    fn ident(&mut self) -> Tok {
        let start = self.pos;
        while matches!(self.peek(), Some(b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_')) {
            self.bump();
        }
        Tok::Ident(std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string())
    }
}

struct Parser {
    toks: Vec<Located>,
    at: usize,
    dim: usize,
    depth: usize,
}

// Expressions nested deeper than this are rejected instead of risking a
// parser stack overflow on adversarial input.
const MAX_DEPTH: usize = 200;

impl Parser {
    fn peek(&self) -> &Located {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> Located {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error_at(t: &Located, msg: impl Into<String>) -> Error {
        Error::Parse { line: t.line, col: t.col, msg: msg.into() }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let t = self.peek().clone();
            return Err(Self::error_at(&t, "expression too deeply nested"));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let e = if self.peek().tok == Tok::Minus {
            self.bump();
            Expr::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr> {
        self.enter()?;
        let base = self.atom()?;
        let e = if self.peek().tok == Tok::Caret {
            self.bump();
            // Right-associative; allow a signed exponent like 2^-3.
            Expr::Pow(Box::new(base), Box::new(self.unary()?))
        } else {
            base
        };
        self.depth -= 1;
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.enter()?;
        let t = self.bump();
        let e = match &t.tok {
            Tok::Num(v) => Expr::Num(*v),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::RParen {
                    return Err(Self::error_at(&close, "expected ')'"));
                }
                inner
            }
            Tok::Ident(name) => self.ident_atom(&t, name)?,
            Tok::End => return Err(Self::error_at(&t, "unexpected end of expression")),
            other => return Err(Self::error_at(&t, format!("unexpected token {other:?}"))),
        };
        self.depth -= 1;
        Ok(e)
    }

    fn ident_atom(&mut self, t: &Located, name: &str) -> Result<Expr> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(f) = Func::from_name(name) {
            let open = self.bump();
            if open.tok != Tok::LParen {
                return Err(Self::error_at(&open, format!("expected '(' after function '{name}'")));
            }
            let arg = self.expr()?;
            let close = self.bump();
            if close.tok != Tok::RParen {
                return Err(Self::error_at(&close, "expected ')'"));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if name == "t" {
            return Ok(Expr::Var(0));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 && k < self.dim {
                    return Ok(Expr::Var(k));
                }
                if k >= 1 {
                    return Err(Self::error_at(
                        t,
                        format!(
                            "coordinate '{name}' out of range for dimension {} (allowed: t, x1..x{})",
                            self.dim,
                            self.dim - 1
                        ),
                    ));
                }
            }
        }
        Err(Self::error_at(t, format!("unknown identifier '{name}'")))
    }
}

/// Parses `src` as an expression over `t, x1..x{dim-1}`.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    parse_expr_at(src, dim, 1, 1)
}

/// Like [`parse_expr`] but error positions start from (`base_line`,
/// `base_col`) so they can point into an enclosing document.
pub fn parse_expr_at(src: &str, dim: usize, base_line: usize, base_col: usize) -> Result<Expr> {
    let toks = Lexer::new(src, base_line, base_col).tokens()?;
    let mut p = Parser { toks, at: 0, dim, depth: 0 };
    let e = p.expr()?;
    let trailing = p.peek().clone();
    if trailing.tok != Tok::End {
        return Err(Parser::error_at(&trailing, format!("unexpected trailing {:?}", trailing.tok)));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval4(src: &str, c: [f64; 4]) -> f64 {
        parse_expr(src, 4).unwrap().eval(&c)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval4("1 + 2 * 3", [0.0; 4]), 7.0);
        assert_eq!(eval4("(1 + 2) * 3", [0.0; 4]), 9.0);
        assert_eq!(eval4("2 ^ 3 ^ 2", [0.0; 4]), 512.0); // right assoc
        assert_eq!(eval4("-2 ^ 2", [0.0; 4]), -4.0); // -(2^2)
        assert_eq!(eval4("2 ^ -1", [0.0; 4]), 0.5);
        assert_eq!(eval4("6 / 3 / 2", [0.0; 4]), 1.0); // left assoc
        assert_eq!(eval4("1 - 2 - 3", [0.0; 4]), -4.0);
    }

    #[test]
    fn functions_and_constants() {
        assert_relative_eq!(eval4("sin(pi / 2)", [0.0; 4]), 1.0, max_relative = 1e-15);
        assert_relative_eq!(eval4("log(exp(2))", [0.0; 4]), 2.0, max_relative = 1e-15);
        assert_relative_eq!(
            eval4("cosh(1)^2 - sinh(1)^2", [0.0; 4]),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(eval4("sqrt(2)^2", [0.0; 4]), 2.0, max_relative = 1e-15);
        assert_relative_eq!(eval4("cos(0)", [0.0; 4]), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn variables_index_coordinates() {
        let c = [2.0, 3.0, 5.0, 7.0];
        assert_eq!(eval4("t", c), 2.0);
        assert_eq!(eval4("x1", c), 3.0);
        assert_eq!(eval4("x3", c), 7.0);
        assert_eq!(eval4("t * x1 + x2 * x3", c), 41.0);
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(eval4("1.5e2", [0.0; 4]), 150.0);
        assert_eq!(eval4("2E-3", [0.0; 4]), 0.002);
        assert_eq!(eval4(".5", [0.0; 4]), 0.5);
    }

    #[test]
    fn error_positions_are_one_based() {
        let err = parse_expr("1 + ", 4).unwrap_err();
        assert_eq!(err, Error::Parse { line: 1, col: 5, msg: "unexpected end of expression".into() });

        let err = parse_expr("1 + @", 4).unwrap_err();
        match err {
            Error::Parse { line: 1, col: 5, .. } => {}
            other => panic!("unexpected error {other:?}"),
        }

        let err = parse_expr("sin 2", 4).unwrap_err();
        match err {
            Error::Parse { line: 1, col: 5, msg } => assert!(msg.contains("expected '('")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn base_offset_shifts_positions() {
        let err = parse_expr_at("1 + ", 4, 7, 13).unwrap_err();
        assert_eq!(
            err,
            Error::Parse { line: 7, col: 17, msg: "unexpected end of expression".into() }
        );
    }

    #[test]
    fn unknown_and_out_of_range_variables() {
        let err = parse_expr("y", 4).unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("unknown identifier 'y'")),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_expr("x4", 4).unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("out of range")),
            other => panic!("unexpected error {other:?}"),
        }
        // x3 is fine in dimension 4, x0 never exists.
        assert!(parse_expr("x3", 4).is_ok());
        assert!(parse_expr("x0", 4).is_err());
    }

    #[test]
    fn constant_detection() {
        assert!(parse_expr("1 + sin(2) * pi", 4).unwrap().is_constant());
        assert!(!parse_expr("1 + t", 4).unwrap().is_constant());
        let e = parse_expr("x1^2 + x2", 4).unwrap();
        assert!(e.is_independent_of(0));
        assert!(e.is_independent_of(3));
        assert!(!e.is_independent_of(1));
    }

    #[test]
    fn deep_nesting_is_rejected_not_crashing() {
        let mut s = String::new();
        for _ in 0..100_000 {
            s.push('(');
        }
        s.push('1');
        assert!(parse_expr(&s, 4).is_err());
    }

    // Deterministic pseudo-random byte soup; the parser must return, never
    // panic, on arbitrary input.
    #[test]
    fn fuzz_no_crash() {
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u32
        };
        let charset: &[u8] = b"0123456789.+-*/^()xtpie sincoshqrtlg_\t\n";
        for _ in 0..10_000 {
            let len = (next() % 48) as usize;
            let s: String = (0..len)
                .map(|_| charset[(next() as usize) % charset.len()] as char)
                .collect();
            let _ = parse_expr(&s, 4); // must not panic
        }
    }

    #[test]
    fn fuzz_valid_expressions_evaluate_finite_or_nan_without_panic() {
        // Structured generator: random well-formed trees must parse and eval.
        let mut state: u64 = 42;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u32
        };
        fn gen(next: &mut impl FnMut() -> u32, depth: usize) -> String {
            if depth == 0 {
                return match next() % 4 {
                    0 => "t".into(),
                    1 => "x1".into(),
                    2 => format!("{}", next() % 10),
                    _ => "pi".into(),
                };
            }
            match next() % 8 {
                0 => format!("({} + {})", gen(next, depth - 1), gen(next, depth - 1)),
                1 => format!("({} - {})", gen(next, depth - 1), gen(next, depth - 1)),
                2 => format!("({} * {})", gen(next, depth - 1), gen(next, depth - 1)),
                3 => format!("({} / {})", gen(next, depth - 1), gen(next, depth - 1)),
                4 => format!("sin({})", gen(next, depth - 1)),
                5 => format!("cosh({})", gen(next, depth - 1)),
                6 => format!("-{}", gen(next, depth - 1)),
                _ => format!("({} ^ 2)", gen(next, depth - 1)),
            }
        }
        for _ in 0..500 {
            let s = gen(&mut next, 4);
            let e = parse_expr(&s, 4).unwrap();
            let _ = e.eval(&[0.3, -0.7, 1.1, 0.0]); // must not panic
        }
    }
}
