//! A small expression language for user-defined surfaces.
//!
//! Grammar: `+ - * / ^`, `pow(a,b)`, the unary functions
//! `sin cos sinh cosh exp log sqrt arcsinh`, numeric literals, `pi`, and
//! the variables `theta1`/`theta2` (aliases `t1`/`t2`). An expression is
//! differentiated symbolically, so expression surfaces support the
//! closed-form derivative mode as well as jets and finite differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet2, Scalar};
use crate::surface::{Domain, ParamSurface, RawJet, SurfaceMap};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize), // 0 = theta1, 1 = theta2
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Fun(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Asinh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Asinh => "arcsinh",
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(0) => write!(f, "theta1"),
            Expr::Var(_) => write!(f, "theta2"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Fun(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Expr {
    pub fn eval<S: Scalar>(&self, vars: [S; 2]) -> S {
        match self {
            Expr::Num(v) => S::from_f64(*v),
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => match b.as_const() {
                Some(p) if p.fract() == 0.0 && p.abs() < 64.0 => a.eval(vars).powi(p as i32),
                Some(p) => a.eval(vars).powf(p),
                None => (b.eval(vars) * a.eval(vars).ln()).exp(),
            },
            Expr::Neg(a) => -a.eval(vars),
            Expr::Fun(func, a) => {
                let x = a.eval(vars);
                match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Asinh => x.asinh(),
                }
            }
        }
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.as_const().map(|v| -v),
            _ => None,
        }
    }

    /// Symbolic partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        use Expr::*;
        let num = |v: f64| Num(v);
        match self {
            Num(_) => num(0.0),
            Var(j) => num(if *j == i { 1.0 } else { 0.0 }),
            Add(a, b) => simplify(Add(Box::new(a.diff(i)), Box::new(b.diff(i)))),
            Sub(a, b) => simplify(Sub(Box::new(a.diff(i)), Box::new(b.diff(i)))),
            Mul(a, b) => simplify(Add(
                Box::new(simplify(Mul(Box::new(a.diff(i)), b.clone()))),
                Box::new(simplify(Mul(a.clone(), Box::new(b.diff(i))))),
            )),
            Div(a, b) => {
                // (a'b - ab') / b^2
                let top = Sub(
                    Box::new(simplify(Mul(Box::new(a.diff(i)), b.clone()))),
                    Box::new(simplify(Mul(a.clone(), Box::new(b.diff(i))))),
                );
                simplify(Div(
                    Box::new(simplify(top)),
                    Box::new(simplify(Mul(b.clone(), b.clone()))),
                ))
            }
            Pow(a, b) => match b.as_const() {
                // d(a^p) = p a^(p-1) a'
                Some(p) => simplify(Mul(
                    Box::new(simplify(Mul(
                        Box::new(num(p)),
                        Box::new(Pow(a.clone(), Box::new(num(p - 1.0)))),
                    ))),
                    Box::new(a.diff(i)),
                )),
                // a^b = exp(b ln a): d = a^b (b' ln a + b a'/a)
                None => {
                    let t1 = Mul(Box::new(b.diff(i)), Box::new(Fun(Func::Log, a.clone())));
                    let t2 = Div(
                        Box::new(simplify(Mul(b.clone(), Box::new(a.diff(i))))),
                        a.clone(),
                    );
                    simplify(Mul(
                        Box::new(self.clone()),
                        Box::new(simplify(Add(Box::new(simplify(t1)), Box::new(simplify(t2))))),
                    ))
                }
            },
            Neg(a) => simplify(Neg(Box::new(a.diff(i)))),
            Fun(func, a) => {
                let da = a.diff(i);
                let outer = match func {
                    Func::Sin => Fun(Func::Cos, a.clone()),
                    Func::Cos => Neg(Box::new(Fun(Func::Sin, a.clone()))),
                    Func::Sinh => Fun(Func::Cosh, a.clone()),
                    Func::Cosh => Fun(Func::Sinh, a.clone()),
                    Func::Exp => Fun(Func::Exp, a.clone()),
                    Func::Log => Div(Box::new(num(1.0)), a.clone()),
                    // d sqrt(a) core: 1/(2 sqrt(a))
                    Func::Sqrt => Div(
                        Box::new(num(0.5)),
                        Box::new(Fun(Func::Sqrt, a.clone())),
                    ),
                    // d arcsinh(a) core: 1/sqrt(1 + a^2)
                    Func::Asinh => Div(
                        Box::new(num(1.0)),
                        Box::new(Fun(
                            Func::Sqrt,
                            Box::new(Add(
                                Box::new(num(1.0)),
                                Box::new(Mul(a.clone(), a.clone())),
                            )),
                        )),
                    ),
                };
                simplify(Mul(Box::new(simplify(outer)), Box::new(da)))
            }
        }
    }
}

fn simplify(e: Expr) -> Expr {
    use Expr::*;
    match e {
        Add(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x + y),
            (Num(z), b) if z == 0.0 => b,
            (a, Num(z)) if z == 0.0 => a,
            (a, b) => Add(Box::new(a), Box::new(b)),
        },
        Sub(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x - y),
            (a, Num(z)) if z == 0.0 => a,
            (a, b) => Sub(Box::new(a), Box::new(b)),
        },
        Mul(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x * y),
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), b) if o == 1.0 => b,
            (a, Num(o)) if o == 1.0 => a,
            (a, b) => Mul(Box::new(a), Box::new(b)),
        },
        Div(a, b) => match (*a, *b) {
            (Num(z), _) if z == 0.0 => Num(0.0),
            (a, Num(o)) if o == 1.0 => a,
            (a, b) => Div(Box::new(a), Box::new(b)),
        },
        Neg(a) => match *a {
            Num(x) => Num(-x),
            a => Neg(Box::new(a)),
        },
        Pow(a, b) => match (*a, *b) {
            (a, Num(o)) if o == 1.0 => a,
            (_, Num(z)) if z == 0.0 => Num(1.0),
            (a, b) => Pow(Box::new(a), Box::new(b)),
        },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Parsing
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

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' | '\u{2212}' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' | '\u{00d7}' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '/' | '\u{00f7}' => {
                toks.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal `{text}`")))?;
                toks.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '\u{03c0}' => {
                if c == '\u{03c0}' {
                    toks.push(Tok::Ident("pi".to_string()));
                    i += 1;
                    continue;
                }
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_')
                {
                    i += 1;
                }
                toks.push(Tok::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Expr(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            match t {
                Tok::Plus => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek() {
            match t {
                Tok::Star => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.next();
            // Right-associative; exponent may itself be signed.
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "theta1" | "t1" => Ok(Expr::Var(0)),
                "theta2" | "t2" => Ok(Expr::Var(1)),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "pow" => {
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Pow(Box::new(a), Box::new(b)))
                }
                f => {
                    let func = match f {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "sinh" => Func::Sinh,
                        "cosh" => Func::Cosh,
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "arcsinh" | "asinh" => Func::Asinh,
                        other => {
                            return Err(Error::Expr(format!("unknown identifier `{other}`")))
                        }
                    };
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Fun(func, Box::new(a)))
                }
            },
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

/// Parse a single scalar expression in `theta1`, `theta2`.
pub fn parse(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Expr(format!(
            "trailing input after expression at token {}",
            p.pos
        )));
    }
    Ok(e)
}

/// A surface whose three components are parsed expressions. Carries
/// symbolically differentiated partials for the closed-form mode.
pub struct ExprSurface {
    comps: [Expr; 3],
    d1: [Expr; 3],
    d2: [Expr; 3],
    d11: [Expr; 3],
    d12: [Expr; 3],
    d22: [Expr; 3],
}

impl ExprSurface {
    pub fn new(x: &str, y: &str, z: &str) -> Result<ExprSurface> {
        let comps = [parse(x)?, parse(y)?, parse(z)?];
        let d1: [Expr; 3] = std::array::from_fn(|i| comps[i].diff(0));
        let d2: [Expr; 3] = std::array::from_fn(|i| comps[i].diff(1));
        let d11: [Expr; 3] = std::array::from_fn(|i| d1[i].diff(0));
        let d12: [Expr; 3] = std::array::from_fn(|i| d1[i].diff(1));
        let d22: [Expr; 3] = std::array::from_fn(|i| d2[i].diff(1));
        Ok(ExprSurface { comps, d1, d2, d11, d12, d22 })
    }

    pub fn into_surface(self, domain: Domain) -> ParamSurface {
        ParamSurface::new(Arc::new(self), domain)
    }
}

impl SurfaceMap for ExprSurface {
    fn eval(&self, t1: f64, t2: f64) -> crate::linalg::Vec3 {
        crate::linalg::vec3(
            self.comps[0].eval([t1, t2]),
            self.comps[1].eval([t1, t2]),
            self.comps[2].eval([t1, t2]),
        )
    }

    fn eval_jet2(&self, t1: Jet2, t2: Jet2) -> [Jet2; 3] {
        std::array::from_fn(|i| self.comps[i].eval([t1, t2]))
    }

    fn analytic_jet(&self, t1: f64, t2: f64) -> Option<RawJet> {
        let v = [t1, t2];
        let at = |es: &[Expr; 3]| {
            crate::linalg::vec3(es[0].eval(v), es[1].eval(v), es[2].eval(v))
        };
        Some(RawJet {
            p: at(&self.comps),
            d1: at(&self.d1),
            d2: at(&self.d2),
            d11: at(&self.d11),
            d12: at(&self.d12),
            d22: at(&self.d22),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_evaluates() {
        let e = parse("2*theta1 + sin(pi*theta2)/2 - 1").unwrap();
        let v = e.eval([0.5, 0.5]);
        assert!((v - (1.0 + 0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_power() {
        let e = parse("2 + 3*4^2").unwrap();
        assert!((e.eval([0.0, 0.0]) - 50.0).abs() < 1e-12);
        let e = parse("-theta1^2").unwrap();
        assert!((e.eval([3.0, 0.0]) + 9.0).abs() < 1e-12);
        let e = parse("pow(theta1, 3)").unwrap();
        assert!((e.eval([2.0, 0.0]) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("sin(").is_err());
        assert!(parse("1 +").is_err());
        assert!(parse("foo(theta1)").is_err());
        assert!(parse("theta1 theta2").is_err());
    }

    #[test]
    fn arcsinh_round_trip() {
        let e = parse("arcsinh(sinh(theta1))").unwrap();
        assert!((e.eval([0.8, 0.0]) - 0.8).abs() < 1e-14);
    }

    proptest! {
        // Symbolic derivative must agree with the jet derivative of the
        // same expression.
        #[test]
        fn symbolic_diff_matches_jets(t1 in -1.5f64..1.5, t2 in -1.5f64..1.5) {
            let e = parse("sin(theta1*theta2) + cosh(theta1)/sqrt(4 + theta2^2) + arcsinh(theta1 - theta2)").unwrap();
            let dx = e.diff(0);
            let dy = e.diff(1);
            let j = e.eval([Jet2::var1(t1), Jet2::var2(t2)]);
            prop_assert!((dx.eval([t1, t2]) - j.d1).abs() < 1e-11 * j.d1.abs().max(1.0));
            prop_assert!((dy.eval([t1, t2]) - j.d2).abs() < 1e-11 * j.d2.abs().max(1.0));
            let dxx = dx.diff(0);
            let dxy = dx.diff(1);
            prop_assert!((dxx.eval([t1, t2]) - j.d11).abs() < 1e-10 * j.d11.abs().max(1.0));
            prop_assert!((dxy.eval([t1, t2]) - j.d12).abs() < 1e-10 * j.d12.abs().max(1.0));
        }
    }

    #[test]
    fn expression_cylinder_matches_closed_forms() {
        let s = ExprSurface::new("4*cos(theta1)", "4*sin(theta1)", "theta2")
            .unwrap()
            .into_surface(Domain::new(0.0, std::f64::consts::PI, 0.0, 4.0));
        let f = s.forms(0.7, 1.3).unwrap();
        assert!((f.e - 16.0).abs() < 1e-12);
        assert!((f.l + 4.0).abs() < 1e-12);
        assert!(f.m.abs() < 1e-12);
        assert!((f.g - 1.0).abs() < 1e-12);
    }
}
