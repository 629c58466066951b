//! Expression frontend: parse user-written formulas and evaluate them
//! into jets at a base point.
//!
//! Grammar (standard precedence, `^` binds tightest and associates
//! right, unary minus next, then `*` `/`, then `+` `-`; all binary
//! operators left-associative; no implicit multiplication):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?        // exponent must fold to a rational
//! atom   := integer | variable | '(' expr ')' | 'sqrt' '(' expr ')'
//! ```
//!
//! Integer literals are exact; rationals are written as quotients
//! (`5/2`) and rational exponents with parentheses (`x^(1/2)`).

use crate::error::{Error, Result};
use crate::jet::{Jet, JetCtx};
use crate::scalar::{Backend, Scalar};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, BigRational),
    Sqrt(Box<Expr>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.pos,
                message: format!("expected `{}`", c as char),
            })
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let exp_off = self.pos;
            // Right-associative; the exponent may carry its own unary minus.
            let exp_expr = if self.peek() == Some(b'-') {
                self.pos += 1;
                Expr::Neg(Box::new(self.parse_power()?))
            } else {
                self.parse_power()?
            };
            let r = const_fold(&exp_expr).ok_or(Error::Syntax {
                offset: exp_off,
                message: "exponent must be a constant rational".into(),
            })?;
            return Ok(Expr::Pow(Box::new(base), r));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(Error::Syntax {
                offset: self.pos,
                message: "unexpected end of input".into(),
            }),
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let n: BigInt = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: "bad integer literal".into(),
                })?;
                Ok(Expr::Num(BigRational::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if name == "sqrt" {
                    self.expect(b'(')?;
                    let e = self.parse_expr()?;
                    self.expect(b')')?;
                    return Ok(Expr::Sqrt(Box::new(e)));
                }
                match self.vars.iter().position(|v| v == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(Error::UndeclaredVariable {
                        offset: start,
                        name: name.to_string(),
                    }),
                }
            }
            Some(c) => Err(Error::Syntax {
                offset: self.pos,
                message: format!("unexpected character `{}`", c as char),
            }),
        }
    }
}

/// Parse a formula over the declared variable names.
pub fn parse(text: &str, vars: &[String]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

/// Fold an expression to an exact rational when it contains no variables.
pub fn const_fold(e: &Expr) -> Option<BigRational> {
    match e {
        Expr::Num(r) => Some(r.clone()),
        Expr::Var(_) => None,
        Expr::Add(a, b) => Some(const_fold(a)? + const_fold(b)?),
        Expr::Sub(a, b) => Some(const_fold(a)? - const_fold(b)?),
        Expr::Mul(a, b) => Some(const_fold(a)? * const_fold(b)?),
        Expr::Div(a, b) => {
            let d = const_fold(b)?;
            if d.is_zero() {
                None
            } else {
                Some(const_fold(a)? / d)
            }
        }
        Expr::Neg(a) => Some(-const_fold(a)?),
        Expr::Pow(a, r) => {
            let base = const_fold(a)?;
            if r.is_integer() && !r.is_negative() {
                let mut acc = BigRational::one();
                let mut k = r.to_integer();
                while k > BigInt::zero() {
                    acc *= &base;
                    k -= 1;
                }
                Some(acc)
            } else {
                None
            }
        }
        Expr::Sqrt(_) => None,
    }
}

/// Evaluate an expression into a jet of order `order` at `base`.
/// Branch choice for roots follows the backend's designated root of the
/// constant term (positive root over Q and floats, declared root in
/// extension towers).
pub fn eval_jet(
    e: &Expr,
    base: &Arc<Vec<Scalar>>,
    n: usize,
    order: usize,
    backend: &Backend,
) -> Result<Jet> {
    let ctx = JetCtx::get(n, order);
    eval_rec(e, &ctx, base, backend)
}

fn eval_rec(
    e: &Expr,
    ctx: &Arc<JetCtx>,
    base: &Arc<Vec<Scalar>>,
    backend: &Backend,
) -> Result<Jet> {
    match e {
        Expr::Num(r) => Ok(Jet::constant(ctx, base, backend, backend.from_rational(r))),
        Expr::Var(i) => {
            if *i >= ctx.n {
                return Err(Error::Invalid(format!(
                    "variable index {i} out of range for {} variables",
                    ctx.n
                )));
            }
            Ok(Jet::coordinate(ctx, base, backend, *i))
        }
        Expr::Add(a, b) => eval_rec(a, ctx, base, backend)?.add(&eval_rec(b, ctx, base, backend)?),
        Expr::Sub(a, b) => eval_rec(a, ctx, base, backend)?.sub(&eval_rec(b, ctx, base, backend)?),
        Expr::Mul(a, b) => eval_rec(a, ctx, base, backend)?.mul(&eval_rec(b, ctx, base, backend)?),
        Expr::Div(a, b) => {
            let den = eval_rec(b, ctx, base, backend)?;
            if den.const_term().is_zero() {
                return Err(Error::PoleAtBase);
            }
            eval_rec(a, ctx, base, backend)?.div(&den)
        }
        Expr::Neg(a) => Ok(eval_rec(a, ctx, base, backend)?.neg()),
        Expr::Sqrt(a) => eval_rec(a, ctx, base, backend)?.sqrt(),
        Expr::Pow(a, r) => {
            let base_jet = eval_rec(a, ctx, base, backend)?;
            let p: i64 = r
                .numer()
                .try_into()
                .map_err(|_| Error::Invalid("exponent numerator too large".into()))?;
            let q: i64 = r
                .denom()
                .try_into()
                .map_err(|_| Error::Invalid("exponent denominator too large".into()))?;
            if q == 1 && p >= 0 {
                base_jet.pow_int(p as u32)
            } else {
                if base_jet.const_term().is_zero() {
                    return Err(Error::PoleAtBase);
                }
                base_jet.pow_rational(p, q as u32)
            }
        }
    }
}

/// Stable printer; `parse . print . parse = parse` on all inputs.
pub fn print(e: &Expr, vars: &[String]) -> String {
    fn prec(e: &Expr) -> u8 {
        match e {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Sqrt(_) => 5,
        }
    }
    fn go(e: &Expr, vars: &[String], parent: u8) -> String {
        let p = prec(e);
        let s = match e {
            Expr::Num(r) => {
                if r.is_negative() {
                    // render through Neg so reparsing yields the same AST
                    return go(&Expr::Neg(Box::new(Expr::Num(-r.clone()))), vars, parent);
                }
                if r.is_integer() {
                    format!("{}", r.numer())
                } else {
                    format!("{}/{}", r.numer(), r.denom())
                }
            }
            Expr::Var(i) => vars[*i].clone(),
            Expr::Add(a, b) => format!("{} + {}", go(a, vars, p), go(b, vars, p + 1)),
            Expr::Sub(a, b) => format!("{} - {}", go(a, vars, p), go(b, vars, p + 1)),
            Expr::Mul(a, b) => format!("{}*{}", go(a, vars, p), go(b, vars, p + 1)),
            Expr::Div(a, b) => format!("{}/{}", go(a, vars, p), go(b, vars, p + 1)),
            Expr::Neg(a) => format!("-{}", go(a, vars, p + 1)),
            Expr::Pow(a, r) => {
                let exp = if r.is_integer() && !r.is_negative() {
                    format!("{}", r.numer())
                } else if r.is_integer() {
                    format!("(-{})", r.numer().magnitude())
                } else if r.is_negative() {
                    format!("(-{}/{})", r.numer().magnitude(), r.denom())
                } else {
                    format!("({}/{})", r.numer(), r.denom())
                };
                format!("{}^{}", go(a, vars, p + 1), exp)
            }
            Expr::Sqrt(a) => format!("sqrt({})", go(a, vars, 0)),
        };
        if p < parent {
            format!("({s})")
        } else {
            s
        }
    }
    go(e, vars, 0)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..16).map(|i| format!("x{i}")).collect();
        write!(f, "{}", print(self, &names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_steiner_formula() {
        let v = vars(&["x1", "x2"]);
        let e = parse("x1*x2 + x1/x2 + x2/x1", &v).unwrap();
        match &e {
            Expr::Add(_, _) => {}
            _ => panic!("expected top-level add"),
        }
        let printed = print(&e, &v);
        let e2 = parse(&printed, &v).unwrap();
        assert_eq!(e, e2);
    }

    #[test]
    fn exact_half_exponent() {
        let v = vars(&["x"]);
        let e = parse("(x^2-1)^(1/2)", &v).unwrap();
        match e {
            Expr::Pow(_, r) => assert_eq!(r, rat(1, 2)),
            _ => panic!("expected pow node"),
        }
    }

    #[test]
    fn syntax_error_offset() {
        let v = vars(&["x"]);
        match parse("x^", &v) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_variable() {
        let v = vars(&["x"]);
        match parse("x + y", &v) {
            Err(Error::UndeclaredVariable { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 4);
            }
            other => panic!("expected undeclared variable, got {other:?}"),
        }
    }

    #[test]
    fn eval_reciprocal_at_two() {
        // 1/x at base 2, order 2: 1/2 - (x-2)/4 + (x-2)^2/8
        let v = vars(&["x"]);
        let e = parse("1/x", &v).unwrap();
        let base = Arc::new(vec![Scalar::from_int(2)]);
        let j = eval_jet(&e, &base, 1, 2, &Backend::Rational).unwrap();
        assert!(j.coeff(&[0]).equals(&Scalar::from_frac(1, 2)));
        assert!(j.coeff(&[1]).equals(&Scalar::from_frac(-1, 4)));
        assert!(j.coeff(&[2]).equals(&Scalar::from_frac(1, 8)));
    }

    #[test]
    fn eval_sqrt_at_four() {
        // sqrt(x) at base 4, order 1: 2 + (x-4)/4
        let v = vars(&["x"]);
        let e = parse("sqrt(x)", &v).unwrap();
        let base = Arc::new(vec![Scalar::from_int(4)]);
        let j = eval_jet(&e, &base, 1, 1, &Backend::Rational).unwrap();
        assert!(j.coeff(&[0]).equals(&Scalar::from_int(2)));
        assert!(j.coeff(&[1]).equals(&Scalar::from_frac(1, 4)));
    }

    #[test]
    fn sqrt_three_not_rational() {
        let v = vars(&["x"]);
        let e = parse("sqrt(x)", &v).unwrap();
        let base = Arc::new(vec![Scalar::from_int(3)]);
        match eval_jet(&e, &base, 1, 2, &Backend::Rational) {
            Err(Error::RootNotRepresentable(_)) => {}
            other => panic!("expected root error, got {other:?}"),
        }
    }

    #[test]
    fn product_rule_consistency() {
        // eval(e1*e2) == eval(e1) * eval(e2)
        let v = vars(&["x", "y"]);
        let e1 = parse("x + y^2", &v).unwrap();
        let e2 = parse("1/(x - 3)", &v).unwrap();
        let prod = parse("(x + y^2)*(1/(x - 3))", &v).unwrap();
        let base = Arc::new(vec![Scalar::from_int(1), Scalar::from_int(2)]);
        let b = Backend::Rational;
        let j1 = eval_jet(&e1, &base, 2, 4, &b).unwrap();
        let j2 = eval_jet(&e2, &base, 2, 4, &b).unwrap();
        let jp = eval_jet(&prod, &base, 2, 4, &b).unwrap();
        assert!(j1.mul(&j2).unwrap().equals(&jp));
    }

    #[test]
    fn print_idempotence_on_samples() {
        let v = vars(&["x1", "x2"]);
        for s in [
            "x1*x2 + x1/x2 + x2/x1",
            "(x1^2 - 1)^(1/2)",
            "-x1^2 - x2^2",
            "1/(x1*x2) - sqrt(x1 + 1)",
            "x1^(-3/2)*5/2",
            "-(x1 + x2)^3",
            "2 - -3",
        ] {
            let e = parse(s, &v).unwrap();
            let p1 = print(&e, &v);
            let e2 = parse(&p1, &v).unwrap();
            assert_eq!(e, e2, "roundtrip failed for {s}: printed {p1}");
            assert_eq!(p1, print(&e2, &v));
        }
    }
}
