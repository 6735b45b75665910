//! A small, self-contained Java expression parser and evaluator used as a
//! reference when checking rewritten expressions.
//!
//! `int` and `long` arithmetic wraps like the JVM. `float` and `double`
//! values are modeled as exact rationals, so reordering never introduces
//! rounding differences of its own.

use std::fmt::Write as _;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Long,
    Double,
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i32),
    Long(i64),
    Real(BigRational),
    Bool(bool),
}

/// Division or remainder by zero, or an operation on the wrong kind of value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    DivideByZero,
    Type,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(usize),
    Paren(Box<Expr>),
    Unary(String, Box<Expr>),
    Binary(String, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    Assign(String, usize, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Op(&'static str),
    Other(char),
}

const OPS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "++", "--", "+", "-", "*", "/", "%",
    "<", ">", "!", "~", "&", "|", "^", "?", ":", "=", "(", ")",
];

fn lex(src: &str) -> Vec<Tok> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'.') {
                i += 1;
            }
            out.push(Tok::Num(src[start..i].to_string()));
            continue;
        }
        for op in OPS {
            if src[i..].starts_with(op) {
                out.push(Tok::Op(op));
                i += op.len();
                continue 'outer;
            }
        }
        out.push(Tok::Other(c));
        i += c.len_utf8();
    }
    out
}

/// Token texts of a piece of Java source; numbers are prefixed with `#`.
pub fn token_texts(src: &str) -> Vec<String> {
    lex(src)
        .into_iter()
        .map(|t| match t {
            Tok::Ident(s) => s,
            Tok::Num(s) => format!("#{s}"),
            Tok::Op(s) => s.to_string(),
            Tok::Other(c) => c.to_string(),
        })
        .collect()
}

fn decimal_rational(text: &str) -> BigRational {
    let (int_part, frac_part) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().unwrap() };
    let denom = num::pow(BigInt::from(10), frac_part.len());
    BigRational::new(numer, denom)
}

fn literal(text: &str) -> Option<Value> {
    let last = text.chars().last()?;
    match last {
        'L' | 'l' => Some(Value::Long(text[..text.len() - 1].parse::<i64>().ok()?)),
        'f' | 'F' | 'd' | 'D' => Some(Value::Real(decimal_rational(&text[..text.len() - 1]))),
        _ if text.contains('.') => Some(Value::Real(decimal_rational(text))),
        _ => Some(Value::Int(text.parse::<i64>().ok()? as i32)),
    }
}

fn binary_prec(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 3,
        "&&" => 4,
        "|" => 5,
        "^" => 6,
        "&" => 7,
        "==" | "!=" => 8,
        "<" | ">" | "<=" | ">=" => 9,
        "<<" | ">>" | ">>>" => 10,
        "+" | "-" => 11,
        "*" | "/" | "%" => 12,
        _ => return None,
    })
}

fn is_assign(op: &str) -> bool {
    matches!(op, "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=" | ">>>=")
}

struct Parser<'a, F: Fn(&str) -> Option<usize>> {
    toks: Vec<Tok>,
    at: usize,
    resolve: &'a F,
}

impl<F: Fn(&str) -> Option<usize>> Parser<'_, F> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at)
    }

    fn peek_op(&self) -> Option<&'static str> {
        match self.peek() {
            Some(Tok::Op(op)) => Some(op),
            _ => None,
        }
    }

    fn expect(&mut self, op: &str) -> Result<(), String> {
        match self.peek_op() {
            Some(o) if o == op => {
                self.at += 1;
                Ok(())
            }
            _ => Err(format!("expected {op:?} at token {}", self.at)),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let start = self.at;
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            if let Some(op) = self.toks.get(self.at + 1).and_then(|t| if let Tok::Op(o) = t { Some(*o) } else { None }) {
                if is_assign(op) {
                    let var = (self.resolve)(&name).ok_or_else(|| format!("unknown variable {name}"))?;
                    self.at += 2;
                    let rhs = self.expr()?;
                    return Ok(Expr::Assign(op.to_string(), var, Box::new(rhs)));
                }
            }
        }
        self.at = start;
        self.conditional()
    }

    fn conditional(&mut self) -> Result<Expr, String> {
        let cond = self.binary(0)?;
        if self.peek_op() == Some("?") {
            self.at += 1;
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.conditional()?;
            return Ok(Expr::Cond(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binary(&mut self, min: u8) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_op() {
            let Some(prec) = binary_prec(op) else { break };
            if prec < min {
                break;
            }
            self.at += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op.to_string(), Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if let Some(op @ ("-" | "+" | "!" | "~")) = self.peek_op() {
            self.at += 1;
            let inner = self.unary()?;
            if op == "-" {
                if let Expr::Lit(v) = &inner {
                    if let Some(n) = negate_literal(v) {
                        return Ok(Expr::Lit(n));
                    }
                }
            }
            return Ok(Expr::Unary(op.to_string(), Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, String> {
        match self.peek().cloned() {
            Some(Tok::Op("(")) => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(")")?;
                Ok(Expr::Paren(Box::new(inner)))
            }
            Some(Tok::Num(text)) => {
                self.at += 1;
                literal(&text).map(Expr::Lit).ok_or_else(|| format!("bad literal {text}"))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "true" => Ok(Expr::Lit(Value::Bool(true))),
                    "false" => Ok(Expr::Lit(Value::Bool(false))),
                    _ => (self.resolve)(&name).map(Expr::Var).ok_or_else(|| format!("unknown variable {name}")),
                }
            }
            other => Err(format!("unexpected {other:?}")),
        }
    }
}

fn negate_literal(v: &Value) -> Option<Value> {
    match v {
        Value::Int(i) => Some(Value::Int(i.wrapping_neg())),
        Value::Long(l) => Some(Value::Long(l.wrapping_neg())),
        Value::Real(r) => Some(Value::Real(-r.clone())),
        Value::Bool(_) => None,
    }
}

/// Parses one expression; `resolve` maps variable names to slots.
pub fn parse(src: &str, resolve: &impl Fn(&str) -> Option<usize>) -> Result<Expr, String> {
    let mut p = Parser { toks: lex(src), at: 0, resolve };
    let e = p.expr()?;
    if p.at != p.toks.len() {
        return Err(format!("trailing input at token {}", p.at));
    }
    Ok(e)
}

/// Prefix form of the tree; parenthesis nodes are dropped when `erase` is set.
pub fn sexpr(e: &Expr, erase: bool) -> String {
    let mut out = String::new();
    write_sexpr(e, erase, &mut out);
    out
}

fn write_sexpr(e: &Expr, erase: bool, out: &mut String) {
    match e {
        Expr::Lit(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Var(i) => {
            let _ = write!(out, "v{i}");
        }
        Expr::Paren(inner) if erase => write_sexpr(inner, erase, out),
        Expr::Paren(inner) => {
            out.push_str("(paren ");
            write_sexpr(inner, erase, out);
            out.push(')');
        }
        Expr::Unary(op, inner) => {
            let _ = write!(out, "({op} ");
            write_sexpr(inner, erase, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            let _ = write!(out, "({op} ");
            write_sexpr(a, erase, out);
            out.push(' ');
            write_sexpr(b, erase, out);
            out.push(')');
        }
        Expr::Cond(c, a, b) => {
            out.push_str("(? ");
            for (i, x) in [c, a, b].into_iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_sexpr(x, erase, out);
            }
            out.push(')');
        }
        Expr::Assign(op, v, rhs) => {
            let _ = write!(out, "({op} v{v} ");
            write_sexpr(rhs, erase, out);
            out.push(')');
        }
    }
}

fn real(v: &Value) -> Option<BigRational> {
    Some(match v {
        Value::Int(i) => BigRational::from_integer(BigInt::from(*i)),
        Value::Long(l) => BigRational::from_integer(BigInt::from(*l)),
        Value::Real(r) => r.clone(),
        Value::Bool(_) => return None,
    })
}

fn long(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => Some(i64::from(*i)),
        Value::Long(l) => Some(*l),
        _ => None,
    }
}

fn ty(v: &Value) -> Ty {
    match v {
        Value::Int(_) => Ty::Int,
        Value::Long(_) => Ty::Long,
        Value::Real(_) => Ty::Double,
        Value::Bool(_) => Ty::Bool,
    }
}

/// Java binary numeric promotion of two operand types.
fn promote(a: Ty, b: Ty) -> Result<Ty, Fault> {
    match (a, b) {
        (Ty::Bool, _) | (_, Ty::Bool) => Err(Fault::Type),
        (Ty::Double, _) | (_, Ty::Double) => Ok(Ty::Double),
        (Ty::Long, _) | (_, Ty::Long) => Ok(Ty::Long),
        _ => Ok(Ty::Int),
    }
}

fn trunc_div(a: &BigRational, b: &BigRational) -> BigRational {
    (a / b).trunc()
}

fn arith(op: &str, a: &Value, b: &Value) -> Result<Value, Fault> {
    if matches!(op, "<<" | ">>" | ">>>") {
        let dist = long(b).ok_or(Fault::Type)?;
        return match a {
            Value::Int(x) => {
                let s = (dist & 31) as u32;
                Ok(Value::Int(match op {
                    "<<" => x.wrapping_shl(s),
                    ">>" => x.wrapping_shr(s),
                    _ => ((*x as u32) >> s) as i32,
                }))
            }
            Value::Long(x) => {
                let s = (dist & 63) as u32;
                Ok(Value::Long(match op {
                    "<<" => x.wrapping_shl(s),
                    ">>" => x.wrapping_shr(s),
                    _ => ((*x as u64) >> s) as i64,
                }))
            }
            _ => Err(Fault::Type),
        };
    }
    if let (Value::Bool(x), Value::Bool(y)) = (a, b) {
        return match op {
            "&" => Ok(Value::Bool(*x & *y)),
            "|" => Ok(Value::Bool(*x | *y)),
            "^" => Ok(Value::Bool(*x ^ *y)),
            "==" => Ok(Value::Bool(x == y)),
            "!=" => Ok(Value::Bool(x != y)),
            _ => Err(Fault::Type),
        };
    }
    match promote(ty(a), ty(b))? {
        Ty::Int => {
            let (x, y) = (long(a).ok_or(Fault::Type)? as i32, long(b).ok_or(Fault::Type)? as i32);
            int_op(op, x, y, Value::Int, |v| v == 0)
        }
        Ty::Long => {
            let (x, y) = (long(a).ok_or(Fault::Type)?, long(b).ok_or(Fault::Type)?);
            long_op(op, x, y)
        }
        _ => {
            let (x, y) = (real(a).ok_or(Fault::Type)?, real(b).ok_or(Fault::Type)?);
            Ok(match op {
                "+" => Value::Real(x + y),
                "-" => Value::Real(x - y),
                "*" => Value::Real(x * y),
                "/" if y.is_zero() => return Err(Fault::DivideByZero),
                "/" => Value::Real(x / y),
                "%" if y.is_zero() => return Err(Fault::DivideByZero),
                "%" => {
                    let q = trunc_div(&x, &y);
                    Value::Real(x - y * q)
                }
                "<" => Value::Bool(x < y),
                ">" => Value::Bool(x > y),
                "<=" => Value::Bool(x <= y),
                ">=" => Value::Bool(x >= y),
                "==" => Value::Bool(x == y),
                "!=" => Value::Bool(x != y),
                _ => return Err(Fault::Type),
            })
        }
    }
}

fn int_op(op: &str, x: i32, y: i32, wrap: fn(i32) -> Value, zero: fn(i32) -> bool) -> Result<Value, Fault> {
    Ok(match op {
        "+" => wrap(x.wrapping_add(y)),
        "-" => wrap(x.wrapping_sub(y)),
        "*" => wrap(x.wrapping_mul(y)),
        "/" | "%" if zero(y) => return Err(Fault::DivideByZero),
        "/" => wrap(x.wrapping_div(y)),
        "%" => wrap(x.wrapping_rem(y)),
        "&" => wrap(x & y),
        "|" => wrap(x | y),
        "^" => wrap(x ^ y),
        "<" => Value::Bool(x < y),
        ">" => Value::Bool(x > y),
        "<=" => Value::Bool(x <= y),
        ">=" => Value::Bool(x >= y),
        "==" => Value::Bool(x == y),
        "!=" => Value::Bool(x != y),
        _ => return Err(Fault::Type),
    })
}

fn long_op(op: &str, x: i64, y: i64) -> Result<Value, Fault> {
    Ok(match op {
        "+" => Value::Long(x.wrapping_add(y)),
        "-" => Value::Long(x.wrapping_sub(y)),
        "*" => Value::Long(x.wrapping_mul(y)),
        "/" | "%" if y == 0 => return Err(Fault::DivideByZero),
        "/" => Value::Long(x.wrapping_div(y)),
        "%" => Value::Long(x.wrapping_rem(y)),
        "&" => Value::Long(x & y),
        "|" => Value::Long(x | y),
        "^" => Value::Long(x ^ y),
        "<" => Value::Bool(x < y),
        ">" => Value::Bool(x > y),
        "<=" => Value::Bool(x <= y),
        ">=" => Value::Bool(x >= y),
        "==" => Value::Bool(x == y),
        "!=" => Value::Bool(x != y),
        _ => return Err(Fault::Type),
    })
}

/// Assignment conversion to the declared type of a variable.
fn convert(v: Value, to: Ty) -> Result<Value, Fault> {
    Ok(match (to, v) {
        (Ty::Int, Value::Int(i)) => Value::Int(i),
        (Ty::Int, Value::Long(l)) => Value::Int(l as i32),
        (Ty::Long, v @ (Value::Int(_) | Value::Long(_))) => Value::Long(long(&v).unwrap_or(0)),
        (Ty::Double, v @ (Value::Int(_) | Value::Long(_) | Value::Real(_))) => Value::Real(real(&v).ok_or(Fault::Type)?),
        (Ty::Int, Value::Real(r)) => Value::Int(r.trunc().to_integer().to_i32().ok_or(Fault::Type)?),
        (Ty::Long, Value::Real(r)) => Value::Long(r.trunc().to_integer().to_i64().ok_or(Fault::Type)?),
        (Ty::Bool, Value::Bool(b)) => Value::Bool(b),
        _ => return Err(Fault::Type),
    })
}

/// Evaluates `e` with variable slots bound to `env` (typed by `types`).
pub fn eval(e: &Expr, env: &[Value], types: &[Ty]) -> Result<Value, Fault> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(i) => Ok(env[*i].clone()),
        Expr::Paren(inner) => eval(inner, env, types),
        Expr::Unary(op, inner) => {
            let v = eval(inner, env, types)?;
            match (op.as_str(), v) {
                ("-", Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
                ("-", Value::Long(l)) => Ok(Value::Long(l.wrapping_neg())),
                ("-", Value::Real(r)) => Ok(Value::Real(-r)),
                ("+", v @ (Value::Int(_) | Value::Long(_) | Value::Real(_))) => Ok(v),
                ("~", Value::Int(i)) => Ok(Value::Int(!i)),
                ("~", Value::Long(l)) => Ok(Value::Long(!l)),
                ("!", Value::Bool(b)) => Ok(Value::Bool(!b)),
                _ => Err(Fault::Type),
            }
        }
        Expr::Binary(op, a, b) if op == "&&" || op == "||" => {
            let Value::Bool(x) = eval(a, env, types)? else { return Err(Fault::Type) };
            if (op == "&&" && !x) || (op == "||" && x) {
                return Ok(Value::Bool(x));
            }
            match eval(b, env, types)? {
                Value::Bool(y) => Ok(Value::Bool(y)),
                _ => Err(Fault::Type),
            }
        }
        Expr::Binary(op, a, b) => {
            let x = eval(a, env, types)?;
            let y = eval(b, env, types)?;
            arith(op, &x, &y)
        }
        Expr::Cond(c, a, b) => match eval(c, env, types)? {
            Value::Bool(true) => eval(a, env, types),
            Value::Bool(false) => eval(b, env, types),
            _ => Err(Fault::Type),
        },
        Expr::Assign(op, var, rhs) => {
            let v = eval(rhs, env, types)?;
            let v = if op == "=" { v } else { arith(&op[..op.len() - 1], &env[*var], &v)? };
            convert(v, types[*var])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(name: &str) -> Option<usize> {
        ["a", "b", "x"].iter().position(|v| *v == name)
    }

    const TYPES: [Ty; 3] = [Ty::Int, Ty::Long, Ty::Double];

    fn run(src: &str, env: &[Value]) -> Result<Value, Fault> {
        eval(&parse(src, &vars).unwrap(), env, &TYPES)
    }

    #[test]
    fn wraps_and_promotes() {
        let env = [Value::Int(i32::MAX), Value::Long(1), Value::Real(decimal_rational("0.5"))];
        assert_eq!(run("a + 1", &env), Ok(Value::Int(i32::MIN)));
        assert_eq!(run("a + b", &env), Ok(Value::Long(i64::from(i32::MAX) + 1)));
        assert_eq!(run("x * 2", &env), Ok(Value::Real(BigRational::from_integer(1.into()))));
        assert_eq!(run("a / 0", &env), Err(Fault::DivideByZero));
        assert_eq!(run("1 + 2 * 3 - 4 % 3", &env), Ok(Value::Int(6)));
        assert_eq!(run("b < 2 && 2.5 >= x", &env), Ok(Value::Bool(true)));
    }

    #[test]
    fn erasing_parens() {
        let e = parse("(a + b) * x", &vars).unwrap();
        assert_eq!(sexpr(&e, true), "(* (+ v0 v1) v2)");
        let f = parse("((a + b)) * (x)", &vars).unwrap();
        assert_eq!(sexpr(&f, true), sexpr(&e, true));
        assert_ne!(sexpr(&f, false), sexpr(&e, false));
    }
}
