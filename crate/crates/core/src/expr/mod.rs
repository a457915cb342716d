//! Expressions for derived facets.
//!
//! Concrete syntax:
//!
//! ```text
//! {Pets allowed} ++ ", " ++ {Smoking allowed}
//! if({Rating} >= 8.5, "top", "other")
//! round({Price} / 1.24)
//! ```
//!
//! Facet references are written in braces, string literals are
//! double-quoted with backslash escapes, `++` concatenates. Precedence from
//! tightest: unary `-`, `* /`, `+ -`, `++`, comparisons. `if(c, a, b)`,
//! `upper`, `lower`, `trim`, `substr(s, start, len)` and `round` are
//! function forms.

mod eval;
mod parser;

use std::fmt;

pub use eval::{derive_facet, evaluate, DeriveError, EvalError, Value};
pub use parser::{parse_expression, SyntaxError};

use crate::model::canonical_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Upper,
    Lower,
    Trim,
    Substr,
    Round,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Upper => "upper",
            Func::Lower => "lower",
            Func::Trim => "trim",
            Func::Substr => "substr",
            Func::Round => "round",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Substr => 3,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "upper" => Func::Upper,
            "lower" => Func::Lower,
            "trim" => Func::Trim,
            "substr" => Func::Substr,
            "round" => Func::Round,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str(String),
    Num(f64),
    Bool(bool),
    FacetRef(String),
    Neg(Box<Expr>),
    Concat(Box<Expr>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Facet names referenced anywhere in the expression, in first-use order.
    pub fn facet_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::FacetRef(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Str(_) | Expr::Num(_) | Expr::Bool(_) => {}
            Expr::Neg(e) => e.collect_refs(out),
            Expr::Concat(a, b) | Expr::Arith(_, a, b) | Expr::Compare(_, a, b) => {
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::If(c, a, b) => {
                c.collect_refs(out);
                a.collect_refs(out);
                b.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Compare(..) => 1,
            Expr::Concat(..) => 2,
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 3,
            Expr::Arith(ArithOp::Mul | ArithOp::Div, ..) => 4,
            Expr::Neg(_) => 5,
            _ => 6,
        }
    }
}

fn write_string_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_binary(f: &mut fmt::Formatter<'_>, parent: &Expr, op: &str, a: &Expr, b: &Expr) -> fmt::Result {
    let p = parent.precedence();
    write_operand(f, a, p)?;
    write!(f, " {op} ")?;
    write_operand(f, b, p + 1)
}

/// Prints the canonical concrete syntax; parsing the output yields the same
/// tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Str(s) => write_string_literal(f, s),
            Expr::Num(n) => f.write_str(&canonical_number(*n)),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::FacetRef(name) => write!(f, "{{{name}}}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, 5)
            }
            Expr::Concat(a, b) => write_binary(f, self, "++", a, b),
            Expr::Arith(op, a, b) => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                write_binary(f, self, sym, a, b)
            }
            Expr::Compare(op, a, b) => {
                let sym = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write_binary(f, self, sym, a, b)
            }
            Expr::If(c, a, b) => write!(f, "if({c}, {a}, {b})"),
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
