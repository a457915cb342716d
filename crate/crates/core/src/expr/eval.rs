use thiserror::Error;

use super::{parse_expression, ArithOp, CmpOp, Expr, Func, SyntaxError};
use crate::model::{canonical_number, parse_float, Cell, Dataset, Facet, FacetType};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Str(_) => "string",
            Value::Num(_) => "number",
            Value::Bool(_) => "boolean",
        }
    }

    pub fn render(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            Value::Num(n) => canonical_number(*n),
            Value::Bool(b) => b.to_string(),
        }
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Str(s) => parse_float(s),
            Value::Bool(_) => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unknown facet {0:?}")]
    UnknownFacetRef(String),
    #[error("operator {op} cannot take a {got}")]
    TypeMismatch { op: String, got: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("bad argument to {func}: {detail}")]
    BadArgument { func: String, detail: String },
}

fn mismatch(op: &str, v: &Value) -> EvalError {
    EvalError::TypeMismatch { op: op.to_string(), got: v.type_name().to_string() }
}

fn facet_value(facet: &Facet, text: &str) -> Value {
    match facet.ftype {
        t if t.is_numeric() => text.parse::<f64>().map(Value::Num).unwrap_or_else(|_| Value::Str(text.to_string())),
        FacetType::Boolean => Value::Bool(text == "true"),
        _ => Value::Str(text.to_string()),
    }
}

struct Env<'a> {
    dataset: &'a Dataset,
    row: usize,
}

impl Env<'_> {
    fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Num(n) => Value::Num(*n),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::FacetRef(name) => {
                let idx = self.dataset.facet_index(name).ok_or_else(|| EvalError::UnknownFacetRef(name.clone()))?;
                // missing cells are filtered out before evaluation starts
                facet_value(&self.dataset.facets[idx], self.dataset.rows[self.row][idx].text())
            }
            Expr::Neg(inner) => {
                let v = self.eval(inner)?;
                Value::Num(-v.as_num().ok_or_else(|| mismatch("-", &v))?)
            }
            Expr::Concat(a, b) => Value::Str(self.eval(a)?.render() + &self.eval(b)?.render()),
            Expr::Arith(op, a, b) => {
                let (sym, f): (&str, fn(f64, f64) -> f64) = match op {
                    ArithOp::Add => ("+", |x, y| x + y),
                    ArithOp::Sub => ("-", |x, y| x - y),
                    ArithOp::Mul => ("*", |x, y| x * y),
                    ArithOp::Div => ("/", |x, y| x / y),
                };
                let (va, vb) = (self.eval(a)?, self.eval(b)?);
                let x = va.as_num().ok_or_else(|| mismatch(sym, &va))?;
                let y = vb.as_num().ok_or_else(|| mismatch(sym, &vb))?;
                if *op == ArithOp::Div && y == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                let r = f(x, y);
                if !r.is_finite() {
                    return Err(EvalError::TypeMismatch { op: sym.into(), got: "non-finite result".into() });
                }
                Value::Num(r)
            }
            Expr::Compare(op, a, b) => Value::Bool(compare(*op, &self.eval(a)?, &self.eval(b)?)?),
            Expr::If(c, a, b) => match self.eval(c)? {
                Value::Bool(true) => self.eval(a)?,
                Value::Bool(false) => self.eval(b)?,
                other => return Err(mismatch("if", &other)),
            },
            Expr::Call(func, args) => {
                let vals = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
                call(*func, &vals)?
            }
        })
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    use std::cmp::Ordering;
    let ord: Option<Ordering> = match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => match op {
            CmpOp::Eq => return Ok(x == y),
            CmpOp::Ne => return Ok(x != y),
            _ => return Err(mismatch("ordering comparison", a)),
        },
        _ => match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => x.partial_cmp(&y),
            _ => match (a, b) {
                (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
                _ if matches!(op, CmpOp::Eq | CmpOp::Ne) => Some(a.render().cmp(&b.render())),
                (Value::Bool(_), _) => return Err(mismatch("ordering comparison", a)),
                _ => return Err(mismatch("ordering comparison", b)),
            },
        },
    };
    let ord = ord.ok_or_else(|| mismatch("comparison", a))?;
    Ok(match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    })
}

fn index_arg(func: Func, v: &Value) -> Result<usize, EvalError> {
    match v.as_num() {
        Some(n) if n >= 0.0 && n.fract() == 0.0 && n <= usize::MAX as f64 => Ok(n as usize),
        _ => Err(EvalError::BadArgument {
            func: func.name().into(),
            detail: format!("expected a non-negative integer, got {:?}", v.render()),
        }),
    }
}

fn call(func: Func, args: &[Value]) -> Result<Value, EvalError> {
    Ok(match func {
        Func::Upper => Value::Str(args[0].render().to_uppercase()),
        Func::Lower => Value::Str(args[0].render().to_lowercase()),
        Func::Trim => Value::Str(args[0].render().trim().to_string()),
        Func::Substr => {
            let s = args[0].render();
            let start = index_arg(func, &args[1])?;
            let len = index_arg(func, &args[2])?;
            Value::Str(s.chars().skip(start).take(len).collect())
        }
        Func::Round => {
            let n = args[0].as_num().ok_or_else(|| mismatch("round", &args[0]))?;
            Value::Num(n.round())
        }
    })
}

/// Evaluates `e` on one row. Any referenced missing cell makes the result
/// missing; an empty result is also missing.
pub fn evaluate(e: &Expr, row: usize, d: &Dataset) -> Result<Cell, EvalError> {
    for name in e.facet_refs() {
        let idx = d.facet_index(name).ok_or_else(|| EvalError::UnknownFacetRef(name.to_string()))?;
        if d.rows[row][idx].is_missing() {
            return Ok(Cell::Missing);
        }
    }
    let v = Env { dataset: d, row }.eval(e)?;
    Ok(Cell::from_text(v.render()))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeriveError {
    #[error("facet {0:?} already exists")]
    DuplicateFacetName(String),
    #[error("derived facet name is empty")]
    EmptyName,
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("row {row}: {source}")]
    Eval { row: usize, source: EvalError },
}

/// Appends a visible string facet computed from `expression` on every row.
pub fn derive_facet(d: &Dataset, new_name: &str, expression: &str) -> Result<Dataset, DeriveError> {
    if new_name.trim().is_empty() {
        return Err(DeriveError::EmptyName);
    }
    if d.facet_index(new_name).is_some() {
        return Err(DeriveError::DuplicateFacetName(new_name.to_string()));
    }
    let e = parse_expression(expression)?;
    if let Some(name) = e.facet_refs().into_iter().find(|n| d.facet_index(n).is_none()) {
        return Err(DeriveError::Eval { row: 0, source: EvalError::UnknownFacetRef(name.to_string()) });
    }
    let column = (0..d.rows.len())
        .map(|r| evaluate(&e, r, d).map_err(|source| DeriveError::Eval { row: r, source }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = d.clone();
    let mut facet = Facet::new(new_name, out.facets.len());
    facet.derivation = Some(expression.to_string());
    out.facets.push(facet);
    for (row, cell) in out.rows.iter_mut().zip(column) {
        row.push(cell);
    }
    Ok(out)
}
