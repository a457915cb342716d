use thiserror::Error;

use super::{ArithOp, CmpOp, Expr, Func};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at position {position}: expected {expected}")]
pub struct SyntaxError {
    /// Character offset into the source text.
    pub position: usize,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Facet(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Concat,
    Cmp(CmpOp),
    LParen,
    RParen,
    Comma,
    Eof,
}

fn err<T>(position: usize, expected: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError { position, expected: expected.into() })
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '{' => {
                let close = chars[i + 1..].iter().position(|&c| c == '}');
                let Some(len) = close else { return err(chars.len(), "'}' closing the facet reference") };
                let name: String = chars[i + 1..i + 1 + len].iter().collect();
                if name.trim().is_empty() || name.contains('{') {
                    return err(start + 1, "facet name");
                }
                i += len + 2;
                Tok::Facet(name)
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return err(chars.len(), "closing '\"'"),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let escaped = match chars.get(i + 1) {
                                Some('"') => '"',
                                Some('\\') => '\\',
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                _ => return err(i + 1, "escape sequence (\\\" \\\\ \\n \\t \\r)"),
                            };
                            s.push(escaped);
                            i += 2;
                        }
                        Some(&c) => {
                            s.push(c);
                            i += 1;
                        }
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if chars.get(i) == Some(&'.') {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if matches!(chars.get(i), Some('e' | 'E')) {
                    let mut j = i + 1;
                    if matches!(chars.get(j), Some('+' | '-')) {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                match lit.parse::<f64>() {
                    Ok(v) if v.is_finite() => Tok::Num(v),
                    _ => return err(start, "number"),
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                Tok::Ident(chars[start..i].iter().collect())
            }
            _ => {
                let next = chars.get(i + 1).copied();
                let (tok, len) = match (c, next) {
                    ('+', Some('+')) => (Tok::Concat, 2),
                    ('+', _) => (Tok::Plus, 1),
                    ('-' | '−', _) => (Tok::Minus, 1),
                    ('*' | '×', _) => (Tok::Star, 1),
                    ('/' | '÷', _) => (Tok::Slash, 1),
                    ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), 2),
                    ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
                    ('!', Some('=')) => (Tok::Cmp(CmpOp::Ne), 2),
                    ('≠', _) => (Tok::Cmp(CmpOp::Ne), 1),
                    ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
                    ('<', Some('>')) => (Tok::Cmp(CmpOp::Ne), 2),
                    ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
                    ('≤', _) => (Tok::Cmp(CmpOp::Le), 1),
                    ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
                    ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
                    ('≥', _) => (Tok::Cmp(CmpOp::Ge), 1),
                    ('(', _) => (Tok::LParen, 1),
                    (')', _) => (Tok::RParen, 1),
                    (',', _) => (Tok::Comma, 1),
                    _ => return err(start, "operator, literal or facet reference"),
                };
                i += len;
                tok
            }
        };
        out.push((start, tok));
    }
    out.push((chars.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            err(self.offset(), what)
        }
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.concat()?;
        while let Tok::Cmp(op) = *self.peek() {
            self.bump();
            let rhs = self.concat()?;
            lhs = Expr::Compare(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn concat(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.additive()?;
        while *self.peek() == Tok::Concat {
            self.bump();
            let rhs = self.additive()?;
            lhs = Expr::Concat(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if *self.peek() == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.comparison()?);
            match self.bump() {
                Tok::Comma => continue,
                Tok::RParen => return Ok(args),
                _ => return err(self.toks[self.pos.saturating_sub(1)].0, "',' or ')'"),
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Facet(name) => Ok(Expr::FacetRef(name)),
            Tok::LParen => {
                let e = self.comparison()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "true" => Ok(Expr::Bool(true)),
            Tok::Ident(name) if name == "false" => Ok(Expr::Bool(false)),
            Tok::Ident(name) if name.eq_ignore_ascii_case("if") => {
                let mut args = self.args()?;
                if args.len() != 3 {
                    return err(at, "if with 3 arguments");
                }
                let else_ = args.pop().expect("3 args");
                let then = args.pop().expect("3 args");
                let cond = args.pop().expect("3 args");
                Ok(Expr::If(Box::new(cond), Box::new(then), Box::new(else_)))
            }
            Tok::Ident(name) => {
                let Some(func) = Func::from_name(&name) else {
                    return err(at, "function name (if, upper, lower, trim, substr, round) or true/false");
                };
                let args = self.args()?;
                if args.len() != func.arity() {
                    return err(at, format!("{} with {} argument(s)", func.name(), func.arity()));
                }
                Ok(Expr::Call(func, args))
            }
            _ => err(at, "literal, facet reference, function call or '('"),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let e = p.comparison()?;
    if *p.peek() != Tok::Eof {
        return err(p.offset(), "end of expression");
    }
    Ok(e)
}
