use super::{call, BinOp, Expr, Func, Scope, Var};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    BadNumber(String),
    UnknownIdentifier(String),
    /// An identifier that exists but is not allowed here, e.g. `lambda` in `g`.
    ForbiddenIdentifier(String),
    Arity { func: &'static str, expected: usize, found: usize },
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} at offset {offset}", describe(kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnexpectedChar(c) => format!("unexpected character {c:?}"),
        ParseErrorKind::UnexpectedToken(t) => format!("unexpected `{t}`"),
        ParseErrorKind::UnexpectedEnd => "unexpected end of input".into(),
        ParseErrorKind::BadNumber(s) => format!("malformed number `{s}`"),
        ParseErrorKind::UnknownIdentifier(s) => format!("unknown identifier `{s}`"),
        ParseErrorKind::ForbiddenIdentifier(s) => format!("`{s}` is not allowed here"),
        ParseErrorKind::Arity { func, expected, found } => {
            format!("{func} takes {expected} argument(s), found {found}")
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
    Comma,
    End,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
            Tok::End => "<end>".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'0'..=b'9' | b'.' => {
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
                let value: f64 = text.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                    offset: start,
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError { kind: ParseErrorKind::UnexpectedChar(ch), offset: start });
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'s> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    scope: &'s Scope,
}

pub(super) fn parse(src: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, scope };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        other => Err(p.unexpected(other.clone())),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, tok: Tok) -> ParseError {
        let kind = match tok {
            Tok::End => ParseErrorKind::UnexpectedEnd,
            other => ParseErrorKind::UnexpectedToken(other.text()),
        };
        ParseError { kind, offset: self.offset() }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(self.peek().clone()))
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, lhs.into(), rhs.into());
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, lhs.into(), rhs.into());
        }
    }

    // factor := '-' factor | atom ('^' factor)?
    // Unary minus binds looser than '^', so -x^2 reads as -(x^2).
    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(self.factor()?.into()));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, base.into(), exponent.into()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.call(name, offset)
                } else {
                    self.identifier(name, offset)
                }
            }
            other => {
                Err(ParseError {
                    kind: match other {
                        Tok::End => ParseErrorKind::UnexpectedEnd,
                        t => ParseErrorKind::UnexpectedToken(t.text()),
                    },
                    offset,
                })
            }
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let func = Func::from_name(&name).ok_or(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name.clone()),
            offset,
        })?;
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != func.arity() {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    func: func.name(),
                    expected: func.arity(),
                    found: args.len(),
                },
                offset,
            });
        }
        Ok(call(func, args))
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let forbidden = |name: &str| ParseError {
            kind: ParseErrorKind::ForbiddenIdentifier(name.to_string()),
            offset,
        };
        match name.as_str() {
            "t" => {
                return if self.scope.allow_t { Ok(Expr::Var(Var::T)) } else { Err(forbidden("t")) }
            }
            "lambda" => {
                return if self.scope.allow_lambda {
                    Ok(Expr::Var(Var::Lambda))
                } else {
                    Err(forbidden("lambda"))
                }
            }
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            _ => {}
        }
        if let Some(index) = state_index(&name) {
            if index >= 1 && index <= self.scope.dim {
                return Ok(Expr::Var(Var::X(index - 1)));
            }
        }
        if let Some(func) = Func::from_name(&name) {
            // a function name used without an argument list
            return Err(ParseError {
                kind: ParseErrorKind::Arity { func: func.name(), expected: func.arity(), found: 0 },
                offset,
            });
        }
        if let Some(e) = self.scope.params.get(&name) {
            return Ok(e.clone());
        }
        Err(ParseError { kind: ParseErrorKind::UnknownIdentifier(name), offset })
    }
}

fn state_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0')
    {
        return None;
    }
    digits.parse().ok()
}
