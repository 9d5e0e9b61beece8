use num_bigint::BigInt;

use crate::types::Decimal;

use super::diagnostics::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Int(BigInt),
    Real(Decimal),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(_) => "string literal".into(),
            Tok::Int(_) => "integer literal".into(),
            Tok::Real(_) => "real literal".into(),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

// longest first
const SYMBOLS: &[&str] = &[
    ":=", "->", "<-", "><", "!=", "<=", ">=", "{", "}", "(", ")", "<", ">", ",", ";", ":", ".", "=", "+", "*",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.src[self.pos..].chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span { start: self.pos, end: self.pos, line: self.line, col: self.col }
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut c = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(ch) = c.peek() {
            if ch.is_whitespace() {
                c.bump();
            } else if ch == '/' && c.peek2() == Some('/') {
                while c.peek().is_some_and(|x| x != '\n') {
                    c.bump();
                }
            } else {
                break;
            }
        }
        let start = c.here();
        let Some(ch) = c.peek() else {
            out.push(Token { tok: Tok::Eof, span: start });
            return Ok(out);
        };
        let tok = if ch.is_alphabetic() || ch == '_' {
            while c.peek().is_some_and(|x| x.is_alphanumeric() || x == '_') {
                c.bump();
            }
            Tok::Ident(src[start.start..c.pos].to_string())
        } else if ch.is_ascii_digit() || (ch == '-' && c.peek2().is_some_and(|x| x.is_ascii_digit())) {
            number(&mut c, start)?
        } else if ch == '"' {
            string(&mut c, start)?
        } else {
            let rest = &src[c.pos..];
            let sym = SYMBOLS.iter().copied().find(|s| {
                rest.starts_with(s)
                    // `x<-1` compares with a negative literal
                    && !(*s == "<-" && rest[2..].starts_with(|d: char| d.is_ascii_digit()))
            });
            match sym {
                Some(s) => {
                    for _ in s.chars() {
                        c.bump();
                    }
                    Tok::Sym(s)
                }
                None => {
                    c.bump();
                    let span = Span { end: c.pos, ..start };
                    return Err(Diagnostic::error(span, "lexical", format!("unexpected character `{ch}`")));
                }
            }
        };
        out.push(Token { tok, span: Span { end: c.pos, ..start } });
    }
}

fn number(c: &mut Cursor<'_>, start: Span) -> Result<Tok, Diagnostic> {
    if c.peek() == Some('-') {
        c.bump();
    }
    while c.peek().is_some_and(|x| x.is_ascii_digit()) {
        c.bump();
    }
    let is_real = c.peek() == Some('.') && c.peek2().is_some_and(|x| x.is_ascii_digit());
    if is_real {
        c.bump();
        while c.peek().is_some_and(|x| x.is_ascii_digit()) {
            c.bump();
        }
    }
    let text = &c.src[start.start..c.pos];
    let span = Span { end: c.pos, ..start };
    if is_real {
        Decimal::parse(text)
            .map(Tok::Real)
            .ok_or_else(|| Diagnostic::error(span, "lexical", format!("malformed real literal `{text}`")))
    } else {
        text.parse::<BigInt>()
            .map(Tok::Int)
            .map_err(|_| Diagnostic::error(span, "lexical", format!("malformed integer literal `{text}`")))
    }
}

fn string(c: &mut Cursor<'_>, start: Span) -> Result<Tok, Diagnostic> {
    c.bump();
    let mut s = String::new();
    loop {
        let Some(ch) = c.bump() else {
            let span = Span { end: c.pos, ..start };
            return Err(Diagnostic::error(span, "lexical", "unterminated string literal"));
        };
        match ch {
            '"' => return Ok(Tok::Str(s)),
            '\\' => {
                let esc_start = c.pos - 1;
                match c.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    other => {
                        let span = Span { start: esc_start, end: c.pos, line: c.line, col: c.col.saturating_sub(2).max(1) };
                        let what = other.map_or("end of input".to_string(), |o| format!("`\\{o}`"));
                        return Err(Diagnostic::error(span, "lexical", format!("unknown escape {what}")));
                    }
                }
            }
            ch => s.push(ch),
        }
    }
}
