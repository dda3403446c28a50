//! Tokenizer shared by every textual format in the crate: `.aadl` models,
//! Error_Model annex bodies, `.errlib` libraries, guard expressions and
//! measure predicates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Position of a declaration or diagnostic in its source text.
///
/// Spans never participate in equality: two declarations that differ only
/// in where they were written compare equal.
#[derive(Debug, Clone, Eq)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, column: u32) -> Self {
        SourceSpan { file, line, column }
    }

    /// Span for items built programmatically rather than parsed.
    pub fn generated() -> Self {
        SourceSpan { file: Arc::from("<generated>"), line: 0, column: 0 }
    }
}

impl PartialEq for SourceSpan {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    /// Verbatim content between `{**` and `**}`.
    AnnexBody(String),
    Colon,
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    /// `->`
    Arrow,
    /// `-[`
    TransOpen,
    /// `=>`
    FatArrow,
    Pipe,
    Eq,
    EqEq,
    NotEq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "number {n}"),
            Tok::AnnexBody(_) => f.write_str("annex body"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::TransOpen => f.write_str("`-[`"),
            Tok::FatArrow => f.write_str("`=>`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::NotEq => f.write_str("`!=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

/// Where a text fragment starts inside its enclosing file, so that spans in
/// annex bodies point at the right line of the `.aadl` file.
#[derive(Debug, Clone)]
pub struct Origin {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl Origin {
    pub fn file(name: &str) -> Self {
        Origin { file: Arc::from(name), line: 1, column: 1 }
    }
}

pub fn tokenize(text: &str, origin: &Origin) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = origin.line;
    let mut col = origin.column;
    let span = |line: u32, col: u32| SourceSpan::new(origin.file.clone(), line, col);

    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let peek = chars.get(i + 1).copied();
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        // `--` comment to end of line
        if c == '-' && peek == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '{' && peek == Some('*') && chars.get(i + 2) == Some(&'*') {
            i += 3;
            col += 3;
            let body_start = i;
            loop {
                if i >= chars.len() {
                    return Err(Error::syntax(span(start_line, start_col), "unterminated annex: missing `**}`"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'*') && chars.get(i + 2) == Some(&'}') {
                    break;
                }
                if chars[i] == '{' && chars.get(i + 1) == Some(&'*') && chars.get(i + 2) == Some(&'*') {
                    return Err(Error::syntax(span(line, col), "nested `{**` inside annex"));
                }
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            let body: String = chars[body_start..i].iter().collect();
            i += 3;
            col += 3;
            out.push(Token { tok: Tok::AnnexBody(body), span: span(start_line, start_col) });
            continue;
        }
        if c == '*' && peek == Some('*') && chars.get(i + 2) == Some(&'}') {
            return Err(Error::syntax(span(line, col), "`**}` without matching `{**`"));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span: span(start_line, start_col) });
            continue;
        }
        let negative_number = c == '-' && peek.is_some_and(|p| p.is_ascii_digit());
        if c.is_ascii_digit() || negative_number {
            let start = i;
            if negative_number {
                i += 1;
            }
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let value: f64 = lexeme
                .parse()
                .map_err(|_| Error::syntax(span(start_line, start_col), format!("malformed number `{lexeme}`")))?;
            out.push(Token { tok: Tok::Number(value), span: span(start_line, start_col) });
            continue;
        }
        let (tok, width) = match (c, peek) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('-', Some('[')) => (Tok::TransOpen, 2),
            ('=', Some('>')) => (Tok::FatArrow, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::NotEq, 2),
            ('=', _) => (Tok::Eq, 1),
            (':', _) => (Tok::Colon, 1),
            (';', _) => (Tok::Semi, 1),
            (',', _) => (Tok::Comma, 1),
            ('.', _) => (Tok::Dot, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('|', _) => (Tok::Pipe, 1),
            _ => return Err(Error::syntax(span(start_line, start_col), format!("unexpected character `{c}`"))),
        };
        i += width;
        col += width as u32;
        out.push(Token { tok, span: span(start_line, start_col) });
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col) });
    Ok(out)
}

/// Cursor over a token vector with the small set of helpers every parser in
/// the crate needs.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    pub fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::syntax(self.span(), msg))
    }

    pub fn unexpected<T>(&self, wanted: &str) -> Result<T> {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<SourceSpan> {
        if self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn is_keyword_at(&self, ahead: usize, kw: &str) -> bool {
        matches!(self.peek_at(ahead), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<SourceSpan> {
        if self.is_keyword(kw) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    pub fn ident(&mut self) -> Result<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => self.unexpected("identifier"),
        }
    }

    pub fn number(&mut self) -> Result<f64> {
        match *self.peek() {
            Tok::Number(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.unexpected("number"),
        }
    }

    /// `a.b.c` as a single dotted string.
    pub fn dotted(&mut self) -> Result<(String, SourceSpan)> {
        let (mut name, span) = self.ident()?;
        while matches!(self.peek(), Tok::Dot) && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let (part, _) = self.ident()?;
            name.push('.');
            name.push_str(&part);
        }
        Ok((name, span))
    }
}
