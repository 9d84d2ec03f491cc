//! S-expression reader shared by the SyGuS front end, the solver protocol
//! and the language-model response extractor.

use std::fmt;

use thiserror::Error;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Symbol(String),
    Numeral(String),
    /// Digits after `#x`.
    Hex(String),
    /// Digits after `#b`.
    Binary(String),
    Decimal(String),
    Str(String),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExprKind {
    Atom(Atom),
    List(Vec<SExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SExpr {
    pub kind: SExprKind,
    pub pos: Pos,
}

impl SExpr {
    pub fn symbol(&self) -> Option<&str> {
        match &self.kind {
            SExprKind::Atom(Atom::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match &self.kind {
            SExprKind::List(items) => Some(items),
            _ => None,
        }
    }

    /// Head symbol of a non-empty list.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(SExpr::symbol)
    }

    pub fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.pos, message)
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SExprKind::Atom(a) => match a {
                Atom::Symbol(s) | Atom::Numeral(s) | Atom::Decimal(s) => f.write_str(s),
                Atom::Hex(s) => write!(f, "#x{s}"),
                Atom::Binary(s) => write!(f, "#b{s}"),
                Atom::Str(s) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
                Atom::Keyword(s) => write!(f, ":{s}"),
            },
            SExprKind::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn is_symbol_char(c: char) -> bool {
    c.is_alphanumeric() || "~!@$%^&*_-+=<>.?/'".contains(c)
}

/// Streaming reader over a source string.
pub struct Reader<'a> {
    src: &'a str,
    offset: usize,
    pos: Pos,
}

impl<'a> Reader<'a> {
    pub fn new(src: &'a str) -> Self {
        Reader {
            src,
            offset: 0,
            pos: Pos { line: 1, col: 1 },
        }
    }

    /// Byte offset of the next unread character.
    pub fn offset(&self) -> usize {
        self.offset
    }

    fn peek(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Reads the next expression, or `None` at end of input.
    pub fn next_expr(&mut self) -> Result<Option<SExpr>, ParseError> {
        self.skip_trivia();
        if self.peek().is_none() {
            return Ok(None);
        }
        self.read_expr().map(Some)
    }

    fn read_expr(&mut self) -> Result<SExpr, ParseError> {
        self.skip_trivia();
        let start = self.pos;
        let c = match self.peek() {
            Some(c) => c,
            None => return Err(ParseError::new(start, "unexpected end of input")),
        };
        match c {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => {
                            return Err(ParseError::new(
                                self.pos,
                                format!("unclosed list opened at {start}"),
                            ))
                        }
                        Some(')') => {
                            self.bump();
                            break;
                        }
                        Some(_) => items.push(self.read_expr()?),
                    }
                }
                Ok(SExpr {
                    kind: SExprKind::List(items),
                    pos: start,
                })
            }
            ')' => Err(ParseError::new(start, "unexpected ')'")),
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ParseError::new(self.pos, "unterminated string literal")),
                        Some('"') => {
                            if self.peek() == Some('"') {
                                self.bump();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
                Ok(self.atom(Atom::Str(s), start))
            }
            '|' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(ParseError::new(self.pos, "unterminated quoted symbol")),
                        Some('|') => break,
                        Some(c) => s.push(c),
                    }
                }
                Ok(self.atom(Atom::Symbol(s), start))
            }
            '#' => {
                self.bump();
                let radix = self.bump();
                let digits = self.take_while(|c| c.is_ascii_alphanumeric());
                match radix {
                    Some('x') if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_hexdigit()) => {
                        Ok(self.atom(Atom::Hex(digits), start))
                    }
                    Some('b') if !digits.is_empty() && digits.chars().all(|c| c == '0' || c == '1') => {
                        Ok(self.atom(Atom::Binary(digits), start))
                    }
                    _ => Err(ParseError::new(start, "malformed bit-vector literal")),
                }
            }
            ':' => {
                self.bump();
                let s = self.take_while(is_symbol_char);
                Ok(self.atom(Atom::Keyword(s), start))
            }
            c if c.is_ascii_digit() => {
                let s = self.take_while(|c| c.is_ascii_digit() || c == '.');
                if s.contains('.') {
                    Ok(self.atom(Atom::Decimal(s), start))
                } else {
                    Ok(self.atom(Atom::Numeral(s), start))
                }
            }
            c if is_symbol_char(c) => {
                let s = self.take_while(is_symbol_char);
                Ok(self.atom(Atom::Symbol(s), start))
            }
            other => Err(ParseError::new(start, format!("unexpected character {other:?}"))),
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if pred(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn atom(&self, atom: Atom, pos: Pos) -> SExpr {
        SExpr {
            kind: SExprKind::Atom(atom),
            pos,
        }
    }
}

/// Parses every top-level expression in `src`.
pub fn parse_all(src: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut reader = Reader::new(src);
    let mut out = Vec::new();
    while let Some(e) = reader.next_expr()? {
        out.push(e);
    }
    Ok(out)
}

/// Parses exactly one expression, ignoring trailing trivia.
pub fn parse_one(src: &str) -> Result<SExpr, ParseError> {
    let mut reader = Reader::new(src);
    let e = reader
        .next_expr()?
        .ok_or_else(|| ParseError::new(Pos { line: 1, col: 1 }, "empty input"))?;
    if let Some(extra) = reader.next_expr()? {
        return Err(extra.err("trailing input after expression"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let es = parse_all("(a (b #x0F) |q r|)\n; comment\n(c 12)").unwrap();
        assert_eq!(es.len(), 2);
        assert_eq!(es[0].to_string(), "(a (b #x0F) q r)");
        assert_eq!(es[1].pos, Pos { line: 3, col: 1 });
    }

    #[test]
    fn truncated_input_reports_position() {
        let err = parse_all("(constraint (>= ").unwrap_err();
        assert_eq!(err.pos.line, 1);
        assert_eq!(err.pos.col, 17);
        assert!(err.message.contains("unclosed"));
    }

    #[test]
    fn stray_close_paren() {
        let err = parse_all("a )").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 3 });
    }

    #[test]
    fn literals() {
        let e = parse_one("(#b101 #xff 3 :named \"s\"\"\")").unwrap();
        let items = e.list().unwrap();
        assert_eq!(items[0].kind, SExprKind::Atom(Atom::Binary("101".into())));
        assert_eq!(items[1].kind, SExprKind::Atom(Atom::Hex("ff".into())));
        assert_eq!(items[2].kind, SExprKind::Atom(Atom::Numeral("3".into())));
        assert_eq!(items[3].kind, SExprKind::Atom(Atom::Keyword("named".into())));
        assert_eq!(items[4].kind, SExprKind::Atom(Atom::Str("s\"".into())));
    }
}
