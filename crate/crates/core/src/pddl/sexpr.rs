//! Minimal s-expression reader with `;` line comments and source positions.

use super::{PddlError, PddlErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Symbol { text: String, pos: Pos },
    List { items: Vec<SExpr>, pos: Pos },
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Symbol { .. } => None,
        }
    }

    /// Case-insensitive keyword comparison against a symbol.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.as_symbol().is_some_and(|s| s.eq_ignore_ascii_case(kw))
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
    /// Position offset applied to every reported location.
    base: Pos,
}

impl<'a> Reader<'a> {
    fn pos(&self) -> Pos {
        if self.line == 1 {
            Pos { line: self.base.line, col: self.base.col + self.col - 1 }
        } else {
            Pos { line: self.base.line + self.line - 1, col: self.col }
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Option<SExpr>, PddlError> {
        self.skip_trivia();
        let pos = self.pos();
        match self.chars.peek().copied() {
            None => Ok(None),
            Some(')') => Err(PddlError::at(pos, PddlErrorKind::Syntax("unexpected ')'".into()))),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => {
                            return Err(PddlError::at(
                                pos,
                                PddlErrorKind::Syntax("unclosed '('".into()),
                            ))
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(Some(SExpr::List { items, pos }));
                        }
                        Some(_) => {
                            if let Some(e) = self.read()? {
                                items.push(e);
                            }
                        }
                    }
                }
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(Some(SExpr::Symbol { text, pos }))
            }
        }
    }
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, PddlError> {
    read_all_at(text, Pos { line: 1, col: 1 })
}

/// Like [`read_all`], reporting positions relative to `base`.
pub fn read_all_at(text: &str, base: Pos) -> Result<Vec<SExpr>, PddlError> {
    let mut reader = Reader { chars: text.chars().peekable(), line: 1, col: 1, base };
    let mut out = Vec::new();
    while let Some(e) = reader.read()? {
        out.push(e);
    }
    Ok(out)
}
