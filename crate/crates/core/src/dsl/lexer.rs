use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TokenKind {
    At,
    Ident,
    StringLit,
    IntLit,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Equals,
    KwFun,
    KwVal,
    KwObject,
    KwReturn,
    Dot,
    BodyText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    /// Token text. For string literals this is the unquoted value with
    /// `\"` and `\\` resolved; for everything else it is the source slice.
    pub text: String,
    pub line: u32,
    pub col: u32,
    /// Byte range of the token in the source, quotes included.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting on line {line}")]
    UnterminatedString { line: u32 },
    #[error("unterminated block comment starting on line {line}")]
    UnterminatedComment { line: u32 },
    #[error("unbalanced brace on line {line}")]
    UnbalancedBrace { line: u32 },
    #[error("invalid character {ch:?} at {line}:{col}")]
    InvalidCharacter { line: u32, col: u32, ch: char },
}

pub(crate) fn keyword(ident: &str) -> Option<TokenKind> {
    match ident {
        "fun" => Some(TokenKind::KwFun),
        "val" => Some(TokenKind::KwVal),
        "object" => Some(TokenKind::KwObject),
        "return" => Some(TokenKind::KwReturn),
        _ => None,
    }
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match (self.peek(), self.peek_at(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => self.skip_line_comment(),
                (Some('/'), Some('*')) => self.skip_block_comment()?,
                _ => return Ok(()),
            }
        }
    }

    fn skip_line_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    fn skip_block_comment(&mut self) -> Result<(), LexError> {
        let line = self.line;
        self.bump();
        self.bump();
        loop {
            match self.bump() {
                None => return Err(LexError::UnterminatedComment { line }),
                Some('*') if self.peek() == Some('/') => {
                    self.bump();
                    return Ok(());
                }
                Some(_) => {}
            }
        }
    }

    /// Scans a top-level string literal and returns its resolved value.
    fn string_literal(&mut self) -> Result<String, LexError> {
        let line = self.line;
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(LexError::UnterminatedString { line }),
                Some('"') => return Ok(value),
                Some('\\') => match self.peek() {
                    Some(c @ ('"' | '\\')) => {
                        self.bump();
                        value.push(c);
                    }
                    _ => value.push('\\'),
                },
                Some(c) => value.push(c),
            }
        }
    }

    /// Skips a string or char literal inside a body without interpreting it.
    fn skip_quoted(&mut self, quote: char) -> Result<(), LexError> {
        let line = self.line;
        if quote == '"' && self.peek_at(1) == Some('"') && self.peek_at(2) == Some('"') {
            for _ in 0..3 {
                self.bump();
            }
            loop {
                match self.bump() {
                    None => return Err(LexError::UnterminatedString { line }),
                    Some('"') if self.peek() == Some('"') && self.peek_at(1) == Some('"') => {
                        self.bump();
                        self.bump();
                        return Ok(());
                    }
                    Some(_) => {}
                }
            }
        }
        self.bump();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(LexError::UnterminatedString { line }),
                Some('\\') => {
                    if self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                Some(c) if c == quote => return Ok(()),
                Some(_) => {}
            }
        }
    }

    /// Consumes a brace-balanced body starting at the current `{`.
    fn body(&mut self) -> Result<(), LexError> {
        let open_line = self.line;
        let mut depth = 0usize;
        loop {
            match (self.peek(), self.peek_at(1)) {
                (None, _) => return Err(LexError::UnbalancedBrace { line: open_line }),
                (Some('{'), _) => {
                    depth += 1;
                    self.bump();
                }
                (Some('}'), _) => {
                    depth -= 1;
                    self.bump();
                    if depth == 0 {
                        return Ok(());
                    }
                }
                (Some(q @ ('"' | '\'')), _) => self.skip_quoted(q)?,
                (Some('/'), Some('/')) => self.skip_line_comment(),
                (Some('/'), Some('*')) => self.skip_block_comment()?,
                (Some(_), _) => {
                    self.bump();
                }
            }
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        // Lines of `{` tokens that are not part of a declaration body.
        let mut open_braces: Vec<u32> = Vec::new();
        let mut expect_body = false;

        loop {
            self.skip_trivia()?;
            let Some(c) = self.peek() else { break };
            let (start, line, col) = (self.offset(), self.line, self.col);

            let kind = match c {
                '@' => self.single(TokenKind::At),
                '(' => self.single(TokenKind::LParen),
                ')' => self.single(TokenKind::RParen),
                ',' => self.single(TokenKind::Comma),
                ':' => self.single(TokenKind::Colon),
                '=' => self.single(TokenKind::Equals),
                '.' => self.single(TokenKind::Dot),
                '"' => {
                    let value = self.string_literal()?;
                    tokens.push(Token {
                        kind: TokenKind::StringLit,
                        text: value,
                        line,
                        col,
                        span: start..self.offset(),
                    });
                    continue;
                }
                '{' if expect_body => {
                    self.body()?;
                    expect_body = false;
                    TokenKind::BodyText
                }
                '{' => {
                    open_braces.push(line);
                    self.single(TokenKind::LBrace)
                }
                '}' => {
                    if open_braces.pop().is_none() {
                        return Err(LexError::UnbalancedBrace { line });
                    }
                    self.single(TokenKind::RBrace)
                }
                c if c.is_ascii_digit() => {
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.bump();
                    }
                    TokenKind::IntLit
                }
                c if is_ident_start(c) => {
                    while self.peek().is_some_and(is_ident_continue) {
                        self.bump();
                    }
                    let kind = keyword(&self.src[start..self.offset()]).unwrap_or(TokenKind::Ident);
                    match kind {
                        TokenKind::KwFun | TokenKind::KwObject => expect_body = true,
                        TokenKind::KwVal => expect_body = false,
                        _ => {}
                    }
                    kind
                }
                ch => return Err(LexError::InvalidCharacter { line, col, ch }),
            };
            let end = self.offset();
            tokens.push(Token {
                kind,
                text: self.src[start..end].to_string(),
                line,
                col,
                span: start..end,
            });
        }

        if let Some(&line) = open_braces.last() {
            return Err(LexError::UnbalancedBrace { line });
        }
        Ok(tokens)
    }

    fn single(&mut self, kind: TokenKind) -> TokenKind {
        self.bump();
        kind
    }
}

/// Splits declaration-language source into tokens.
///
/// Whitespace and comments are skipped. The brace-delimited body that follows
/// a `fun` signature or an `object` header is returned whole as a single
/// [`TokenKind::BodyText`] token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source).run()
}
