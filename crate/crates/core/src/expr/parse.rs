use std::fmt;

use super::{velocity_symbol, Expr, Func};

/// Syntax error with a 1-based source position and the tokens that would
/// have been accepted there.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at line {}, column {}: found {}",
            self.line, self.column, self.found
        )?;
        if !self.expected.is_empty() {
            write!(f, ", expected one of: {}", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Equals,
    Eof,
}

impl TokenKind {
    pub(crate) fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Plus => "'+'".into(),
            TokenKind::Minus => "'-'".into(),
            TokenKind::Star => "'*'".into(),
            TokenKind::Slash => "'/'".into(),
            TokenKind::Caret => "'^'".into(),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
            TokenKind::LBrace => "'{'".into(),
            TokenKind::RBrace => "'}'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Semi => "';'".into(),
            TokenKind::Equals => "'='".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

pub(crate) struct Lexer;

impl Lexer {
    /// Splits `text` into tokens; `#` starts a comment running to end of line.
    pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
        while i < chars.len() {
            let c = chars[i];
            let start_col = col;
            let single = |kind| Token { kind, line, column: start_col };
            match c {
                '\n' => {
                    i += 1;
                    line += 1;
                    col = 1;
                    continue;
                }
                c if c.is_whitespace() => {}
                '#' => {
                    while i < chars.len() && chars[i] != '\n' {
                        i += 1;
                    }
                    continue;
                }
                '+' => out.push(single(TokenKind::Plus)),
                '-' => out.push(single(TokenKind::Minus)),
                '*' => out.push(single(TokenKind::Star)),
                '/' => out.push(single(TokenKind::Slash)),
                '^' => out.push(single(TokenKind::Caret)),
                '(' => out.push(single(TokenKind::LParen)),
                ')' => out.push(single(TokenKind::RParen)),
                '{' => out.push(single(TokenKind::LBrace)),
                '}' => out.push(single(TokenKind::RBrace)),
                ',' => out.push(single(TokenKind::Comma)),
                ';' => out.push(single(TokenKind::Semi)),
                '=' => out.push(single(TokenKind::Equals)),
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut j = i + 1;
                        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                            j += 1;
                        }
                        if j < chars.len() && chars[j].is_ascii_digit() {
                            while j < chars.len() && chars[j].is_ascii_digit() {
                                j += 1;
                            }
                            i = j;
                        }
                    }
                    let lexeme: String = chars[start..i].iter().collect();
                    let value = lexeme.parse::<f64>().map_err(|_| ParseError {
                        line,
                        column: start_col,
                        found: format!("malformed number '{lexeme}'"),
                        expected: vec!["number".into()],
                    })?;
                    out.push(Token { kind: TokenKind::Number(value), line, column: start_col });
                    col += i - start;
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let ident: String = chars[start..i].iter().collect();
                    out.push(Token { kind: TokenKind::Ident(ident), line, column: start_col });
                    col += i - start;
                    continue;
                }
                other => {
                    return Err(ParseError {
                        line,
                        column: start_col,
                        found: format!("unexpected character '{other}'"),
                        expected: Vec::new(),
                    })
                }
            }
            i += 1;
            col += 1;
        }
        out.push(Token { kind: TokenKind::Eof, line, column: col });
        Ok(out)
    }
}

/// Cursor over a token vector shared by the expression and model parsers.
pub(crate) struct TokenStream {
    tokens: Vec<Token>,
    pos: usize,
}

const OPERAND_START: [&str; 4] = ["number", "identifier", "'('", "'-'"];

impl TokenStream {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        TokenStream { tokens, pos: 0 }
    }

    pub(crate) fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub(crate) fn peek_kind(&self) -> &TokenKind {
        &self.peek().kind
    }

    pub(crate) fn peek2_kind(&self) -> &TokenKind {
        let k = (self.pos + 1).min(self.tokens.len() - 1);
        &self.tokens[k].kind
    }

    pub(crate) fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    pub(crate) fn error(&self, expected: &[&str]) -> ParseError {
        let tok = self.peek();
        ParseError {
            line: tok.line,
            column: tok.column,
            found: tok.kind.describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub(crate) fn expect(&mut self, kind: TokenKind, name: &str) -> Result<Token, ParseError> {
        if *self.peek_kind() == kind {
            Ok(self.advance())
        } else {
            Err(self.error(&[name]))
        }
    }

    pub(crate) fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek_kind().clone() {
            TokenKind::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    /// expr := term (('+' | '-') term)*
    pub(crate) fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.parse_term()?];
        loop {
            match self.peek_kind() {
                TokenKind::Plus => {
                    self.advance();
                    terms.push(self.parse_term()?);
                }
                TokenKind::Minus => {
                    self.advance();
                    terms.push(Expr::Neg(Box::new(self.parse_term()?)));
                }
                _ => break,
            }
        }
        Ok(collapse(terms, Expr::Sum))
    }

    /// term := unary (('*' | '/') unary)*
    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.parse_unary()?];
        loop {
            match self.peek_kind() {
                TokenKind::Star => {
                    self.advance();
                    factors.push(self.parse_unary()?);
                }
                TokenKind::Slash => {
                    self.advance();
                    let den = self.parse_unary()?;
                    let num = collapse(std::mem::take(&mut factors), Expr::Product);
                    factors.push(Expr::Quot(Box::new(num), Box::new(den)));
                }
                _ => break,
            }
        }
        Ok(collapse(factors, Expr::Product))
    }

    /// unary := '-' unary | power
    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek_kind() == TokenKind::Minus {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_power()
    }

    /// power := primary ('^' unary)?   (right-associative through unary)
    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_primary()?;
        if *self.peek_kind() == TokenKind::Caret {
            self.advance();
            let exponent = self.parse_unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_kind().clone() {
            TokenKind::Number(v) => {
                self.advance();
                Ok(Expr::Const(v))
            }
            TokenKind::LParen => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if *self.peek2_kind() != TokenKind::LParen {
                    self.advance();
                    return Ok(Expr::Sym(name));
                }
                if name == "d" {
                    self.advance();
                    self.advance();
                    let coord = self.expect_ident()?;
                    self.expect(TokenKind::RParen, "')'")?;
                    return Ok(Expr::Sym(velocity_symbol(&coord)));
                }
                let Some(func) = Func::from_name(&name) else {
                    let mut expected: Vec<&str> = Func::ALL.iter().map(|f| f.name()).collect();
                    expected.push("d");
                    let mut err = self.error(&expected);
                    err.found = format!("unknown function '{name}'");
                    return Err(err);
                };
                self.advance();
                self.advance();
                let arg = self.parse_expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error(&OPERAND_START)),
        }
    }
}

fn collapse(mut items: Vec<Expr>, build: fn(Vec<Expr>) -> Expr) -> Expr {
    if items.len() == 1 {
        items.pop().unwrap()
    } else {
        build(items)
    }
}

/// Parses a complete arithmetic expression.
///
/// Precedence from tightest: `^` (right-associative), unary `-`, `*` `/`,
/// `+` `-`. Velocities are written `d(x)`.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let mut ts = TokenStream::new(Lexer::tokenize(text)?);
    let e = ts.parse_expr()?;
    if *ts.peek_kind() != TokenKind::Eof {
        return Err(ts.error(&["operator", "end of input"]));
    }
    Ok(e)
}
