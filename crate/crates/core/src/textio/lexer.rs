use super::{ParseError, SourceLocation};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    PrefixDirective,
    IriRef(String),
    PName { prefix: String, local: String },
    Blank(String),
    LBracket,
    RBracket,
    Comma,
    Semicolon,
    Dot,
    Str(String),
    DoubleCaret,
    A,
    Integer(String),
    Decimal(String),
    Boolean(bool),
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub loc: SourceLocation,
    pub offset: usize,
}

pub(crate) struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

fn is_pn_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '%')
}

impl<'a> Lexer<'a> {
    pub fn new(text: &'a str) -> Self {
        Lexer {
            text,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        while let Some(tok) = self.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
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

    fn here(&self) -> SourceLocation {
        SourceLocation {
            line: self.line,
            column: self.col,
        }
    }

    fn error_at(&self, loc: SourceLocation, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError::new(self.text, loc, offset, message)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_trivia();
        let start = self.pos;
        let loc = self.here();
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let tok = match c {
            '[' => {
                self.bump();
                Tok::LBracket
            }
            ']' => {
                self.bump();
                Tok::RBracket
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            ';' => {
                self.bump();
                Tok::Semicolon
            }
            '.' if !self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
                self.bump();
                Tok::Dot
            }
            '^' => {
                self.bump();
                if self.peek() != Some('^') {
                    return Err(self.error_at(loc, start, "expected `^^`"));
                }
                self.bump();
                Tok::DoubleCaret
            }
            '<' => self.iri_ref(loc, start)?,
            '"' | '\'' => self.string(c, loc, start)?,
            '@' => {
                self.bump();
                let word = self.take_while(|c| c.is_ascii_alphabetic());
                match word.as_str() {
                    "prefix" => Tok::PrefixDirective,
                    "base" => {
                        return Err(self.error_at(loc, start, "@base directives are not supported"))
                    }
                    _ => return Err(self.error_at(loc, start, format!("unknown directive @{word}"))),
                }
            }
            '(' | ')' => {
                return Err(self.error_at(loc, start, "collections are not supported"));
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.bump();
                self.bump();
                let label = self.take_while(is_pn_char);
                let label = self.trim_trailing_dots(label);
                if label.is_empty() {
                    return Err(self.error_at(loc, start, "empty blank node label"));
                }
                Tok::Blank(label)
            }
            c if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' => self.number(loc, start)?,
            c if c.is_alphabetic() || c == ':' || c == '_' => self.name(loc, start)?,
            other => {
                self.bump();
                return Err(self.error_at(loc, start, format!("unexpected character `{other}`")));
            }
        };
        Ok(Some(Token {
            tok,
            loc,
            offset: start,
        }))
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    /// A trailing `.` belongs to the statement, not the name; give it back.
    fn trim_trailing_dots(&mut self, mut word: String) -> String {
        while word.ends_with('.') {
            word.pop();
            self.pos -= 1;
            self.col -= 1;
        }
        word
    }

    fn iri_ref(&mut self, loc: SourceLocation, start: usize) -> Result<Tok, ParseError> {
        self.bump();
        let mut iri = String::new();
        loop {
            match self.peek() {
                None | Some('\n') => {
                    return Err(self.error_at(loc, start, "unterminated IRI reference"));
                }
                Some('>') => {
                    self.bump();
                    break;
                }
                Some(c) if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '`') => {
                    return Err(self.error_at(loc, start, format!("invalid character `{c}` in IRI")));
                }
                Some(c) => {
                    iri.push(c);
                    self.bump();
                }
            }
        }
        Ok(Tok::IriRef(iri))
    }

    fn string(&mut self, quote: char, loc: SourceLocation, start: usize) -> Result<Tok, ParseError> {
        self.bump();
        if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
            return Err(self.error_at(loc, start, "multi-line literals are not supported"));
        }
        let mut value = String::new();
        loop {
            match self.bump() {
                None | Some('\n') | Some('\r') => {
                    return Err(self.error_at(loc, start, "unterminated string literal"));
                }
                Some(c) if c == quote => break,
                Some('\\') => {
                    let esc = self.bump();
                    let ch = match esc {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some(u @ ('u' | 'U')) => {
                            let width = if u == 'u' { 4 } else { 8 };
                            let hex = self.take_n(width);
                            u32::from_str_radix(&hex, 16)
                                .ok()
                                .filter(|_| hex.len() == width)
                                .and_then(char::from_u32)
                                .ok_or_else(|| self.error_at(loc, start, "invalid unicode escape"))?
                        }
                        _ => return Err(self.error_at(loc, start, "invalid escape sequence")),
                    };
                    value.push(ch);
                }
                Some(c) => value.push(c),
            }
        }
        if self.peek() == Some('@') {
            return Err(self.error_at(loc, start, "language tags are not supported"));
        }
        Ok(Tok::Str(value))
    }

    fn take_n(&mut self, n: usize) -> String {
        let mut s = String::new();
        for _ in 0..n {
            match self.peek() {
                Some(c) if c.is_ascii_hexdigit() => {
                    s.push(c);
                    self.bump();
                }
                _ => break,
            }
        }
        s
    }

    fn number(&mut self, loc: SourceLocation, start: usize) -> Result<Tok, ParseError> {
        let mut s = String::new();
        if let Some(sign @ ('+' | '-')) = self.peek() {
            s.push(sign);
            self.bump();
        }
        let int_part = self.take_while(|c| c.is_ascii_digit());
        s.push_str(&int_part);
        let mut is_decimal = false;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
            s.push('.');
            s.push_str(&self.take_while(|c| c.is_ascii_digit()));
            is_decimal = true;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            return Err(self.error_at(loc, start, "double literals are not supported"));
        }
        if s.trim_start_matches(['+', '-']).is_empty() {
            return Err(self.error_at(loc, start, "malformed numeric literal"));
        }
        Ok(if is_decimal {
            Tok::Decimal(s)
        } else {
            Tok::Integer(s)
        })
    }

    fn name(&mut self, loc: SourceLocation, start: usize) -> Result<Tok, ParseError> {
        let prefix = self.take_while(|c| is_pn_char(c) && c != '%');
        if self.peek() != Some(':') {
            let prefix = self.trim_trailing_dots(prefix);
            return match prefix.as_str() {
                "a" => Ok(Tok::A),
                "true" => Ok(Tok::Boolean(true)),
                "false" => Ok(Tok::Boolean(false)),
                "PREFIX" | "BASE" => Err(self.error_at(
                    loc,
                    start,
                    "SPARQL-style directives are not supported",
                )),
                _ => Err(self.error_at(loc, start, format!("unexpected word `{prefix}`"))),
            };
        }
        self.bump();
        let local = self.take_while(|c| is_pn_char(c) || c == ':');
        let local = self.trim_trailing_dots(local);
        Ok(Tok::PName { prefix, local })
    }
}
