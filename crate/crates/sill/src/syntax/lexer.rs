//! Tokens of the `.sill` surface syntax.

use super::{ParseError, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// `'name`, a symbolic value literal.
    Sym(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Dot,
    Eq,
    Star,
    /// `-o`
    Lolli,
    /// `|-`
    Turnstile,
    /// `<-`
    Arrow,
    /// `=>`
    FatArrow,
    Bar,
    Plus,
    Amp,
    Question,
    Bang,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`'{s}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Lolli => write!(f, "`-o`"),
            Tok::Turnstile => write!(f, "`|-`"),
            Tok::Arrow => write!(f, "`<-`"),
            Tok::FatArrow => write!(f, "`=>`"),
            Tok::Bar => write!(f, "`|`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Question => write!(f, "`?`"),
            Tok::Bang => write!(f, "`!`"),
        }
    }
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '#'
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map(|(o, _)| *o).unwrap_or(src.len());
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        let next = chars.get(i + 1).map(|(_, c)| *c);
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let two = |t: Tok| (t, 2);
        let (tok, len) = match (c, next) {
            ('-', Some('o')) if !chars.get(i + 2).is_some_and(|(_, c)| ident_char(*c)) => two(Tok::Lolli),
            ('|', Some('-')) => two(Tok::Turnstile),
            ('<', Some('-')) => two(Tok::Arrow),
            ('=', Some('>')) => two(Tok::FatArrow),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            (';', _) => (Tok::Semi, 1),
            ('.', _) => (Tok::Dot, 1),
            ('=', _) => (Tok::Eq, 1),
            ('*', _) => (Tok::Star, 1),
            ('|', _) => (Tok::Bar, 1),
            ('+', _) => (Tok::Plus, 1),
            ('&', _) => (Tok::Amp, 1),
            ('?', _) => (Tok::Question, 1),
            ('!', _) => (Tok::Bang, 1),
            ('\'', Some(d)) if ident_start(d) => {
                let mut j = i + 1;
                while j < chars.len() && ident_char(chars[j].1) {
                    j += 1;
                }
                let text = &src[end_of(i + 1)..end_of(j)];
                (Tok::Sym(text.to_string()), j - i)
            }
            (d, _) if d.is_ascii_digit() || (d == '-' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                let text = &src[start..end_of(j)];
                let n = text.parse::<i64>().map_err(|_| ParseError {
                    span: Span::new(start, end_of(j)),
                    message: format!("integer literal `{text}` out of range"),
                })?;
                (Tok::Int(n), j - i)
            }
            (d, _) if ident_start(d) => {
                let mut j = i + 1;
                while j < chars.len() && ident_char(chars[j].1) {
                    j += 1;
                }
                (Tok::Ident(src[start..end_of(j)].to_string()), j - i)
            }
            _ => {
                return Err(ParseError {
                    span: Span::new(start, end_of(i + 1)),
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, Span::new(start, end_of(i + len))));
        i += len;
    }
    Ok(out)
}
