//! Hand-rolled lexer for the surface language.

use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Int(i64),
    Real(f64),
    Ident(String),
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Le,
    Ge,
    EqEq,
    Eq,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Arrow,
    At,
    AndAnd,
    OrOr,
    Underscore,
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

pub fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($t:expr, $l:expr, $c:expr) => {
            out.push(Spanned { tok: $t, line: $l, col: $c })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, col: &mut u32| {
            *i += 1;
            *col += 1;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(&mut i, &mut col),
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '/' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '*' => {
                i += 2;
                col += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(ParseError::Invalid { line: tl, col: tc, msg: "unterminated block comment".into() });
                    }
                    if bytes[i] == '*' && bytes[i + 1] == '/' {
                        i += 2;
                        col += 2;
                        break;
                    }
                    if bytes[i] == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    i += 1;
                }
            }
            '(' => {
                push!(Tok::LParen, tl, tc);
                advance(&mut i, &mut col);
            }
            ')' => {
                push!(Tok::RParen, tl, tc);
                advance(&mut i, &mut col);
            }
            '{' => {
                push!(Tok::LBrace, tl, tc);
                advance(&mut i, &mut col);
            }
            '}' => {
                push!(Tok::RBrace, tl, tc);
                advance(&mut i, &mut col);
            }
            ',' => {
                push!(Tok::Comma, tl, tc);
                advance(&mut i, &mut col);
            }
            ';' => {
                push!(Tok::Semi, tl, tc);
                advance(&mut i, &mut col);
            }
            ':' => {
                push!(Tok::Colon, tl, tc);
                advance(&mut i, &mut col);
            }
            '+' => {
                push!(Tok::Plus, tl, tc);
                advance(&mut i, &mut col);
            }
            '*' => {
                push!(Tok::Star, tl, tc);
                advance(&mut i, &mut col);
            }
            '/' => {
                push!(Tok::Slash, tl, tc);
                advance(&mut i, &mut col);
            }
            '%' => {
                push!(Tok::Percent, tl, tc);
                advance(&mut i, &mut col);
            }
            '@' => {
                push!(Tok::At, tl, tc);
                advance(&mut i, &mut col);
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    push!(Tok::Arrow, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Minus, tl, tc);
                    advance(&mut i, &mut col);
                }
            }
            '<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Le, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Lt, tl, tc);
                    advance(&mut i, &mut col);
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Ge, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Gt, tl, tc);
                    advance(&mut i, &mut col);
                }
            }
            '=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::EqEq, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(Tok::Eq, tl, tc);
                    advance(&mut i, &mut col);
                }
            }
            '&' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '&' {
                    push!(Tok::AndAnd, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    return Err(ParseError::Invalid { line: tl, col: tc, msg: "stray '&'".into() });
                }
            }
            '|' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '|' {
                    push!(Tok::OrOr, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    return Err(ParseError::Invalid { line: tl, col: tc, msg: "stray '|'".into() });
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let mut is_real = false;
                if i + 1 < bytes.len() && bytes[i] == '.' && bytes[i + 1].is_ascii_digit() {
                    is_real = true;
                    i += 1;
                    col += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                        col += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        is_real = true;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        col += (j - i) as u32;
                        i = j;
                    }
                }
                let s: String = bytes[start..i].iter().collect();
                if is_real {
                    push!(Tok::Real(s.parse().map_err(|_| ParseError::Invalid { line: tl, col: tc, msg: format!("bad real literal {}", s) })?), tl, tc);
                } else {
                    push!(Tok::Int(s.parse().map_err(|_| ParseError::Invalid { line: tl, col: tc, msg: format!("bad int literal {}", s) })?), tl, tc);
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                if s == "_" {
                    push!(Tok::Underscore, tl, tc);
                } else {
                    push!(Tok::Ident(s), tl, tc);
                }
            }
            other => {
                return Err(ParseError::Invalid { line: tl, col: tc, msg: format!("unexpected character '{}'", other) });
            }
        }
    }
    Ok(out)
}
