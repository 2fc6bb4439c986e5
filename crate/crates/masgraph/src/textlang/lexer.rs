//! Tokenizer shared by the model, query and abstraction languages.

use super::ast::Span;
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// A line break separates this token from the previous one.
    pub newline_before: bool,
}

const PUNCTS: &[&str] = &[
    "-->", "->", "==", "!=", "<=", ">=", "&&", "||", "|", "++", "--", "+=", "-=", "*=", "/=", "%=", "[", "]",
    "(", ")", "{", "}", ",", ";", ":", ".", "!", "?", "=", "<", ">", "+", "-", "*", "/", "%", "&",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut newline = false;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            newline = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if text[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if text[i..].starts_with("/*") {
            let Some(end) = text[i + 2..].find("*/") else {
                return Err(ParseError::at(text, i, "unterminated block comment"));
            };
            if text[i..i + 2 + end].contains('\n') {
                newline = true;
            }
            i += end + 4;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let v = text[start..i]
                .parse::<i64>()
                .map_err(|_| ParseError::at(text, start, "integer literal too large"))?;
            Tok::Int(v)
        } else if let Some(p) = PUNCTS.iter().find(|p| text[i..].starts_with(**p)) {
            i += p.len();
            Tok::Punct(p)
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError::at(text, i, &format!("unexpected character '{ch}'")));
        };
        out.push(Token {
            tok,
            span: Span::new(start, i),
            newline_before: newline,
        });
        newline = false;
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(text.len(), text.len()),
        newline_before: true,
    });
    Ok(out)
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |p| offset - p - 1) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_punctuation_wins() {
        let toks = tokenize("a-->b -> c<=d /* x\n */ e").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("-->"),
                Tok::Ident("b".into()),
                Tok::Punct("->"),
                Tok::Ident("c".into()),
                Tok::Punct("<="),
                Tok::Ident("d".into()),
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
        assert!(toks[7].newline_before);
    }

    #[test]
    fn positions_are_one_based() {
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
        assert_eq!(line_col("ab", 0), (1, 1));
    }
}
