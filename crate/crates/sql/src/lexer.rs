//! Tokenizer for the SQL subset and the emitted DDL.

use serde::Serialize;

use crate::ast::Span;

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    /// Keyword or identifier. Unquoted words are lowercased.
    Word { value: String, quoted: bool },
    Number(String),
    String(String),
    Param(String),
    Symbol(&'static str),
    Eof,
}

impl Token {
    pub fn describe(&self) -> String {
        match self {
            Token::Word { value, quoted: true } => format!("\"{value}\""),
            Token::Word { value, .. } => value.to_uppercase(),
            Token::Number(n) => n.clone(),
            Token::String(s) => format!("'{s}'"),
            Token::Param(p) => format!("${p}"),
            Token::Symbol(s) => (*s).to_string(),
            Token::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub token: Token,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub message: String,
    pub line: usize,
    pub column: usize,
    /// Tokens that would have been accepted here.
    pub expected: Vec<String>,
    pub found: String,
    pub span: Span,
}

/// 1-based line and column (in characters) of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub(crate) fn error_at(text: &str, span: Span, message: String, expected: Vec<String>, found: String) -> SyntaxError {
    let (line, column) = line_col(text, span.start);
    SyntaxError { message, line, column, expected, found, span }
}

const SYMBOLS: [&str; 22] =
    ["<>", "!=", "<=", ">=", "::", "||", "(", ")", ",", ".", ";", "*", "+", "-", "/", "%", "=", "<", ">", "~", "[", "]"];

pub fn tokenize(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if text[i..].starts_with("--") {
            i = text[i..].find('\n').map_or(bytes.len(), |n| i + n);
            continue;
        }
        if text[i..].starts_with("/*") {
            match text[i + 2..].find("*/") {
                Some(n) => i += n + 4,
                None => {
                    let span = Span::new(i, bytes.len());
                    return Err(error_at(text, span, "unterminated comment".into(), vec!["*/".into()], "end of input".into()));
                }
            }
            continue;
        }
        let token = if c == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                match text[i..].find('\'') {
                    None => {
                        let span = Span::new(start, bytes.len());
                        return Err(error_at(
                            text,
                            span,
                            "unterminated string literal".into(),
                            vec!["'".into()],
                            "end of input".into(),
                        ));
                    }
                    Some(n) => {
                        value.push_str(&text[i..i + n]);
                        i += n + 1;
                        if bytes.get(i) == Some(&b'\'') {
                            value.push('\'');
                            i += 1;
                        } else {
                            break;
                        }
                    }
                }
            }
            Token::String(value)
        } else if c == b'"' {
            match text[i + 1..].find('"') {
                Some(n) => {
                    let value = text[i + 1..i + 1 + n].to_string();
                    i += n + 2;
                    Token::Word { value, quoted: true }
                }
                None => {
                    let span = Span::new(start, bytes.len());
                    return Err(error_at(text, span, "unterminated quoted identifier".into(), vec!["\"".into()], "end of input".into()));
                }
            }
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            Token::Number(text[start..i].to_string())
        } else if c == b'$' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            if i == start + 1 {
                let span = Span::new(start, i);
                return Err(error_at(text, span, "expected a parameter name after `$`".into(), vec!["identifier".into()], "$".into()));
            }
            Token::Param(text[start + 1..i].to_string())
        } else if c.is_ascii_alphabetic() || c == b'_' || !c.is_ascii() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || !bytes[i].is_ascii()) {
                i += 1;
            }
            Token::Word { value: text[start..i].to_lowercase(), quoted: false }
        } else if let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) {
            i += sym.len();
            Token::Symbol(sym)
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            let span = Span::new(i, i + ch.len_utf8());
            return Err(error_at(text, span, format!("unexpected character `{ch}`"), Vec::new(), ch.to_string()));
        };
        out.push(Spanned { token, span: Span::new(start, i) });
    }
    out.push(Spanned { token: Token::Eof, span: Span::new(bytes.len(), bytes.len()) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Token> {
        tokenize(text).unwrap().into_iter().map(|s| s.token).collect()
    }

    #[test]
    fn words_lowercase_and_symbols() {
        assert_eq!(
            kinds("SELECT a.B <> 'it''s' -- tail\n"),
            vec![
                Token::Word { value: "select".into(), quoted: false },
                Token::Word { value: "a".into(), quoted: false },
                Token::Symbol("."),
                Token::Word { value: "b".into(), quoted: false },
                Token::Symbol("<>"),
                Token::String("it's".into()),
                Token::Eof,
            ]
        );
    }

    #[test]
    fn numbers_and_params() {
        assert_eq!(
            kinds("100.0 7.1 3600 $year"),
            vec![
                Token::Number("100.0".into()),
                Token::Number("7.1".into()),
                Token::Number("3600".into()),
                Token::Param("year".into()),
                Token::Eof
            ]
        );
    }

    #[test]
    fn errors_carry_position() {
        let e = tokenize("SELECT\n  'abc").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        let e = tokenize("SELECT ?").unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
    }
}
