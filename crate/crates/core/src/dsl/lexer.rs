use super::{ErrorKind, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Dot,
    Comma,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Amp,
    Pipe,
    Tilde,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Num(n) => format!("number {n}"),
            Tok::Dot => "'.'".into(),
            Tok::Comma => "','".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBrack => "'['".into(),
            Tok::RBrack => "']'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Pipe => "'|'".into(),
            Tok::Tilde => "'~'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Some(Tok::Dot),
            b',' => Some(Tok::Comma),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBrack),
            b']' => Some(Tok::RBrack),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            b'~' => Some(Tok::Tilde),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, start, end: i + 1 });
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), start, end: i });
        } else if c == b'"' || c == b'\'' {
            i += 1;
            while i < bytes.len() && bytes[i] != c && bytes[i] != b'\n' {
                i += 1;
            }
            if i >= bytes.len() || bytes[i] != c {
                return Err(ParseError::new(ErrorKind::Lex, start, i, "unterminated string literal"));
            }
            i += 1;
            out.push(Token { tok: Tok::Str(src[start + 1..i - 1].to_string()), start, end: i });
        } else if c.is_ascii_digit() || c == b'.' || c == b'-' || c == b'+' {
            i = scan_number(bytes, i);
            let text = &src[start..i];
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(Token { tok: Tok::Num(v), start, end: i }),
                _ => {
                    let end = i.max(start + 1);
                    return Err(ParseError::new(ErrorKind::Lex, start, end, format!("malformed number '{}'", &src[start..end])));
                }
            }
        } else {
            let ch = src[start..].chars().next().expect("in bounds");
            return Err(ParseError::new(
                ErrorKind::Lex,
                start,
                start + ch.len_utf8(),
                format!("unexpected character '{ch}'"),
            ));
        }
    }
    out.push(Token { tok: Tok::Eof, start: src.len(), end: src.len() });
    Ok(out)
}

fn scan_number(b: &[u8], mut i: usize) -> usize {
    let digits = |b: &[u8], mut i: usize| {
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        i
    };
    if b[i] == b'-' || b[i] == b'+' {
        i += 1;
    }
    i = digits(b, i);
    if i < b.len() && b[i] == b'.' {
        i = digits(b, i + 1);
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            i = digits(b, j);
        }
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_methods() {
        assert_eq!(
            kinds("a.eventually(0, -2.5e1)"),
            vec![
                Tok::Ident("a".into()),
                Tok::Dot,
                Tok::Ident("eventually".into()),
                Tok::LParen,
                Tok::Num(0.0),
                Tok::Comma,
                Tok::Num(-25.0),
                Tok::RParen,
                Tok::Eof
            ]
        );
        assert_eq!(kinds(".5"), vec![Tok::Num(0.5), Tok::Eof]);
    }

    #[test]
    fn lex_errors_point_at_the_offender() {
        let e = tokenize("a & $b").unwrap_err();
        assert_eq!((e.kind, e.span), (ErrorKind::Lex, (4, 5)));
        let e = tokenize("\"goal").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Lex);
        let e = tokenize("x - y").unwrap_err();
        assert_eq!(e.span, (2, 3));
    }
}
