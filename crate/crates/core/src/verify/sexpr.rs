//! Minimal s-expression reader for solver responses.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    /// A double-quoted string literal, unescaped.
    Str(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items) => Some(items),
            _ => None,
        }
    }

    /// Integer value of `k` or `(- k)`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            SExpr::Atom(a) => a.parse().ok(),
            SExpr::List(items) => match items.as_slice() {
                [SExpr::Atom(op), inner] if op == "-" => inner.as_int().map(|v| -v),
                _ => None,
            },
            SExpr::Str(_) => None,
        }
    }
}

/// Parses every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>> {
    let mut reader = Reader {
        chars: text.chars().collect(),
        pos: 0,
    };
    let mut out = Vec::new();
    loop {
        reader.skip_blank();
        if reader.pos >= reader.chars.len() {
            return Ok(out);
        }
        out.push(reader.expr()?);
    }
}

struct Reader {
    chars: Vec<char>,
    pos: usize,
}

impl Reader {
    fn skip_blank(&mut self) {
        while let Some(&c) = self.chars.get(self.pos) {
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == ';' {
                while self.chars.get(self.pos).is_some_and(|&c| c != '\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn expr(&mut self) -> Result<SExpr> {
        self.skip_blank();
        match self.chars.get(self.pos) {
            None => Err(Error::Parse("unexpected end of solver output".into())),
            Some('(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_blank();
                    match self.chars.get(self.pos) {
                        None => return Err(Error::Parse("unbalanced parenthesis in solver output".into())),
                        Some(')') => {
                            self.pos += 1;
                            return Ok(SExpr::List(items));
                        }
                        Some(_) => items.push(self.expr()?),
                    }
                }
            }
            Some(')') => Err(Error::Parse(format!("unexpected ')' at offset {}", self.pos))),
            Some('"') => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    match self.chars.get(self.pos) {
                        None => return Err(Error::Parse("unterminated string in solver output".into())),
                        Some('"') if self.chars.get(self.pos + 1) == Some(&'"') => {
                            s.push('"');
                            self.pos += 2;
                        }
                        Some('"') => {
                            self.pos += 1;
                            return Ok(SExpr::Str(s));
                        }
                        Some(&c) => {
                            s.push(c);
                            self.pos += 1;
                        }
                    }
                }
            }
            Some('|') => {
                let start = self.pos;
                self.pos += 1;
                while self.chars.get(self.pos).is_some_and(|&c| c != '|') {
                    self.pos += 1;
                }
                if self.pos >= self.chars.len() {
                    return Err(Error::Parse("unterminated quoted symbol".into()));
                }
                self.pos += 1;
                Ok(SExpr::Atom(self.chars[start..self.pos].iter().collect()))
            }
            Some(_) => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|&c| !c.is_whitespace() && c != '(' && c != ')' && c != '"' && c != ';')
                {
                    self.pos += 1;
                }
                Ok(SExpr::Atom(self.chars[start..self.pos].iter().collect()))
            }
        }
    }
}

/// Splits a stream into complete top-level expressions as bytes arrive.
#[derive(Debug, Default)]
pub struct Splitter {
    buf: String,
    depth: usize,
    in_string: bool,
    in_atom: bool,
}

impl Splitter {
    /// Feeds one character; returns a finished top-level expression if any.
    pub fn push(&mut self, c: char) -> Option<String> {
        if self.in_string {
            self.buf.push(c);
            if c == '"' {
                self.in_string = false;
            }
            return None;
        }
        match c {
            '"' => {
                self.in_string = true;
                self.buf.push(c);
                None
            }
            '(' => {
                let done = self.finish_atom();
                self.depth += 1;
                self.buf.push(c);
                done
            }
            ')' => {
                self.buf.push(c);
                self.depth = self.depth.saturating_sub(1);
                if self.depth == 0 {
                    Some(std::mem::take(&mut self.buf))
                } else {
                    None
                }
            }
            c if c.is_whitespace() => {
                if self.depth == 0 {
                    self.finish_atom()
                } else {
                    self.buf.push(c);
                    None
                }
            }
            c => {
                if self.depth == 0 {
                    self.in_atom = true;
                }
                self.buf.push(c);
                None
            }
        }
    }

    fn finish_atom(&mut self) -> Option<String> {
        if self.depth == 0 && self.in_atom {
            self.in_atom = false;
            let atom = std::mem::take(&mut self.buf);
            return Some(atom.trim().to_string());
        }
        if self.depth == 0 {
            self.buf.clear();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_models_and_negatives() {
        let text = "(\n  (define-fun init_0 () Int\n    1)\n  (define-fun lam_1 () Int (- 2))\n)";
        let parsed = parse_all(text).unwrap();
        assert_eq!(parsed.len(), 1);
        let defs = parsed[0].as_list().unwrap();
        assert_eq!(defs[0].as_list().unwrap()[4].as_int(), Some(1));
        assert_eq!(defs[1].as_list().unwrap()[4].as_int(), Some(-2));
    }

    #[test]
    fn strings_may_hold_parens() {
        let parsed = parse_all("(error \"line 1 (bad)\") sat").unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[1], SExpr::Atom("sat".into()));
    }

    #[test]
    fn truncated_text_is_an_error() {
        assert!(parse_all("((define-fun x () Int 1)").is_err());
        assert!(parse_all("(\"open").is_err());
    }

    #[test]
    fn splitter_emits_atoms_and_lists() {
        let mut s = Splitter::default();
        let mut out = Vec::new();
        for c in "sat\n((init_0 1) (lam_0 (- 1)))\nunsat\n(error \"a ) b\")\n".chars() {
            if let Some(e) = s.push(c) {
                out.push(e);
            }
        }
        assert_eq!(
            out,
            vec![
                "sat".to_string(),
                "((init_0 1) (lam_0 (- 1)))".to_string(),
                "unsat".to_string(),
                "(error \"a ) b\")".to_string()
            ]
        );
    }
}
