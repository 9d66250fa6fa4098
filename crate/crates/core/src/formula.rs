//! Model formula mini-language.
//!
//! ```text
//! formula  := response "~" rhs
//! response := ident | "Surv" "(" ident "," ident ")"
//! rhs      := "1" | "." | term ("+" term)*
//! term     := ident
//! ```

use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    Single(String),
    Survival { time: String, event: String },
}

impl Response {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Response::Single(v) => vec![v],
            Response::Survival { time, event } => vec![time, event],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terms {
    /// `~ 1`
    InterceptOnly,
    /// `~ .`: every non-response column, in dataset order.
    AllRemaining,
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: Response,
    pub terms: Terms,
    pub has_intercept: bool,
}

impl Formula {
    /// Term names with the wildcard expanded against `data`.
    pub fn expand_terms(&self, data: &Dataset) -> Vec<String> {
        match &self.terms {
            Terms::InterceptOnly => Vec::new(),
            Terms::List(t) => t.clone(),
            Terms::AllRemaining => {
                let resp = self.response.variables();
                data.names().iter().filter(|n| !resp.contains(&n.as_str())).cloned().collect()
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.response {
            Response::Single(v) => write!(f, "{v}")?,
            Response::Survival { time, event } => write!(f, "Surv({time}, {event})")?,
        }
        f.write_str(" ~ ")?;
        match &self.terms {
            Terms::InterceptOnly => f.write_str("1"),
            Terms::AllRemaining => f.write_str("."),
            Terms::List(t) => f.write_str(&t.join(" + ")),
        }
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_formula(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Tilde,
    Plus,
    Dot,
    LParen,
    RParen,
    Comma,
    Other(char),
}

fn lex(text: &str) -> Vec<(usize, Tok)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let ident_start = |c: char| c.is_alphabetic() || c == '_';
        let ident_char = |c: char| c.is_alphanumeric() || c == '_' || c == '.';
        if ident_start(c) || (c == '.' && chars.get(i + 1).is_some_and(|&n| ident_start(n))) {
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            out.push((start, Tok::Number(chars[start..i].iter().collect())));
            continue;
        }
        let tok = match c {
            '~' => Tok::Tilde,
            '+' => Tok::Plus,
            '.' => Tok::Dot,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => Tok::Other(other),
        };
        out.push((start, tok));
        i += 1;
    }
    out
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::FormulaSyntax { pos: self.offset(), msg: msg.into() })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn unsupported(&self, c: char) -> Result<()> {
        let msg = match c {
            '*' | ':' => "interaction terms are not supported".to_string(),
            '-' => "term removal is not supported".to_string(),
            '/' | '|' => "nested terms are not supported".to_string(),
            '^' => "power terms are not supported".to_string(),
            _ => format!("unexpected character '{c}'"),
        };
        self.err(msg)
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut p = Parser { toks: lex(text), pos: 0, end: text.chars().count() };

    let response = match p.peek() {
        Some(Tok::Ident(s)) if s == "Surv" && matches!(p.toks.get(p.pos + 1), Some((_, Tok::LParen))) => {
            p.pos += 2;
            let time = p.ident("time variable")?;
            p.expect(Tok::Comma, "','")?;
            let event = p.ident("event variable")?;
            p.expect(Tok::RParen, "')'")?;
            Response::Survival { time, event }
        }
        Some(Tok::Ident(_)) => Response::Single(p.ident("response")?),
        _ => return p.err("expected response variable"),
    };
    p.expect(Tok::Tilde, "'~'")?;

    let terms = match p.peek() {
        Some(Tok::Number(n)) if n == "1" => {
            p.pos += 1;
            Terms::InterceptOnly
        }
        Some(Tok::Dot) => {
            p.pos += 1;
            Terms::AllRemaining
        }
        Some(Tok::Ident(_)) => {
            let mut list = Vec::new();
            loop {
                let at = p.offset();
                let name = p.ident("term")?;
                if p.peek() == Some(&Tok::LParen) {
                    return Err(Error::FormulaSyntax {
                        pos: at,
                        msg: format!("transformations like '{name}(...)' are not supported"),
                    });
                }
                if list.contains(&name) {
                    return Err(Error::FormulaSyntax { pos: at, msg: format!("duplicate term '{name}'") });
                }
                if response.variables().contains(&name.as_str()) {
                    return Err(Error::FormulaSyntax {
                        pos: at,
                        msg: format!("response '{name}' repeated on the right-hand side"),
                    });
                }
                list.push(name);
                match p.peek() {
                    Some(Tok::Plus) => p.pos += 1,
                    _ => break,
                }
            }
            Terms::List(list)
        }
        None => return p.err("missing right-hand side"),
        _ => return p.err("expected '1', '.', or a variable name"),
    };

    if let Some(tok) = p.peek().cloned() {
        return match tok {
            Tok::Other(c) => p.unsupported(c).map(|_| unreachable!()),
            _ => p.err("unexpected token after formula"),
        };
    }
    let _ = p.next();
    Ok(Formula { response, terms, has_intercept: true })
}
