//! Feature-set expressions such as `ALL∖WEB_nag` or `(API_Sa ∪ API_D) - uf`.
//!
//! Union is written `∪`, `+` or `|`; difference is `∖`, `\` or `-`. Both are
//! left-associative with equal precedence. `∅` is the empty set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SET_NAMES: [&str; 14] = [
    "API", "API_S", "API_Sv", "API_Sa", "API_D", "API_Svb", "BASE.lit", "LOG", "LOG_S", "LOG_B",
    "WEB", "WEB_ag", "WEB_nag", "ALL",
];

pub const GROUP_NAMES: [&str; 5] = ["tc", "sv", "uf", "ar", "se"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Empty,
    Name(String),
    Union(Box<Expr>, Box<Expr>),
    Difference(Box<Expr>, Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn atom(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                Expr::Empty | Expr::Name(_) => write!(f, "{e}"),
                _ => write!(f, "({e})"),
            }
        }
        match self {
            Expr::Empty => write!(f, "∅"),
            Expr::Name(n) => write!(f, "{n}"),
            Expr::Union(a, b) => {
                write!(f, "{a}∪")?;
                atom(b, f)
            }
            Expr::Difference(a, b) => {
                write!(f, "{a}∖")?;
                atom(b, f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Union,
    Difference,
    Empty,
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '∪' | '+' | '|' => {
                chars.next();
                out.push(Token::Union);
            }
            '∖' | '\\' | '-' => {
                chars.next();
                out.push(Token::Difference);
            }
            '∅' => {
                chars.next();
                out.push(Token::Empty);
            }
            '(' => {
                chars.next();
                out.push(Token::Open);
            }
            ')' => {
                chars.next();
                out.push(Token::Close);
            }
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token::Ident(ident));
            }
            other => {
                return Err(Error::Config(format!(
                    "unexpected character `{other}` in feature set `{text}`"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    text: &'a str,
}

impl Parser<'_> {
    fn fail<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Config(format!("{msg} in feature set `{}`", self.text)))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.atom()?;
        while let Some(t) = self.tokens.get(self.pos) {
            let op = t.clone();
            if op != Token::Union && op != Token::Difference {
                break;
            }
            self.pos += 1;
            let rhs = self.atom()?;
            lhs = if op == Token::Union {
                Expr::Union(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Difference(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(t) = self.tokens.get(self.pos).cloned() else {
            return self.fail("unexpected end");
        };
        self.pos += 1;
        match t {
            Token::Empty => Ok(Expr::Empty),
            Token::Ident(name) => {
                if SET_NAMES.contains(&name.as_str()) || GROUP_NAMES.contains(&name.as_str()) {
                    Ok(Expr::Name(name))
                } else {
                    self.fail(&format!("unknown set `{name}`"))
                }
            }
            Token::Open => {
                let e = self.expr()?;
                if self.tokens.get(self.pos) != Some(&Token::Close) {
                    return self.fail("missing `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            _ => self.fail("expected a set name"),
        }
    }
}

/// A parsed feature-set expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    expr: Expr,
}

impl FeatureSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            text,
        };
        let expr = p.expr()?;
        if p.pos != tokens.len() {
            return p.fail("trailing input");
        }
        Ok(Self { expr })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for FeatureSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        FeatureSpec::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(n: &str) -> Box<Expr> {
        Box::new(Expr::Name(n.into()))
    }

    #[test]
    fn parses_operators() {
        assert_eq!(
            FeatureSpec::parse("ALL∖WEB_nag").unwrap().expr,
            Expr::Difference(name("ALL"), name("WEB_nag"))
        );
        assert_eq!(
            FeatureSpec::parse("API_Sa + API_D").unwrap().expr,
            Expr::Union(name("API_Sa"), name("API_D"))
        );
        assert_eq!(
            FeatureSpec::parse("API - (uf | se)").unwrap().expr,
            Expr::Difference(name("API"), Box::new(Expr::Union(name("uf"), name("se"))))
        );
        assert_eq!(
            FeatureSpec::parse("API\\tc").unwrap(),
            FeatureSpec::parse("API∖tc").unwrap()
        );
        assert_eq!(FeatureSpec::parse("∅").unwrap().expr, Expr::Empty);
        assert_eq!(
            FeatureSpec::parse("BASE.lit").unwrap().expr,
            Expr::Name("BASE.lit".into())
        );
    }

    #[test]
    fn left_associative() {
        assert_eq!(
            FeatureSpec::parse("ALL - LOG + LOG_S").unwrap().expr,
            Expr::Union(
                Box::new(Expr::Difference(name("ALL"), name("LOG"))),
                name("LOG_S")
            )
        );
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "API ∪", "FOO", "(API", "API)", "API * LOG"] {
            assert!(matches!(FeatureSpec::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn display_reparses() {
        for text in ["API∖(uf∪se)", "ALL∖WEB_nag", "API_Sv∪API_D", "(API∖tc)∪LOG"] {
            let spec = FeatureSpec::parse(text).unwrap();
            assert_eq!(FeatureSpec::parse(&spec.to_string()).unwrap(), spec);
        }
    }
}
