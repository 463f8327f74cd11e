use std::fmt;

use super::PddlError;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Sym(String),
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, PddlError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1, 1);
    let mut sym = String::new();
    let mut sym_pos = Pos { line, col };

    macro_rules! flush {
        () => {
            if !sym.is_empty() {
                out.push((Tok::Sym(std::mem::take(&mut sym).to_lowercase()), sym_pos));
            }
        };
    }

    while let Some(c) = chars.next() {
        let here = Pos { line, col };
        match c {
            '(' | ')' => {
                flush!();
                out.push((if c == '(' { Tok::Open } else { Tok::Close }, here));
            }
            ';' => {
                flush!();
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            c if c.is_whitespace() => flush!(),
            c if c.is_alphanumeric() || "-_?:.".contains(c) => {
                if sym.is_empty() {
                    sym_pos = here;
                }
                sym.push(c);
            }
            other => {
                return Err(PddlError::Syntax {
                    pos: here,
                    message: format!("unexpected character {other:?}"),
                });
            }
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    flush!();
    Ok(out)
}

/// A parsed S-expression with the position of its first character.
#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Sym(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Sym(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            SExpr::Sym(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(v, _) => Some(v),
            SExpr::Sym(..) => None,
        }
    }
}

/// Parses exactly one top-level S-expression.
pub fn parse_one(src: &str) -> Result<SExpr, PddlError> {
    let toks = lex(src)?;
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut done: Option<SExpr> = None;
    for (tok, pos) in toks {
        if done.is_some() {
            return Err(PddlError::Syntax {
                pos,
                message: "unexpected input after the closing parenthesis".into(),
            });
        }
        match tok {
            Tok::Open => stack.push((Vec::new(), pos)),
            Tok::Close => {
                let (items, open) = stack.pop().ok_or_else(|| PddlError::Syntax {
                    pos,
                    message: "unbalanced ')' with no matching '('".into(),
                })?;
                let list = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => done = Some(list),
                }
            }
            Tok::Sym(s) => match stack.last_mut() {
                Some((parent, _)) => parent.push(SExpr::Sym(s, pos)),
                None => {
                    return Err(PddlError::Syntax {
                        pos,
                        message: format!("expected '(' but found {s:?}"),
                    })
                }
            },
        }
    }
    if let Some((_, open)) = stack.last() {
        return Err(PddlError::Syntax {
            pos: *open,
            message: "unbalanced '(' is never closed".into(),
        });
    }
    done.ok_or(PddlError::Syntax {
        pos: Pos { line: 1, col: 1 },
        message: "empty input".into(),
    })
}
