//! Lexer and recursive-descent parser for signature declarations.

use std::collections::BTreeMap;

use super::{Arg, Mode, SigError, SignatureDecl};
use crate::model::{is_identifier, DataType, GlobalName, Version};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Arrow,
    Punct(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Arrow => "`->`".into(),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexed {
    tokens: Vec<Token>,
    /// Comment lines before the first token.
    doc: Vec<String>,
}

fn lex(text: &str) -> Result<Lexed, SigError> {
    let mut tokens = Vec::new();
    let mut doc = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            column += i - start;
            if tokens.is_empty() {
                let body: String = chars[start + 1..i].iter().collect();
                doc.push(body.strip_prefix(' ').unwrap_or(&body).trim_end().to_string());
            }
            continue;
        }
        let token_start = i;
        let tok = if c == '_' || c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i] == '_' || chars[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse().map_err(|_| SigError::Syntax {
                line: start_line,
                column: start_col,
                message: format!("integer `{digits}` out of range"),
            })?;
            Tok::Int(n)
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Arrow
        } else if "(),:<>{}[]?@.".contains(c) {
            i += 1;
            Tok::Punct(c)
        } else {
            return Err(SigError::Syntax {
                line,
                column,
                message: format!("unexpected character `{c}`"),
            });
        };
        column += i - token_start;
        tokens.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    tokens.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(Lexed { tokens, doc })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn error(&self, at: &Token, expected: &str) -> SigError {
        SigError::Syntax {
            line: at.line,
            column: at.column,
            message: format!("expected {expected}, found {}", at.tok.describe()),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), SigError> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(self.error(&t, &format!("`{c}`")))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Punct(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), SigError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t)),
            _ => Err(self.error(&t, what)),
        }
    }

    fn int(&mut self, what: &str) -> Result<u64, SigError> {
        let t = self.next();
        match t.tok {
            Tok::Int(n) => Ok(n),
            _ => Err(self.error(&t, what)),
        }
    }

    fn end(&mut self) -> Result<(), SigError> {
        let t = self.next();
        if t.tok == Tok::End {
            Ok(())
        } else {
            Err(self.error(&t, "end of input"))
        }
    }

    fn datatype(&mut self) -> Result<DataType, SigError> {
        let (name, at) = self.ident("a type")?;
        let ty = match name.as_str() {
            "integer64" => DataType::Integer64,
            "real64" => DataType::Real64,
            "boolean" => DataType::Boolean,
            "text" => DataType::Text,
            "array" => {
                self.punct('<')?;
                let element = self.datatype()?;
                self.punct(',')?;
                let rank_at = self.peek().clone();
                let rank = self.int("an array rank")?;
                let rank = u32::try_from(rank).map_err(|_| self.error(&rank_at, "a rank between 1 and 7"))?;
                let extents = if self.eat(',') {
                    self.punct('[')?;
                    let mut extents = Vec::new();
                    loop {
                        if self.eat('?') {
                            extents.push(None);
                        } else {
                            extents.push(Some(self.int("an extent or `?`")?));
                        }
                        if !self.eat(',') {
                            break;
                        }
                    }
                    self.punct(']')?;
                    Some(extents)
                } else {
                    None
                };
                self.punct('>')?;
                DataType::Array {
                    element: Box::new(element),
                    rank,
                    extents,
                }
            }
            "composite" => {
                self.punct('{')?;
                let mut fields = BTreeMap::new();
                loop {
                    let (field, field_at) = self.ident("a field name")?;
                    self.punct(':')?;
                    let ty = self.datatype()?;
                    if fields.insert(field.clone(), ty).is_some() {
                        return Err(SigError::Syntax {
                            line: field_at.line,
                            column: field_at.column,
                            message: format!("duplicate field `{field}`"),
                        });
                    }
                    if !self.eat(',') {
                        break;
                    }
                }
                self.punct('}')?;
                DataType::Composite { fields }
            }
            "opaque" => {
                self.punct('<')?;
                let (first, name_at) = self.ident("an opaque type name")?;
                let mut full = first;
                while self.eat('.') {
                    full.push('.');
                    full.push_str(&self.ident("a name segment")?.0);
                }
                self.punct('@')?;
                let major = self.int("a major version")?;
                self.punct('.')?;
                let minor = self.int("a minor version")?;
                self.punct('.')?;
                let patch = self.int("a patch version")?;
                self.punct('>')?;
                let name = GlobalName::new(&full).map_err(|e| SigError::InvalidType {
                    line: name_at.line,
                    column: name_at.column,
                    reason: e.to_string(),
                })?;
                let version: Version =
                    format!("{major}.{minor}.{patch}")
                        .parse()
                        .map_err(|e| SigError::InvalidType {
                            line: name_at.line,
                            column: name_at.column,
                            reason: format!("{e}"),
                        })?;
                DataType::Opaque { name, version }
            }
            _ => {
                return Err(SigError::UnknownType {
                    line: at.line,
                    column: at.column,
                    name,
                })
            }
        };
        ty.check().map_err(|e| SigError::InvalidType {
            line: at.line,
            column: at.column,
            reason: e.to_string(),
        })?;
        Ok(ty)
    }

    fn decl(&mut self, doc: String) -> Result<SignatureDecl, SigError> {
        let (kw, at) = self.ident("`routine`")?;
        if kw != "routine" {
            return Err(self.error(&at, "`routine`"));
        }
        let (routine, _) = self.ident("a routine name")?;
        self.punct('(')?;
        let mut args: Vec<Arg> = Vec::new();
        if !self.eat(')') {
            loop {
                let (name, name_at) = self.ident("an argument name")?;
                self.punct(':')?;
                let datatype = self.datatype()?;
                let (mode, mode_at) = self.ident("`in` or `out`")?;
                let mode = match mode.as_str() {
                    "in" => Mode::In,
                    "out" => Mode::Out,
                    _ => return Err(self.error(&mode_at, "`in` or `out`")),
                };
                if args.iter().any(|a| a.name == name) {
                    return Err(SigError::DuplicateArg {
                        line: name_at.line,
                        column: name_at.column,
                        name,
                    });
                }
                args.push(Arg { name, datatype, mode });
                if self.eat(')') {
                    break;
                }
                self.punct(',')?;
            }
        }
        let result = if self.peek().tok == Tok::Arrow {
            self.next();
            Some(self.datatype()?)
        } else {
            None
        };
        self.end()?;
        if args.is_empty() && result.is_none() {
            return Err(SigError::Empty(routine));
        }
        debug_assert!(is_identifier(&routine));
        Ok(SignatureDecl {
            routine,
            args,
            result,
            doc,
        })
    }
}

pub fn parse_signature(text: &str) -> Result<SignatureDecl, SigError> {
    let Lexed { tokens, doc } = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let doc = doc.join("\n").trim().to_string();
    parser.decl(doc)
}

pub fn parse_type(text: &str) -> Result<DataType, SigError> {
    let Lexed { tokens, .. } = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let ty = parser.datatype()?;
    parser.end()?;
    Ok(ty)
}
