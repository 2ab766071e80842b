//! Text grammar:
//!
//! ```text
//! query   := IDENT '(' [VAR {',' VAR}] ')' ':-' item {',' item}
//! item    := atom | term OP term
//! atom    := IDENT '(' [term {',' term}] ')'
//! term    := VAR | INTEGER | STRING
//! OP      := '=' | '!=' | '<' | '<=' | '>' | '>='
//! ```
//!
//! Variables start with a lowercase letter or `_`; strings are double-quoted
//! with `\"` and `\\` escapes.

use super::{Atom, Builtin, BuiltinOp, ConjunctiveQuery, Term, Value};
use crate::error::{Error, Result};

pub fn parse_query(text: &str) -> Result<ConjunctiveQuery> {
    let mut p = Parser::new(text);
    let q = p.query()?;
    p.end()?;
    q.validate()?;
    Ok(q)
}

/// Parses a single atom such as a stored fact `A(1,"x")`.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut p = Parser::new(text);
    let name = p.ident()?;
    let atom = p.atom_args(name)?;
    p.end()?;
    Ok(atom)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
        }
    }

    fn location(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> Error {
        let (line, column) = self.location(pos);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        self.error_at(self.pos, message)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn end(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.error(format!("unexpected `{c}` after end of input"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(self.error("expected identifier")),
        }
        let start = self.pos;
        while let Some(&c) = self.chars.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn query(&mut self) -> Result<ConjunctiveQuery> {
        let name = self.ident()?;
        self.expect('(')?;
        let mut head = Vec::new();
        if !self.eat(')') {
            loop {
                let at = {
                    self.skip_ws();
                    self.pos
                };
                match self.term()? {
                    Term::Var(v) => head.push(v),
                    Term::Const(_) => {
                        return Err(self.error_at(at, "head positions must be variables"))
                    }
                }
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        if !(self.eat(':') && self.chars.get(self.pos) == Some(&'-')) {
            return Err(self.error("expected `:-`"));
        }
        self.pos += 1;

        let mut body = Vec::new();
        let mut builtins = Vec::new();
        loop {
            self.item(&mut body, &mut builtins)?;
            if !self.eat(',') {
                break;
            }
        }
        Ok(ConjunctiveQuery {
            name,
            head,
            body,
            builtins,
        })
    }

    fn item(&mut self, body: &mut Vec<Atom>, builtins: &mut Vec<Builtin>) -> Result<()> {
        self.skip_ws();
        let save = self.pos;
        if matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
            let name = self.ident()?;
            if self.peek() == Some('(') {
                body.push(self.atom_args(name)?);
                return Ok(());
            }
            self.pos = save;
        }
        let lhs = self.term()?;
        let op = self.op()?;
        let rhs = self.term()?;
        builtins.push(Builtin { op, lhs, rhs });
        Ok(())
    }

    fn atom_args(&mut self, predicate: String) -> Result<Atom> {
        self.expect('(')?;
        let mut args = Vec::new();
        if !self.eat(')') {
            loop {
                args.push(self.term()?);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        Ok(Atom { predicate, args })
    }

    fn op(&mut self) -> Result<BuiltinOp> {
        let op = match (self.peek(), self.peek_at(1)) {
            (Some('!'), Some('=')) => (BuiltinOp::Ne, 2),
            (Some('<'), Some('=')) => (BuiltinOp::Le, 2),
            (Some('>'), Some('=')) => (BuiltinOp::Ge, 2),
            (Some('<'), _) => (BuiltinOp::Lt, 1),
            (Some('>'), _) => (BuiltinOp::Gt, 1),
            (Some('='), _) => (BuiltinOp::Eq, 1),
            _ => return Err(self.error("expected comparison operator")),
        };
        self.pos += op.1;
        Ok(op.0)
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some('"') => self.string(),
            Some(c) if c.is_ascii_digit() || c == '-' => self.integer(),
            Some(c) if c.is_ascii_lowercase() || c == '_' => Ok(Term::Var(self.ident()?)),
            Some(c) if c.is_ascii_uppercase() => {
                Err(self.error("variables must start lowercase; quote string constants"))
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<Term> {
        let start = self.pos;
        if self.chars[self.pos] == '-' {
            self.pos += 1;
        }
        while matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<i64>()
            .map(Term::int)
            .map_err(|_| self.error_at(start, format!("invalid integer `{text}`")))
    }

    fn string(&mut self) -> Result<Term> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.chars.get(self.pos) {
                None => return Err(self.error_at(start, "unterminated string")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(Term::Const(Value::Str(out)));
                }
                Some('\\') => {
                    match self.chars.get(self.pos + 1) {
                        Some(&c @ ('"' | '\\')) => out.push(c),
                        _ => return Err(self.error("invalid escape")),
                    }
                    self.pos += 2;
                }
                Some(&c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_atoms_and_builtins() {
        let q = parse_query("q(x, y) :- A(x,z), B(z, y, \"s\"), x <= 5, y != -3").unwrap();
        assert_eq!(q.head, vec!["x", "y"]);
        assert_eq!(q.body.len(), 2);
        assert_eq!(q.body[1].args[2], Term::str("s"));
        assert_eq!(q.builtins.len(), 2);
        assert_eq!(q.builtins[0].op, BuiltinOp::Le);
        assert_eq!(q.builtins[1].rhs, Term::int(-3));
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_query("q(x):-A(x,y),x>=2").unwrap();
        let b = parse_query("  q ( x )\n :-\tA( x , y ) ,  x >= 2 ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "q(x) :- A(x,y), B(y)",
            "v1(a,b) :- C(a,b)",
            "b() :- A(1,\"x\\\"y\")",
            "q(x) :- A(x,y), x < y, y = 3",
        ] {
            let q = parse_query(text).unwrap();
            assert_eq!(parse_query(&q.to_string()).unwrap(), q);
        }
    }

    #[test]
    fn boolean_query() {
        let q = parse_query("b() :- A(1,2)").unwrap();
        assert!(q.head.is_empty());
    }

    #[test]
    fn errors_are_located() {
        match parse_query("q(x) :-\n  A(x,, y)") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 7)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_query("q(1) :- A(1)").unwrap_err().is_parse());
        assert!(parse_query("q(x) :- A(X)").unwrap_err().is_parse());
        assert!(parse_query("q(x) A(x)").unwrap_err().is_parse());
        assert!(parse_query("q(x) :- A(x) extra").unwrap_err().is_parse());
        assert!(parse_query("q(x) :- A(\"x)").unwrap_err().is_parse());
    }

    #[test]
    fn facts() {
        let a = parse_atom("A(1, \"two\")").unwrap();
        assert_eq!(
            a.tuple().unwrap(),
            vec![Value::Int(1), Value::Str("two".into())]
        );
        assert!(parse_atom("A(1) :- B(1)").is_err());
    }
}
