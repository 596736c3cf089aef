//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := atom ('^' factor)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')' | '-' atom
//! ```

use super::{BinOp, ExprError, Expression, Func, Node};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(c) => format!("number {c}"),
            Tok::Ident(name) => format!("name `{name}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(what))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(c) => {
                self.bump();
                Ok(Node::Num(c))
            }
            Tok::Minus => {
                self.bump();
                Ok(match self.atom()? {
                    Node::Num(c) => Node::Num(-c),
                    other => Node::Neg(Box::new(other)),
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Node::Var(name));
                }
                let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction {
                    name: name.clone(),
                    offset,
                })?;
                self.bump();
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                if args.len() != func.arity() {
                    return Err(ExprError::Arity {
                        name,
                        expected: func.arity(),
                        got: args.len(),
                    });
                }
                Ok(Node::Call(func, args))
            }
            _ => Err(self.error("number, name, `(` or `-`")),
        }
    }
}

/// Parses an expression in the infix language.
pub fn parse(source: &str) -> Result<Expression, ExprError> {
    let mut parser = Parser {
        toks: lex(source)?,
        pos: 0,
    };
    let root = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.error("operator or end of input"));
    }
    Ok(Expression::from_node(root))
}

/// Parses and checks that every free variable is in `allowed`.
pub fn parse_with_vars(source: &str, allowed: &[&str]) -> Result<Expression, ExprError> {
    let expr = parse(source)?;
    if let Some(name) = expr
        .free_vars()
        .iter()
        .find(|v| !allowed.contains(&v.as_str()))
    {
        return Err(ExprError::UnknownVariable {
            name: name.clone(),
            allowed: allowed.join(", "),
        });
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_input_reports_offset() {
        match parse("t +") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_function_and_variable() {
        assert!(matches!(
            parse("tan(t)"),
            Err(ExprError::UnknownFunction { offset: 0, .. })
        ));
        assert!(matches!(
            parse_with_vars("t*y", &["t", "x"]),
            Err(ExprError::UnknownVariable { .. })
        ));
        assert!(matches!(parse("pow(t)"), Err(ExprError::Arity { .. })));
    }

    #[test]
    fn power_is_right_associative() {
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval_with(&[]).unwrap(), 512.0);
    }

    #[test]
    fn unary_minus_binds_to_the_base() {
        // '-' atom is an atom, so "-t^2" is (-t)^2.
        let e = parse("-t^2").unwrap();
        assert_eq!(e.eval_with(&[("t", 3.0)]).unwrap(), 9.0);
        let e = parse("2^-1").unwrap();
        assert_eq!(e.eval_with(&[]).unwrap(), 0.5);
    }

    #[test]
    fn negated_literals_fold() {
        assert_eq!(*parse("-2").unwrap().root(), Node::Num(-2.0));
        assert_eq!(*parse("--2").unwrap().root(), Node::Num(2.0));
    }

    #[test]
    fn numbers_with_exponents() {
        let e = parse("1.5e-3*t + 2E2").unwrap();
        assert_eq!(e.eval_with(&[("t", 1000.0)]).unwrap(), 201.5);
        assert!(parse("1.2.3").is_err());
    }

    #[test]
    fn trailing_garbage() {
        assert!(matches!(
            parse("t x"),
            Err(ExprError::Syntax { offset: 2, .. })
        ));
        assert!(matches!(parse("(t"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("t $"), Err(ExprError::Syntax { offset: 2, .. })));
    }
}
