//! Recursive-descent parser from tokens to [`Function`].
//!
//! The grammar needs no newline tokens: a statement ends where the next
//! token can no longer extend an expression, and `;` between statements is
//! accepted and skipped.

use thiserror::Error;

use super::ast::{BinOpKind, Builtin, Expr, Function, Stmt};
use super::token::{Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("parse error at token {index}: expected {expected}, found {found:?}")]
    Unexpected {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("parse error at token {index}: unexpected end of input, expected {expected}")]
    Eof { index: usize, expected: String },
    #[error("unbound name {name:?} at token {index}")]
    UnboundName { index: usize, name: String },
    #[error("unknown callee {name:?} at token {index}: only abs, max, min may be called")]
    UnknownCallee { index: usize, name: String },
    #[error("{callee} takes {expected} argument(s), got {got} (token {index})")]
    Arity {
        index: usize,
        callee: String,
        expected: usize,
        got: usize,
    },
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(t) => ParseError::Unexpected {
                index: self.pos,
                expected: expected.to_string(),
                found: t.text.clone(),
            },
            None => ParseError::Eof {
                index: self.pos,
                expected: expected.to_string(),
            },
        }
    }

    fn expect_text(&mut self, text: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.text == text => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{text}`"))),
        }
    }

    fn expect_identifier(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn eat_text(&mut self, text: &str) -> bool {
        if self.peek().is_some_and(|t| t.text == text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_unit(&mut self) -> Result<Function, ParseError> {
        self.expect_text("def")?;
        let name = self.expect_identifier("function name")?;
        self.expect_text("(")?;
        let mut params = Vec::new();
        if !self.peek().is_some_and(|t| t.text == ")") {
            loop {
                params.push(self.expect_identifier("parameter name or `)`")?);
                if !self.eat_text(",") {
                    break;
                }
            }
        }
        self.expect_text(")")?;
        self.expect_text(":")?;
        let mut body = Vec::new();
        while self.pos < self.tokens.len() {
            self.eat_text(";");
            if self.pos >= self.tokens.len() {
                break;
            }
            body.push(self.parse_stmt()?);
        }
        if body.is_empty() {
            return Err(self.unexpected("at least one statement"));
        }
        Ok(Function { name, params, body })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_text("if") {
            let cond = self.parse_expr()?;
            self.expect_text(":")?;
            let then_branch = Box::new(self.parse_simple_stmt()?);
            let else_branch = if self.eat_text("else") {
                self.expect_text(":")?;
                Some(Box::new(self.parse_simple_stmt()?))
            } else {
                None
            };
            Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
            })
        } else {
            self.parse_simple_stmt()
        }
    }

    fn parse_simple_stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_text("return") {
            return Ok(Stmt::Return(self.parse_expr()?));
        }
        if self.eat_text("print") {
            self.expect_text("(")?;
            let e = self.parse_expr()?;
            self.expect_text(")")?;
            return Ok(Stmt::Print(e));
        }
        // assignment needs two-token lookahead: IDENT `=`
        if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
            && self.tokens.get(self.pos + 1).is_some_and(|t| t.text == "=")
        {
            let target = self.expect_identifier("assignment target")?;
            self.pos += 1; // `=`
            let value = self.parse_expr()?;
            return Ok(Stmt::Assign { target, value });
        }
        Ok(Stmt::ExprStmt(self.parse_expr()?))
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_additive()?;
        let op = match self.peek().map(|t| t.text.as_str()) {
            Some("==") => Some(BinOpKind::Eq),
            Some("!=") => Some(BinOpKind::Ne),
            Some("<") => Some(BinOpKind::Lt),
            Some(">") => Some(BinOpKind::Gt),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let rhs = self.parse_additive()?;
            Ok(Expr::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            })
        } else {
            Ok(lhs)
        }
    }

    fn parse_additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = match self.peek().map(|t| t.text.as_str()) {
                Some("+") => BinOpKind::Add,
                Some("-") => BinOpKind::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_multiplicative()?;
            lhs = Expr::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_atom()?;
        loop {
            let op = match self.peek().map(|t| t.text.as_str()) {
                Some("*") => BinOpKind::Mul,
                Some("//") => BinOpKind::FloorDiv,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_atom()?;
            lhs = Expr::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let tok = match self.peek() {
            Some(t) => t,
            None => return Err(self.unexpected("expression")),
        };
        match tok.kind {
            TokenKind::IntLiteral => {
                self.pos += 1;
                let v: i64 = tok.text.parse().map_err(|_| ParseError::Unexpected {
                    index: self.pos - 1,
                    expected: "integer literal".into(),
                    found: tok.text.clone(),
                })?;
                Ok(Expr::Int(v))
            }
            TokenKind::StringLiteral => {
                self.pos += 1;
                Ok(Expr::Str(tok.string_content().to_string()))
            }
            TokenKind::BoolLiteral => {
                self.pos += 1;
                Ok(Expr::Bool(tok.text == "True"))
            }
            TokenKind::Keyword if tok.text == "self" => {
                self.pos += 1;
                self.expect_text(".")?;
                match self.peek() {
                    Some(t) if t.kind == TokenKind::FieldName => {
                        self.pos += 1;
                        Ok(Expr::Field(t.text.clone()))
                    }
                    _ => Err(self.unexpected("field name")),
                }
            }
            TokenKind::Identifier => {
                let name = tok.text.clone();
                let index = self.pos;
                self.pos += 1;
                if self.peek().is_some_and(|t| t.text == "(") {
                    let callee = Builtin::from_name(&name)
                        .ok_or(ParseError::UnknownCallee { index, name })?;
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.peek().is_some_and(|t| t.text == ")") {
                        loop {
                            args.push(self.parse_expr()?);
                            if !self.eat_text(",") {
                                break;
                            }
                        }
                    }
                    self.expect_text(")")?;
                    if args.len() != callee.arity() {
                        return Err(ParseError::Arity {
                            index,
                            callee: callee.name().to_string(),
                            expected: callee.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call { callee, args })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            TokenKind::Punct if tok.text == "(" => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect_text(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Check that every `Var` read resolves to a parameter or an assignment in
/// an earlier (or enclosing) statement.
fn check_scope(func: &Function) -> Result<(), ParseError> {
    let mut bound: Vec<&str> = func.params.iter().map(|s| s.as_str()).collect();
    fn check_expr<'a>(e: &'a Expr, bound: &[&'a str]) -> Result<(), ParseError> {
        match e {
            Expr::Var(n) => {
                if bound.contains(&n.as_str()) {
                    Ok(())
                } else {
                    Err(ParseError::UnboundName {
                        index: 0,
                        name: n.clone(),
                    })
                }
            }
            Expr::BinOp { lhs, rhs, .. } => {
                check_expr(lhs, bound)?;
                check_expr(rhs, bound)
            }
            Expr::Call { args, .. } => {
                for a in args {
                    check_expr(a, bound)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
    fn check_simple<'a>(s: &'a Stmt, bound: &mut Vec<&'a str>) -> Result<(), ParseError> {
        match s {
            Stmt::Assign { target, value } => {
                check_expr(value, bound)?;
                if !bound.contains(&target.as_str()) {
                    bound.push(target);
                }
                Ok(())
            }
            Stmt::Return(e) | Stmt::Print(e) | Stmt::ExprStmt(e) => check_expr(e, bound),
            Stmt::If { .. } => unreachable!(),
        }
    }
    for stmt in &func.body {
        match stmt {
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                check_expr(cond, &bound)?;
                check_simple(then_branch, &mut bound)?;
                if let Some(e) = else_branch {
                    check_simple(e, &mut bound)?;
                }
            }
            other => check_simple(other, &mut bound)?,
        }
    }
    Ok(())
}

/// Parse a full token stream into a function unit.
pub fn parse(tokens: &[Token]) -> Result<Function, ParseError> {
    let mut p = Parser { tokens, pos: 0 };
    let func = p.parse_unit()?;
    check_scope(&func)?;
    Ok(func)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::token::tokenize;

    fn parse_src(src: &str) -> Result<Function, ParseError> {
        parse(&tokenize(src).unwrap())
    }

    #[test]
    fn minimal_function() {
        let f = parse_src("def f(p): return p").unwrap();
        assert_eq!(f.name, "f");
        assert_eq!(f.params, vec!["p"]);
        assert_eq!(f.body, vec![Stmt::Return(Expr::Var("p".into()))]);
    }

    #[test]
    fn malformed_header_reports_token_index() {
        match parse_src("def f(: return") {
            Err(ParseError::Unexpected { index, .. }) => assert_eq!(index, 3),
            other => panic!("expected Unexpected at 3, got {other:?}"),
        }
    }

    #[test]
    fn statement_boundaries_without_separators() {
        let f = parse_src("def f(p):\n    r = p - 5\n    return r + 5\n").unwrap();
        assert_eq!(f.body.len(), 2);
        let g = parse_src("def f(p): r = p - 5; return r + 5").unwrap();
        assert_eq!(f.body, g.body);
    }

    #[test]
    fn inline_if_with_else() {
        let f = parse_src("def f(p): if p > 3: return True else: return False").unwrap();
        assert!(matches!(
            f.body[0],
            Stmt::If {
                else_branch: Some(_),
                ..
            }
        ));
    }

    #[test]
    fn unbound_variable_rejected() {
        assert!(matches!(
            parse_src("def f(p): return q"),
            Err(ParseError::UnboundName { name, .. }) if name == "q"
        ));
    }

    #[test]
    fn non_builtin_call_rejected() {
        assert!(matches!(
            parse_src("def f(p): return g(p)"),
            Err(ParseError::UnknownCallee { .. })
        ));
        assert!(matches!(
            parse_src("def f(p): return abs(p, p)"),
            Err(ParseError::Arity { .. })
        ));
    }

    #[test]
    fn unparse_parse_round_trip() {
        let src = "def f(p, q):\n    r = max(p, q) - 5\n    if r > 0: print(\"hi\")\n    return r * 2\n";
        let f = parse_src(src).unwrap();
        let rendered = crate::minilang::ast::unparse(&f);
        let f2 = parse_src(&rendered).unwrap();
        assert_eq!(f, f2);
        assert_eq!(rendered, crate::minilang::ast::unparse(&f2));
    }
}
