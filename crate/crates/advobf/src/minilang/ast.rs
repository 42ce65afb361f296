//! Abstract syntax for MiniLang: one function definition per unit.

use std::fmt;

/// The callable builtins. All are pure and total on integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Abs,
    Max,
    Min,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "abs" => Some(Builtin::Abs),
            "max" => Some(Builtin::Max),
            "min" => Some(Builtin::Min),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Abs => "abs",
            Builtin::Max => "max",
            Builtin::Min => "min",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Abs => 1,
            Builtin::Max | Builtin::Min => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    FloorDiv,
    Eq,
    Ne,
    Lt,
    Gt,
}

impl BinOpKind {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOpKind::Add => "+",
            BinOpKind::Sub => "-",
            BinOpKind::Mul => "*",
            BinOpKind::FloorDiv => "//",
            BinOpKind::Eq => "==",
            BinOpKind::Ne => "!=",
            BinOpKind::Lt => "<",
            BinOpKind::Gt => ">",
        }
    }

    /// Binding strength: comparisons < additive < multiplicative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOpKind::Eq | BinOpKind::Ne | BinOpKind::Lt | BinOpKind::Gt => 1,
            BinOpKind::Add | BinOpKind::Sub => 2,
            BinOpKind::Mul | BinOpKind::FloorDiv => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    /// `self.<field>` access.
    Field(String),
    Int(i64),
    Str(String),
    Bool(bool),
    BinOp {
        op: BinOpKind,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        callee: Builtin,
        args: Vec<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign { target: String, value: Expr },
    Return(Expr),
    /// Branches are simple (non-`if`) statements written inline.
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    Print(Expr),
    ExprStmt(Expr),
}

/// A parsed program unit: exactly one function definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

impl Function {
    /// Distinct assigned-but-not-parameter names, in order of first
    /// assignment (including assignments inside `if` arms).
    pub fn local_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let visit = |stmt: &Stmt, out: &mut Vec<String>| {
            if let Stmt::Assign { target, .. } = stmt {
                if !self.params.contains(target) && !out.contains(target) {
                    out.push(target.clone());
                }
            }
        };
        for stmt in &self.body {
            visit(stmt, &mut out);
            if let Stmt::If {
                then_branch,
                else_branch,
                ..
            } = stmt
            {
                visit(then_branch, &mut out);
                if let Some(e) = else_branch {
                    visit(e, &mut out);
                }
            }
        }
        out
    }

    /// Distinct `self.<field>` names in order of first occurrence.
    pub fn field_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for stmt in &self.body {
            walk_stmt_exprs(stmt, &mut |e| {
                if let Expr::Field(name) = e {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
            });
        }
        out
    }

    /// Every identifier the program already uses: function name, params,
    /// locals, and fields. Replacement names must avoid all of these.
    pub fn all_identifiers(&self) -> Vec<String> {
        let mut out = vec![self.name.clone()];
        out.extend(self.params.iter().cloned());
        for n in self.local_names() {
            if !out.contains(&n) {
                out.push(n);
            }
        }
        for n in self.field_names() {
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }
}

/// Apply `f` to every expression in the statement, depth-first, in source
/// order.
pub fn walk_stmt_exprs(stmt: &Stmt, f: &mut impl FnMut(&Expr)) {
    match stmt {
        Stmt::Assign { value, .. } => walk_expr(value, f),
        Stmt::Return(e) | Stmt::Print(e) | Stmt::ExprStmt(e) => walk_expr(e, f),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => {
            walk_expr(cond, f);
            walk_stmt_exprs(then_branch, f);
            if let Some(e) = else_branch {
                walk_stmt_exprs(e, f);
            }
        }
    }
}

pub fn walk_expr(expr: &Expr, f: &mut impl FnMut(&Expr)) {
    f(expr);
    match expr {
        Expr::BinOp { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        Expr::Call { args, .. } => {
            for a in args {
                walk_expr(a, f);
            }
        }
        _ => {}
    }
}

fn fmt_expr(e: &Expr, min_prec: u8, out: &mut String) {
    match e {
        Expr::Var(n) => out.push_str(n),
        Expr::Field(n) => {
            out.push_str("self.");
            out.push_str(n);
        }
        Expr::Int(v) => out.push_str(&v.to_string()),
        Expr::Str(s) => {
            out.push('"');
            out.push_str(s);
            out.push('"');
        }
        Expr::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
        Expr::BinOp { op, lhs, rhs } => {
            let prec = op.precedence();
            let parens = prec < min_prec;
            if parens {
                out.push('(');
            }
            fmt_expr(lhs, prec, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            // right operand binds tighter: `a - (b - c)` keeps its parens
            fmt_expr(rhs, prec + 1, out);
            if parens {
                out.push(')');
            }
        }
        Expr::Call { callee, args } => {
            out.push_str(callee.name());
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_expr(a, 0, out);
            }
            out.push(')');
        }
    }
}

fn fmt_simple_stmt(stmt: &Stmt, out: &mut String) {
    match stmt {
        Stmt::Assign { target, value } => {
            out.push_str(target);
            out.push_str(" = ");
            fmt_expr(value, 0, out);
        }
        Stmt::Return(e) => {
            out.push_str("return ");
            fmt_expr(e, 0, out);
        }
        Stmt::Print(e) => {
            out.push_str("print(");
            fmt_expr(e, 0, out);
            out.push(')');
        }
        Stmt::ExprStmt(e) => fmt_expr(e, 0, out),
        Stmt::If { .. } => unreachable!("if arms are simple statements"),
    }
}

fn fmt_stmt(stmt: &Stmt, out: &mut String) {
    match stmt {
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => {
            out.push_str("if ");
            fmt_expr(cond, 0, out);
            out.push_str(": ");
            fmt_simple_stmt(then_branch, out);
            if let Some(e) = else_branch {
                out.push_str(" else: ");
                fmt_simple_stmt(e, out);
            }
        }
        other => fmt_simple_stmt(other, out),
    }
}

/// Render the canonical source form: 4-space indented body, one statement
/// per line, `if` arms inline.
pub fn unparse(func: &Function) -> String {
    let mut out = String::new();
    out.push_str("def ");
    out.push_str(&func.name);
    out.push('(');
    for (i, p) in func.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(p);
    }
    out.push_str("):\n");
    for stmt in &func.body {
        out.push_str("    ");
        fmt_stmt(stmt, &mut out);
        out.push('\n');
    }
    out
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&unparse(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unparse_parenthesizes_by_precedence() {
        let e = Expr::BinOp {
            op: BinOpKind::Mul,
            lhs: Box::new(Expr::BinOp {
                op: BinOpKind::Add,
                lhs: Box::new(Expr::Var("a".into())),
                rhs: Box::new(Expr::Var("b".into())),
            }),
            rhs: Box::new(Expr::Int(2)),
        };
        let mut s = String::new();
        fmt_expr(&e, 0, &mut s);
        assert_eq!(s, "(a + b) * 2");
    }

    #[test]
    fn right_nested_subtraction_keeps_parens() {
        let e = Expr::BinOp {
            op: BinOpKind::Sub,
            lhs: Box::new(Expr::Var("a".into())),
            rhs: Box::new(Expr::BinOp {
                op: BinOpKind::Sub,
                lhs: Box::new(Expr::Var("b".into())),
                rhs: Box::new(Expr::Var("c".into())),
            }),
        };
        let mut s = String::new();
        fmt_expr(&e, 0, &mut s);
        assert_eq!(s, "a - (b - c)");
    }

    #[test]
    fn locals_exclude_params() {
        let f = Function {
            name: "f".into(),
            params: vec!["p".into()],
            body: vec![
                Stmt::Assign {
                    target: "r".into(),
                    value: Expr::Var("p".into()),
                },
                Stmt::Assign {
                    target: "p".into(),
                    value: Expr::Int(1),
                },
                Stmt::Return(Expr::Var("r".into())),
            ],
        };
        assert_eq!(f.local_names(), vec!["r".to_string()]);
        assert_eq!(f.all_identifiers(), vec!["f", "p", "r"]);
    }
}
