//! Materialize a discrete selection into perturbed source text.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{unparse, BinOpKind, Expr, Function, Stmt};
use super::sites::{SiteMap, SiteTarget, TransformKind};
use super::vocab::Vocabulary;

/// A discrete choice: for each selected site, the vocabulary id to use.
pub type Selection = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IllegalSelection {
    #[error("selection references unknown site {site}")]
    UnknownSite { site: usize },
    #[error("token {token:?} is not a legal candidate for site {site}")]
    MaskViolation { site: usize, token: String },
    #[error("rename token {token:?} chosen for more than one site")]
    NameCollision { token: String },
    #[error("site {site} selected more than once")]
    DuplicateSite { site: usize },
}

fn expand_bools(expr: &Expr, counter: &mut usize, plan: &HashMap<usize, String>) -> Expr {
    match expr {
        Expr::Bool(v) => {
            let occurrence = *counter;
            *counter += 1;
            match plan.get(&occurrence) {
                Some(word) => {
                    let atom = if word.bytes().all(|b| b.is_ascii_digit()) {
                        Expr::Int(word.parse().expect("digit token fits i64"))
                    } else {
                        Expr::Var(word.clone())
                    };
                    // reflexive comparison: True -> tok == tok, False -> tok != tok
                    Expr::BinOp {
                        op: if *v { BinOpKind::Eq } else { BinOpKind::Ne },
                        lhs: Box::new(atom.clone()),
                        rhs: Box::new(atom),
                    }
                }
                None => expr.clone(),
            }
        }
        Expr::BinOp { op, lhs, rhs } => {
            let lhs = expand_bools(lhs, counter, plan);
            let rhs = expand_bools(rhs, counter, plan);
            Expr::BinOp {
                op: *op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            }
        }
        Expr::Call { callee, args } => Expr::Call {
            callee: *callee,
            args: args
                .iter()
                .map(|a| expand_bools(a, counter, plan))
                .collect(),
        },
        other => other.clone(),
    }
}

fn expand_bools_stmt(stmt: &Stmt, counter: &mut usize, plan: &HashMap<usize, String>) -> Stmt {
    match stmt {
        Stmt::Assign { target, value } => Stmt::Assign {
            target: target.clone(),
            value: expand_bools(value, counter, plan),
        },
        Stmt::Return(e) => Stmt::Return(expand_bools(e, counter, plan)),
        Stmt::Print(e) => Stmt::Print(expand_bools(e, counter, plan)),
        Stmt::ExprStmt(e) => Stmt::ExprStmt(expand_bools(e, counter, plan)),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => Stmt::If {
            cond: expand_bools(cond, counter, plan),
            then_branch: Box::new(expand_bools_stmt(then_branch, counter, plan)),
            else_branch: else_branch
                .as_ref()
                .map(|e| Box::new(expand_bools_stmt(e, counter, plan))),
        },
    }
}

fn rename_expr(expr: &Expr, renames: &HashMap<String, String>) -> Expr {
    match expr {
        Expr::Var(n) => Expr::Var(renames.get(n).cloned().unwrap_or_else(|| n.clone())),
        Expr::Field(n) => Expr::Field(renames.get(n).cloned().unwrap_or_else(|| n.clone())),
        Expr::BinOp { op, lhs, rhs } => Expr::BinOp {
            op: *op,
            lhs: Box::new(rename_expr(lhs, renames)),
            rhs: Box::new(rename_expr(rhs, renames)),
        },
        Expr::Call { callee, args } => Expr::Call {
            callee: *callee,
            args: args.iter().map(|a| rename_expr(a, renames)).collect(),
        },
        other => other.clone(),
    }
}

fn rename_stmt(stmt: &Stmt, renames: &HashMap<String, String>) -> Stmt {
    match stmt {
        Stmt::Assign { target, value } => Stmt::Assign {
            target: renames.get(target).cloned().unwrap_or_else(|| target.clone()),
            value: rename_expr(value, renames),
        },
        Stmt::Return(e) => Stmt::Return(rename_expr(e, renames)),
        Stmt::Print(e) => Stmt::Print(rename_expr(e, renames)),
        Stmt::ExprStmt(e) => Stmt::ExprStmt(rename_expr(e, renames)),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
        } => Stmt::If {
            cond: rename_expr(cond, renames),
            then_branch: Box::new(rename_stmt(then_branch, renames)),
            else_branch: else_branch
                .as_ref()
                .map(|e| Box::new(rename_stmt(e, renames))),
        },
    }
}

fn print_stmt(word: &str) -> Stmt {
    Stmt::Print(Expr::Str(word.to_string()))
}

fn dead_code_stmt(word: &str) -> Stmt {
    // the guard compares a string to itself with !=, so it is statically
    // false for any token
    Stmt::If {
        cond: Expr::BinOp {
            op: BinOpKind::Ne,
            lhs: Box::new(Expr::Str(word.to_string())),
            rhs: Box::new(Expr::Str(word.to_string())),
        },
        then_branch: Box::new(Stmt::Assign {
            target: "_dead".to_string(),
            value: Expr::Int(1),
        }),
        else_branch: None,
    }
}

/// Apply `selection` to the program and return the perturbed AST.
///
/// Boolean literals are expanded before renames run, so an expansion that
/// picked a variable which another site renames stays consistent (and
/// bound) in the output.
pub fn materialize_ast(
    func: &Function,
    sitemap: &SiteMap,
    selection: &Selection,
    vocab: &Vocabulary,
) -> Result<Function, IllegalSelection> {
    let mut seen_sites: Vec<usize> = Vec::new();
    let mut renames: HashMap<String, String> = HashMap::new();
    let mut bool_plan: HashMap<usize, String> = HashMap::new();
    let mut inserts: Vec<(usize, TransformKind, String)> = Vec::new();
    let mut used_rename_tokens: Vec<usize> = Vec::new();

    for &(site_id, token_id) in selection {
        let site = sitemap
            .site(site_id)
            .ok_or(IllegalSelection::UnknownSite { site: site_id })?;
        if seen_sites.contains(&site_id) {
            return Err(IllegalSelection::DuplicateSite { site: site_id });
        }
        seen_sites.push(site_id);
        if !site.allows(token_id) {
            return Err(IllegalSelection::MaskViolation {
                site: site_id,
                token: vocab.token(token_id).to_string(),
            });
        }
        let word = vocab.token(token_id).to_string();
        match &site.target {
            SiteTarget::Name(old) => {
                if used_rename_tokens.contains(&token_id) {
                    return Err(IllegalSelection::NameCollision { token: word });
                }
                used_rename_tokens.push(token_id);
                renames.insert(old.clone(), word);
            }
            SiteTarget::BoolOccurrence { occurrence, .. } => {
                bool_plan.insert(*occurrence, word);
            }
            SiteTarget::Boundary(boundary) => {
                inserts.push((*boundary, site.kind, word));
            }
        }
    }

    // 1. bool expansions
    let mut counter = 0usize;
    let mut body: Vec<Stmt> = func
        .body
        .iter()
        .map(|s| expand_bools_stmt(s, &mut counter, &bool_plan))
        .collect();

    // 2. inserts, stable per boundary: prints before dead code
    inserts.sort_by_key(|(b, kind, _)| (*b, *kind as usize));
    let mut new_body = Vec::with_capacity(body.len() + inserts.len());
    for (i, stmt) in body.drain(..).enumerate() {
        for (b, kind, word) in &inserts {
            if *b == i {
                new_body.push(match kind {
                    TransformKind::InsertPrint => print_stmt(word),
                    TransformKind::InsertDeadCode => dead_code_stmt(word),
                    _ => unreachable!("boundary targets are insert sites"),
                });
            }
        }
        new_body.push(stmt);
    }
    let last = func.body.len();
    for (b, kind, word) in &inserts {
        if *b == last {
            new_body.push(match kind {
                TransformKind::InsertPrint => print_stmt(word),
                TransformKind::InsertDeadCode => dead_code_stmt(word),
                _ => unreachable!(),
            });
        }
    }

    // 3. renames over the whole tree
    let params = func
        .params
        .iter()
        .map(|p| renames.get(p).cloned().unwrap_or_else(|| p.clone()))
        .collect();
    let body = new_body.iter().map(|s| rename_stmt(s, &renames)).collect();

    Ok(Function {
        name: func.name.clone(),
        params,
        body,
    })
}

/// Apply `selection` and render the perturbed source.
pub fn materialize(
    func: &Function,
    sitemap: &SiteMap,
    selection: &Selection,
    vocab: &Vocabulary,
) -> Result<String, IllegalSelection> {
    materialize_ast(func, sitemap, selection, vocab).map(|f| unparse(&f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::interp::interpret;
    use crate::minilang::parser::parse;
    use crate::minilang::sites::{encode_with_sites, TransformSet};
    use crate::minilang::token::tokenize;
    use crate::minilang::vocab::Vocabulary;

    fn func(src: &str) -> Function {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn test_vocab() -> Vocabulary {
        Vocabulary::new([
            "def", ":", "return", "if", "else", "print", "self", "_dead", "=", "==", "!=", "<",
            ">", "+", "-", "*", "//", "True", "False", "1", "5", "p", "q", "r", "xyz", "world",
            "foo", "bar",
        ])
    }

    #[test]
    fn rename_is_consistent_across_occurrences() {
        let v = test_vocab();
        let f = func("def f(p): r = p - 5; return r");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        // site 1 is the local r
        let sel = vec![(1, v.id("xyz").unwrap())];
        let out = materialize(&f, &enc.sitemap, &sel, &v).unwrap();
        assert_eq!(out, "def f(p):\n    xyz = p - 5\n    return xyz\n");
    }

    #[test]
    fn insert_print_lands_at_its_boundary() {
        let v = test_vocab();
        let f = func("def f(p): r = p - 5; return r");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        let site = enc
            .sitemap
            .sites
            .iter()
            .find(|s| {
                s.kind == TransformKind::InsertPrint
                    && s.target == crate::minilang::sites::SiteTarget::Boundary(1)
            })
            .unwrap();
        let sel = vec![(site.id, v.id("world").unwrap())];
        let out = materialize(&f, &enc.sitemap, &sel, &v).unwrap();
        assert_eq!(
            out,
            "def f(p):\n    r = p - 5\n    print(\"world\")\n    return r\n"
        );
    }

    #[test]
    fn bool_expansion_preserves_return_values() {
        let v = test_vocab();
        let f = func("def f(p): r = p > 5; if r: return True; return False");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        let site = enc
            .sitemap
            .sites
            .iter()
            .find(|s| s.kind == TransformKind::ReplaceBoolLiteral)
            .unwrap();
        let sel = vec![(site.id, v.id("p").unwrap())];
        let out = materialize(&f, &enc.sitemap, &sel, &v).unwrap();
        assert!(out.contains("p == p"), "{out}");
        let perturbed = func(&out);
        for arg in [-3, 0, 5, 6, 99] {
            let a = interpret(&f, &[arg], 10_000).unwrap().0;
            let b = interpret(&perturbed, &[arg], 10_000).unwrap().0;
            assert_eq!(a, b, "arg {arg}");
        }
    }

    #[test]
    fn dead_code_guard_is_statically_false() {
        let v = test_vocab();
        let f = func("def f(p): return p + 5");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        let site = enc
            .sitemap
            .sites
            .iter()
            .find(|s| s.kind == TransformKind::InsertDeadCode)
            .unwrap();
        let sel = vec![(site.id, v.id("world").unwrap())];
        let out = materialize(&f, &enc.sitemap, &sel, &v).unwrap();
        assert!(out.contains("if \"world\" != \"world\": _dead = 1"), "{out}");
        let perturbed = func(&out);
        for arg in [-7, 0, 13] {
            assert_eq!(
                interpret(&f, &[arg], 10_000).unwrap().0,
                interpret(&perturbed, &[arg], 10_000).unwrap().0
            );
        }
    }

    #[test]
    fn mask_violation_and_collisions_rejected() {
        let v = test_vocab();
        let f = func("def f(p): r = p - 5; return r");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        // renaming r to an existing identifier is a mask violation
        let bad = vec![(1, v.id("p").unwrap())];
        assert!(matches!(
            materialize(&f, &enc.sitemap, &bad, &v),
            Err(IllegalSelection::MaskViolation { .. })
        ));
        // two rename sites must not share a token
        let collide = vec![(0, v.id("xyz").unwrap()), (1, v.id("xyz").unwrap())];
        assert!(matches!(
            materialize(&f, &enc.sitemap, &collide, &v),
            Err(IllegalSelection::NameCollision { .. })
        ));
    }

    #[test]
    fn renamed_bool_expansion_stays_bound() {
        let v = test_vocab();
        let f = func("def f(p): r = p > 5; if r: return True; return False");
        let enc = encode_with_sites(&f, &v, &TransformSet::full());
        let bool_site = enc
            .sitemap
            .sites
            .iter()
            .find(|s| s.kind == TransformKind::ReplaceBoolLiteral)
            .unwrap()
            .id;
        let r_site = enc
            .sitemap
            .sites
            .iter()
            .find(|s| s.target == crate::minilang::sites::SiteTarget::Name("r".into()))
            .unwrap()
            .id;
        // the expansion picks r, which is simultaneously renamed to xyz
        let sel = vec![(bool_site, v.id("r").unwrap()), (r_site, v.id("xyz").unwrap())];
        let out = materialize(&f, &enc.sitemap, &sel, &v).unwrap();
        assert!(out.contains("xyz == xyz"), "{out}");
        let perturbed = func(&out);
        for arg in [2, 9] {
            assert_eq!(
                interpret(&f, &[arg], 10_000).unwrap().0,
                interpret(&perturbed, &[arg], 10_000).unwrap().0
            );
        }
    }
}
