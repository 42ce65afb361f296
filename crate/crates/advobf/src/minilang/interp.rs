//! Deterministic interpreter with a step budget.
//!
//! Field reads (`self.<field>`) are valued from a fixed table indexed by
//! the field's order of first occurrence in the function, so renaming a
//! field never changes program behaviour.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::{BinOpKind, Builtin, Expr, Function, Stmt};

/// Runtime value. Equality is reflexive within each variant and false
/// across variants; ordering and arithmetic exist for integers only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => f.write_str(if *b { "True" } else { "False" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpError {
    #[error("argument count mismatch: function takes {expected}, got {got}")]
    ArgCount { expected: usize, got: usize },
    #[error("unbound name {0:?}")]
    UnboundName(String),
    #[error("type mismatch in `{context}`")]
    TypeMismatch { context: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("missing return value")]
    NoReturn,
    #[error("fuel exhausted")]
    FuelExhausted,
}

/// Values handed to `self.<field>` reads, by order of first occurrence.
const FIELD_VALUES: &[i64] = &[17, 29, 41, 53, 67, 79, 97, 113];

struct Interp {
    env: HashMap<String, Value>,
    fields: HashMap<String, i64>,
    trace: Vec<String>,
    fuel: u64,
}

impl Interp {
    fn burn(&mut self) -> Result<(), InterpError> {
        if self.fuel == 0 {
            return Err(InterpError::FuelExhausted);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, InterpError> {
        self.burn()?;
        match expr {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Var(name) => self
                .env
                .get(name.as_str())
                .cloned()
                .ok_or_else(|| InterpError::UnboundName(name.clone())),
            Expr::Field(name) => self
                .fields
                .get(name.as_str())
                .map(|v| Value::Int(*v))
                .ok_or_else(|| InterpError::UnboundName(format!("self.{name}"))),
            Expr::BinOp { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                eval_binop(*op, l, r)
            }
            Expr::Call { callee, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a)?);
                }
                eval_builtin(*callee, &vals)
            }
        }
    }

    fn exec(&mut self, stmt: &Stmt) -> Result<Option<Value>, InterpError> {
        self.burn()?;
        match stmt {
            Stmt::Assign { target, value } => {
                let v = self.eval(value)?;
                self.env.insert(target.clone(), v);
                Ok(None)
            }
            Stmt::Return(e) => Ok(Some(self.eval(e)?)),
            Stmt::Print(e) => {
                let v = self.eval(e)?;
                self.trace.push(v.to_string());
                Ok(None)
            }
            Stmt::ExprStmt(e) => {
                self.eval(e)?;
                Ok(None)
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => match self.eval(cond)? {
                Value::Bool(true) => self.exec(then_branch),
                Value::Bool(false) => match else_branch {
                    Some(e) => self.exec(e),
                    None => Ok(None),
                },
                _ => Err(InterpError::TypeMismatch {
                    context: "if condition".into(),
                }),
            },
        }
    }
}

fn int_pair(l: &Value, r: &Value, context: &str) -> Result<(i64, i64), InterpError> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
        _ => Err(InterpError::TypeMismatch {
            context: context.into(),
        }),
    }
}

fn eval_binop(op: BinOpKind, l: Value, r: Value) -> Result<Value, InterpError> {
    match op {
        BinOpKind::Eq => Ok(Value::Bool(l == r)),
        BinOpKind::Ne => Ok(Value::Bool(l != r)),
        BinOpKind::Lt => {
            let (a, b) = int_pair(&l, &r, "<")?;
            Ok(Value::Bool(a < b))
        }
        BinOpKind::Gt => {
            let (a, b) = int_pair(&l, &r, ">")?;
            Ok(Value::Bool(a > b))
        }
        BinOpKind::Add => {
            let (a, b) = int_pair(&l, &r, "+")?;
            a.checked_add(b).map(Value::Int).ok_or(InterpError::Overflow)
        }
        BinOpKind::Sub => {
            let (a, b) = int_pair(&l, &r, "-")?;
            a.checked_sub(b).map(Value::Int).ok_or(InterpError::Overflow)
        }
        BinOpKind::Mul => {
            let (a, b) = int_pair(&l, &r, "*")?;
            a.checked_mul(b).map(Value::Int).ok_or(InterpError::Overflow)
        }
        BinOpKind::FloorDiv => {
            let (a, b) = int_pair(&l, &r, "//")?;
            if b == 0 {
                return Err(InterpError::DivisionByZero);
            }
            Ok(Value::Int(a.div_euclid(b)))
        }
    }
}

fn eval_builtin(callee: Builtin, args: &[Value]) -> Result<Value, InterpError> {
    let ints: Option<Vec<i64>> = args
        .iter()
        .map(|v| match v {
            Value::Int(i) => Some(*i),
            _ => None,
        })
        .collect();
    let ints = ints.ok_or_else(|| InterpError::TypeMismatch {
        context: callee.name().into(),
    })?;
    let v = match callee {
        Builtin::Abs => ints[0].checked_abs().ok_or(InterpError::Overflow)?,
        Builtin::Max => ints[0].max(ints[1]),
        Builtin::Min => ints[0].min(ints[1]),
    };
    Ok(Value::Int(v))
}

/// Run `func` on integer arguments. Returns the function's return value and
/// the print trace. `fuel` bounds the number of evaluation steps.
pub fn interpret(
    func: &Function,
    args: &[i64],
    fuel: u64,
) -> Result<(Value, Vec<String>), InterpError> {
    if args.len() != func.params.len() {
        return Err(InterpError::ArgCount {
            expected: func.params.len(),
            got: args.len(),
        });
    }
    let mut env = HashMap::new();
    for (p, a) in func.params.iter().zip(args) {
        env.insert(p.clone(), Value::Int(*a));
    }
    // field_names is ordered by first occurrence, so the j-th field keeps
    // its value under renaming
    let mut fields = HashMap::new();
    for (j, name) in func.field_names().into_iter().enumerate() {
        fields.insert(name, FIELD_VALUES[j % FIELD_VALUES.len()]);
    }
    let mut interp = Interp {
        env,
        fields,
        trace: Vec::new(),
        fuel,
    };
    for stmt in &func.body {
        if let Some(v) = interp.exec(stmt)? {
            return Ok((v, interp.trace));
        }
    }
    Err(InterpError::NoReturn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parser::parse;
    use crate::minilang::token::tokenize;

    fn run(src: &str, args: &[i64]) -> Result<(Value, Vec<String>), InterpError> {
        interpret(&parse(&tokenize(src).unwrap()).unwrap(), args, 10_000)
    }

    #[test]
    fn increment() {
        let (v, trace) = run("def f(p): return p + 1", &[4]).unwrap();
        assert_eq!(v, Value::Int(5));
        assert!(trace.is_empty());
    }

    #[test]
    fn print_trace_collected() {
        let (v, trace) = run("def f(p): print(\"a\"); return p", &[0]).unwrap();
        assert_eq!(v, Value::Int(0));
        assert_eq!(trace, vec!["a".to_string()]);
    }

    #[test]
    fn field_value_is_occurrence_indexed() {
        let (v1, _) = run("def f(p): return self.x + p", &[1]).unwrap();
        let (v2, _) = run("def f(p): return self.whatever + p", &[1]).unwrap();
        assert_eq!(v1, v2, "field value must not depend on the field's name");
        assert_eq!(v1, Value::Int(18));
    }

    #[test]
    fn floor_division_matches_python() {
        let (v, _) = run("def f(p): return p // 2", &[-7]).unwrap();
        assert_eq!(v, Value::Int(-4));
        assert_eq!(run("def f(p): return p // 0", &[1]), Err(InterpError::DivisionByZero));
    }

    #[test]
    fn branches() {
        let src = "def f(p): if p > 3: return 1 else: return 0";
        assert_eq!(run(src, &[5]).unwrap().0, Value::Int(1));
        assert_eq!(run(src, &[2]).unwrap().0, Value::Int(0));
    }

    #[test]
    fn fuel_exhaustion() {
        assert_eq!(
            interpret(
                &parse(&tokenize("def f(p): return p + 1").unwrap()).unwrap(),
                &[1],
                2
            ),
            Err(InterpError::FuelExhausted)
        );
    }

    #[test]
    fn arg_count_checked() {
        assert_eq!(
            run("def f(p): return p", &[1, 2]),
            Err(InterpError::ArgCount {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn cross_type_equality_is_false() {
        let (v, _) = run("def f(p): return 1 == True", &[0]).unwrap();
        assert_eq!(v, Value::Bool(false));
    }
}
