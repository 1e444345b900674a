use std::collections::HashMap;

use super::{Expr, Func};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound symbol '{0}'")]
    Unbound(String),
    #[error("symbol '{0}' bound more than once")]
    Rebound(String),
    #[error("domain error: {op} at {value}")]
    Domain { op: &'static str, value: f64 },
}

/// Symbol name to value map; each symbol may be bound once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    values: HashMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: impl Into<String>, value: f64) -> Result<(), EvalError> {
        let name = name.into();
        if self.values.contains_key(&name) {
            return Err(EvalError::Rebound(name));
        }
        self.values.insert(name, value);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parses `name=value` pairs separated by commas.
    pub fn parse_list(text: &str) -> Result<Bindings, String> {
        let mut out = Bindings::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| format!("expected name=value, got '{item}'"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("'{}' is not a number", value.trim()))?;
            out.bind(name.trim(), value).map_err(|e| e.to_string())?;
        }
        Ok(out)
    }
}

impl FromIterator<(String, f64)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        Bindings { values: iter.into_iter().collect() }
    }
}

fn div(a: f64, b: f64) -> Result<f64, EvalError> {
    if b == 0.0 {
        return Err(EvalError::Domain { op: "division by zero", value: a });
    }
    Ok(a / b)
}

fn call(f: Func, x: f64) -> Result<f64, EvalError> {
    f.apply(x).ok_or(EvalError::Domain { op: f.name(), value: x })
}

fn pow(b: f64, e: f64) -> Result<f64, EvalError> {
    if b == 0.0 && e < 0.0 {
        return Err(EvalError::Domain { op: "division by zero", value: b });
    }
    let v = if e.fract() == 0.0 && e.abs() < i32::MAX as f64 { b.powi(e as i32) } else { b.powf(e) };
    if v.is_nan() {
        return Err(EvalError::Domain { op: "pow", value: b });
    }
    Ok(v)
}

/// Tree-walking evaluation.
pub fn evaluate(e: &Expr, b: &Bindings) -> Result<f64, EvalError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Sym(s) => b.get(s).ok_or_else(|| EvalError::Unbound(s.clone())),
        Expr::Sum(xs) => xs.iter().try_fold(0.0, |acc, x| Ok(acc + evaluate(x, b)?)),
        Expr::Product(xs) => xs.iter().try_fold(1.0, |acc, x| Ok(acc * evaluate(x, b)?)),
        Expr::Neg(x) => Ok(-evaluate(x, b)?),
        Expr::Quot(n, d) => div(evaluate(n, b)?, evaluate(d, b)?),
        Expr::Pow(base, ex) => pow(evaluate(base, b)?, evaluate(ex, b)?),
        Expr::Call(f, x) => call(*f, evaluate(x, b)?),
    }
}

#[derive(Clone, Debug)]
enum Op {
    Push(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Neg,
    Div,
    Pow,
    PowI(i32),
    Call(Func),
}

/// Postfix program for an expression with symbols resolved to slot indices.
///
/// Hot paths (Newton iterations, integrators, nested finite differences)
/// evaluate the same expressions millions of times; resolving names once
/// keeps that cheap.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    depth: usize,
    constant: Option<f64>,
}

impl CompiledExpr {
    /// Compiles `e`, mapping each symbol through `slot`.
    pub fn compile(
        e: &Expr,
        slot: &dyn Fn(&str) -> Option<usize>,
    ) -> Result<CompiledExpr, EvalError> {
        let mut ops = Vec::new();
        emit(e, slot, &mut ops)?;
        let depth = max_depth(&ops);
        Ok(CompiledExpr { constant: e.as_const(), ops, depth })
    }

    /// Compiles against an ordered list of slot names.
    pub fn compile_with_names(e: &Expr, names: &[String]) -> Result<CompiledExpr, EvalError> {
        let index: HashMap<&str, usize> =
            names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        Self::compile(e, &|s| index.get(s).copied())
    }

    /// Value when the expression is a literal constant (e.g. a zero partial).
    pub fn constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64, EvalError> {
        if let Some(c) = self.constant {
            return Ok(c);
        }
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Push(c) => stack.push(c),
                Op::Load(i) => stack.push(slots[i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let p = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(p);
                }
                Op::Neg => {
                    let top = stack.last_mut().unwrap();
                    *top = -*top;
                }
                Op::Div => {
                    let d = stack.pop().unwrap();
                    let n = stack.pop().unwrap();
                    stack.push(div(n, d)?);
                }
                Op::Pow => {
                    let e = stack.pop().unwrap();
                    let b = stack.pop().unwrap();
                    stack.push(pow(b, e)?);
                }
                Op::PowI(k) => {
                    let b = stack.pop().unwrap();
                    if b == 0.0 && k < 0 {
                        return Err(EvalError::Domain { op: "division by zero", value: b });
                    }
                    stack.push(b.powi(k));
                }
                Op::Call(f) => {
                    let x = stack.pop().unwrap();
                    stack.push(call(f, x)?);
                }
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }
}

fn emit(
    e: &Expr,
    slot: &dyn Fn(&str) -> Option<usize>,
    ops: &mut Vec<Op>,
) -> Result<(), EvalError> {
    match e {
        Expr::Const(c) => ops.push(Op::Push(*c)),
        Expr::Sym(s) => ops.push(Op::Load(slot(s).ok_or_else(|| EvalError::Unbound(s.clone()))?)),
        Expr::Sum(xs) | Expr::Product(xs) => {
            for x in xs {
                emit(x, slot, ops)?;
            }
            let n = xs.len();
            ops.push(match e {
                Expr::Sum(_) => Op::Add(n),
                _ => Op::Mul(n),
            });
        }
        Expr::Neg(x) => {
            emit(x, slot, ops)?;
            ops.push(Op::Neg);
        }
        Expr::Quot(a, b) => {
            emit(a, slot, ops)?;
            emit(b, slot, ops)?;
            ops.push(Op::Div);
        }
        Expr::Pow(a, b) => {
            emit(a, slot, ops)?;
            match b.as_const() {
                Some(k) if k.fract() == 0.0 && k.abs() <= 64.0 => ops.push(Op::PowI(k as i32)),
                _ => {
                    emit(b, slot, ops)?;
                    ops.push(Op::Pow);
                }
            }
        }
        Expr::Call(f, x) => {
            emit(x, slot, ops)?;
            ops.push(Op::Call(*f));
        }
    }
    Ok(())
}

fn max_depth(ops: &[Op]) -> usize {
    let (mut depth, mut max) = (0usize, 0usize);
    for op in ops {
        match op {
            Op::Push(_) | Op::Load(_) => depth += 1,
            Op::Add(n) | Op::Mul(n) => depth = depth + 1 - n,
            Op::Div | Op::Pow => depth -= 1,
            Op::Neg | Op::PowI(_) | Op::Call(_) => {}
        }
        max = max.max(depth);
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn eval_text(text: &str, b: &Bindings) -> Result<f64, EvalError> {
        evaluate(&parse_expression(text).unwrap(), b)
    }

    #[test]
    fn kinetic_energy() {
        let b = Bindings::new().with("m", 2.0).with("v", 3.0);
        assert_eq!(eval_text("m*v^2/2", &b).unwrap(), 9.0);
    }

    #[test]
    fn log_of_zero_ratio_is_a_domain_error() {
        let b = Bindings::new().with("p", 1.0).with("x", 0.0);
        assert!(matches!(eval_text("log(p/x)", &b), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn exp_identity() {
        let b = Bindings::new().with("k", 1.0).with("v", 0.0);
        assert_eq!(eval_text("exp(k*v)", &b).unwrap(), 1.0);
    }

    #[test]
    fn unbound_symbol_is_named() {
        let err = eval_text("x + y", &Bindings::new().with("x", 1.0)).unwrap_err();
        assert_eq!(err, EvalError::Unbound("y".into()));
    }

    #[test]
    fn rebinding_is_rejected() {
        let mut b = Bindings::new();
        b.bind("x", 1.0).unwrap();
        assert_eq!(b.bind("x", 2.0), Err(EvalError::Rebound("x".into())));
        assert!(Bindings::parse_list("x=1, x=2").is_err());
        let b = Bindings::parse_list("x0=0, p_x=3,p_z=-4").unwrap();
        assert_eq!(b.get("p_z"), Some(-4.0));
    }

    #[test]
    fn domain_errors() {
        let b = Bindings::new().with("x", -1.0);
        assert!(eval_text("sqrt(x)", &b).is_err());
        assert!(eval_text("1/(x+1)", &b).is_err());
        assert!(eval_text("x^0.5", &b).is_err());
        assert_eq!(eval_text("x^3", &b).unwrap(), -1.0);
    }

    #[test]
    fn compiled_matches_tree_walk() {
        let e = parse_expression("x*exp(k*d(x)) - sin(x^2)/(1+k) + (x^2)^1.5").unwrap();
        let names: Vec<String> = ["x", "d(x)", "k"].iter().map(|s| s.to_string()).collect();
        let c = CompiledExpr::compile_with_names(&e, &names).unwrap();
        let slots = [0.7, -0.3, 1.3];
        let b = Bindings::new().with("x", 0.7).with("d(x)", -0.3).with("k", 1.3);
        assert_eq!(c.eval(&slots).unwrap(), evaluate(&e, &b).unwrap());
        let missing = CompiledExpr::compile_with_names(&e, &names[..1]).unwrap_err();
        assert_eq!(missing, EvalError::Unbound("k".into()));
    }
}
