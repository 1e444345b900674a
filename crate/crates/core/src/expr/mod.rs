//! Expression trees for Lagrangians, observables and gauge inputs.
//!
//! An [`Expr`] is an immutable tree. The front-end renders the velocity of a
//! coordinate `x` as the flat symbol `d(x)`, so differentiation stays purely
//! syntactic: `d(x)` and `x` are unrelated symbols as far as this module is
//! concerned.

mod diff;
mod eval;
mod parse;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;

pub use diff::differentiate;
pub use eval::{evaluate, Bindings, CompiledExpr, EvalError};
pub use parse::{parse_expression, ParseError};
pub(crate) use parse::{Lexer, TokenKind, TokenStream};
pub use simplify::simplify;

/// Elementary functions understood by the parser, differentiator and evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 5] = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Applies the function, returning `None` outside its real domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        match self {
            Func::Sin => Some(x.sin()),
            Func::Cos => Some(x.cos()),
            Func::Exp => Some(x.exp()),
            Func::Log if x > 0.0 => Some(x.ln()),
            Func::Sqrt if x >= 0.0 => Some(x.sqrt()),
            Func::Log | Func::Sqrt => None,
        }
    }
}

/// Expression tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Sym(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Quot(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Name of the velocity symbol attached to coordinate `coord`.
pub fn velocity_symbol(coord: &str) -> String {
    format!("d({coord})")
}

/// Inverse of [`velocity_symbol`].
pub fn velocity_coord(symbol: &str) -> Option<&str> {
    symbol.strip_prefix("d(")?.strip_suffix(')')
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::Sym(name.into())
    }

    /// The velocity symbol `d(coord)`.
    pub fn vel(coord: &str) -> Expr {
        Expr::Sym(velocity_symbol(coord))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(self, exponent: impl Into<Expr>) -> Expr {
        Expr::Pow(Box::new(self), Box::new(exponent.into()))
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::call(Func::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::call(Func::Sqrt, self)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Symbols reachable in the tree.
    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Expr::Pow(a, b) | Expr::Quot(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            Expr::Neg(x) | Expr::Call(_, x) => x.collect_symbols(out),
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(s) => s == name,
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().any(|x| x.depends_on(name)),
            Expr::Pow(a, b) | Expr::Quot(a, b) => a.depends_on(name) || b.depends_on(name),
            Expr::Neg(x) | Expr::Call(_, x) => x.depends_on(name),
        }
    }

    /// Replaces every occurrence of symbol `name` with `value`.
    pub fn substitute(&self, name: &str, value: &Expr) -> Expr {
        match self {
            Expr::Sym(s) if s == name => value.clone(),
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| x.substitute(name, value)).collect()),
            Expr::Product(xs) => {
                Expr::Product(xs.iter().map(|x| x.substitute(name, value)).collect())
            }
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(a.substitute(name, value)),
                Box::new(b.substitute(name, value)),
            ),
            Expr::Quot(a, b) => Expr::Quot(
                Box::new(a.substitute(name, value)),
                Box::new(b.substitute(name, value)),
            ),
            Expr::Neg(x) => Expr::Neg(Box::new(x.substitute(name, value))),
            Expr::Call(f, x) => Expr::Call(*f, Box::new(x.substitute(name, value))),
        }
    }

    /// Sub-expressions whose value must stay away from zero for the tree to
    /// be evaluable: denominators and the arguments of `log` and `sqrt`.
    pub fn domain_guards(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_guards(&mut out);
        out
    }

    fn collect_guards(&self, out: &mut Vec<Expr>) {
        match self {
            Expr::Const(_) | Expr::Sym(_) => {}
            Expr::Sum(xs) | Expr::Product(xs) => xs.iter().for_each(|x| x.collect_guards(out)),
            Expr::Pow(a, b) => {
                // negative powers divide by the base
                if b.as_const().is_none_or(|c| c < 0.0) && a.as_const().is_none() {
                    push_unique(out, a);
                }
                a.collect_guards(out);
                b.collect_guards(out);
            }
            Expr::Quot(a, b) => {
                if b.as_const().is_none() {
                    push_unique(out, b);
                }
                a.collect_guards(out);
                b.collect_guards(out);
            }
            Expr::Neg(x) => x.collect_guards(out),
            Expr::Call(f, x) => {
                if matches!(f, Func::Log | Func::Sqrt) && x.as_const().is_none() {
                    push_unique(out, x);
                }
                x.collect_guards(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Sum(xs) if xs.len() > 1 => 1,
            Expr::Product(xs) if xs.len() > 1 => 2,
            Expr::Quot(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn push_unique(out: &mut Vec<Expr>, e: &Expr) {
    if !out.contains(e) {
        out.push(e.clone());
    }
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c == 0.0 {
        f.write_str("0.0")
    } else if c < 0.0 {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

fn fmt_child(e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

// Printing keeps enough parentheses that parsing the text gives back the same
// tree for anything the parser itself produces.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Sym(s) => f.write_str(s),
            Expr::Sum(xs) => {
                if xs.is_empty() {
                    return f.write_str("(0.0)");
                }
                if xs.len() == 1 {
                    // a one-element sum has no textual form of its own
                    return fmt_child(&xs[0], 6, f);
                }
                for (k, x) in xs.iter().enumerate() {
                    match x {
                        Expr::Neg(inner) if k > 0 => {
                            f.write_str(" - ")?;
                            fmt_child(inner, 2, f)?;
                        }
                        _ => {
                            if k > 0 {
                                f.write_str(" + ")?;
                            }
                            fmt_child(x, 2, f)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Product(xs) => {
                if xs.is_empty() {
                    return f.write_str("(1.0)");
                }
                if xs.len() == 1 {
                    return fmt_child(&xs[0], 6, f);
                }
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    // only a leading quotient can sit bare inside a product
                    let nested = matches!(x, Expr::Product(_) | Expr::Sum(_))
                        || (k > 0 && matches!(x, Expr::Quot(..)));
                    if nested {
                        write!(f, "({x})")?;
                    } else {
                        fmt_child(x, 3, f)?;
                    }
                }
                Ok(())
            }
            Expr::Quot(a, b) => {
                match a.as_ref() {
                    Expr::Product(xs) if xs.len() > 1 => write!(f, "{a}")?,
                    Expr::Quot(..) => write!(f, "{a}")?,
                    _ => fmt_child(a, 3, f)?,
                }
                f.write_str("/")?;
                fmt_child(b, 3, f)
            }
            Expr::Neg(x) => {
                f.write_str("-")?;
                match x.as_ref() {
                    Expr::Neg(_) => fmt_child(x, 3, f),
                    Expr::Const(c) if *c < 0.0 => fmt_const(*c, f),
                    _ => fmt_child(x, 4, f),
                }
            }
            Expr::Pow(a, b) => {
                fmt_child(a, 5, f)?;
                f.write_str("^")?;
                fmt_child(b, 3, f)
            }
            Expr::Call(func, x) => write!(f, "{}({x})", func.name()),
        }
    }
}

impl From<f64> for Expr {
    fn from(value: f64) -> Self {
        Expr::Const(value)
    }
}

impl From<&str> for Expr {
    fn from(value: &str) -> Self {
        Expr::Sym(value.to_string())
    }
}

impl<T: Into<Expr>> std::ops::Add<T> for Expr {
    type Output = Expr;
    fn add(self, rhs: T) -> Expr {
        Expr::Sum(vec![self, rhs.into()])
    }
}

impl<T: Into<Expr>> std::ops::Sub<T> for Expr {
    type Output = Expr;
    fn sub(self, rhs: T) -> Expr {
        Expr::Sum(vec![self, Expr::Neg(Box::new(rhs.into()))])
    }
}

impl<T: Into<Expr>> std::ops::Mul<T> for Expr {
    type Output = Expr;
    fn mul(self, rhs: T) -> Expr {
        Expr::Product(vec![self, rhs.into()])
    }
}

impl<T: Into<Expr>> std::ops::Div<T> for Expr {
    type Output = Expr;
    fn div(self, rhs: T) -> Expr {
        Expr::Quot(Box::new(self), Box::new(rhs.into()))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
