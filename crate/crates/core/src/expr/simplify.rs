use super::Expr;

/// Normalizes a tree: constant folding, 0/1 identities, flattening of nested
/// sums and products, and merging of like terms in sums.
///
/// Folds that would divide by zero, take `log`/`sqrt` outside the real domain
/// or overflow are left in the tree so the failure surfaces at evaluation.
/// The result is a fixed point: `simplify(simplify(e)) == simplify(e)`.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Sym(_) => e.clone(),
        Expr::Sum(xs) => simplify_sum(xs.iter().map(simplify).collect()),
        Expr::Product(xs) => simplify_product(xs.iter().map(simplify).collect()),
        Expr::Neg(x) => negate(simplify(x)),
        Expr::Quot(a, b) => simplify_quot(simplify(a), simplify(b)),
        Expr::Pow(a, b) => simplify_pow(simplify(a), simplify(b)),
        Expr::Call(f, x) => {
            let x = simplify(x);
            if let Some(c) = x.as_const() {
                if let Some(v) = f.apply(c).filter(|v| v.is_finite()) {
                    return Expr::Const(v);
                }
            }
            Expr::Call(*f, Box::new(x))
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Negation of an already simplified expression.
fn negate(x: Expr) -> Expr {
    match x {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        Expr::Product(mut fs) if fs.first().and_then(Expr::as_const).is_some() => {
            let c = -fs[0].as_const().unwrap();
            if c == 1.0 {
                fs.remove(0);
                if fs.len() == 1 {
                    return fs.pop().unwrap();
                }
                return Expr::Product(fs);
            }
            fs[0] = Expr::Const(c);
            Expr::Product(fs)
        }
        other => Expr::Neg(Box::new(other)),
    }
}

/// Splits a simplified term into (coefficient, rest).
fn split_coefficient(term: Expr) -> (f64, Option<Expr>) {
    match term {
        Expr::Const(c) => (c, None),
        Expr::Neg(inner) => {
            let (c, rest) = split_coefficient(*inner);
            (-c, rest)
        }
        Expr::Product(mut fs) if fs.first().and_then(Expr::as_const).is_some() => {
            let c = fs.remove(0).as_const().unwrap();
            let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Product(fs) };
            (c, Some(rest))
        }
        other => (1.0, Some(other)),
    }
}

fn scale(c: f64, rest: Expr) -> Expr {
    if c == 1.0 {
        return rest;
    }
    if c == -1.0 {
        return Expr::Neg(Box::new(rest));
    }
    match rest {
        Expr::Product(mut fs) => {
            fs.insert(0, Expr::Const(c));
            Expr::Product(fs)
        }
        other => Expr::Product(vec![Expr::Const(c), other]),
    }
}

fn simplify_sum(items: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    for x in items {
        match x {
            Expr::Sum(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let mut constant = 0.0;
    let mut terms: Vec<(f64, Expr)> = Vec::new();
    for x in flat {
        match split_coefficient(x) {
            (c, None) => constant += c,
            (c, Some(rest)) => match terms.iter_mut().find(|(_, r)| *r == rest) {
                Some(slot) => slot.0 += c,
                None => terms.push((c, rest)),
            },
        }
    }
    let mut out: Vec<Expr> = terms
        .into_iter()
        .filter(|(c, _)| *c != 0.0)
        .map(|(c, rest)| scale(c, rest))
        .collect();
    if constant != 0.0 || out.is_empty() {
        out.push(Expr::Const(constant));
    }
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        Expr::Sum(out)
    }
}

fn simplify_product(items: Vec<Expr>) -> Expr {
    let mut coeff = 1.0;
    let mut rest = Vec::new();
    let mut pending = items;
    while let Some(x) = pending.pop() {
        match x {
            Expr::Product(inner) => pending.extend(inner),
            Expr::Const(c) => coeff *= c,
            Expr::Neg(inner) => {
                coeff = -coeff;
                pending.push(*inner);
            }
            other => rest.push(other),
        }
    }
    // factors were collected in reverse
    rest.reverse();
    if coeff == 0.0 {
        return Expr::Const(0.0);
    }
    if rest.is_empty() {
        return Expr::Const(coeff);
    }
    let body = if rest.len() == 1 { rest.pop().unwrap() } else { Expr::Product(rest) };
    scale(coeff, body)
}

fn simplify_quot(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (_, Some(d)) if d == 1.0 => a,
        (Some(n), Some(d)) if d != 0.0 => match finite(n / d) {
            Some(v) => Expr::Const(v),
            None => Expr::Quot(Box::new(a), Box::new(b)),
        },
        (Some(n), _) if n == 0.0 && b.as_const().is_none() => Expr::Const(0.0),
        (None, Some(d)) if d != 0.0 => {
            // a numeric coefficient in the numerator absorbs the divisor
            let (c, rest) = split_coefficient(a.clone());
            match (rest, finite(c / d)) {
                (Some(rest), Some(k)) if c != 1.0 => scale(k, rest),
                _ => Expr::Quot(Box::new(a), Box::new(b)),
            }
        }
        _ => Expr::Quot(Box::new(a), Box::new(b)),
    }
}

fn simplify_pow(base: Expr, exponent: Expr) -> Expr {
    match (base.as_const(), exponent.as_const()) {
        (_, Some(e)) if e == 0.0 => Expr::Const(1.0),
        (_, Some(e)) if e == 1.0 => base,
        (Some(b), _) if b == 1.0 => Expr::Const(1.0),
        (Some(b), Some(e)) => match fold_pow(b, e) {
            Some(v) => Expr::Const(v),
            None => Expr::Pow(Box::new(base), Box::new(exponent)),
        },
        // nested constant powers merge only for integer exponents
        _ => match (base, exponent.as_const()) {
            (Expr::Pow(inner, e1), Some(e2))
                if e1.as_const().is_some_and(|e| e.fract() == 0.0) && e2.fract() == 0.0 =>
            {
                let e = e1.as_const().unwrap() * e2;
                simplify_pow(*inner, Expr::Const(e))
            }
            (base, _) => Expr::Pow(Box::new(base), Box::new(exponent)),
        },
    }
}

fn fold_pow(b: f64, e: f64) -> Option<f64> {
    if b == 0.0 && e < 0.0 {
        return None;
    }
    let v = if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
        b.powi(e as i32)
    } else if b < 0.0 {
        return None;
    } else {
        b.powf(e)
    };
    finite(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expression, Func};

    fn s(text: &str) -> Expr {
        simplify(&parse_expression(text).unwrap())
    }

    #[test]
    fn identity_elements_vanish() {
        assert_eq!(s("0*x + 1*y"), Expr::sym("y"));
    }

    #[test]
    fn like_terms_merge() {
        assert_eq!(s("x + x"), Expr::Product(vec![Expr::num(2.0), Expr::sym("x")]));
        assert_eq!(s("x - x"), Expr::num(0.0));
    }

    #[test]
    fn constants_fold() {
        assert_eq!(s("2*3*x"), Expr::Product(vec![Expr::num(6.0), Expr::sym("x")]));
        assert_eq!(s("2^3 + sin(0)"), Expr::num(8.0));
    }

    #[test]
    fn unsafe_folds_are_deferred() {
        assert!(matches!(s("1/0"), Expr::Quot(..)));
        assert!(matches!(s("log(-1)"), Expr::Call(Func::Log, _)));
        assert!(matches!(s("sqrt(-4)"), Expr::Call(Func::Sqrt, _)));
        assert!(matches!(s("(-8)^(1/3)"), Expr::Pow(..)));
        assert_eq!(s("(-2)^2"), Expr::num(4.0));
    }

    #[test]
    fn nested_sums_and_products_flatten() {
        assert_eq!(
            s("(a + (b + c)) + d"),
            Expr::Sum(vec!["a".into(), "b".into(), "c".into(), "d".into()])
        );
        assert_eq!(s("a*(b*c)"), Expr::Product(vec!["a".into(), "b".into(), "c".into()]));
    }

    #[test]
    fn negations_pull_into_coefficients() {
        assert_eq!(s("-(-x)"), Expr::sym("x"));
        assert_eq!(s("-(2*x)"), Expr::Product(vec![Expr::num(-2.0), Expr::sym("x")]));
        assert_eq!(s("(-a)*(-b)"), Expr::Product(vec!["a".into(), "b".into()]));
    }

    #[test]
    fn idempotent_on_examples() {
        for text in ["x*x + 2*x*x - 3", "-(a*b) + a*b*2", "(x^2)^3/(1+0*y)", "-(1 - x)"] {
            let once = s(text);
            assert_eq!(simplify(&once), once, "{text}");
        }
    }
}
