use super::{simplify, Expr, Func};

/// Symbolic partial derivative of `e` with respect to symbol `s`, simplified.
pub fn differentiate(e: &Expr, s: &str) -> Expr {
    simplify(&d(e, s))
}

fn d(e: &Expr, s: &str) -> Expr {
    if !e.depends_on(s) {
        return Expr::num(0.0);
    }
    match e {
        Expr::Const(_) => Expr::num(0.0),
        Expr::Sym(name) => Expr::num(if name == s { 1.0 } else { 0.0 }),
        Expr::Sum(xs) => Expr::Sum(xs.iter().map(|x| d(x, s)).collect()),
        Expr::Product(xs) => {
            let mut terms = Vec::new();
            for (i, x) in xs.iter().enumerate() {
                if !x.depends_on(s) {
                    continue;
                }
                let mut factors = xs.clone();
                factors[i] = d(x, s);
                terms.push(Expr::Product(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Neg(x) => -d(x, s),
        Expr::Quot(a, b) => {
            if !b.depends_on(s) {
                return d(a, s) / (**b).clone();
            }
            let num = d(a, s) * (**b).clone() - (**a).clone() * d(b, s);
            num / (**b).clone().pow(2.0)
        }
        Expr::Pow(base, ex) => {
            let (base, ex) = (&**base, &**ex);
            if !ex.depends_on(s) {
                // c * u^(c-1) * u'
                let lowered = simplify(&(ex.clone() - 1.0));
                return ex.clone() * base.clone().pow(lowered) * d(base, s);
            }
            if !base.depends_on(s) {
                // u^w * log(u) * w'
                return e.clone() * base.clone().ln() * d(ex, s);
            }
            // u^w * (w' log u + w u'/u)
            let inner = d(ex, s) * base.clone().ln() + ex.clone() * d(base, s) / base.clone();
            e.clone() * inner
        }
        Expr::Call(f, x) => {
            let x0 = (**x).clone();
            let outer = match f {
                Func::Sin => x0.cos(),
                Func::Cos => -x0.sin(),
                Func::Exp => e.clone(),
                Func::Log => return d(x, s) / x0,
                Func::Sqrt => return d(x, s) / (Expr::num(2.0) * e.clone()),
            };
            outer * d(x, s)
        }
    }
}
