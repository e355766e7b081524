use super::{add, call, div, mul, neg, pow, sub, BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("`{node}` is not differentiable with respect to {var}")]
    NonDifferentiable { node: String, var: Var },
}

pub(super) fn differentiate(e: &Expr, var: Var) -> Result<Expr, DiffError> {
    if !e.depends_on(var) {
        return Ok(Expr::Const(0.0));
    }
    let d = |e: &Expr| differentiate(e, var);
    Ok(match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(d(a)?),
        Expr::Binary(op, a, b) => match op {
            BinOp::Add => add(d(a)?, d(b)?),
            BinOp::Sub => sub(d(a)?, d(b)?),
            BinOp::Mul => add(mul(d(a)?, (**b).clone()), mul((**a).clone(), d(b)?)),
            BinOp::Div => {
                // (a'b - ab') / b^2
                let num = sub(mul(d(a)?, (**b).clone()), mul((**a).clone(), d(b)?));
                div(num, pow((**b).clone(), Expr::Const(2.0)))
            }
            BinOp::Pow => power_rule(a, b, var)?,
        },
        Expr::Call(func, args) => {
            let u = &args[0];
            match func {
                Func::Sin => mul(call(Func::Cos, vec![u.clone()]), d(u)?),
                Func::Cos => neg(mul(call(Func::Sin, vec![u.clone()]), d(u)?)),
                Func::Tan => div(d(u)?, pow(call(Func::Cos, vec![u.clone()]), Expr::Const(2.0))),
                Func::Exp => mul(e.clone(), d(u)?),
                Func::Ln => div(d(u)?, u.clone()),
                Func::Sqrt => div(d(u)?, mul(Expr::Const(2.0), e.clone())),
                Func::Abs => mul(sign(u.clone()), d(u)?),
                Func::Pow => power_rule(u, &args[1], var)?,
                Func::Max | Func::Min => {
                    let (a, b) = (&args[0], &args[1]);
                    // selector is 1 where the first argument is chosen
                    let first = match func {
                        Func::Max => call(Func::Heaviside, vec![sub(a.clone(), b.clone())]),
                        _ => call(Func::Heaviside, vec![sub(b.clone(), a.clone())]),
                    };
                    let second = sub(Expr::Const(1.0), first.clone());
                    add(mul(first, d(a)?), mul(second, d(b)?))
                }
                Func::Heaviside => {
                    return Err(DiffError::NonDifferentiable { node: e.to_string(), var })
                }
            }
        }
    })
}

fn power_rule(base: &Expr, exponent: &Expr, var: Var) -> Result<Expr, DiffError> {
    let db = differentiate(base, var)?;
    if !exponent.depends_on(var) {
        // c * u^(c-1) * u'
        let lowered = match exponent.as_const() {
            Some(c) => Expr::Const(c - 1.0),
            None => sub(exponent.clone(), Expr::Const(1.0)),
        };
        return Ok(mul(mul(exponent.clone(), pow(base.clone(), lowered)), db));
    }
    let de = differentiate(exponent, var)?;
    let whole = pow(base.clone(), exponent.clone());
    if !base.depends_on(var) {
        // u^v ln(u) v'
        return Ok(mul(mul(whole, call(Func::Ln, vec![base.clone()])), de));
    }
    // u^v (v' ln u + v u'/u)
    let inner = add(
        mul(de, call(Func::Ln, vec![base.clone()])),
        div(mul(exponent.clone(), db), base.clone()),
    );
    Ok(mul(whole, inner))
}

fn sign(u: Expr) -> Expr {
    sub(call(Func::Heaviside, vec![u.clone()]), call(Func::Heaviside, vec![neg(u)]))
}
