use std::fmt;

use super::{BinOp, Expr};

// Binding strength used to decide where parentheses are needed on output.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn strength(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => UNARY,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => ATOM,
        Expr::Neg(_) => UNARY,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => SUM,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => PRODUCT,
        Expr::Binary(BinOp::Pow, ..) => POWER,
    }
}

fn write_with(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if strength(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_finite() {
        // `{:?}` is the shortest representation that reads back bit-exact
        write!(f, "{c:?}")
    } else if c.is_nan() {
        f.write_str("(0/0)")
    } else if c > 0.0 {
        f.write_str("1e999")
    } else {
        f.write_str("-1e999")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_with(f, a, UNARY)
            }
            Expr::Binary(op, a, b) => {
                let (sym, left, right) = match op {
                    BinOp::Add => (" + ", SUM, PRODUCT),
                    BinOp::Sub => (" - ", SUM, PRODUCT),
                    BinOp::Mul => ("*", PRODUCT, UNARY),
                    BinOp::Div => ("/", PRODUCT, UNARY),
                    BinOp::Pow => ("^", ATOM, UNARY),
                };
                write_with(f, a, left)?;
                f.write_str(sym)?;
                write_with(f, b, right)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
