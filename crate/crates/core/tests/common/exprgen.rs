//! Random expression trees rendered with the fewest parentheses the grammar
//! allows. Parsing the rendering must give back the tree.

use impulse_cone::expr::{BinOp, Constant, Expr, Func};
use proptest::prelude::*;

const VARS: [&str; 4] = ["x", "u", "t", "abc"];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64)),
        (0.0f64..100.0).prop_map(Expr::Num),
        (-12i32..12).prop_map(|e| Expr::Num(10f64.powi(e))),
        prop::sample::select(VARS.to_vec()).prop_map(|v| Expr::Var(v.to_string())),
        Just(Expr::Const(Constant::Pi)),
        Just(Expr::Const(Constant::E)),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow])
}

pub fn expr_tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone(), inner).prop_map(|(f, a, b)| {
                let args = if f.arity() == 2 { vec![a, b] } else { vec![a] };
                Expr::Call(f, args)
            }),
        ]
    })
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Binary(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn wrap(e: &Expr, parens: bool, spaced: bool) -> String {
    let s = render(e, spaced);
    if parens {
        format!("({s})")
    } else {
        s
    }
}

/// Minimal-parenthesis rendering under the documented precedence rules.
pub fn render(e: &Expr, spaced: bool) -> String {
    match e {
        Expr::Num(v) => format!("{v:?}"),
        Expr::Var(name) => name.clone(),
        Expr::Const(Constant::Pi) => "pi".into(),
        Expr::Const(Constant::E) => "e".into(),
        Expr::Neg(inner) => format!("-{}", wrap(inner, prec(inner) < 3, spaced)),
        Expr::Binary(BinOp::Pow, l, r) => {
            format!("{}^{}", wrap(l, prec(l) < 5, spaced), wrap(r, prec(r) < 3, spaced))
        }
        Expr::Binary(op, l, r) => {
            let p = prec(e);
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => unreachable!(),
            };
            let sep = if spaced { " " } else { "" };
            format!("{}{sep}{sym}{sep}{}", wrap(l, prec(l) < p, spaced), wrap(r, prec(r) <= p, spaced))
        }
        Expr::Call(f, args) => {
            let parts: Vec<String> = args.iter().map(|a| render(a, spaced)).collect();
            format!("{}({})", f.name(), parts.join(", "))
        }
    }
}

/// Straightforward recursive evaluation, `None` where the value is not a
/// finite real.
pub fn reference_eval(e: &Expr, x: f64) -> Option<f64> {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Var(_) => x,
        Expr::Const(Constant::Pi) => std::f64::consts::PI,
        Expr::Const(Constant::E) => std::f64::consts::E,
        Expr::Neg(inner) => -reference_eval(inner, x)?,
        Expr::Binary(op, l, r) => {
            let (a, b) = (reference_eval(l, x)?, reference_eval(r, x)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return None,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call(f, args) => {
            let a = reference_eval(&args[0], x)?;
            let b = match args.get(1) {
                Some(arg) => reference_eval(arg, x)?,
                None => 0.0,
            };
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log if a <= 0.0 => return None,
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Min => a.min(b),
                Func::Max => a.max(b),
                Func::Pow => a.powf(b),
            }
        }
    };
    v.is_finite().then_some(v)
}

/// Malformed inputs and the byte offset each error must point at.
pub const MALFORMED: &[(&str, usize)] = &[
    ("", 0),
    ("2*+3", 2),
    ("1 +", 3),
    ("(1+2", 4),
    ("foo(1)", 0),
    ("sin(1,2)", 0),
    ("min(1)", 0),
    ("3 4", 2),
    ("2 $ 3", 2),
    ("*2", 0),
    ("sin()", 4),
    ("1 + (2))", 7),
    ("x^", 2),
    ("+x", 0),
    ("x y", 2),
    ("max(1,)", 6),
    ("(", 1),
    (")", 0),
    ("1..2", 2),
    ("2 * (u - )", 9),
];
