//! Symbolic differentiation with light algebraic clean-up.
//!
//! The builders below fold constants, drop additive and multiplicative
//! identities and cancel structurally identical factors in quotients. That
//! last rule matters for gauges such as `exp(-1/t)`, whose logarithmic
//! derivative would otherwise evaluate to `0/0` once `exp` underflows.

use super::{BinOp, Expression, Func, Node};

fn num(c: f64) -> Node {
    Node::Num(c)
}

fn is_num(node: &Node, c: f64) -> bool {
    node.as_num() == Some(c)
}

fn bin(op: BinOp, a: Node, b: Node) -> Node {
    Node::Bin(op, Box::new(a), Box::new(b))
}

fn fold(value: f64) -> Option<Node> {
    value.is_finite().then(|| num(value))
}

pub(super) fn neg(a: Node) -> Node {
    match a {
        Node::Num(c) => num(-c),
        Node::Neg(inner) => *inner,
        Node::Bin(op @ (BinOp::Mul | BinOp::Div), lhs, rhs) if lhs.as_num().is_some() => {
            bin(op, num(-lhs.as_num().unwrap()), *rhs)
        }
        other => Node::Neg(Box::new(other)),
    }
}

pub(super) fn add(a: Node, b: Node) -> Node {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(n) = fold(x + y) {
            return n;
        }
    }
    if is_num(&a, 0.0) {
        return b;
    }
    if is_num(&b, 0.0) {
        return a;
    }
    if let Node::Neg(inner) = b {
        return sub(a, *inner);
    }
    bin(BinOp::Add, a, b)
}

pub(super) fn sub(a: Node, b: Node) -> Node {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(n) = fold(x - y) {
            return n;
        }
    }
    if is_num(&b, 0.0) {
        return a;
    }
    if is_num(&a, 0.0) {
        return neg(b);
    }
    if a == b {
        return num(0.0);
    }
    bin(BinOp::Sub, a, b)
}

pub(super) fn mul(a: Node, b: Node) -> Node {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(n) = fold(x * y) {
            return n;
        }
    }
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        return num(0.0);
    }
    if is_num(&a, 1.0) {
        return b;
    }
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&a, -1.0) {
        return neg(b);
    }
    if is_num(&b, -1.0) {
        return neg(a);
    }
    // Constants to the left.
    if b.as_num().is_some() && a.as_num().is_none() {
        return mul(b, a);
    }
    if let (Some(c), Node::Bin(BinOp::Mul, inner_l, inner_r)) = (a.as_num(), &b) {
        if let Some(d) = inner_l.as_num() {
            return mul(num(c * d), (**inner_r).clone());
        }
    }
    match (a, b) {
        (a, Node::Bin(BinOp::Div, one, denom)) if is_num(&one, 1.0) => div(a, *denom),
        (Node::Bin(BinOp::Div, one, denom), b) if is_num(&one, 1.0) => div(b, *denom),
        (Node::Neg(a), b) => neg(mul(*a, b)),
        (a, Node::Neg(b)) => neg(mul(a, *b)),
        (a, b) => bin(BinOp::Mul, a, b),
    }
}

fn factors(node: &Node) -> Option<(&Node, &Node)> {
    match node {
        Node::Bin(BinOp::Mul, l, r) => Some((l, r)),
        _ => None,
    }
}

pub(super) fn div(a: Node, b: Node) -> Node {
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if y != 0.0 {
            if let Some(n) = fold(x / y) {
                return n;
            }
        }
    }
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&a, 0.0) && !is_num(&b, 0.0) {
        return num(0.0);
    }
    if a == b {
        return num(1.0);
    }
    // a/(a/b) -> b
    if let Node::Bin(BinOp::Div, bl, br) = &b {
        if **bl == a {
            return (**br).clone();
        }
        // a/(1/b) -> a*b
        if is_num(bl, 1.0) {
            return mul(a, (**br).clone());
        }
    }
    // (a/b)/a -> 1/b
    if let Node::Bin(BinOp::Div, al, ar) = &a {
        if **al == b {
            return div(num(1.0), (**ar).clone());
        }
    }
    // a/(a*b), a/(b*a) -> 1/b
    if let Some((l, r)) = factors(&b) {
        if *l == a {
            return div(num(1.0), r.clone());
        }
        if *r == a {
            return div(num(1.0), l.clone());
        }
    }
    // (a*b)/a, (b*a)/a -> b
    if let Some((l, r)) = factors(&a) {
        if *l == b {
            return r.clone();
        }
        if *r == b {
            return l.clone();
        }
    }
    // x^n/(c*x) -> x^(n-1)/c
    if let (Node::Bin(BinOp::Pow, base, exponent), Some((l, r))) = (&a, factors(&b)) {
        if let (Some(n), Some(c)) = (exponent.as_num(), l.as_num()) {
            if *r == **base {
                return div(pow((**base).clone(), num(n - 1.0)), num(c));
            }
        }
    }
    match (a, b) {
        (Node::Neg(a), b) => neg(div(*a, b)),
        (a, Node::Neg(b)) => neg(div(a, *b)),
        (a, b) => bin(BinOp::Div, a, b),
    }
}

pub(super) fn pow(a: Node, b: Node) -> Node {
    if is_num(&b, 1.0) {
        return a;
    }
    if is_num(&b, 0.0) {
        return num(1.0);
    }
    if let (Some(x), Some(y)) = (a.as_num(), b.as_num()) {
        if let Some(n) = fold(x.powf(y)) {
            return n;
        }
    }
    bin(BinOp::Pow, a, b)
}

fn call(func: Func, args: Vec<Node>) -> Node {
    Node::Call(func, args)
}

fn depends_on(node: &Node, var: &str) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(name) => name == var,
        Node::Neg(a) => depends_on(a, var),
        Node::Bin(_, a, b) => depends_on(a, var) || depends_on(b, var),
        Node::Call(_, args) => args.iter().any(|a| depends_on(a, var)),
    }
}

fn power_rule(base: &Node, exponent: &Node, var: &str) -> Node {
    let d_base = derivative(base, var);
    if !depends_on(exponent, var) {
        // b * a^(b-1) * a'
        let reduced = pow(base.clone(), sub(exponent.clone(), num(1.0)));
        return mul(mul(exponent.clone(), reduced), d_base);
    }
    // a^b * (b' ln a + b a'/a)
    let d_exp = derivative(exponent, var);
    let log_term = mul(d_exp, call(Func::Log, vec![base.clone()]));
    let base_term = div(mul(exponent.clone(), d_base), base.clone());
    mul(
        bin(BinOp::Pow, base.clone(), exponent.clone()),
        add(log_term, base_term),
    )
}

pub(super) fn derivative(node: &Node, var: &str) -> Node {
    match node {
        Node::Num(_) => num(0.0),
        Node::Var(name) => num(if name == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(derivative(a, var)),
        Node::Bin(op, a, b) => {
            let (a, b) = (&**a, &**b);
            match op {
                BinOp::Add => add(derivative(a, var), derivative(b, var)),
                BinOp::Sub => sub(derivative(a, var), derivative(b, var)),
                BinOp::Mul => add(
                    mul(derivative(a, var), b.clone()),
                    mul(a.clone(), derivative(b, var)),
                ),
                BinOp::Div => {
                    let da = derivative(a, var);
                    let db = derivative(b, var);
                    if is_num(&db, 0.0) {
                        div(da, b.clone())
                    } else {
                        sub(
                            div(da, b.clone()),
                            div(mul(a.clone(), db), pow(b.clone(), num(2.0))),
                        )
                    }
                }
                BinOp::Pow => power_rule(a, b, var),
            }
        }
        Node::Call(func, args) => {
            let a = &args[0];
            let da = derivative(a, var);
            match func {
                Func::Sqrt => div(da, mul(num(2.0), call(Func::Sqrt, vec![a.clone()]))),
                Func::Abs => mul(call(Func::Sign, vec![a.clone()]), da),
                Func::Sign => num(0.0),
                Func::Exp => mul(call(Func::Exp, vec![a.clone()]), da),
                Func::Log => div(da, a.clone()),
                Func::Sin => mul(call(Func::Cos, vec![a.clone()]), da),
                Func::Cos => neg(mul(call(Func::Sin, vec![a.clone()]), da)),
                Func::Pow => power_rule(a, &args[1], var),
                Func::Min | Func::Max => {
                    // min(a,b) = (a+b-|a-b|)/2, max(a,b) = (a+b+|a-b|)/2
                    let b = &args[1];
                    let db = derivative(b, var);
                    let kink = mul(
                        call(Func::Sign, vec![sub(a.clone(), b.clone())]),
                        sub(da.clone(), db.clone()),
                    );
                    let sum = add(da, db);
                    let numerator = if *func == Func::Min {
                        sub(sum, kink)
                    } else {
                        add(sum, kink)
                    };
                    div(numerator, num(2.0))
                }
            }
        }
    }
}

pub(super) fn substitute(node: &Node, var: &str, value: &Node) -> Node {
    match node {
        Node::Num(c) => num(*c),
        Node::Var(name) if name == var => value.clone(),
        Node::Var(name) => Node::Var(name.clone()),
        Node::Neg(a) => neg(substitute(a, var, value)),
        Node::Bin(op, a, b) => bin(*op, substitute(a, var, value), substitute(b, var, value)),
        Node::Call(func, args) => call(
            *func,
            args.iter().map(|a| substitute(a, var, value)).collect(),
        ),
    }
}

/// `numerator / denominator` with structural cancellation of common factors.
pub fn simplify_ratio(numerator: &Expression, denominator: &Expression) -> Expression {
    Expression::from_node(div(numerator.root().clone(), denominator.root().clone()))
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn d(src: &str, var: &str) -> String {
        parse(src).unwrap().differentiate(var).to_string()
    }

    #[test]
    fn textbook_derivatives() {
        assert_eq!(d("t^2", "t"), "2*t");
        assert_eq!(d("r", "r"), "1");
        assert_eq!(d("exp(-1/t)", "t"), "exp(-1/t)/t^2");
        assert_eq!(d("t*x", "x"), "t");
        assert_eq!(d("5", "t"), "0");
    }

    #[test]
    fn abs_uses_sign() {
        assert_eq!(d("abs(x)", "x"), "sign(x)");
        let e = parse("abs(x)").unwrap().differentiate("x");
        assert_eq!(e.eval_with(&[("x", 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn ratio_cancels_exponential_factor() {
        let u = parse("exp(-1/t)").unwrap();
        let du = u.differentiate("t");
        assert_eq!(super::simplify_ratio(&u, &du).to_string(), "t^2");
        assert_eq!(super::simplify_ratio(&du, &u).to_string(), "1/t^2");
        let u = parse("t^2").unwrap();
        let du = u.differentiate("t");
        assert_eq!(super::simplify_ratio(&u, &du).to_string(), "t/2");
        let u = parse("t").unwrap();
        assert_eq!(super::simplify_ratio(&u, &u.differentiate("t")).to_string(), "t");
    }
}
