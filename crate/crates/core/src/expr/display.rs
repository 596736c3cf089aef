//! Canonical, deterministic text form.
//!
//! Parentheses are emitted only where the grammar needs them, plus around
//! negated operands of binary operators for readability.

use std::fmt::{self, Write};

use super::{BinOp, Node};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_UNARY: u8 = 4;
const PREC_ATOM: u8 = 5;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Num(c) if c.is_sign_negative() && *c != 0.0 => PREC_UNARY,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
        Node::Neg(_) => PREC_UNARY,
        Node::Bin(op, ..) => op_prec(*op),
    }
}

fn op_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => PREC_ADD,
        BinOp::Mul | BinOp::Div => PREC_MUL,
        BinOp::Pow => PREC_POW,
    }
}

fn op_symbol(op: BinOp) -> char {
    match op {
        BinOp::Add => '+',
        BinOp::Sub => '-',
        BinOp::Mul => '*',
        BinOp::Div => '/',
        BinOp::Pow => '^',
    }
}

pub(super) fn format_number(value: f64) -> String {
    let magnitude = value.abs();
    if magnitude.fract() == 0.0 && magnitude < 1e15 {
        format!("{}", magnitude as u64)
    } else {
        format!("{magnitude:?}")
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, node: &Node, wrap: bool) -> fmt::Result {
    if wrap {
        f.write_char('(')?;
        write_node(f, node)?;
        f.write_char(')')
    } else {
        write_node(f, node)
    }
}

pub(super) fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Num(c) => {
            if c.is_sign_negative() && *c != 0.0 {
                f.write_char('-')?;
            }
            f.write_str(&format_number(*c))
        }
        Node::Var(name) => f.write_str(name),
        Node::Neg(inner) => {
            f.write_char('-')?;
            write_wrapped(f, inner, prec(inner) < PREC_ATOM)
        }
        Node::Call(func, args) => {
            f.write_str(func.name())?;
            f.write_char('(')?;
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write_node(f, arg)?;
            }
            f.write_char(')')
        }
        Node::Bin(op, lhs, rhs) => {
            let p = op_prec(*op);
            let wrap_lhs = if *op == BinOp::Pow {
                prec(lhs) <= PREC_UNARY
            } else {
                prec(lhs) < p
            };
            let wrap_rhs = match op {
                BinOp::Pow => prec(rhs) < p || prec(rhs) == PREC_UNARY,
                _ => prec(rhs) <= p || prec(rhs) == PREC_UNARY,
            };
            write_wrapped(f, lhs, wrap_lhs)?;
            f.write_char(op_symbol(*op))?;
            write_wrapped(f, rhs, wrap_rhs)
        }
    }
}
