//! Arithmetic expressions over named real variables.
//!
//! Expressions carry the right-hand side `f(t, x)` and the gauge functions
//! `u(t)`, `v(t)`, `lambda(t)` and `omega(r)`. They are parsed from a small
//! infix language, evaluated in binary64, and differentiated symbolically.
//! The canonical text form produced by [`Expression`]'s `Display` impl is
//! accepted by [`parse`] and re-parses to a structurally identical tree.

mod diff;
mod display;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use diff::simplify_ratio;
pub use parse::{parse, parse_with_vars};

/// Binary operators of the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in functions.
///
/// `Sign` is not part of the documented input language surface but is
/// accepted by the parser so that derivatives of `abs`, `min` and `max`
/// serialize and re-parse. It follows the convention `sign(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Abs,
    Exp,
    Log,
    Sin,
    Cos,
    Pow,
    Min,
    Max,
    Sign,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => Func::Pow,
            "min" => Func::Min,
            "max" => Func::Max,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sign => "sign",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree node.
///
/// A `Neg` node never wraps a `Num`: negated literals are folded into a
/// negative `Num` by both the parser and the builders.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Node::Num(c) => Some(*c),
            _ => None,
        }
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Node::Num(_) => {}
            Node::Var(name) => {
                out.insert(name.clone());
            }
            Node::Neg(a) => a.collect_vars(out),
            Node::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("function `{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown variable `{name}` (allowed: {allowed})")]
    UnknownVariable { name: String, allowed: String },
    #[error("missing binding for variable `{0}`")]
    MissingBinding(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite result: {0}")]
    NonFinite(String),
}

impl ExprError {
    /// True for errors raised while evaluating (as opposed to parsing).
    pub fn is_evaluation_error(&self) -> bool {
        matches!(
            self,
            ExprError::DivisionByZero | ExprError::Domain(_) | ExprError::NonFinite(_)
        )
    }
}

/// A parsed expression together with its free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    free_vars: BTreeSet<String>,
}

impl Expression {
    pub fn from_node(root: Node) -> Expression {
        let mut free_vars = BTreeSet::new();
        root.collect_vars(&mut free_vars);
        Expression { root, free_vars }
    }

    pub fn constant(value: f64) -> Expression {
        Expression::from_node(Node::Num(value))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_vars(&self) -> &BTreeSet<String> {
        &self.free_vars
    }

    pub fn is_constant(&self) -> bool {
        self.free_vars.is_empty()
    }

    /// Evaluates with named bindings.
    pub fn eval(&self, bindings: &BTreeMap<String, f64>) -> Result<f64, ExprError> {
        eval_node(&self.root, &|name| bindings.get(name).copied())
    }

    /// Evaluates with bindings given as `(name, value)` pairs.
    pub fn eval_with(&self, bindings: &[(&str, f64)]) -> Result<f64, ExprError> {
        eval_node(&self.root, &|name| {
            bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
        })
    }

    /// Resolves variable names to argument slots for fast repeated evaluation.
    ///
    /// Variables of the expression that do not appear in `slots` are an error;
    /// slots that the expression does not use are allowed.
    pub fn compile(&self, slots: &[&str]) -> Result<Compiled, ExprError> {
        let root = compile_node(&self.root, slots)?;
        Ok(Compiled {
            root,
            arity: slots.len(),
        })
    }

    /// Symbolic derivative with respect to `var`.
    pub fn differentiate(&self, var: &str) -> Expression {
        Expression::from_node(diff::derivative(&self.root, var))
    }

    /// Replaces every occurrence of variable `var` with `value`.
    pub fn substitute(&self, var: &str, value: &Expression) -> Expression {
        Expression::from_node(diff::substitute(&self.root, var, value.root()))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        display::write_node(f, &self.root)
    }
}

impl std::str::FromStr for Expression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Expression with variables resolved to positional slots.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: CNode,
    arity: usize,
}

#[derive(Debug, Clone)]
enum CNode {
    Num(f64),
    Var(usize),
    Neg(Box<CNode>),
    Bin(BinOp, Box<CNode>, Box<CNode>),
    Call(Func, Vec<CNode>),
}

impl Compiled {
    /// Evaluates with `args[i]` bound to the i-th slot name given to `compile`.
    pub fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        debug_assert_eq!(args.len(), self.arity);
        eval_cnode(&self.root, args)
    }
}

fn compile_node(node: &Node, slots: &[&str]) -> Result<CNode, ExprError> {
    Ok(match node {
        Node::Num(c) => CNode::Num(*c),
        Node::Var(name) => match slots.iter().position(|s| s == name) {
            Some(i) => CNode::Var(i),
            None => return Err(ExprError::MissingBinding(name.clone())),
        },
        Node::Neg(a) => CNode::Neg(Box::new(compile_node(a, slots)?)),
        Node::Bin(op, a, b) => CNode::Bin(
            *op,
            Box::new(compile_node(a, slots)?),
            Box::new(compile_node(b, slots)?),
        ),
        Node::Call(func, args) => CNode::Call(
            *func,
            args.iter()
                .map(|a| compile_node(a, slots))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn eval_node(node: &Node, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
    match node {
        Node::Num(c) => Ok(*c),
        Node::Var(name) => lookup(name).ok_or_else(|| ExprError::MissingBinding(name.clone())),
        Node::Neg(a) => Ok(-eval_node(a, lookup)?),
        Node::Bin(op, a, b) => apply_bin(*op, eval_node(a, lookup)?, eval_node(b, lookup)?),
        Node::Call(func, args) => {
            let a = eval_node(&args[0], lookup)?;
            let b = match args.get(1) {
                Some(node) => eval_node(node, lookup)?,
                None => 0.0,
            };
            apply_func(*func, a, b)
        }
    }
}

fn eval_cnode(node: &CNode, args: &[f64]) -> Result<f64, ExprError> {
    match node {
        CNode::Num(c) => Ok(*c),
        CNode::Var(i) => Ok(args[*i]),
        CNode::Neg(a) => Ok(-eval_cnode(a, args)?),
        CNode::Bin(op, a, b) => apply_bin(*op, eval_cnode(a, args)?, eval_cnode(b, args)?),
        CNode::Call(func, call_args) => {
            let a = eval_cnode(&call_args[0], args)?;
            let b = match call_args.get(1) {
                Some(node) => eval_cnode(node, args)?,
                None => 0.0,
            };
            apply_func(*func, a, b)
        }
    }
}

fn finite(value: f64, what: &str) -> Result<f64, ExprError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ExprError::NonFinite(what.to_string()))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::DivisionByZero);
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(ExprError::Domain(format!(
            "negative base {base} with non-integer exponent {exponent}"
        )));
    }
    let value = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    finite(value, "power overflow")
}

fn apply_bin(op: BinOp, a: f64, b: f64) -> Result<f64, ExprError> {
    match op {
        BinOp::Add => finite(a + b, "sum overflow"),
        BinOp::Sub => finite(a - b, "difference overflow"),
        BinOp::Mul => finite(a * b, "product overflow"),
        BinOp::Div => {
            if b == 0.0 {
                Err(ExprError::DivisionByZero)
            } else {
                finite(a / b, "quotient overflow")
            }
        }
        BinOp::Pow => power(a, b),
    }
}

fn apply_func(func: Func, a: f64, b: f64) -> Result<f64, ExprError> {
    match func {
        Func::Sqrt => {
            if a < 0.0 {
                Err(ExprError::Domain(format!("sqrt of negative value {a}")))
            } else {
                Ok(a.sqrt())
            }
        }
        Func::Abs => Ok(a.abs()),
        Func::Exp => finite(a.exp(), "exp overflow"),
        Func::Log => {
            if a <= 0.0 {
                Err(ExprError::Domain(format!("log of non-positive value {a}")))
            } else {
                Ok(a.ln())
            }
        }
        Func::Sin => Ok(a.sin()),
        Func::Cos => Ok(a.cos()),
        Func::Pow => power(a, b),
        Func::Min => Ok(a.min(b)),
        Func::Max => Ok(a.max(b)),
        Func::Sign => Ok(if a > 0.0 {
            1.0
        } else if a < 0.0 {
            -1.0
        } else {
            0.0
        }),
    }
}
