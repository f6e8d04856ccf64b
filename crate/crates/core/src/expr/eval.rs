use std::collections::HashMap;

use thiserror::Error;

use super::{BinOp, Block, Func, Node, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("result of {0} overflows")]
    Overflow(&'static str),
}

/// Source of variable values during evaluation.
pub trait Lookup {
    fn get(&self, var: Var) -> Option<f64>;
}

/// Positional bindings: `x1` is `x[0]`, and so on.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub u: &'a [f64],
    pub w: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn x(x: &'a [f64]) -> Self {
        Bindings { x, ..Bindings::default() }
    }

    pub fn xy(x: &'a [f64], y: &'a [f64]) -> Self {
        Bindings { x, y, ..Bindings::default() }
    }
}

impl Lookup for Bindings<'_> {
    fn get(&self, var: Var) -> Option<f64> {
        let block = match var.block {
            Block::X => self.x,
            Block::Y => self.y,
            Block::U => self.u,
            Block::W => self.w,
        };
        block.get(var.index - 1).copied()
    }
}

impl Lookup for HashMap<String, f64> {
    fn get(&self, var: Var) -> Option<f64> {
        HashMap::get(self, &var.to_string()).copied()
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(f64),
    Load(Var),
    Neg,
    Bin(BinOp),
    Call(Func, usize),
}

/// Postfix program compiled from a tree, run on a value stack.
#[derive(Clone, Debug)]
pub(super) struct Program {
    ops: Vec<Op>,
    depth: usize,
}

impl Program {
    pub(super) fn compile(root: &Node) -> Program {
        let mut ops = Vec::new();
        emit(root, &mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            depth = match op {
                Op::Const(_) | Op::Load(_) => depth + 1,
                Op::Neg => depth,
                Op::Bin(_) => depth - 1,
                Op::Call(_, argc) => depth + 1 - argc,
            };
            max_depth = max_depth.max(depth);
        }
        Program { ops, depth: max_depth }
    }

    pub(super) fn run(&self, env: &impl Lookup) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(c),
                Op::Load(v) => stack.push(env.get(v).ok_or_else(|| EvalError::Unbound(v.to_string()))?),
                Op::Neg => {
                    let a = stack.last_mut().expect("compiled stack");
                    *a = -*a;
                }
                Op::Bin(op) => {
                    let b = stack.pop().expect("compiled stack");
                    let a = stack.last_mut().expect("compiled stack");
                    *a = binary(op, *a, b)?;
                }
                Op::Call(func, argc) => {
                    let at = stack.len() - argc;
                    let v = call(func, &stack[at..])?;
                    stack.truncate(at);
                    stack.push(v);
                }
            }
        }
        Ok(stack.pop().expect("compiled stack"))
    }
}

fn emit(node: &Node, ops: &mut Vec<Op>) {
    match node {
        Node::Const(c) => ops.push(Op::Const(*c)),
        Node::Var(v) => ops.push(Op::Load(*v)),
        Node::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Node::Binary(op, a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Bin(*op));
        }
        Node::Call(f, args) => {
            args.iter().for_each(|a| emit(a, ops));
            ops.push(Op::Call(*f, args.len()));
        }
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Overflow(what))
    }
}

/// `a^b`; integer exponents use repeated multiplication.
pub(crate) fn pow(a: f64, b: f64) -> Result<f64, EvalError> {
    if a == 0.0 && b < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let v = if b == b.trunc() && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else if a < 0.0 {
        return Err(EvalError::Domain { op: "^", detail: format!("negative base {a} with fractional exponent {b}") });
    } else {
        a.powf(b)
    };
    finite(v, "^")
}

pub(crate) fn binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinOp::Add => finite(a + b, "+"),
        BinOp::Sub => finite(a - b, "-"),
        BinOp::Mul => finite(a * b, "*"),
        BinOp::Div => {
            if b == 0.0 {
                Err(EvalError::DivisionByZero)
            } else {
                finite(a / b, "/")
            }
        }
        BinOp::Pow => pow(a, b),
    }
}

pub(crate) fn call(func: Func, args: &[f64]) -> Result<f64, EvalError> {
    match func {
        Func::Abs => Ok(args[0].abs()),
        Func::Exp => finite(args[0].exp(), "exp"),
        Func::Log => {
            if args[0] <= 0.0 {
                Err(EvalError::Domain { op: "log", detail: format!("argument {} is not positive", args[0]) })
            } else {
                Ok(args[0].ln())
            }
        }
        Func::Sqrt => {
            if args[0] < 0.0 {
                Err(EvalError::Domain { op: "sqrt", detail: format!("argument {} is negative", args[0]) })
            } else {
                Ok(args[0].sqrt())
            }
        }
        Func::Min => Ok(args.iter().copied().fold(f64::INFINITY, f64::min)),
        Func::Max => Ok(args.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        Func::Norm1 => finite(args.iter().map(|a| a.abs()).sum(), "norm1"),
        Func::Norm2 => finite(args.iter().map(|a| a * a).sum::<f64>().sqrt(), "norm2"),
        Func::NormInf => Ok(args.iter().fold(0.0, |m: f64, a| m.max(a.abs()))),
    }
}
