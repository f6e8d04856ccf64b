//! Scalar arithmetic expressions over the variable blocks `x`, `y`, `u`, `w`.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := "-" factor | power
//! power  := atom ("^" factor)?
//! atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)`. There is no implicit multiplication.

mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{Bindings, EvalError, Lookup};
pub use parse::{ParseError, ParseErrorKind};

/// Variable block: primal `x`, dual `y`, perturbation `u`, parameter `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    X,
    Y,
    U,
    W,
}

impl Block {
    pub fn letter(self) -> char {
        match self {
            Block::X => 'x',
            Block::Y => 'y',
            Block::U => 'u',
            Block::W => 'w',
        }
    }

    fn from_letter(c: char) -> Option<Block> {
        match c {
            'x' => Some(Block::X),
            'y' => Some(Block::Y),
            'u' => Some(Block::U),
            'w' => Some(Block::W),
            _ => None,
        }
    }
}

/// A variable such as `y3`: block plus 1-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub block: Block,
    pub index: usize,
}

impl Var {
    pub fn new(block: Block, index: usize) -> Var {
        assert!(index >= 1, "variable indices are 1-based");
        Var { block, index }
    }

    /// Parses `x1`, `y12`, ...; rejects `x0`, `x01`, `z1`.
    pub fn parse(name: &str) -> Option<Var> {
        let mut chars = name.chars();
        let block = Block::from_letter(chars.next()?)?;
        let digits = chars.as_str();
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Some(Var { block, index: digits.parse().ok()? })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.block.letter(), self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
    Min,
    Max,
    Norm1,
    Norm2,
    NormInf,
}

impl Func {
    pub const ALL: [Func; 9] =
        [Func::Abs, Func::Exp, Func::Log, Func::Sqrt, Func::Min, Func::Max, Func::Norm1, Func::Norm2, Func::NormInf];

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm1 => "norm1",
            Func::Norm2 => "norm2",
            Func::NormInf => "norminf",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Unary functions take exactly one argument; the rest at least one.
    pub fn is_unary(self) -> bool {
        matches!(self, Func::Abs | Func::Exp | Func::Log | Func::Sqrt)
    }

    pub fn accepts(self, argc: usize) -> bool {
        if self.is_unary() {
            argc == 1
        } else {
            argc >= 1
        }
    }
}

/// Expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    pub fn binary(op: BinOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn neg(inner: Node) -> Node {
        Node::Neg(Box::new(inner))
    }

    fn visit_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Node::Const(_) => {}
            Node::Var(v) => {
                out.insert(*v);
            }
            Node::Neg(a) => a.visit_vars(out),
            Node::Binary(_, a, b) => {
                a.visit_vars(out);
                b.visit_vars(out);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.visit_vars(out)),
        }
    }

    fn check_arity(&self) -> Result<(), (Func, usize)> {
        match self {
            Node::Const(_) | Node::Var(_) => Ok(()),
            Node::Neg(a) => a.check_arity(),
            Node::Binary(_, a, b) => {
                a.check_arity()?;
                b.check_arity()
            }
            Node::Call(f, args) => {
                if !f.accepts(args.len()) {
                    return Err((*f, args.len()));
                }
                args.iter().try_for_each(Node::check_arity)
            }
        }
    }
}

impl fmt::Display for Node {
    /// Canonical, fully parenthesized form. Re-parsing it gives a tree that
    /// prints the same; a negative constant comes back as a negated literal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, args) => {
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

/// A parsed, arity-checked expression together with its compiled program.
#[derive(Clone, Debug)]
pub struct Expression {
    root: Node,
    source: String,
    program: eval::Program,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expression {
    pub fn parse(text: &str) -> Result<Expression, ParseError> {
        let root = parse::parse(text)?;
        Ok(Expression::build(root, text.to_string()))
    }

    /// Wraps a hand-built tree. Fails on calls with an invalid arity.
    pub fn from_node(root: Node) -> Result<Expression, ParseError> {
        root.check_arity().map_err(|(func, got)| ParseError {
            offset: 0,
            kind: ParseErrorKind::BadArity { func: func.name(), got },
        })?;
        let source = root.to_string();
        Ok(Expression::build(root, source))
    }

    fn build(root: Node, source: String) -> Expression {
        let program = eval::Program::compile(&root);
        Expression { root, source, program }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The text this expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.root.visit_vars(&mut out);
        out
    }

    /// Fails with the first variable outside `x1..x{n_x}`, `y1..y{n_y}`, ...
    pub fn check_variables(&self, limits: &[(Block, usize)]) -> Result<(), Var> {
        for v in self.variables() {
            let max = limits.iter().find(|(b, _)| *b == v.block).map_or(0, |(_, n)| *n);
            if v.index > max {
                return Err(v);
            }
        }
        Ok(())
    }

    /// Evaluates against the given bindings. Domain violations are errors.
    pub fn evaluate(&self, bindings: &impl Lookup) -> Result<crate::value::ExtendedValue, EvalError> {
        let v = self.program.run(bindings)?;
        Ok(crate::value::ExtendedValue::finite(v).expect("program results are finite"))
    }

    /// Same as [`Expression::evaluate`], returning the raw real.
    pub fn eval_real(&self, bindings: &impl Lookup) -> Result<f64, EvalError> {
        self.program.run(bindings)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn x1() -> Node {
        Node::Var(Var::new(Block::X, 1))
    }

    #[test]
    fn precedence_of_sum_and_power() {
        let e = Expression::parse("x1^2 + 2*x1").unwrap();
        let expected = Node::binary(
            BinOp::Add,
            Node::binary(BinOp::Pow, x1(), Node::Const(2.0)),
            Node::binary(BinOp::Mul, Node::Const(2.0), x1()),
        );
        assert_eq!(e.root(), &expected);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = Expression::parse("-x1^2").unwrap();
        assert_eq!(e.root(), &Node::neg(Node::binary(BinOp::Pow, x1(), Node::Const(2.0))));
        assert_eq!(e.eval_real(&Bindings::x(&[3.0])).unwrap(), -9.0);
    }

    #[test]
    fn power_is_right_associative() {
        let e = Expression::parse("2^3^2").unwrap();
        assert_eq!(e.eval_real(&Bindings::default()).unwrap(), 512.0);
        let e = Expression::parse("2^-1").unwrap();
        assert_eq!(e.eval_real(&Bindings::default()).unwrap(), 0.5);
    }

    #[test]
    fn unbalanced_call_reports_offset() {
        let err = Expression::parse("min(x1, y1,").unwrap_err();
        assert_eq!(err.offset, 11);
    }

    #[test]
    fn unknown_function_and_bad_arity() {
        let err = Expression::parse("foo(x1)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::UnknownFunction(ref n) if n == "foo"));
        assert_eq!(err.offset, 0);
        let err = Expression::parse("1 + exp(x1, x2)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::BadArity { func: "exp", got: 2 }));
        assert_eq!(err.offset, 4);
        assert!(Expression::parse("z1 + 1").is_err());
        assert!(Expression::parse("x0").is_err());
        assert!(Expression::parse("2 x1").is_err());
        assert!(Expression::parse("").is_err());
    }

    #[test]
    fn evaluation_examples() {
        let e = Expression::parse("x1^2").unwrap();
        assert_eq!(e.eval_real(&Bindings::x(&[3.0])).unwrap(), 9.0);
        let e = Expression::parse("max(x1,y1)").unwrap();
        let b = Bindings { x: &[2.0], y: &[5.0], ..Bindings::default() };
        assert_eq!(e.eval_real(&b).unwrap(), 5.0);
        let e = Expression::parse("log(x1)").unwrap();
        assert!(matches!(e.eval_real(&Bindings::x(&[-1.0])), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn named_bindings() {
        let e = Expression::parse("norm2(y1, y2) - w1").unwrap();
        let mut m = HashMap::new();
        m.insert("y1".to_string(), 3.0);
        m.insert("y2".to_string(), 4.0);
        assert!(matches!(e.eval_real(&m), Err(EvalError::Unbound(ref n)) if n == "w1"));
        m.insert("w1".to_string(), 1.0);
        assert_eq!(e.eval_real(&m).unwrap(), 4.0);
    }

    #[test]
    fn evaluation_errors() {
        let cases = [("sqrt(x1)", -1.0), ("1/x1", 0.0), ("x1^0.5", -4.0), ("x1^-1", 0.0), ("exp(x1)", 1000.0)];
        for (text, x) in cases {
            let e = Expression::parse(text).unwrap();
            assert!(e.eval_real(&Bindings::x(&[x])).is_err(), "{text} at {x}");
        }
        let e = Expression::parse("x2").unwrap();
        assert!(matches!(e.eval_real(&Bindings::x(&[1.0])), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn canonical_print_reparses() {
        for text in ["x1^2 + 2*x1", "-x1^2", "min(x1, y1, 3) / norm2(y1, y2)", "2^3^2 - -1", "1e-7*w1"] {
            let e = Expression::parse(text).unwrap();
            let again = Expression::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{text} -> {e}");
        }
    }

    #[test]
    fn variable_limits() {
        let e = Expression::parse("x1 + y2").unwrap();
        assert!(e.check_variables(&[(Block::X, 1), (Block::Y, 2)]).is_ok());
        assert_eq!(e.check_variables(&[(Block::X, 1), (Block::Y, 1)]), Err(Var::new(Block::Y, 2)));
        assert_eq!(e.check_variables(&[(Block::X, 1)]), Err(Var::new(Block::Y, 2)));
    }
}
