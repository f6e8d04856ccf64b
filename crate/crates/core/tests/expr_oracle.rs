//! The compiled expression engine against a direct tree-walking interpreter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gcoupling::expr::{BinOp, Bindings, Block, Func, Node, Var};
use gcoupling::Expression;

const OPS: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];

fn random_node(rng: &mut ChaCha8Rng, depth: u32) -> Node {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.5) {
            Node::Const((rng.gen_range(0.0..4.0f64) * 8.0).round() / 8.0)
        } else {
            let block = if rng.gen_bool(0.5) { Block::X } else { Block::Y };
            Node::Var(Var::new(block, rng.gen_range(1..=3)))
        };
    }
    match rng.gen_range(0..10) {
        0 => Node::neg(random_node(rng, depth - 1)),
        1..=5 => {
            let op = OPS[rng.gen_range(0..OPS.len())];
            let rhs = if op == BinOp::Pow {
                Node::Const([0.0, 1.0, 2.0, 3.0, 0.5, -1.0][rng.gen_range(0..6)])
            } else {
                random_node(rng, depth - 1)
            };
            Node::binary(op, random_node(rng, depth - 1), rhs)
        }
        _ => {
            let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
            let argc = if f.is_unary() { 1 } else { rng.gen_range(1..=3) };
            Node::Call(f, (0..argc).map(|_| random_node(rng, depth - 1)).collect())
        }
    }
}

fn checked(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Value and a magnitude bound used to scale the comparison tolerance.
fn interpret(node: &Node, x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    match node {
        Node::Const(c) => Some((*c, c.abs())),
        Node::Var(v) => {
            let c = match v.block {
                Block::X => x[v.index - 1],
                _ => y[v.index - 1],
            };
            Some((c, c.abs()))
        }
        Node::Neg(a) => interpret(a, x, y).map(|(v, m)| (-v, m)),
        Node::Binary(op, a, b) => {
            let (a, ma) = interpret(a, x, y)?;
            let (b, mb) = interpret(b, x, y)?;
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return None,
                BinOp::Div => a / b,
                BinOp::Pow if b == b.trunc() => {
                    if a == 0.0 && b < 0.0 {
                        return None;
                    }
                    let mut p = 1.0;
                    for _ in 0..(b.abs() as u32) {
                        p *= a;
                    }
                    if b < 0.0 {
                        1.0 / p
                    } else {
                        p
                    }
                }
                BinOp::Pow => a.powf(b),
            };
            let m = match op {
                BinOp::Add | BinOp::Sub => ma + mb,
                BinOp::Mul => ma * mb,
                BinOp::Div => ma / b.abs(),
                BinOp::Pow => {
                    if b >= 0.0 {
                        ma.powf(b)
                    } else {
                        v.abs()
                    }
                }
            };
            Some((checked(v)?, m.max(v.abs())))
        }
        Node::Call(f, args) => {
            let vals: Vec<(f64, f64)> = args.iter().map(|a| interpret(a, x, y)).collect::<Option<_>>()?;
            let a: Vec<f64> = vals.iter().map(|p| p.0).collect();
            let m: f64 = vals.iter().map(|p| p.1).sum();
            let v = match f {
                Func::Abs => a[0].abs(),
                Func::Exp => a[0].exp(),
                Func::Log if a[0] <= 0.0 => return None,
                Func::Log => a[0].ln(),
                Func::Sqrt => a[0].sqrt(),
                Func::Min => a.iter().cloned().reduce(f64::min)?,
                Func::Max => a.iter().cloned().reduce(f64::max)?,
                Func::Norm1 => a.iter().map(|v| v.abs()).sum(),
                Func::Norm2 => a.iter().map(|v| v * v).sum::<f64>().sqrt(),
                Func::NormInf => a.iter().map(|v| v.abs()).fold(0.0, f64::max),
            };
            let v = checked(v)?;
            // exp, log and sqrt amplify or shrink input error by their own slope
            let m = match f {
                Func::Exp => v * m.max(1.0),
                Func::Log => (m / a[0]).max(v.abs()),
                Func::Sqrt if v > 0.0 => m / v,
                _ => m,
            };
            Some((v, m.max(v.abs())))
        }
    }
}

#[test]
fn compiled_matches_interpreter() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agreed, mut rejected) = (0, 0);
    for _ in 0..1000 {
        let node = random_node(&mut rng, 5);
        let expr = Expression::from_node(node.clone()).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let got = expr.eval_real(&Bindings::xy(&x, &y));
        match interpret(&node, &x, &y) {
            Some((want, mag)) => {
                let got = got.unwrap_or_else(|e| panic!("{node}: engine failed with {e}, oracle gives {want}"));
                assert!((got - want).abs() <= 1e-12 * mag.max(1.0), "{node}: {got} vs {want}");
                agreed += 1;
            }
            None => {
                assert!(got.is_err(), "{node}: engine gives {got:?}, oracle rejects");
                rejected += 1;
            }
        }
    }
    assert!(agreed > 500, "only {agreed} agreements, {rejected} rejections");
}

#[test]
fn printed_form_is_a_parse_fixpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let node = random_node(&mut rng, 5);
        let text = node.to_string();
        let back = Expression::parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(back.root().to_string(), text);
        let x = [0.5, -1.25, 2.0];
        let y = [1.5, 0.75, -0.5];
        let direct = Expression::from_node(node).unwrap().eval_real(&Bindings::xy(&x, &y));
        assert_eq!(back.eval_real(&Bindings::xy(&x, &y)), direct, "{text}");
    }
}
