//! Define-by-run reverse-mode tape over dense `f64` matrices.
//!
//! A fresh [`Tape`] is built for every mini-batch. Operations append nodes in
//! evaluation order, so the node list is already topologically sorted and the
//! backward pass is a single reverse sweep.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Square(NodeId),
    Abs(NodeId),
    Elu(NodeId),
    Sigmoid(NodeId),
    Ln(NodeId),
    Recip(NodeId),
    Clamp(NodeId, f64, f64),
    Sum(NodeId),
    Mean(NodeId),
    RowMean(NodeId),
    ColMean(NodeId),
    Concat(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    GradReverse(NodeId, f64),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn dims(m: &Matrix) -> (usize, usize) {
    m.dim()
}

/// ELU with unit scale: `x` for positive inputs, `e^x - 1` otherwise.
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        dims(&self.nodes[id.0].value)
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[[0, 0]]
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let value = self.value(a).mapv(f);
        let ng = self.needs(a);
        self.push(value, op, ng)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    /// Column vector constant from a slice.
    pub fn column(&mut self, values: &[f64]) -> NodeId {
        let m = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .expect("column shape always matches length");
        self.constant(m)
    }

    /// Records a parameter leaf. Repeated calls for the same parameter reuse one node
    /// so gradients from every use accumulate together.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let p = store.get(id);
        let node = self.push(p.value.clone(), Op::Param(id), p.requires_grad);
        self.param_nodes.insert(id, node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let value = self.value(a).dot(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Adds a 1xN bias row to every row of a BxN matrix.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (sx, sb) = (self.shape(x), self.shape(bias));
        if sb.0 != 1 || sb.1 != sx.1 {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: sx,
                rhs: sb,
            });
        }
        let value = self.value(x) + self.value(bias);
        let ng = self.needs(x) || self.needs(bias);
        Ok(self.push(value, Op::AddBias(x, bias), ng))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::abs, Op::Abs(a))
    }

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, elu, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::recip, Op::Recip(a))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.needs(a);
        self.push(value, Op::Sum(a), ng)
    }

    /// Mean over every element, as a 1x1 node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let value = Array2::from_elem((1, 1), v.sum() / v.len() as f64);
        let ng = self.needs(a);
        self.push(value, Op::Mean(a), ng)
    }

    /// Mean of each row (across columns): RxC -> Rx1.
    pub fn row_mean(&mut self, a: NodeId) -> NodeId {
        let value = self
            .value(a)
            .mean_axis(Axis(1))
            .expect("matrix has at least one column")
            .insert_axis(Axis(1));
        let ng = self.needs(a);
        self.push(value, Op::RowMean(a), ng)
    }

    /// Mean of each column (across rows): RxC -> 1xC.
    pub fn col_mean(&mut self, a: NodeId) -> NodeId {
        let value = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("matrix has at least one row")
            .insert_axis(Axis(0));
        let ng = self.needs(a);
        self.push(value, Op::ColMean(a), ng)
    }

    /// Concatenates along the feature (column) axis.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(Error::Shape {
            op: "concat",
            lhs: (0, 0),
            rhs: (0, 0),
        })?;
        let rows = self.shape(first).0;
        for &p in &parts[1..] {
            if self.shape(p).0 != rows {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.shape(first),
                    rhs: self.shape(p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(value, Op::Concat(parts.to_vec()), ng))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let sa = self.shape(a);
        if start >= end || end > sa.1 {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: sa,
                rhs: (start, end),
            });
        }
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        let ng = self.needs(a);
        Ok(self.push(value, Op::SliceCols(a, start, end), ng))
    }

    /// Gradient reversal: identity forward, `-lambda * upstream` backward.
    pub fn grad_reverse(&mut self, a: NodeId, lambda: f64) -> Result<NodeId> {
        if !(lambda >= 0.0) {
            return Err(Error::NegativeLambda(lambda));
        }
        let value = self.value(a).clone();
        let ng = self.needs(a);
        Ok(self.push(value, Op::GradReverse(a, lambda), ng))
    }

    /// Reverse sweep from a scalar root. Parameters unreachable from the root get
    /// zero gradients.
    pub fn backward(&self, root: NodeId, store: &ParamStore) -> Result<Gradients> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(Error::NonScalarRoot(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::zeros_like(store);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => out.accumulate(*pid, &g),
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        acc(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        acc(&mut grads, *b, gb);
                    }
                }
                Op::AddBias(x, b) => {
                    if self.needs(*b) {
                        let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(&mut grads, *b, gb);
                    }
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, -&g);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        acc(&mut grads, *a, &g * self.value(*b));
                    }
                    if self.needs(*b) {
                        acc(&mut grads, *b, &g * self.value(*a));
                    }
                }
                Op::Scale(a, c) => acc(&mut grads, *a, g * *c),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Square(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |g, x| 2.0 * x * g));
                }
                Op::Abs(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |g, x| sign(x) * g));
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    acc(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |g, x| if x > 0.0 { g } else { g * x.exp() }),
                    );
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(&mut grads, *a, zip_map(&g, y, |g, y| g * y * (1.0 - y)));
                }
                Op::Ln(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |g, x| g / x));
                }
                Op::Recip(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |g, x| -g / (x * x)));
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    let (lo, hi) = (*lo, *hi);
                    acc(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |g, x| if x >= lo && x <= hi { g } else { 0.0 }),
                    );
                }
                Op::Sum(a) => {
                    let s = g[[0, 0]];
                    acc(&mut grads, *a, Array2::from_elem(self.shape(*a), s));
                }
                Op::Mean(a) => {
                    let shape = self.shape(*a);
                    let s = g[[0, 0]] / (shape.0 * shape.1) as f64;
                    acc(&mut grads, *a, Array2::from_elem(shape, s));
                }
                Op::RowMean(a) => {
                    let (r, c) = self.shape(*a);
                    let scaled = g / c as f64;
                    let ga = scaled
                        .broadcast((r, c))
                        .expect("rx1 broadcasts to rxc")
                        .to_owned();
                    acc(&mut grads, *a, ga);
                }
                Op::ColMean(a) => {
                    let (r, c) = self.shape(*a);
                    let scaled = g / r as f64;
                    let ga = scaled
                        .broadcast((r, c))
                        .expect("1xc broadcasts to rxc")
                        .to_owned();
                    acc(&mut grads, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.needs(p) {
                            acc(&mut grads, p, g.slice(s![.., start..start + w]).to_owned());
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::GradReverse(a, lambda) => acc(&mut grads, *a, g * -*lambda),
            }
        }
        Ok(out)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(g: &Matrix, x: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let mut out = Array2::zeros(g.dim());
    Zip::from(&mut out)
        .and(g)
        .and(x)
        .for_each(|o, &g, &x| *o = f(g, x));
    out
}

fn acc(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::params::ParamKind;
    use ndarray::array;

    #[test]
    fn elu_values() {
        assert_eq!(elu(2.0), 2.0);
        assert_eq!(elu(0.0), 0.0);
        assert!((elu(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((elu(-1.0) + 0.63212).abs() < 1e-5);
    }

    #[test]
    fn grad_reverse_forward_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.2, -3.0]]);
        let y = tape.grad_reverse(x, 0.5).unwrap();
        assert_eq!(tape.value(y), &array![[1.2, -3.0]]);
    }

    #[test]
    fn grad_reverse_scales_upstream() {
        for (lambda, expected) in [(0.5, -1.0), (0.0, 0.0)] {
            let mut store = ParamStore::new();
            let p = store.add("x", array![[1.2, -3.0]], ParamKind::Weight);
            let mut tape = Tape::new();
            let x = tape.param(&store, p);
            let r = tape.grad_reverse(x, lambda).unwrap();
            // upstream of [2, 2] via sum(2 * r)
            let two = tape.scale(r, 2.0);
            let root = tape.sum(two);
            let g = tape.backward(root, &store).unwrap();
            assert_eq!(g.get(p), &array![[expected, expected]]);
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0]]);
        assert!(matches!(
            tape.grad_reverse(x, -0.1),
            Err(Error::NegativeLambda(_))
        ));
        assert!(tape.grad_reverse(x, f64::NAN).is_err());
    }

    #[test]
    fn power_rule() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[3.0]], ParamKind::Weight);
        let mut tape = Tape::new();
        let x = tape.param(&store, w);
        let y = tape.square(x);
        let g = tape.backward(y, &store).unwrap();
        assert_eq!(g.get(w)[[0, 0]], 6.0);
    }

    #[test]
    fn mean_spreads_evenly() {
        let mut store = ParamStore::new();
        let w = store.add("w", Array2::ones((2, 5)), ParamKind::Weight);
        let mut tape = Tape::new();
        let x = tape.param(&store, w);
        let m = tape.mean(x);
        let g = tape.backward(m, &store).unwrap();
        assert!(g.get(w).iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn unreachable_param_gets_zero() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[1.0, 2.0]], ParamKind::Weight);
        let b = store.add("b", array![[5.0]], ParamKind::Weight);
        let mut tape = Tape::new();
        let x = tape.param(&store, a);
        let root = tape.sum(x);
        let g = tape.backward(root, &store).unwrap();
        assert_eq!(g.get(b), &array![[0.0]]);
    }

    #[test]
    fn shape_errors_name_op() {
        let mut tape = Tape::new();
        let a = tape.constant(Array2::zeros((2, 3)));
        let b = tape.constant(Array2::zeros((2, 3)));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch in matmul: (2, 3) vs (2, 3)");
        let c = tape.constant(Array2::zeros((3, 2)));
        assert!(matches!(tape.add(a, c), Err(Error::Shape { op: "add", .. })));
        let tall = tape.constant(Array2::zeros((5, 1)));
        assert!(tape.concat(&[a, tall]).is_err());
    }

    #[test]
    fn non_scalar_root_rejected() {
        let store = ParamStore::new();
        let mut tape = Tape::new();
        let a = tape.constant(Array2::zeros((2, 1)));
        assert!(matches!(
            tape.backward(a, &store),
            Err(Error::NonScalarRoot((2, 1)))
        ));
    }

    #[test]
    fn double_reversal_is_transparent() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[0.3, -0.7], [1.1, 0.2]], ParamKind::Weight);
        let grad_with = |reversals: usize| {
            let mut tape = Tape::new();
            let mut x = tape.param(&store, w);
            for _ in 0..reversals {
                x = tape.grad_reverse(x, 1.0).unwrap();
            }
            let e = tape.elu(x);
            let sq = tape.square(e);
            let root = tape.mean(sq);
            tape.backward(root, &store).unwrap().get(w).clone()
        };
        assert_eq!(grad_with(0), grad_with(2));
    }
}
