//! Per-minibatch computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the node index order is a
//! topological order and `backward` is a single reverse sweep. Forward
//! values are never touched by the backward pass; gradients live in a
//! separate [`Gradients`] table.

use crate::tensor::matmul;
use crate::{AutodiffError, ParamSet, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Abs(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    /// Row-wise `w·exp(x) / Σ w·exp(x)`.
    Softmax(Var),
    /// Row-wise `log Σ w·exp(x)`, producing `rows × 1`.
    LogSumExp { x: Var, weights: Option<Vec<f64>> },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Gather { x: Var, index: Vec<usize> },
    Reshape(Var),
    /// `out[b, j] = Σ_i x[b, i] · w[b, i·m + j]`.
    BatchedVecMat { x: Var, w: Var, out_cols: usize },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// A [`ParamSet`] bound into a graph as leaf nodes, one per tensor.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    /// Regroups existing leaves, e.g. a slice of a larger bound set.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, index: usize) -> Var {
        self.vars[index]
    }

    pub fn get(&self, id: crate::ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Gradient table produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads[var.0].as_ref()
    }

    /// Gradient of `var`, zero when the loss does not depend on it.
    pub fn get_or_zero(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
        }
    }

    /// Gradients aligned with the tensors of a bound parameter set.
    pub fn for_params(&self, bound: &BoundParams) -> Vec<Tensor> {
        bound.vars.iter().map(|&v| self.get_or_zero(v)).collect()
    }
}

fn unary_shape_same(a: &Tensor, b: &Tensor, op: &'static str) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{op}: operand shapes {:?} and {:?} differ",
        a.shape(),
        b.shape()
    );
}

fn weighted_softmax_row(x: &[f64], weights: Option<&[f64]>, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (a, &v) in x.iter().enumerate() {
        if weights.map_or(true, |w| w[a] > 0.0) && v > max {
            max = v;
        }
    }
    let mut z = 0.0;
    for (a, o) in out.iter_mut().enumerate() {
        let w = weights.map_or(1.0, |w| w[a]);
        *o = if w > 0.0 { w * (x[a] - max).exp() } else { 0.0 };
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// `log Σ_a w_a·exp(x_a)` with max-subtraction; zero-weight entries are skipped.
pub fn log_sum_exp(x: &[f64], weights: Option<&[f64]>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (a, &v) in x.iter().enumerate() {
        if weights.map_or(true, |w| w[a] > 0.0) && v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut z = 0.0;
    for (a, &v) in x.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[a]);
        if w > 0.0 {
            z += w * (v - max).exp();
        }
    }
    max + z.ln()
}

/// Row-wise (optionally weighted) softmax of a plain tensor.
pub fn softmax_rows(x: &Tensor, weights: Option<&[f64]>) -> Tensor {
    let mut out = Tensor::zeros(x.rows(), x.cols());
    let cols = x.cols();
    for r in 0..x.rows() {
        weighted_softmax_row(x.row(r), weights, &mut out.data_mut()[r * cols..(r + 1) * cols]);
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf holding data (inputs, constants, parameters).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn bind(&mut self, params: &ParamSet) -> BoundParams {
        let vars = params.tensors().map(|t| self.leaf(t.clone())).collect();
        BoundParams { vars }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(
            ta.cols(),
            tb.rows(),
            "matmul: {:?} · {:?}",
            ta.shape(),
            tb.shape()
        );
        let v = matmul(ta, tb);
        self.push(v, Op::MatMul(a, b))
    }

    /// Adds the `1 × c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let v = self
            .value(a)
            .add_row(self.value(bias))
            .expect("add_row: bias must be 1 × cols");
        self.push(v, Op::AddRow(a, bias))
    }

    fn zip_with(&mut self, a: Var, b: Var, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        unary_shape_same(ta, tb, name);
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let v = Tensor::from_vec(ta.rows(), ta.cols(), data).expect("same shape");
        self.push(v, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let v = self.value(a).map(f);
        self.push(v, op)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + k)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a), f64::abs)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, Op::Log(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a), |x| x * x)
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let v = softmax_rows(self.value(x), None);
        self.push(v, Op::Softmax(x))
    }

    /// Row-wise softmax of `x + log(weights)`; zero weights give exact zeros.
    pub fn weighted_softmax(&mut self, x: Var, weights: &[f64]) -> Var {
        assert_eq!(weights.len(), self.value(x).cols(), "weighted_softmax: weight length");
        let v = softmax_rows(self.value(x), Some(weights));
        // the weights only shift logits, so backward needs nothing beyond the output
        self.push(v, Op::Softmax(x))
    }

    pub fn log_sum_exp(&mut self, x: Var) -> Var {
        self.lse_impl(x, None)
    }

    /// Row-wise `log Σ_a w_a·exp(x_a)`.
    pub fn weighted_log_sum_exp(&mut self, x: Var, weights: &[f64]) -> Var {
        assert_eq!(weights.len(), self.value(x).cols(), "weighted_log_sum_exp: weight length");
        self.lse_impl(x, Some(weights.to_vec()))
    }

    fn lse_impl(&mut self, x: Var, weights: Option<Vec<f64>>) -> Var {
        let t = self.value(x);
        let data = (0..t.rows())
            .map(|r| log_sum_exp(t.row(r), weights.as_deref()))
            .collect();
        let v = Tensor::from_vec(t.rows(), 1, data).expect("rows × 1");
        self.push(v, Op::LogSumExp { x, weights })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Sums each row, producing `rows × 1`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        let v = Tensor::from_vec(t.rows(), 1, data).expect("rows × 1");
        self.push(v, Op::SumRows(a))
    }

    /// Picks column `index[r]` of each row `r`, producing `rows × 1`.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Var {
        let t = self.value(x);
        assert_eq!(index.len(), t.rows(), "gather: one index per row");
        let data = index
            .iter()
            .enumerate()
            .map(|(r, &c)| {
                assert!(c < t.cols(), "gather: column {c} out of range");
                t.get(r, c)
            })
            .collect();
        let v = Tensor::from_vec(t.rows(), 1, data).expect("rows × 1");
        self.push(
            v,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        )
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self.value(a).clone().reshaped(rows, cols);
        self.push(v, Op::Reshape(a))
    }

    /// Per-row vector-matrix product: row `b` of `x` (length n) times the
    /// `n × out_cols` matrix stored row-major in row `b` of `w`.
    pub fn batched_vecmat(&mut self, x: Var, w: Var, out_cols: usize) -> Var {
        let (tx, tw) = (self.value(x), self.value(w));
        let (b, n) = tx.shape();
        assert_eq!(tw.shape(), (b, n * out_cols), "batched_vecmat: weight shape");
        let mut data = vec![0.0; b * out_cols];
        for r in 0..b {
            let xr = tx.row(r);
            let wr = tw.row(r);
            let out = &mut data[r * out_cols..(r + 1) * out_cols];
            for (i, &xi) in xr.iter().enumerate() {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += xi * wr[i * out_cols + j];
                }
            }
        }
        let v = Tensor::from_vec(b, out_cols, data).expect("b × out_cols");
        self.push(v, Op::BatchedVecMat { x, w, out_cols })
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        let acc = |grads: &mut [Option<Tensor>], v: Var, contrib: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        };
        let elementwise = |x: &Tensor, f: &dyn Fn(usize, f64, f64) -> f64| {
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .enumerate()
                .map(|(k, (&gk, &xk))| f(k, gk, xk))
                .collect();
            Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (n, inner, m) = (ta.rows(), ta.cols(), tb.cols());
                // dA = G · Bᵀ
                let mut da = vec![0.0; n * inner];
                for r in 0..n {
                    let gr = g.row(r);
                    for k in 0..inner {
                        let br = tb.row(k);
                        da[r * inner + k] = gr.iter().zip(br).map(|(x, y)| x * y).sum();
                    }
                }
                // dB = Aᵀ · G
                let mut db = vec![0.0; inner * m];
                for r in 0..n {
                    let gr = g.row(r);
                    for k in 0..inner {
                        let a_rk = ta.get(r, k);
                        if a_rk == 0.0 {
                            continue;
                        }
                        for (d, &gv) in db[k * m..(k + 1) * m].iter_mut().zip(gr) {
                            *d += a_rk * gv;
                        }
                    }
                }
                acc(grads, *a, Tensor::from_vec(n, inner, da).expect("shape"));
                acc(grads, *b, Tensor::from_vec(inner, m, db).expect("shape"));
            }
            Op::AddRow(a, bias) => {
                let cols = g.cols();
                let mut db = vec![0.0; cols];
                for r in 0..g.rows() {
                    for (d, v) in db.iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                acc(grads, *a, g.clone());
                acc(grads, *bias, Tensor::row_vector(db));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(grads, *a, elementwise(tb, &|_, gk, bk| gk * bk));
                acc(grads, *b, elementwise(ta, &|_, gk, ak| gk * ak));
            }
            Op::Scale(a, k) => acc(grads, *a, g.map(|x| k * x)),
            Op::AddScalar(a) => acc(grads, *a, g.clone()),
            Op::Tanh(a) => acc(grads, *a, elementwise(out, &|_, gk, yk| gk * (1.0 - yk * yk))),
            Op::Relu(a) => {
                let x = self.value(*a);
                acc(grads, *a, elementwise(x, &|_, gk, xk| if xk > 0.0 { gk } else { 0.0 }));
            }
            Op::Abs(a) => {
                let x = self.value(*a);
                acc(grads, *a, elementwise(x, &|_, gk, xk| gk * sign(xk)));
            }
            Op::Exp(a) => acc(grads, *a, elementwise(out, &|_, gk, yk| gk * yk)),
            Op::Log(a) => {
                let x = self.value(*a);
                acc(grads, *a, elementwise(x, &|_, gk, xk| gk / xk));
            }
            Op::Square(a) => {
                let x = self.value(*a);
                acc(grads, *a, elementwise(x, &|_, gk, xk| 2.0 * gk * xk));
            }
            Op::Softmax(x) => {
                // dx = y ⊙ (g − ⟨g, y⟩) per row
                let cols = out.cols();
                let mut dx = vec![0.0; out.len()];
                for r in 0..out.rows() {
                    let (yr, gr) = (out.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for c in 0..cols {
                        dx[r * cols + c] = yr[c] * (gr[c] - dot);
                    }
                }
                acc(grads, *x, Tensor::from_vec(out.rows(), cols, dx).expect("shape"));
            }
            Op::LogSumExp { x, weights } => {
                let soft = softmax_rows(self.value(*x), weights.as_deref());
                let cols = soft.cols();
                let mut dx = soft.into_vec();
                for r in 0..out.rows() {
                    let gr = g.get(r, 0);
                    for v in &mut dx[r * cols..(r + 1) * cols] {
                        *v *= gr;
                    }
                }
                let rows = out.rows();
                acc(grads, *x, Tensor::from_vec(rows, cols, dx).expect("shape"));
            }
            Op::Sum(a) => {
                let t = self.value(*a);
                acc(grads, *a, Tensor::filled(t.rows(), t.cols(), g.data()[0]));
            }
            Op::Mean(a) => {
                let t = self.value(*a);
                acc(
                    grads,
                    *a,
                    Tensor::filled(t.rows(), t.cols(), g.data()[0] / t.len() as f64),
                );
            }
            Op::SumRows(a) => {
                let t = self.value(*a);
                let cols = t.cols();
                let mut d = vec![0.0; t.len()];
                for r in 0..t.rows() {
                    d[r * cols..(r + 1) * cols].fill(g.get(r, 0));
                }
                acc(grads, *a, Tensor::from_vec(t.rows(), cols, d).expect("shape"));
            }
            Op::Gather { x, index } => {
                let t = self.value(*x);
                let mut d = Tensor::zeros(t.rows(), t.cols());
                let cols = t.cols();
                for (r, &c) in index.iter().enumerate() {
                    d.data_mut()[r * cols + c] = g.get(r, 0);
                }
                acc(grads, *x, d);
            }
            Op::Reshape(a) => {
                let (r, c) = self.value(*a).shape();
                acc(grads, *a, g.clone().reshaped(r, c));
            }
            Op::BatchedVecMat { x, w, out_cols } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (b, n) = tx.shape();
                let m = *out_cols;
                let mut dx = vec![0.0; b * n];
                let mut dw = vec![0.0; b * n * m];
                for r in 0..b {
                    let gr = g.row(r);
                    let xr = tx.row(r);
                    let wr = tw.row(r);
                    for i in 0..n {
                        let mut s = 0.0;
                        for j in 0..m {
                            s += gr[j] * wr[i * m + j];
                            dw[r * n * m + i * m + j] = xr[i] * gr[j];
                        }
                        dx[r * n + i] = s;
                    }
                }
                acc(grads, *x, Tensor::from_vec(b, n, dx).expect("shape"));
                acc(grads, *w, Tensor::from_vec(b, n * m, dw).expect("shape"));
            }
        }
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
