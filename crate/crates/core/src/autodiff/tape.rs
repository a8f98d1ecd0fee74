use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::tensor::{sigmoid, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'g> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Concat(Vec<Var>),
    Relu(Var),
    Sigmoid(Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Reverse(Var),
    Gin {
        x: Var,
        eps: Var,
        graph: &'g UndirectedGraph,
    },
    Mse {
        pred: Var,
        target: Tensor,
    },
    BceLogits {
        logits: Var,
        labels: Tensor,
    },
    Sum(Var),
}

struct Node<'g> {
    value: Tensor,
    op: Op<'g>,
    needs_grad: bool,
}

/// Records operations in execution order. Inputs always precede the nodes
/// that consume them, so a reverse sweep over the node list is a valid
/// backward order.
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
    consumed: bool,
}

/// Gradients of a scalar loss with respect to every node that needed one.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op<'g>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// A trainable leaf: gradients flow to it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", va.shape(), vb.shape()),
            ));
        }
        let out = va.matmul(vb);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    /// Adds the `1 x m` row `bias` to every row of the `n x m` input.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + row {:?}", vx.shape(), vb.shape()),
            ));
        }
        let mut out = vx.clone();
        for r in 0..out.rows() {
            out.row_mut(r)
                .iter_mut()
                .zip(vb.data())
                .for_each(|(o, b)| *o += b);
        }
        let needs = self.needs(x) || self.needs(bias);
        Ok(self.push(out, Op::AddRow(x, bias), needs))
    }

    /// Joins inputs with equal row counts side by side, so row `i` of the
    /// result is the concatenation of the inputs' rows `i`.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let rows = self.value(*first).rows();
        if let Some(bad) = parts.iter().find(|p| self.value(**p).rows() != rows) {
            return Err(Error::shape(
                "concat_cols",
                format!("{} rows vs {}", self.value(*bad).rows(), rows),
            ));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for p in parts {
                let src = self.value(*p).row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let needs = parts.iter().any(|p| self.needs(*p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), needs))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let needs = self.needs(x);
        self.push(out, Op::Relu(x), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        let needs = self.needs(x);
        self.push(out, Op::Sigmoid(x), needs)
    }

    /// Elementwise product with a constant of the same shape (dropout masks,
    /// treatment-arm selectors).
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        same_shape("mul_const", self.value(x), &c)?;
        let mut out = self.value(x).clone();
        out.data_mut()
            .iter_mut()
            .zip(c.data())
            .for_each(|(o, m)| *o *= m);
        let needs = self.needs(x);
        Ok(self.push(out, Op::MulConst(x, c), needs))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let needs = self.needs(x);
        self.push(out, Op::Scale(x, factor), needs)
    }

    /// Gradient reversal: identity forward, negated gradient backward.
    pub fn gradient_reversal(&mut self, x: Var) -> Var {
        let out = self.value(x).clone();
        let needs = self.needs(x);
        self.push(out, Op::Reverse(x), needs)
    }

    /// GIN neighborhood aggregation `out_i = (1 + ε) x_i + Σ_{j ∈ N(i)} x_j`,
    /// with `ε` a `1x1` value.
    pub fn gin_aggregate(&mut self, graph: &'g UndirectedGraph, x: Var, eps: Var) -> Result<Var> {
        let (vx, ve) = (self.value(x), self.value(eps));
        if vx.rows() != graph.node_count() {
            return Err(Error::shape(
                "gin_aggregate",
                format!("{} rows for {} nodes", vx.rows(), graph.node_count()),
            ));
        }
        if ve.shape() != (1, 1) {
            return Err(Error::shape("gin_aggregate", "epsilon must be 1x1"));
        }
        let out = aggregate(graph, vx, 1.0 + ve.item());
        let needs = self.needs(x) || self.needs(eps);
        Ok(self.push(out, Op::Gin { x, eps, graph }, needs))
    }

    /// Mean squared error over all elements.
    pub fn mse_loss(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        same_shape("mse_loss", self.value(pred), &target)?;
        let p = self.value(pred);
        let n = p.len().max(1) as f64;
        let loss = p
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        let needs = self.needs(pred);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target }, needs))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against 0/1 labels, in
    /// the overflow-free form `max(z,0) - z y + ln(1 + e^{-|z|})`.
    pub fn bce_with_logits_loss(&mut self, logits: Var, labels: Tensor) -> Result<Var> {
        same_shape("bce_with_logits_loss", self.value(logits), &labels)?;
        if labels.data().iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidInput("BCE labels must be 0 or 1".into()));
        }
        let z = self.value(logits);
        let n = z.len().max(1) as f64;
        let loss = z
            .data()
            .iter()
            .zip(labels.data())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::BceLogits { logits, labels },
            needs,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let needs = self.needs(x);
        self.push(out, Op::Sum(x), needs)
    }

    /// Propagates `d loss / d node` for every node that needs it. A tape can
    /// be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss {
                rows: shape.0,
                cols: shape.1,
            });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            let mut send = |v: Var, contribution: Tensor| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!("leaves are handled above"),
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        send(*a, g.matmul_nt(&self.nodes[b.0].value));
                    }
                    if self.nodes[b.0].needs_grad {
                        send(*b, self.nodes[a.0].value.matmul_tn(&g));
                    }
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::AddRow(x, bias) => {
                    let mut col_sums = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        col_sums
                            .data_mut()
                            .iter_mut()
                            .zip(g.row(r))
                            .for_each(|(s, v)| *s += v);
                    }
                    send(*bias, col_sums);
                    send(*x, g);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let width = self.nodes[p.0].value.cols();
                        let mut piece = Tensor::zeros(g.rows(), width);
                        for r in 0..g.rows() {
                            piece
                                .row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + width]);
                        }
                        offset += width;
                        send(*p, piece);
                    }
                }
                Op::Relu(x) => {
                    let mut out = g;
                    out.data_mut()
                        .iter_mut()
                        .zip(node.value.data())
                        .for_each(|(gv, &y)| {
                            if y <= 0.0 {
                                *gv = 0.0
                            }
                        });
                    send(*x, out);
                }
                Op::Sigmoid(x) => {
                    let mut out = g;
                    out.data_mut()
                        .iter_mut()
                        .zip(node.value.data())
                        .for_each(|(gv, &s)| *gv *= s * (1.0 - s));
                    send(*x, out);
                }
                Op::MulConst(x, c) => {
                    let mut out = g;
                    out.data_mut()
                        .iter_mut()
                        .zip(c.data())
                        .for_each(|(gv, m)| *gv *= m);
                    send(*x, out);
                }
                Op::Scale(x, factor) => send(*x, g.map(|v| v * factor)),
                Op::Reverse(x) => send(*x, g.map(|v| -v)),
                Op::Gin { x, eps, graph } => {
                    let xv = &self.nodes[x.0].value;
                    if self.nodes[eps.0].needs_grad {
                        let d_eps: f64 = xv.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
                        send(*eps, Tensor::scalar(d_eps));
                    }
                    if self.nodes[x.0].needs_grad {
                        let self_weight = 1.0 + self.nodes[eps.0].value.item();
                        // The adjacency is symmetric, so the transpose of the
                        // aggregation is the aggregation itself.
                        send(*x, aggregate(graph, &g, self_weight));
                    }
                }
                Op::Mse { pred, target } => {
                    let p = &self.nodes[pred.0].value;
                    let scale = 2.0 * g.item() / p.len().max(1) as f64;
                    let d: Vec<f64> = p
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(a, b)| scale * (a - b))
                        .collect();
                    send(*pred, Tensor::from_vec(p.rows(), p.cols(), d)?);
                }
                Op::BceLogits { logits, labels } => {
                    let z = &self.nodes[logits.0].value;
                    let scale = g.item() / z.len().max(1) as f64;
                    let d: Vec<f64> = z
                        .data()
                        .iter()
                        .zip(labels.data())
                        .map(|(&z, &y)| scale * (sigmoid(z) - y))
                        .collect();
                    send(*logits, Tensor::from_vec(z.rows(), z.cols(), d)?);
                }
                Op::Sum(x) => {
                    let (r, c) = self.nodes[x.0].value.shape();
                    send(*x, Tensor::filled(r, c, g.item()));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn aggregate(graph: &UndirectedGraph, x: &Tensor, self_weight: f64) -> Tensor {
    let mut out = x.map(|v| v * self_weight);
    for i in 0..graph.node_count() {
        for &j in graph.neighbors(i) {
            let src = x.row(j);
            out.row_mut(i)
                .iter_mut()
                .zip(src)
                .for_each(|(o, s)| *o += s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward_and_backward() {
        let mut tape = Tape::new();
        let x = tape.param(t(1, 2, &[-1.5, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        assert_eq!(tape.value(y).item(), 0.5);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 0.25);
    }

    #[test]
    fn identity_matmul_gradient_is_ones() {
        let mut tape = Tape::new();
        let a = tape.param(t(2, 2, &[3.0, -1.0, 0.5, 7.0]));
        let id = tape.constant(t(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let p = tape.matmul(a, id).unwrap();
        assert_eq!(tape.value(p), tape.value(a));
        let s = tape.sum(p);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[1.0; 4]);
        assert!(g.get(id).is_none());
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Tensor::scalar(3.0));
        let sq = tape.matmul(w, w).unwrap();
        let g = tape.backward(sq).unwrap();
        assert_eq!(g.get(w).unwrap().item(), 6.0);
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(2, 3));
        let b = tape.param(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(Error::Shape { .. })));
        let c = tape.param(Tensor::zeros(3, 3));
        assert!(tape.add(a, c).is_err());
        assert!(tape.mse_loss(a, Tensor::zeros(1, 3)).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar_and_reuse() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::zeros(2, 1));
        assert!(matches!(
            tape.backward(a),
            Err(Error::NonScalarLoss { rows: 2, cols: 1 })
        ));
        let s = tape.sum(a);
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(Error::TapeConsumed)));
    }

    #[test]
    fn gin_examples() {
        let edgeless = UndirectedGraph::empty(2);
        let mut tape = Tape::new();
        let x = tape.param(t(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let eps = tape.param(Tensor::scalar(0.0));
        let out = tape.gin_aggregate(&edgeless, x, eps).unwrap();
        assert_eq!(tape.value(out), tape.value(x));

        let pair = UndirectedGraph::from_edges(2, &[(0, 1)]).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(t(2, 1, &[1.5, -4.0]));
        let eps = tape.param(Tensor::scalar(0.0));
        let out = tape.gin_aggregate(&pair, x, eps).unwrap();
        assert_eq!(tape.value(out).data(), &[-2.5, -2.5]);

        let triangle = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut tape = Tape::new();
        let x = tape.param(Tensor::filled(3, 2, 1.0));
        let eps = tape.param(Tensor::scalar(0.5));
        let out = tape.gin_aggregate(&triangle, x, eps).unwrap();
        assert_eq!(tape.value(out).data(), &[3.5; 6]);
        let s = tape.sum(out);
        let g = tape.backward(s).unwrap();
        // each row feeds itself (1.5) and its two neighbors (1 each)
        assert_eq!(g.get(x).unwrap().data(), &[3.5; 6]);
        assert_eq!(g.get(eps).unwrap().item(), 6.0);
    }

    #[test]
    fn gin_row_mismatch() {
        let g = UndirectedGraph::empty(3);
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(2, 1));
        let eps = tape.param(Tensor::scalar(0.0));
        assert!(tape.gin_aggregate(&g, x, eps).is_err());
    }

    #[test]
    fn gradient_reversal_contract() {
        let x0 = t(2, 2, &[0.3, -1.2, 5.5, 1e-3]);
        let mut tape = Tape::new();
        let x = tape.param(x0.clone());
        let r = tape.gradient_reversal(x);
        assert_eq!(tape.value(r), &x0);
        let s = tape.sum(r);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[-1.0; 4]);

        let mut tape = Tape::new();
        let x = tape.param(x0);
        let r1 = tape.gradient_reversal(x);
        let r2 = tape.gradient_reversal(r1);
        let s = tape.sum(r2);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn loss_values() {
        let mut tape = Tape::new();
        let p = tape.param(t(2, 1, &[0.0, 2.0]));
        let l = tape.mse_loss(p, t(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(tape.value(l).item(), 2.5);
        let same = tape.mse_loss(p, t(2, 1, &[0.0, 2.0])).unwrap();
        assert_eq!(tape.value(same).item(), 0.0);

        let z = tape.param(Tensor::scalar(0.0));
        let b = tape.bce_with_logits_loss(z, Tensor::scalar(1.0)).unwrap();
        assert!((tape.value(b).item() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(tape.bce_with_logits_loss(z, Tensor::scalar(0.5)).is_err());
    }

    #[test]
    fn bce_is_stable_for_large_logits() {
        let mut tape = Tape::new();
        let z = tape.param(t(2, 1, &[800.0, -800.0]));
        let l = tape.bce_with_logits_loss(z, t(2, 1, &[0.0, 1.0])).unwrap();
        assert!((tape.value(l).item() - 800.0).abs() < 1e-9);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[0.5, -0.5]);
    }
}
