//! Reverse-mode automatic differentiation over a define-by-run tape.
//!
//! The primitive set is deliberately closed: matmul, elementwise add/sub/mul,
//! bias broadcast, column concatenation/slicing, row repetition, max over
//! row segments, mean, relu/leaky-relu and mean squared error. That is the
//! complete vocabulary the shape encoder and noise decoder need, and keeping
//! the list short keeps the backward pass auditable.
//!
//! Values are computed eagerly when an op is recorded; `backward` walks the
//! tape in reverse insertion order (a valid topological order by
//! construction) and accumulates gradients deterministically.

use crate::error::{Error, Result};
use crate::kernels::{self, Act};
use crate::optim::ParamStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRef(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    MatMul(NodeRef, NodeRef),
    /// Fused act(x @ w + bias): one composite of the matmul/add/activation
    /// primitives, recorded as a single node to halve buffer traffic.
    Linear {
        x: NodeRef,
        w: NodeRef,
        bias: NodeRef,
        act: Act,
    },
    Add(NodeRef, NodeRef),
    AddBias(NodeRef, NodeRef),
    Sub(NodeRef, NodeRef),
    Mul(NodeRef, NodeRef),
    Relu(NodeRef),
    LeakyRelu(NodeRef, f32),
    ConcatCols(Vec<NodeRef>),
    SliceCols(NodeRef, usize, usize),
    SegmentMax(NodeRef, Vec<u32>),
    RepeatRows(NodeRef, usize),
    MeanAll(NodeRef),
    Mse(NodeRef, NodeRef),
}

struct Node {
    op: Op,
    value: Tensor,
    grad: Option<Vec<f32>>,
}

/// A recorded computation. Parameters are copied in by name so the graph
/// owns everything it touches.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn value(&self, node: NodeRef) -> &Tensor {
        &self.nodes[node.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeRef {
        self.nodes.push(Node {
            op,
            value,
            grad: None,
        });
        NodeRef(self.nodes.len() - 1)
    }

    fn mat(&self, node: NodeRef, op: &'static str) -> Result<(usize, usize)> {
        self.nodes[node.0].value.as_matrix().map_err(|_| {
            Error::invalid(format!(
                "{op}: operand has unsupported shape {:?}",
                self.nodes[node.0].value.shape()
            ))
        })
    }

    fn same_shape(&self, op: &'static str, a: NodeRef, b: NodeRef) -> Result<()> {
        let sa = self.nodes[a.0].value.shape();
        let sb = self.nodes[b.0].value.shape();
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Constant leaf; no gradient is reported for it.
    pub fn input(&mut self, value: Tensor) -> NodeRef {
        self.push(Op::Input, value)
    }

    /// Parameter leaf bound to `name` in the store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeRef> {
        let t = store
            .get(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?;
        Ok(self.push(Op::Param(name.to_string()), t.clone()))
    }

    pub fn matmul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        let (m, ka) = self.mat(a, "matmul")?;
        let (kb, n) = self.mat(b, "matmul")?;
        if ka != kb {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.nodes[a.0].value.shape().to_vec(),
                rhs: self.nodes[b.0].value.shape().to_vec(),
            });
        }
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::matmul(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
            m,
            ka,
            n,
            out.values_mut(),
        );
        Ok(self.push(Op::MatMul(a, b), out))
    }

    /// Fused act(x @ w + bias).
    pub fn linear(&mut self, x: NodeRef, w: NodeRef, bias: NodeRef, act: Act) -> Result<NodeRef> {
        let (m, kx) = self.mat(x, "linear")?;
        let (kw, n) = self.mat(w, "linear")?;
        if kx != kw {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: self.nodes[x.0].value.shape().to_vec(),
                rhs: self.nodes[w.0].value.shape().to_vec(),
            });
        }
        let (br, bc) = self.mat(bias, "linear")?;
        if br != 1 || bc != n {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: vec![1, n],
                rhs: self.nodes[bias.0].value.shape().to_vec(),
            });
        }
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::linear_act(
            self.nodes[x.0].value.values(),
            self.nodes[w.0].value.values(),
            self.nodes[bias.0].value.values(),
            m,
            kx,
            n,
            act,
            out.values_mut(),
        );
        Ok(self.push(Op::Linear { x, w, bias, act }, out))
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.same_shape("add", a, b)?;
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::add(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
            out.values_mut(),
        );
        Ok(self.push(Op::Add(a, b), out))
    }

    /// a[r x c] + bias[c] broadcast over rows.
    pub fn add_bias(&mut self, a: NodeRef, bias: NodeRef) -> Result<NodeRef> {
        let (r, c) = self.mat(a, "add_bias")?;
        let (br, bc) = self.mat(bias, "add_bias")?;
        if br != 1 || bc != c {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: self.nodes[a.0].value.shape().to_vec(),
                rhs: self.nodes[bias.0].value.shape().to_vec(),
            });
        }
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::add_bias(
            self.nodes[a.0].value.values(),
            self.nodes[bias.0].value.values(),
            r,
            c,
            out.values_mut(),
        );
        Ok(self.push(Op::AddBias(a, bias), out))
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.same_shape("sub", a, b)?;
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::sub(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
            out.values_mut(),
        );
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.same_shape("mul", a, b)?;
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::mul(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
            out.values_mut(),
        );
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn relu(&mut self, a: NodeRef) -> NodeRef {
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::relu(self.nodes[a.0].value.values(), out.values_mut());
        self.push(Op::Relu(a), out)
    }

    pub fn leaky_relu(&mut self, a: NodeRef, slope: f32) -> NodeRef {
        let mut out = Tensor::zeros(self.nodes[a.0].value.shape().to_vec());
        kernels::leaky_relu(self.nodes[a.0].value.values(), slope, out.values_mut());
        self.push(Op::LeakyRelu(a, slope), out)
    }

    pub fn concat_cols(&mut self, parts: &[NodeRef]) -> Result<NodeRef> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat_cols"));
        }
        let (rows, _) = self.mat(parts[0], "concat_cols")?;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.mat(p, "concat_cols")?;
            if r != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0].0].value.shape().to_vec(),
                    rhs: self.nodes[p.0].value.shape().to_vec(),
                });
            }
            total += c;
        }
        let mut out = Tensor::zeros(vec![rows, total]);
        let views: Vec<(&[f32], usize)> = parts
            .iter()
            .map(|&p| {
                let (_, c) = self.nodes[p.0].value.as_matrix().unwrap();
                (self.nodes[p.0].value.values(), c)
            })
            .collect();
        kernels::concat_cols(&views, rows, out.values_mut());
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn slice_cols(&mut self, a: NodeRef, start: usize, end: usize) -> Result<NodeRef> {
        let (r, c) = self.mat(a, "slice_cols")?;
        if start >= end || end > c {
            return Err(Error::invalid(format!(
                "slice_cols range {start}..{end} out of bounds for {c} columns"
            )));
        }
        let mut out = Tensor::zeros(vec![r, end - start]);
        kernels::slice_cols(
            self.nodes[a.0].value.values(),
            r,
            c,
            start,
            end,
            out.values_mut(),
        );
        Ok(self.push(Op::SliceCols(a, start, end), out))
    }

    /// Column-wise max over consecutive `seg`-row blocks (the set axis).
    pub fn segment_max(&mut self, a: NodeRef, seg: usize) -> Result<NodeRef> {
        let (r, c) = self.mat(a, "segment_max")?;
        if seg == 0 || r % seg != 0 {
            return Err(Error::invalid(format!(
                "segment_max: {r} rows not divisible by segment length {seg}"
            )));
        }
        let segments = r / seg;
        let mut out = Tensor::zeros(vec![segments, c]);
        let mut argmax = vec![0u32; segments * c];
        kernels::segment_max(
            self.nodes[a.0].value.values(),
            r,
            c,
            seg,
            out.values_mut(),
            &mut argmax,
        );
        Ok(self.push(Op::SegmentMax(a, argmax), out))
    }

    pub fn repeat_rows(&mut self, a: NodeRef, reps: usize) -> Result<NodeRef> {
        let (r, c) = self.mat(a, "repeat_rows")?;
        if reps == 0 {
            return Err(Error::invalid("repeat_rows: reps must be positive"));
        }
        let mut out = Tensor::zeros(vec![r * reps, c]);
        kernels::repeat_rows(self.nodes[a.0].value.values(), r, c, reps, out.values_mut());
        Ok(self.push(Op::RepeatRows(a, reps), out))
    }

    pub fn mean_all(&mut self, a: NodeRef) -> NodeRef {
        let m = kernels::mean_all(self.nodes[a.0].value.values());
        self.push(Op::MeanAll(a), Tensor::scalar(m))
    }

    /// Mean squared error between two same-shape tensors.
    pub fn mse(&mut self, a: NodeRef, b: NodeRef) -> Result<NodeRef> {
        self.same_shape("mse", a, b)?;
        let m = kernels::mse(
            self.nodes[a.0].value.values(),
            self.nodes[b.0].value.values(),
        );
        Ok(self.push(Op::Mse(a, b), Tensor::scalar(m)))
    }

    fn grad_slice(&mut self, node: NodeRef) -> &mut Vec<f32> {
        let numel = self.nodes[node.0].value.numel();
        self.nodes[node.0]
            .grad
            .get_or_insert_with(|| vec![0.0; numel])
    }

    /// Hand a fully-formed gradient to a node: moved in for the first
    /// consumer, accumulated for later ones.
    fn give_grad(&mut self, node: NodeRef, delta: Vec<f32>) {
        match &mut self.nodes[node.0].grad {
            slot @ None => *slot = Some(delta),
            Some(g) => {
                for (dst, src) in g.iter_mut().zip(&delta) {
                    *dst += src;
                }
            }
        }
    }

    /// Reverse-mode accumulation from a scalar output into the store's
    /// gradient slots. Parameters not on the tape keep zero gradients.
    pub fn backward(&mut self, output: NodeRef, store: &mut ParamStore) -> Result<()> {
        if self.nodes[output.0].value.numel() != 1 {
            return Err(Error::NonScalarOutput {
                shape: self.nodes[output.0].value.shape().to_vec(),
            });
        }
        store.zero_grads();
        self.grad_slice(output)[0] = 1.0;

        for i in (0..=output.0).rev() {
            // A node's gradient is complete once every consumer (all created
            // later) has been processed, so it can be moved out here. Param
            // gradients flow into the store at their own turn.
            let g = match self.nodes[i].grad.take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(name) => {
                    let name = name.clone();
                    store.accumulate_grad(&name, &g)?;
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let (m, k) = self.nodes[a.0].value.as_matrix().unwrap();
                    let (_, n) = self.nodes[b.0].value.as_matrix().unwrap();
                    // dA += G @ B^T
                    let mut bt = vec![0.0; k * n];
                    kernels::transpose(self.nodes[b.0].value.values(), k, n, &mut bt);
                    let mut da = vec![0.0; m * k];
                    kernels::matmul(&g, &bt, m, n, k, &mut da);
                    self.give_grad(a, da);
                    // dB += A^T @ G
                    let mut db = vec![0.0; k * n];
                    kernels::matmul_at_b(self.nodes[a.0].value.values(), &g, m, k, n, &mut db);
                    self.give_grad(b, db);
                }
                Op::Linear { x, w, bias, act } => {
                    let (x, w, bias, act) = (*x, *w, *bias, *act);
                    let (m, k) = self.nodes[x.0].value.as_matrix().unwrap();
                    let (_, n) = self.nodes[w.0].value.as_matrix().unwrap();
                    // d(pre-activation) from the output's sign.
                    let mut dpre = g;
                    for (d, &o) in dpre.iter_mut().zip(self.nodes[i].value.values()) {
                        *d *= act.derivative_from_output(o);
                    }
                    // dX += dpre @ W^T
                    let mut wt = vec![0.0; k * n];
                    kernels::transpose(self.nodes[w.0].value.values(), k, n, &mut wt);
                    let mut dx = vec![0.0; m * k];
                    kernels::matmul(&dpre, &wt, m, n, k, &mut dx);
                    self.give_grad(x, dx);
                    // dW += X^T @ dpre
                    let mut dw = vec![0.0; k * n];
                    kernels::matmul_at_b(self.nodes[x.0].value.values(), &dpre, m, k, n, &mut dw);
                    self.give_grad(w, dw);
                    // dbias += column sums of dpre.
                    let gb = self.grad_slice(bias);
                    for row in dpre.chunks(n) {
                        for (dst, &src) in gb.iter_mut().zip(row) {
                            *dst += src;
                        }
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    for (dst, src) in self.grad_slice(a).iter_mut().zip(&g) {
                        *dst += src;
                    }
                    for (dst, src) in self.grad_slice(b).iter_mut().zip(&g) {
                        *dst += src;
                    }
                }
                Op::AddBias(a, bias) => {
                    let (a, bias) = (*a, *bias);
                    let (r, c) = self.nodes[a.0].value.as_matrix().unwrap();
                    for (dst, src) in self.grad_slice(a).iter_mut().zip(&g) {
                        *dst += src;
                    }
                    let gb = self.grad_slice(bias);
                    for row in 0..r {
                        for col in 0..c {
                            gb[col] += g[row * c + col];
                        }
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    for (dst, src) in self.grad_slice(a).iter_mut().zip(&g) {
                        *dst += src;
                    }
                    for (dst, src) in self.grad_slice(b).iter_mut().zip(&g) {
                        *dst -= src;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let bv = self.nodes[b.0].value.values().to_vec();
                    for ((dst, src), y) in self.grad_slice(a).iter_mut().zip(&g).zip(&bv) {
                        *dst += src * y;
                    }
                    let av = self.nodes[a.0].value.values().to_vec();
                    for ((dst, src), x) in self.grad_slice(b).iter_mut().zip(&g).zip(&av) {
                        *dst += src * x;
                    }
                }
                Op::Relu(a) => {
                    let a = *a;
                    let mut da = g;
                    for (d, &x) in da.iter_mut().zip(self.nodes[a.0].value.values()) {
                        if x <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    self.give_grad(a, da);
                }
                Op::LeakyRelu(a, slope) => {
                    let (a, slope) = (*a, *slope);
                    let mut da = g;
                    for (d, &x) in da.iter_mut().zip(self.nodes[a.0].value.values()) {
                        if x <= 0.0 {
                            *d *= slope;
                        }
                    }
                    self.give_grad(a, da);
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let (rows, total) = self.nodes[i].value.as_matrix().unwrap();
                    let mut off = 0;
                    for p in parts {
                        let (_, c) = self.nodes[p.0].value.as_matrix().unwrap();
                        let gp = self.grad_slice(p);
                        for r in 0..rows {
                            for j in 0..c {
                                gp[r * c + j] += g[r * total + off + j];
                            }
                        }
                        off += c;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let (a, start, end) = (*a, *start, *end);
                    let (rows, c) = self.nodes[a.0].value.as_matrix().unwrap();
                    let w = end - start;
                    let ga = self.grad_slice(a);
                    for r in 0..rows {
                        for j in 0..w {
                            ga[r * c + start + j] += g[r * w + j];
                        }
                    }
                }
                Op::SegmentMax(a, argmax) => {
                    let a = *a;
                    let argmax = argmax.clone();
                    let (_, c) = self.nodes[i].value.as_matrix().unwrap();
                    let ga = self.grad_slice(a);
                    for (out_idx, &src_row) in argmax.iter().enumerate() {
                        let col = out_idx % c;
                        ga[src_row as usize * c + col] += g[out_idx];
                    }
                }
                Op::RepeatRows(a, reps) => {
                    let (a, reps) = (*a, *reps);
                    let (r, c) = self.nodes[a.0].value.as_matrix().unwrap();
                    let ga = self.grad_slice(a);
                    for row in 0..r {
                        for rep in 0..reps {
                            let src = (row * reps + rep) * c;
                            for j in 0..c {
                                ga[row * c + j] += g[src + j];
                            }
                        }
                    }
                }
                Op::MeanAll(a) => {
                    let a = *a;
                    let n = self.nodes[a.0].value.numel() as f32;
                    let gscale = g[0] / n;
                    for dst in self.grad_slice(a).iter_mut() {
                        *dst += gscale;
                    }
                }
                Op::Mse(a, b) => {
                    let (a, b) = (*a, *b);
                    let n = self.nodes[a.0].value.numel() as f32;
                    let scale = 2.0 * g[0] / n;
                    let diff: Vec<f32> = self.nodes[a.0]
                        .value
                        .values()
                        .iter()
                        .zip(self.nodes[b.0].value.values())
                        .map(|(&x, &y)| x - y)
                        .collect();
                    for (dst, d) in self.grad_slice(a).iter_mut().zip(&diff) {
                        *dst += scale * d;
                    }
                    for (dst, d) in self.grad_slice(b).iter_mut().zip(&diff) {
                        *dst -= scale * d;
                    }
                }
            }
        }

        Ok(())
    }
}
