//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended during the forward pass, so tape order is already a
//! topological order and the backward pass is a single reverse sweep.

use std::cell::RefCell;
use std::collections::BTreeMap;

use super::params::{GradMap, ParamSet};
use super::tensor::{self, Tensor};
use crate::error::{Result, SuhmoError};

/// Primitive kinds accepted by [`Tape::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Matmul,
    Add,
    Mul,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, len: usize },
    Tanh,
    Sigmoid,
    Softmax,
    Mean,
    Sum,
    EMax,
    LayerNorm,
    // plumbing beyond the core set
    Transpose,
    Scale { c: f64 },
    AddScalar { c: f64 },
    BroadcastBatch { batch: usize },
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    /// rank-2/3 lhs plus rank-1 rhs broadcast over leading axes
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Concat { axis: usize, parts: Vec<usize> },
    Slice { src: usize, axis: usize, start: usize },
    Tanh(usize),
    Sigmoid(usize),
    Softmax(usize),
    Mean(usize),
    Sum(usize),
    EMax(usize, usize),
    LayerNorm { src: usize, eps: f64 },
    BroadcastBatch(usize),
    Reshape(usize),
}

struct Node {
    value: Tensor,
    grad: Tensor,
    op: Op,
}

/// Computation record for one forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<BTreeMap<String, usize>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let grad = Tensor::zeros(value.shape());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, grad, op });
        Var { tape: self, idx: nodes.len() - 1 }
    }

    /// Constant leaf; gradient is accumulated but never read back.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, v: f64) -> Var<'_> {
        self.constant(Tensor::scalar(v))
    }

    /// Trainable leaf looked up from `params` by name. Binding the same name
    /// again returns the existing node, so every use of a parameter in the
    /// graph shares one leaf and its gradients accumulate there.
    pub fn param<'t>(&'t self, params: &ParamSet, name: &str) -> Var<'t> {
        if let Some(&idx) = self.params.borrow().get(name) {
            return Var { tape: self, idx };
        }
        let value = params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
            .clone();
        let var = self.push(value, Op::Leaf);
        self.params.borrow_mut().insert(name.to_string(), var.idx);
        var
    }

    pub fn value(&self, var: Var<'_>) -> Tensor {
        self.nodes.borrow()[var.idx].value.clone()
    }

    pub fn apply<'t>(&'t self, kind: Primitive, operands: &[Var<'t>]) -> Result<Var<'t>> {
        let arity_err = |want: &str| {
            SuhmoError::Invalid(format!("{kind:?}: expected {want} operands, got {}", operands.len()))
        };
        match kind {
            Primitive::Matmul => match operands {
                [a, b] => a.checked_matmul(*b),
                _ => Err(arity_err("2")),
            },
            Primitive::Add => match operands {
                [a, b] => a.checked_add(*b),
                _ => Err(arity_err("2")),
            },
            Primitive::Mul => match operands {
                [a, b] => a.checked_mul(*b),
                _ => Err(arity_err("2")),
            },
            Primitive::Concat { axis } => {
                if operands.is_empty() {
                    return Err(arity_err(">= 1"));
                }
                self.checked_concat(axis, operands)
            }
            Primitive::Slice { axis, start, len } => match operands {
                [a] => a.checked_slice(axis, start, len),
                _ => Err(arity_err("1")),
            },
            Primitive::Tanh => match operands {
                [a] => Ok(a.tanh()),
                _ => Err(arity_err("1")),
            },
            Primitive::Sigmoid => match operands {
                [a] => Ok(a.sigmoid()),
                _ => Err(arity_err("1")),
            },
            Primitive::Softmax => match operands {
                [a] => Ok(a.softmax()),
                _ => Err(arity_err("1")),
            },
            Primitive::Mean => match operands {
                [a] => Ok(a.mean()),
                _ => Err(arity_err("1")),
            },
            Primitive::Sum => match operands {
                [a] => Ok(a.sum()),
                _ => Err(arity_err("1")),
            },
            Primitive::EMax => match operands {
                [a, b] => a.checked_emax(*b),
                _ => Err(arity_err("2")),
            },
            Primitive::LayerNorm => match operands {
                [a] => Ok(a.layer_norm()),
                _ => Err(arity_err("1")),
            },
            Primitive::Transpose => match operands {
                [a] => Ok(a.transpose()),
                _ => Err(arity_err("1")),
            },
            Primitive::Scale { c } => match operands {
                [a] => Ok(a.scale(c)),
                _ => Err(arity_err("1")),
            },
            Primitive::AddScalar { c } => match operands {
                [a] => Ok(a.add_scalar(c)),
                _ => Err(arity_err("1")),
            },
            Primitive::BroadcastBatch { batch } => match operands {
                [a] => a.checked_broadcast_batch(batch),
                _ => Err(arity_err("1")),
            },
        }
    }

    fn checked_concat<'t>(&'t self, axis: usize, parts: &[Var<'t>]) -> Result<Var<'t>> {
        let nodes = self.nodes.borrow();
        let first = nodes[parts[0].idx].value.shape().to_vec();
        let rank = first.len();
        if axis >= rank {
            return Err(SuhmoError::ShapeMismatch {
                primitive: "concat".into(),
                shapes: format!("axis {axis} out of range for {first:?}"),
            });
        }
        let mut out_shape = first.clone();
        out_shape[axis] = 0;
        for p in parts {
            let s = nodes[p.idx].value.shape();
            let compatible = s.len() == rank
                && s.iter().enumerate().all(|(i, &d)| i == axis || d == first[i]);
            if !compatible {
                return Err(SuhmoError::ShapeMismatch {
                    primitive: "concat".into(),
                    shapes: format!("{first:?} vs {s:?} along axis {axis}"),
                });
            }
            out_shape[axis] += s[axis];
        }
        let (outer, _, inner) = axis_strides(&first, axis);
        let mut data = vec![0.0; out_shape.iter().product()];
        let total_axis = out_shape[axis];
        let mut offset = 0usize;
        for p in parts {
            let t = &nodes[p.idx].value;
            let alen = t.shape()[axis];
            for o in 0..outer {
                let src = &t.data()[o * alen * inner..(o + 1) * alen * inner];
                let dst_start = (o * total_axis + offset) * inner;
                data[dst_start..dst_start + alen * inner].copy_from_slice(src);
            }
            offset += alen;
        }
        drop(nodes);
        Ok(self.push(
            Tensor::new(data, &out_shape),
            Op::Concat { axis, parts: parts.iter().map(|p| p.idx).collect() },
        ))
    }

    /// Reverse sweep from `loss`; returns one gradient per leaf of `params`,
    /// zero for leaves that did not participate in this graph.
    pub fn backward(&self, loss: Var<'_>, params: &ParamSet) -> Result<GradMap> {
        {
            let mut nodes = self.nodes.borrow_mut();
            if !nodes[loss.idx].value.is_scalar() {
                return Err(SuhmoError::NonScalarLoss(format!(
                    "{:?}",
                    nodes[loss.idx].value.shape()
                )));
            }
            for n in nodes.iter_mut() {
                n.grad = Tensor::zeros(n.value.shape());
            }
            nodes[loss.idx].grad.data_mut()[0] = 1.0;
            for i in (0..=loss.idx).rev() {
                propagate(&mut nodes, i);
            }
        }
        let nodes = self.nodes.borrow();
        let registered = self.params.borrow();
        let mut grads = GradMap::new();
        for (name, value) in params.iter() {
            let g = match registered.get(name) {
                Some(&idx) => nodes[idx].grad.clone(),
                None => Tensor::zeros(value.shape()),
            };
            grads.insert(name.clone(), g);
        }
        Ok(grads)
    }
}

fn axis_strides(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let alen = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, alen, inner)
}

/// Two-node accessor that works around a single `Vec` borrow.
fn value_grad<'a>(nodes: &'a mut [Node], parent: usize, child: usize) -> (&'a mut Node, &'a Node) {
    debug_assert!(parent < child);
    let (lo, hi) = nodes.split_at_mut(child);
    (&mut lo[parent], &hi[0])
}

fn propagate(nodes: &mut [Node], i: usize) {
    let op = nodes[i].op.clone();
    match op {
        Op::Leaf => {}
        Op::Matmul(a, b) => {
            let (grad_c, val_a, val_b) = {
                let n = &nodes[i];
                (n.grad.clone(), nodes[a].value.clone(), nodes[b].value.clone())
            };
            let da = tensor::matmul(&grad_c, &tensor::transpose(&val_b)).unwrap();
            accumulate_reduced(&mut nodes[a].grad, &da);
            let db = tensor::matmul(&tensor::transpose(&val_a), &grad_c).unwrap();
            accumulate_reduced(&mut nodes[b].grad, &db);
        }
        Op::Transpose(a) => {
            let dt = tensor::transpose(&nodes[i].grad);
            acc(&mut nodes[a].grad, dt.data());
        }
        Op::Add(a, b) => {
            let g = nodes[i].grad.clone();
            acc(&mut nodes[a].grad, g.data());
            acc(&mut nodes[b].grad, g.data());
        }
        Op::AddRow(a, b) => {
            let g = nodes[i].grad.clone();
            acc(&mut nodes[a].grad, g.data());
            let n = nodes[b].value.numel();
            let gb = nodes[b].grad.data_mut();
            for (j, v) in g.data().iter().enumerate() {
                gb[j % n] += v;
            }
        }
        Op::Mul(a, b) => {
            let g = nodes[i].grad.clone();
            let (va, vb) = (nodes[a].value.clone(), nodes[b].value.clone());
            for (ga, (gv, bv)) in
                nodes[a].grad.data_mut().iter_mut().zip(g.data().iter().zip(vb.data()))
            {
                *ga += gv * bv;
            }
            for (gb, (gv, av)) in
                nodes[b].grad.data_mut().iter_mut().zip(g.data().iter().zip(va.data()))
            {
                *gb += gv * av;
            }
        }
        Op::Scale(a, c) => {
            let g = nodes[i].grad.clone();
            for (ga, gv) in nodes[a].grad.data_mut().iter_mut().zip(g.data()) {
                *ga += c * gv;
            }
        }
        Op::AddScalar(a) => {
            let g = nodes[i].grad.clone();
            acc(&mut nodes[a].grad, g.data());
        }
        Op::Concat { axis, parts } => {
            let g = nodes[i].grad.clone();
            let total_shape = nodes[i].value.shape().to_vec();
            let (outer, total_axis, inner) = axis_strides(&total_shape, axis);
            let mut offset = 0usize;
            for p in parts {
                let alen = nodes[p].value.shape()[axis];
                let gp = nodes[p].grad.data_mut();
                for o in 0..outer {
                    let src_start = (o * total_axis + offset) * inner;
                    for (d, s) in gp[o * alen * inner..(o + 1) * alen * inner]
                        .iter_mut()
                        .zip(&g.data()[src_start..src_start + alen * inner])
                    {
                        *d += s;
                    }
                }
                offset += alen;
            }
        }
        Op::Slice { src, axis, start } => {
            let (parent, child) = value_grad(nodes, src, i);
            let src_shape = parent.value.shape().to_vec();
            let (outer, total_axis, inner) = axis_strides(&src_shape, axis);
            let alen = child.value.shape()[axis];
            let gp = parent.grad.data_mut();
            let g = child.grad.data();
            for o in 0..outer {
                let dst_start = (o * total_axis + start) * inner;
                for (j, s) in g[o * alen * inner..(o + 1) * alen * inner].iter().enumerate() {
                    gp[dst_start + j] += s;
                }
            }
        }
        Op::Tanh(a) => {
            let (parent, child) = value_grad(nodes, a, i);
            for ((ga, y), gv) in parent
                .grad
                .data_mut()
                .iter_mut()
                .zip(child.value.data())
                .zip(child.grad.data())
            {
                *ga += gv * (1.0 - y * y);
            }
        }
        Op::Sigmoid(a) => {
            let (parent, child) = value_grad(nodes, a, i);
            for ((ga, y), gv) in parent
                .grad
                .data_mut()
                .iter_mut()
                .zip(child.value.data())
                .zip(child.grad.data())
            {
                *ga += gv * y * (1.0 - y);
            }
        }
        Op::Softmax(a) => {
            let (parent, child) = value_grad(nodes, a, i);
            let shape = child.value.shape().to_vec();
            let cols = *shape.last().unwrap();
            let y = child.value.data();
            let g = child.grad.data();
            let ga = parent.grad.data_mut();
            for r in 0..y.len() / cols {
                let o = r * cols;
                let dot: f64 = (0..cols).map(|j| g[o + j] * y[o + j]).sum();
                for j in 0..cols {
                    ga[o + j] += y[o + j] * (g[o + j] - dot);
                }
            }
        }
        Op::Mean(a) => {
            let g = nodes[i].grad.item();
            let n = nodes[a].value.numel() as f64;
            for ga in nodes[a].grad.data_mut() {
                *ga += g / n;
            }
        }
        Op::Sum(a) => {
            let g = nodes[i].grad.item();
            for ga in nodes[a].grad.data_mut() {
                *ga += g;
            }
        }
        Op::EMax(a, b) => {
            // ties route to the first operand
            let g = nodes[i].grad.clone();
            let (va, vb) = (nodes[a].value.clone(), nodes[b].value.clone());
            for (j, gv) in g.data().iter().enumerate() {
                if va.data()[j] >= vb.data()[j] {
                    nodes[a].grad.data_mut()[j] += gv;
                } else {
                    nodes[b].grad.data_mut()[j] += gv;
                }
            }
        }
        Op::LayerNorm { src, eps } => {
            let (parent, child) = value_grad(nodes, src, i);
            let shape = child.value.shape().to_vec();
            let cols = *shape.last().unwrap();
            let x = parent.value.data().to_vec();
            let y = child.value.data();
            let g = child.grad.data();
            let ga = parent.grad.data_mut();
            for r in 0..y.len() / cols {
                let o = r * cols;
                let mean = x[o..o + cols].iter().sum::<f64>() / cols as f64;
                let var =
                    x[o..o + cols].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                let std = (var + eps).sqrt();
                let g_mean: f64 = (0..cols).map(|j| g[o + j]).sum::<f64>() / cols as f64;
                let gy_mean: f64 =
                    (0..cols).map(|j| g[o + j] * y[o + j]).sum::<f64>() / cols as f64;
                for j in 0..cols {
                    ga[o + j] += (g[o + j] - g_mean - y[o + j] * gy_mean) / std;
                }
            }
        }
        Op::Reshape(a) => {
            let g = nodes[i].grad.clone();
            acc(&mut nodes[a].grad, g.data());
        }
        Op::BroadcastBatch(a) => {
            let g = nodes[i].grad.clone();
            let n = nodes[a].value.numel();
            let ga = nodes[a].grad.data_mut();
            for (j, v) in g.data().iter().enumerate() {
                ga[j % n] += v;
            }
        }
    }
}

fn acc(dst: &mut Tensor, src: &[f64]) {
    for (d, s) in dst.data_mut().iter_mut().zip(src) {
        *d += s;
    }
}

/// Accumulate `src` into `dst`, summing over the batch axis when `dst` is rank 2
/// and `src` rank 3 (gradient of a broadcast matmul operand).
fn accumulate_reduced(dst: &mut Tensor, src: &Tensor) {
    if dst.shape() == src.shape() {
        acc(dst, src.data());
    } else {
        let n = dst.numel();
        let d = dst.data_mut();
        for (j, v) in src.data().iter().enumerate() {
            d[j % n] += v;
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.idx].value.shape().to_vec()
    }

    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.idx].value.item()
    }

    fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.idx].value)
    }

    pub fn checked_matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            tensor::matmul(&nodes[self.idx].value, &nodes[rhs.idx].value)?
        };
        Ok(self.tape.push(v, Op::Matmul(self.idx, rhs.idx)))
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        self.checked_matmul(rhs).unwrap()
    }

    pub fn transpose(self) -> Var<'t> {
        let v = self.with_value(tensor::transpose);
        self.tape.push(v, Op::Transpose(self.idx))
    }

    pub fn checked_add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.idx].value, &nodes[rhs.idx].value);
        // rank-1 rhs broadcasts over the leading axes (bias add)
        if b.rank() == 1 && a.rank() >= 2 && a.shape().last() == Some(&b.numel()) {
            let n = b.numel();
            let v = Tensor::new(
                a.data().iter().enumerate().map(|(j, x)| x + b.data()[j % n]).collect(),
                a.shape(),
            );
            drop(nodes);
            return Ok(self.tape.push(v, Op::AddRow(self.idx, rhs.idx)));
        }
        a.check_same_shape(b, "add")?;
        let v = Tensor::new(
            a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
            a.shape(),
        );
        drop(nodes);
        Ok(self.tape.push(v, Op::Add(self.idx, rhs.idx)))
    }

    pub fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.checked_add(rhs).unwrap()
    }

    pub fn checked_mul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.idx].value, &nodes[rhs.idx].value);
            a.check_same_shape(b, "mul")?;
            Tensor::new(a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect(), a.shape())
        };
        Ok(self.tape.push(v, Op::Mul(self.idx, rhs.idx)))
    }

    pub fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.checked_mul(rhs).unwrap()
    }

    pub fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.add(rhs.scale(-1.0))
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let v = self.with_value(|a| a.map(|x| c * x));
        self.tape.push(v, Op::Scale(self.idx, c))
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let v = self.with_value(|a| a.map(|x| x + c));
        self.tape.push(v, Op::AddScalar(self.idx))
    }

    pub fn checked_slice(self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.idx].value;
            let shape = a.shape();
            if axis >= shape.len() || start + len > shape[axis] {
                return Err(SuhmoError::ShapeMismatch {
                    primitive: "slice".into(),
                    shapes: format!("[{start}, {}) along axis {axis} of {shape:?}", start + len),
                });
            }
            let (outer, alen, inner) = axis_strides(shape, axis);
            let mut out_shape = shape.to_vec();
            out_shape[axis] = len;
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let s = (o * alen + start) * inner;
                data.extend_from_slice(&a.data()[s..s + len * inner]);
            }
            Tensor::new(data, &out_shape)
        };
        Ok(self.tape.push(v, Op::Slice { src: self.idx, axis, start }))
    }

    pub fn slice(self, axis: usize, start: usize, len: usize) -> Var<'t> {
        self.checked_slice(axis, start, len).unwrap()
    }

    pub fn tanh(self) -> Var<'t> {
        let v = self.with_value(|a| a.map(f64::tanh));
        self.tape.push(v, Op::Tanh(self.idx))
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = self.with_value(|a| a.map(|x| 1.0 / (1.0 + (-x).exp())));
        self.tape.push(v, Op::Sigmoid(self.idx))
    }

    /// Softmax over the last axis; each row sums to 1.
    pub fn softmax(self) -> Var<'t> {
        let v = self.with_value(|a| {
            let cols = *a.shape().last().expect("softmax on scalar");
            let mut data = a.data().to_vec();
            for row in data.chunks_mut(cols) {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    z += *v;
                }
                for v in row.iter_mut() {
                    *v /= z;
                }
            }
            Tensor::new(data, a.shape())
        });
        self.tape.push(v, Op::Softmax(self.idx))
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.with_value(|a| {
            Tensor::scalar(a.data().iter().sum::<f64>() / a.numel() as f64)
        });
        self.tape.push(v, Op::Mean(self.idx))
    }

    pub fn sum(self) -> Var<'t> {
        let v = self.with_value(|a| Tensor::scalar(a.data().iter().sum::<f64>()));
        self.tape.push(v, Op::Sum(self.idx))
    }

    pub fn checked_emax(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.idx].value, &nodes[rhs.idx].value);
            a.check_same_shape(b, "elementwise-max")?;
            Tensor::new(
                a.data().iter().zip(b.data()).map(|(x, y)| x.max(*y)).collect(),
                a.shape(),
            )
        };
        Ok(self.tape.push(v, Op::EMax(self.idx, rhs.idx)))
    }

    pub fn emax(self, rhs: Var<'t>) -> Var<'t> {
        self.checked_emax(rhs).unwrap()
    }

    /// Normalize over the last axis (no learned gain/shift).
    pub fn layer_norm(self) -> Var<'t> {
        let eps = LAYER_NORM_EPS;
        let v = self.with_value(|a| {
            let cols = *a.shape().last().expect("layer_norm on scalar");
            let mut data = a.data().to_vec();
            for row in data.chunks_mut(cols) {
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                let std = (var + eps).sqrt();
                for v in row.iter_mut() {
                    *v = (*v - mean) / std;
                }
            }
            Tensor::new(data, a.shape())
        });
        self.tape.push(v, Op::LayerNorm { src: self.idx, eps })
    }

    /// (m, n) -> (batch, m, n) by repetition; backward sums over the batch axis.
    pub fn checked_broadcast_batch(self, batch: usize) -> Result<Var<'t>> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.idx].value;
            if a.rank() != 2 {
                return Err(SuhmoError::ShapeMismatch {
                    primitive: "broadcast-batch".into(),
                    shapes: format!("{:?}", a.shape()),
                });
            }
            let (m, n) = (a.shape()[0], a.shape()[1]);
            Tensor::new(a.data().repeat(batch), &[batch, m, n])
        };
        Ok(self.tape.push(v, Op::BroadcastBatch(self.idx)))
    }

    pub fn broadcast_batch(self, batch: usize) -> Var<'t> {
        self.checked_broadcast_batch(batch).unwrap()
    }

    /// Same data, new shape (element count must match).
    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        let v = self.with_value(|a| a.reshaped(shape));
        self.tape.push(v, Op::Reshape(self.idx))
    }
}
