use super::kernels::{col2im, conv_backward_input, conv_backward_weight, conv_forward, im2col};
use super::{Real, Tensor};
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: usize, w: usize, b: usize },
    MaxPool2 { x: usize, argmax: Vec<usize> },
    Upsample2 { x: usize },
    Concat { a: usize, b: usize },
    Relu { x: usize },
    Sigmoid { x: usize },
    Add { a: usize, b: usize },
    Sum { x: usize },
    Mse { pred: usize, target: usize },
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    grad: Vec<T>,
    op: Op,
    requires_grad: bool,
}

/// Single-writer tape of tensor operations.
#[derive(Debug)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn dims4(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(Error::Shape(format!("{what} must be [N, C, H, W], got {shape:?}"))),
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            grad: Vec::new(),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    /// Records a copy of `t` as a leaf; gradients flow to it iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    /// Leaf that takes ownership of its buffer.
    pub fn input(&mut self, shape: Vec<usize>, data: Vec<T>, requires_grad: bool) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        let (shape, data) = (t.shape().to_vec(), t.into_data());
        Ok(self.push(shape, data, Op::Leaf, requires_grad))
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    /// Gradient accumulated by the last [`Graph::backward`], if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        let n = self.node(v);
        (!n.grad.is_empty()).then_some(n.grad.as_slice())
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape is consistent")
    }

    /// Adds the gradient of `v` (zero if none reached it) into `t`.
    pub fn accumulate_into(&self, v: Var, t: &mut Tensor<T>) -> Result<()> {
        let n = self.node(v);
        if n.shape != t.shape() {
            return Err(Error::Shape(format!(
                "node shape {:?} vs tensor shape {:?}",
                n.shape,
                t.shape()
            )));
        }
        if n.grad.is_empty() {
            t.accumulate_grad(&vec![T::zero(); n.value.len()])
        } else {
            t.accumulate_grad(&n.grad)
        }
    }

    /// Same-size 2-D cross-correlation with zero padding `k/2` plus bias.
    ///
    /// `x: [N, C, H, W]`, `w: [F, C, k, k]` with odd `k`, `b: [F]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (n, c, h, wd) = dims4(self.shape(x), "conv2d input")?;
        let (f, wc, kh, kw) = dims4(self.shape(w), "conv2d weight")?;
        if wc != c {
            return Err(Error::Shape(format!("conv2d weight expects {wc} channels, input has {c}")));
        }
        if kh != kw || kh % 2 == 0 {
            return Err(Error::Shape(format!("conv2d kernel must be square and odd, got {kh}x{kw}")));
        }
        if self.shape(b) != [f] {
            return Err(Error::Shape(format!("conv2d bias must be [{f}], got {:?}", self.shape(b))));
        }
        let k = kh;
        let (hw, ckk) = (h * wd, c * k * k);
        let mut out = vec![T::zero(); n * f * hw];
        let mut col = if k == 1 { Vec::new() } else { vec![T::zero(); ckk * hw] };
        {
            let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
            for ni in 0..n {
                let xi = &xv[ni * c * hw..(ni + 1) * c * hw];
                let cols: &[T] = if k == 1 {
                    xi
                } else {
                    im2col(xi, c, h, wd, k, &mut col);
                    &col
                };
                conv_forward(cols, wv, bv, f, ckk, hw, &mut out[ni * f * hw..(ni + 1) * f * hw]);
            }
        }
        let rg = self.nodes[x.0].requires_grad || self.nodes[w.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(vec![n, f, h, wd], out, Op::Conv2d { x: x.0, w: w.0, b: b.0 }, rg))
    }

    /// 2x2 max pooling, stride 2. Ties go to the first element in row-major order.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(x), "maxpool2 input")?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Shape(format!("maxpool2 needs even spatial dims, got {h}x{w}")));
        }
        let (oh, ow) = (h / 2, w / 2);
        let xv = self.value(x);
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let top = base + 2 * oy * w + 2 * ox;
                    let mut best = top;
                    for idx in [top + 1, top + w, top + w + 1] {
                        if xv[idx] > xv[best] {
                            best = idx;
                        }
                    }
                    out.push(xv[best]);
                    argmax.push(best);
                }
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![n, c, oh, ow], out, Op::MaxPool2 { x: x.0, argmax }, rg))
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample_nn2(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = dims4(self.shape(x), "upsample input")?;
        let xv = self.value(x);
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = vec![T::zero(); n * c * oh * ow];
        for plane in 0..n * c {
            for y in 0..oh {
                let src = &xv[plane * h * w + (y / 2) * w..][..w];
                let dst = &mut out[plane * oh * ow + y * ow..][..ow];
                for (xo, d) in dst.iter_mut().enumerate() {
                    *d = src[xo / 2];
                }
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![n, c, oh, ow], out, Op::Upsample2 { x: x.0 }, rg))
    }

    /// Channel concatenation; `a` occupies the leading channels.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca, h, w) = dims4(self.shape(a), "concat lhs")?;
        let (nb, cb, hb, wb) = dims4(self.shape(b), "concat rhs")?;
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::Shape(format!(
                "concat needs matching N, H, W: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let hw = h * w;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(n * (ca + cb) * hw);
        for ni in 0..n {
            out.extend_from_slice(&av[ni * ca * hw..(ni + 1) * ca * hw]);
            out.extend_from_slice(&bv[ni * cb * hw..(ni + 1) * cb * hw]);
        }
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(vec![n, ca + cb, h, w], out, Op::Concat { a: a.0, b: b.0 }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| if v > T::zero() || v.is_nan() { v } else { T::zero() }).collect();
        let (shape, rg) = (self.node(x).shape.clone(), self.node(x).requires_grad);
        self.push(shape, out, Op::Relu { x: x.0 }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = T::one();
        let out = self
            .value(x)
            .iter()
            .map(|&v| {
                if v >= T::zero() {
                    one / (one + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (one + e)
                }
            })
            .collect();
        let (shape, rg) = (self.node(x).shape.clone(), self.node(x).requires_grad);
        self.push(shape, out, Op::Sigmoid { x: x.0 }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!("add: {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(&p, &q)| p + q).collect();
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        let shape = self.node(a).shape.clone();
        Ok(self.push(shape, out, Op::Add { a: a.0, b: b.0 }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(vec![1], vec![s], Op::Sum { x: x.0 }, rg)
    }

    /// Mean of squared differences over all elements.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::Shape(format!(
                "mse_loss: {:?} vs {:?}",
                self.shape(pred),
                self.shape(target)
            )));
        }
        let (p, t) = (self.value(pred), self.value(target));
        let n = T::from_f64(p.len().max(1) as f64);
        let s: T = p.iter().zip(t).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let rg = self.nodes[pred.0].requires_grad || self.nodes[target.0].requires_grad;
        Ok(self.push(vec![1], vec![s / n], Op::Mse { pred: pred.0, target: target.0 }, rg))
    }

    /// Clears all gradients so [`Graph::backward`] may run again.
    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad.clear();
        }
        self.backward_done = false;
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Contract("backward called twice without reset_grads".into()));
        }
        if self.node(loss).value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.node(loss).shape
            )));
        }
        self.backward_done = true;
        if !self.node(loss).requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = vec![T::one()];
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || self.nodes[i].grad.is_empty() {
                continue;
            }
            let grad = std::mem::take(&mut self.nodes[i].grad);
            let contributions = self.local_grads(i, &grad);
            self.nodes[i].grad = grad;
            for (target, g) in contributions {
                let node = &mut self.nodes[target];
                if node.grad.is_empty() {
                    node.grad = g;
                } else {
                    for (a, b) in node.grad.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
        }
        Ok(())
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// Gradients of node `i` with respect to each input that requires them.
    fn local_grads(&self, i: usize, g: &[T]) -> Vec<(usize, Vec<T>)> {
        let node = &self.nodes[i];
        let mut out = Vec::new();
        match node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b } => {
                let (n, c, h, wd) = dims4(&self.nodes[x].shape, "").expect("checked in forward");
                let (f, _, k, _) = dims4(&self.nodes[w].shape, "").expect("checked in forward");
                let (hw, ckk) = (h * wd, c * k * k);
                let (xv, wv) = (&self.nodes[x].value, &self.nodes[w].value);
                let need_w = self.wants(w) || self.wants(b);
                let mut dx = if self.wants(x) { vec![T::zero(); xv.len()] } else { Vec::new() };
                let mut dw = vec![T::zero(); if need_w { wv.len() } else { 0 }];
                let mut db = vec![T::zero(); if need_w { f } else { 0 }];
                let mut col = vec![T::zero(); if k == 1 { 0 } else { ckk * hw }];
                let mut dcol = vec![T::zero(); ckk * hw];
                for ni in 0..n {
                    let gi = &g[ni * f * hw..(ni + 1) * f * hw];
                    let xi = &xv[ni * c * hw..(ni + 1) * c * hw];
                    if need_w {
                        let cols: &[T] = if k == 1 {
                            xi
                        } else {
                            im2col(xi, c, h, wd, k, &mut col);
                            &col
                        };
                        conv_backward_weight(gi, cols, f, ckk, hw, &mut dw, &mut db);
                    }
                    if !dx.is_empty() {
                        conv_backward_input(gi, wv, f, ckk, hw, &mut dcol);
                        let dxi = &mut dx[ni * c * hw..(ni + 1) * c * hw];
                        if k == 1 {
                            for (d, &v) in dxi.iter_mut().zip(&dcol) {
                                *d += v;
                            }
                        } else {
                            col2im(&dcol, c, h, wd, k, dxi);
                        }
                    }
                }
                if !dx.is_empty() {
                    out.push((x, dx));
                }
                if self.wants(w) {
                    out.push((w, dw));
                }
                if self.wants(b) {
                    out.push((b, db));
                }
            }
            Op::MaxPool2 { x, ref argmax } => {
                let mut dx = vec![T::zero(); self.nodes[x].value.len()];
                for (&src, &gv) in argmax.iter().zip(g) {
                    dx[src] += gv;
                }
                out.push((x, dx));
            }
            Op::Upsample2 { x } => {
                let (n, c, h, w) = dims4(&self.nodes[x].shape, "").expect("checked in forward");
                let (oh, ow) = (2 * h, 2 * w);
                let mut dx = vec![T::zero(); n * c * h * w];
                for plane in 0..n * c {
                    for y in 0..oh {
                        let src = &g[plane * oh * ow + y * ow..][..ow];
                        let dst = &mut dx[plane * h * w + (y / 2) * w..][..w];
                        for (xo, &v) in src.iter().enumerate() {
                            dst[xo / 2] += v;
                        }
                    }
                }
                out.push((x, dx));
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = dims4(&self.nodes[a].shape, "").expect("checked in forward");
                let cb = self.nodes[b].shape[1];
                let hw = h * w;
                let mut da = Vec::with_capacity(n * ca * hw);
                let mut dbv = Vec::with_capacity(n * cb * hw);
                for ni in 0..n {
                    let base = ni * (ca + cb) * hw;
                    da.extend_from_slice(&g[base..base + ca * hw]);
                    dbv.extend_from_slice(&g[base + ca * hw..base + (ca + cb) * hw]);
                }
                if self.wants(a) {
                    out.push((a, da));
                }
                if self.wants(b) {
                    out.push((b, dbv));
                }
            }
            Op::Relu { x } => {
                let xv = &self.nodes[x].value;
                let dx = xv
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                out.push((x, dx));
            }
            Op::Sigmoid { x } => {
                let dx = node
                    .value
                    .iter()
                    .zip(g)
                    .map(|(&s, &gv)| gv * s * (T::one() - s))
                    .collect();
                out.push((x, dx));
            }
            Op::Add { a, b } => {
                if self.wants(a) {
                    out.push((a, g.to_vec()));
                }
                if self.wants(b) {
                    out.push((b, g.to_vec()));
                }
            }
            Op::Sum { x } => {
                out.push((x, vec![g[0]; self.nodes[x].value.len()]));
            }
            Op::Mse { pred, target } => {
                let (p, t) = (&self.nodes[pred].value, &self.nodes[target].value);
                let scale = g[0] * T::from_f64(2.0 / p.len().max(1) as f64);
                let d: Vec<T> = p.iter().zip(t).map(|(&a, &b)| scale * (a - b)).collect();
                if self.wants(target) {
                    out.push((target, d.iter().map(|&v| -v).collect()));
                }
                if self.wants(pred) {
                    out.push((pred, d));
                }
            }
        }
        out
    }
}
