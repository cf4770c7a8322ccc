//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is topologically
//! sorted by construction and the backward pass is a single reverse sweep.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::{Scalar, Tensor};
use crate::error::{domain, shape, Result};
use crate::rng;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output spatial size `ceil(in / stride)`, zero padding split evenly
    /// (extra row/column at the bottom/right).
    Same,
    /// No padding.
    Valid,
}

/// Resolved 2D convolution geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub cin: usize,
    pub kh: usize,
    pub kw: usize,
    pub cout: usize,
    pub stride: (usize, usize),
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn resolve(
        input: &[usize],
        kernel: &[usize],
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 4 {
            return shape(format!(
                "conv2d wants [B,H,W,Cin] input and [kh,kw,Cin,Cout] kernel, got {input:?} and {kernel:?}"
            ));
        }
        let [batch, in_h, in_w, cin] = [input[0], input[1], input[2], input[3]];
        let [kh, kw, kcin, cout] = [kernel[0], kernel[1], kernel[2], kernel[3]];
        if kcin != cin {
            return shape(format!("kernel expects {kcin} input channels, input has {cin}"));
        }
        if stride.0 == 0 || stride.1 == 0 || kh == 0 || kw == 0 {
            return shape("conv2d stride and kernel sizes must be >= 1");
        }
        let (out_h, out_w, pad_top, pad_left) = match padding {
            Padding::Same => {
                let oh = in_h.div_ceil(stride.0);
                let ow = in_w.div_ceil(stride.1);
                let ph = ((oh.saturating_sub(1)) * stride.0 + kh).saturating_sub(in_h);
                let pw = ((ow.saturating_sub(1)) * stride.1 + kw).saturating_sub(in_w);
                (oh, ow, ph / 2, pw / 2)
            }
            Padding::Valid => {
                if kh > in_h || kw > in_w {
                    return shape(format!(
                        "kernel {kh}x{kw} does not fit input {in_h}x{in_w} without padding"
                    ));
                }
                ((in_h - kh) / stride.0 + 1, (in_w - kw) / stride.1 + 1, 0, 0)
            }
        };
        if out_h == 0 || out_w == 0 {
            return shape("conv2d output would be empty");
        }
        Ok(Self {
            batch,
            in_h,
            in_w,
            cin,
            kh,
            kw,
            cout,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    /// Input row for output row `o` and kernel row `k`, if inside the input.
    #[inline]
    fn in_row(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride.0 + k)
            .checked_sub(self.pad_top)
            .filter(|&i| i < self.in_h)
    }

    #[inline]
    fn in_col(&self, o: usize, k: usize) -> Option<usize> {
        (o * self.stride.1 + k)
            .checked_sub(self.pad_left)
            .filter(|&i| i < self.in_w)
    }
}

enum Op<T> {
    Leaf,
    Conv2d { x: Var, k: Var, g: ConvGeom },
    BiasAdd { x: Var, b: Var },
    Dense { x: Var, w: Var, b: Var },
    Relu { x: Var },
    /// Element-wise multiplication by a constant (dropout masks).
    MulConst { x: Var, c: Vec<T> },
    /// Addition of a constant (noise, fixed offsets): gradient passes through.
    AddConst { x: Var },
    AvgPool { x: Var, ph: usize, pw: usize },
    Reshape { x: Var },
    Concat { a: Var, b: Var, outer: usize, inner_a: usize, inner_b: usize },
    MeanAxis { x: Var, outer: usize, len: usize, inner: usize },
    Sum { x: Var },
    Add { a: Var, b: Var },
    Huber { pred: Var, target: Var, delta: T },
    PhaseFeatures { x: Var },
}

impl<T> Op<T> {
    fn inputs(&self) -> [Option<Var>; 3] {
        match *self {
            Op::Leaf => [None; 3],
            Op::Conv2d { x, k, .. } => [Some(x), Some(k), None],
            Op::BiasAdd { x, b } => [Some(x), Some(b), None],
            Op::Dense { x, w, b } => [Some(x), Some(w), Some(b)],
            Op::Relu { x }
            | Op::MulConst { x, .. }
            | Op::AddConst { x }
            | Op::AvgPool { x, .. }
            | Op::Reshape { x }
            | Op::MeanAxis { x, .. }
            | Op::Sum { x }
            | Op::PhaseFeatures { x } => [Some(x), None, None],
            Op::Concat { a, b, .. } | Op::Add { a, b } => [Some(a), Some(b), None],
            Op::Huber { pred, target, .. } => [Some(pred), Some(target), None],
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    /// Whether any trainable leaf feeds this node.
    needs_grad: bool,
}

/// Recording of one forward evaluation.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar with respect to every node of a tape.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let needs_grad = op.inputs().iter().flatten().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input (parameter or probed input).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// An input that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn conv2d(&mut self, x: Var, k: Var, stride: (usize, usize), padding: Padding) -> Result<Var> {
        let g = ConvGeom::resolve(self.value(x).shape(), self.value(k).shape(), stride, padding)?;
        let out = conv_forward(self.value(x).data(), self.value(k).data(), &g);
        let t = Tensor::new(vec![g.batch, g.out_h, g.out_w, g.cout], out)?;
        Ok(self.push(t, Op::Conv2d { x, k, g }))
    }

    /// Adds `bias[c]` along the last axis.
    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape();
        let c = *xs.last().unwrap_or(&0);
        if self.value(b).shape() != [c] {
            return shape(format!("bias {:?} does not match last axis of {xs:?}", self.value(b).shape()));
        }
        let mut out = self.value(x).clone();
        let bias = self.value(b).data().to_vec();
        for row in out.data_mut().chunks_mut(c) {
            for (o, &bv) in row.iter_mut().zip(&bias) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::BiasAdd { x, b }))
    }

    /// `x[B,n] · w[n,m] + b[m]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return shape(format!("dense: input {xs:?}, weights {ws:?}, bias {bs:?}"));
        }
        let (batch, n, m) = (xs[0], xs[1], ws[1]);
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let bd = self.value(b).data();
        let mut out = Vec::with_capacity(batch * m);
        for r in 0..batch {
            let mut acc = bd.to_vec();
            for (i, &xv) in xd[r * n..(r + 1) * n].iter().enumerate() {
                if xv == T::zero() {
                    continue;
                }
                for (a, &wv) in acc.iter_mut().zip(&wd[i * m..(i + 1) * m]) {
                    *a += xv * wv;
                }
            }
            out.extend(acc);
        }
        let t = Tensor::new(vec![batch, m], out)?;
        Ok(self.push(t, Op::Dense { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        self.push(out, Op::Relu { x })
    }

    /// Inverted dropout: kept units are scaled by `1/(1-p)`. Identity when
    /// not training or `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return domain(format!("dropout rate {p} not in [0, 1)"));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let mut r = rng::rng_for(seed, &[0xD80F]);
        let scale = T::of(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if r.gen::<f64>() < p { T::zero() } else { scale })
            .collect();
        let mut out = self.value(x).clone();
        for (o, &m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        Ok(self.push(out, Op::MulConst { x, c: mask }))
    }

    /// Additive zero-mean Gaussian noise. Identity when not training or
    /// `sigma == 0`.
    pub fn gaussian_noise(&mut self, x: Var, sigma: f64, training: bool, seed: u64) -> Result<Var> {
        if !(sigma >= 0.0) {
            return domain(format!("noise sigma {sigma} must be >= 0"));
        }
        if !training || sigma == 0.0 {
            return Ok(x);
        }
        let mut r = rng::rng_for(seed, &[0x6A55]);
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            let n: f64 = StandardNormal.sample(&mut r);
            *v += T::of(n * sigma);
        }
        Ok(self.push(out, Op::AddConst { x }))
    }

    /// Adds a constant tensor of the same shape (or broadcast along the last
    /// axis when `c` is shorter).
    pub fn add_const(&mut self, x: Var, c: &[T]) -> Result<Var> {
        let n = self.value(x).len();
        if c.is_empty() || n % c.len() != 0 {
            return shape("add_const: constant does not tile the input");
        }
        let mut out = self.value(x).clone();
        for row in out.data_mut().chunks_mut(c.len()) {
            for (o, &cv) in row.iter_mut().zip(c) {
                *o += cv;
            }
        }
        Ok(self.push(out, Op::AddConst { x }))
    }

    /// Non-overlapping `ph × pw` average pooling over the H and W axes of a
    /// `[B,H,W,C]` tensor; trailing rows/columns that do not fill a window are
    /// dropped.
    pub fn avg_pool(&mut self, x: Var, ph: usize, pw: usize) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 4 || ph == 0 || pw == 0 || s[1] < ph || s[2] < pw {
            return shape(format!("avg_pool {ph}x{pw} on {s:?}"));
        }
        let (b, h, w, c) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h / ph, w / pw);
        let inv = T::of(1.0 / (ph * pw) as f64);
        let xd = self.value(x).data();
        let mut out = vec![T::zero(); b * oh * ow * c];
        for bi in 0..b {
            for i in 0..oh * ph {
                let o_i = i / ph;
                if o_i >= oh {
                    break;
                }
                for j in 0..ow * pw {
                    let src = &xd[((bi * h + i) * w + j) * c..][..c];
                    let dst = &mut out[((bi * oh + o_i) * ow + j / pw) * c..][..c];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += v * inv;
                    }
                }
            }
        }
        let t = Tensor::new(vec![b, oh, ow, c], out)?;
        Ok(self.push(t, Op::AvgPool { x, ph, pw }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape { x }))
    }

    /// Flattens all axes after the first.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape();
        let b = s[0];
        let rest = s[1..].iter().product();
        self.reshape(x, &[b, rest])
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        if sa.len() != sb.len()
            || axis >= sa.len()
            || sa.iter().zip(&sb).enumerate().any(|(i, (x, y))| i != axis && x != y)
        {
            return shape(format!("concat {sa:?} and {sb:?} along axis {axis}"));
        }
        let outer: usize = sa[..axis].iter().product();
        let inner_a: usize = sa[axis..].iter().product();
        let inner_b: usize = sb[axis..].iter().product();
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(da.len() + db.len());
        for o in 0..outer {
            out.extend_from_slice(&da[o * inner_a..(o + 1) * inner_a]);
            out.extend_from_slice(&db[o * inner_b..(o + 1) * inner_b]);
        }
        let mut shape_out = sa.clone();
        shape_out[axis] += sb[axis];
        let t = Tensor::new(shape_out, out)?;
        Ok(self.push(t, Op::Concat { a, b, outer, inner_a, inner_b }))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if axis >= s.len() || s[axis] == 0 {
            return shape(format!("mean over axis {axis} of {s:?}"));
        }
        let outer: usize = s[..axis].iter().product();
        let len = s[axis];
        let inner: usize = s[axis + 1..].iter().product();
        let xd = self.value(x).data();
        let inv = T::of(1.0 / len as f64);
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &xd[(o * len + l) * inner..][..inner];
                for (d, &v) in out[o * inner..][..inner].iter_mut().zip(src) {
                    *d += v * inv;
                }
            }
        }
        let mut so = s.clone();
        so.remove(axis);
        let t = Tensor::new(so, out)?;
        Ok(self.push(t, Op::MeanAxis { x, outer, len, inner }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return shape("add: operand shapes differ");
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add { a, b }))
    }

    /// Mean Huber loss over all elements of `pred - target`.
    pub fn huber_loss(&mut self, pred: Var, target: Var, delta: f64) -> Result<Var> {
        if !(delta > 0.0) {
            return domain(format!("huber delta {delta} must be > 0"));
        }
        if self.value(pred).shape() != self.value(target).shape() {
            return shape(format!(
                "huber: prediction {:?} vs target {:?}",
                self.value(pred).shape(),
                self.value(target).shape()
            ));
        }
        let d = T::of(delta);
        let half = T::of(0.5);
        let n = self.value(pred).len();
        let total: T = self
            .value(pred)
            .data()
            .iter()
            .zip(self.value(target).data())
            .map(|(&p, &t)| {
                let e = (p - t).abs();
                if e <= d {
                    half * e * e
                } else {
                    d * (e - half * d)
                }
            })
            .sum();
        let loss = total / T::of(n.max(1) as f64);
        Ok(self.push(Tensor::scalar(loss), Op::Huber { pred, target, delta: d }))
    }

    /// Circular mean phase per antenna of a `[B, N_sub, N_ant, 2]` batch:
    /// `angle(Σ_k h_{k,m} / |h_{k,m}|)` over non-zero entries; 0 for antennas
    /// with no non-zero entry.
    pub fn phase_features(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 4 || s[3] != 2 {
            return shape(format!("phase features want [B, N_sub, N_ant, 2], got {s:?}"));
        }
        let (b, ns, na) = (s[0], s[1], s[2]);
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(b * na);
        for bi in 0..b {
            let (sx, sy) = unit_phasor_sums(xd, bi, ns, na);
            out.extend(sx.iter().zip(&sy).map(|(&re, &im)| {
                if re == 0.0 && im == 0.0 {
                    T::zero()
                } else {
                    T::of(im.atan2(re))
                }
            }));
        }
        let t = Tensor::new(vec![b, na], out)?;
        Ok(self.push(t, Op::PhaseFeatures { x }))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return shape("backward needs a scalar output");
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, k, g: geom } => {
                let want_dx = self.needs_grad(*x);
                let (dx, dk) = conv_backward(self.value(*x).data(), self.value(*k).data(), gd, geom, want_dx);
                if let Some(dx) = dx {
                    accumulate(grads, *x, self.value(*x).shape(), dx);
                }
                accumulate(grads, *k, self.value(*k).shape(), dk);
            }
            Op::BiasAdd { x, b } => {
                let c = self.value(*b).len();
                let mut db = vec![T::zero(); c];
                for row in gd.chunks(c) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                accumulate(grads, *x, self.value(*x).shape(), gd.to_vec());
                accumulate(grads, *b, self.value(*b).shape(), db);
            }
            Op::Dense { x, w, b } => {
                let xs = self.value(*x).shape();
                let (batch, n) = (xs[0], xs[1]);
                let m = self.value(*w).shape()[1];
                let xd = self.value(*x).data();
                let wd = self.value(*w).data();
                let want_dx = self.needs_grad(*x);
                let mut dx = vec![T::zero(); batch * n];
                let mut dw = vec![T::zero(); n * m];
                let mut db = vec![T::zero(); m];
                for r in 0..batch {
                    let grow = &gd[r * m..(r + 1) * m];
                    for (d, &v) in db.iter_mut().zip(grow) {
                        *d += v;
                    }
                    for i in 0..n {
                        if want_dx {
                            let wrow = &wd[i * m..(i + 1) * m];
                            dx[r * n + i] = wrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                        }
                        let xv = xd[r * n + i];
                        if xv != T::zero() {
                            for (d, &gv) in dw[i * m..(i + 1) * m].iter_mut().zip(grow) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
                if want_dx {
                    accumulate(grads, *x, xs, dx);
                }
                accumulate(grads, *w, self.value(*w).shape(), dw);
                accumulate(grads, *b, self.value(*b).shape(), db);
            }
            Op::Relu { x } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                accumulate(grads, *x, self.value(*x).shape(), dx);
            }
            Op::MulConst { x, c } => {
                let dx = gd.iter().zip(c).map(|(&gv, &cv)| gv * cv).collect();
                accumulate(grads, *x, self.value(*x).shape(), dx);
            }
            Op::AddConst { x } | Op::Reshape { x } => {
                accumulate(grads, *x, self.value(*x).shape(), gd.to_vec());
            }
            Op::AvgPool { x, ph, pw } => {
                let s = self.value(*x).shape();
                let (b, h, w, c) = (s[0], s[1], s[2], s[3]);
                let (oh, ow) = (h / ph, w / pw);
                let inv = T::of(1.0 / (ph * pw) as f64);
                let mut dx = vec![T::zero(); b * h * w * c];
                for bi in 0..b {
                    for i in 0..oh * ph {
                        for j in 0..ow * pw {
                            let src = &gd[((bi * oh + i / ph) * ow + j / pw) * c..][..c];
                            let dst = &mut dx[((bi * h + i) * w + j) * c..][..c];
                            for (d, &v) in dst.iter_mut().zip(src) {
                                *d = v * inv;
                            }
                        }
                    }
                }
                accumulate(grads, *x, s, dx);
            }
            Op::Concat { a, b, outer, inner_a, inner_b } => {
                let mut da = Vec::with_capacity(outer * inner_a);
                let mut db = Vec::with_capacity(outer * inner_b);
                for o in 0..*outer {
                    let base = o * (inner_a + inner_b);
                    da.extend_from_slice(&gd[base..base + inner_a]);
                    db.extend_from_slice(&gd[base + inner_a..base + inner_a + inner_b]);
                }
                accumulate(grads, *a, self.value(*a).shape(), da);
                accumulate(grads, *b, self.value(*b).shape(), db);
            }
            Op::MeanAxis { x, outer, len, inner } => {
                let inv = T::of(1.0 / *len as f64);
                let mut dx = vec![T::zero(); outer * len * inner];
                for o in 0..*outer {
                    for l in 0..*len {
                        let dst = &mut dx[(o * len + l) * inner..][..*inner];
                        for (d, &v) in dst.iter_mut().zip(&gd[o * inner..][..*inner]) {
                            *d = v * inv;
                        }
                    }
                }
                accumulate(grads, *x, self.value(*x).shape(), dx);
            }
            Op::Sum { x } => {
                let s = self.value(*x).shape();
                accumulate(grads, *x, s, vec![gd[0]; self.value(*x).len()]);
            }
            Op::Add { a, b } => {
                accumulate(grads, *a, self.value(*a).shape(), gd.to_vec());
                accumulate(grads, *b, self.value(*b).shape(), gd.to_vec());
            }
            Op::Huber { pred, target, delta } => {
                let n = T::of(self.value(*pred).len().max(1) as f64);
                let scale = gd[0] / n;
                let dp: Vec<T> = self
                    .value(*pred)
                    .data()
                    .iter()
                    .zip(self.value(*target).data())
                    .map(|(&p, &t)| {
                        let e = p - t;
                        let de = if e.abs() <= *delta { e } else { *delta * e.signum() };
                        de * scale
                    })
                    .collect();
                let dt = dp.iter().map(|&v| -v).collect();
                accumulate(grads, *pred, self.value(*pred).shape(), dp);
                accumulate(grads, *target, self.value(*target).shape(), dt);
            }
            Op::PhaseFeatures { x } => {
                let s = self.value(*x).shape();
                let (b, ns, na) = (s[0], s[1], s[2]);
                let xd = self.value(*x).data();
                let mut dx = vec![T::zero(); xd.len()];
                for bi in 0..b {
                    let (sx, sy) = unit_phasor_sums(xd, bi, ns, na);
                    for a in 0..na {
                        let r2 = sx[a] * sx[a] + sy[a] * sy[a];
                        if r2 == 0.0 {
                            continue;
                        }
                        let gv = gd[bi * na + a].as_f64();
                        // dφ/dX, dφ/dY for φ = atan2(Y, X)
                        let (dfx, dfy) = (-sy[a] / r2, sx[a] / r2);
                        for k in 0..ns {
                            let off = ((bi * ns + k) * na + a) * 2;
                            let (re, im) = (xd[off].as_f64(), xd[off + 1].as_f64());
                            let m2 = re * re + im * im;
                            if m2 == 0.0 {
                                continue;
                            }
                            let r3 = m2 * m2.sqrt();
                            dx[off] = T::of(gv * im * (dfx * im - dfy * re) / r3);
                            dx[off + 1] = T::of(gv * re * (dfy * re - dfx * im) / r3);
                        }
                    }
                }
                accumulate(grads, *x, s, dx);
            }
        }
    }
}

/// Per-antenna sums of unit phasors for batch element `bi`, in f64.
fn unit_phasor_sums<T: Scalar>(xd: &[T], bi: usize, ns: usize, na: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sx = vec![0.0; na];
    let mut sy = vec![0.0; na];
    for k in 0..ns {
        let base = (bi * ns + k) * na * 2;
        for a in 0..na {
            let (re, im) = (xd[base + 2 * a].as_f64(), xd[base + 2 * a + 1].as_f64());
            let m = (re * re + im * im).sqrt();
            if m > 0.0 {
                sx[a] += re / m;
                sy[a] += im / m;
            }
        }
    }
    (sx, sy)
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], v: Var, shape: &[usize], g: Vec<T>) {
    let t = Tensor::new(shape.to_vec(), g).expect("gradient shape matches value");
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&t),
        slot @ None => *slot = Some(t),
    }
}

fn conv_forward<T: Scalar>(x: &[T], k: &[T], g: &ConvGeom) -> Vec<T> {
    let mut out = vec![T::zero(); g.batch * g.out_h * g.out_w * g.cout];
    for b in 0..g.batch {
        for oh in 0..g.out_h {
            for ow in 0..g.out_w {
                let o_off = ((b * g.out_h + oh) * g.out_w + ow) * g.cout;
                let acc = &mut out[o_off..o_off + g.cout];
                for kh in 0..g.kh {
                    let Some(ih) = g.in_row(oh, kh) else { continue };
                    for kw in 0..g.kw {
                        let Some(iw) = g.in_col(ow, kw) else { continue };
                        let px = &x[((b * g.in_h + ih) * g.in_w + iw) * g.cin..][..g.cin];
                        let kbase = (kh * g.kw + kw) * g.cin * g.cout;
                        for (ci, &xv) in px.iter().enumerate() {
                            let krow = &k[kbase + ci * g.cout..][..g.cout];
                            for (a, &kv) in acc.iter_mut().zip(krow) {
                                *a += xv * kv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Kernel gradient, and the input gradient when `want_dx`.
fn conv_backward<T: Scalar>(x: &[T], k: &[T], gout: &[T], g: &ConvGeom, want_dx: bool) -> (Option<Vec<T>>, Vec<T>) {
    let mut dx = vec![T::zero(); if want_dx { x.len() } else { 0 }];
    let mut dk = vec![T::zero(); k.len()];
    for b in 0..g.batch {
        for oh in 0..g.out_h {
            for ow in 0..g.out_w {
                let o_off = ((b * g.out_h + oh) * g.out_w + ow) * g.cout;
                let go = &gout[o_off..o_off + g.cout];
                for kh in 0..g.kh {
                    let Some(ih) = g.in_row(oh, kh) else { continue };
                    for kw in 0..g.kw {
                        let Some(iw) = g.in_col(ow, kw) else { continue };
                        let p_off = ((b * g.in_h + ih) * g.in_w + iw) * g.cin;
                        let kbase = (kh * g.kw + kw) * g.cin * g.cout;
                        for ci in 0..g.cin {
                            if want_dx {
                                let krow = &k[kbase + ci * g.cout..][..g.cout];
                                let mut s = T::zero();
                                for (&kv, &gv) in krow.iter().zip(go) {
                                    s += kv * gv;
                                }
                                dx[p_off + ci] += s;
                            }
                            let xv = x[p_off + ci];
                            let dkrow = &mut dk[kbase + ci * g.cout..][..g.cout];
                            for (d, &gv) in dkrow.iter_mut().zip(go) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    (want_dx.then_some(dx), dk)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn shared_subexpression_accumulates() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], vec![1.0, -2.0, 0.5]));
        let y = tape.add(x, x).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn identity_conv() {
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let x = tape.leaf(t(&[1, 3, 4, 1], data.clone()));
        let k = tape.leaf(t(&[1, 1, 1, 1], vec![1.0]));
        let y = tape.conv2d(x, k, (1, 1), Padding::Same).unwrap();
        assert_eq!(tape.value(y).data(), &data[..]);
        let bad = tape.leaf(t(&[1, 1, 2, 1], vec![1.0, 1.0]));
        assert!(tape.conv2d(x, bad, (1, 1), Padding::Same).is_err());
    }

    #[test]
    fn same_padding_with_stride() {
        let g = ConvGeom::resolve(&[1, 7, 5, 2], &[3, 3, 2, 4], (2, 1), Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w), (4, 5));
        assert_eq!((g.pad_top, g.pad_left), (1, 1));
        assert!(ConvGeom::resolve(&[1, 2, 2, 1], &[3, 3, 1, 1], (1, 1), Padding::Valid).is_err());
    }

    #[test]
    fn dense_identity() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]));
        let w = tape.leaf(t(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        let b = tape.leaf(t(&[2], vec![0.0, 0.0]));
        let y = tape.dense(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn huber_values() {
        let mut tape = Tape::new();
        let p = tape.leaf(t(&[1, 1], vec![2.0]));
        let q = tape.leaf(t(&[1, 1], vec![0.0]));
        let l = tape.huber_loss(p, q, 1.0).unwrap();
        assert_eq!(tape.value(l).item(), 1.5);
        let l0 = tape.huber_loss(p, p, 1.0).unwrap();
        assert_eq!(tape.value(l0).item(), 0.0);
        assert!(tape.huber_loss(p, q, 0.0).is_err());
    }

    #[test]
    fn dropout_and_noise_modes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::<f64>::full(&[100], 1.0));
        assert_eq!(tape.dropout(x, 0.0, true, 1).unwrap(), x);
        assert_eq!(tape.dropout(x, 0.5, false, 1).unwrap(), x);
        assert_eq!(tape.gaussian_noise(x, 0.3, false, 1).unwrap(), x);
        let a = tape.dropout(x, 0.5, true, 7).unwrap();
        let b = tape.dropout(x, 0.5, true, 7).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert!(tape.dropout(x, 1.0, true, 1).is_err());
        assert!(tape.gaussian_noise(x, -1.0, true, 1).is_err());
    }

    #[test]
    fn phase_of_constant_phase_rows() {
        let phi = [0.3, -2.0];
        let mut data = Vec::new();
        for k in 0..5 {
            for &p in &phi {
                let r = 1.0 + k as f64;
                data.push(r * f64::cos(p));
                data.push(r * f64::sin(p));
            }
        }
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 5, 2, 2], data));
        let y = tape.phase_features(x).unwrap();
        for (got, want) in tape.value(y).data().iter().zip(phi) {
            assert!((got - want).abs() < 1e-12);
        }
        let z = tape.leaf(Tensor::zeros(&[1, 3, 2, 2]));
        let yz = tape.phase_features(z).unwrap();
        assert_eq!(tape.value(yz).data(), &[0.0, 0.0]);
    }

    #[test]
    fn concat_and_mean() {
        let mut tape = Tape::new();
        let a = tape.leaf(t(&[2, 1], vec![1.0, 2.0]));
        let b = tape.leaf(t(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]));
        let c = tape.concat(a, b, 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let m = tape.mean_axis(c, 0).unwrap();
        assert_eq!(tape.value(m).data(), &[1.5, 4.0, 5.0]);
        assert!(tape.concat(a, b, 0).is_err());
    }
}
