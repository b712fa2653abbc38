//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is built fresh for every minibatch: each op evaluates
//! eagerly, records its output, and [`Graph::backward`] walks the tape
//! in reverse insertion order (which is a topological order by
//! construction). Gradients accumulate exactly once per node; inputs
//! that cannot influence any trainable leaf are skipped.
//!
//! Convolution here is cross-correlation (no kernel flip), the usual
//! learned-filter convention. Sinc kernels are even-symmetric, so for
//! the filterbank the two conventions coincide; learned kernels absorb
//! the orientation.

use crate::error::{Error, Result};
use crate::sinc;

use super::{Real, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(pub(crate) usize);

/// Convolution padding mode. `Same` pads symmetrically with the excess
/// on the right and yields `ceil(len/stride)` outputs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Pad {
    Valid,
    Same,
}

/// Grouping for layer normalization: `Time` normalizes each trailing
/// axis independently (per batch item and channel); `Window` normalizes
/// everything under each leading-axis item.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NormAxis {
    Time,
    Window,
}

const LN_EPS: Real = 1e-5;

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddScalar(Var),
    MulScalar(Var, Real),
    MatMul(Var, Var),
    Affine { x: Var, w: Var, b: Var },
    Conv1d { x: Var, w: Var, b: Option<Var>, stride: usize, pad: Pad },
    DepthwiseConv1d { x: Var, k: Var },
    SincKernels { f1: Var, f2: Var, len: usize, fs: f64 },
    Upsample { x: Var, factor: usize },
    LayerNorm { x: Var },
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    SumAll(Var),
    MeanAll(Var),
    Reshape(Var),
    Slice { x: Var, axis: usize, start: usize, len: usize },
    Concat { xs: Vec<Var>, axis: usize },
}

pub struct Graph {
    ops: Vec<Op>,
    values: Vec<Tensor>,
    /// Per-node: can this node influence a trainable leaf's gradient?
    needs: Vec<bool>,
    /// Op-specific forward caches (layer-norm inverse stddevs).
    aux: Vec<Vec<Real>>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            ops: Vec::new(),
            values: Vec::new(),
            needs: Vec::new(),
            aux: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    /// Gradient of the last `backward` loss w.r.t. node `v`. `None` if
    /// backward has not run, the node is unreachable from the loss, or
    /// gradient tracking was skipped for it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, value: Tensor, needs: bool, aux: Vec<Real>) -> Var {
        if self.backward_done {
            // New ops invalidate the previous tape's gradients.
            self.backward_done = false;
            self.grads.clear();
        }
        self.ops.push(op);
        self.values.push(value);
        self.needs.push(needs);
        self.aux.push(aux);
        Var(self.ops.len() - 1)
    }

    fn needs_any(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.needs[v.0])
    }

    // ── leaves ───────────────────────────────────────────────────────

    /// Trainable leaf: receives a gradient on backward.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true, Vec::new())
    }

    /// Constant leaf: inputs, targets, noise draws. No gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false, Vec::new())
    }

    // ── elementwise ──────────────────────────────────────────────────

    fn same_shape(&self, ctx: &str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.values[a.0].shape(), self.values[b.0].shape());
        if sa != sb {
            return Err(Error::shape(ctx, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = zip_map(&self.values[a.0], &self.values[b.0], |x, y| x + y);
        let needs = self.needs_any(&[a, b]);
        Ok(self.push(Op::Add(a, b), data, needs, Vec::new()))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let data = zip_map(&self.values[a.0], &self.values[b.0], |x, y| x - y);
        let needs = self.needs_any(&[a, b]);
        Ok(self.push(Op::Sub(a, b), data, needs, Vec::new()))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = zip_map(&self.values[a.0], &self.values[b.0], |x, y| x * y);
        let needs = self.needs_any(&[a, b]);
        Ok(self.push(Op::Mul(a, b), data, needs, Vec::new()))
    }

    pub fn add_scalar(&mut self, a: Var, c: Real) -> Var {
        let value = self.values[a.0].map(|x| x + c);
        let needs = self.needs[a.0];
        self.push(Op::AddScalar(a), value, needs, Vec::new())
    }

    pub fn mul_scalar(&mut self, a: Var, c: Real) -> Var {
        let value = self.values[a.0].map(|x| x * c);
        let needs = self.needs[a.0];
        self.push(Op::MulScalar(a, c), value, needs, Vec::new())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.values[a.0].map(|x| if x > 0.0 { x } else { 0.0 });
        let needs = self.needs[a.0];
        self.push(Op::Relu(a), value, needs, Vec::new())
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.values[a.0].map(Real::tanh);
        let needs = self.needs[a.0];
        self.push(Op::Tanh(a), value, needs, Vec::new())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.values[a.0].map(Real::exp);
        let needs = self.needs[a.0];
        self.push(Op::Exp(a), value, needs, Vec::new())
    }

    /// Natural log. Inputs must be strictly positive so that every
    /// public op keeps tensors finite.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if self.values[a.0].data().iter().any(|&x| x <= 0.0) {
            return Err(Error::Numeric("log: non-positive input".into()));
        }
        let value = self.values[a.0].map(Real::ln);
        let needs = self.needs[a.0];
        Ok(self.push(Op::Log(a), value, needs, Vec::new()))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.values[a.0].map(|x| x * x);
        let needs = self.needs[a.0];
        self.push(Op::Square(a), value, needs, Vec::new())
    }

    // ── reductions ───────────────────────────────────────────────────

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: Real = self.values[a.0].data().iter().sum();
        let needs = self.needs[a.0];
        self.push(Op::SumAll(a), Tensor::scalar(s), needs, Vec::new())
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = &self.values[a.0];
        let s: Real = t.data().iter().sum();
        let m = s / t.len() as Real;
        let needs = self.needs[a.0];
        self.push(Op::MeanAll(a), Tensor::scalar(m), needs, Vec::new())
    }

    // ── shape ────────────────────────────────────────────────────────

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.values[a.0].reshaped(shape)?;
        let needs = self.needs[a.0];
        Ok(self.push(Op::Reshape(a), value, needs, Vec::new()))
    }

    /// Contiguous sub-range along one axis.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = &self.values[a.0];
        let dims = t.shape();
        if axis >= dims.len() || len == 0 || start + len > dims[axis] {
            return Err(Error::Config(format!(
                "slice: range {start}..{} out of bounds for axis {axis} of shape {dims:?}",
                start + len
            )));
        }
        let (outer, _mid, inner) = axis_split(dims, axis);
        let mut shape = dims.to_vec();
        shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        let src = t.data();
        for o in 0..outer {
            let base = (o * dims[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let needs = self.needs[a.0];
        let value = Tensor::new(shape, data).expect("slice shape consistent");
        Ok(self.push(Op::Slice { x: a, axis, start, len }, value, needs, Vec::new()))
    }

    /// Concatenation along one axis. All other axes must agree.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Config("concat: no inputs".into()));
        }
        let first = self.values[xs[0].0].shape().to_vec();
        if axis >= first.len() {
            return Err(Error::Config(format!(
                "concat: axis {axis} out of bounds for rank {}",
                first.len()
            )));
        }
        let mut total_mid = 0usize;
        for &v in xs {
            let s = self.values[v.0].shape();
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::shape("concat", &first, s));
            }
            total_mid += s[axis];
        }
        let (outer, _, inner) = axis_split(&first, axis);
        let mut shape = first.clone();
        shape[axis] = total_mid;
        let mut data = vec![0.0; outer * total_mid * inner];
        let mut offset = 0usize;
        for &v in xs {
            let t = &self.values[v.0];
            let mid = t.shape()[axis];
            let src = t.data();
            for o in 0..outer {
                let dst = (o * total_mid + offset) * inner;
                let sbase = o * mid * inner;
                data[dst..dst + mid * inner].copy_from_slice(&src[sbase..sbase + mid * inner]);
            }
            offset += mid;
        }
        let needs = self.needs_any(xs);
        let value = Tensor::new(shape, data).expect("concat shape consistent");
        Ok(self.push(Op::Concat { xs: xs.to_vec(), axis }, value, needs, Vec::new()))
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.values[a.0].shape(), self.values[b.0].shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(&mut out, self.values[a.0].data(), self.values[b.0].data(), m, k, n);
        let needs = self.needs_any(&[a, b]);
        let value = Tensor::new(vec![m, n], out).expect("matmul shape");
        Ok(self.push(Op::MatMul(a, b), value, needs, Vec::new()))
    }

    /// Dense layer: `x · w + bias` with `x: [m,k]`, `w: [k,n]`, `bias: [n]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (sx, sw, sb) = (
            self.values[x.0].shape(),
            self.values[w.0].shape(),
            self.values[b.0].shape(),
        );
        if sx.len() != 2 || sw.len() != 2 || sx[1] != sw[0] {
            return Err(Error::shape("affine", sx, sw));
        }
        if sb.len() != 1 || sb[0] != sw[1] {
            return Err(Error::shape("affine bias", &[sw[1]], sb));
        }
        let (m, k, n) = (sx[0], sx[1], sw[1]);
        let bias = self.values[b.0].data().to_vec();
        let mut out = vec![0.0; m * n];
        for row in out.chunks_exact_mut(n) {
            row.copy_from_slice(&bias);
        }
        matmul_into(&mut out, self.values[x.0].data(), self.values[w.0].data(), m, k, n);
        let needs = self.needs_any(&[x, w, b]);
        let value = Tensor::new(vec![m, n], out).expect("affine shape");
        Ok(self.push(Op::Affine { x, w, b }, value, needs, Vec::new()))
    }

    // ── convolution ──────────────────────────────────────────────────

    /// 1-D cross-correlation: `x: [batch, c_in, t]`, `w: [c_out, c_in, k]`,
    /// optional `bias: [c_out]`.
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: Pad,
    ) -> Result<Var> {
        let (sx, sw) = (self.values[x.0].shape(), self.values[w.0].shape());
        if sx.len() != 3 || sw.len() != 3 || sx[1] != sw[1] {
            return Err(Error::shape("conv1d", sx, sw));
        }
        if stride == 0 {
            return Err(Error::Config("conv1d: stride must be >= 1".into()));
        }
        let (batch, c_in, t) = (sx[0], sx[1], sx[2]);
        let (c_out, _, k) = (sw[0], sw[1], sw[2]);
        if let Some(bv) = b {
            let sb = self.values[bv.0].shape();
            if sb != [c_out] {
                return Err(Error::shape("conv1d bias", &[c_out], sb));
            }
        }
        let (t_out, pad_left) = conv_geometry(t, k, stride, pad)?;
        let mut out = vec![0.0; batch * c_out * t_out];
        let xs = self.values[x.0].data();
        let ws = self.values[w.0].data();
        for bi in 0..batch {
            for co in 0..c_out {
                let y_base = (bi * c_out + co) * t_out;
                if let Some(bv) = b {
                    let beta = self.values[bv.0].data()[co];
                    for y in &mut out[y_base..y_base + t_out] {
                        *y = beta;
                    }
                }
                for ci in 0..c_in {
                    let x_base = (bi * c_in + ci) * t;
                    let w_base = (co * c_in + ci) * k;
                    for ti in 0..t_out {
                        let mut acc = 0.0;
                        let origin = ti * stride;
                        for j in 0..k {
                            let xi = origin + j;
                            if xi < pad_left || xi - pad_left >= t {
                                continue;
                            }
                            acc += xs[x_base + xi - pad_left] * ws[w_base + j];
                        }
                        out[y_base + ti] += acc;
                    }
                }
            }
        }
        let mut inputs = vec![x, w];
        if let Some(bv) = b {
            inputs.push(bv);
        }
        let needs = self.needs_any(&inputs);
        let value = Tensor::new(vec![batch, c_out, t_out], out).expect("conv1d shape");
        Ok(self.push(Op::Conv1d { x, w, b, stride, pad }, value, needs, Vec::new()))
    }

    /// Depthwise filterbank convolution: every kernel `k: [f_count, k_len]`
    /// runs over every input channel of `x: [batch, c, t]` with stride 1
    /// and `same` padding. Output channel layout is
    /// `channel * f_count + filter`.
    pub fn depthwise_conv1d(&mut self, x: Var, k: Var) -> Result<Var> {
        let (sx, sk) = (self.values[x.0].shape(), self.values[k.0].shape());
        if sx.len() != 3 || sk.len() != 2 {
            return Err(Error::shape("depthwise_conv1d", sx, sk));
        }
        let (batch, c, t) = (sx[0], sx[1], sx[2]);
        let (f_count, k_len) = (sk[0], sk[1]);
        if t < k_len {
            return Err(Error::Config(format!(
                "depthwise_conv1d: window length {t} shorter than kernel length {k_len}"
            )));
        }
        let pad_left = (k_len - 1) / 2;
        let mut out = vec![0.0; batch * c * f_count * t];
        let xs = self.values[x.0].data();
        let ks = self.values[k.0].data();
        for bi in 0..batch {
            for ci in 0..c {
                let x_base = (bi * c + ci) * t;
                for f in 0..f_count {
                    let y_base = ((bi * c + ci) * f_count + f) * t;
                    let k_base = f * k_len;
                    for ti in 0..t {
                        let mut acc = 0.0;
                        for j in 0..k_len {
                            let xi = ti + j;
                            if xi < pad_left || xi - pad_left >= t {
                                continue;
                            }
                            acc += xs[x_base + xi - pad_left] * ks[k_base + j];
                        }
                        out[y_base + ti] = acc;
                    }
                }
            }
        }
        let needs = self.needs_any(&[x, k]);
        let value = Tensor::new(vec![batch, c * f_count, t], out).expect("depthwise shape");
        Ok(self.push(Op::DepthwiseConv1d { x, k }, value, needs, Vec::new()))
    }

    /// Sinc filterbank kernel synthesis from raw cutoff vectors
    /// `f1, f2: [f_count]` (Hz). Output `[f_count, len]`. Gradients flow
    /// to the cutoffs through the analytic kernel derivative.
    pub fn sinc_kernels(&mut self, f1: Var, f2: Var, len: usize, fs: f64) -> Result<Var> {
        let (s1, s2) = (self.values[f1.0].shape(), self.values[f2.0].shape());
        if s1.len() != 1 || s1 != s2 {
            return Err(Error::shape("sinc_kernels", s1, s2));
        }
        let bank = sinc::kernel_bank(
            self.values[f1.0].data(),
            self.values[f2.0].data(),
            len,
            fs,
        )?;
        let needs = self.needs_any(&[f1, f2]);
        Ok(self.push(Op::SincKernels { f1, f2, len, fs }, bank, needs, Vec::new()))
    }

    /// Nearest-neighbor upsampling along time: `[b, c, t] -> [b, c, t*factor]`.
    pub fn upsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        let sx = self.values[x.0].shape();
        if sx.len() != 3 {
            return Err(Error::shape("upsample", &[0, 0, 0], sx));
        }
        if factor == 0 {
            return Err(Error::Config("upsample: factor must be >= 1".into()));
        }
        let (batch, c, t) = (sx[0], sx[1], sx[2]);
        let xs = self.values[x.0].data();
        let mut out = Vec::with_capacity(batch * c * t * factor);
        for row in xs.chunks_exact(t) {
            for &v in row {
                for _ in 0..factor {
                    out.push(v);
                }
            }
        }
        let needs = self.needs[x.0];
        let value = Tensor::new(vec![batch, c, t * factor], out).expect("upsample shape");
        Ok(self.push(Op::Upsample { x, factor }, value, needs, Vec::new()))
    }

    /// Non-affine layer normalization (zero mean, unit variance per
    /// group, ε = 1e-5 inside the square root).
    pub fn layer_norm(&mut self, x: Var, mode: NormAxis) -> Result<Var> {
        let t = &self.values[x.0];
        let dims = t.shape();
        if dims.is_empty() {
            return Err(Error::Config("layer_norm: rank-0 input".into()));
        }
        let glen = match mode {
            NormAxis::Time => dims[dims.len() - 1],
            NormAxis::Window => t.len() / dims[0],
        };
        if glen == 0 {
            return Err(Error::Config("layer_norm: empty normalization group".into()));
        }
        let groups = t.len() / glen;
        let mut out = vec![0.0; t.len()];
        let mut inv_std = Vec::with_capacity(groups);
        let src = t.data();
        for gi in 0..groups {
            let seg = &src[gi * glen..(gi + 1) * glen];
            let mean = seg.iter().sum::<Real>() / glen as Real;
            let var = seg.iter().map(|&v| (v - mean) * (v - mean)).sum::<Real>() / glen as Real;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            for (o, &v) in out[gi * glen..(gi + 1) * glen].iter_mut().zip(seg) {
                *o = (v - mean) * inv;
            }
        }
        let needs = self.needs[x.0];
        let value = Tensor::new(dims.to_vec(), out).expect("layer_norm shape");
        Ok(self.push(Op::LayerNorm { x }, value, needs, inv_std))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. Gradients of every reachable
    /// gradient-tracked node become available through [`Graph::grad`].
    /// Calling twice without adding new ops is rejected.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Config(
                "backward called twice without re-running forward".into(),
            ));
        }
        let lt = &self.values[loss.0];
        if lt.len() != 1 {
            return Err(Error::Config(format!(
                "backward: loss must be scalar, got shape {:?}",
                lt.shape()
            )));
        }
        self.backward_done = true;
        self.grads = (0..self.ops.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.needs[i] || self.grads[i].is_none() {
                continue;
            }
            let g = self.grads[i].take().expect("checked above");
            self.propagate(i, &g)?;
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Adds node `i`'s contribution to each of its inputs' gradients.
    fn propagate(&mut self, i: usize, g: &Tensor) -> Result<()> {
        let Graph { ops, values, needs, aux, grads, .. } = self;
        // Ensures a zeroed gradient buffer for input `j`, or None when
        // that input does not track gradients.
        macro_rules! buf {
            ($j:expr) => {{
                let j: Var = $j;
                if !needs[j.0] {
                    None
                } else {
                    if grads[j.0].is_none() {
                        grads[j.0] = Some(Tensor::zeros(values[j.0].shape()));
                    }
                    Some(grads[j.0].as_mut().expect("just filled").data_mut())
                }
            }};
        }
        let gd = g.data();
        match &ops[i] {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if let Some(da) = buf!(*a) {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
                if let Some(db) = buf!(*b) {
                    for (d, &gv) in db.iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = buf!(*a) {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
                if let Some(db) = buf!(*b) {
                    for (d, &gv) in db.iter_mut().zip(gd) {
                        *d -= gv;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (values[a.0].data().to_vec(), values[b.0].data().to_vec());
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &bv) in da.iter_mut().zip(gd).zip(&bv) {
                        *d += gv * bv;
                    }
                }
                if let Some(db) = buf!(*b) {
                    for ((d, &gv), &av) in db.iter_mut().zip(gd).zip(&av) {
                        *d += gv * av;
                    }
                }
            }
            Op::AddScalar(a) => {
                if let Some(da) = buf!(*a) {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
            }
            Op::MulScalar(a, c) => {
                let c = *c;
                if let Some(da) = buf!(*a) {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d += gv * c;
                    }
                }
            }
            Op::MatMul(a, b) => {
                let sa = values[a.0].shape().to_vec();
                let sb = values[b.0].shape().to_vec();
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let av = values[a.0].data().to_vec();
                let bv = values[b.0].data().to_vec();
                if let Some(da) = buf!(*a) {
                    // da += g · bᵀ
                    for r in 0..m {
                        for c in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += gd[r * n + j] * bv[c * n + j];
                            }
                            da[r * k + c] += acc;
                        }
                    }
                }
                if let Some(db) = buf!(*b) {
                    // db += aᵀ · g
                    for r in 0..k {
                        for c in 0..n {
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += av[j * k + r] * gd[j * n + c];
                            }
                            db[r * n + c] += acc;
                        }
                    }
                }
            }
            Op::Affine { x, w, b } => {
                let sx = values[x.0].shape().to_vec();
                let sw = values[w.0].shape().to_vec();
                let (m, k, n) = (sx[0], sx[1], sw[1]);
                let xv = values[x.0].data().to_vec();
                let wv = values[w.0].data().to_vec();
                if let Some(dx) = buf!(*x) {
                    for r in 0..m {
                        for c in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += gd[r * n + j] * wv[c * n + j];
                            }
                            dx[r * k + c] += acc;
                        }
                    }
                }
                if let Some(dw) = buf!(*w) {
                    for r in 0..k {
                        for c in 0..n {
                            let mut acc = 0.0;
                            for j in 0..m {
                                acc += xv[j * k + r] * gd[j * n + c];
                            }
                            dw[r * n + c] += acc;
                        }
                    }
                }
                if let Some(db) = buf!(*b) {
                    for j in 0..m {
                        for c in 0..n {
                            db[c] += gd[j * n + c];
                        }
                    }
                }
            }
            Op::Conv1d { x, w, b, stride, pad } => {
                let sx = values[x.0].shape().to_vec();
                let sw = values[w.0].shape().to_vec();
                let (batch, c_in, t) = (sx[0], sx[1], sx[2]);
                let (c_out, _, k) = (sw[0], sw[1], sw[2]);
                let (t_out, pad_left) =
                    conv_geometry(t, k, *stride, *pad).expect("validated in forward");
                let stride = *stride;
                let xv = values[x.0].data().to_vec();
                let wv = values[w.0].data().to_vec();
                if let Some(dx) = buf!(*x) {
                    for bi in 0..batch {
                        for co in 0..c_out {
                            let g_base = (bi * c_out + co) * t_out;
                            for ci in 0..c_in {
                                let x_base = (bi * c_in + ci) * t;
                                let w_base = (co * c_in + ci) * k;
                                for ti in 0..t_out {
                                    let gv = gd[g_base + ti];
                                    if gv == 0.0 {
                                        continue;
                                    }
                                    let origin = ti * stride;
                                    for j in 0..k {
                                        let xi = origin + j;
                                        if xi < pad_left || xi - pad_left >= t {
                                            continue;
                                        }
                                        dx[x_base + xi - pad_left] += gv * wv[w_base + j];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(dw) = buf!(*w) {
                    for bi in 0..batch {
                        for co in 0..c_out {
                            let g_base = (bi * c_out + co) * t_out;
                            for ci in 0..c_in {
                                let x_base = (bi * c_in + ci) * t;
                                let w_base = (co * c_in + ci) * k;
                                for ti in 0..t_out {
                                    let gv = gd[g_base + ti];
                                    if gv == 0.0 {
                                        continue;
                                    }
                                    let origin = ti * stride;
                                    for j in 0..k {
                                        let xi = origin + j;
                                        if xi < pad_left || xi - pad_left >= t {
                                            continue;
                                        }
                                        dw[w_base + j] += gv * xv[x_base + xi - pad_left];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(bv) = *b {
                    if let Some(db) = buf!(bv) {
                        for bi in 0..batch {
                            for co in 0..c_out {
                                let g_base = (bi * c_out + co) * t_out;
                                db[co] += gd[g_base..g_base + t_out].iter().sum::<Real>();
                            }
                        }
                    }
                }
            }
            Op::DepthwiseConv1d { x, k } => {
                let sx = values[x.0].shape().to_vec();
                let sk = values[k.0].shape().to_vec();
                let (batch, c, t) = (sx[0], sx[1], sx[2]);
                let (f_count, k_len) = (sk[0], sk[1]);
                let pad_left = (k_len - 1) / 2;
                let xv = values[x.0].data().to_vec();
                let kv = values[k.0].data().to_vec();
                if let Some(dx) = buf!(*x) {
                    for bi in 0..batch {
                        for ci in 0..c {
                            let x_base = (bi * c + ci) * t;
                            for f in 0..f_count {
                                let g_base = ((bi * c + ci) * f_count + f) * t;
                                let k_base = f * k_len;
                                for ti in 0..t {
                                    let gv = gd[g_base + ti];
                                    if gv == 0.0 {
                                        continue;
                                    }
                                    for j in 0..k_len {
                                        let xi = ti + j;
                                        if xi < pad_left || xi - pad_left >= t {
                                            continue;
                                        }
                                        dx[x_base + xi - pad_left] += gv * kv[k_base + j];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(dk) = buf!(*k) {
                    for bi in 0..batch {
                        for ci in 0..c {
                            let x_base = (bi * c + ci) * t;
                            for f in 0..f_count {
                                let g_base = ((bi * c + ci) * f_count + f) * t;
                                let k_base = f * k_len;
                                for ti in 0..t {
                                    let gv = gd[g_base + ti];
                                    if gv == 0.0 {
                                        continue;
                                    }
                                    for j in 0..k_len {
                                        let xi = ti + j;
                                        if xi < pad_left || xi - pad_left >= t {
                                            continue;
                                        }
                                        dk[k_base + j] += gv * xv[x_base + xi - pad_left];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::SincKernels { f1, f2, len, fs } => {
                let (df1, df2) = sinc::kernel_bank_grad(
                    values[f1.0].data(),
                    values[f2.0].data(),
                    *len,
                    *fs,
                    gd,
                );
                if let Some(d1) = buf!(*f1) {
                    for (d, v) in d1.iter_mut().zip(&df1) {
                        *d += v;
                    }
                }
                if let Some(d2) = buf!(*f2) {
                    for (d, v) in d2.iter_mut().zip(&df2) {
                        *d += v;
                    }
                }
            }
            Op::Upsample { x, factor } => {
                let factor = *factor;
                let t_in = values[x.0].shape()[2];
                let rows = values[x.0].len() / t_in;
                if let Some(dx) = buf!(*x) {
                    for r in 0..rows {
                        for ti in 0..t_in {
                            let mut acc = 0.0;
                            let base = (r * t_in + ti) * factor;
                            for f in 0..factor {
                                acc += gd[base + f];
                            }
                            dx[r * t_in + ti] += acc;
                        }
                    }
                }
            }
            Op::LayerNorm { x } => {
                let y = values[i].data().to_vec();
                let inv_std = &aux[i];
                let glen = y.len() / inv_std.len();
                if let Some(dx) = buf!(*x) {
                    for (gi, &inv) in inv_std.iter().enumerate() {
                        let lo = gi * glen;
                        let hi = lo + glen;
                        let gs = &gd[lo..hi];
                        let ys = &y[lo..hi];
                        let mg = gs.iter().sum::<Real>() / glen as Real;
                        let mgy = gs.iter().zip(ys).map(|(&a, &b)| a * b).sum::<Real>()
                            / glen as Real;
                        for ((d, &gv), &yv) in dx[lo..hi].iter_mut().zip(gs).zip(ys) {
                            *d += inv * (gv - mg - yv * mgy);
                        }
                    }
                }
            }
            Op::Relu(a) => {
                let y = values[i].data().to_vec();
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &yv) in da.iter_mut().zip(gd).zip(&y) {
                        if yv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let y = values[i].data().to_vec();
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &yv) in da.iter_mut().zip(gd).zip(&y) {
                        *d += gv * (1.0 - yv * yv);
                    }
                }
            }
            Op::Exp(a) => {
                let y = values[i].data().to_vec();
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &yv) in da.iter_mut().zip(gd).zip(&y) {
                        *d += gv * yv;
                    }
                }
            }
            Op::Log(a) => {
                let xv = values[a.0].data().to_vec();
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &x) in da.iter_mut().zip(gd).zip(&xv) {
                        *d += gv / x;
                    }
                }
            }
            Op::Square(a) => {
                let xv = values[a.0].data().to_vec();
                if let Some(da) = buf!(*a) {
                    for ((d, &gv), &x) in da.iter_mut().zip(gd).zip(&xv) {
                        *d += gv * 2.0 * x;
                    }
                }
            }
            Op::SumAll(a) => {
                let gv = gd[0];
                if let Some(da) = buf!(*a) {
                    for d in da.iter_mut() {
                        *d += gv;
                    }
                }
            }
            Op::MeanAll(a) => {
                let n = values[a.0].len() as Real;
                let gv = gd[0] / n;
                if let Some(da) = buf!(*a) {
                    for d in da.iter_mut() {
                        *d += gv;
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = buf!(*a) {
                    for (d, &gv) in da.iter_mut().zip(gd) {
                        *d += gv;
                    }
                }
            }
            Op::Slice { x, axis, start, len } => {
                let dims = values[x.0].shape().to_vec();
                let (outer, mid, inner) = axis_split(&dims, *axis);
                let (start, len) = (*start, *len);
                if let Some(dx) = buf!(*x) {
                    for o in 0..outer {
                        let dst = (o * mid + start) * inner;
                        let src = o * len * inner;
                        for q in 0..len * inner {
                            dx[dst + q] += gd[src + q];
                        }
                    }
                }
            }
            Op::Concat { xs, axis } => {
                let xs = xs.clone();
                let axis = *axis;
                let total_mid = values[i].shape()[axis];
                let dims0 = values[xs[0].0].shape().to_vec();
                let (outer, _, inner) = axis_split(&dims0, axis);
                let mut offset = 0usize;
                for v in xs {
                    let mid = values[v.0].shape()[axis];
                    if let Some(dv) = buf!(v) {
                        for o in 0..outer {
                            let src = (o * total_mid + offset) * inner;
                            let dst = o * mid * inner;
                            for q in 0..mid * inner {
                                dv[dst + q] += gd[src + q];
                            }
                        }
                    }
                    offset += mid;
                }
            }
        }
        Ok(())
    }
}

/// `(outer, dims[axis], inner)` decomposition of a row-major shape.
fn axis_split(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(Real, Real) -> Real) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("zip_map shape")
}

/// `out += a · b` for row-major `a: [m,k]`, `b: [k,n]`.
fn matmul_into(out: &mut [Real], a: &[Real], b: &[Real], m: usize, k: usize, n: usize) {
    for r in 0..m {
        let arow = &a[r * k..(r + 1) * k];
        let orow = &mut out[r * n..(r + 1) * n];
        for (c, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[c * n..(c + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Output length and left padding for a 1-D convolution.
fn conv_geometry(t: usize, k: usize, stride: usize, pad: Pad) -> Result<(usize, usize)> {
    match pad {
        Pad::Valid => {
            if t < k {
                return Err(Error::Config(format!(
                    "conv1d: input length {t} shorter than kernel {k} with valid padding"
                )));
            }
            Ok(((t - k) / stride + 1, 0))
        }
        Pad::Same => {
            let t_out = t.div_ceil(stride);
            let span = (t_out - 1) * stride + k;
            let total = span.saturating_sub(t);
            Ok((t_out, total / 2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.iter().map(|&x| x as Real).collect())
    }

    #[test]
    fn add_rejects_shape_mismatch_with_both_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(&[2, 3]));
        let b = g.leaf(Tensor::zeros(&[3, 2]));
        let err = g.add(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[3, 2]"), "{err}");
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut g = Graph::new();
        let p = g.leaf(t1(&[3.0, -1.0, 2.5]));
        let loss = g.sum_all(p);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(p).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_sum_of_squares() {
        let mut g = Graph::new();
        let p = g.leaf(t1(&[1.0, 2.0]));
        let sq = g.square(p);
        let loss = g.sum_all(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(p).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_twice_without_reforward_rejected() {
        let mut g = Graph::new();
        let p = g.leaf(t1(&[1.0]));
        let loss = g.sum_all(p);
        g.backward(loss).unwrap();
        assert!(g.backward(loss).is_err());
        // A fresh op re-arms the tape.
        let loss2 = g.mul_scalar(loss, 2.0);
        g.backward(loss2).unwrap();
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut g = Graph::new();
        let p = g.leaf(t1(&[1.0, 2.0]));
        assert!(g.backward(p).is_err());
    }

    #[test]
    fn backward_is_linear_in_the_loss() {
        // grad(l1 + l2) == grad(l1) + grad(l2), each measured on a
        // fresh tape over the same leaf values.
        let x0 = t1(&[0.5, -1.25, 2.0]);
        let grad_of = |which: u8| -> Vec<Real> {
            let mut g = Graph::new();
            let p = g.leaf(x0.clone());
            let sq = g.square(p);
            let l1 = g.sum_all(sq);
            let th = g.tanh(p);
            let l2 = g.mean_all(th);
            let loss = match which {
                0 => l1,
                1 => l2,
                _ => g.add(l1, l2).unwrap(),
            };
            g.backward(loss).unwrap();
            g.grad(p).unwrap().data().to_vec()
        };
        let (ga, gb, gsum) = (grad_of(0), grad_of(1), grad_of(2));
        for i in 0..3 {
            assert!((ga[i] + gb[i] - gsum[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn conv1d_identity_kernel() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let w = g.leaf(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
        let y = g.conv1d(x, w, None, 1, Pad::Valid).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn conv1d_same_padding_alignment() {
        // x = [1,0,0,0], k = [1,2,3], same padding: the kernel center
        // aligns with each input position (pad_total = 2, split 1|1).
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 1, 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        let w = g.leaf(Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let y = g.conv1d(x, w, None, 1, Pad::Same).unwrap();
        assert_eq!(g.value(y).data(), &[2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn conv1d_matches_direct_summation_on_small_shapes() {
        // Brute-force oracle over every geometry with dims <= 32.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as Real / (1u64 << 53) as Real - 0.5
        };
        for &(batch, c_in, t, c_out, k, stride) in &[
            (1usize, 1usize, 5usize, 1usize, 3usize, 1usize),
            (2, 3, 7, 4, 3, 1),
            (1, 2, 9, 2, 5, 2),
            (3, 1, 32, 2, 7, 3),
            (2, 2, 8, 3, 8, 2),
            (1, 4, 16, 1, 1, 1),
        ] {
            for pad in [Pad::Valid, Pad::Same] {
                let xv: Vec<Real> = (0..batch * c_in * t).map(|_| next()).collect();
                let wv: Vec<Real> = (0..c_out * c_in * k).map(|_| next()).collect();
                let bv: Vec<Real> = (0..c_out).map(|_| next()).collect();
                let mut g = Graph::new();
                let x = g.constant(Tensor::new(vec![batch, c_in, t], xv.clone()).unwrap());
                let w = g.leaf(Tensor::new(vec![c_out, c_in, k], wv.clone()).unwrap());
                let b = g.leaf(Tensor::from_vec(bv.clone()));
                let y = g.conv1d(x, w, Some(b), stride, pad).unwrap();
                let (t_out, pad_left) = conv_geometry(t, k, stride, pad).unwrap();
                for bi in 0..batch {
                    for co in 0..c_out {
                        for ti in 0..t_out {
                            let mut want = bv[co];
                            for ci in 0..c_in {
                                for j in 0..k {
                                    let xi = (ti * stride + j) as isize - pad_left as isize;
                                    if xi >= 0 && (xi as usize) < t {
                                        want += xv[(bi * c_in + ci) * t + xi as usize]
                                            * wv[(co * c_in + ci) * k + j];
                                    }
                                }
                            }
                            let got = g.value(y).data()[(bi * c_out + co) * t_out + ti];
                            assert!(
                                (got - want).abs() < 1e-10,
                                "conv mismatch at b={bi} co={co} ti={ti}: {got} vs {want}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn layer_norm_zero_mean_unit_variance() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 1, 3], vec![2.0, 4.0, 6.0]).unwrap());
        let y = g.layer_norm(x, NormAxis::Time).unwrap();
        let d = g.value(y).data();
        let mean: Real = d.iter().sum::<Real>() / 3.0;
        let var: Real = d.iter().map(|&v| (v - mean) * (v - mean)).sum::<Real>() / 3.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4, "var {var}");
        // Known values for [2,4,6]: ±sqrt(3/2), 0.
        assert!((d[0] + (1.5 as Real).sqrt()).abs() < 1e-4);
        assert!(d[1].abs() < 1e-9);
    }

    #[test]
    fn slice_and_concat_round_trip() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![2, 5], (0..10).map(|v| v as Real).collect()).unwrap());
        let a = g.slice(x, 1, 0, 2).unwrap();
        let b = g.slice(x, 1, 2, 3).unwrap();
        let back = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(back).data(), g.value(x).data());
        assert_eq!(g.value(back).shape(), &[2, 5]);
    }

    #[test]
    fn upsample_repeats_and_sums_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 1, 2], vec![3.0, 5.0]).unwrap());
        let y = g.upsample(x, 3).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 3.0, 3.0, 5.0, 5.0, 5.0]);
        let s = g.sum_all(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn log_rejects_non_positive_input() {
        let mut g = Graph::new();
        let x = g.leaf(t1(&[1.0, 0.0]));
        assert!(g.log(x).is_err());
    }

    // ── finite-difference gradient checks ────────────────────────────

    /// Central finite differences against analytic gradients for a
    /// composed graph. `build` must construct the same scalar loss for
    /// each parameter state.
    fn fd_check(
        leaves: &[Tensor],
        build: &dyn Fn(&mut Graph, &[Var]) -> Var,
        tol: Real,
    ) {
        let mut g = Graph::new();
        let vars: Vec<Var> = leaves.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.backward(loss).unwrap();
        let analytic: Vec<Vec<Real>> = vars
            .iter()
            .map(|&v| g.grad(v).map(|t| t.data().to_vec()).unwrap_or_else(|| vec![0.0; g.value(v).len()]))
            .collect();

        let eval = |perturbed: &[Tensor]| -> Real {
            let mut g = Graph::new();
            let vars: Vec<Var> = perturbed.iter().map(|t| g.leaf(t.clone())).collect();
            let loss = build(&mut g, &vars);
            g.value(loss).item()
        };

        let h: Real = 1e-5;
        for (li, leaf) in leaves.iter().enumerate() {
            for ei in 0..leaf.len() {
                let mut plus = leaves.to_vec();
                plus[li].data_mut()[ei] += h;
                let mut minus = leaves.to_vec();
                minus[li].data_mut()[ei] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic[li][ei];
                let denom = a.abs().max(fd.abs()).max(1e-6);
                let rel = (a - fd).abs() / denom;
                assert!(
                    rel < tol,
                    "leaf {li} elem {ei}: analytic {a} vs fd {fd} (rel {rel:.2e})"
                );
            }
        }
    }

    fn seeded(shape: &[usize], seed: u64) -> Tensor {
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                ((s >> 11) as Real / (1u64 << 53) as Real) - 0.5
            })
            .collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn fd_elementwise_chain() {
        fd_check(
            &[seeded(&[6], 1), seeded(&[6], 2)],
            &|g, v| {
                let m = g.mul(v[0], v[1]).unwrap();
                let e = g.exp(m);
                let t = g.tanh(e);
                let s = g.sub(t, v[0]).unwrap();
                let q = g.square(s);
                g.mean_all(q)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_affine() {
        fd_check(
            &[seeded(&[3, 4], 3), seeded(&[4, 2], 4), seeded(&[2], 5)],
            &|g, v| {
                let y = g.affine(v[0], v[1], v[2]).unwrap();
                let t = g.tanh(y);
                let q = g.square(t);
                g.sum_all(q)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_matmul() {
        fd_check(
            &[seeded(&[2, 3], 21), seeded(&[3, 4], 22)],
            &|g, v| {
                let y = g.matmul(v[0], v[1]).unwrap();
                let t = g.tanh(y);
                g.mean_all(t)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_conv_stack() {
        fd_check(
            &[
                seeded(&[2, 2, 9], 7),
                seeded(&[3, 2, 3], 8),
                seeded(&[3], 9),
                seeded(&[1, 3, 3], 10),
                seeded(&[1], 11),
            ],
            &|g, v| {
                let c1 = g.conv1d(v[0], v[1], Some(v[2]), 2, Pad::Same).unwrap();
                let r = g.relu(c1);
                let c2 = g.conv1d(r, v[3], Some(v[4]), 1, Pad::Valid).unwrap();
                let q = g.square(c2);
                g.mean_all(q)
            },
            1e-5,
        );
    }

    #[test]
    fn fd_layer_norm_and_upsample() {
        fd_check(
            &[seeded(&[2, 3, 5], 12)],
            &|g, v| {
                let n = g.layer_norm(v[0], NormAxis::Time).unwrap();
                let u = g.upsample(n, 2).unwrap();
                let t = g.tanh(u);
                g.mean_all(t)
            },
            1e-5,
        );
        fd_check(
            &[seeded(&[2, 2, 4], 13)],
            &|g, v| {
                let n = g.layer_norm(v[0], NormAxis::Window).unwrap();
                let q = g.square(n);
                g.sum_all(q)
            },
            1e-5,
        );
    }

    #[test]
    fn fd_slice_concat_reshape() {
        fd_check(
            &[seeded(&[2, 6], 14), seeded(&[2, 3], 15)],
            &|g, v| {
                let a = g.slice(v[0], 1, 1, 3).unwrap();
                let c = g.concat(&[a, v[1]], 1).unwrap();
                let r = g.reshape(c, &[3, 4]).unwrap();
                let t = g.tanh(r);
                g.sum_all(t)
            },
            1e-6,
        );
    }

    #[test]
    fn fd_log_and_scalar_ops() {
        let mut base = seeded(&[5], 16);
        for v in base.data_mut() {
            *v = v.abs() + 0.5; // keep log well inside its domain
        }
        fd_check(
            &[base],
            &|g, v| {
                let l = g.log(v[0]).unwrap();
                let s = g.mul_scalar(l, 1.7);
                let a = g.add_scalar(s, 0.3);
                let q = g.square(a);
                g.mean_all(q)
            },
            1e-6,
        );
    }
}
