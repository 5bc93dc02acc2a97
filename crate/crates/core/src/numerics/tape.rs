//! Reverse-mode differentiation over a linear record of primitive operations.
//!
//! Every primitive computes its forward value eagerly and pushes a node holding
//! whatever its adjoint needs. [`Tape::backward`] replays the nodes in reverse
//! recording order, accumulating gradients additively where a value fans out.

use super::tensor::{Tensor, TensorError, TensorResult};
use super::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf,
    MatMul { a: Var, b: Var },
    Transpose { a: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: F },
    Gelu { a: Var },
    LayerNorm { a: Var, inv_std: Vec<F> },
    Softmax { a: Var },
    Embedding { table: Var, ids: Vec<usize> },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Reshape { a: Var },
    Sum { a: Var },
    Mse { a: Var, b: Var },
    Sigmoid { a: Var },
    BceWithLogits { logits: Var, targets: Vec<F> },
    StraightThrough { a: Var },
}

#[derive(Debug, Clone)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Gradients produced by one [`Tape::backward`] call, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Grads<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Grads<F> {
    /// Gradient for `var`, or `None` when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor<F>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<F>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    consumed: bool,
}

fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}

fn is_suffix(shape: &[usize], suffix: &[usize]) -> bool {
    suffix.len() <= shape.len() && shape[shape.len() - suffix.len()..] == *suffix
}

/// `[outer, axis extent, inner]` factorization of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;
pub const LAYER_NORM_EPS: f64 = 1e-5;

fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

impl<F: Real> Tape<F> {
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

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Leaf that gradients are tracked for.
    pub fn leaf(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// `a @ b` for `[m,k]×[k,n]`, `[B,m,k]×[k,n]` or `[B,m,k]×[B,k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> TensorResult<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = match (sa.len(), sb.len()) {
            (2 | 3, 2) if sa[sa.len() - 1] == sb[0] => {
                let mut s = sa[..sa.len() - 1].to_vec();
                s.push(sb[1]);
                s
            }
            (3, 3) if sa[0] == sb[0] && sa[2] == sb[1] => vec![sa[0], sa[1], sb[2]],
            _ => return Err(mismatch("matmul", &sa, &sb)),
        };
        let mut out = vec![F::zero(); out_shape.iter().product()];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        if sb.len() == 2 {
            let m = av.len() / sb[0];
            F::gemm(m, sb[0], sb[1], av, false, bv, false, &mut out, false);
        } else {
            let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
            for i in 0..batch {
                F::gemm(
                    m,
                    k,
                    n,
                    &av[i * m * k..],
                    false,
                    &bv[i * k * n..],
                    false,
                    &mut out[i * m * n..],
                    false,
                );
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::from_parts(out_shape, out), Op::MatMul { a, b }, rg))
    }

    /// Swap the last two axes (rank 2 or 3).
    pub fn transpose(&mut self, a: Var) -> TensorResult<Var> {
        let s = self.shape(a).to_vec();
        if !(2..=3).contains(&s.len()) {
            return Err(TensorError::InvalidShape {
                op: "transpose",
                shape: s,
                reason: "rank must be 2 or 3".into(),
            });
        }
        let out = transpose_last2(self.value(a));
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Transpose { a }, rg))
    }

    fn broadcast_binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(F, F) -> F,
    ) -> TensorResult<Tensor<F>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !is_suffix(ta.shape(), tb.shape()) {
            return Err(mismatch(op, ta.shape(), tb.shape()));
        }
        let bn = tb.numel();
        let data = ta
            .data()
            .chunks_exact(bn)
            .flat_map(|chunk| chunk.iter().zip(tb.data()).map(|(&x, &y)| f(x, y)))
            .collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data))
    }

    /// Elementwise sum; `b` may broadcast over the leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> TensorResult<Var> {
        let out = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> TensorResult<Var> {
        let out = self.broadcast_binary("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub { a, b }, rg))
    }

    /// Elementwise product; `b` may broadcast over the leading axes of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> TensorResult<Var> {
        let out = self.broadcast_binary("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale { a, c }, rg)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let c = F::from_f64_lossy(GELU_C);
        let k = F::from_f64_lossy(GELU_A);
        let half = F::from_f64_lossy(0.5);
        let out = self
            .value(a)
            .map(|x| half * x * (F::one() + (c * (x + k * x * x * x)).tanh()));
        let rg = self.rg(&[a]);
        self.push(out, Op::Gelu { a }, rg)
    }

    /// Normalize over the last axis, without affine terms.
    ///
    /// A row with zero variance maps to exact zeros.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let d = *ta.shape().last().expect("rank >= 1");
        let dn = F::from_usize(d).expect("extent fits");
        let eps = F::from_f64_lossy(LAYER_NORM_EPS);
        let mut out = Vec::with_capacity(ta.numel());
        let mut inv_std = Vec::with_capacity(ta.numel() / d);
        for row in ta.data().chunks_exact(d) {
            let mean = row.iter().copied().sum::<F>() / dn;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / dn;
            let inv = F::one() / (var + eps).sqrt();
            inv_std.push(inv);
            if row.iter().all(|&x| x == row[0]) {
                out.extend(std::iter::repeat_n(F::zero(), d));
            } else {
                out.extend(row.iter().map(|&x| (x - mean) * inv));
            }
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), out);
        let rg = self.rg(&[a]);
        self.push(out, Op::LayerNorm { a, inv_std }, rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let d = *ta.shape().last().expect("rank >= 1");
        let mut out = Vec::with_capacity(ta.numel());
        for row in ta.data().chunks_exact(d) {
            let max = row.iter().copied().fold(F::neg_infinity(), F::max);
            let start = out.len();
            out.extend(row.iter().map(|&x| (x - max).exp()));
            let total: F = out[start..].iter().copied().sum();
            for y in &mut out[start..] {
                *y = *y / total;
            }
        }
        let out = Tensor::from_parts(ta.shape().to_vec(), out);
        let rg = self.rg(&[a]);
        self.push(out, Op::Softmax { a }, rg)
    }

    /// Rows of a `[vocab, d]` table selected by `ids`, giving `[ids.len(), d]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> TensorResult<Var> {
        let tt = self.value(table);
        if tt.rank() != 2 {
            return Err(TensorError::InvalidShape {
                op: "embedding",
                shape: tt.shape().to_vec(),
                reason: "table must be rank 2".into(),
            });
        }
        if ids.is_empty() {
            return Err(TensorError::InvalidShape {
                op: "embedding",
                shape: tt.shape().to_vec(),
                reason: "no ids to look up".into(),
            });
        }
        let (vocab, d) = (tt.shape()[0], tt.shape()[1]);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(TensorError::IndexOutOfRange {
                    op: "embedding",
                    index: id,
                    extent: vocab,
                });
            }
            out.extend_from_slice(tt.row(id));
        }
        let out = Tensor::from_parts(vec![ids.len(), d], out);
        let rg = self.rg(&[table]);
        Ok(self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Join along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> TensorResult<Var> {
        let first = self
            .shape(*parts.first().ok_or(TensorError::InvalidShape {
                op: "concat",
                shape: vec![],
                reason: "nothing to concatenate".into(),
            })?)
            .to_vec();
        if axis >= first.len() {
            return Err(TensorError::InvalidShape {
                op: "concat",
                shape: first,
                reason: format!("axis {axis} out of range"),
            });
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(mismatch("concat", &first, s));
            }
            total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_axis(&first, axis);
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::from_parts(out_shape, out),
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> TensorResult<Var> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() || len == 0 || start + len > s[axis] {
            return Err(TensorError::InvalidShape {
                op: "slice",
                shape: s,
                reason: format!("cannot take {len} from {start} along axis {axis}"),
            });
        }
        let (outer, extent, inner) = split_axis(&s, axis);
        let data = self.value(a).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * extent * inner + start * inner;
            out.extend_from_slice(&data[base..base + len * inner]);
        }
        let mut out_shape = s;
        out_shape[axis] = len;
        let rg = self.rg(&[a]);
        Ok(self.push(
            Tensor::from_parts(out_shape, out),
            Op::Slice { a, axis, start },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> TensorResult<Var> {
        let out = self.value(a).reshape(shape.to_vec())?;
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Reshape { a }, rg))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().copied().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(total), Op::Sum { a }, rg)
    }

    /// Mean squared difference over all entries.
    pub fn mse(&mut self, a: Var, b: Var) -> TensorResult<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("mse", ta.shape(), tb.shape()));
        }
        let n = F::from_usize(ta.numel()).expect("extent fits");
        let total: F = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(total / n), Op::Mse { a, b }, rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid { a }, rg)
    }

    /// Mean binary cross-entropy of `logits` against fixed `targets` in `[0, 1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[F]) -> TensorResult<Var> {
        let tl = self.value(logits);
        if tl.numel() != targets.len() {
            return Err(mismatch("bce_with_logits", tl.shape(), &[targets.len()]));
        }
        let n = F::from_usize(targets.len()).expect("extent fits");
        let total: F = tl
            .data()
            .iter()
            .zip(targets)
            .map(|(&x, &y)| x.max(F::zero()) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(total / n),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    /// Records `value` as the output of a non-differentiable map of `a` whose
    /// adjoint is the identity (straight-through estimator).
    pub fn straight_through(&mut self, a: Var, value: Tensor<F>) -> TensorResult<Var> {
        if value.shape() != self.shape(a) {
            return Err(mismatch("straight_through", self.shape(a), value.shape()));
        }
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::StraightThrough { a }, rg))
    }

    /// Replays adjoints from the scalar `loss`. A record can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> TensorResult<Grads<F>> {
        if self.consumed {
            return Err(TensorError::BackwardTwice);
        }
        let loss_shape = self.shape(loss).to_vec();
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: loss_shape,
            });
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<F>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(loss_shape, F::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.adjoint(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Grads { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<F>>], v: Var, g: Tensor<F>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (x, y) in acc.data_mut().iter_mut().zip(g.data()) {
                    *x += *y;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn adjoint(&self, i: usize, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (sa, sb) = (ta.shape(), tb.shape());
                if sb.len() == 2 {
                    let (k, n) = (sb[0], sb[1]);
                    let m = ta.numel() / k;
                    if self.requires_grad(a) {
                        let mut da = vec![F::zero(); ta.numel()];
                        F::gemm(m, n, k, g.data(), false, tb.data(), true, &mut da, false);
                        self.accumulate(grads, a, Tensor::from_parts(sa.to_vec(), da));
                    }
                    if self.requires_grad(b) {
                        let mut db = vec![F::zero(); tb.numel()];
                        F::gemm(k, m, n, ta.data(), true, g.data(), false, &mut db, false);
                        self.accumulate(grads, b, Tensor::from_parts(sb.to_vec(), db));
                    }
                } else {
                    let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    if self.requires_grad(a) {
                        let mut da = vec![F::zero(); ta.numel()];
                        for t in 0..batch {
                            F::gemm(
                                m,
                                n,
                                k,
                                &g.data()[t * m * n..],
                                false,
                                &tb.data()[t * k * n..],
                                true,
                                &mut da[t * m * k..],
                                false,
                            );
                        }
                        self.accumulate(grads, a, Tensor::from_parts(sa.to_vec(), da));
                    }
                    if self.requires_grad(b) {
                        let mut db = vec![F::zero(); tb.numel()];
                        for t in 0..batch {
                            F::gemm(
                                k,
                                m,
                                n,
                                &ta.data()[t * m * k..],
                                true,
                                &g.data()[t * m * n..],
                                false,
                                &mut db[t * k * n..],
                                false,
                            );
                        }
                        self.accumulate(grads, b, Tensor::from_parts(sb.to_vec(), db));
                    }
                }
            }
            &Op::Transpose { a } => self.accumulate(grads, a, transpose_last2(g)),
            &Op::Add { a, b } => {
                self.accumulate(grads, a, g.clone());
                if self.requires_grad(b) {
                    self.accumulate(grads, b, reduce_to_suffix(g, self.shape(b)));
                }
            }
            &Op::Sub { a, b } => {
                self.accumulate(grads, a, g.clone());
                if self.requires_grad(b) {
                    let neg = g.map(|x| -x);
                    self.accumulate(grads, b, reduce_to_suffix(&neg, self.shape(b)));
                }
            }
            &Op::Mul { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let bn = tb.numel();
                if self.requires_grad(a) {
                    let da = g
                        .data()
                        .chunks_exact(bn)
                        .flat_map(|c| c.iter().zip(tb.data()).map(|(&x, &y)| x * y))
                        .collect();
                    self.accumulate(grads, a, Tensor::from_parts(ta.shape().to_vec(), da));
                }
                if self.requires_grad(b) {
                    let prod: Vec<F> = g.data().iter().zip(ta.data()).map(|(&x, &y)| x * y).collect();
                    let prod = Tensor::from_parts(ta.shape().to_vec(), prod);
                    self.accumulate(grads, b, reduce_to_suffix(&prod, tb.shape()));
                }
            }
            &Op::Scale { a, c } => self.accumulate(grads, a, g.map(|x| x * c)),
            &Op::Gelu { a } => {
                let c = F::from_f64_lossy(GELU_C);
                let k = F::from_f64_lossy(GELU_A);
                let half = F::from_f64_lossy(0.5);
                let three = F::from_f64_lossy(3.0);
                let ta = self.value(a);
                let da = ta
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&x, &dy)| {
                        let th = (c * (x + k * x * x * x)).tanh();
                        let d = half * (F::one() + th)
                            + half * x * (F::one() - th * th) * c * (F::one() + three * k * x * x);
                        dy * d
                    })
                    .collect();
                self.accumulate(grads, a, Tensor::from_parts(ta.shape().to_vec(), da));
            }
            Op::LayerNorm { a, inv_std } => {
                let d = *out.shape().last().expect("rank >= 1");
                let dn = F::from_usize(d).expect("extent fits");
                let mut da = Vec::with_capacity(out.numel());
                for ((y, dy), &inv) in out
                    .data()
                    .chunks_exact(d)
                    .zip(g.data().chunks_exact(d))
                    .zip(inv_std)
                {
                    let mean_dy = dy.iter().copied().sum::<F>() / dn;
                    let mean_dyy = dy.iter().zip(y).map(|(&p, &q)| p * q).sum::<F>() / dn;
                    da.extend(
                        dy.iter()
                            .zip(y)
                            .map(|(&p, &q)| inv * (p - mean_dy - q * mean_dyy)),
                    );
                }
                self.accumulate(grads, *a, Tensor::from_parts(out.shape().to_vec(), da));
            }
            &Op::Softmax { a } => {
                let d = *out.shape().last().expect("rank >= 1");
                let mut da = Vec::with_capacity(out.numel());
                for (y, dy) in out.data().chunks_exact(d).zip(g.data().chunks_exact(d)) {
                    let dot: F = y.iter().zip(dy).map(|(&p, &q)| p * q).sum();
                    da.extend(y.iter().zip(dy).map(|(&p, &q)| p * (q - dot)));
                }
                self.accumulate(grads, a, Tensor::from_parts(out.shape().to_vec(), da));
            }
            Op::Embedding { table, ids } => {
                let tshape = self.shape(*table).to_vec();
                let d = tshape[1];
                let mut dt = Tensor::zeros(tshape);
                for (row, &id) in ids.iter().enumerate() {
                    let dst = &mut dt.data_mut()[id * d..(id + 1) * d];
                    for (x, &y) in dst.iter_mut().zip(&g.data()[row * d..(row + 1) * d]) {
                        *x += y;
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = split_axis(out.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let ps = self.shape(p).to_vec();
                    let len = ps[*axis];
                    if self.requires_grad(p) {
                        let mut dp = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = o * total * inner + offset * inner;
                            dp.extend_from_slice(&g.data()[base..base + len * inner]);
                        }
                        self.accumulate(grads, p, Tensor::from_parts(ps, dp));
                    }
                    offset += len;
                }
            }
            &Op::Slice { a, axis, start } => {
                let sa = self.shape(a).to_vec();
                let (outer, extent, inner) = split_axis(&sa, axis);
                let len = out.shape()[axis];
                let mut da = Tensor::zeros(sa);
                for o in 0..outer {
                    let base = o * extent * inner + start * inner;
                    da.data_mut()[base..base + len * inner]
                        .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
                }
                self.accumulate(grads, a, da);
            }
            &Op::Reshape { a } => {
                let sa = self.shape(a).to_vec();
                self.accumulate(grads, a, Tensor::from_parts(sa, g.data().to_vec()));
            }
            &Op::Sum { a } => {
                let sa = self.shape(a).to_vec();
                self.accumulate(grads, a, Tensor::full(sa, g.data()[0]));
            }
            &Op::Mse { a, b } => {
                let (ta, tb) = (self.value(a), self.value(b));
                let n = F::from_usize(ta.numel()).expect("extent fits");
                let two = F::from_f64_lossy(2.0);
                let scale = two * g.data()[0] / n;
                let diff: Vec<F> = ta
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(&x, &y)| (x - y) * scale)
                    .collect();
                let diff = Tensor::from_parts(ta.shape().to_vec(), diff);
                if self.requires_grad(b) {
                    self.accumulate(grads, b, diff.map(|x| -x));
                }
                self.accumulate(grads, a, diff);
            }
            &Op::Sigmoid { a } => {
                let da = out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &dy)| dy * y * (F::one() - y))
                    .collect();
                self.accumulate(grads, a, Tensor::from_parts(out.shape().to_vec(), da));
            }
            Op::BceWithLogits { logits, targets } => {
                let tl = self.value(*logits);
                let n = F::from_usize(targets.len()).expect("extent fits");
                let scale = g.data()[0] / n;
                let dl = tl
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&x, &y)| (sigmoid(x) - y) * scale)
                    .collect();
                self.accumulate(grads, *logits, Tensor::from_parts(tl.shape().to_vec(), dl));
            }
            &Op::StraightThrough { a } => self.accumulate(grads, a, g.clone()),
        }
    }
}

fn transpose_last2<F: Real>(t: &Tensor<F>) -> Tensor<F> {
    let s = t.shape();
    let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
    let batch = t.numel() / (r * c);
    let mut out = vec![F::zero(); t.numel()];
    for b in 0..batch {
        let src = &t.data()[b * r * c..(b + 1) * r * c];
        let dst = &mut out[b * r * c..(b + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    let mut shape = s.to_vec();
    let n = shape.len();
    shape.swap(n - 2, n - 1);
    Tensor::from_parts(shape, out)
}

/// Sum a gradient over the leading axes that a suffix-broadcast operand was expanded along.
fn reduce_to_suffix<F: Real>(g: &Tensor<F>, shape: &[usize]) -> Tensor<F> {
    if g.shape() == shape {
        return g.clone();
    }
    let n: usize = shape.iter().product();
    let mut out = vec![F::zero(); n];
    for chunk in g.data().chunks_exact(n) {
        for (x, &y) in out.iter_mut().zip(chunk) {
            *x += y;
        }
    }
    Tensor::from_parts(shape.to_vec(), out)
}
