//! Reverse-mode differentiation over a linear record of operations.
//!
//! Every operation appends one node holding its output value. Nodes are
//! created in topological order by construction, so the backward pass is a
//! single reverse sweep.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

use super::kernels;
use super::param::ParamSet;
use super::real::Real;
use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which bound parameters receive gradients.
#[derive(Debug, Clone)]
pub enum GradFilter {
    /// Only parameters flagged trainable.
    Trainable,
    /// Every bound parameter (gradient checks through frozen blocks).
    All,
    /// No parameter; used for inference.
    None,
    /// Exactly the named parameters.
    Names(HashSet<String>),
}

impl GradFilter {
    fn wants(&self, name: &str, trainable: bool) -> bool {
        match self {
            GradFilter::Trainable => trainable,
            GradFilter::All => true,
            GradFilter::None => false,
            GradFilter::Names(set) => set.contains(name),
        }
    }
}

/// Class index excluded from the cross-entropy loss.
pub const IGNORE_INDEX: i64 = -100;

#[derive(Debug)]
enum Op<F> {
    Leaf,
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    AddBias { x: Var, bias: Var },
    Mul(Var, Var),
    Scale(Var, F),
    ScaleBy { x: Var, s: Var },
    Gelu(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<F>, rstd: Vec<F> },
    Attention { q: Var, k: Var, v: Var, heads: usize, causal: bool, probs: Vec<F> },
    Concat { inputs: Vec<Var>, axis: usize },
    GatherRows { x: Var, idx: Vec<usize> },
    ReduceMean { x: Var, axis: usize },
    SumAll(Var),
    Mse { pred: Var, target: Vec<F> },
    SoftmaxCe { logits: Var, targets: Vec<i64>, probs: Vec<F>, count: usize },
}

#[derive(Debug)]
struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Operation record for one forward pass.
#[derive(Debug)]
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
    filter: GradFilter,
    bound: HashMap<String, Var>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients<F> {
    grads: Vec<Option<Vec<F>>>,
    params: HashMap<String, Var>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&[F]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of a bound parameter, if it was bound and required grad.
    pub fn param(&self, name: &str) -> Option<&[F]> {
        self.params.get(name).and_then(|v| self.get(*v))
    }

    /// All parameter gradients, consuming the node storage.
    pub fn into_named(mut self) -> NamedGrads<F> {
        let mut out = NamedGrads::default();
        for (name, var) in self.params {
            if let Some(g) = self.grads[var.0].take() {
                out.map.insert(name, g);
            }
        }
        out
    }
}

/// Parameter-name → gradient map, accumulable across samples.
#[derive(Debug, Clone, Default)]
pub struct NamedGrads<F> {
    pub map: HashMap<String, Vec<F>>,
}

impl<F: Real> NamedGrads<F> {
    pub fn get(&self, name: &str) -> Option<&[F]> {
        self.map.get(name).map(|v| v.as_slice())
    }

    pub fn accumulate(&mut self, other: NamedGrads<F>) {
        for (name, g) in other.map {
            match self.map.get_mut(&name) {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += *b),
                None => {
                    self.map.insert(name, g);
                }
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        for g in self.map.values_mut() {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }
}

fn shape_err(what: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension(format!("{what}: {a:?} vs {b:?}"))
}

/// Row/column strides of a stored matrix, optionally viewed transposed.
fn view(cols: usize, transposed: bool) -> (isize, isize) {
    if transposed {
        (1, cols as isize)
    } else {
        (cols as isize, 1)
    }
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new(GradFilter::Trainable)
    }
}

impl<F: Real> Tape<F> {
    pub fn new(filter: GradFilter) -> Self {
        Tape {
            nodes: Vec::new(),
            filter,
            bound: HashMap::new(),
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

    pub fn dims(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.dims()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf with an explicit gradient flag.
    pub fn leaf(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Binds a named parameter once per tape; repeated calls return the same node.
    pub fn param(&mut self, params: &ParamSet<F>, name: &str) -> Result<Var> {
        if let Some(v) = self.bound.get(name) {
            return Ok(*v);
        }
        let p = params
            .get(name)
            .ok_or_else(|| Error::Internal(format!("unknown parameter {name}")))?;
        let wants = self.filter.wants(name, p.trainable);
        let v = self.push(p.tensor.clone(), Op::Leaf, wants);
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    /// Matrix product of `op(a)` and `op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (ar, ac) = self.value(a).shape2()?;
        let (br, bc) = self.value(b).shape2()?;
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(shape_err(
                "matmul inner extents",
                self.value(a).dims(),
                self.value(b).dims(),
            ));
        }
        let mut out = vec![F::zero(); m * n];
        let (rsa, csa) = view(ac, ta);
        let (rsb, csb) = view(bc, tb);
        F::gemm(
            m,
            k,
            n,
            F::one(),
            self.value(a).values(),
            rsa,
            csa,
            self.value(b).values(),
            rsb,
            csb,
            F::zero(),
            &mut out,
            n as isize,
            1,
        );
        let ng = self.ng(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul { a, b, ta, tb }, ng))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `x · wᵀ + bias` for a weight stored as `[out × in]`.
    pub fn linear(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let y = self.matmul_t(x, w, false, true)?;
        match bias {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(shape_err("add", self.dims(a), self.dims(b)));
        }
        let vals = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| *x + *y)
            .collect();
        let t = Tensor::new(self.dims(a).to_vec(), vals)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    /// Adds a vector along the last axis.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.value(bias).len() != d {
            return Err(shape_err("bias", self.dims(x), self.dims(bias)));
        }
        let b = self.value(bias).values();
        let vals = self
            .value(x)
            .values()
            .chunks(d)
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| *x + *y))
            .collect();
        let t = Tensor::new(self.dims(x).to_vec(), vals)?;
        let ng = self.ng(&[x, bias]);
        Ok(self.push(t, Op::AddBias { x, bias }, ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.dims(a) != self.dims(b) {
            return Err(shape_err("mul", self.dims(a), self.dims(b)));
        }
        let vals = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| *x * *y)
            .collect();
        let t = Tensor::new(self.dims(a).to_vec(), vals)?;
        let ng = self.ng(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, c: F) -> Result<Var> {
        let vals = self.value(x).values().iter().map(|v| *v * c).collect();
        let t = Tensor::new(self.dims(x).to_vec(), vals)?;
        let ng = self.ng(&[x]);
        Ok(self.push(t, Op::Scale(x, c), ng))
    }

    /// Multiplies by a learnable single-element gain.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(shape_err("scalar gain", self.dims(s), &[1]));
        }
        let c = self.value(s).item();
        let vals = self.value(x).values().iter().map(|v| *v * c).collect();
        let t = Tensor::new(self.dims(x).to_vec(), vals)?;
        let ng = self.ng(&[x, s]);
        Ok(self.push(t, Op::ScaleBy { x, s }, ng))
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let vals = self.value(x).values().iter().map(|v| kernels::gelu(*v)).collect();
        let t = Tensor::new(self.dims(x).to_vec(), vals)?;
        let ng = self.ng(&[x]);
        Ok(self.push(t, Op::Gelu(x), ng))
    }

    /// Standardizes along the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: F) -> Result<Var> {
        let d = self.value(x).last_dim();
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(shape_err("layer_norm affine", self.dims(x), self.dims(gain)));
        }
        if eps <= F::zero() {
            return Err(Error::Precondition("layer_norm eps must be positive".into()));
        }
        let xv = self.value(x).values();
        let rows = xv.len() / d;
        let mut xhat = vec![F::zero(); xv.len()];
        let mut rstd = vec![F::zero(); rows];
        let mut out = vec![F::zero(); xv.len()];
        let g = self.value(gain).values();
        let b = self.value(bias).values();
        for r in 0..rows {
            let s = r * d..(r + 1) * d;
            rstd[r] = kernels::standardize(&xv[s.clone()], &mut xhat[s.clone()], eps);
            for ((o, h), (gg, bb)) in out[s.clone()].iter_mut().zip(&xhat[s]).zip(g.iter().zip(b)) {
                *o = *h * *gg + *bb;
            }
        }
        let t = Tensor::new(self.dims(x).to_vec(), out)?;
        let ng = self.ng(&[x, gain, bias]);
        Ok(self.push(t, Op::LayerNorm { x, gain, bias, xhat, rstd }, ng))
    }

    /// Multi-head scaled dot-product self-attention over `[n × d]` inputs.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Result<Var> {
        let (n, d) = self.value(q).shape2()?;
        if self.dims(k) != [n, d] || self.dims(v) != [n, d] {
            return Err(shape_err("attention q/k/v", self.dims(q), self.dims(k)));
        }
        if heads == 0 || d % heads != 0 {
            return Err(Error::Dimension(format!("{d} features not divisible into {heads} heads")));
        }
        let mut probs = vec![F::zero(); heads * n * n];
        let mut out = vec![F::zero(); n * d];
        kernels::attention_forward(
            self.value(q).values(),
            self.value(k).values(),
            self.value(v).values(),
            n,
            d,
            heads,
            causal,
            &mut probs,
            &mut out,
        );
        let t = Tensor::matrix(n, d, out)?;
        let ng = self.ng(&[q, k, v]);
        Ok(self.push(t, Op::Attention { q, k, v, heads, causal, probs }, ng))
    }

    /// Order-preserving concatenation along `axis`.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::Precondition("concat of zero tensors".into()))?;
        let base = self.dims(first).to_vec();
        if axis >= base.len() {
            return Err(Error::Dimension(format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let d = self.dims(v);
            let compatible = d.len() == base.len()
                && d.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(shape_err("concat non-axis extents", &base, d));
            }
            total += d[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let chunk = self.dims(v)[axis] * inner;
                out.extend_from_slice(&self.value(v).values()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut dims = base;
        dims[axis] = total;
        let t = Tensor::new(dims, out)?;
        let ng = self.ng(inputs);
        Ok(self.push(t, Op::Concat { inputs: inputs.to_vec(), axis }, ng))
    }

    /// Selects rows (first-axis slices) by index; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let dims = self.dims(x).to_vec();
        let rows = *dims.first().ok_or_else(|| Error::Dimension("gather on a scalar".into()))?;
        if idx.is_empty() {
            return Err(Error::Precondition("gather of zero rows".into()));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Dimension(format!("row {bad} out of range for {dims:?}")));
        }
        let width: usize = dims[1..].iter().product();
        let src = self.value(x).values();
        let mut out = Vec::with_capacity(idx.len() * width);
        for &i in idx {
            out.extend_from_slice(&src[i * width..(i + 1) * width]);
        }
        let mut od = dims;
        od[0] = idx.len();
        let t = Tensor::new(od, out)?;
        let ng = self.ng(&[x]);
        Ok(self.push(t, Op::GatherRows { x, idx: idx.to_vec() }, ng))
    }

    /// Contiguous row range `[start, start + len)`.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.gather_rows(x, &idx)
    }

    /// Arithmetic mean along `axis`; the axis is removed from the result.
    pub fn reduce_mean(&mut self, x: Var, axis: usize) -> Result<Var> {
        let dims = self.dims(x).to_vec();
        if axis >= dims.len() {
            return Err(Error::Dimension(format!("axis {axis} out of range for {dims:?}")));
        }
        let outer: usize = dims[..axis].iter().product();
        let ext = dims[axis];
        let inner: usize = dims[axis + 1..].iter().product();
        let inv = F::one() / F::from_usize(ext).unwrap();
        let src = self.value(x).values();
        let mut out = vec![F::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..ext {
                let base = (o * ext + a) * inner;
                for i in 0..inner {
                    out[o * inner + i] += src[base + i];
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        let mut od = dims;
        od.remove(axis);
        let t = Tensor::new(od, out)?;
        let ng = self.ng(&[x]);
        Ok(self.push(t, Op::ReduceMean { x, axis }, ng))
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let s: F = self.value(x).values().iter().copied().sum();
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::SumAll(x), ng))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[F]) -> Result<Var> {
        let p = self.value(pred).values();
        if p.is_empty() || target.is_empty() {
            return Err(Error::Precondition("mse over zero elements".into()));
        }
        if p.len() != target.len() {
            return Err(Error::Dimension(format!(
                "mse lengths {} vs {}",
                p.len(),
                target.len()
            )));
        }
        let n = F::from_usize(p.len()).unwrap();
        let s: F = p
            .iter()
            .zip(target)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum();
        let ng = self.ng(&[pred]);
        Ok(self.push(
            Tensor::scalar(s / n),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
            ng,
        ))
    }

    /// Mean negative log-likelihood over rows whose target is not
    /// [`IGNORE_INDEX`]. With every row ignored the loss is zero.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[i64]) -> Result<Var> {
        let (n, v) = self.value(logits).shape2()?;
        if targets.len() != n {
            return Err(Error::Dimension(format!(
                "{} targets for {n} logit rows",
                targets.len()
            )));
        }
        for &t in targets {
            if t != IGNORE_INDEX && (t < 0 || t as usize >= v) {
                return Err(Error::Precondition(format!("target {t} outside [0, {v})")));
            }
        }
        let lv = self.value(logits).values();
        let mut probs = vec![F::zero(); n * v];
        let mut total = F::zero();
        let mut count = 0usize;
        for r in 0..n {
            if targets[r] == IGNORE_INDEX {
                continue;
            }
            let row = &lv[r * v..(r + 1) * v];
            let lse = kernels::softmax_into(row, &mut probs[r * v..(r + 1) * v]);
            total += lse - row[targets[r] as usize];
            count += 1;
        }
        let loss = if count == 0 {
            F::zero()
        } else {
            total / F::from_usize(count).unwrap()
        };
        let ng = self.ng(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
                count,
            },
            ng,
        ))
    }

    /// Propagates gradients from a single-element node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<F>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar, got {:?}",
                self.dims(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![F::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        // Only leaves keep gradients; intermediate buffers were consumed.
        Ok(Gradients {
            grads,
            params: self.bound.clone(),
        })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<F>>], v: Var) -> Option<&'g mut [F]> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![F::zero(); len]).as_mut_slice())
    }

    fn propagate(&self, i: usize, g: &[F], grads: &mut [Option<Vec<F>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, ta, tb } => {
                let (ar, ac) = self.value(*a).shape2().unwrap();
                let (_, bc) = self.value(*b).shape2().unwrap();
                let (m, k) = if *ta { (ac, ar) } else { (ar, ac) };
                let n = node.value.dims()[1];
                let (rsa, csa) = view(ac, *ta);
                let (rsb, csb) = view(bc, *tb);
                if let Some(da) = self.acc(grads, *a) {
                    // dA' = G · B'ᵀ, written through A's own view.
                    F::gemm(m, n, k, F::one(), g, n as isize, 1, self.value(*b).values(), csb, rsb, F::one(), da, rsa, csa);
                }
                if let Some(db) = self.acc(grads, *b) {
                    // dB' = A'ᵀ · G
                    F::gemm(k, m, n, F::one(), self.value(*a).values(), csa, rsa, g, n as isize, 1, F::one(), db, rsb, csb);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(d) = self.acc(grads, v) {
                        d.iter_mut().zip(g).for_each(|(x, y)| *x += *y);
                    }
                }
            }
            Op::AddBias { x, bias } => {
                if let Some(d) = self.acc(grads, *x) {
                    d.iter_mut().zip(g).for_each(|(x, y)| *x += *y);
                }
                if let Some(d) = self.acc(grads, *bias) {
                    let w = d.len();
                    for row in g.chunks(w) {
                        d.iter_mut().zip(row).for_each(|(x, y)| *x += *y);
                    }
                }
            }
            Op::Mul(a, b) => {
                if let Some(d) = self.acc(grads, *a) {
                    let bv = self.value(*b).values();
                    for ((x, y), z) in d.iter_mut().zip(g).zip(bv) {
                        *x += *y * *z;
                    }
                }
                if let Some(d) = self.acc(grads, *b) {
                    let av = self.value(*a).values();
                    for ((x, y), z) in d.iter_mut().zip(g).zip(av) {
                        *x += *y * *z;
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(d) = self.acc(grads, *x) {
                    d.iter_mut().zip(g).for_each(|(a, b)| *a += *b * *c);
                }
            }
            Op::ScaleBy { x, s } => {
                let c = self.value(*s).item();
                if let Some(d) = self.acc(grads, *x) {
                    d.iter_mut().zip(g).for_each(|(a, b)| *a += *b * c);
                }
                if let Some(d) = self.acc(grads, *s) {
                    let xv = self.value(*x).values();
                    d[0] += g.iter().zip(xv).map(|(a, b)| *a * *b).sum::<F>();
                }
            }
            Op::Gelu(x) => {
                if let Some(d) = self.acc(grads, *x) {
                    let xv = self.value(*x).values();
                    for ((a, b), z) in d.iter_mut().zip(g).zip(xv) {
                        *a += *b * kernels::gelu_grad(*z);
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let dlen = self.value(*gain).len();
                if let Some(d) = self.acc(grads, *gain) {
                    for (grow, hrow) in g.chunks(dlen).zip(xhat.chunks(dlen)) {
                        for ((a, b), c) in d.iter_mut().zip(grow).zip(hrow) {
                            *a += *b * *c;
                        }
                    }
                }
                if let Some(d) = self.acc(grads, *bias) {
                    for grow in g.chunks(dlen) {
                        d.iter_mut().zip(grow).for_each(|(a, b)| *a += *b);
                    }
                }
                let gv = self.value(*gain).values().to_vec();
                if let Some(d) = self.acc(grads, *x) {
                    kernels::layer_norm_backward(g, xhat, rstd, &gv, d);
                }
            }
            Op::Attention { q, k, v, heads, causal, probs } => {
                let (n, d) = self.value(*q).shape2().unwrap();
                let mut dq = vec![F::zero(); n * d];
                let mut dk = vec![F::zero(); n * d];
                let mut dv = vec![F::zero(); n * d];
                kernels::attention_backward(
                    g,
                    self.value(*q).values(),
                    self.value(*k).values(),
                    self.value(*v).values(),
                    probs,
                    n,
                    d,
                    *heads,
                    *causal,
                    &mut dq,
                    &mut dk,
                    &mut dv,
                );
                for (var, src) in [(*q, dq), (*k, dk), (*v, dv)] {
                    if let Some(dst) = self.acc(grads, var) {
                        dst.iter_mut().zip(&src).for_each(|(a, b)| *a += *b);
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let dims = node.value.dims();
                let outer: usize = dims[..*axis].iter().product();
                let inner: usize = dims[axis + 1..].iter().product();
                let total = dims[*axis] * inner;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = self.dims(v)[*axis] * inner;
                    if let Some(d) = self.acc(grads, v) {
                        for o in 0..outer {
                            let src = &g[o * total + offset..o * total + offset + chunk];
                            d[o * chunk..(o + 1) * chunk]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(a, b)| *a += *b);
                        }
                    }
                    offset += chunk;
                }
            }
            Op::GatherRows { x, idx } => {
                let width = node.value.len() / idx.len();
                if let Some(d) = self.acc(grads, *x) {
                    for (r, &src) in idx.iter().enumerate() {
                        d[src * width..(src + 1) * width]
                            .iter_mut()
                            .zip(&g[r * width..(r + 1) * width])
                            .for_each(|(a, b)| *a += *b);
                    }
                }
            }
            Op::ReduceMean { x, axis } => {
                let dims = self.dims(*x).to_vec();
                if let Some(d) = self.acc(grads, *x) {
                    let outer: usize = dims[..*axis].iter().product();
                    let ext = dims[*axis];
                    let inner: usize = dims[axis + 1..].iter().product();
                    let inv = F::one() / F::from_usize(ext).unwrap();
                    for o in 0..outer {
                        for a in 0..ext {
                            let base = (o * ext + a) * inner;
                            for i in 0..inner {
                                d[base + i] += g[o * inner + i] * inv;
                            }
                        }
                    }
                }
            }
            Op::SumAll(x) => {
                if let Some(d) = self.acc(grads, *x) {
                    d.iter_mut().for_each(|a| *a += g[0]);
                }
            }
            Op::Mse { pred, target } => {
                if let Some(d) = self.acc(grads, *pred) {
                    let pv = self.value(*pred).values();
                    let c = F::from_f64c(2.0) * g[0] / F::from_usize(pv.len()).unwrap();
                    for ((a, p), t) in d.iter_mut().zip(pv).zip(target) {
                        *a += c * (*p - *t);
                    }
                }
            }
            Op::SoftmaxCe { logits, targets, probs, count } => {
                if *count == 0 {
                    return;
                }
                if let Some(d) = self.acc(grads, *logits) {
                    let v = self.value(*logits).dims()[1];
                    let c = g[0] / F::from_usize(*count).unwrap();
                    for (r, &t) in targets.iter().enumerate() {
                        if t == IGNORE_INDEX {
                            continue;
                        }
                        let row = &mut d[r * v..(r + 1) * v];
                        for (a, p) in row.iter_mut().zip(&probs[r * v..(r + 1) * v]) {
                            *a += c * *p;
                        }
                        row[t as usize] -= c;
                    }
                }
            }
        }
    }
}
