//! Slice-level numeric kernels shared by the tape and the cached decoder.

use super::real::Real;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

/// GELU, tanh approximation.
#[inline]
pub fn gelu<F: Real>(x: F) -> F {
    let c = F::from_f64c(GELU_C);
    let k = F::from_f64c(GELU_K);
    let half = F::from_f64c(0.5);
    let u = c * (x + k * x * x * x);
    half * x * (F::one() + u.tanh())
}

#[inline]
pub fn gelu_grad<F: Real>(x: F) -> F {
    let c = F::from_f64c(GELU_C);
    let k = F::from_f64c(GELU_K);
    let half = F::from_f64c(0.5);
    let three = F::from_f64c(3.0);
    let t = (c * (x + k * x * x * x)).tanh();
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * k * x * x)
}

/// Writes `(x - mean) / sqrt(var + eps)` into `out`, returning the reciprocal std.
pub fn standardize<F: Real>(x: &[F], out: &mut [F], eps: F) -> F {
    let n = F::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<F>() / n;
    let var = x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<F>() / n;
    let rstd = F::one() / (var + eps).sqrt();
    for (o, v) in out.iter_mut().zip(x) {
        *o = (*v - mean) * rstd;
    }
    rstd
}

/// Layer norm of one row with affine parameters.
pub fn layer_norm_row<F: Real>(x: &[F], gain: &[F], bias: &[F], eps: F, out: &mut [F]) {
    standardize(x, out, eps);
    for ((o, g), b) in out.iter_mut().zip(gain).zip(bias) {
        *o = *o * *g + *b;
    }
}

pub fn layer_norm_backward<F: Real>(g: &[F], xhat: &[F], rstd: &[F], gain: &[F], dx: &mut [F]) {
    let d = gain.len();
    let n = F::from_usize(d).unwrap();
    let mut dxhat = vec![F::zero(); d];
    for (r, &rs) in rstd.iter().enumerate() {
        let s = r * d..(r + 1) * d;
        let (grow, hrow) = (&g[s.clone()], &xhat[s.clone()]);
        for ((o, a), b) in dxhat.iter_mut().zip(grow).zip(gain) {
            *o = *a * *b;
        }
        let m1 = dxhat.iter().copied().sum::<F>() / n;
        let m2 = dxhat.iter().zip(hrow).map(|(a, b)| *a * *b).sum::<F>() / n;
        for ((o, dh), h) in dx[s].iter_mut().zip(&dxhat).zip(hrow) {
            *o += rs * (*dh - m1 - *h * m2);
        }
    }
}

/// Softmax of `row` into `out`; returns log-sum-exp.
pub fn softmax_into<F: Real>(row: &[F], out: &mut [F]) -> F {
    let max = row.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for (o, v) in out.iter_mut().zip(row) {
        *o = (*v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
    max + sum.ln()
}

/// Multi-head attention; `probs` receives `heads × n × n` weights.
#[allow(clippy::too_many_arguments)]
pub fn attention_forward<F: Real>(
    q: &[F],
    k: &[F],
    v: &[F],
    n: usize,
    d: usize,
    heads: usize,
    causal: bool,
    probs: &mut [F],
    out: &mut [F],
) {
    let dh = d / heads;
    let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
    let di = d as isize;
    let ni = n as isize;
    for h in 0..heads {
        let off = h * dh;
        let p = &mut probs[h * n * n..(h + 1) * n * n];
        F::gemm(n, dh, n, scale, &q[off..], di, 1, &k[off..], 1, di, F::zero(), p, ni, 1);
        let mut tmp = vec![F::zero(); n];
        for i in 0..n {
            let row = &mut p[i * n..(i + 1) * n];
            let len = if causal { i + 1 } else { n };
            softmax_into(&row[..len], &mut tmp[..len]);
            row[..len].copy_from_slice(&tmp[..len]);
            row[len..].iter_mut().for_each(|x| *x = F::zero());
        }
        F::gemm(n, n, dh, F::one(), p, ni, 1, &v[off..], di, 1, F::zero(), &mut out[off..], di, 1);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn attention_backward<F: Real>(
    g: &[F],
    q: &[F],
    k: &[F],
    v: &[F],
    probs: &[F],
    n: usize,
    d: usize,
    heads: usize,
    causal: bool,
    dq: &mut [F],
    dk: &mut [F],
    dv: &mut [F],
) {
    let dh = d / heads;
    let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
    let di = d as isize;
    let ni = n as isize;
    let mut dp = vec![F::zero(); n * n];
    for h in 0..heads {
        let off = h * dh;
        let p = &probs[h * n * n..(h + 1) * n * n];
        // dV = Pᵀ dO
        F::gemm(n, n, dh, F::one(), p, 1, ni, &g[off..], di, 1, F::one(), &mut dv[off..], di, 1);
        // dP = dO Vᵀ
        F::gemm(n, dh, n, F::one(), &g[off..], di, 1, &v[off..], 1, di, F::zero(), &mut dp, ni, 1);
        for i in 0..n {
            let len = if causal { i + 1 } else { n };
            let prow = &p[i * n..i * n + len];
            let drow = &mut dp[i * n..(i + 1) * n];
            let dot: F = prow.iter().zip(drow.iter()).map(|(a, b)| *a * *b).sum();
            for (dd, pp) in drow[..len].iter_mut().zip(prow) {
                *dd = *pp * (*dd - dot) * scale;
            }
            drow[len..].iter_mut().for_each(|x| *x = F::zero());
        }
        // dQ = dS K, dK = dSᵀ Q
        F::gemm(n, n, dh, F::one(), &dp, ni, 1, &k[off..], di, 1, F::one(), &mut dq[off..], di, 1);
        F::gemm(n, n, dh, F::one(), &dp, 1, ni, &q[off..], di, 1, F::one(), &mut dk[off..], di, 1);
    }
}

/// `out = x · wᵀ + b` for a single row and a `[out × in]` weight.
pub fn linear_row<F: Real>(x: &[F], w: &[F], b: Option<&[F]>, out: &mut [F]) {
    let din = x.len();
    for (o, wrow) in out.iter_mut().zip(w.chunks(din)) {
        *o = wrow.iter().zip(x).map(|(a, c)| *a * *c).sum();
    }
    if let Some(b) = b {
        out.iter_mut().zip(b).for_each(|(o, c)| *o += *c);
    }
}
