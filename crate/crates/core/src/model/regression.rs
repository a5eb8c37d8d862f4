use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Real, Tape, Tensor, Var};

use super::config::ModelConfig;
use super::encoder::{layer_norm_named, linear_named};

/// `[m × n]` matrix averaging contiguous groups: row `j` covers
/// `[⌊j·n/m⌋, ⌈(j+1)·n/m⌉)`. Groups repeat tokens when `n < m`.
pub fn pool_matrix<F: Real>(m: usize, n: usize) -> Result<Tensor<F>> {
    if m == 0 || n == 0 {
        return Err(Error::Precondition(format!("cannot pool {n} tokens into {m}")));
    }
    let mut v = vec![F::zero(); m * n];
    for j in 0..m {
        let lo = j * n / m;
        let hi = ((j + 1) * n).div_ceil(m);
        let w = F::one() / F::from_usize(hi - lo).unwrap();
        for i in lo..hi {
            v[j * n + i] = w;
        }
    }
    Tensor::matrix(m, n, v)
}

/// Position-wise map from language-model width back to encoder width.
pub fn reverse_project<F: Real>(tape: &mut Tape<F>, params: &ParamSet<F>, hidden: Var) -> Result<Var> {
    if tape.value(hidden).shape2()?.0 == 0 {
        return Err(Error::Precondition("reverse projection needs at least one response position".into()));
    }
    linear_named(tape, params, hidden, "rproj", "w", "b")
}

/// Mixer head: pools both token sets to fixed counts, concatenates them
/// and returns a single normalized value.
pub fn regress<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamSet<F>,
    cfg: &ModelConfig,
    visual: Var,
    projected: Var,
) -> Result<Var> {
    let (nv, dv) = tape.value(visual).shape2()?;
    let (nh, dh) = tape.value(projected).shape2()?;
    if dv != cfg.enc_dim || dh != cfg.enc_dim {
        return Err(Error::Dimension(format!("regression inputs have widths {dv} and {dh}, expected {}", cfg.enc_dim)));
    }
    let pv = tape.constant(pool_matrix(cfg.reg_visual_tokens, nv)?);
    let ph = tape.constant(pool_matrix(cfg.reg_hidden_tokens, nh)?);
    let a = tape.matmul(pv, visual)?;
    let b = tape.matmul(ph, projected)?;
    let mut x = tape.concat(&[a, b], 0)?;
    if tape.value(x).shape2()?.0 != cfg.reg_tokens() {
        return Err(Error::Internal("regression token count differs from the configured budget".into()));
    }
    for l in 0..cfg.reg_layers {
        let pre = format!("reg.l{l}");
        // Feature mixing within each token.
        let h = layer_norm_named(tape, params, x, &format!("{pre}.ln1"))?;
        let w1 = tape.param(params, &format!("{pre}.w1"))?;
        let h = tape.linear(h, w1, None)?;
        let h = tape.gelu(h)?;
        let w2 = tape.param(params, &format!("{pre}.w2"))?;
        let skip = tape.scale_by(x, w2)?;
        let u = tape.add(h, skip)?;
        // Token mixing along each feature.
        let h = layer_norm_named(tape, params, u, &format!("{pre}.ln2"))?;
        let w3 = tape.param(params, &format!("{pre}.w3"))?;
        let h = tape.matmul(w3, h)?;
        let h = tape.gelu(h)?;
        let w4 = tape.param(params, &format!("{pre}.w4"))?;
        let skip = tape.scale_by(u, w4)?;
        x = tape.add(h, skip)?;
    }
    let out = linear_named(tape, params, x, "reg.out", "w", "b")?;
    tape.reduce_mean(out, 0)
}

/// Reverse projection of response hidden states followed by the head.
pub fn regression_branch<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamSet<F>,
    cfg: &ModelConfig,
    visual: Var,
    response_hidden: Var,
) -> Result<Var> {
    let projected = reverse_project(tape, params, response_hidden)?;
    regress(tape, params, cfg, visual, projected)
}
