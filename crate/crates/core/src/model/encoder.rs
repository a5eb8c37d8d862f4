use crate::error::{Error, Result};
use crate::modality::{PseudoRgbView, PATCH_PIXELS, PATCH_SIZE};
use crate::numerics::{GradFilter, ParamSet, Real, Tape, Tensor, Var, LAYER_NORM_EPS};

use super::config::ModelConfig;
use super::strategy::TokenStrategy;
use super::Model;

/// Non-overlapping patches as rows of `(channel, dy, dx)` values scaled to `[-1, 1]`.
pub fn view_patches<F: Real>(view: &PseudoRgbView, patch: usize) -> Result<Tensor<F>> {
    if view.channels.iter().any(|c| c.len() != PATCH_PIXELS) {
        return Err(Error::Dimension(format!(
            "view channels must hold {PATCH_PIXELS} values, got {:?}",
            view.channels.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let side = PATCH_SIZE / patch;
    let mut out = Vec::with_capacity(PATCH_PIXELS * 3);
    for py in 0..side {
        for px in 0..side {
            for ch in &view.channels {
                for dy in 0..patch {
                    for dx in 0..patch {
                        let v = ch[(py * patch + dy) * PATCH_SIZE + px * patch + dx];
                        out.push(F::from_f64c(v / 127.5 - 1.0));
                    }
                }
            }
        }
    }
    Tensor::new(vec![side * side, 3 * patch * patch], out)
}

fn eps<F: Real>() -> F {
    F::from_f64c(LAYER_NORM_EPS)
}

pub(crate) fn linear_named<F: Real>(tape: &mut Tape<F>, p: &ParamSet<F>, x: Var, prefix: &str, w: &str, b: &str) -> Result<Var> {
    let wv = tape.param(p, &format!("{prefix}.{w}"))?;
    let bv = tape.param(p, &format!("{prefix}.{b}"))?;
    tape.linear(x, wv, Some(bv))
}

pub(crate) fn layer_norm_named<F: Real>(tape: &mut Tape<F>, p: &ParamSet<F>, x: Var, prefix: &str) -> Result<Var> {
    let g = tape.param(p, &format!("{prefix}.g"))?;
    let b = tape.param(p, &format!("{prefix}.b"))?;
    tape.layer_norm(x, g, b, eps())
}

/// Pre-norm transformer block. With `lora_scale` set, low-rank adapters
/// are added to the query and value projections.
pub(crate) fn transformer_block<F: Real>(
    tape: &mut Tape<F>,
    p: &ParamSet<F>,
    prefix: &str,
    x: Var,
    heads: usize,
    causal: bool,
    lora_scale: Option<F>,
) -> Result<Var> {
    let h = layer_norm_named(tape, p, x, &format!("{prefix}.ln1"))?;
    let attn = format!("{prefix}.attn");
    let mut q = linear_named(tape, p, h, &attn, "wq", "bq")?;
    let wk = tape.param(p, &format!("{attn}.wk"))?;
    let k = tape.linear(h, wk, None)?;
    let mut v = linear_named(tape, p, h, &attn, "wv", "bv")?;
    if let Some(scale) = lora_scale {
        q = add_lora(tape, p, h, q, &format!("{attn}.q"), scale)?;
        v = add_lora(tape, p, h, v, &format!("{attn}.v"), scale)?;
    }
    let a = tape.attention(q, k, v, heads, causal)?;
    let o = linear_named(tape, p, a, &attn, "wo", "bo")?;
    let x = tape.add(x, o)?;
    let h = layer_norm_named(tape, p, x, &format!("{prefix}.ln2"))?;
    let mlp = format!("{prefix}.mlp");
    let h = linear_named(tape, p, h, &mlp, "w1", "b1")?;
    let h = tape.gelu(h)?;
    let h = linear_named(tape, p, h, &mlp, "w2", "b2")?;
    tape.add(x, h)
}

fn add_lora<F: Real>(tape: &mut Tape<F>, p: &ParamSet<F>, x: Var, base: Var, prefix: &str, scale: F) -> Result<Var> {
    let a = tape.param(p, &format!("{prefix}.lora_a"))?;
    let b = tape.param(p, &format!("{prefix}.lora_b"))?;
    let xa = tape.linear(x, a, None)?;
    let xab = tape.linear(xa, b, None)?;
    let delta = tape.scale(xab, scale)?;
    tape.add(base, delta)
}

/// Per-layer token grids `[V·tokens × D_v]`, layers in depth order.
pub fn encode_views_tape<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamSet<F>,
    cfg: &ModelConfig,
    views: &[PseudoRgbView],
) -> Result<Vec<Var>> {
    if views.is_empty() || views.len() > 6 {
        return Err(Error::Precondition(format!("between 1 and 6 views required, got {}", views.len())));
    }
    let n = cfg.tokens_per_view();
    let pos = tape.param(params, "enc.pos")?;
    let tags = tape.param(params, "enc.tag")?;
    let w = tape.param(params, "enc.patch.w")?;
    let b = tape.param(params, "enc.patch.b")?;
    let mut per_layer: Vec<Vec<Var>> = vec![Vec::with_capacity(views.len()); cfg.enc_layers];
    for view in views {
        let patches = tape.constant(view_patches(view, cfg.patch_size)?);
        let mut x = tape.linear(patches, w, Some(b))?;
        x = tape.add(x, pos)?;
        let tag = tape.gather_rows(tags, &vec![view.tag.index(); n])?;
        x = tape.add(x, tag)?;
        for (l, outputs) in per_layer.iter_mut().enumerate() {
            x = transformer_block(tape, params, &format!("enc.l{l}"), x, cfg.enc_heads, false, None)?;
            outputs.push(x);
        }
    }
    per_layer.iter().map(|vars| tape.concat(vars, 0)).collect()
}

/// One encoder layer (0-based `layer`) applied to each view's tokens of a
/// `[V·tokens × D_v]` grid.
pub fn encoder_layer_tape<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamSet<F>,
    cfg: &ModelConfig,
    layer: usize,
    grid: Var,
) -> Result<Var> {
    let n = cfg.tokens_per_view();
    let rows = tape.value(grid).shape2()?.0;
    if rows % n != 0 {
        return Err(Error::Dimension(format!("{rows} tokens are not whole views of {n}")));
    }
    let mut outs = Vec::with_capacity(rows / n);
    for v in 0..rows / n {
        let x = tape.slice_rows(grid, v * n, n)?;
        outs.push(transformer_block(tape, params, &format!("enc.l{layer}"), x, cfg.enc_heads, false, None)?);
    }
    tape.concat(&outs, 0)
}

/// Encoder outputs without gradient tracking.
pub fn encode_views<F: Real>(model: &Model<F>, views: &[PseudoRgbView]) -> Result<Vec<Tensor<F>>> {
    let mut tape = Tape::new(GradFilter::None);
    let layers = encode_views_tape(&mut tape, &model.params, &model.config, views)?;
    Ok(layers.into_iter().map(|v| tape.value(v).clone()).collect())
}

/// Concatenation of the strategy's layers, shallow to deep.
pub fn select_tokens<F: Real>(layers: &[Tensor<F>], strategy: TokenStrategy) -> Result<Tensor<F>> {
    let chosen = strategy.layers(layers.len())?;
    let d = layers[0].last_dim();
    let mut values = Vec::new();
    for l in &chosen {
        values.extend_from_slice(layers[l - 1].values());
    }
    let rows = values.len() / d;
    Tensor::matrix(rows, d, values)
}

pub fn select_token_vars<F: Real>(tape: &mut Tape<F>, layers: &[Var], strategy: TokenStrategy) -> Result<Var> {
    let chosen: Vec<Var> = strategy.layers(layers.len())?.iter().map(|l| layers[l - 1]).collect();
    tape.concat(&chosen, 0)
}
