use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Real, Tape, Var};

use super::config::ModelConfig;
use super::encoder::{layer_norm_named, transformer_block};

/// Result of one decoder pass.
#[derive(Debug, Clone, Copy)]
pub struct LmOutput {
    /// Final hidden states after the closing layer norm, every position.
    pub hidden: Var,
    /// Next-token logits at text positions only.
    pub logits: Var,
    /// Index of the first text position in the full sequence.
    pub text_start: usize,
}

/// Causal decoder over `<bos> <img> visual… text…`. Visual tokens are given
/// in encoder width and projected here.
pub fn lm_forward<F: Real>(
    tape: &mut Tape<F>,
    params: &ParamSet<F>,
    cfg: &ModelConfig,
    visual: Option<Var>,
    text_ids: &[u32],
) -> Result<LmOutput> {
    if text_ids.is_empty() {
        return Err(Error::Precondition("at least one text token is required".into()));
    }
    let vocab = &cfg.vocab;
    let n_vis = match visual {
        Some(v) => tape.value(v).shape2()?.0,
        None => 0,
    };
    let total = 2 + n_vis + text_ids.len();
    if total > cfg.max_seq_len {
        return Err(Error::SequenceTooLong { len: total, max: cfg.max_seq_len });
    }
    if let Some(&bad) = text_ids.iter().find(|&&t| t as usize >= vocab.len()) {
        return Err(Error::Precondition(format!("token id {bad} outside the vocabulary")));
    }
    let tok = tape.param(params, "lm.tok")?;
    let head_ids = [vocab.bos() as usize, vocab.img() as usize];
    let mut parts = vec![tape.gather_rows(tok, &head_ids)?];
    if let Some(v) = visual {
        let w = tape.param(params, "proj.w")?;
        let b = tape.param(params, "proj.b")?;
        parts.push(tape.linear(v, w, Some(b))?);
    }
    let ids: Vec<usize> = text_ids.iter().map(|&t| t as usize).collect();
    parts.push(tape.gather_rows(tok, &ids)?);
    let mut x = tape.concat(&parts, 0)?;
    let pos = tape.param(params, "lm.pos")?;
    let pos = tape.slice_rows(pos, 0, total)?;
    x = tape.add(x, pos)?;
    let scale = F::from_f64c(cfg.lora_scale());
    for l in 0..cfg.lm_layers {
        x = transformer_block(tape, params, &format!("lm.l{l}"), x, cfg.lm_heads, true, Some(scale))?;
    }
    let hidden = layer_norm_named(tape, params, x, "lm.ln_f")?;
    let text_start = 2 + n_vis;
    let text = tape.slice_rows(hidden, text_start, text_ids.len())?;
    let w = tape.param(params, "head.w")?;
    let b = tape.param(params, "head.b")?;
    let logits = tape.linear(text, w, Some(b))?;
    Ok(LmOutput { hidden, logits, text_start })
}
