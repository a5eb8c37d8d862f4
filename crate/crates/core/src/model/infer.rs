use crate::error::{Error, Result};
use crate::numerics::kernels::{gelu, layer_norm_row, linear_row, softmax_into};
use crate::numerics::{Real, Tensor, LAYER_NORM_EPS};

use super::Model;

struct Layer<F> {
    ln1: (Vec<F>, Vec<F>),
    wq: Vec<F>,
    bq: Vec<F>,
    wk: Vec<F>,
    wv: Vec<F>,
    bv: Vec<F>,
    wo: Vec<F>,
    bo: Vec<F>,
    ln2: (Vec<F>, Vec<F>),
    w1: Vec<F>,
    b1: Vec<F>,
    w2: Vec<F>,
    b2: Vec<F>,
}

/// Per-layer keys and values of every position processed so far.
#[derive(Debug, Clone)]
pub struct KvCache<F> {
    keys: Vec<Vec<F>>,
    values: Vec<Vec<F>>,
    len: usize,
}

impl<F> KvCache<F> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Greedy decode result.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutput<F> {
    /// Generated ids without the closing `<eos>`.
    pub tokens: Vec<u32>,
    pub hit_eos: bool,
    /// Final hidden states at the generated positions plus a closing `<eos>`,
    /// `(tokens.len() + 1) × D_h`.
    pub response_hidden: Vec<F>,
}

/// Frozen decoder weights with adapters merged, for incremental decoding.
pub struct LmRuntime<F> {
    dim: usize,
    heads: usize,
    max_seq: usize,
    tok: Vec<F>,
    pos: Vec<F>,
    proj_w: Vec<F>,
    proj_b: Vec<F>,
    layers: Vec<Layer<F>>,
    ln_f: (Vec<F>, Vec<F>),
    head_w: Vec<F>,
    head_b: Vec<F>,
    vocab_len: usize,
    bos: u32,
    img: u32,
    eos: u32,
}

/// `x · wᵀ + b` for `n` rows.
fn linear_rows<F: Real>(x: &[F], n: usize, w: &[F], b: Option<&[F]>) -> Vec<F> {
    let din = x.len() / n.max(1);
    let dout = w.len() / din;
    let mut out = vec![F::zero(); n * dout];
    if n > 0 {
        F::gemm(n, din, dout, F::one(), x, din as isize, 1, w, 1, din as isize, F::zero(), &mut out, dout as isize, 1);
    }
    if let Some(b) = b {
        for row in out.chunks_mut(dout) {
            row.iter_mut().zip(b).for_each(|(o, c)| *o += *c);
        }
    }
    out
}

impl<F: Real> LmRuntime<F> {
    pub fn new(model: &Model<F>) -> Result<Self> {
        let cfg = &model.config;
        let p = &model.params;
        let get = |name: &str| -> Result<Vec<F>> { Ok(p.tensor(name)?.values().to_vec()) };
        let d = cfg.lm_dim;
        let r = cfg.lora_rank;
        let s = F::from_f64c(cfg.lora_scale());
        let merge = |w: Vec<F>, prefix: &str| -> Result<Vec<F>> {
            let a = get(&format!("{prefix}.lora_a"))?;
            let b = get(&format!("{prefix}.lora_b"))?;
            let mut out = w;
            // out += s · B[d×r] · A[r×d]
            F::gemm(d, r, d, s, &b, r as isize, 1, &a, d as isize, 1, F::one(), &mut out, d as isize, 1);
            Ok(out)
        };
        let mut layers = Vec::with_capacity(cfg.lm_layers);
        for l in 0..cfg.lm_layers {
            let pre = format!("lm.l{l}");
            let g = |n: &str| get(&format!("{pre}.{n}"));
            layers.push(Layer {
                ln1: (g("ln1.g")?, g("ln1.b")?),
                wq: merge(g("attn.wq")?, &format!("{pre}.attn.q"))?,
                bq: g("attn.bq")?,
                wk: g("attn.wk")?,
                wv: merge(g("attn.wv")?, &format!("{pre}.attn.v"))?,
                bv: g("attn.bv")?,
                wo: g("attn.wo")?,
                bo: g("attn.bo")?,
                ln2: (g("ln2.g")?, g("ln2.b")?),
                w1: g("mlp.w1")?,
                b1: g("mlp.b1")?,
                w2: g("mlp.w2")?,
                b2: g("mlp.b2")?,
            });
        }
        let vocab = &cfg.vocab;
        Ok(LmRuntime {
            dim: d,
            heads: cfg.lm_heads,
            max_seq: cfg.max_seq_len,
            tok: get("lm.tok")?,
            pos: get("lm.pos")?,
            proj_w: get("proj.w")?,
            proj_b: get("proj.b")?,
            layers,
            ln_f: (get("lm.ln_f.g")?, get("lm.ln_f.b")?),
            head_w: get("head.w")?,
            head_b: get("head.b")?,
            vocab_len: vocab.len(),
            bos: vocab.bos(),
            img: vocab.img(),
            eos: vocab.eos(),
        })
    }

    pub fn new_cache(&self) -> KvCache<F> {
        KvCache {
            keys: vec![Vec::new(); self.layers.len()],
            values: vec![Vec::new(); self.layers.len()],
            len: 0,
        }
    }

    fn embed_ids(&self, ids: &[u32], out: &mut Vec<F>) -> Result<()> {
        for &t in ids {
            if t as usize >= self.vocab_len {
                return Err(Error::Precondition(format!("token id {t} outside the vocabulary")));
            }
            out.extend_from_slice(&self.tok[t as usize * self.dim..(t as usize + 1) * self.dim]);
        }
        Ok(())
    }

    /// Rows for `<bos> <img> visual… text…` before position embeddings.
    pub fn embed_prompt(&self, visual: Option<&Tensor<F>>, text_ids: &[u32]) -> Result<Vec<F>> {
        let mut x = Vec::new();
        self.embed_ids(&[self.bos, self.img], &mut x)?;
        if let Some(v) = visual {
            let (n, _) = v.shape2()?;
            x.extend(linear_rows(v.values(), n, &self.proj_w, Some(&self.proj_b)));
        }
        self.embed_ids(text_ids, &mut x)?;
        Ok(x)
    }

    /// Runs new rows through the decoder, extending the cache. Returns the
    /// final-norm hidden state of each new row.
    pub fn forward_rows(&self, cache: &mut KvCache<F>, mut x: Vec<F>) -> Result<Vec<F>> {
        let d = self.dim;
        let n = x.len() / d;
        let start = cache.len;
        if start + n > self.max_seq {
            return Err(Error::SequenceTooLong { len: start + n, max: self.max_seq });
        }
        for (i, row) in x.chunks_mut(d).enumerate() {
            let p = &self.pos[(start + i) * d..(start + i + 1) * d];
            row.iter_mut().zip(p).for_each(|(a, b)| *a += *b);
        }
        let eps = F::from_f64c(LAYER_NORM_EPS);
        let dh = d / self.heads;
        let scale = F::one() / F::from_usize(dh).unwrap().sqrt();
        let mut h = vec![F::zero(); n * d];
        for (li, layer) in self.layers.iter().enumerate() {
            for (src, dst) in x.chunks(d).zip(h.chunks_mut(d)) {
                layer_norm_row(src, &layer.ln1.0, &layer.ln1.1, eps, dst);
            }
            let q = linear_rows(&h, n, &layer.wq, Some(&layer.bq));
            cache.keys[li].extend(linear_rows(&h, n, &layer.wk, None));
            cache.values[li].extend(linear_rows(&h, n, &layer.wv, Some(&layer.bv)));
            let keys = &cache.keys[li];
            let vals = &cache.values[li];
            let mut att = vec![F::zero(); n * d];
            let mut scores = vec![F::zero(); start + n];
            let mut probs = vec![F::zero(); start + n];
            for i in 0..n {
                let len = start + i + 1;
                for hd in 0..self.heads {
                    let off = hd * dh;
                    let qi = &q[i * d + off..i * d + off + dh];
                    for j in 0..len {
                        let kj = &keys[j * d + off..j * d + off + dh];
                        scores[j] = qi.iter().zip(kj).map(|(a, b)| *a * *b).sum::<F>() * scale;
                    }
                    softmax_into(&scores[..len], &mut probs[..len]);
                    let out = &mut att[i * d + off..i * d + off + dh];
                    for j in 0..len {
                        let vj = &vals[j * d + off..j * d + off + dh];
                        out.iter_mut().zip(vj).for_each(|(o, v)| *o += probs[j] * *v);
                    }
                }
            }
            let o = linear_rows(&att, n, &layer.wo, Some(&layer.bo));
            x.iter_mut().zip(&o).for_each(|(a, b)| *a += *b);
            for (src, dst) in x.chunks(d).zip(h.chunks_mut(d)) {
                layer_norm_row(src, &layer.ln2.0, &layer.ln2.1, eps, dst);
            }
            let mut m = linear_rows(&h, n, &layer.w1, Some(&layer.b1));
            m.iter_mut().for_each(|v| *v = gelu(*v));
            let m = linear_rows(&m, n, &layer.w2, Some(&layer.b2));
            x.iter_mut().zip(&m).for_each(|(a, b)| *a += *b);
        }
        cache.len += n;
        for (src, dst) in x.chunks(d).zip(h.chunks_mut(d)) {
            layer_norm_row(src, &self.ln_f.0, &self.ln_f.1, eps, dst);
        }
        Ok(h)
    }

    pub fn logits(&self, hidden_row: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.vocab_len];
        linear_row(hidden_row, &self.head_w, Some(&self.head_b), &mut out);
        out
    }

    fn argmax(row: &[F]) -> u32 {
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        best as u32
    }

    /// Greedy decoding until `<eos>` or `max_new` tokens.
    pub fn generate_greedy(&self, visual: Option<&Tensor<F>>, prompt: &[u32], max_new: usize) -> Result<GenerationOutput<F>> {
        let d = self.dim;
        let mut cache = self.new_cache();
        let hidden = self.forward_rows(&mut cache, self.embed_prompt(visual, prompt)?)?;
        let mut last = hidden[hidden.len() - d..].to_vec();
        let mut tokens = Vec::new();
        let mut response_hidden = Vec::new();
        let mut hit_eos = false;
        while tokens.len() < max_new && cache.len < self.max_seq {
            let next = Self::argmax(&self.logits(&last));
            if next == self.eos {
                hit_eos = true;
                break;
            }
            tokens.push(next);
            let mut row = Vec::with_capacity(d);
            self.embed_ids(&[next], &mut row)?;
            last = self.forward_rows(&mut cache, row)?;
            response_hidden.extend_from_slice(&last);
        }
        if cache.len < self.max_seq {
            let mut row = Vec::with_capacity(d);
            self.embed_ids(&[self.eos], &mut row)?;
            response_hidden.extend(self.forward_rows(&mut cache, row)?);
        } else {
            response_hidden.extend_from_slice(&last);
        }
        Ok(GenerationOutput { tokens, hit_eos, response_hidden })
    }

    /// Hidden states at `text_ids[answer_start..]` for a full teacher-forced sequence.
    pub fn teacher_forced_hidden(&self, visual: Option<&Tensor<F>>, text_ids: &[u32], answer_start: usize) -> Result<Vec<F>> {
        if answer_start >= text_ids.len() {
            return Err(Error::Precondition("no response positions".into()));
        }
        let mut cache = self.new_cache();
        let x = self.embed_prompt(visual, text_ids)?;
        let n_total = x.len() / self.dim;
        let hidden = self.forward_rows(&mut cache, x)?;
        let first = n_total - (text_ids.len() - answer_start);
        Ok(hidden[first * self.dim..].to_vec())
    }
}
