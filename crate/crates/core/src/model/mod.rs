//! The vision-language network and its inference paths.

pub mod config;
pub mod encoder;
pub mod infer;
pub mod lm;
pub mod regression;
pub mod strategy;
pub mod vocab;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use config::ModelConfig;
pub use encoder::{encode_views, encode_views_tape, encoder_layer_tape, select_token_vars, select_tokens, view_patches};
pub use infer::{GenerationOutput, KvCache, LmRuntime};
pub use lm::{lm_forward, LmOutput};
pub use regression::{pool_matrix, regress, regression_branch, reverse_project};
pub use strategy::TokenStrategy;
pub use vocab::Vocab;

use crate::error::Result;
use crate::numerics::{ParamSet, Real, Tensor};

/// Functional groups used by the freezing policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Encoder,
    Projector,
    LmBase,
    Adapter,
    GenerationHead,
    ReverseProjection,
    RegressionHead,
}

impl ParamGroup {
    pub fn of(name: &str) -> ParamGroup {
        if name.starts_with("enc.") {
            ParamGroup::Encoder
        } else if name.starts_with("proj.") {
            ParamGroup::Projector
        } else if name.starts_with("lm.") && name.contains(".lora_") {
            ParamGroup::Adapter
        } else if name.starts_with("lm.") {
            ParamGroup::LmBase
        } else if name.starts_with("head.") {
            ParamGroup::GenerationHead
        } else if name.starts_with("rproj.") {
            ParamGroup::ReverseProjection
        } else {
            ParamGroup::RegressionHead
        }
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn normal<F: Real>(&mut self, dims: &[usize], sd: f64) -> Tensor<F> {
        let dist = Normal::new(0.0, sd).unwrap();
        let n: usize = dims.iter().product();
        let v: Vec<f64> = (0..n).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::from_f64(dims, &v).expect("init dims")
    }
}

/// A configured network and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub params: ParamSet<F>,
}

impl<F: Real> Model<F> {
    /// Seeded initialization. Adapter `B` factors start at zero and the
    /// mixer gains at one.
    pub fn init(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut init = Init { rng: ChaCha8Rng::seed_from_u64(c.init_seed) };
        let mut p = ParamSet::new();
        let zeros = |d: &[usize]| Tensor::<F>::zeros(d);
        let ones = |d: &[usize]| Tensor::<F>::full(d, F::one());
        let inv = |n: usize| 1.0 / (n as f64).sqrt();

        let (dv, dh) = (c.enc_dim, c.lm_dim);
        p.insert("enc.patch.w", init.normal(&[dv, c.patch_dim()], inv(c.patch_dim())), false)?;
        p.insert("enc.patch.b", zeros(&[dv]), false)?;
        p.insert("enc.pos", init.normal(&[c.tokens_per_view(), dv], 0.5), false)?;
        p.insert("enc.tag", init.normal(&[6, dv], 0.5), false)?;
        for l in 0..c.enc_layers {
            block(&mut p, &mut init, &format!("enc.l{l}"), dv, c.enc_mlp)?;
        }
        p.insert("proj.w", init.normal(&[dh, dv], inv(dv)), false)?;
        p.insert("proj.b", zeros(&[dh]), false)?;
        let vocab = c.vocab.len();
        p.insert("lm.tok", init.normal(&[vocab, dh], 1.0), false)?;
        p.insert("lm.pos", init.normal(&[c.max_seq_len, dh], 0.3), false)?;
        for l in 0..c.lm_layers {
            let prefix = format!("lm.l{l}");
            block(&mut p, &mut init, &prefix, dh, c.lm_mlp)?;
            for target in ["q", "v"] {
                p.insert(format!("{prefix}.attn.{target}.lora_a"), init.normal(&[c.lora_rank, dh], inv(dh)), false)?;
                p.insert(format!("{prefix}.attn.{target}.lora_b"), zeros(&[dh, c.lora_rank]), false)?;
            }
        }
        p.insert("lm.ln_f.g", ones(&[dh]), false)?;
        p.insert("lm.ln_f.b", zeros(&[dh]), false)?;
        p.insert("head.w", init.normal(&[vocab, dh], 0.02), false)?;
        p.insert("head.b", zeros(&[vocab]), false)?;
        p.insert("rproj.w", init.normal(&[dv, dh], inv(dh)), false)?;
        p.insert("rproj.b", zeros(&[dv]), false)?;
        let t = c.reg_tokens();
        for l in 0..c.reg_layers {
            p.insert(format!("reg.l{l}.ln1.g"), ones(&[dv]), false)?;
            p.insert(format!("reg.l{l}.ln1.b"), zeros(&[dv]), false)?;
            p.insert(format!("reg.l{l}.w1"), init.normal(&[dv, dv], 0.5 * inv(dv)), false)?;
            p.insert(format!("reg.l{l}.w2"), ones(&[1]), false)?;
            p.insert(format!("reg.l{l}.ln2.g"), ones(&[dv]), false)?;
            p.insert(format!("reg.l{l}.ln2.b"), zeros(&[dv]), false)?;
            p.insert(format!("reg.l{l}.w3"), init.normal(&[t, t], 0.5 * inv(t)), false)?;
            p.insert(format!("reg.l{l}.w4"), ones(&[1]), false)?;
        }
        p.insert("reg.out.w", init.normal(&[1, dv], inv(dv)), false)?;
        p.insert("reg.out.b", zeros(&[1]), false)?;
        Ok(Model { config, params: p })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.config.vocab
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model { config: self.config.clone(), params: self.params.cast() }
    }
}

fn block<F: Real>(p: &mut ParamSet<F>, init: &mut Init, prefix: &str, d: usize, hidden: usize) -> Result<()> {
    let inv = |n: usize| 1.0 / (n as f64).sqrt();
    p.insert(format!("{prefix}.ln1.g"), Tensor::full(&[d], F::one()), false)?;
    p.insert(format!("{prefix}.ln1.b"), Tensor::zeros(&[d]), false)?;
    for w in ["q", "k", "v", "o"] {
        p.insert(format!("{prefix}.attn.w{w}"), init.normal(&[d, d], inv(d)), false)?;
        // A key bias shifts every score of a query equally, so it has no effect.
        if w != "k" {
            p.insert(format!("{prefix}.attn.b{w}"), Tensor::zeros(&[d]), false)?;
        }
    }
    p.insert(format!("{prefix}.ln2.g"), Tensor::full(&[d], F::one()), false)?;
    p.insert(format!("{prefix}.ln2.b"), Tensor::zeros(&[d]), false)?;
    p.insert(format!("{prefix}.mlp.w1"), init.normal(&[hidden, d], inv(d)), false)?;
    p.insert(format!("{prefix}.mlp.b1"), Tensor::zeros(&[hidden]), false)?;
    p.insert(format!("{prefix}.mlp.w2"), init.normal(&[d, hidden], inv(hidden)), false)?;
    p.insert(format!("{prefix}.mlp.b2"), Tensor::zeros(&[d]), false)?;
    Ok(())
}
