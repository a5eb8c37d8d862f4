//! Central finite-difference verification of analytic gradients (f64 only).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::param::ParamSet;
use super::tape::NamedGrads;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub h: f64,
    pub tol: f64,
    /// Absolute slack added to `tol · max(|analytic|, |numeric|)` when
    /// deciding `pass`. Zero makes `pass` equivalent to `max_rel_err < tol`.
    pub atol: f64,
    /// Blocks larger than this are checked on a random coordinate subset.
    pub full_block_limit: usize,
    pub subset: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            tol: 1e-4,
            atol: 0.0,
            full_block_limit: 4096,
            subset: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter and coordinate with the largest relative error.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
    pub pass: bool,
}

/// Relative error with a `1e-12` floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares the analytic gradient returned by `f` with central differences
/// `(f(θ + h eᵢ) − f(θ − h eᵢ)) / 2h` on the named parameter blocks.
pub fn finite_diff_check<Obj>(
    params: &mut ParamSet<f64>,
    names: &[&str],
    mut f: Obj,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    Obj: FnMut(&ParamSet<f64>) -> Result<(f64, NamedGrads<f64>)>,
{
    let (v0, grads) = f(params)?;
    let (v1, grads1) = f(params)?;
    if v0.to_bits() != v1.to_bits() {
        return Err(Error::NonDeterministic(format!("{v0:e} then {v1:e}")));
    }
    for name in names {
        if grads.get(name) != grads1.get(name) {
            return Err(Error::NonDeterministic(format!("gradient of {name} changed between calls")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        coordinates: 0,
        pass: true,
    };
    let mut within = true;
    for &name in names {
        let len = params.tensor(name)?.len();
        let coords: Vec<usize> = if len > config.full_block_limit {
            let mut c = sample(&mut rng, len, config.subset.min(len)).into_vec();
            c.sort_unstable();
            c
        } else {
            (0..len).collect()
        };
        let analytic = grads.get(name);
        for i in coords {
            let orig = params.tensor(name)?.values()[i];
            set(params, name, i, orig + config.h);
            let (fp, _) = f(params)?;
            set(params, name, i, orig - config.h);
            let (fm, _) = f(params)?;
            set(params, name, i, orig);
            let numeric = (fp - fm) / (2.0 * config.h);
            let a = analytic.map_or(0.0, |g| g[i]);
            let err = relative_error(a, numeric);
            let scale = a.abs().max(numeric.abs()).max(1e-12);
            within &= (a - numeric).abs() < config.tol * scale + config.atol;
            report.coordinates += 1;
            if err > report.max_rel_err || !err.is_finite() {
                report.max_rel_err = err;
                report.worst = Some((name.to_string(), i));
            }
        }
    }
    report.pass = within && report.max_rel_err.is_finite();
    Ok(report)
}

fn set(params: &mut ParamSet<f64>, name: &str, i: usize, v: f64) {
    params.get_mut(name).expect("checked above").tensor.values_mut()[i] = v;
}
