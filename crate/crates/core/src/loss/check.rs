//! Central finite-difference validation of the analytic loss gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{Loss, LossConfig, LossId};
use crate::error::{Error, Result};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub id: LossId,
    pub trials: usize,
    pub length: usize,
    pub seed: u64,
    /// `max_i |g_i - fd_i| / max_i |fd_i|` for each trial.
    pub trial_errors: Vec<f64>,
    pub max_rel_err: f64,
}

/// Random instance for trial `index`: Gaussian clean and noise, and an
/// estimate mixing both with an independent artifact.
pub fn random_triple(length: usize, seed: u64, index: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let mut draw = || -> Vec<f64> { (0..length).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let clean = draw();
    let noise = draw();
    let artifact = draw();
    let est = clean
        .iter()
        .zip(&noise)
        .zip(&artifact)
        .map(|((c, n), a)| c + 0.5 * n + 0.3 * a)
        .collect();
    (est, clean, noise)
}

/// Relative error of the analytic gradient against central differences at
/// one point, with the weight map frozen at its value there.
pub fn fd_relative_error(loss: &Loss, est: &[f64], clean: &[f64], noise: &[f64]) -> Result<f64> {
    let weights = loss.weights(est, clean, noise)?;
    let analytic = loss.grad_with_weights(est, clean, noise, weights.as_ref())?;
    let numeric: Vec<f64> = (0..est.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut plus = est.to_vec();
            let mut minus = est.to_vec();
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            let fp = loss.eval_with_weights(&plus, clean, noise, weights.clone())?.value;
            let fm = loss.eval_with_weights(&minus, clean, noise, weights.clone())?.value;
            Ok((fp - fm) / (2.0 * FD_STEP))
        })
        .collect::<Result<_>>()?;
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Runs `trials` finite-difference checks on random length-`length`
/// instances derived from `seed`.
pub fn grad_check(cfg: &LossConfig, trials: usize, length: usize, seed: u64) -> Result<GradCheckReport> {
    if cfg.domain() != super::Domain::Time && length < cfg.stft.fft_size {
        return Err(Error::InvalidArgument(format!(
            "length {length} is shorter than fft_size {}",
            cfg.stft.fft_size
        )));
    }
    let loss = Loss::new(cfg.clone())?;
    let trial_errors = (0..trials)
        .map(|t| {
            let (e, c, n) = random_triple(length, seed, t);
            fd_relative_error(&loss, &e, &c, &n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport {
        id: cfg.id,
        trials,
        length,
        seed,
        max_rel_err: trial_errors.iter().cloned().fold(0.0, f64::max),
        trial_errors,
    })
}
