//! Wasserstein critic losses with gradient penalty.
//!
//! ```text
//! disc_loss = mean D(fake) − mean D(real) + λ·gp
//! gen_loss  = −mean D(fake)
//! gp        = mean_k (‖∇ₓD(x̂_k)‖₂ − 1)²,   x̂_k = α_k·real_k + (1 − α_k)·fake_k
//! ```
//!
//! `α_k ~ U[0, 1)` are drawn in batch order from a ChaCha8 stream seeded with
//! the caller's seed. Reductions run sequentially in batch order, so results
//! are bit-stable.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::discriminator::{checked_input, Discriminator, DiscriminatorGrads};
use super::LossError;

pub const DEFAULT_LAMBDA_GP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WganLosses {
    pub disc_loss: f64,
    pub gen_loss: f64,
    pub gp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WganGradients {
    /// `∂ disc_loss / ∂θ`, including the penalty term.
    pub critic: DiscriminatorGrads,
    /// `∂ gen_loss / ∂ fake_k` for each fake feature.
    pub fake_features: Vec<DVector<f64>>,
}

struct Batch {
    real: Vec<DVector<f64>>,
    fake: Vec<DVector<f64>>,
    interp: Vec<DVector<f64>>,
}

fn prepare(
    d: &Discriminator,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    lambda_gp: f64,
    seed: u64,
) -> Result<Batch, LossError> {
    d.validate()?;
    if real.is_empty() || fake.is_empty() {
        return Err(LossError::ShapeMismatch("empty batch".into()));
    }
    if real.len() != fake.len() {
        return Err(LossError::ShapeMismatch(format!(
            "{} real vs {} fake features",
            real.len(),
            fake.len()
        )));
    }
    if !lambda_gp.is_finite() {
        return Err(LossError::NonFiniteValue("lambda_gp"));
    }
    let real = real
        .iter()
        .map(|x| checked_input(d, x))
        .collect::<Result<Vec<_>, _>>()?;
    let fake = fake
        .iter()
        .map(|x| checked_input(d, x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interp = real
        .iter()
        .zip(&fake)
        .map(|(r, f)| {
            let alpha: f64 = rng.gen();
            r * alpha + f * (1.0 - alpha)
        })
        .collect();
    Ok(Batch { real, fake, interp })
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

pub fn wgan_gp_losses(
    d: &Discriminator,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    lambda_gp: f64,
    seed: u64,
) -> Result<WganLosses, LossError> {
    let batch = prepare(d, real, fake, lambda_gp, seed)?;
    losses(d, &batch, lambda_gp)
}

fn losses(d: &Discriminator, batch: &Batch, lambda_gp: f64) -> Result<WganLosses, LossError> {
    let n = batch.real.len();
    let mean_real = mean(batch.real.iter().map(|x| d.forward(x).score), n);
    let mean_fake = mean(batch.fake.iter().map(|x| d.forward(x).score), n);
    let gp = mean(
        batch.interp.iter().map(|x| {
            let fw = d.forward(x);
            let (g, _) = d.backward(x, &fw);
            (g.norm() - 1.0).powi(2)
        }),
        n,
    );
    let out = WganLosses {
        disc_loss: mean_fake - mean_real + lambda_gp * gp,
        gen_loss: -mean_fake,
        gp,
    };
    if !(out.disc_loss.is_finite() && out.gp.is_finite()) {
        return Err(LossError::NonFiniteValue("wgan losses"));
    }
    Ok(out)
}

/// Losses plus their gradients. The penalty's parameter gradient is exact
/// almost everywhere: the activation slopes are piecewise constant, so the
/// input gradient `∇ₓD = W1ᵀ S1 W2ᵀ S2 w3` is differentiated with the slope
/// masks `S1, S2` held fixed.
pub fn wgan_gp_gradients(
    d: &Discriminator,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    lambda_gp: f64,
    seed: u64,
) -> Result<(WganLosses, WganGradients), LossError> {
    let batch = prepare(d, real, fake, lambda_gp, seed)?;
    let losses = losses(d, &batch, lambda_gp)?;
    let n = batch.real.len() as f64;

    let mut critic = DiscriminatorGrads::zeros_like(d);
    let mut fake_features = Vec::with_capacity(batch.fake.len());
    for x in &batch.fake {
        let fw = d.forward(x);
        let (gx, gp) = d.backward(x, &fw);
        critic.add_scaled(&gp, 1.0 / n);
        fake_features.push(gx * (-1.0 / n));
    }
    for x in &batch.real {
        let fw = d.forward(x);
        let (_, gp) = d.backward(x, &fw);
        critic.add_scaled(&gp, -1.0 / n);
    }
    if lambda_gp != 0.0 {
        let scale = lambda_gp / n;
        for x in &batch.interp {
            let fw = d.forward(x);
            let s1 = d.slope_at(&fw.z1);
            let s2 = d.slope_at(&fw.z2);
            let c = d.w3.component_mul(&s2);
            let a = d.w2.tr_mul(&c).component_mul(&s1);
            let g = d.w1.tr_mul(&a);
            let norm = g.norm();
            if norm == 0.0 {
                continue;
            }
            // ∂(‖g‖ − 1)² / ∂g
            let v = &g * (2.0 * (norm - 1.0) / norm);
            let u = (&d.w1 * &v).component_mul(&s1);
            critic.w1 += (&a * v.transpose()) * scale;
            critic.w2 += (&c * u.transpose()) * scale;
            critic.w3 += (&d.w2 * &u).component_mul(&s2) * scale;
        }
    }
    Ok((
        losses,
        WganGradients {
            critic,
            fake_features,
        },
    ))
}
