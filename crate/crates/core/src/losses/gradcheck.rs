//! Central finite-difference checks for every analytic gradient in
//! [`crate::losses`].
//!
//! The numerical side only ever calls forward (value) functions, so it stays
//! independent of the backward code it checks. Inputs whose pre-activations
//! lie within [`KINK_MARGIN`] of the leaky activation's kink are redrawn,
//! since a finite-difference stencil straddling the kink measures a
//! one-sided slope.

use nalgebra::DVector;
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::{BinaryMap, Grid, ScoreMap};

use super::{
    cbl_loss, class_weights, discriminator_eval, wgan_gp_gradients, wgan_gp_losses,
    Discriminator, DEFAULT_HIDDEN_WIDTH, DEFAULT_LAMBDA_GP, DEFAULT_LEAKY_SLOPE, FEATURE_DIM,
};

pub const FD_STEP: f64 = 1e-6;
pub const MAX_REL_ERROR: f64 = 1e-4;
/// Magnitudes below this are compared absolutely rather than relatively.
///
/// A central difference with step `h` carries roundoff of about
/// `ε·|L| / h`, near 1e-9 for the penalized critic loss at `h = 1e-6`.
/// Below this floor a gradient is judged to an absolute 1e-8 instead.
pub const REL_ERROR_FLOOR: f64 = 1e-4;
pub const KINK_MARGIN: f64 = 1e-4;

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheck {
    pub name: &'static str,
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
}

impl GradCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            trials: 0,
            coordinates: 0,
            max_rel_error: 0.0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.coordinates += 1;
        let e = relative_error(analytic, numeric);
        // NaN must register as a failure.
        if e.is_nan() || e > self.max_rel_error {
            self.max_rel_error = if e.is_nan() { f64::INFINITY } else { e };
        }
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error < MAX_REL_ERROR
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub seed: u64,
    /// Hidden width of the discriminator used for the input/parameter check.
    pub hidden: usize,
    /// Hidden width used for the adversarial-loss checks, which evaluate a
    /// whole batch per stencil point.
    pub wgan_hidden: usize,
    pub batch: usize,
    /// Parameter entries checked per tensor and trial.
    pub params_per_tensor: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            hidden: DEFAULT_HIDDEN_WIDTH,
            wgan_hidden: 64,
            batch: 4,
            params_per_tensor: 8,
        }
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sampled_indices(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    index::sample(rng, len, amount.min(len)).into_vec()
}

pub fn check_cbl(cfg: &GradCheckConfig) -> GradCheck {
    let mut out = GradCheck::new("cbl_loss");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.trials {
        let p = Grid::from_fn(8, 8, |_, _| rng.gen_range(0.05..0.95));
        let y = BinaryMap::new(Grid::from_fn(8, 8, |_, _| rng.gen_bool(0.3)));
        let w = class_weights(&y);
        let (_, grad) = cbl_loss(&ScoreMap::new(p.clone()).unwrap(), &y, &w).unwrap();
        for i in 0..p.len() {
            let numeric = central_difference(
                |v| {
                    let mut q = p.clone();
                    q.as_mut_slice()[i] = v;
                    cbl_loss(&ScoreMap::new(q).unwrap(), &y, &w).unwrap().0
                },
                p.as_slice()[i],
                FD_STEP,
            );
            out.record(grad.as_slice()[i], numeric);
        }
        out.trials += 1;
    }
    out
}

/// Draws a feature vector whose forward pass keeps clear of the activation kink.
fn clear_input(d: &Discriminator, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let x = uniform_vec(rng, d.input_dim());
        if d.forward(&DVector::from_column_slice(&x)).kink_margin() >= KINK_MARGIN {
            return x;
        }
    }
}

/// Input and parameter gradients of a single discriminator evaluation.
pub fn check_discriminator(cfg: &GradCheckConfig) -> (GradCheck, GradCheck) {
    let mut inputs = GradCheck::new("discriminator grad_x");
    let mut params = GradCheck::new("discriminator grad_params");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD15C);
    for _ in 0..cfg.trials {
        let mut d = Discriminator::random(FEATURE_DIM, cfg.hidden, DEFAULT_LEAKY_SLOPE, &mut rng);
        let x = clear_input(&d, &mut rng);
        let eval = discriminator_eval(&d, &x).unwrap();

        for i in 0..x.len() {
            let numeric = central_difference(
                |v| {
                    let mut y = x.clone();
                    y[i] = v;
                    d.score(&y)
                },
                x[i],
                FD_STEP,
            );
            inputs.record(eval.grad_x[i], numeric);
        }

        let analytic = eval.grad_params.slices().map(<[f64]>::to_vec);
        for (t, grads) in analytic.iter().enumerate() {
            for j in sampled_indices(&mut rng, grads.len(), cfg.params_per_tensor) {
                let original = d.param_slices()[t][j];
                let numeric = central_difference(
                    |v| {
                        d.param_slices_mut()[t][j] = v;
                        d.score(&x)
                    },
                    original,
                    FD_STEP,
                );
                d.param_slices_mut()[t][j] = original;
                params.record(grads[j], numeric);
            }
        }
        inputs.trials += 1;
        params.trials += 1;
    }
    (inputs, params)
}

fn wgan_margin_ok(d: &Discriminator, real: &[Vec<f64>], fake: &[Vec<f64>], seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    real.iter().zip(fake).all(|(r, f)| {
        let alpha: f64 = rng.gen();
        let (r, f) = (DVector::from_column_slice(r), DVector::from_column_slice(f));
        let x_hat = &r * alpha + &f * (1.0 - alpha);
        [r, f, x_hat]
            .iter()
            .all(|x| d.forward(x).kink_margin() >= KINK_MARGIN)
    })
}

/// Critic-parameter gradient of the full penalized critic loss, the
/// generator's feature gradient, and the penalty value recomputed from
/// finite-difference input gradients.
pub fn check_wgan(cfg: &GradCheckConfig) -> [GradCheck; 3] {
    let mut critic = GradCheck::new("wgan_gp critic params");
    let mut generator = GradCheck::new("wgan_gp fake features");
    let mut penalty = GradCheck::new("gradient penalty value");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6A9);
    for _ in 0..cfg.trials {
        let mut d = Discriminator::random(FEATURE_DIM, cfg.wgan_hidden, DEFAULT_LEAKY_SLOPE, &mut rng);
        let (real, fake, seed) = loop {
            let real: Vec<_> = (0..cfg.batch).map(|_| uniform_vec(&mut rng, FEATURE_DIM)).collect();
            let fake: Vec<_> = (0..cfg.batch).map(|_| uniform_vec(&mut rng, FEATURE_DIM)).collect();
            let seed: u64 = rng.gen();
            if wgan_margin_ok(&d, &real, &fake, seed) {
                break (real, fake, seed);
            }
        };
        let lambda = DEFAULT_LAMBDA_GP;
        let (losses, grads) = wgan_gp_gradients(&d, &real, &fake, lambda, seed).unwrap();

        let analytic = grads.critic.slices().map(<[f64]>::to_vec);
        for (t, g) in analytic.iter().enumerate() {
            for j in sampled_indices(&mut rng, g.len(), cfg.params_per_tensor) {
                let original = d.param_slices()[t][j];
                let numeric = central_difference(
                    |v| {
                        d.param_slices_mut()[t][j] = v;
                        wgan_gp_losses(&d, &real, &fake, lambda, seed).unwrap().disc_loss
                    },
                    original,
                    FD_STEP,
                );
                d.param_slices_mut()[t][j] = original;
                critic.record(g[j], numeric);
            }
        }

        for k in 0..fake.len() {
            for j in sampled_indices(&mut rng, FEATURE_DIM, cfg.params_per_tensor) {
                let numeric = central_difference(
                    |v| {
                        let mut f = fake.clone();
                        f[k][j] = v;
                        wgan_gp_losses(&d, &real, &f, lambda, seed).unwrap().gen_loss
                    },
                    fake[k][j],
                    FD_STEP,
                );
                generator.record(grads.fake_features[k][j], numeric);
            }
        }

        // Recompute the penalty with numerically estimated input gradients.
        let mut alpha_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gp_fd = 0.0;
        for (r, f) in real.iter().zip(&fake) {
            let alpha: f64 = alpha_rng.gen();
            let x_hat: Vec<f64> = r.iter().zip(f).map(|(a, b)| a * alpha + b * (1.0 - alpha)).collect();
            let norm_sq: f64 = (0..x_hat.len())
                .map(|i| {
                    central_difference(
                        |v| {
                            let mut y = x_hat.clone();
                            y[i] = v;
                            d.score(&y)
                        },
                        x_hat[i],
                        FD_STEP,
                    )
                    .powi(2)
                })
                .sum();
            gp_fd += (norm_sq.sqrt() - 1.0).powi(2);
        }
        penalty.record(losses.gp, gp_fd / real.len() as f64);

        critic.trials += 1;
        generator.trials += 1;
        penalty.trials += 1;
    }
    [critic, generator, penalty]
}

/// Every check, in a fixed order.
pub fn run_all(cfg: &GradCheckConfig) -> Vec<GradCheck> {
    let (inputs, params) = check_discriminator(cfg);
    let mut out = vec![check_cbl(cfg), inputs, params];
    out.extend(check_wgan(cfg));
    out
}
