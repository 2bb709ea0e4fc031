use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::LossError;

/// Width of the feature vectors the discriminator scores.
pub const FEATURE_DIM: usize = 256;
pub const DEFAULT_HIDDEN_WIDTH: usize = 256;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Three affine layers `d → h → h → 1` with leaky-linear activations between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    /// `h × d`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `h × h`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub w3: DVector<f64>,
    pub b3: f64,
    /// Slope applied to negative pre-activations.
    pub leaky_slope: f64,
}

/// Gradients shaped like the discriminator's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorGrads {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub w3: DVector<f64>,
    pub b3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorEval {
    pub score: f64,
    pub grad_x: DVector<f64>,
    pub grad_params: DiscriminatorGrads,
}

/// Intermediate values of one forward pass.
pub(crate) struct Forward {
    pub z1: DVector<f64>,
    pub a1: DVector<f64>,
    pub z2: DVector<f64>,
    pub a2: DVector<f64>,
    pub score: f64,
}

impl Forward {
    /// Distance of the nearest pre-activation from the activation kink.
    pub fn kink_margin(&self) -> f64 {
        self.z1
            .iter()
            .chain(self.z2.iter())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

impl Discriminator {
    pub fn zeros(input_dim: usize, hidden: usize, leaky_slope: f64) -> Self {
        Self {
            w1: DMatrix::zeros(hidden, input_dim),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(hidden, hidden),
            b2: DVector::zeros(hidden),
            w3: DVector::zeros(hidden),
            b3: 0.0,
            leaky_slope,
        }
    }

    /// Uniform `±1/√fan_in` initialization.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden: usize, leaky_slope: f64, rng: &mut R) -> Self {
        let mut u = |fan_in: usize| {
            let b = 1.0 / (fan_in as f64).sqrt();
            rng.gen_range(-b..b)
        };
        Self {
            w1: DMatrix::from_fn(hidden, input_dim, |_, _| u(input_dim)),
            b1: DVector::from_fn(hidden, |_, _| u(input_dim)),
            w2: DMatrix::from_fn(hidden, hidden, |_, _| u(hidden)),
            b2: DVector::from_fn(hidden, |_, _| u(hidden)),
            w3: DVector::from_fn(hidden, |_, _| u(hidden)),
            b3: u(hidden),
            leaky_slope,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let h = self.hidden();
        if self.b1.len() != h
            || self.w2.shape() != (h, h)
            || self.b2.len() != h
            || self.w3.len() != h
        {
            return Err(LossError::ShapeMismatch(format!(
                "inconsistent layer shapes for hidden width {h}"
            )));
        }
        let finite = self
            .param_slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
            && self.leaky_slope.is_finite();
        if !finite {
            return Err(LossError::NonFiniteValue("discriminator parameters"));
        }
        Ok(())
    }

    /// Parameter storage in a fixed order (`w1, b1, w2, b2, w3, b3`), each
    /// slice in nalgebra's column-major layout.
    pub fn param_slices(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
            self.w3.as_slice(),
            std::slice::from_ref(&self.b3),
        ]
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
            self.w3.as_mut_slice(),
            std::slice::from_mut(&mut self.b3),
        ]
    }

    fn leaky(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(|v| if v > 0.0 { v } else { self.leaky_slope * v })
    }

    pub(crate) fn slope_at(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(|v| if v > 0.0 { 1.0 } else { self.leaky_slope })
    }

    pub(crate) fn forward(&self, x: &DVector<f64>) -> Forward {
        let z1 = &self.w1 * x + &self.b1;
        let a1 = self.leaky(&z1);
        let z2 = &self.w2 * &a1 + &self.b2;
        let a2 = self.leaky(&z2);
        let score = self.w3.dot(&a2) + self.b3;
        Forward { z1, a1, z2, a2, score }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.forward(&DVector::from_column_slice(x)).score
    }

    /// Backward pass from a completed forward pass.
    pub(crate) fn backward(&self, x: &DVector<f64>, fw: &Forward) -> (DVector<f64>, DiscriminatorGrads) {
        let g_z2 = self.w3.component_mul(&self.slope_at(&fw.z2));
        let g_a1 = self.w2.tr_mul(&g_z2);
        let g_z1 = g_a1.component_mul(&self.slope_at(&fw.z1));
        let grad_x = self.w1.tr_mul(&g_z1);
        let grads = DiscriminatorGrads {
            w1: &g_z1 * x.transpose(),
            b1: g_z1,
            w2: &g_z2 * fw.a1.transpose(),
            b2: g_z2,
            w3: fw.a2.clone(),
            b3: 1.0,
        };
        (grad_x, grads)
    }
}

impl DiscriminatorGrads {
    pub fn zeros_like(d: &Discriminator) -> Self {
        let (h, n) = (d.hidden(), d.input_dim());
        Self {
            w1: DMatrix::zeros(h, n),
            b1: DVector::zeros(h),
            w2: DMatrix::zeros(h, h),
            b2: DVector::zeros(h),
            w3: DVector::zeros(h),
            b3: 0.0,
        }
    }

    /// Same order and layout as [`Discriminator::param_slices`].
    pub fn slices(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
            self.w3.as_slice(),
            std::slice::from_ref(&self.b3),
        ]
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &DiscriminatorGrads, scale: f64) {
        self.w1 += &other.w1 * scale;
        self.b1.axpy(scale, &other.b1, 1.0);
        self.w2 += &other.w2 * scale;
        self.b2.axpy(scale, &other.b2, 1.0);
        self.w3.axpy(scale, &other.w3, 1.0);
        self.b3 += scale * other.b3;
    }
}

pub(crate) fn checked_input(d: &Discriminator, x: &[f64]) -> Result<DVector<f64>, LossError> {
    if x.len() != d.input_dim() {
        return Err(LossError::ShapeMismatch(format!(
            "feature has {} entries, discriminator expects {}",
            x.len(),
            d.input_dim()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(LossError::NonFiniteValue("feature vector"));
    }
    Ok(DVector::from_column_slice(x))
}

/// Score plus exact gradients with respect to the input and every parameter.
pub fn discriminator_eval(d: &Discriminator, x: &[f64]) -> Result<DiscriminatorEval, LossError> {
    d.validate()?;
    let x = checked_input(d, x)?;
    let fw = d.forward(&x);
    let (grad_x, grad_params) = d.backward(&x, &fw);
    if !fw.score.is_finite() {
        return Err(LossError::NonFiniteValue("discriminator score"));
    }
    Ok(DiscriminatorEval {
        score: fw.score,
        grad_x,
        grad_params,
    })
}
