use rand::{distributions::WeightedIndex, prelude::Distribution, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ScoreMap};

use super::EvalError;

/// Default mode window, in full-resolution pixels.
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_KL_EPSILON: f64 = 1e-6;

/// Full-resolution pixel position (`x` = column, `y` = row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

/// Per-pixel semantic class ids in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    grid: Grid<u16>,
    num_classes: usize,
}

impl SemanticMap {
    pub fn new(grid: Grid<u16>, num_classes: usize) -> Result<Self, EvalError> {
        if let Some((r, c, &id)) = grid.cells().find(|(_, _, &id)| usize::from(id) >= num_classes) {
            return Err(EvalError::InvalidParams(format!(
                "class id {id} at ({r}, {c}) exceeds class count {num_classes}"
            )));
        }
        Ok(Self { grid, num_classes })
    }

    pub fn grid(&self) -> &Grid<u16> {
        &self.grid
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Class probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram(Vec<f64>);

impl ClassHistogram {
    pub fn new(probs: Vec<f64>) -> Result<Self, EvalError> {
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(EvalError::InvalidParams("histogram entries must be finite and >= 0".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidParams(format!("histogram sums to {sum}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self, EvalError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(EvalError::EmptyLocations);
        }
        Ok(Self(counts.iter().map(|&c| c as f64 / total as f64).collect()))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }
}

/// Modal class in a `window × window` neighborhood (clipped at the borders,
/// ties to the smallest id), tallied over all locations.
pub fn semantic_class_counts(
    locations: &[PixelCoord],
    sem: &SemanticMap,
    window: usize,
) -> Result<Vec<u64>, EvalError> {
    if window == 0 || window % 2 == 0 {
        return Err(EvalError::InvalidParams(format!("window must be odd and >= 1, got {window}")));
    }
    let (h, w) = sem.grid.shape();
    let half = window / 2;
    let mut counts = vec![0u64; sem.num_classes];
    let mut votes = vec![0u32; sem.num_classes];
    for &PixelCoord { x, y } in locations {
        if x >= w || y >= h {
            return Err(EvalError::LocationOutOfBounds { x, y, width: w, height: h });
        }
        votes.iter_mut().for_each(|v| *v = 0);
        for r in y.saturating_sub(half)..=(y + half).min(h - 1) {
            for c in x.saturating_sub(half)..=(x + half).min(w - 1) {
                votes[usize::from(sem.grid[(r, c)])] += 1;
            }
        }
        // max_by_key keeps the last maximum; scan in reverse so ties go to the smallest id.
        let mode = votes
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .expect("at least one class");
        counts[mode] += 1;
    }
    Ok(counts)
}

pub fn semantic_histogram(
    locations: &[PixelCoord],
    sem: &SemanticMap,
    window: usize,
) -> Result<ClassHistogram, EvalError> {
    if locations.is_empty() {
        return Err(EvalError::EmptyLocations);
    }
    ClassHistogram::from_counts(&semantic_class_counts(locations, sem, window)?)
}

/// `KL(p ‖ q)` in nats after adding `epsilon` to every bin of both
/// histograms and renormalizing. Infinite if `q` has an empty bin where `p`
/// does not.
pub fn kl_divergence(p: &ClassHistogram, q: &ClassHistogram, epsilon: f64) -> Result<f64, EvalError> {
    if p.0.len() != q.0.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} vs {} classes",
            p.0.len(),
            q.0.len()
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(EvalError::InvalidParams(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let smooth = |h: &[f64]| -> Vec<f64> {
        let total: f64 = h.iter().map(|v| v + epsilon).sum();
        h.iter().map(|v| (v + epsilon) / total).collect()
    };
    let (ps, qs) = (smooth(&p.0), smooth(&q.0));
    let kl: f64 = ps
        .iter()
        .zip(&qs)
        .map(|(&a, &b)| match (a, b) {
            (a, _) if a == 0.0 => 0.0,
            (_, b) if b == 0.0 => f64::INFINITY,
            (a, b) => a * (a / b).ln(),
        })
        .sum();
    Ok(kl.max(0.0))
}

/// `n` cells drawn with replacement, each with probability proportional to
/// its score (uniform if every score is zero), returned as full-resolution
/// pixel positions of the cell centers.
pub fn sample_locations(scores: &ScoreMap, n: usize, seed: u64, downsample: u32) -> Vec<PixelCoord> {
    let g = scores.grid();
    if n == 0 || g.is_empty() {
        return Vec::new();
    }
    let s = downsample.max(1) as usize;
    let to_pixel = |i: usize| PixelCoord {
        x: (i % g.cols()) * s + s / 2,
        y: (i / g.cols()) * s + s / 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match WeightedIndex::new(g.as_slice()) {
        Ok(dist) => (0..n).map(|_| to_pixel(dist.sample(&mut rng))).collect(),
        Err(_) => (0..n).map(|_| to_pixel(rng.gen_range(0..g.len()))).collect(),
    }
}
