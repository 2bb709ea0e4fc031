use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{BinaryMap, Cell, ScoreMap};

use super::LossError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Percentage of negative cells kept after ranking, in `(0, 100]`.
    pub top_percent: f64,
    pub num_samples: usize,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            top_percent: 1.0,
            num_samples: 10,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.top_percent > 0.0 && self.top_percent <= 100.0) {
            return Err(LossError::InvalidParams(format!(
                "top_percent must be in (0, 100], got {}",
                self.top_percent
            )));
        }
        if self.num_samples == 0 {
            return Err(LossError::InvalidParams("num_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Hard false-positive candidates: negative cells ranked by raw score
/// (descending, row-major on ties), truncated to the top
/// `ceil(top_percent% · n_negative)`, then `min(N, pool)` cells drawn
/// uniformly without replacement. Cells come back in draw order.
pub fn sample_hard_false_positives(
    p: &ScoreMap,
    y: &BinaryMap,
    params: &SamplerParams,
) -> Result<Vec<Cell>, LossError> {
    params.validate()?;
    p.grid().ensure_same_shape(y.grid())?;
    let scores = p.grid();
    let mut negatives: Vec<(Cell, f64)> = y
        .grid()
        .cells()
        .filter(|(_, _, &label)| !label)
        .map(|(r, c, _)| (Cell::new(r, c), scores[(r, c)]))
        .collect();
    if negatives.is_empty() {
        return Ok(Vec::new());
    }
    // Stable sort keeps row-major order among equal scores.
    negatives.sort_by(|a, b| b.1.total_cmp(&a.1));
    let pool = ((params.top_percent * negatives.len() as f64 / 100.0).ceil() as usize)
        .clamp(1, negatives.len());
    let amount = params.num_samples.min(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(rand::seq::index::sample(&mut rng, pool, amount)
        .into_iter()
        .map(|i| negatives[i].0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn fixture() -> (ScoreMap, BinaryMap) {
        // Deterministic 8x8 scores with repeated values to exercise ties.
        let p = Grid::from_fn(8, 8, |r, c| ((r * 7 + c * 3) % 11) as f64 / 10.0);
        let y = Grid::from_fn(8, 8, |r, c| (r + 2 * c) % 5 == 0);
        (ScoreMap::new(p).unwrap(), BinaryMap::new(y))
    }

    #[test]
    fn all_positive_gives_nothing() {
        let p = ScoreMap::new(Grid::filled(3, 3, 0.9)).unwrap();
        let y = BinaryMap::new(Grid::filled(3, 3, true));
        assert!(sample_hard_false_positives(&p, &y, &SamplerParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn forced_singleton() {
        let mut g = Grid::filled(4, 4, 0.2);
        g[(2, 3)] = 0.95;
        let p = ScoreMap::new(g).unwrap();
        let y = BinaryMap::zeros(4, 4);
        let params = SamplerParams {
            top_percent: 1.0,
            num_samples: 1,
            seed: 9,
        };
        assert_eq!(
            sample_hard_false_positives(&p, &y, &params).unwrap(),
            vec![Cell::new(2, 3)]
        );
    }

    #[test]
    fn golden_draw() {
        let (p, y) = fixture();
        let params = SamplerParams {
            top_percent: 25.0,
            num_samples: 5,
            seed: 42,
        };
        let got = sample_hard_false_positives(&p, &y, &params).unwrap();
        let expected: Vec<Cell> = GOLDEN_SEED_42.iter().map(|&(r, c)| Cell::new(r, c)).collect();
        assert_eq!(got, expected);
    }

    // Frozen output of the reference sampler on `fixture()` with seed 42.
    const GOLDEN_SEED_42: [(usize, usize); 5] = [(2, 6), (1, 1), (5, 6), (4, 1), (6, 4)];

    #[test]
    fn outputs_are_negative_bounded_and_distinct() {
        let (p, y) = fixture();
        for seed in 0..50 {
            for &n in &[1, 3, 10, 100] {
                let params = SamplerParams {
                    top_percent: 30.0,
                    num_samples: n,
                    seed,
                };
                let cells = sample_hard_false_positives(&p, &y, &params).unwrap();
                assert!(cells.len() <= n);
                assert!(cells.iter().all(|c| !y.grid()[(c.row, c.col)]));
                let mut uniq = cells.clone();
                uniq.sort();
                uniq.dedup();
                assert_eq!(uniq.len(), cells.len());
                assert_eq!(cells, sample_hard_false_positives(&p, &y, &params).unwrap());
            }
        }
    }

    #[test]
    fn pool_holds_only_top_ranked() {
        let (p, y) = fixture();
        let n_neg = y.grid().as_slice().iter().filter(|&&b| !b).count();
        let params = SamplerParams {
            top_percent: 10.0,
            num_samples: 1000,
            seed: 1,
        };
        let cells = sample_hard_false_positives(&p, &y, &params).unwrap();
        assert_eq!(cells.len(), (0.1 * n_neg as f64).ceil() as usize);
        let min_kept = cells.iter().map(|c| p.grid()[(c.row, c.col)]).fold(1.0, f64::min);
        let above = y
            .grid()
            .cells()
            .filter(|(r, c, &b)| !b && p.grid()[(*r, *c)] > min_kept)
            .count();
        assert!(above <= cells.len());
    }

    #[test]
    fn rejects_bad_params() {
        let (p, y) = fixture();
        for bad in [0.0, -1.0, 100.5, f64::NAN] {
            let params = SamplerParams {
                top_percent: bad,
                ..Default::default()
            };
            assert!(sample_hard_false_positives(&p, &y, &params).is_err());
        }
    }
}
