use serde::{Deserialize, Serialize};

use crate::grid::{BinaryMap, Grid, ScoreMap};

use super::LossError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub c_pos: f64,
    pub c_neg: f64,
}

/// `n_total / (2 n_class)` per class, so a balanced map gets weights `(1, 1)`.
/// If one class is absent it gets weight 0 and the other gets 1.
pub fn class_weights(y: &BinaryMap) -> ClassWeights {
    let n_total = y.grid().len();
    let n_pos = y.count_ones();
    let n_neg = n_total - n_pos;
    match (n_pos, n_neg) {
        (0, 0) => ClassWeights { c_pos: 0.0, c_neg: 0.0 },
        (0, _) => ClassWeights { c_pos: 0.0, c_neg: 1.0 },
        (_, 0) => ClassWeights { c_pos: 1.0, c_neg: 0.0 },
        _ => {
            let n = n_total as f64;
            ClassWeights {
                c_pos: n / (2.0 * n_pos as f64),
                c_neg: n / (2.0 * n_neg as f64),
            }
        }
    }
}

/// Mean class-balanced cross-entropy and its gradient with respect to each
/// (clamped) score.
pub fn cbl_loss(p: &ScoreMap, y: &BinaryMap, w: &ClassWeights) -> Result<(f64, Grid<f64>), LossError> {
    p.grid().ensure_same_shape(y.grid())?;
    if !(w.c_pos.is_finite() && w.c_neg.is_finite()) {
        return Err(LossError::NonFiniteValue("class weights"));
    }
    let (rows, cols) = p.shape();
    let n = (rows * cols) as f64;
    let mut loss = 0.0;
    let mut grad = Grid::new(rows, cols);
    for (r, c, &label) in y.grid().cells() {
        let q = p.clamped(r, c);
        if label {
            loss -= w.c_pos * q.ln();
            grad[(r, c)] = -w.c_pos / q / n;
        } else {
            loss -= w.c_neg * (1.0 - q).ln();
            grad[(r, c)] = w.c_neg / (1.0 - q) / n;
        }
    }
    let loss = if n > 0.0 { loss / n } else { 0.0 };
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SCORE_CLAMP_EPS;
    use proptest::prelude::*;

    fn bin(v: &[u8], cols: usize) -> BinaryMap {
        BinaryMap::new(Grid::from_vec(v.len() / cols, cols, v.iter().map(|&b| b == 1).collect()).unwrap())
    }

    #[test]
    fn weight_fixtures() {
        assert_eq!(
            class_weights(&bin(&[1, 0, 1, 0], 2)),
            ClassWeights { c_pos: 1.0, c_neg: 1.0 }
        );
        assert_eq!(
            class_weights(&bin(&[1, 1, 0, 0, 0, 0, 0, 0, 0, 0], 5)),
            ClassWeights { c_pos: 2.5, c_neg: 0.625 }
        );
        assert_eq!(
            class_weights(&bin(&[0, 0, 0], 3)),
            ClassWeights { c_pos: 0.0, c_neg: 1.0 }
        );
        assert_eq!(
            class_weights(&bin(&[1, 1], 2)),
            ClassWeights { c_pos: 1.0, c_neg: 0.0 }
        );
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let y = bin(&[1, 0, 0, 1, 0, 0], 3);
        let p = ScoreMap::new(y.to_f64()).unwrap();
        let w = class_weights(&y);
        let (loss, _) = cbl_loss(&p, &y, &w).unwrap();
        let bound = w.c_pos.max(w.c_neg) * -(1.0 - SCORE_CLAMP_EPS).ln();
        assert!(loss <= bound && loss < 1e-6, "{loss}");
    }

    #[test]
    fn half_scores_give_ln2() {
        let y = bin(&[1, 0, 0, 1], 2);
        let p = ScoreMap::new(Grid::filled(2, 2, 0.5)).unwrap();
        let (loss, _) = cbl_loss(&p, &y, &ClassWeights { c_pos: 1.0, c_neg: 1.0 }).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let y = bin(&[1, 0], 2);
        let p = ScoreMap::new(Grid::filled(2, 1, 0.5)).unwrap();
        assert!(matches!(
            cbl_loss(&p, &y, &class_weights(&y)),
            Err(LossError::ShapeMismatch(_))
        ));
    }

    fn map_pair() -> impl Strategy<Value = (usize, Vec<f64>, Vec<bool>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            (
                Just(c),
                proptest::collection::vec(0.0f64..=1.0, r * c),
                proptest::collection::vec(any::<bool>(), r * c),
            )
        })
    }

    proptest! {
        #[test]
        fn weight_scaling_is_linear((cols, ps, ys) in map_pair(), lambda in 0.01f64..100.0) {
            let rows = ps.len() / cols;
            let p = ScoreMap::new(Grid::from_vec(rows, cols, ps).unwrap()).unwrap();
            let y = BinaryMap::new(Grid::from_vec(rows, cols, ys).unwrap());
            let w = ClassWeights { c_pos: 1.7, c_neg: 0.4 };
            let ws = ClassWeights { c_pos: 1.7 * lambda, c_neg: 0.4 * lambda };
            let (l1, g1) = cbl_loss(&p, &y, &w).unwrap();
            let (l2, g2) = cbl_loss(&p, &y, &ws).unwrap();
            prop_assert!((l2 - lambda * l1).abs() <= 1e-12 * l2.abs().max(1.0));
            for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
                prop_assert!((b - lambda * a).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }

        #[test]
        fn loss_ignores_cell_permutation((cols, ps, ys) in map_pair(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let rows = ps.len() / cols;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut row_perm: Vec<usize> = (0..rows).collect();
            let mut col_perm: Vec<usize> = (0..cols).collect();
            row_perm.shuffle(&mut rng);
            col_perm.shuffle(&mut rng);
            let pg = Grid::from_vec(rows, cols, ps).unwrap();
            let yg = Grid::from_vec(rows, cols, ys).unwrap();
            let pp = Grid::from_fn(rows, cols, |r, c| pg[(row_perm[r], col_perm[c])]);
            let yp = Grid::from_fn(rows, cols, |r, c| yg[(row_perm[r], col_perm[c])]);
            let y = BinaryMap::new(yg);
            let w = class_weights(&y);
            let (a, _) = cbl_loss(&ScoreMap::new(pg).unwrap(), &y, &w).unwrap();
            let (b, _) = cbl_loss(&ScoreMap::new(pp).unwrap(), &BinaryMap::new(yp), &w).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
