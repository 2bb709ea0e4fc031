use rayon::prelude::*;

use crate::grid::{BinaryMap, ScoreMap};

use super::EvalError;

/// All-points average precision: cells ranked by descending score (row-major
/// on ties), `AP = Σ_k (R_k − R_{k−1}) · P_k`.
pub fn average_precision(scores: &ScoreMap, gt: &BinaryMap) -> Result<f64, EvalError> {
    scores.grid().ensure_same_shape(gt.grid())?;
    let n_pos = gt.count_ones();
    if n_pos == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let s = scores.grid().as_slice();
    let labels = gt.grid().as_slice();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut hits = 0usize;
    let mut sum_precision = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum_precision += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum_precision / n_pos as f64)
}

/// Unweighted mean of per-image AP. Images are scored in parallel and
/// reduced in input order.
pub fn mean_ap(pairs: &[(ScoreMap, BinaryMap)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let aps = pairs
        .par_iter()
        .map(|(s, g)| average_precision(s, g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
