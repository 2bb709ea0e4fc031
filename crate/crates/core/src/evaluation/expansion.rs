use std::ops::AddAssign;

use crate::grid::BinaryMap;

use super::{EvalError, MetricsReport};

/// Default score threshold for turning predictions into a binary map.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Cell counts behind the expansion ratios. Summing counts over a test set
/// before taking ratios gives set-level numbers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpansionCounts {
    pub gt: usize,
    pub pred: usize,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

impl AddAssign for ExpansionCounts {
    fn add_assign(&mut self, o: Self) {
        self.gt += o.gt;
        self.pred += o.pred;
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.fp += o.fp;
    }
}

impl ExpansionCounts {
    /// `missing_fn` is formed as `1 − tp` and `pred_total` as `tp + expansion`,
    /// which equal `fn/G` and `pred/G` mathematically and make both report
    /// identities hold bit-exactly.
    pub fn report(&self) -> Result<MetricsReport, EvalError> {
        if self.gt == 0 {
            return Err(EvalError::EmptyGroundTruth);
        }
        let g = self.gt as f64;
        let tp = self.tp as f64 / g;
        let expansion = self.fp as f64 / g;
        Ok(MetricsReport::expansion(tp + expansion, tp, 1.0 - tp, expansion))
    }
}

pub fn expansion_counts(pred: &BinaryMap, gt: &BinaryMap) -> Result<ExpansionCounts, EvalError> {
    pred.grid().ensure_same_shape(gt.grid())?;
    let mut c = ExpansionCounts::default();
    for (&p, &g) in pred.grid().as_slice().iter().zip(gt.grid().as_slice()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (false, true) => c.fn_ += 1,
            (true, false) => c.fp += 1,
            (false, false) => {}
        }
    }
    c.gt = c.tp + c.fn_;
    c.pred = c.tp + c.fp;
    Ok(c)
}

pub fn expansion_metrics(pred: &BinaryMap, gt: &BinaryMap) -> Result<MetricsReport, EvalError> {
    expansion_counts(pred, gt)?.report()
}
