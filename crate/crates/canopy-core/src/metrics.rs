//! Segmentation metrics: pixel accuracy, F1, and intersection over union,
//! plus micro-averaged aggregation across queries.

use crate::raster::BinaryMask;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("prediction is {pred_w}x{pred_h}, ground truth is {gt_w}x{gt_h}")]
    ShapeMismatch {
        pred_w: usize,
        pred_h: usize,
        gt_w: usize,
        gt_h: usize,
    },
    #[error("no pixels to score")]
    EmptyComparison,
    #[error("no labeled queries to aggregate")]
    NothingToAggregate,
}

/// Pixel-level confusion counts. Counts add field-wise, so per-query counts
/// can be reduced in any order before computing metrics once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl core::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, rhs: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: self.true_pos + rhs.true_pos,
            false_pos: self.false_pos + rhs.false_pos,
            false_neg: self.false_neg + rhs.false_neg,
            true_neg: self.true_neg + rhs.true_neg,
        }
    }
}

impl core::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: ConfusionCounts) {
        *self = *self + rhs;
    }
}

impl core::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> ConfusionCounts {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// `(tp + tn) / total`. Errors when there are no pixels at all.
    pub fn pixel_accuracy(&self) -> Result<f64, MetricsError> {
        let total = self.total();
        if total == 0 {
            return Err(MetricsError::EmptyComparison);
        }
        Ok((self.true_pos + self.true_neg) as f64 / total as f64)
    }

    /// `2tp / (2tp + fp + fn)`; defined as 1 when both masks are empty
    /// (a correct all-clear prediction scores perfect).
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            return 1.0;
        }
        2.0 * self.true_pos as f64 / denom as f64
    }

    /// `tp / (tp + fp + fn)`; defined as 1 when both masks are empty.
    pub fn iou(&self) -> f64 {
        let denom = self.true_pos + self.false_pos + self.false_neg;
        if denom == 0 {
            return 1.0;
        }
        self.true_pos as f64 / denom as f64
    }
}

/// Counts agreement between a prediction and its ground truth. The masks
/// must have identical dimensions.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts, MetricsError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(MetricsError::ShapeMismatch {
            pred_w: pred.width(),
            pred_h: pred.height(),
            gt_w: gt.width(),
            gt_h: gt.height(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (1, 1) => c.true_pos += 1,
            (1, 0) => c.false_pos += 1,
            (0, 1) => c.false_neg += 1,
            _ => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// The three reported scores, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub pixel_accuracy: f64,
    pub f1: f64,
    pub iou: f64,
}

impl MetricsReport {
    pub fn from_counts(c: &ConfusionCounts) -> Result<Self, MetricsError> {
        Ok(Self {
            pixel_accuracy: c.pixel_accuracy()?,
            f1: c.f1(),
            iou: c.iou(),
        })
    }
}

/// Micro-average: sums the per-query counts, then computes each metric once
/// on the pooled counts.
pub fn aggregate<I>(counts: I) -> Result<MetricsReport, MetricsError>
where
    I: IntoIterator<Item = ConfusionCounts>,
{
    let mut it = counts.into_iter().peekable();
    if it.peek().is_none() {
        return Err(MetricsError::NothingToAggregate);
    }
    let pooled: ConfusionCounts = it.sum();
    MetricsReport::from_counts(&pooled)
}
