//! Classification metrics: accuracy and the F1 score of the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1_positive: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Accuracy and F1 for the positive class; F1 is 0 when precision and
/// recall are both undefined or zero.
pub fn compute_metrics(predictions: &[bool], labels: &[bool]) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidInput("empty prediction list".into()));
    }
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    let mut correct = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        if p == y {
            correct += 1;
        }
        match (p, y) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy: correct as f64 / predictions.len() as f64,
        f1_positive: f1,
        precision,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let m = compute_metrics(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1_positive, 1.0);
    }

    #[test]
    fn hand_computed_case() {
        // labels [+,+,-,-], predictions [+,-,-,-]
        let m = compute_metrics(&[true, false, false, false], &[true, true, false, false]).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
        assert!((m.f1_positive - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_f1_is_zero() {
        let m = compute_metrics(&[false, false], &[true, true]).unwrap();
        assert_eq!(m.f1_positive, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_metrics(&[true], &[true, false]).is_err());
    }

    #[test]
    fn accuracy_equals_one_minus_hamming_error() {
        let mut state = 42u64;
        let mut flip = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(7);
            (state >> 62) & 1 == 1
        };
        for trial in 0..200usize {
            let n = 1 + trial % 17;
            let preds: Vec<bool> = (0..n).map(|_| flip()).collect();
            let labels: Vec<bool> = (0..n).map(|_| flip()).collect();
            let m = compute_metrics(&preds, &labels).unwrap();
            let hamming = preds.iter().zip(&labels).filter(|(a, b)| a != b).count() as f64 / n as f64;
            assert!((m.accuracy - (1.0 - hamming)).abs() < 1e-12);
        }
    }
}
