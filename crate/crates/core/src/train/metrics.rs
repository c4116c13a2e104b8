//! Evaluation metrics: confusion counts at the 0.5 threshold, derived
//! scores and rank-based ROC-AUC with midrank tie handling.

use super::{SessionDataset, Split, TrainError};
use crate::blink::{extract_features, BlinkClassifier};
use crate::signal::Label;

/// Test-set evaluation report. Undefined ratios (empty denominators) are
/// reported as 0.0 with the corresponding `*_defined` flag cleared.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    pub recall_defined: bool,
    pub f1: f64,
    /// Absent when the evaluated set holds a single class.
    pub roc_auc: Option<f64>,
}

impl EvalReport {
    /// Report as CSV (`metric,value`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("tp,{}\n", self.true_positives));
        out.push_str(&format!("fp,{}\n", self.false_positives));
        out.push_str(&format!("fn,{}\n", self.false_negatives));
        out.push_str(&format!("tn,{}\n", self.true_negatives));
        out.push_str(&format!("accuracy,{}\n", self.accuracy));
        out.push_str(&format!("precision,{}\n", self.precision));
        out.push_str(&format!("recall,{}\n", self.recall));
        out.push_str(&format!("f1,{}\n", self.f1));
        match self.roc_auc {
            Some(auc) => out.push_str(&format!("roc_auc,{auc}\n")),
            None => out.push_str("roc_auc,undefined\n"),
        }
        out
    }
}

/// Derive threshold metrics from confusion counts. ROC-AUC cannot be
/// derived from counts alone and stays absent.
pub fn report_from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> EvalReport {
    let total = tp + fp + fn_ + tn;
    let accuracy = if total > 0 {
        (tp + tn) as f64 / total as f64
    } else {
        0.0
    };
    let precision_defined = tp + fp > 0;
    let precision = if precision_defined {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall_defined = tp + fn_ > 0;
    let recall = if recall_defined {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        accuracy,
        precision,
        precision_defined,
        recall,
        recall_defined,
        f1,
        roc_auc: None,
    }
}

/// Rank-based ROC-AUC over `(score, is_positive)` pairs, ties handled by
/// midranks. `None` when either class is absent.
pub fn roc_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scored.iter().filter(|(_, p)| *p).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.partial_cmp(&scored[b].0).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scored[order[j]].0 == scored[order[i]].0 {
            j += 1;
        }
        // 1-based midrank for the tie group [i, j).
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let auc =
        (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Some(auc)
}

/// Evaluate a classifier on the dataset's test split: confusion counts at
/// the 0.5 threshold plus ROC-AUC over the blink probabilities.
pub fn evaluate(
    classifier: &BlinkClassifier,
    dataset: &SessionDataset,
) -> Result<EvalReport, TrainError> {
    let test = dataset.split(Split::Test);
    if test.is_empty() {
        return Err(TrainError::EmptySplit { split: "test" });
    }
    let mut scored = Vec::with_capacity(test.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for window in test {
        let features = extract_features(window)?;
        let (p_blink, _) = classifier.classify(&features)?;
        let actual = window.label == Label::Blink;
        let predicted = p_blink >= 0.5;
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
        scored.push((p_blink, actual));
    }
    let mut report = report_from_counts(tp, fp, fn_, tn);
    report.roc_auc = roc_auc(&scored);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force pair-counting oracle: the probability a random positive
    /// outranks a random negative, ties counting one half.
    fn roc_auc_pair_oracle(scored: &[(f64, bool)]) -> Option<f64> {
        let positives: Vec<f64> = scored.iter().filter(|(_, p)| *p).map(|(s, _)| *s).collect();
        let negatives: Vec<f64> = scored.iter().filter(|(_, p)| !*p).map(|(s, _)| *s).collect();
        if positives.is_empty() || negatives.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for &p in &positives {
            for &n in &negatives {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        Some(total / (positives.len() * negatives.len()) as f64)
    }

    #[test]
    fn fixture_counts_reproduce_reference_metrics_to_four_decimals() {
        let report = report_from_counts(14, 6, 13, 18);
        assert!((report.accuracy - 0.6275).abs() < 5e-5, "{}", report.accuracy);
        assert!((report.precision - 0.7000).abs() < 5e-5, "{}", report.precision);
        assert!((report.recall - 0.5185).abs() < 5e-5, "{}", report.recall);
        assert!((report.f1 - 0.5957).abs() < 5e-5, "{}", report.f1);
        assert!(report.roc_auc.is_none());
    }

    #[test]
    fn perfectly_separated_scores_have_unit_auc() {
        let scored: Vec<(f64, bool)> = (0..20)
            .map(|i| (i as f64 / 20.0, i >= 10))
            .collect();
        assert_eq!(roc_auc(&scored), Some(1.0));
    }

    #[test]
    fn reversed_scores_have_zero_auc() {
        let scored: Vec<(f64, bool)> = (0..20)
            .map(|i| (i as f64 / 20.0, i < 10))
            .collect();
        assert_eq!(roc_auc(&scored), Some(0.0));
    }

    #[test]
    fn all_tied_scores_give_half_auc() {
        let scored: Vec<(f64, bool)> = (0..10).map(|i| (0.5, i % 2 == 0)).collect();
        let auc = roc_auc(&scored).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_has_no_auc() {
        let scored: Vec<(f64, bool)> = (0..10).map(|i| (i as f64, true)).collect();
        assert_eq!(roc_auc(&scored), None);
    }

    #[test]
    fn midrank_auc_matches_pair_counting_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        for case in 0..50 {
            let n = rng.random_range(2..=200usize);
            let scored: Vec<(f64, bool)> = (0..n)
                .map(|_| {
                    // Coarse quantization forces plenty of ties.
                    let s = (rng.random_range(0.0..1.0f64) * 8.0).round() / 8.0;
                    (s, rng.random_bool(0.4))
                })
                .collect();
            let ours = roc_auc(&scored);
            let oracle = roc_auc_pair_oracle(&scored);
            match (ours, oracle) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!((a - b).abs() < 1e-12, "case {case}: {a} vs {b}")
                }
                other => panic!("case {case}: {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_all_rest_predictor_flags_undefined_precision() {
        let report = report_from_counts(0, 0, 12, 30);
        assert_eq!(report.recall, 0.0);
        assert!(report.recall_defined);
        assert_eq!(report.precision, 0.0);
        assert!(!report.precision_defined);
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn report_csv_includes_all_metrics() {
        let mut report = report_from_counts(14, 6, 13, 18);
        report.roc_auc = Some(0.75);
        let csv = report.to_csv();
        assert!(csv.starts_with("metric,value\n"));
        assert!(csv.contains("accuracy,"));
        assert!(csv.contains("roc_auc,0.75\n"));
    }
}
