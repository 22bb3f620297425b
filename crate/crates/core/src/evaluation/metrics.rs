use std::fmt::Write as _;

use super::confusion::ConfusionMatrix;
use super::timing::Mpe;

/// Per-family scores in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMetrics {
    pub family: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(TP + TN) / (TP + FN + FP + TN)` where TN counts the correct
    /// predictions of every other family.
    pub accuracy: f64,
    pub support: u64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

fn pct(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn family_metrics(cm: &ConfusionMatrix, i: usize) -> FamilyMetrics {
    let tp = cm.get(i, i);
    let fn_ = cm.row_sum(i) - tp;
    let fp = cm.col_sum(i) - tp;
    let tn = cm.trace() - tp;
    let mut zero = false;
    let precision = pct(tp, tp + fp, &mut zero);
    let recall = pct(tp, tp + fn_, &mut zero);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        zero = true;
        0.0
    };
    let accuracy = pct(tp + tn, tp + fn_ + fp + tn, &mut zero);
    FamilyMetrics {
        family: cm.family_names()[i].clone(),
        precision,
        recall,
        f1,
        accuracy,
        support: tp + fn_,
        zero_division: zero,
    }
}

/// Confusion matrix with the derived per-family and aggregate scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub families: Vec<FamilyMetrics>,
    /// Support-weighted means of the per-family scores.
    pub weighted: WeightedMetrics,
    /// trace / total, in percent.
    pub overall_accuracy: f64,
    /// Test fold of every sample, when produced by cross-validation.
    pub fold_assignments: Vec<usize>,
    pub mpe: Option<Mpe>,
}

pub fn weighted_report(cm: &ConfusionMatrix) -> EvalReport {
    let families: Vec<FamilyMetrics> = (0..cm.n()).map(|i| family_metrics(cm, i)).collect();
    let total = cm.total();
    let mut weighted = WeightedMetrics::default();
    if total > 0 {
        for f in &families {
            let w = f.support as f64 / total as f64;
            weighted.precision += w * f.precision;
            weighted.recall += w * f.recall;
            weighted.f1 += w * f.f1;
            weighted.accuracy += w * f.accuracy;
        }
    }
    let overall_accuracy = if total > 0 {
        100.0 * cm.trace() as f64 / total as f64
    } else {
        0.0
    };
    EvalReport {
        confusion: cm.clone(),
        families,
        weighted,
        overall_accuracy,
        fold_assignments: Vec::new(),
        mpe: None,
    }
}

impl EvalReport {
    /// Machine-readable per-family rows plus the weighted average. Timing is
    /// kept out so identical runs give identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,precision,recall,f1,accuracy,support,zero_division\n");
        for f in &self.families {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4},{},{}",
                f.family, f.precision, f.recall, f.f1, f.accuracy, f.support, f.zero_division
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            out,
            "weighted avg,{:.4},{:.4},{:.4},{:.4},{},false",
            w.precision,
            w.recall,
            w.f1,
            w.accuracy,
            self.confusion.total()
        );
        out
    }

    /// Fixed-width table, one decimal.
    pub fn to_text(&self) -> String {
        let name_w = self
            .families
            .iter()
            .map(|f| f.family.len())
            .chain([14])
            .max()
            .unwrap_or(14);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>9}  {:>6}  {:>8}  {:>8}  {:>7}",
            "Malware Family", "Precision", "Recall", "F1 Score", "Accuracy", "Support"
        );
        for f in &self.families {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>9.1}  {:>6.1}  {:>8.1}  {:>8.1}  {:>7}{}",
                f.family,
                f.precision,
                f.recall,
                f.f1,
                f.accuracy,
                f.support,
                if f.zero_division { "  *" } else { "" }
            );
        }
        let w = &self.weighted;
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>9.1}  {:>6.1}  {:>8.1}  {:>8.1}  {:>7}",
            "weighted avg",
            w.precision,
            w.recall,
            w.f1,
            w.accuracy,
            self.confusion.total()
        );
        let _ = writeln!(out, "overall accuracy: {:.1}%", self.overall_accuracy);
        if self.families.iter().any(|f| f.zero_division) {
            let _ = writeln!(out, "* zero denominator, reported as 0");
        }
        out
    }

    pub fn folds_csv(&self) -> String {
        let mut out = String::from("sample,fold\n");
        for (i, f) in self.fold_assignments.iter().enumerate() {
            let _ = writeln!(out, "{i},{f}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn identity_is_perfect() {
        let cm = ConfusionMatrix::from_counts(names(3), vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 9]]).unwrap();
        for i in 0..3 {
            let m = family_metrics(&cm, i);
            assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (100.0, 100.0, 100.0, 100.0));
        }
    }

    #[test]
    fn empty_family_is_zero_and_flagged() {
        let cm = ConfusionMatrix::from_counts(names(2), vec![vec![3, 0], vec![0, 0]]).unwrap();
        let m = family_metrics(&cm, 1);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.zero_division);
        assert!(weighted_report(&cm).to_text().contains('*'));
    }

    #[test]
    fn single_family_weighted_equals_family() {
        let cm = ConfusionMatrix::from_counts(names(1), vec![vec![7]]).unwrap();
        let r = weighted_report(&cm);
        assert_eq!(r.weighted.precision, r.families[0].precision);
        assert_eq!(r.weighted.recall, r.families[0].recall);
    }

    #[test]
    fn equal_support_is_arithmetic_mean() {
        let cm = ConfusionMatrix::from_counts(names(2), vec![vec![8, 2], vec![4, 6]]).unwrap();
        let r = weighted_report(&cm);
        let mean = |f: fn(&FamilyMetrics) -> f64| (f(&r.families[0]) + f(&r.families[1])) / 2.0;
        assert!((r.weighted.precision - mean(|m| m.precision)).abs() < 1e-12);
        assert!((r.weighted.f1 - mean(|m| m.f1)).abs() < 1e-12);
        // precision 8/12, recall 8/10
        assert!((r.families[0].precision - 100.0 * 8.0 / 12.0).abs() < 1e-12);
        assert!((r.families[0].recall - 80.0).abs() < 1e-12);
        // TN for family 0 is family 1's 6 correct predictions: (8 + 6) / (8 + 2 + 4 + 6)
        assert!((r.families[0].accuracy - 70.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_weighted_row() {
        let cm = ConfusionMatrix::from_counts(names(2), vec![vec![1, 0], vec![0, 1]]).unwrap();
        let csv = weighted_report(&cm).to_csv();
        assert!(csv.lines().last().unwrap().starts_with("weighted avg,100.0000"));
    }

    proptest! {
        #[test]
        fn metric_identities(cells in proptest::collection::vec(0u64..50, 16)) {
            let counts: Vec<Vec<u64>> = cells.chunks(4).map(|r| r.to_vec()).collect();
            let cm = ConfusionMatrix::from_counts(names(4), counts.clone()).unwrap();
            let r = weighted_report(&cm);
            let tp_sum: u64 = (0..4).map(|i| cm.get(i, i)).sum();
            prop_assert_eq!(tp_sum, cm.trace());
            for i in 0..4 {
                prop_assert_eq!(r.families[i].support, counts[i].iter().sum::<u64>());
            }
            if cm.total() > 0 {
                // weighted recall is the micro accuracy
                prop_assert!((r.weighted.recall - r.overall_accuracy).abs() < 1e-9);
            }
        }
    }
}
