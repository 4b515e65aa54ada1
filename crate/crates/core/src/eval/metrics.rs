use serde::{Deserialize, Serialize};

/// `counts[i][j]` = rows whose true class is `classes[i]` and predicted class
/// is `classes[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Builds the matrix over the sorted union of true and predicted labels.
    pub fn from_labels<S: AsRef<str>, P: AsRef<str>>(truth: &[S], pred: &[P]) -> Self {
        assert_eq!(truth.len(), pred.len(), "label vectors differ in length");
        let mut classes: Vec<String> = truth
            .iter()
            .map(|s| s.as_ref().to_string())
            .chain(pred.iter().map(|s| s.as_ref().to_string()))
            .collect();
        classes.sort();
        classes.dedup();
        Self::with_classes(classes, truth, pred)
    }

    /// Builds the matrix over a fixed class list; labels outside it are ignored.
    pub fn with_classes<S: AsRef<str>, P: AsRef<str>>(classes: Vec<String>, truth: &[S], pred: &[P]) -> Self {
        let k = classes.len();
        let mut counts = vec![vec![0u64; k]; k];
        let pos = |s: &str| classes.iter().position(|c| c == s);
        for (t, p) in truth.iter().zip(pred) {
            if let (Some(i), Some(j)) = (pos(t.as_ref()), pos(p.as_ref())) {
                counts[i][j] += 1;
            }
        }
        ConfusionMatrix { classes, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest F1 of class index `c`.
    pub fn class_f1(&self, c: usize) -> f64 {
        let tp = self.counts[c][c] as f64;
        let predicted: u64 = self.counts.iter().map(|r| r[c]).sum();
        let actual: u64 = self.counts[c].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum::<u64>() as f64 / total as f64
    }
}

/// F1 of `positive`; 0 when the class is absent or precision + recall = 0.
pub fn f1_binary(cm: &ConfusionMatrix, positive: &str) -> f64 {
    cm.classes
        .iter()
        .position(|c| c == positive)
        .map_or(0.0, |c| cm.class_f1(c))
}

/// Unweighted mean of per-class F1.
pub fn f1_macro(cm: &ConfusionMatrix) -> f64 {
    let k = cm.classes.len();
    if k == 0 {
        return 0.0;
    }
    (0..k).map(|c| cm.class_f1(c)).sum::<f64>() / k as f64
}

/// Scoring rule for model selection and reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Metric {
    F1Binary { positive: String },
    F1Macro,
}

impl Metric {
    pub fn binary(positive: impl Into<String>) -> Self {
        Metric::F1Binary {
            positive: positive.into(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::F1Binary { .. } => "f1_binary",
            Metric::F1Macro => "f1_macro",
        }
    }

    pub fn score(&self, cm: &ConfusionMatrix) -> f64 {
        match self {
            Metric::F1Binary { positive } => f1_binary(cm, positive),
            Metric::F1Macro => f1_macro(cm),
        }
    }
}
