use crate::error::{Error, Result};

/// K×K counts; rows are the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::param("a confusion matrix needs at least 2 classes"));
        }
        Ok(Self {
            classes,
            counts: vec![0; classes * classes],
        })
    }

    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if classes < 2 || counts.len() != classes * classes {
            return Err(Error::dim(format!(
                "{} counts do not form a {classes}×{classes} matrix",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn from_pairs(classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut cm = Self::new(classes)?;
        for (t, p) in pairs {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::Bounds(format!(
                "class pair ({truth}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    /// `(tp, fp, fn, tn)` with `positive` against the rest.
    pub fn one_vs_rest(&self, positive: usize) -> (u64, u64, u64, u64) {
        let tp = self.get(positive, positive);
        let col: u64 = (0..self.classes).map(|t| self.get(t, positive)).sum();
        let row: u64 = (0..self.classes).map(|p| self.get(positive, p)).sum();
        let (fp, fn_) = (col - tp, row - tp);
        (tp, fp, fn_, self.total() - tp - fp - fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced a score to 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64, degenerate: &mut bool) -> f64 {
    if p + r == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn require_counts(cm: &ConfusionMatrix) -> Result<()> {
    if cm.total() == 0 {
        return Err(Error::param("confusion matrix is empty"));
    }
    Ok(())
}

/// Accuracy is trace/total (the usual (TP+TN)/total for two classes);
/// precision, recall and F1 treat `positive` as the positive class.
pub fn classification_scores(cm: &ConfusionMatrix, positive: usize) -> Result<ClassScores> {
    require_counts(cm)?;
    if positive >= cm.classes() {
        return Err(Error::Bounds(format!("class {positive} of {}", cm.classes())));
    }
    let mut degenerate = false;
    let (tp, fp, fn_, _) = cm.one_vs_rest(positive);
    let accuracy = cm.trace() as f64 / cm.total() as f64;
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let recall = ratio(tp, tp + fn_, &mut degenerate);
    let f1 = f1(precision, recall, &mut degenerate);
    Ok(ClassScores {
        accuracy,
        precision,
        recall,
        f1,
        degenerate,
    })
}

/// Unweighted mean of the per-class precision, recall and F1.
pub fn macro_scores(cm: &ConfusionMatrix) -> Result<ClassScores> {
    require_counts(cm)?;
    let k = cm.classes() as f64;
    let mut out = ClassScores {
        accuracy: cm.trace() as f64 / cm.total() as f64,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        degenerate: false,
    };
    for c in 0..cm.classes() {
        let s = classification_scores(cm, c)?;
        out.precision += s.precision / k;
        out.recall += s.recall / k;
        out.f1 += s.f1 / k;
        out.degenerate |= s.degenerate;
    }
    Ok(out)
}
