//! Multinomial logistic regression over sparse tf-idf vectors, trained by
//! full-batch gradient descent from zero weights.

use serde::{Deserialize, Serialize};

use super::features::SparseVector;
use super::panel::ErcPanel;
use super::PanelDistribution;

const K: usize = ErcPanel::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 300,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training needs at least two distinct labels, found {0}")]
    TooFewLabels(usize),
    #[error("training example {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFinite { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("feature vector has dimension {found}, model expects {expected}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub params: TrainParams,
    #[serde(with = "crate::decimal::scalar")]
    pub final_loss: f64,
    /// Objective value at the start of each epoch.
    #[serde(with = "crate::decimal::vec")]
    pub loss_history: Vec<f64>,
}

/// Weights (25 x dim, row-major by panel) and biases of the softmax model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelModel {
    pub dim: usize,
    #[serde(with = "crate::decimal::matrix")]
    pub weights: Vec<Vec<f64>>,
    #[serde(with = "crate::decimal::vec")]
    pub bias: Vec<f64>,
    pub meta: TrainingMeta,
}

impl PanelModel {
    pub fn zeros(dim: usize) -> PanelModel {
        PanelModel {
            dim,
            weights: vec![vec![0.0; dim]; K],
            bias: vec![0.0; K],
            meta: TrainingMeta {
                params: TrainParams::default(),
                final_loss: f64::NAN,
                loss_history: Vec::new(),
            },
        }
    }

    pub fn logits(&self, x: &SparseVector) -> Result<[f64; K], DimensionMismatch> {
        if x.dim != self.dim {
            return Err(DimensionMismatch {
                expected: self.dim,
                found: x.dim,
            });
        }
        let mut z = [0.0; K];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.weights[k];
            *zk = self.bias[k] + x.entries.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        Ok(z)
    }

    pub fn is_finite(&self) -> bool {
        self.bias.iter().chain(self.weights.iter().flatten()).all(|w| w.is_finite())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Gradient of the training objective with respect to weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Mean cross-entropy plus `(l2 / 2) * ||W||^2` (bias unregularized), and
/// its gradient.
pub fn objective(model: &PanelModel, examples: &[(SparseVector, ErcPanel)], l2: f64) -> (f64, Gradient) {
    let n = examples.len() as f64;
    let mut grad = Gradient {
        weights: model.weights.iter().map(|row| row.iter().map(|w| l2 * w).collect()).collect(),
        bias: vec![0.0; K],
    };
    let mut loss = 0.5 * l2 * model.weights.iter().flatten().map(|w| w * w).sum::<f64>();
    for (x, label) in examples {
        let z = model.logits(x).expect("dimension checked by caller");
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + z.iter().map(|zk| (zk - max).exp()).sum::<f64>().ln();
        loss += (log_sum - z[label.index()]) / n;
        for (k, zk) in z.iter().enumerate() {
            let residual = ((zk - log_sum).exp() - f64::from(u8::from(k == label.index()))) / n;
            grad.bias[k] += residual;
            let row = &mut grad.weights[k];
            for &(j, v) in &x.entries {
                row[j] += residual * v;
            }
        }
    }
    (loss, grad)
}

/// Trains from zero weights by full-batch gradient descent.
pub fn train(examples: &[(SparseVector, ErcPanel)], dim: usize, params: TrainParams) -> Result<PanelModel, TrainError> {
    let mut labels: Vec<ErcPanel> = examples.iter().map(|(_, p)| *p).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(TrainError::TooFewLabels(labels.len()));
    }
    if let Some((index, (x, _))) = examples.iter().enumerate().find(|(_, (x, _))| x.dim != dim) {
        return Err(TrainError::DimensionMismatch {
            index,
            expected: dim,
            found: x.dim,
        });
    }

    let mut model = PanelModel::zeros(dim);
    let mut history = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let (loss, grad) = objective(&model, examples, params.l2);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { epoch });
        }
        history.push(loss);
        for (row, grow) in model.weights.iter_mut().zip(&grad.weights) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= params.learning_rate * g;
            }
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= params.learning_rate * g;
        }
    }
    let (final_loss, _) = objective(&model, examples, params.l2);
    if !final_loss.is_finite() || !model.is_finite() {
        return Err(TrainError::NonFinite { epoch: params.epochs });
    }
    model.meta = TrainingMeta {
        params,
        final_loss,
        loss_history: history,
    };
    Ok(model)
}

/// Softmax distribution over panels; the argmax (ties to the lower panel
/// code) is assigned when its probability reaches `threshold`.
pub fn predict(
    model: &PanelModel,
    record_id: &str,
    x: &SparseVector,
    threshold: f64,
) -> Result<PanelDistribution, DimensionMismatch> {
    let probabilities = softmax(&model.logits(x)?);
    Ok(PanelDistribution::from_probabilities(record_id, probabilities, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(code: &str) -> ErcPanel {
        code.parse().unwrap()
    }

    fn vec1(dim: usize, entries: &[(usize, f64)]) -> SparseVector {
        SparseVector {
            dim,
            entries: entries.to_vec(),
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = PanelModel::zeros(3);
        let d = predict(&model, "r", &vec1(3, &[(0, 1.0)]), 0.05).unwrap();
        assert!(d.probabilities.iter().all(|&p| (p - 0.04).abs() < 1e-15));
        assert_eq!(d.assigned, None);
    }

    #[test]
    fn dominant_bias_wins() {
        let mut model = PanelModel::zeros(2);
        model.bias[panel("PE3").index()] = 10.0;
        let d = predict(&model, "r", &SparseVector::zeros(2), 0.1).unwrap();
        assert_eq!(d.assigned, Some(panel("PE3")));
    }

    #[test]
    fn softmax_shift_invariance() {
        let z: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let shifted: Vec<f64> = z.iter().map(|v| v + 123.456).collect();
        for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = PanelModel::zeros(3);
        assert_eq!(
            predict(&model, "r", &SparseVector::zeros(4), 0.1).unwrap_err(),
            DimensionMismatch { expected: 3, found: 4 }
        );
        let ex = vec![(vec1(3, &[]), panel("PE1")), (vec1(4, &[]), panel("PE2"))];
        assert!(matches!(train(&ex, 3, TrainParams::default()), Err(TrainError::DimensionMismatch { index: 1, .. })));
    }

    #[test]
    fn needs_two_labels() {
        let ex = vec![(vec1(1, &[(0, 1.0)]), panel("LS1"))];
        assert_eq!(train(&ex, 1, TrainParams::default()).unwrap_err(), TrainError::TooFewLabels(1));
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let ex = vec![(vec1(1, &[(0, 1.0)]), panel("LS1")), (vec1(1, &[(0, -1.0)]), panel("LS2"))];
        let params = TrainParams {
            epochs: 2000,
            learning_rate: 1e300,
            l2: 1.0,
            seed: 0,
        };
        assert!(matches!(train(&ex, 1, params), Err(TrainError::NonFinite { .. })));
    }

    #[test]
    fn strong_l2_flattens_towards_uniform() {
        let ex = vec![(vec1(2, &[(0, 1.0)]), panel("PE1")), (vec1(2, &[(1, 1.0)]), panel("SH6"))];
        let params = TrainParams {
            epochs: 50,
            learning_rate: 1e-6,
            l2: 1e6,
            seed: 0,
        };
        let model = train(&ex, 2, params).unwrap();
        assert!(model.weights.iter().flatten().all(|w| w.abs() < 1e-6));
        let d = predict(&model, "r", &ex[0].0, 0.1).unwrap();
        assert!(d.probabilities.iter().all(|p| (p - 0.04).abs() < 1e-3));
    }
}
