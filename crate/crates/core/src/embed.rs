//! Exact t-SNE: Gaussian input affinities calibrated to a perplexity, a
//! Student-t output kernel, and momentum gradient descent on KL(P || Q).

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

const MAX_BISECTION_STEPS: usize = 50;
const PERPLEXITY_TOLERANCE: f64 = 1e-7;
const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const INIT_STD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("need at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} must be positive and below the point count {points}")]
    BadPerplexity { perplexity: f64, points: usize },
    #[error("row {row} has dimension {found}, expected {expected}")]
    RaggedInput { row: usize, expected: usize, found: usize },
    #[error("all distances from point {row} are zero; cannot calibrate its affinities")]
    DegenerateRow { row: usize },
    #[error("coordinates became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
}

/// Symmetric joint probabilities over point pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    p: Vec<f64>,
    pub perplexity: f64,
    /// Gaussian bandwidth chosen for each point.
    pub sigmas: Vec<f64>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    /// Builds from an explicit dense matrix, checking shape only.
    pub fn from_dense(rows: Vec<Vec<f64>>) -> AffinityMatrix {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "square matrix required");
        AffinityMatrix {
            n,
            p: rows.into_iter().flatten().collect(),
            perplexity: f64::NAN,
            sigmas: Vec::new(),
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

fn squared_distances(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dist: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    d
}

/// Conditional distribution p(.|i) for precision `beta = 1 / (2 sigma^2)`
/// and its Shannon entropy in nats.
pub fn conditional_row(sq_dists: &[f64], row: usize, beta: f64) -> (Vec<f64>, f64) {
    let min = sq_dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != row)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = sq_dists
        .iter()
        .enumerate()
        .map(|(j, &d)| if j == row { 0.0 } else { (-beta * (d - min)).exp() })
        .collect();
    let sum: f64 = p.iter().sum();
    let mut entropy = 0.0;
    for x in &mut p {
        *x /= sum;
        if *x > 0.0 {
            entropy -= *x * x.ln();
        }
    }
    (p, entropy)
}

/// Gaussian affinities with per-point bandwidths found by bisection so each
/// conditional distribution has the target perplexity, symmetrized as
/// `(p(j|i) + p(i|j)) / 2n`.
pub fn compute_affinities(vectors: &[Vec<f64>], perplexity: f64) -> Result<AffinityMatrix, EmbedError> {
    let n = vectors.len();
    if n < 4 {
        return Err(EmbedError::TooFewPoints(n));
    }
    if !(perplexity > 0.0 && perplexity < n as f64) {
        return Err(EmbedError::BadPerplexity { perplexity, points: n });
    }
    let dim = vectors[0].len();
    if let Some((row, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(EmbedError::RaggedInput {
            row,
            expected: dim,
            found: v.len(),
        });
    }
    let d = squared_distances(vectors);
    let target = perplexity.ln();
    let mut conditional = vec![0.0; n * n];
    let mut sigmas = Vec::with_capacity(n);
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        if row.iter().enumerate().all(|(j, &x)| j == i || x == 0.0) {
            return Err(EmbedError::DegenerateRow { row: i });
        }
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let (mut p, mut h) = conditional_row(row, i, beta);
        for _ in 0..MAX_BISECTION_STEPS {
            if (h.exp() - perplexity).abs() < PERPLEXITY_TOLERANCE {
                break;
            }
            if h > target {
                // too flat: sharpen
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            (p, h) = conditional_row(row, i, beta);
        }
        conditional[i * n..(i + 1) * n].copy_from_slice(&p);
        sigmas.push((1.0 / (2.0 * beta)).sqrt());
    }
    let mut p = vec![0.0; n * n];
    let scale = 2.0 * n as f64;
    for i in 0..n {
        for j in i + 1..n {
            let v = (conditional[i * n + j] + conditional[j * n + i]) / scale;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    Ok(AffinityMatrix { n, p, perplexity, sigmas })
}

/// 2-D embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout2D {
    pub coordinates: Vec<[f64; 2]>,
    pub final_kl: f64,
    /// KL at the first iteration after early exaggeration stops, when the
    /// run got that far.
    pub kl_after_exaggeration: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// Student-t kernel values `1 / (1 + |yi - yj|^2)` (zero diagonal) and their sum.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let q = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = q;
            num[j * n + i] = q;
            sum += 2.0 * q;
        }
    }
    (num, sum)
}

/// `sum_{i != j} P_ij ln(P_ij / Q_ij)`, skipping zero `P_ij`.
pub fn kl_divergence(p: &AffinityMatrix, coordinates: &[[f64; 2]]) -> f64 {
    let n = p.len();
    assert_eq!(n, coordinates.len(), "layout and affinities disagree on point count");
    let (num, sum) = student_kernel(coordinates);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > 0.0 {
                kl += pij * (pij / (num[i * n + j] / sum)).ln();
            }
        }
    }
    kl
}

fn recenter(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mean = y.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    let mean = [mean[0] / n, mean[1] / n];
    for p in y.iter_mut() {
        p[0] -= mean[0];
        p[1] -= mean[1];
    }
}

/// Gradient descent on KL(P || Q): early exaggeration 12 and momentum 0.5
/// for the first 250 iterations, then momentum 0.8; Gaussian start with
/// standard deviation 1e-4; recentred every iteration.
pub fn tsne(p: &AffinityMatrix, params: TsneParams) -> Result<Layout2D, EmbedError> {
    let n = p.len();
    let mut rng = SeededRng::new(params.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.standard_normal() * INIT_STD, rng.standard_normal() * INIT_STD])
        .collect();
    recenter(&mut y);
    let mut velocity = vec![[0.0; 2]; n];
    let mut kl_after_exaggeration = None;
    for iteration in 0..params.iterations {
        let exaggerated = iteration < EXAGGERATION_ITERS;
        if iteration == EXAGGERATION_ITERS {
            kl_after_exaggeration = Some(kl_divergence(p, &y));
        }
        let (exaggeration, momentum) = if exaggerated {
            (EXAGGERATION, INITIAL_MOMENTUM)
        } else {
            (1.0, FINAL_MOMENTUM)
        };
        let (num, sum) = student_kernel(&y);
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let coeff = 4.0 * (exaggeration * p.get(i, j) - q / sum) * q;
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                velocity[i][d] = momentum * velocity[i][d] - params.learning_rate * grad[d];
            }
        }
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
        }
        recenter(&mut y);
        if y.iter().flatten().any(|c| !c.is_finite()) {
            return Err(EmbedError::Diverged { iteration });
        }
    }
    Ok(Layout2D {
        final_kl: kl_divergence(p, &y),
        coordinates: y,
        kl_after_exaggeration,
        iterations: params.iterations,
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
    }

    #[test]
    fn square_affinities_respect_symmetry() {
        let p = compute_affinities(&square(), 2.0).unwrap();
        let side = p.get(0, 1);
        let diag = p.get(0, 2);
        for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            assert!((p.get(i, j) - side).abs() < 1e-9);
        }
        assert!((p.get(1, 3) - diag).abs() < 1e-9);
        assert!(side > diag);
        assert!((p.total() - 1.0).abs() < 1e-6);
        for i in 0..4 {
            assert_eq!(p.get(i, i), 0.0);
            for j in 0..4 {
                assert_eq!(p.get(i, j), p.get(j, i));
            }
        }
    }

    #[test]
    fn input_errors() {
        assert_eq!(compute_affinities(&square()[..3], 2.0).unwrap_err(), EmbedError::TooFewPoints(3));
        assert!(matches!(compute_affinities(&square(), 4.0), Err(EmbedError::BadPerplexity { .. })));
        let mut dup = square();
        dup.push(vec![5.0, 5.0]);
        dup[1] = vec![0.0, 0.0];
        dup[2] = vec![0.0, 0.0];
        dup[3] = vec![0.0, 0.0];
        dup[4] = vec![0.0, 0.0];
        assert_eq!(compute_affinities(&dup, 2.0).unwrap_err(), EmbedError::DegenerateRow { row: 0 });
        let mut ragged = square();
        ragged[2] = vec![1.0];
        assert!(matches!(compute_affinities(&ragged, 2.0), Err(EmbedError::RaggedInput { row: 2, .. })));
    }

    #[test]
    fn kl_is_zero_when_p_equals_q() {
        let y = [[0.0, 0.0], [1.0, 0.3], [-0.4, 2.0], [0.7, -1.1]];
        let (num, sum) = student_kernel(&y);
        let rows = (0..4).map(|i| (0..4).map(|j| num[i * 4 + j] / sum).collect()).collect();
        let p = AffinityMatrix::from_dense(rows);
        assert!(kl_divergence(&p, &y).abs() < 1e-9);
    }

    #[test]
    fn tsne_is_deterministic_and_centred() {
        let p = compute_affinities(&square(), 2.0).unwrap();
        let params = TsneParams {
            iterations: 300,
            learning_rate: 50.0,
            seed: 3,
        };
        let a = tsne(&p, params).unwrap();
        let b = tsne(&p, params).unwrap();
        assert_eq!(a, b);
        for d in 0..2 {
            assert!(a.coordinates.iter().map(|c| c[d]).sum::<f64>().abs() / 4.0 < 1e-6);
        }
        assert!(a.kl_after_exaggeration.is_some());
        assert!(a.final_kl >= 0.0);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let p = compute_affinities(&square(), 2.0).unwrap();
        let params = TsneParams {
            iterations: 50,
            learning_rate: 1e308,
            seed: 1,
        };
        assert!(matches!(tsne(&p, params), Err(EmbedError::Diverged { .. })));
    }
}
