/// Floor added to pooled probabilities before the logarithm.
pub const LOG_EPS: f32 = 1e-9;

/// `ω_j = total / (count_j · C)`.
pub fn class_weights_from(counts: &[u64], total: u64) -> Vec<f32> {
    let c = counts.len() as f64;
    counts
        .iter()
        .map(|&n| (total as f64 / (n as f64 * c)) as f32)
        .collect()
}

/// Cumulative label counts with one pseudo-count per class, so classes that
/// have not been seen get a finite (and the largest) weight.
#[derive(Clone, Debug)]
pub struct ClassWeightTracker {
    counts: Vec<u64>,
    seen: u64,
}

impl ClassWeightTracker {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![1; n_classes],
            seen: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// Adds a batch of labels and returns the weights for that batch.
    pub fn update(&mut self, labels: &[usize]) -> Vec<f32> {
        for &l in labels {
            self.counts[l] += 1;
        }
        self.seen += labels.len() as u64;
        self.weights()
    }

    pub fn weights(&self) -> Vec<f32> {
        // Pseudo-counts take part in the total so uniform counts give ω = 1.
        let total = self.counts.iter().sum();
        class_weights_from(&self.counts, total)
    }
}

/// `-(1/B) Σ_i ω_{y_i} log(pred_{i,y_i} + ε)` over `[B, C]` predictions, with
/// the gradient with respect to `pred`.
pub fn weighted_ce(pred: &[f32], labels: &[usize], weights: &[f32]) -> (f32, Vec<f32>) {
    let c = weights.len();
    let b = labels.len();
    debug_assert_eq!(pred.len(), b * c);
    let mut grad = vec![0.0f32; pred.len()];
    let mut loss = 0.0f64;
    for (i, &y) in labels.iter().enumerate() {
        let q = pred[i * c + y] + LOG_EPS;
        loss -= (weights[y] * q.ln()) as f64;
        grad[i * c + y] = -weights[y] / (q * b as f32);
    }
    ((loss / b as f64) as f32, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_examples() {
        let w = class_weights_from(&[3, 1], 4);
        assert!((w[0] - 4.0 / 6.0).abs() < 1e-6 && (w[1] - 2.0).abs() < 1e-6);
        assert!(class_weights_from(&[5; 8], 40)
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-6));

        let mut t = ClassWeightTracker::new(4);
        assert!(t.weights().iter().all(|&v| (v - 1.0).abs() < 1e-6));
        let w = t.update(&[0, 0, 0, 1, 1, 2]);
        assert!(w.iter().all(|v| v.is_finite()));
        let max = w.iter().cloned().fold(f32::MIN, f32::max);
        assert_eq!(w[3], max);
        assert_eq!(t.seen(), 6);
    }

    #[test]
    fn cross_entropy_examples() {
        let (l, _) = weighted_ce(&[0.5, 0.5], &[0], &[1.0, 1.0]);
        assert!((l - std::f32::consts::LN_2).abs() < 1e-6);
        let (l, _) = weighted_ce(&[0.0, 1.0, 1.0, 0.0], &[1, 0], &[1.0, 3.0]);
        assert!(l.abs() < 1e-6);
        let pred = [0.2, 0.3, 0.5, 0.6, 0.1, 0.3];
        let (a, _) = weighted_ce(&pred, &[2, 0], &[1.0; 3]);
        let plain = -(0.5f32.ln() + 0.6f32.ln()) / 2.0;
        assert!((a - plain).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_gradient() {
        let pred = [0.2f32, 0.3, 0.5, 0.6, 0.1, 0.3];
        let (labels, w) = ([1, 2], [0.5, 2.0, 1.5]);
        let (_, g) = weighted_ce(&pred, &labels, &w);
        for i in 0..pred.len() {
            let h = 1e-3;
            let mut up = pred;
            up[i] += h;
            let mut down = pred;
            down[i] -= h;
            let num =
                (weighted_ce(&up, &labels, &w).0 - weighted_ce(&down, &labels, &w).0) / (2.0 * h);
            assert!(
                (num - g[i]).abs() < 1e-2 * g[i].abs().max(1.0),
                "{i}: {num} vs {}",
                g[i]
            );
        }
    }
}
