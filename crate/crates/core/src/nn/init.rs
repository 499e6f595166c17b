use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;

/// Leaky-ReLU slope assumed by the gain.
const NEGATIVE_SLOPE: f64 = 0.01;

/// Kaiming-normal weights for a `[cout, cin, ...]` kernel, fan-in mode.
pub fn kaiming_normal<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let fan_in: usize = shape.iter().skip(1).product();
    let gain = (2.0 / (1.0 + NEGATIVE_SLOPE * NEGATIVE_SLOPE)).sqrt();
    let std = gain / (fan_in.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = normal.sample(rng) as f32;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::stream_rng;

    #[test]
    fn empirical_std_matches_fan_in() {
        let mut rng = stream_rng(7, 0);
        let t = kaiming_normal(&[64, 16, 3, 3, 3], &mut rng);
        let n = t.len() as f64;
        let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = t
            .data()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        let want = 2.0 / (1.0 + 1e-4) / 432.0;
        assert!(mean.abs() < 0.005);
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    }
}
