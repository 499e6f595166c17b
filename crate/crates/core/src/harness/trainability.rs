use std::io::Write;

use crate::error::{Error, Result};

use super::metrics::csv_writer;

/// Relative drop between the mean of the first and last windows of a loss
/// trace, clamped to `[0, 1]`. The window is 1% of the trace, at least 10
/// points, and never more than the trace.
pub fn trainability_metric(trace: &[f32]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::param("empty loss trace"));
    }
    if trace.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::param("losses must be finite and positive"));
    }
    let window = (trace.len() / 100).max(10).min(trace.len());
    let mean = |w: &[f32]| w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64;
    let first = mean(&trace[..window]);
    let last = mean(&trace[trace.len() - window..]);
    Ok(((first - last) / first).clamp(0.0, 1.0))
}

/// One cell of the `(L, p_train)` trainability grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainabilityPoint {
    pub decoder: String,
    pub l: usize,
    pub p_train: f64,
    pub trainability: f64,
}

pub fn write_trainability<W: Write>(w: W, points: &[TrainabilityPoint]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["decoder", "L", "p_train", "trainability"])?;
    for pt in points {
        out.write_record([
            pt.decoder.clone(),
            pt.l.to_string(),
            pt.p_train.to_string(),
            pt.trainability.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_traces() {
        assert_eq!(trainability_metric(&[2.0; 500]).unwrap(), 0.0);
        let mut halves = vec![1.0f32; 1000];
        halves[500..].fill(0.5);
        assert!((trainability_metric(&halves).unwrap() - 0.5).abs() < 1e-12);
        let to_zero: Vec<f32> = (0..2000)
            .map(|i| 1e-7f32.max(1.0 - i as f32 / 1900.0))
            .collect();
        assert!(trainability_metric(&to_zero).unwrap() > 0.999);
    }

    #[test]
    fn rising_loss_clamps_and_short_traces_work() {
        let rising: Vec<f32> = (1..=50).map(|i| i as f32).collect();
        assert_eq!(trainability_metric(&rising).unwrap(), 0.0);
        assert_eq!(trainability_metric(&[3.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_traces() {
        assert!(trainability_metric(&[]).is_err());
        assert!(trainability_metric(&[1.0, 0.0]).is_err());
        assert!(trainability_metric(&[1.0, f32::NAN]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn always_in_unit_interval(trace in proptest::collection::vec(1e-6f32..100.0, 1..400)) {
                let t = trainability_metric(&trace).unwrap();
                prop_assert!((0.0..=1.0).contains(&t));
            }
        }
    }
}
