use crate::code::ToricCode;
use crate::decoders::Decoder;
use crate::error::{Error, Result};
use crate::nn::LOG_EPS;
use crate::noise::{draw_sample, stream_rng, NoiseModel};

use super::metrics::MetricsRow;

/// RNG stream of evaluation samples, so every decoder sees the same set for
/// a given seed.
pub const EVAL_STREAM: u64 = 2;

const EVAL_CHUNK: usize = 1024;

/// Fraction of positions where the two label sequences agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Decodes `n` fresh samples at error rate `p`. Timing is left empty so the
/// row is reproducible; see `bench_runtime` for measurements.
pub fn eval_accuracy(
    decoder: &dyn Decoder,
    code: &ToricCode,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<MetricsRow> {
    if n == 0 {
        return Err(Error::param("evaluation needs at least one sample"));
    }
    let noise = NoiseModel::new(p)?;
    let mut rng = stream_rng(seed, EVAL_STREAM);
    let (mut hits, mut nll, mut has_loss) = (0usize, 0.0f64, true);
    let mut left = n;
    while left > 0 {
        let k = left.min(EVAL_CHUNK);
        left -= k;
        let (syndromes, labels): (Vec<_>, Vec<_>) = (0..k)
            .map(|_| {
                let s = draw_sample(code, &noise, &mut rng);
                (s.syndrome, s.label.index())
            })
            .unzip();
        for (r, &truth) in decoder.decode_batch(&syndromes)?.iter().zip(&labels) {
            hits += usize::from(r.label.index() == truth);
            match &r.distribution {
                Some(d) if has_loss => nll -= (d[truth] + LOG_EPS as f64).ln(),
                _ => has_loss = false,
            }
        }
    }
    Ok(MetricsRow {
        decoder: decoder.name().to_string(),
        l: code.lattice().l,
        p,
        p_train: None,
        samples: n,
        accuracy: hits as f64 / n as f64,
        loss: has_loss.then(|| nll / n as f64),
        wall_time_per_decode: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{DecodeResult, ZeroDecoder};
    use crate::noise::{sample_batch, LogicalLabel, Syndrome};
    use std::collections::HashMap;
    use std::time::Duration;

    /// Knows the answer for every syndrome of one sample set.
    struct Cheat(HashMap<String, LogicalLabel>);

    impl Decoder for Cheat {
        fn name(&self) -> &str {
            "cheat"
        }
        fn supports_variable_l(&self) -> bool {
            false
        }
        fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
            Ok(DecodeResult {
                label: self.0[&s.to_hex()],
                distribution: None,
                duration: Duration::ZERO,
            })
        }
    }

    #[test]
    fn arithmetic() {
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn oracle_scores_one() {
        // At p this low, distinct labels almost never share a syndrome, and
        // the cheat table keeps the first label seen.
        let code = ToricCode::new(3, 3).unwrap();
        let samples = sample_batch(&code, &NoiseModel::new(0.005).unwrap(), 9, EVAL_STREAM, 300);
        let mut table = HashMap::new();
        for s in &samples {
            table.entry(s.syndrome.to_hex()).or_insert(s.label);
        }
        let row = eval_accuracy(&Cheat(table), &code, 0.005, 300, 9).unwrap();
        assert_eq!(row.accuracy, 1.0);
        assert_eq!(row.loss, None);
        assert_eq!(row.samples, 300);
    }

    #[test]
    fn zero_decoder_at_full_noise_tracks_class_zero_frequency() {
        let code = ToricCode::new(2, 2).unwrap();
        let n = 4000;
        let row = eval_accuracy(&ZeroDecoder::new(2), &code, 1.0, n, 3).unwrap();
        let freq = sample_batch(&code, &NoiseModel::new(1.0).unwrap(), 3, EVAL_STREAM, n)
            .iter()
            .filter(|s| s.label.index() == 0)
            .count() as f64
            / n as f64;
        assert_eq!(row.accuracy, freq);
        assert!(freq > 0.0 && freq < 0.5, "{freq}");
    }

    #[test]
    fn rejects_bad_requests() {
        let code = ToricCode::new(3, 3).unwrap();
        assert!(eval_accuracy(&ZeroDecoder::new(3), &code, 0.01, 0, 0).is_err());
        assert!(eval_accuracy(&ZeroDecoder::new(3), &code, 1.5, 10, 0).is_err());
        let mld =
            crate::decoders::ExhaustiveMld::new(&ToricCode::new(2, 2).unwrap(), 0.01).unwrap();
        assert!(eval_accuracy(&mld, &code, 0.01, 10, 0).is_err());
    }
}
