use crate::code::ToricCode;
use crate::decoders::{Decoder, Stopwatch};
use crate::error::Result;
use crate::noise::{sample_batch, NoiseModel};

use super::eval::EVAL_STREAM;
use super::metrics::MetricsRow;

/// Times `n` decodes twice, once through `decode_batch` and once one at a
/// time. Rows are named `<decoder>:batched` and `<decoder>:single`; `n = 0`
/// yields no rows. Sampling is not timed.
pub fn bench_runtime(
    decoder: &dyn Decoder,
    code: &ToricCode,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<MetricsRow>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let samples = sample_batch(code, &NoiseModel::new(p)?, seed, EVAL_STREAM, n);
    let syndromes: Vec<_> = samples.iter().map(|s| s.syndrome.clone()).collect();
    let row = |mode: &str, labels: Vec<usize>, secs: f64| MetricsRow {
        decoder: format!("{}:{mode}", decoder.name()),
        l: code.lattice().l,
        p,
        p_train: None,
        samples: n,
        accuracy: labels
            .iter()
            .zip(&samples)
            .filter(|(a, s)| **a == s.label.index())
            .count() as f64
            / n as f64,
        loss: None,
        wall_time_per_decode: Some(secs / n as f64),
    };

    let watch = Stopwatch::start();
    let batched = decoder.decode_batch(&syndromes)?;
    let batched_secs = watch.elapsed().as_secs_f64();

    let watch = Stopwatch::start();
    let single = syndromes
        .iter()
        .map(|s| decoder.decode(s))
        .collect::<Result<Vec<_>>>()?;
    let single_secs = watch.elapsed().as_secs_f64();

    Ok(vec![
        row(
            "batched",
            batched.iter().map(|r| r.label.index()).collect(),
            batched_secs,
        ),
        row(
            "single",
            single.iter().map(|r| r.label.index()).collect(),
            single_secs,
        ),
    ])
}
