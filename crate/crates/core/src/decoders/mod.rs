//! A common decoding interface with neural and maximum-likelihood decoders.

mod mld;
mod neural;

use std::time::Duration;

use crate::error::Result;
use crate::noise::{LogicalLabel, Syndrome};

pub use mld::{ExhaustiveMld, TruncatedMld, MAX_EXHAUSTIVE_QUBITS};
pub use neural::NeuralDecoder;

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub label: LogicalLabel,
    /// Posterior over classes, when the decoder produces one.
    pub distribution: Option<Vec<f64>>,
    pub duration: Duration,
}

pub trait Decoder {
    fn name(&self) -> &str;

    /// Whether one instance can decode several lattice sizes.
    fn supports_variable_l(&self) -> bool;

    fn decode(&self, syndrome: &Syndrome) -> Result<DecodeResult>;

    fn decode_batch(&self, syndromes: &[Syndrome]) -> Result<Vec<DecodeResult>> {
        syndromes.iter().map(|s| self.decode(s)).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Wall-clock timer that reads zero where no clock is available.
pub(crate) struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    pub(crate) fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        return Duration::ZERO;
    }
}

/// Always predicts the trivial class, i.e. trusts the canonical recovery.
#[derive(Clone, Debug)]
pub struct ZeroDecoder {
    n_logicals: usize,
}

impl ZeroDecoder {
    pub fn new(dim: usize) -> Self {
        Self {
            n_logicals: 2 * dim,
        }
    }
}

impl Decoder for ZeroDecoder {
    fn name(&self) -> &str {
        "zero"
    }

    fn supports_variable_l(&self) -> bool {
        true
    }

    fn decode(&self, _: &Syndrome) -> Result<DecodeResult> {
        Ok(DecodeResult {
            label: LogicalLabel::from_index(0, self.n_logicals)?,
            distribution: None,
            duration: Duration::ZERO,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Lattice;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5, 0.2]), 1);
        assert_eq!(argmax(&[3, 3, 3]), 0);
        assert_eq!(argmax(&[-1.0, 2.0]), 1);
    }

    #[test]
    fn zero_decoder() {
        let d = ZeroDecoder::new(3);
        let s = Syndrome::zero(Lattice::new(3, 3).unwrap());
        assert_eq!(d.decode(&s).unwrap().label.index(), 0);
        assert_eq!(d.decode_batch(&[s.clone(), s]).unwrap().len(), 2);
    }
}
