use super::{argmax, DecodeResult, Decoder, Stopwatch};
use crate::code::{Lattice, ToricCode};
use crate::equivariance::FlipTables;
use crate::error::{Error, Result};
use crate::nn::{Network, Pooling};
use crate::noise::{LogicalLabel, Syndrome};

/// Syndromes pushed through the network at once by `decode_batch`.
pub const DEFAULT_BATCH: usize = 256;

/// Wraps a network for one code. The weights themselves fit any `L`; build
/// another decoder with [`NeuralDecoder::for_code`] to change it.
#[derive(Clone, Debug)]
pub struct NeuralDecoder {
    name: String,
    network: Network,
    lattice: Lattice,
    tables: Option<FlipTables>,
    pub batch: usize,
}

impl NeuralDecoder {
    pub fn new(network: Network, code: &ToricCode) -> Result<Self> {
        if network.dim() != code.dim() {
            return Err(Error::shape(format!(
                "network for dim {} used on a dim {} code",
                network.dim(),
                code.dim()
            )));
        }
        let tables = (network.pooling() == Pooling::GapT).then(|| FlipTables::build(code));
        Ok(Self {
            name: format!("neural-{}", network.pooling().name()),
            network,
            lattice: code.lattice(),
            tables,
            batch: DEFAULT_BATCH,
        })
    }

    pub fn for_code(&self, code: &ToricCode) -> Result<Self> {
        Self::new(self.network.clone(), code)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// Pooled class distributions, `[B, C]` row-major.
    pub fn probabilities(&self, syndromes: &[Syndrome]) -> Result<Vec<f32>> {
        if let Some(s) = syndromes.iter().find(|s| s.lattice() != self.lattice) {
            return Err(Error::shape(format!(
                "decoder built for L={} given a syndrome for L={}",
                self.lattice.l,
                s.lattice().l
            )));
        }
        self.network.probabilities(syndromes, self.tables.as_ref())
    }
}

impl Decoder for NeuralDecoder {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports_variable_l(&self) -> bool {
        true
    }

    fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
        Ok(self.decode_batch(std::slice::from_ref(s))?.remove(0))
    }

    /// Per-result durations are the chunk time split evenly.
    fn decode_batch(&self, syndromes: &[Syndrome]) -> Result<Vec<DecodeResult>> {
        let c = self.lattice.n_classes();
        let mut out = Vec::with_capacity(syndromes.len());
        for chunk in syndromes.chunks(self.batch.max(1)) {
            let watch = Stopwatch::start();
            let probs = self.probabilities(chunk)?;
            let each = watch.elapsed() / chunk.len() as u32;
            for row in probs.chunks_exact(c) {
                out.push(DecodeResult {
                    label: LogicalLabel::from_index(argmax(row), self.lattice.n_logicals())?,
                    distribution: Some(row.iter().map(|&v| v as f64).collect()),
                    duration: each,
                });
            }
        }
        Ok(out)
    }
}
