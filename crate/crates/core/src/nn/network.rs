use serde::{Deserialize, Serialize};

use super::block::WideResBlock;
use super::head::{pool, pool_backward, softmax_backward, softmax_positions, Pooling};
use super::layers::Conv3d;
use super::loss::{weighted_ce, LOG_EPS};
use super::tensor::{FeatureMap, Param};
use crate::code::Lattice;
use crate::equivariance::FlipTables;
use crate::error::{Error, Result};
use crate::noise::{stream_rng, Syndrome};

/// Losses of one training batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLoss {
    /// Class-weighted cross-entropy, the optimized objective.
    pub weighted: f32,
    /// Unweighted cross-entropy on the same predictions.
    pub plain: f32,
}

/// Architecture of the decoder network. Weights do not depend on `L`, only
/// on the lattice dimension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Out-channels of each residual block.
    pub channels: Vec<usize>,
    /// Conv stages per block.
    pub depth: usize,
    pub kernel: usize,
    pub pooling: Pooling,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self::desk(Pooling::GapT)
    }
}

impl NetworkSpec {
    /// Small network suited to `L ≤ 3` on a CPU.
    pub fn desk(pooling: Pooling) -> Self {
        Self {
            channels: vec![32, 16, 16],
            depth: 3,
            kernel: 3,
            pooling,
        }
    }

    pub fn full(pooling: Pooling) -> Self {
        Self {
            channels: vec![128, 64, 64],
            ..Self::desk(pooling)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::param("every block needs a positive channel count"));
        }
        if self.depth == 0 {
            return Err(Error::param("block depth must be positive"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::param(format!(
                "kernel size {} must be odd",
                self.kernel
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    dim: usize,
    pub blocks: Vec<WideResBlock>,
    pub head: Conv3d,
}

impl Network {
    pub fn new(spec: NetworkSpec, dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        // Lattice::new validates the dimension.
        let lattice = Lattice::new(2, dim)?;
        let mut rng = stream_rng(seed, 0);
        let mut cin = lattice.n_channels();
        let mut blocks = Vec::with_capacity(spec.channels.len());
        for &c in &spec.channels {
            blocks.push(WideResBlock::new(
                cin,
                c,
                spec.depth,
                spec.kernel,
                &mut rng,
            )?);
            cin = c;
        }
        let head = Conv3d::new(cin, lattice.n_classes(), 1, &mut rng)?;
        Ok(Self {
            spec,
            dim,
            blocks,
            head,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pooling(&self) -> Pooling {
        self.spec.pooling
    }

    pub fn n_classes(&self) -> usize {
        1 << (2 * self.dim)
    }

    pub fn n_params(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.len());
        n
    }

    /// Stacks syndromes into the channel-major input layout.
    pub fn input(&self, syndromes: &[Syndrome]) -> Result<FeatureMap> {
        let lattice = match syndromes.first() {
            Some(s) => s.lattice(),
            None => return Err(Error::shape("empty batch")),
        };
        if lattice.dim != self.dim {
            return Err(Error::shape(format!(
                "network for dim {} given a dim {} syndrome",
                self.dim, lattice.dim
            )));
        }
        let (c, b, p) = (lattice.n_channels(), syndromes.len(), lattice.volume());
        let mut x = FeatureMap::zeros(c, b, lattice.extents());
        let mut buf = vec![0.0f32; c * p];
        for (bi, s) in syndromes.iter().enumerate() {
            if s.lattice() != lattice {
                return Err(Error::shape("mixed lattices in one batch"));
            }
            s.write_channels(&mut buf);
            let rows = &mut x.data[bi * p * c..][..p * c];
            for (ci, plane) in buf.chunks_exact(p).enumerate() {
                for (pi, &v) in plane.iter().enumerate() {
                    rows[pi * c + ci] = v;
                }
            }
        }
        Ok(x)
    }

    /// Per-sample, per-position flip masks, or `None` for plain pooling.
    pub fn masks(
        &self,
        syndromes: &[Syndrome],
        tables: Option<&FlipTables>,
    ) -> Result<Option<Vec<usize>>> {
        if self.spec.pooling == Pooling::Gap {
            return Ok(None);
        }
        let tables = tables.ok_or_else(|| Error::param("equivariant pooling needs flip tables"))?;
        let mut out = Vec::with_capacity(syndromes.len() * tables.lattice().volume());
        for s in syndromes {
            out.extend(tables.pooling_masks(s)?);
        }
        Ok(Some(out))
    }

    /// Per-position class scores before the softmax.
    pub fn logits(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let mut h = x.clone();
        for b in &self.blocks {
            h = b.infer(&h)?;
        }
        self.head.infer(&h)
    }

    /// Pooled class distributions, `[B, C]` row-major.
    pub fn probabilities(
        &self,
        syndromes: &[Syndrome],
        tables: Option<&FlipTables>,
    ) -> Result<Vec<f32>> {
        let x = self.input(syndromes)?;
        let masks = self.masks(syndromes, tables)?;
        pool(&softmax_positions(&self.logits(&x)?), masks.as_deref())
    }

    /// Forward and backward pass on one batch; gradients are overwritten.
    pub fn train_batch(
        &mut self,
        syndromes: &[Syndrome],
        labels: &[usize],
        weights: &[f32],
        tables: Option<&FlipTables>,
    ) -> Result<BatchLoss> {
        if labels.len() != syndromes.len() || weights.len() != self.n_classes() {
            return Err(Error::shape(
                "labels or class weights do not match the batch",
            ));
        }
        let x = self.input(syndromes)?;
        let masks = self.masks(syndromes, tables)?;
        self.zero_grad();
        let mut h = x;
        for b in &mut self.blocks {
            h = b.forward(&h)?;
        }
        let logits = self.head.forward(&h)?;
        let probs = softmax_positions(&logits);
        let pooled = pool(&probs, masks.as_deref())?;
        let (weighted, dpooled) = weighted_ce(&pooled, labels, weights);
        let c = self.n_classes();
        let plain = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -((pooled[i * c + y] + LOG_EPS).ln() as f64))
            .sum::<f64>()
            / labels.len().max(1) as f64;

        let dprobs = pool_backward(&probs, &dpooled, masks.as_deref());
        let mut g = self.head.backward(&softmax_backward(&probs, &dprobs));
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g);
        }
        Ok(BatchLoss {
            weighted,
            plain: plain as f32,
        })
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }

    /// Visits every trainable tensor in a fixed order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_params(&format!("block{i}"), f);
        }
        self.head.visit_params("head", f);
    }

    /// Visits the batch-norm running statistics.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&str, &mut Vec<f32>)) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit_buffers(&format!("block{i}"), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::ToricCode;
    use crate::equivariance::{translate_syndrome, Translation};
    use crate::noise::{extract_syndrome, sample_error, NoiseModel};

    fn syndromes(code: &ToricCode, n: usize, p: f64, seed: u64) -> Vec<Syndrome> {
        let noise = NoiseModel::new(p).unwrap();
        let mut rng = stream_rng(seed, 5);
        (0..n)
            .map(|_| extract_syndrome(code, &sample_error(code, &noise, &mut rng)).unwrap())
            .collect()
    }

    fn small(pooling: Pooling) -> NetworkSpec {
        NetworkSpec {
            channels: vec![8, 6],
            depth: 2,
            kernel: 3,
            pooling,
        }
    }

    #[test]
    fn outputs_are_distributions() {
        let code = ToricCode::new(3, 3).unwrap();
        let tables = FlipTables::build(&code);
        let net = Network::new(small(Pooling::GapT), 3, 1).unwrap();
        let probs = net
            .probabilities(&syndromes(&code, 4, 0.05, 1), Some(&tables))
            .unwrap();
        assert_eq!(probs.len(), 4 * 64);
        for row in probs.chunks(64) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn gapt_network_is_equivariant_and_gap_invariant() {
        let code = ToricCode::new(3, 3).unwrap();
        let lattice = code.lattice();
        let tables = FlipTables::build(&code);
        let gapt = Network::new(small(Pooling::GapT), 3, 2).unwrap();
        let gap = Network::new(small(Pooling::Gap), 3, 2).unwrap();
        for (i, s) in syndromes(&code, 6, 0.08, 3).into_iter().enumerate() {
            let g = Translation::from_site(lattice, (i * 7 + 1) % 27);
            let gs = translate_syndrome(&g, &s);
            let delta = tables.delta_bits(&g, &s);
            let a = gapt
                .probabilities(std::slice::from_ref(&s), Some(&tables))
                .unwrap();
            let b = gapt
                .probabilities(std::slice::from_ref(&gs), Some(&tables))
                .unwrap();
            for l in 0..64 {
                assert!((b[l] - a[l ^ delta]).abs() < 1e-5);
            }
            let a = gap.probabilities(&[s], None).unwrap();
            let b = gap.probabilities(&[gs], None).unwrap();
            for l in 0..64 {
                assert!((b[l] - a[l]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn works_in_two_dimensions() {
        let code = ToricCode::new(4, 2).unwrap();
        let tables = FlipTables::build(&code);
        let net = Network::new(small(Pooling::GapT), 2, 0).unwrap();
        let probs = net
            .probabilities(&syndromes(&code, 2, 0.1, 0), Some(&tables))
            .unwrap();
        assert_eq!(probs.len(), 2 * 16);
    }

    #[test]
    fn rejects_bad_inputs() {
        let code = ToricCode::new(3, 3).unwrap();
        let net = Network::new(small(Pooling::GapT), 2, 0).unwrap();
        assert!(net
            .probabilities(&syndromes(&code, 1, 0.1, 0), None)
            .is_err());
        let net = Network::new(small(Pooling::GapT), 3, 0).unwrap();
        assert!(net
            .probabilities(&syndromes(&code, 1, 0.1, 0), None)
            .is_err());
        assert!(net.probabilities(&[], None).is_err());
        let mut bad = small(Pooling::Gap);
        bad.kernel = 2;
        assert!(Network::new(bad, 3, 0).is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let code = ToricCode::new(3, 3).unwrap();
        let tables = FlipTables::build(&code);
        let mut net = Network::new(small(Pooling::GapT), 3, 4).unwrap();
        let batch = syndromes(&code, 3, 0.1, 4);
        let labels = [5, 0, 63];
        let weights: Vec<f32> = (0..64).map(|i| 0.5 + (i % 5) as f32 * 0.2).collect();
        net.train_batch(&batch, &labels, &weights, Some(&tables))
            .unwrap();
        let analytic: Vec<f64> = net
            .head
            .weight
            .grad
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect();
        let mut numeric = Vec::new();
        let h = 1e-3;
        for i in 0..analytic.len() {
            let orig = net.head.weight.value.data()[i];
            net.head.weight.value.data_mut()[i] = orig + h;
            let up = net
                .train_batch(&batch, &labels, &weights, Some(&tables))
                .unwrap()
                .weighted as f64;
            net.head.weight.value.data_mut()[i] = orig - h;
            let down = net
                .train_batch(&batch, &labels, &weights, Some(&tables))
                .unwrap()
                .weighted as f64;
            net.head.weight.value.data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * h as f64));
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-2, "{}", diff / norm);
    }
}
