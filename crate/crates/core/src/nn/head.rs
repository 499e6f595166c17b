//! Per-position softmax followed by global average pooling, either plain
//! (GAP) or with syndrome-conditioned class flips (GAP_T).

use serde::{Deserialize, Serialize};

use super::tensor::{FeatureMap, Tensor};
use crate::equivariance::{flip_into, FlipTables};
use crate::error::{Error, Result};
use crate::noise::Syndrome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Plain average over positions; translation invariant.
    Gap = 0,
    /// Average of flipped per-position distributions; translation equivariant.
    #[serde(rename = "gapt")]
    GapT = 1,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Gap => "gap",
            Pooling::GapT => "gapt",
        }
    }
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gap" => Ok(Pooling::Gap),
            "gapt" | "gap_t" => Ok(Pooling::GapT),
            _ => Err(Error::param(format!("unknown pooling {s:?}"))),
        }
    }
}

/// Softmax over the channel axis at every position.
pub fn softmax_positions(logits: &FeatureMap) -> FeatureMap {
    let mut out = logits.clone();
    for row in out.data.chunks_exact_mut(logits.channels) {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Gradient of [`softmax_positions`] given the softmax output.
pub fn softmax_backward(probs: &FeatureMap, dprobs: &FeatureMap) -> FeatureMap {
    let c = probs.channels;
    let mut out = dprobs.clone();
    for (o, p) in out.data.chunks_exact_mut(c).zip(probs.data.chunks_exact(c)) {
        let dot: f32 = o.iter().zip(p).map(|(d, q)| d * q).sum();
        o.iter_mut().zip(p).for_each(|(d, q)| *d = q * (*d - dot));
    }
    out
}

fn check_masks(probs: &FeatureMap, masks: Option<&[usize]>) -> Result<()> {
    if !probs.channels.is_power_of_two() {
        return Err(Error::shape(format!(
            "{} classes is not a power of two",
            probs.channels
        )));
    }
    if let Some(m) = masks {
        if m.len() != probs.rows() {
            return Err(Error::shape(format!(
                "{} flip masks for {} positions",
                m.len(),
                probs.rows()
            )));
        }
        if m.iter().any(|&b| b >= probs.channels) {
            return Err(Error::shape("flip mask outside the class range"));
        }
    }
    Ok(())
}

/// Pools per-position probabilities into `[B, C]` (row-major). With `masks`
/// (one per sample and position) each distribution is flipped first.
pub fn pool(probs: &FeatureMap, masks: Option<&[usize]>) -> Result<Vec<f32>> {
    check_masks(probs, masks)?;
    let (c, p) = (probs.channels, probs.positions());
    let scale = 1.0 / p as f32;
    let mut out = vec![0.0f32; probs.batch * c];
    let mut flipped = vec![0.0f32; c];
    for (j, dist) in probs.data.chunks_exact(c).enumerate() {
        let acc = &mut out[j / p * c..][..c];
        match masks.map_or(0, |m| m[j]) {
            0 => acc.iter_mut().zip(dist).for_each(|(a, v)| *a += v),
            m => {
                flip_into(dist, m, &mut flipped);
                acc.iter_mut().zip(&flipped).for_each(|(a, v)| *a += v);
            }
        }
    }
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

/// Gradient of [`pool`] with respect to the per-position probabilities.
pub fn pool_backward(layout: &FeatureMap, dpooled: &[f32], masks: Option<&[usize]>) -> FeatureMap {
    let (c, p) = (layout.channels, layout.positions());
    let scale = 1.0 / p as f32;
    let mut out = layout.same_layout(c);
    for (j, d) in out.data.chunks_exact_mut(c).enumerate() {
        let row = &dpooled[j / p * c..][..c];
        // The flip is an involution, so its adjoint is itself.
        flip_into(row, masks.map_or(0, |m| m[j]), d);
        d.iter_mut().for_each(|v| *v *= scale);
    }
    out
}

fn positions_to_map(probs: &Tensor) -> Result<FeatureMap> {
    let s = probs.shape();
    if s.len() != 3 {
        return Err(Error::shape(format!(
            "expected [B, positions, classes], got {s:?}"
        )));
    }
    let (b, p, c) = (s[0], s[1], s[2]);
    let mut m = FeatureMap::zeros(c, b, [p, 1, 1]);
    m.data.copy_from_slice(probs.data());
    Ok(m)
}

/// Average of per-position distributions, `[B, P, C] → [B, C]`.
pub fn gap_head(probs: &Tensor) -> Result<Tensor> {
    let m = positions_to_map(probs)?;
    Tensor::from_vec(&[m.batch, m.channels], pool(&m, None)?)
}

/// Equivariant pooling, `[B, P, C] → [B, C]`, where position `p` is the
/// translation by site `p` and its distribution is flipped by `δ(p⁻¹, σ)`.
pub fn gapt_head(probs: &Tensor, syndromes: &[Syndrome], tables: &FlipTables) -> Result<Tensor> {
    let m = positions_to_map(probs)?;
    if syndromes.len() != m.batch {
        return Err(Error::shape(format!(
            "{} syndromes for batch {}",
            syndromes.len(),
            m.batch
        )));
    }
    if m.positions() != tables.lattice().volume() || m.channels != tables.lattice().n_classes() {
        return Err(Error::shape("probabilities do not match the flip tables"));
    }
    let mut masks = Vec::with_capacity(m.rows());
    for s in syndromes {
        masks.extend(tables.pooling_masks(s)?);
    }
    Tensor::from_vec(&[m.batch, m.channels], pool(&m, Some(&masks))?)
}

/// Applies `flip_into` to one distribution; exposed for tests and the demo.
pub fn flip_distribution(dist: &[f32], mask: usize) -> Vec<f32> {
    let mut out = vec![0.0; dist.len()];
    flip_into(dist, mask, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::ToricCode;
    use crate::equivariance::Translation;
    use crate::nn::gradcheck::random_map;
    use crate::noise::{extract_syndrome, sample_error, stream_rng, NoiseModel};
    use rand::Rng;

    fn random_dists(b: usize, p: usize, c: usize, seed: u64) -> Tensor {
        let mut rng = stream_rng(seed, 3);
        let mut data = Vec::with_capacity(b * p * c);
        for _ in 0..b * p {
            let raw: Vec<f32> = (0..c).map(|_| rng.random_range(0.01..1.0)).collect();
            let s: f32 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / s));
        }
        Tensor::from_vec(&[b, p, c], data).unwrap()
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut x = random_map(64, 2, [3, 3, 3], 5);
        x.data.iter_mut().for_each(|v| *v *= 20.0);
        let p = softmax_positions(&x);
        for row in p.data.chunks(64) {
            let s: f64 = row.iter().map(|&v| v as f64).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gap_examples() {
        let d = random_dists(1, 1, 8, 1);
        let same = Tensor::from_vec(&[1, 5, 8], d.data().repeat(5)).unwrap();
        let out = gap_head(&same).unwrap();
        for (a, b) in out.data().iter().zip(d.data()) {
            assert!((a - b).abs() < 1e-7);
        }
        let uniform = Tensor::from_vec(&[2, 4, 8], vec![0.125; 64]).unwrap();
        assert!(gap_head(&uniform)
            .unwrap()
            .data()
            .iter()
            .all(|&v| (v - 0.125).abs() < 1e-7));
        let mixed = gap_head(&random_dists(3, 27, 64, 2)).unwrap();
        for row in mixed.data().chunks(64) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn gapt_with_zero_syndrome_is_gap() {
        let code = ToricCode::new(3, 3).unwrap();
        let tables = FlipTables::build(&code);
        let d = random_dists(2, 27, 64, 4);
        let zero = vec![Syndrome::zero(code.lattice()); 2];
        assert_eq!(
            gapt_head(&d, &zero, &tables).unwrap(),
            gap_head(&d).unwrap()
        );
    }

    #[test]
    fn gapt_of_consistent_one_hots_is_one_hot() {
        let code = ToricCode::new(3, 3).unwrap();
        let lattice = code.lattice();
        let tables = FlipTables::build(&code);
        let mut rng = stream_rng(8, 0);
        let noise = NoiseModel::new(0.1).unwrap();
        let s = extract_syndrome(&code, &sample_error(&code, &noise, &mut rng)).unwrap();
        let masks = tables.pooling_masks(&s).unwrap();
        let label = 37;
        let mut data = Vec::new();
        for m in &masks {
            let mut one = vec![0.0f32; 64];
            one[label ^ m] = 1.0;
            data.extend(one);
        }
        let probs = Tensor::from_vec(&[1, lattice.volume(), 64], data).unwrap();
        let out = gapt_head(&probs, &[s], &tables).unwrap();
        for (l, &v) in out.data().iter().enumerate() {
            assert_eq!(v, if l == label { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn gapt_rejects_mismatched_tables() {
        let tables = FlipTables::build(&ToricCode::new(3, 3).unwrap());
        let other = Syndrome::zero(ToricCode::new(4, 3).unwrap().lattice());
        let d = random_dists(1, 64, 64, 1);
        assert!(gapt_head(&d, &[other], &tables).is_err());
    }

    #[test]
    fn pooling_backward_matches_forward() {
        let probs = softmax_positions(&random_map(8, 2, [2, 2, 1], 6));
        let masks: Vec<usize> = (0..8).map(|i| (i * 5) % 8).collect();
        let mut rng = stream_rng(0, 1);
        let r: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grad = pool_backward(&probs, &r, Some(&masks));
        let base: f64 = pool(&probs, Some(&masks))
            .unwrap()
            .iter()
            .zip(&r)
            .map(|(a, b)| (a * b) as f64)
            .sum();
        for i in [0, 5, 17, 40, 63] {
            let mut q = probs.clone();
            q.data[i] += 1.0;
            let moved: f64 = pool(&q, Some(&masks))
                .unwrap()
                .iter()
                .zip(&r)
                .map(|(a, b)| (a * b) as f64)
                .sum();
            assert!((moved - base - grad.data[i] as f64).abs() < 1e-5);
        }
    }

    #[test]
    fn translated_one_hot_follows_flip_rule() {
        // A per-position map that is a translate of itself pools equivariantly.
        let code = ToricCode::new(3, 3).unwrap();
        let lattice = code.lattice();
        let tables = FlipTables::build(&code);
        let mut rng = stream_rng(9, 0);
        let noise = NoiseModel::new(0.08).unwrap();
        let s = extract_syndrome(&code, &sample_error(&code, &noise, &mut rng)).unwrap();
        let g = Translation::from_site(lattice, 14);
        let gs = crate::equivariance::translate_syndrome(&g, &s);
        // φ(σ)[p] arbitrary; φ(g·σ)[p] = φ(σ)[p − g].
        let base = random_dists(1, 27, 64, 10);
        let mut moved = vec![0.0f32; base.len()];
        for p in 0..27 {
            let src = g.inverse(lattice).apply_site(lattice, p);
            moved[p * 64..][..64].copy_from_slice(&base.data()[src * 64..][..64]);
        }
        let moved = Tensor::from_vec(&[1, 27, 64], moved).unwrap();
        let a = gapt_head(&base, std::slice::from_ref(&s), &tables).unwrap();
        let b = gapt_head(&moved, &[gs], &tables).unwrap();
        let delta = tables.delta_bits(&g, &s);
        let want = flip_distribution(a.data(), delta);
        for (x, y) in b.data().iter().zip(&want) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn softmax_and_pooling_give_distributions(seed: u64, scale in 0.1f32..20.0, mask_seed: u64) {
                let mut logits = random_map(16, 2, [2, 3, 1], seed);
                logits.data.iter_mut().for_each(|v| *v *= scale);
                let probs = softmax_positions(&logits);
                for row in probs.data.chunks_exact(16) {
                    prop_assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
                }
                let masks: Vec<usize> = (0..probs.rows()).map(|j| (mask_seed as usize).wrapping_mul(j + 1) % 16).collect();
                for m in [None, Some(masks.as_slice())] {
                    for row in pool(&probs, m).unwrap().chunks_exact(16) {
                        prop_assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
                    }
                }
            }
        }
    }
}
