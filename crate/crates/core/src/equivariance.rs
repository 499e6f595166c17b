//! Lattice translations and the syndrome-conditioned logical flips they induce.
//!
//! Translating an error moves its logical class in a way that depends only
//! on its syndrome: for every error `e` and translation `g`,
//!
//! ```text
//! label(g·e) = label(e) ⊕ δ(g, σ(e))
//! ```
//!
//! with `δ(g, ·)` linear. δ is computed from a destabilizer map `D` (a fixed
//! linear choice of error for each syndrome) as the label of the zero-syndrome
//! residual `D(g·σ) ⊕ g·(Dσ)`. The columns of `D` are chosen to commute with
//! every canonical logical, so `label(Dσ) = 0` and the residual reduces to
//! `label(g·Dσ)`.

use crate::code::{Lattice, ToricCode};
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};
use crate::noise::{logical_label, PauliError, Syndrome};

/// Element of `ℤ_L^dim`; unused axes are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Translation {
    shift: [usize; 3],
}

impl Translation {
    pub fn identity() -> Self {
        Self { shift: [0; 3] }
    }

    pub fn new(lattice: Lattice, shift: &[usize]) -> Result<Self> {
        if shift.len() != lattice.dim {
            return Err(Error::shape(format!(
                "translation with {} components on a {}D lattice",
                shift.len(),
                lattice.dim
            )));
        }
        let mut s = [0; 3];
        for (dst, &v) in s.iter_mut().zip(shift) {
            *dst = v % lattice.l;
        }
        Ok(Self { shift: s })
    }

    /// Translation whose shift vector has site index `site`.
    pub fn from_site(lattice: Lattice, site: usize) -> Self {
        Self {
            shift: lattice.coords(site),
        }
    }

    pub fn site(&self, lattice: Lattice) -> usize {
        lattice.site(&self.shift[..lattice.dim])
    }

    pub fn shift(&self) -> [usize; 3] {
        self.shift
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self, lattice: Lattice) -> Self {
        Self {
            shift: std::array::from_fn(|a| (self.shift[a] + other.shift[a]) % lattice.l),
        }
    }

    pub fn inverse(&self, lattice: Lattice) -> Self {
        Self {
            shift: std::array::from_fn(|a| (lattice.l - self.shift[a]) % lattice.l),
        }
    }

    pub fn all(lattice: Lattice) -> impl Iterator<Item = Translation> {
        (0..lattice.volume()).map(move |s| Self::from_site(lattice, s))
    }

    /// Destination of `site` under this translation.
    pub fn apply_site(&self, lattice: Lattice, site: usize) -> usize {
        let c = lattice.coords(site);
        let mut m = [0; 3];
        for a in 0..lattice.dim {
            m[a] = (c[a] + self.shift[a]) % lattice.l;
        }
        lattice.site(&m[..lattice.dim])
    }

    /// `perm[i]` is the destination of bit `i` when a vector made of `blocks`
    /// site-ordered blocks is translated.
    pub fn block_permutation(&self, lattice: Lattice, blocks: usize) -> Vec<usize> {
        let v = lattice.volume();
        let sites: Vec<usize> = (0..v).map(|s| self.apply_site(lattice, s)).collect();
        (0..blocks * v)
            .map(|i| (i / v) * v + sites[i % v])
            .collect()
    }
}

fn permute(bits: &BitVector, perm: &[usize]) -> BitVector {
    BitVector::from_indices(bits.len(), bits.iter_ones().map(|i| perm[i]))
}

/// Moves the support of qubit `(a, site)` to `(a, site + g)`.
pub fn translate_error(lattice: Lattice, g: &Translation, e: &PauliError) -> PauliError {
    let perm = g.block_permutation(lattice, lattice.dim);
    PauliError {
        x_bits: permute(&e.x_bits, &perm),
        z_bits: permute(&e.z_bits, &perm),
    }
}

/// Moves every check bit with its check's site; in the channel view this is
/// a cyclic voxel shift of each channel.
pub fn translate_syndrome(g: &Translation, s: &Syndrome) -> Syndrome {
    let lattice = s.lattice();
    let perm = g.block_permutation(lattice, lattice.n_channels());
    Syndrome::from_bits(lattice, permute(s.bits(), &perm)).expect("translation preserves length")
}

/// Linear map from syndromes to errors reproducing them.
#[derive(Clone, Debug)]
pub struct Destabilizer {
    lattice: Lattice,
    /// X-part error for each face-check bit.
    x_columns: Vec<BitVector>,
    /// Z-part error for each vertex-check bit.
    z_columns: Vec<BitVector>,
}

impl Destabilizer {
    pub fn build(code: &ToricCode) -> Self {
        let lg = code.logicals();
        let mut x_columns = code
            .face_checks()
            .right_pseudo_inverse()
            .transpose()
            .row_iter()
            .cloned()
            .collect::<Vec<_>>();
        let mut z_columns = code
            .vertex_checks()
            .right_pseudo_inverse()
            .transpose()
            .row_iter()
            .cloned()
            .collect::<Vec<_>>();
        // Strip logical content so every column commutes with the canonical
        // logicals; X̄_t / Z̄_t toggle exactly one pairing bit each.
        for col in &mut x_columns {
            for (z, x) in lg.z_logicals.iter().zip(&lg.x_logicals) {
                if col.dot(z) {
                    col.xor_assign(x);
                }
            }
        }
        for col in &mut z_columns {
            for (x, z) in lg.x_logicals.iter().zip(&lg.z_logicals) {
                if col.dot(x) {
                    col.xor_assign(z);
                }
            }
        }
        Self {
            lattice: code.lattice(),
            x_columns,
            z_columns,
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn apply(&self, s: &Syndrome) -> PauliError {
        let n = self.lattice.n_qubits();
        let nf = self.lattice.n_face_checks();
        let mut e = PauliError::identity(n);
        for i in s.bits().iter_ones() {
            if i < nf {
                e.x_bits ^= &self.x_columns[i];
            } else {
                e.z_bits ^= &self.z_columns[i - nf];
            }
        }
        e
    }

    /// Error produced for the syndrome with only bit `i` set.
    pub fn column(&self, i: usize) -> PauliError {
        let n = self.lattice.n_qubits();
        let nf = self.lattice.n_face_checks();
        if i < nf {
            PauliError {
                x_bits: self.x_columns[i].clone(),
                z_bits: BitVector::zeros(n),
            }
        } else {
            PauliError {
                x_bits: BitVector::zeros(n),
                z_bits: self.z_columns[i - nf].clone(),
            }
        }
    }
}

/// `δ(g, σ)` for a single translation as the label of the residual
/// `D(g·σ) ⊕ g·(Dσ)`. Reference path; [`FlipTables::delta_bits`] is the
/// precomputed equivalent.
pub fn residual_delta(code: &ToricCode, d: &Destabilizer, g: &Translation, s: &Syndrome) -> usize {
    let lattice = code.lattice();
    let recovered_then_moved = translate_error(lattice, g, &d.apply(s));
    let moved_then_recovered = d.apply(&translate_syndrome(g, s));
    logical_label(code, &recovered_then_moved.compose(&moved_then_recovered)).index()
}

/// Matrices `W_g` (`2·dim × n_checks`) with `δ(g, σ) = W_g · σ`, one per
/// translation, indexed by the translation's site.
#[derive(Clone, Debug)]
pub struct FlipTables {
    lattice: Lattice,
    tables: Vec<BitMatrix>,
}

impl FlipTables {
    pub fn build(code: &ToricCode) -> Self {
        let d = Destabilizer::build(code);
        Self::from_destabilizer(code, &d)
    }

    pub fn from_destabilizer(code: &ToricCode, d: &Destabilizer) -> Self {
        let lattice = code.lattice();
        let m = lattice.n_checks();
        let nl = lattice.n_logicals();

        let column_labels = |g: &Translation| -> BitMatrix {
            let mut w = BitMatrix::zeros(nl, m);
            for i in 0..m {
                let col = d.column(i);
                let moved = translate_error(lattice, g, &col);
                let mask = logical_label(code, &moved).index() ^ logical_label(code, &col).index();
                for b in 0..nl {
                    if mask >> b & 1 == 1 {
                        w.set(b, i, true);
                    }
                }
            }
            w
        };

        let generators: Vec<(Translation, BitMatrix)> = (0..lattice.dim)
            .map(|a| {
                let mut s = [0usize; 3];
                s[a] = 1;
                let g = Translation::new(lattice, &s[..lattice.dim]).expect("unit shift");
                let w = column_labels(&g);
                (g, w)
            })
            .collect();

        // W_{e_a ∘ h} σ = W_{e_a}(h·σ) ⊕ W_h σ, so W_{e_a ∘ h} = W_{e_a} P_h ⊕ W_h
        // with P_h the syndrome permutation of h. Sites are visited in
        // increasing order, so h = g − e_a is always ready.
        let v = lattice.volume();
        let mut tables: Vec<Option<BitMatrix>> = vec![None; v];
        tables[0] = Some(BitMatrix::zeros(nl, m));
        for site in 1..v {
            let g = Translation::from_site(lattice, site);
            let a = (0..lattice.dim)
                .rev()
                .find(|&a| g.shift[a] > 0)
                .expect("non-identity");
            let (gen, w_gen) = &generators[a];
            let h = g.compose(&gen.inverse(lattice), lattice);
            let w_h = tables[h.site(lattice)]
                .as_ref()
                .expect("visited in site order");
            let perm = h.block_permutation(lattice, lattice.n_channels());
            let mut w = w_h.clone();
            for b in 0..nl {
                for (i, &pi) in perm.iter().enumerate().take(m) {
                    if w_gen.get(b, pi) {
                        w.flip(b, i);
                    }
                }
            }
            tables[site] = Some(w);
        }
        Self {
            lattice,
            tables: tables
                .into_iter()
                .map(|t| t.expect("all sites filled"))
                .collect(),
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn table(&self, g: &Translation) -> &BitMatrix {
        &self.tables[g.site(self.lattice)]
    }

    /// δ(g, σ) as a class-index mask.
    pub fn delta_bits(&self, g: &Translation, s: &Syndrome) -> usize {
        self.delta_by_site(g.site(self.lattice), s.bits())
    }

    pub(crate) fn delta_by_site(&self, site: usize, bits: &BitVector) -> usize {
        self.tables[site]
            .row_iter()
            .enumerate()
            .fold(0, |acc, (b, row)| acc | ((row.dot(bits) as usize) << b))
    }

    /// Flip masks used by the equivariant pooling head: entry `p` is
    /// `δ(p⁻¹, σ)`, the correction for reading the per-position prediction
    /// at position `p` back in the frame of `σ`.
    pub fn pooling_masks(&self, s: &Syndrome) -> Result<Vec<usize>> {
        if s.lattice() != self.lattice {
            return Err(Error::shape(format!(
                "flip tables for L={} dim={} used with a syndrome for L={} dim={}",
                self.lattice.l,
                self.lattice.dim,
                s.lattice().l,
                s.lattice().dim
            )));
        }
        Ok((0..self.lattice.volume())
            .map(|p| {
                let inv = Translation::from_site(self.lattice, p).inverse(self.lattice);
                self.delta_by_site(inv.site(self.lattice), s.bits())
            })
            .collect())
    }
}

/// Real tensor over the logical classes with one binary axis per logical.
/// Entry `ℓ` is addressed by the class index, so axis `a` is bit `a` of `ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassTensor {
    n_axes: usize,
    values: Vec<f64>,
}

impl ClassTensor {
    pub fn new(n_axes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << n_axes {
            return Err(Error::shape(format!(
                "{} values for a tensor with {n_axes} binary axes",
                values.len()
            )));
        }
        Ok(Self { n_axes, values })
    }

    pub fn one_hot(n_axes: usize, class: usize) -> Self {
        let mut values = vec![0.0; 1 << n_axes];
        values[class] = 1.0;
        Self { n_axes, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_axes(&self) -> usize {
        self.n_axes
    }

    /// Swaps the two slices of every axis whose bit is set in `mask`.
    pub fn apply_flip(&self, mask: usize) -> Self {
        let mut values = vec![0.0; self.values.len()];
        flip_into(&self.values, mask, &mut values);
        Self {
            n_axes: self.n_axes,
            values,
        }
    }
}

/// `dst[ℓ] = src[ℓ ⊕ mask]`.
#[inline]
pub fn flip_into<T: Copy>(src: &[T], mask: usize, dst: &mut [T]) {
    debug_assert_eq!(src.len(), dst.len());
    for (l, d) in dst.iter_mut().enumerate() {
        *d = src[l ^ mask];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_toric;
    use crate::noise::{extract_syndrome, sample_error, stream_rng, NoiseModel};
    use rand::Rng;

    #[test]
    fn translation_group_laws() {
        let lat = Lattice::new(3, 3).unwrap();
        let g = Translation::new(lat, &[1, 2, 0]).unwrap();
        let h = Translation::new(lat, &[2, 2, 1]).unwrap();
        assert_eq!(g.compose(&h, lat).shift(), [0, 1, 1]);
        assert_eq!(g.compose(&g.inverse(lat), lat), Translation::identity());
        assert!(Translation::new(lat, &[1, 2]).is_err());
        assert_eq!(Translation::all(lat).count(), 27);
    }

    #[test]
    fn identity_and_full_cycle_translations() {
        let code = build_toric(3, 3).unwrap();
        let lat = code.lattice();
        let e = sample_error(&code, &NoiseModel::new(0.3).unwrap(), &mut stream_rng(1, 0));
        assert_eq!(translate_error(lat, &Translation::identity(), &e), e);
        let step = Translation::new(lat, &[0, 1, 0]).unwrap();
        let mut moved = e.clone();
        for _ in 0..3 {
            moved = translate_error(lat, &step, &moved);
        }
        assert_eq!(moved, e);
    }

    #[test]
    fn syndrome_translation_is_channel_shift() {
        let code = build_toric(3, 3).unwrap();
        let lat = code.lattice();
        let e = sample_error(&code, &NoiseModel::new(0.2).unwrap(), &mut stream_rng(4, 0));
        let s = extract_syndrome(&code, &e).unwrap();
        let g = Translation::new(lat, &[2, 0, 1]).unwrap();
        let moved = translate_syndrome(&g, &s).to_channels();
        let orig = s.to_channels();
        let v = lat.volume();
        for c in 0..lat.n_channels() {
            for site in 0..v {
                assert_eq!(moved[c * v + g.apply_site(lat, site)], orig[c * v + site]);
            }
        }
    }

    #[test]
    fn syndrome_commutes_with_translation() {
        let code = build_toric(3, 3).unwrap();
        let lat = code.lattice();
        let noise = NoiseModel::new(0.15).unwrap();
        let mut rng = stream_rng(21, 0);
        for _ in 0..1000 {
            let e = sample_error(&code, &noise, &mut rng);
            let g = Translation::from_site(lat, rng.random_range(0..lat.volume()));
            let lhs = extract_syndrome(&code, &translate_error(lat, &g, &e)).unwrap();
            let rhs = translate_syndrome(&g, &extract_syndrome(&code, &e).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn destabilizer_reproduces_syndromes() {
        for dim in [2, 3] {
            let code = build_toric(2, dim).unwrap();
            let d = Destabilizer::build(&code);
            let n = code.n_qubits();
            let zero = d.apply(&Syndrome::zero(code.lattice()));
            assert_eq!(zero, PauliError::identity(n));
            for q in 0..n {
                for (x, z) in [(true, false), (false, true)] {
                    let mut e = PauliError::identity(n);
                    e.x_bits.set(q, x);
                    e.z_bits.set(q, z);
                    let s = extract_syndrome(&code, &e).unwrap();
                    let rec = d.apply(&s);
                    assert_eq!(extract_syndrome(&code, &rec).unwrap(), s);
                    assert!(extract_syndrome(&code, &rec.compose(&e)).unwrap().is_zero());
                    assert_eq!(logical_label(&code, &rec).index(), 0);
                }
            }
        }
    }

    #[test]
    fn trivial_deltas() {
        let code = build_toric(3, 3).unwrap();
        let lat = code.lattice();
        let tables = FlipTables::build(&code);
        let noise = NoiseModel::new(0.2).unwrap();
        let mut rng = stream_rng(2, 0);
        for _ in 0..50 {
            let s = extract_syndrome(&code, &sample_error(&code, &noise, &mut rng)).unwrap();
            assert_eq!(tables.delta_bits(&Translation::identity(), &s), 0);
        }
        let zero = Syndrome::zero(lat);
        for g in Translation::all(lat) {
            assert_eq!(tables.delta_bits(&g, &zero), 0);
        }
    }

    #[test]
    fn tables_match_residual_formula() {
        let code = build_toric(3, 3).unwrap();
        let lat = code.lattice();
        let d = Destabilizer::build(&code);
        let tables = FlipTables::from_destabilizer(&code, &d);
        let noise = NoiseModel::new(0.2).unwrap();
        let mut rng = stream_rng(8, 0);
        for _ in 0..200 {
            let s = extract_syndrome(&code, &sample_error(&code, &noise, &mut rng)).unwrap();
            let g = Translation::from_site(lat, rng.random_range(0..lat.volume()));
            assert_eq!(tables.delta_bits(&g, &s), residual_delta(&code, &d, &g, &s));
        }
    }

    #[test]
    fn equivariance_identity_small() {
        for dim in [2, 3] {
            let code = build_toric(2, dim).unwrap();
            let lat = code.lattice();
            let tables = FlipTables::build(&code);
            let noise = NoiseModel::new(0.25).unwrap();
            let mut rng = stream_rng(77, dim as u64);
            for _ in 0..2000 {
                let e = sample_error(&code, &noise, &mut rng);
                let g = Translation::from_site(lat, rng.random_range(0..lat.volume()));
                let s = extract_syndrome(&code, &e).unwrap();
                let moved = logical_label(&code, &translate_error(lat, &g, &e));
                assert_eq!(
                    moved.index(),
                    logical_label(&code, &e).index() ^ tables.delta_bits(&g, &s)
                );
            }
        }
    }

    #[test]
    fn pooling_masks_reject_foreign_lattice() {
        let tables = FlipTables::build(&build_toric(2, 3).unwrap());
        let other = Syndrome::zero(Lattice::new(3, 3).unwrap());
        assert!(tables.pooling_masks(&other).is_err());
    }

    #[test]
    fn class_tensor_flips() {
        let t = ClassTensor::new(6, (0..64).map(|i| i as f64 * 0.5).collect()).unwrap();
        assert_eq!(t.apply_flip(0), t);
        assert_eq!(t.apply_flip(0b101100).apply_flip(0b101100), t);
        let ab = t.apply_flip(0b000001).apply_flip(0b010000);
        let ba = t.apply_flip(0b010000).apply_flip(0b000001);
        assert_eq!(ab, ba);
        let total: f64 = t.values().iter().sum();
        assert_eq!(t.apply_flip(0b111111).values().iter().sum::<f64>(), total);
        let oh = ClassTensor::one_hot(6, 13).apply_flip(0b100110);
        assert_eq!(oh, ClassTensor::one_hot(6, 13 ^ 0b100110));
        assert!(ClassTensor::new(6, vec![0.0; 63]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn identity_cocycle_and_linearity(l in 2usize..4, dim in 2usize..4, seed: u64, a: usize, b: usize) {
                let code = build_toric(l, dim).unwrap();
                let lat = code.lattice();
                let tables = FlipTables::build(&code);
                let noise = NoiseModel::new(0.2).unwrap();
                let mut rng = stream_rng(seed, 0);
                let (e1, e2) = (sample_error(&code, &noise, &mut rng), sample_error(&code, &noise, &mut rng));
                let (s1, s2) = (extract_syndrome(&code, &e1).unwrap(), extract_syndrome(&code, &e2).unwrap());
                let g = Translation::from_site(lat, a % lat.volume());
                let h = Translation::from_site(lat, b % lat.volume());

                let moved = logical_label(&code, &translate_error(lat, &g, &e1));
                prop_assert_eq!(moved.index(), logical_label(&code, &e1).index() ^ tables.delta_bits(&g, &s1));

                let hs = translate_syndrome(&h, &s1);
                prop_assert_eq!(
                    tables.delta_bits(&g.compose(&h, lat), &s1),
                    tables.delta_bits(&g, &hs) ^ tables.delta_bits(&h, &s1)
                );

                let sum = extract_syndrome(&code, &e1.compose(&e2)).unwrap();
                prop_assert_eq!(tables.delta_bits(&g, &sum), tables.delta_bits(&g, &s1) ^ tables.delta_bits(&g, &s2));
            }

            #[test]
            fn flips_permute_entries(values in proptest::collection::vec(-10.0f64..10.0, 64), mask in 0usize..64) {
                let t = ClassTensor::new(6, values).unwrap();
                let f = t.apply_flip(mask);
                let (a, b): (f64, f64) = (t.values().iter().sum(), f.values().iter().sum());
                prop_assert!((a - b).abs() < 1e-9);
                let mut x: Vec<f64> = t.values().to_vec();
                let mut y: Vec<f64> = f.values().to_vec();
                x.sort_by(f64::total_cmp);
                y.sort_by(f64::total_cmp);
                prop_assert_eq!(x, y);
                prop_assert_eq!(f.apply_flip(mask), t);
            }
        }
    }
}
