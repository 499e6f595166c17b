//! Maximum-likelihood decoding by enumerating Pauli errors, exactly for tiny
//! codes and up to a weight cutoff otherwise.

use super::{argmax, DecodeResult, Decoder, Stopwatch};
use crate::code::{Lattice, ToricCode};
use crate::error::{Error, Result};
use crate::noise::{
    extract_syndrome, logical_label, LogicalLabel, NoiseModel, Pauli, PauliError, Syndrome,
};

/// Largest code the exhaustive decoder accepts (`4^n` errors).
pub const MAX_EXHAUSTIVE_QUBITS: usize = 10;

/// Largest syndrome length the exhaustive table is indexed by.
const MAX_EXHAUSTIVE_CHECKS: usize = 20;

/// Default cap on the number of errors the truncated decoder may visit.
pub const DEFAULT_BUDGET: u64 = 20_000_000;

const PAULIS: [Pauli; 3] = [Pauli::X, Pauli::Z, Pauli::XZ];

/// Syndrome words and label mask of every single-qubit Pauli, indexed
/// `3·q + k` for `PAULIS[k]` on qubit `q`.
struct SingleQubitTable {
    words: usize,
    syndromes: Vec<u64>,
    labels: Vec<usize>,
}

impl SingleQubitTable {
    fn new(code: &ToricCode) -> Self {
        let n = code.n_qubits();
        let words = code.lattice().n_checks().div_ceil(64);
        let mut syndromes = Vec::with_capacity(3 * n * words);
        let mut labels = Vec::with_capacity(3 * n);
        for q in 0..n {
            for p in PAULIS {
                let mut e = PauliError::identity(n);
                e.set_pauli(q, p);
                let s = extract_syndrome(code, &e).expect("sized for the code");
                syndromes.extend_from_slice(s.bits().words());
                labels.push(logical_label(code, &e).index());
            }
        }
        Self {
            words,
            syndromes,
            labels,
        }
    }

    fn syndrome(&self, i: usize) -> &[u64] {
        &self.syndromes[i * self.words..][..self.words]
    }
}

fn check_lattice(expected: Lattice, s: &Syndrome) -> Result<()> {
    if s.lattice() != expected {
        return Err(Error::shape(format!(
            "decoder built for L={} dim={} given a syndrome for L={} dim={}",
            expected.l,
            expected.dim,
            s.lattice().l,
            s.lattice().dim
        )));
    }
    Ok(())
}

fn result_from_cosets(
    cosets: Vec<f64>,
    n_logicals: usize,
    watch: Stopwatch,
) -> Result<DecodeResult> {
    let total: f64 = cosets.iter().sum();
    let label = LogicalLabel::from_index(argmax(&cosets), n_logicals)?;
    let distribution = (total > 0.0).then(|| cosets.iter().map(|c| c / total).collect());
    Ok(DecodeResult {
        label,
        distribution,
        duration: watch.elapsed(),
    })
}

/// Exact coset probabilities for codes with at most
/// [`MAX_EXHAUSTIVE_QUBITS`] qubits, precomputed for every syndrome.
pub struct ExhaustiveMld {
    lattice: Lattice,
    p: f64,
    n_classes: usize,
    /// `[syndrome index][class]`, syndrome bit `i` at position `i`.
    table: Vec<f64>,
}

impl ExhaustiveMld {
    pub fn new(code: &ToricCode, p: f64) -> Result<Self> {
        let noise = NoiseModel::new(p)?;
        let lattice = code.lattice();
        let n = code.n_qubits();
        let m = lattice.n_checks();
        if n > MAX_EXHAUSTIVE_QUBITS || m > MAX_EXHAUSTIVE_CHECKS {
            return Err(Error::Unsupported(format!(
                "exhaustive decoding needs at most {MAX_EXHAUSTIVE_QUBITS} qubits, code has {n}"
            )));
        }
        let single = SingleQubitTable::new(code);
        let n_classes = lattice.n_classes();
        let mut table = vec![0.0; n_classes << m];
        for e in 0..1usize << (2 * n) {
            let (mut syn, mut label, mut weight) = (0usize, 0usize, 0usize);
            for q in 0..n {
                let digit = e >> (2 * q) & 3;
                if digit > 0 {
                    let i = 3 * q + digit - 1;
                    syn ^= single.syndrome(i)[0] as usize;
                    label ^= single.labels[i];
                    weight += 1;
                }
            }
            table[syn * n_classes + label] += noise.string_probability(n, weight);
        }
        Ok(Self {
            lattice,
            p,
            n_classes,
            table,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Total probability of each logical class among errors with syndrome `s`.
    pub fn coset_probabilities(&self, s: &Syndrome) -> Result<Vec<f64>> {
        check_lattice(self.lattice, s)?;
        let key = s.bits().iter_ones().fold(0usize, |acc, i| acc | 1 << i);
        Ok(self.table[key * self.n_classes..][..self.n_classes].to_vec())
    }
}

impl Decoder for ExhaustiveMld {
    fn name(&self) -> &str {
        "mld"
    }

    fn supports_variable_l(&self) -> bool {
        false
    }

    fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
        let watch = Stopwatch::start();
        let cosets = self.coset_probabilities(s)?;
        result_from_cosets(cosets, self.lattice.n_logicals(), watch)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Maximum-likelihood decoding restricted to errors of weight at most
/// `w_max`, enumerated in increasing weight.
pub struct TruncatedMld {
    lattice: Lattice,
    noise: NoiseModel,
    w_max: usize,
    n: usize,
    single: SingleQubitTable,
}

impl TruncatedMld {
    pub fn new(code: &ToricCode, p: f64, w_max: usize) -> Result<Self> {
        Self::with_budget(code, p, w_max, DEFAULT_BUDGET)
    }

    /// Refuses when more than `budget` errors would have to be visited.
    pub fn with_budget(code: &ToricCode, p: f64, w_max: usize, budget: u64) -> Result<Self> {
        let noise = NoiseModel::new(p)?;
        let n = code.n_qubits();
        let visits: f64 = (0..=w_max.min(n))
            .map(|k| binomial(n, k) * 3f64.powi(k as i32))
            .sum();
        if visits > budget as f64 {
            return Err(Error::Size(format!(
                "weight-{w_max} enumeration over {n} qubits visits {visits:.3e} errors, budget is {budget}"
            )));
        }
        Ok(Self {
            lattice: code.lattice(),
            noise,
            w_max,
            n,
            single: SingleQubitTable::new(code),
        })
    }

    pub fn w_max(&self) -> usize {
        self.w_max
    }

    /// Coset masses over all errors of weight `≤ w_max` matching `s`, or
    /// `None` when there is no such error.
    pub fn coset_probabilities(&self, s: &Syndrome) -> Result<Option<Vec<f64>>> {
        self.enumerate(s, false)
    }

    /// Walks weights upwards; with `early_stop`, quits once the mass of all
    /// heavier errors cannot overturn the leading class.
    fn enumerate(&self, s: &Syndrome, early_stop: bool) -> Result<Option<Vec<f64>>> {
        check_lattice(self.lattice, s)?;
        let target = s.bits().words();
        let mut cosets = vec![0.0; self.lattice.n_classes()];
        let mut found = false;
        let words = self.single.words;
        let max_w = self.w_max.min(self.n);
        for w in 0..=max_w {
            let prob = self.noise.string_probability(self.n, w);
            let mut acc = vec![0u64; words * (w + 1)];
            self.walk(w, 0, 0, 0, &mut acc, target, prob, &mut cosets, &mut found);
            if early_stop && found {
                let remaining: f64 = (w + 1..=max_w)
                    .map(|k| {
                        let pk = self.noise.p().powi(k as i32)
                            * (1.0 - self.noise.p()).powi((self.n - k) as i32);
                        binomial(self.n, k) * pk
                    })
                    .sum();
                let best = argmax(&cosets);
                let second = cosets
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, &c)| c)
                    .fold(0.0, f64::max);
                if cosets[best] - second > remaining {
                    break;
                }
            }
        }
        Ok(found.then_some(cosets))
    }

    /// Depth-first over qubit subsets in increasing order. `acc` holds the
    /// running syndrome for each depth.
    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        remaining: usize,
        depth: usize,
        first: usize,
        label: usize,
        acc: &mut [u64],
        target: &[u64],
        prob: f64,
        cosets: &mut [f64],
        found: &mut bool,
    ) {
        let words = self.single.words;
        if remaining == 0 {
            if &acc[depth * words..][..words] == target {
                cosets[label] += prob;
                *found = true;
            }
            return;
        }
        for q in first..=self.n - remaining {
            for k in 0..3 {
                let i = 3 * q + k;
                let (head, tail) = acc.split_at_mut((depth + 1) * words);
                let next = &mut tail[..words];
                for ((d, a), b) in next
                    .iter_mut()
                    .zip(&head[depth * words..])
                    .zip(self.single.syndrome(i))
                {
                    *d = a ^ b;
                }
                self.walk(
                    remaining - 1,
                    depth + 1,
                    q + 1,
                    label ^ self.single.labels[i],
                    acc,
                    target,
                    prob,
                    cosets,
                    found,
                );
            }
        }
    }
}

impl Decoder for TruncatedMld {
    fn name(&self) -> &str {
        "mld-truncated"
    }

    fn supports_variable_l(&self) -> bool {
        false
    }

    /// Falls back to the trivial class, without a distribution, when no
    /// error within the weight cutoff explains the syndrome.
    fn decode(&self, s: &Syndrome) -> Result<DecodeResult> {
        let watch = Stopwatch::start();
        match self.enumerate(s, true)? {
            Some(cosets) => result_from_cosets(cosets, self.lattice.n_logicals(), watch),
            None => Ok(DecodeResult {
                label: LogicalLabel::from_index(0, self.lattice.n_logicals())?,
                distribution: None,
                duration: watch.elapsed(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_batch, stream_rng};
    use rand::Rng;

    fn code2() -> ToricCode {
        ToricCode::new(2, 2).unwrap()
    }

    #[test]
    fn exhaustive_zero_syndrome_is_identity_class() {
        let code = code2();
        let mld = ExhaustiveMld::new(&code, 0.01).unwrap();
        let r = mld.decode(&Syndrome::zero(code.lattice())).unwrap();
        assert_eq!(r.label.index(), 0);
        let d = r.distribution.unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(&d), 0);
    }

    #[test]
    fn exhaustive_cosets_partition_all_errors() {
        let code = code2();
        let mld = ExhaustiveMld::new(&code, 0.07).unwrap();
        let grand: f64 = mld.table.iter().sum();
        assert!((grand - 1.0).abs() < 1e-12);
        // Brute force the mass of one syndrome from scratch.
        let s = sample_batch(&code, &NoiseModel::new(0.2).unwrap(), 3, 0, 1)[0]
            .syndrome
            .clone();
        let mut mass = 0.0;
        let noise = NoiseModel::new(0.07).unwrap();
        for e in 0..1usize << 16 {
            let mut err = PauliError::identity(8);
            for q in 0..8 {
                err.set_pauli(
                    q,
                    [Pauli::I, Pauli::X, Pauli::Z, Pauli::XZ][e >> (2 * q) & 3],
                );
            }
            if extract_syndrome(&code, &err).unwrap() == s {
                mass += noise.string_probability(8, err.weight());
            }
        }
        let cosets: f64 = mld.coset_probabilities(&s).unwrap().iter().sum();
        assert!((cosets - mass).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_refuses_large_codes() {
        assert!(matches!(
            ExhaustiveMld::new(&ToricCode::new(3, 2).unwrap(), 0.1),
            Err(Error::Unsupported(_))
        ));
        assert!(ExhaustiveMld::new(&ToricCode::new(2, 3).unwrap(), 0.1).is_err());
        let mld = ExhaustiveMld::new(&code2(), 0.1).unwrap();
        assert!(mld
            .decode(&Syndrome::zero(Lattice::new(3, 2).unwrap()))
            .is_err());
    }

    #[test]
    fn exhaustive_argmax_crossings_are_reported() {
        // Coset orderings can cross as p moves on a code this small, so the
        // count is printed rather than forbidden.
        let code = code2();
        let (lo, hi) = (
            ExhaustiveMld::new(&code, 0.02).unwrap(),
            ExhaustiveMld::new(&code, 0.08).unwrap(),
        );
        let samples = sample_batch(&code, &NoiseModel::new(0.1).unwrap(), 11, 0, 50);
        let crossings = samples
            .iter()
            .filter(|s| {
                lo.decode(&s.syndrome).unwrap().label != hi.decode(&s.syndrome).unwrap().label
            })
            .count();
        eprintln!("argmax crossings between p=0.02 and p=0.08: {crossings}/50");
        let zero = Syndrome::zero(code.lattice());
        assert_eq!(
            lo.decode(&zero).unwrap().label,
            hi.decode(&zero).unwrap().label
        );
    }

    #[test]
    fn truncated_agrees_with_exhaustive_at_low_p() {
        let code = code2();
        let exact = ExhaustiveMld::new(&code, 0.01).unwrap();
        let cut = TruncatedMld::new(&code, 0.01, 3).unwrap();
        let samples = sample_batch(&code, &NoiseModel::new(0.01).unwrap(), 4, 0, 1000);
        let agree = samples
            .iter()
            .filter(|s| {
                exact.decode(&s.syndrome).unwrap().label == cut.decode(&s.syndrome).unwrap().label
            })
            .count();
        assert!(agree >= 990, "{agree}/1000");
        for p in [0.01, 0.2, 0.49] {
            let m = TruncatedMld::new(&code, p, 2).unwrap();
            assert_eq!(
                m.decode(&Syndrome::zero(code.lattice()))
                    .unwrap()
                    .label
                    .index(),
                0
            );
        }
    }

    #[test]
    fn truncated_single_qubit_errors() {
        let code = ToricCode::new(3, 3).unwrap();
        let mld = TruncatedMld::new(&code, 0.01, 1).unwrap();
        let mut rng = stream_rng(2, 0);
        for _ in 0..20 {
            let q = rng.random_range(0..code.n_qubits());
            let mut e = PauliError::identity(code.n_qubits());
            e.set_pauli(q, PAULIS[rng.random_range(0..3)]);
            let s = extract_syndrome(&code, &e).unwrap();
            assert_eq!(mld.decode(&s).unwrap().label, logical_label(&code, &e));
        }
        let zero = mld.decode(&Syndrome::zero(code.lattice())).unwrap();
        assert_eq!(zero.label.index(), 0);
    }

    #[test]
    fn truncated_no_candidate_and_budget() {
        let code = ToricCode::new(3, 3).unwrap();
        let mld = TruncatedMld::new(&code, 0.01, 1).unwrap();
        let heavy = sample_batch(&code, &NoiseModel::new(0.3).unwrap(), 1, 0, 1)[0]
            .syndrome
            .clone();
        assert!(mld.coset_probabilities(&heavy).unwrap().is_none());
        let r = mld.decode(&heavy).unwrap();
        assert_eq!(r.label.index(), 0);
        assert!(r.distribution.is_none());
        assert!(matches!(
            TruncatedMld::with_budget(&code, 0.01, 3, 1000),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn truncated_matches_exhaustive_when_complete() {
        // With w_max = n the truncated sum is exact.
        let code = code2();
        let exact = ExhaustiveMld::new(&code, 0.05).unwrap();
        let full = TruncatedMld::new(&code, 0.05, 8).unwrap();
        for s in sample_batch(&code, &NoiseModel::new(0.1).unwrap(), 5, 0, 10) {
            let a = exact.coset_probabilities(&s.syndrome).unwrap();
            let b = full.coset_probabilities(&s.syndrome).unwrap().unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
            assert_eq!(
                exact.decode(&s.syndrome).unwrap().label,
                full.decode(&s.syndrome).unwrap().label
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn label_is_most_likely_and_decoding_is_pure(seed: u64, p in 0.001f64..0.3) {
                let code = code2();
                let mld = ExhaustiveMld::new(&code, p).unwrap();
                let cut = TruncatedMld::new(&code, p, 3).unwrap();
                let s = sample_batch(&code, &NoiseModel::new(p).unwrap(), seed, 0, 1).remove(0).syndrome;
                for d in [&mld as &dyn Decoder, &cut] {
                    let r = d.decode(&s).unwrap();
                    if let Some(dist) = &r.distribution {
                        // Ties between equal cosets may resolve either way.
                        prop_assert!(dist[r.label.index()] >= dist[argmax(dist)] - 1e-12);
                        prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                    prop_assert_eq!(d.decode(&s).unwrap().label, r.label);
                }
            }
        }
    }
}
