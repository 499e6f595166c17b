//! Depolarizing noise, syndrome extraction and logical labels.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code::{Lattice, ToricCode};
use crate::error::{Error, Result};
use crate::gf2::BitVector;

/// Single-qubit Pauli, with `Y` represented as `XZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Z,
    XZ,
}

/// A Pauli string split into its bit-flip and phase-flip supports.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliError {
    pub x_bits: BitVector,
    pub z_bits: BitVector,
}

impl PauliError {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            x_bits: BitVector::zeros(n_qubits),
            z_bits: BitVector::zeros(n_qubits),
        }
    }

    pub fn new(x_bits: BitVector, z_bits: BitVector) -> Result<Self> {
        if x_bits.len() != z_bits.len() {
            return Err(Error::shape("X and Z supports differ in length"));
        }
        Ok(Self { x_bits, z_bits })
    }

    pub fn n_qubits(&self) -> usize {
        self.x_bits.len()
    }

    pub fn pauli(&self, q: usize) -> Pauli {
        match (self.x_bits.get(q), self.z_bits.get(q)) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::XZ,
        }
    }

    pub fn set_pauli(&mut self, q: usize, p: Pauli) {
        self.x_bits.set(q, matches!(p, Pauli::X | Pauli::XZ));
        self.z_bits.set(q, matches!(p, Pauli::Z | Pauli::XZ));
    }

    /// Number of qubits acted on non-trivially.
    pub fn weight(&self) -> usize {
        self.x_bits
            .words()
            .iter()
            .zip(self.z_bits.words())
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Product of Paulis (phases dropped).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            x_bits: &self.x_bits ^ &other.x_bits,
            z_bits: &self.z_bits ^ &other.z_bits,
        }
    }
}

/// i.i.d. depolarizing noise: each qubit is I with probability `1-p` and
/// each of X, Z, XZ with probability `p/3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    p: f64,
}

impl NoiseModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("error rate {p} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Probabilities of (I, X, Z, XZ).
    pub fn pauli_probabilities(&self) -> [f64; 4] {
        let third = self.p / 3.0;
        [1.0 - self.p, third, third, third]
    }

    /// Probability of one specific Pauli string of the given weight on `n` qubits.
    pub fn string_probability(&self, n: usize, weight: usize) -> f64 {
        (1.0 - self.p).powi((n - weight) as i32) * (self.p / 3.0).powi(weight as i32)
    }

    pub fn sample_pauli<R: Rng + ?Sized>(&self, rng: &mut R) -> Pauli {
        let u: f64 = rng.random();
        if u >= self.p {
            return Pauli::I;
        }
        match ((3.0 * u / self.p) as usize).min(2) {
            0 => Pauli::X,
            1 => Pauli::Z,
            _ => Pauli::XZ,
        }
    }
}

/// Random stream keyed by `(seed, stream)`; distinct streams are independent
/// and their output does not depend on which worker consumes them.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_error<R: Rng + ?Sized>(
    code: &ToricCode,
    noise: &NoiseModel,
    rng: &mut R,
) -> PauliError {
    let n = code.n_qubits();
    let mut e = PauliError::identity(n);
    for q in 0..n {
        let p = noise.sample_pauli(rng);
        if p != Pauli::I {
            e.set_pauli(q, p);
        }
    }
    e
}

/// Check outcomes: face-check bits first, vertex-check bits last. Face block
/// `b` occupies bits `b·V .. (b+1)·V` in lattice-site order, so the bit
/// string is already the channel-major voxel layout.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Syndrome {
    lattice: Lattice,
    bits: BitVector,
}

impl Syndrome {
    pub fn zero(lattice: Lattice) -> Self {
        Self {
            lattice,
            bits: BitVector::zeros(lattice.n_checks()),
        }
    }

    pub fn from_bits(lattice: Lattice, bits: BitVector) -> Result<Self> {
        if bits.len() != lattice.n_checks() {
            return Err(Error::shape(format!(
                "syndrome of length {} for a lattice with {} checks",
                bits.len(),
                lattice.n_checks()
            )));
        }
        Ok(Self { lattice, bits })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn into_bits(self) -> BitVector {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits.is_zero()
    }

    pub fn face_bits(&self) -> BitVector {
        self.bits.slice(0, self.lattice.n_face_checks())
    }

    pub fn vertex_bits(&self) -> BitVector {
        self.bits
            .slice(self.lattice.n_face_checks(), self.lattice.n_vertex_checks())
    }

    /// Channel-major voxel view `[channels, X, Y, Z]` (Z extent 1 in 2D).
    pub fn to_channels(&self) -> Vec<f32> {
        (0..self.bits.len())
            .map(|i| if self.bits.get(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Writes the voxel view into `out`, which must hold `n_checks` values.
    pub fn write_channels(&self, out: &mut [f32]) {
        assert_eq!(out.len(), self.bits.len());
        out.fill(0.0);
        for i in self.bits.iter_ones() {
            out[i] = 1.0;
        }
    }

    pub fn from_channels(lattice: Lattice, voxels: &[f32]) -> Result<Self> {
        if voxels.len() != lattice.n_checks() {
            return Err(Error::shape(format!(
                "{} voxels for {} channels of {} sites",
                voxels.len(),
                lattice.n_channels(),
                lattice.volume()
            )));
        }
        let bits = BitVector::from_indices(
            voxels.len(),
            voxels
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i),
        );
        Ok(Self { lattice, bits })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.bits.to_bytes())
    }

    pub fn from_hex(lattice: Lattice, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Format(format!("syndrome hex: {e}")))?;
        Self::from_bits(lattice, BitVector::from_bytes(lattice.n_checks(), &bytes)?)
    }
}

/// `[face_checks · x ; vertex_checks · z]` mod 2.
pub fn extract_syndrome(code: &ToricCode, e: &PauliError) -> Result<Syndrome> {
    if e.n_qubits() != code.n_qubits() {
        return Err(Error::shape(format!(
            "error on {} qubits for a code with {}",
            e.n_qubits(),
            code.n_qubits()
        )));
    }
    let face = code.face_checks().matvec(&e.x_bits)?;
    let vertex = code.vertex_checks().matvec(&e.z_bits)?;
    Ok(Syndrome {
        lattice: code.lattice(),
        bits: face.concat(&vertex),
    })
}

/// Commutation record against the canonical logicals, ordered
/// `(x̄_0 .. x̄_{d-1}, z̄_0 .. z̄_{d-1})` with bit `i` of the class index
/// holding entry `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalLabel {
    index: usize,
    n_logicals: usize,
}

impl LogicalLabel {
    pub fn from_index(index: usize, n_logicals: usize) -> Result<Self> {
        if index >= 1 << n_logicals {
            return Err(Error::param(format!(
                "class {index} out of range for {n_logicals} logicals"
            )));
        }
        Ok(Self { index, n_logicals })
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits
            .iter()
            .enumerate()
            .map(|(i, &b)| (b as usize) << i)
            .sum();
        Self {
            index,
            n_logicals: bits.len(),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n_logicals(&self) -> usize {
        self.n_logicals
    }

    pub fn bit(&self, i: usize) -> bool {
        self.index >> i & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.n_logicals).map(|i| self.bit(i)).collect()
    }

    pub fn xor(&self, mask: usize) -> Self {
        Self {
            index: self.index ^ mask,
            n_logicals: self.n_logicals,
        }
    }
}

pub fn logical_label(code: &ToricCode, e: &PauliError) -> LogicalLabel {
    let lg = code.logicals();
    let d = code.dim();
    let mut index = 0;
    for t in 0..d {
        if e.z_bits.dot(&lg.x_logicals[t]) {
            index |= 1 << t;
        }
        if e.x_bits.dot(&lg.z_logicals[t]) {
            index |= 1 << (d + t);
        }
    }
    LogicalLabel {
        index,
        n_logicals: 2 * d,
    }
}

/// One labelled draw from the noise model.
#[derive(Clone, Debug)]
pub struct Sample {
    pub error: PauliError,
    pub syndrome: Syndrome,
    pub label: LogicalLabel,
}

pub fn draw_sample<R: Rng + ?Sized>(code: &ToricCode, noise: &NoiseModel, rng: &mut R) -> Sample {
    let error = sample_error(code, noise, rng);
    let syndrome = extract_syndrome(code, &error).expect("sampled error is sized to the code");
    let label = logical_label(code, &error);
    Sample {
        error,
        syndrome,
        label,
    }
}

/// `n` samples drawn sequentially from stream `(seed, stream)`.
pub fn sample_batch(
    code: &ToricCode,
    noise: &NoiseModel,
    seed: u64,
    stream: u64,
    n: usize,
) -> Vec<Sample> {
    let mut rng = stream_rng(seed, stream);
    (0..n).map(|_| draw_sample(code, noise, &mut rng)).collect()
}

/// Writes `n` samples as CSV with columns
/// `seed,stream,sample_idx,p,label_index,syndrome_hex`.
pub fn write_dataset<W: Write>(
    out: W,
    code: &ToricCode,
    noise: &NoiseModel,
    seed: u64,
    stream: u64,
    n: usize,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "seed",
        "stream",
        "sample_idx",
        "p",
        "label_index",
        "syndrome_hex",
    ])?;
    let mut rng = stream_rng(seed, stream);
    for i in 0..n {
        let s = draw_sample(code, noise, &mut rng);
        w.write_record([
            seed.to_string(),
            stream.to_string(),
            i.to_string(),
            noise.p().to_string(),
            s.label.index().to_string(),
            s.syndrome.to_hex(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
