//! Toric codes built as hypergraph products of cyclic repetition codes.
//!
//! Qubits live on lattice edges. Qubit `(axis, site)` has index
//! `axis · L^dim + site`, where `site` is the row-major index of the lattice
//! coordinates (`i·L² + j·L + k` in 3D). Face checks are Z-type and act on the
//! X part of an error; vertex checks are X-type and act on the Z part.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::container::{decode_counts, encode_counts, lookup, read_container, write_container};
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVector};
use crate::nn::Tensor;

/// Cubic (or square) periodic lattice of side `l` in `dim` dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    pub l: usize,
    pub dim: usize,
}

impl Lattice {
    pub fn new(l: usize, dim: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::Size(format!("lattice size {l} < 2")));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::Unsupported(format!("dimension {dim}")));
        }
        Ok(Self { l, dim })
    }

    /// Number of lattice sites, `L^dim`.
    pub fn volume(&self) -> usize {
        self.l.pow(self.dim as u32)
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords.iter().fold(0, |acc, &c| acc * self.l + c % self.l)
    }

    pub fn coords(&self, mut site: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = site % self.l;
            site /= self.l;
        }
        out
    }

    /// Spatial extents with unused trailing axes set to 1.
    pub fn extents(&self) -> [usize; 3] {
        let mut e = [1; 3];
        e[..self.dim].fill(self.l);
        e
    }

    pub fn n_qubits(&self) -> usize {
        self.dim * self.volume()
    }

    /// Face-check blocks: three in 3D, one in 2D.
    pub fn n_face_blocks(&self) -> usize {
        if self.dim == 3 {
            3
        } else {
            1
        }
    }

    pub fn n_face_checks(&self) -> usize {
        self.n_face_blocks() * self.volume()
    }

    pub fn n_vertex_checks(&self) -> usize {
        self.volume()
    }

    pub fn n_checks(&self) -> usize {
        self.n_face_checks() + self.n_vertex_checks()
    }

    /// Syndrome channels in the voxel view: face blocks then vertices.
    pub fn n_channels(&self) -> usize {
        self.n_face_blocks() + 1
    }

    /// One X̄ and one Z̄ per axis.
    pub fn n_logicals(&self) -> usize {
        2 * self.dim
    }

    pub fn n_classes(&self) -> usize {
        1 << self.n_logicals()
    }
}

/// Parity-check matrix of the cyclic repetition code,
/// `H[i,j] = δ(i,j) + δ(i, (j+1) mod L)`.
pub fn repetition_check(l: usize) -> Result<BitMatrix> {
    if l < 2 {
        return Err(Error::Size(format!("repetition code length {l} < 2")));
    }
    let mut h = BitMatrix::zeros(l, l);
    for j in 0..l {
        h.set(j, j, true);
        h.set((j + 1) % l, j, true);
    }
    Ok(h)
}

/// Canonical logical operators, indexed by axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalSet {
    /// Z̄ strings, applied to the Z part of a Pauli (weight L).
    pub z_logicals: Vec<BitVector>,
    /// X̄ membranes, applied to the X part of a Pauli (weight L^(dim-1)).
    pub x_logicals: Vec<BitVector>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToricCode {
    lattice: Lattice,
    face_checks: BitMatrix,
    vertex_checks: BitMatrix,
    logicals: LogicalSet,
}

impl ToricCode {
    pub fn new(l: usize, dim: usize) -> Result<Self> {
        build_toric(l, dim)
    }

    /// Assembles a code from explicit check blocks; the canonical logicals
    /// are attached but nothing is validated.
    pub fn from_parts(
        lattice: Lattice,
        face_checks: BitMatrix,
        vertex_checks: BitMatrix,
    ) -> Result<Self> {
        let n = lattice.n_qubits();
        if face_checks.cols() != n
            || vertex_checks.cols() != n
            || face_checks.rows() != lattice.n_face_checks()
            || vertex_checks.rows() != lattice.n_vertex_checks()
        {
            return Err(Error::shape(format!(
                "check blocks {}x{} / {}x{} do not fit L={} dim={}",
                face_checks.rows(),
                face_checks.cols(),
                vertex_checks.rows(),
                vertex_checks.cols(),
                lattice.l,
                lattice.dim
            )));
        }
        let logicals = build_logicals(lattice);
        Ok(Self {
            lattice,
            face_checks,
            vertex_checks,
            logicals,
        })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn l(&self) -> usize {
        self.lattice.l
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.n_qubits()
    }

    pub fn face_checks(&self) -> &BitMatrix {
        &self.face_checks
    }

    pub fn vertex_checks(&self) -> &BitMatrix {
        &self.vertex_checks
    }

    pub fn logicals(&self) -> &LogicalSet {
        &self.logicals
    }

    /// Full check matrix with the syndrome ordering used throughout:
    /// face rows (acting on X parts) first, vertex rows (acting on Z parts)
    /// last, over columns `[x part ; z part]`.
    pub fn check_matrix(&self) -> BitMatrix {
        BitMatrix::from_blocks(&[
            vec![Some(&self.face_checks), None],
            vec![None, Some(&self.vertex_checks)],
        ])
        .expect("blocks sized at construction")
    }
}

/// Builds the 2D or 3D toric code of side `l` from Kronecker products of
/// the repetition check.
pub fn build_toric(l: usize, dim: usize) -> Result<ToricCode> {
    let lattice = Lattice::new(l, dim)?;
    let hc = repetition_check(l)?;
    let id = BitMatrix::identity(l);

    // c[a] applies the repetition check along coordinate a.
    let factors = |a: usize| -> Result<BitMatrix> {
        let mut acc: Option<BitMatrix> = None;
        for b in 0..dim {
            let f = if a == b { &hc } else { &id };
            acc = Some(match acc {
                None => f.clone(),
                Some(m) => m.kron(f)?,
            });
        }
        Ok(acc.expect("dim >= 2"))
    };
    let c: Vec<BitMatrix> = (0..dim).map(factors).collect::<Result<_>>()?;
    let ct: Vec<BitMatrix> = c.iter().map(BitMatrix::transpose).collect();

    let (face, vertex) = if dim == 3 {
        let (cx, cy, cz) = (&c[0], &c[1], &c[2]);
        let face = BitMatrix::from_blocks(&[
            vec![Some(cy), Some(cx), None],
            vec![None, Some(cz), Some(cy)],
            vec![Some(cz), None, Some(cx)],
        ])?;
        let vertex = BitMatrix::from_blocks(&[vec![Some(&ct[0]), Some(&ct[1]), Some(&ct[2])]])?;
        (face, vertex)
    } else {
        let face = BitMatrix::from_blocks(&[vec![Some(&c[1]), Some(&c[0])]])?;
        let vertex = BitMatrix::from_blocks(&[vec![Some(&ct[0]), Some(&ct[1])]])?;
        (face, vertex)
    };
    ToricCode::from_parts(lattice, face, vertex)
}

/// Canonical logical representatives. Z̄ along axis t: the t-axis qubits
/// whose transverse coordinates are all 0. X̄ for axis t: the t-axis qubits
/// whose t coordinate is 0.
pub fn build_logicals(lattice: Lattice) -> LogicalSet {
    let n = lattice.n_qubits();
    let v = lattice.volume();
    let mut z_logicals = Vec::with_capacity(lattice.dim);
    let mut x_logicals = Vec::with_capacity(lattice.dim);
    for t in 0..lattice.dim {
        let on_axis = |site: usize| t * v + site;
        let z = (0..v).filter(|&s| {
            let c = lattice.coords(s);
            (0..lattice.dim).all(|a| a == t || c[a] == 0)
        });
        z_logicals.push(BitVector::from_indices(n, z.map(on_axis)));
        let x = (0..v).filter(|&s| lattice.coords(s)[t] == 0);
        x_logicals.push(BitVector::from_indices(n, x.map(on_axis)));
    }
    LogicalSet {
        z_logicals,
        x_logicals,
    }
}

/// Outcome of [`validate`]; `failures` lists every violated identity in the
/// order checked.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn first_failure(&self) -> Option<&str> {
        self.failures.first().map(String::as_str)
    }
}

/// Checks shapes, row/column weights, CSS orthogonality, logical commutation
/// and the symplectic pairing of the logical set.
pub fn validate(code: &ToricCode) -> ValidationReport {
    let mut failures = Vec::new();
    let lat = code.lattice;
    let (face, vertex) = (&code.face_checks, &code.vertex_checks);
    let vertex_weight = 2 * lat.dim;
    let (face_per_qubit, vertex_per_qubit) = (2 * (lat.dim - 1), 2);

    if let Some(r) = (0..face.rows()).find(|&r| face.row_weight(r) != 4) {
        failures.push(format!(
            "face check {r} has weight {} (expected 4)",
            face.row_weight(r)
        ));
    }
    if let Some(r) = (0..vertex.rows()).find(|&r| vertex.row_weight(r) != vertex_weight) {
        failures.push(format!(
            "vertex check {r} has weight {} (expected {vertex_weight})",
            vertex.row_weight(r)
        ));
    }
    let (ft, vt) = (face.transpose(), vertex.transpose());
    if let Some(q) = (0..code.n_qubits()).find(|&q| ft.row_weight(q) != face_per_qubit) {
        failures.push(format!("qubit {q} is in {} face checks", ft.row_weight(q)));
    }
    if let Some(q) = (0..code.n_qubits()).find(|&q| vt.row_weight(q) != vertex_per_qubit) {
        failures.push(format!(
            "qubit {q} is in {} vertex checks",
            vt.row_weight(q)
        ));
    }

    let css = vertex.matmul(&ft).expect("both blocks span all qubits");
    if !css.is_zero() {
        failures.push("CSS condition violated: vertex_checks · face_checksᵀ ≠ 0".into());
    }

    let logicals = &code.logicals;
    for (t, z) in logicals.z_logicals.iter().enumerate() {
        if !vertex.matvec_unchecked(z).is_zero() {
            failures.push(format!("Z̄ logical {t} anticommutes with a vertex check"));
        }
    }
    for (t, x) in logicals.x_logicals.iter().enumerate() {
        if !face.matvec_unchecked(x).is_zero() {
            failures.push(format!("X̄ logical {t} anticommutes with a face check"));
        }
    }
    for (s, x) in logicals.x_logicals.iter().enumerate() {
        for (t, z) in logicals.z_logicals.iter().enumerate() {
            if x.dot(z) != (s == t) {
                failures.push(format!("logical pairing ({s},{t}) is wrong"));
            }
        }
    }
    ValidationReport { failures }
}

fn matrix_tensor(m: &BitMatrix) -> Tensor {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    for r in 0..m.rows() {
        data.extend((0..m.cols()).map(|c| if m.get(r, c) { 1.0 } else { 0.0 }));
    }
    Tensor::from_vec(&[m.rows(), m.cols()], data).expect("sized")
}

fn tensor_matrix(t: &Tensor) -> Result<BitMatrix> {
    let s = t.shape();
    if s.len() != 2 {
        return Err(Error::Format(format!("check block has shape {s:?}")));
    }
    let mut rows = Vec::with_capacity(s[0]);
    for row in t.data().chunks(s[1].max(1)).take(s[0]) {
        let mut bits = BitVector::zeros(s[1]);
        for (c, &v) in row.iter().enumerate() {
            match v {
                0.0 => {}
                1.0 => bits.set(c, true),
                _ => return Err(Error::Format(format!("check entry {v} is not 0 or 1"))),
            }
        }
        rows.push(bits);
    }
    BitMatrix::from_rows(s[1], rows)
}

impl ToricCode {
    /// Writes `L`, the dimension and both check blocks bit-exactly.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let tensors = vec![
            (
                "meta.lattice".to_string(),
                encode_counts(&[self.lattice.l, self.lattice.dim]),
            ),
            (
                "code.face_checks".to_string(),
                matrix_tensor(&self.face_checks),
            ),
            (
                "code.vertex_checks".to_string(),
                matrix_tensor(&self.vertex_checks),
            ),
        ];
        write_container(w, &tensors)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let tensors = read_container(r)?;
        let meta = decode_counts(lookup(&tensors, "meta.lattice")?)?;
        if meta.len() != 2 {
            return Err(Error::Format("meta.lattice must hold [L, dim]".into()));
        }
        let lattice = Lattice::new(meta[0], meta[1])?;
        let face = tensor_matrix(lookup(&tensors, "code.face_checks")?)?;
        let vertex = tensor_matrix(lookup(&tensors, "code.vertex_checks")?)?;
        Self::from_parts(lattice, face, vertex)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
