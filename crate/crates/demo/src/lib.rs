//! Browser bindings for a 2D toric code playground: sample an error, shift
//! it around the torus, and decode its syndrome by exact enumeration.

use nqd_core::code::{Lattice, ToricCode};
use nqd_core::decoders::{argmax, Decoder, ExhaustiveMld, TruncatedMld};
use nqd_core::equivariance::{translate_error, translate_syndrome, FlipTables, Translation};
use nqd_core::noise::{
    draw_sample, logical_label, stream_rng, NoiseModel, Pauli, PauliError, Syndrome,
};
use wasm_bindgen::prelude::*;

fn js(e: nqd_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Weight cutoff for the truncated decoder on lattices too big to enumerate.
fn w_max(l: usize) -> usize {
    if l <= 3 {
        4
    } else {
        3
    }
}

#[wasm_bindgen]
pub struct Playground {
    code: ToricCode,
    tables: FlipTables,
    error: PauliError,
    syndrome: Syndrome,
}

#[wasm_bindgen]
impl Playground {
    /// A 2D code of size `l` (2 to 4) with no error applied.
    #[wasm_bindgen(constructor)]
    pub fn new(l: usize) -> Result<Playground, JsError> {
        Self::build(l).map_err(|e| JsError::new(&e))
    }

    fn build(l: usize) -> Result<Playground, String> {
        if !(2..=4).contains(&l) {
            return Err("the playground supports L = 2, 3 or 4".into());
        }
        let code = ToricCode::new(l, 2).map_err(|e| e.to_string())?;
        let tables = FlipTables::build(&code);
        let error = PauliError::identity(code.n_qubits());
        let syndrome = Syndrome::zero(code.lattice());
        Ok(Self {
            code,
            tables,
            error,
            syndrome,
        })
    }

    fn lattice(&self) -> Lattice {
        self.code.lattice()
    }

    pub fn size(&self) -> usize {
        self.lattice().l
    }

    /// Qubit `(a, c)` sits on the edge from `c − e_a` to `c`; four numbers
    /// `x0, y0, x1, y1` per qubit.
    pub fn edges(&self) -> Vec<f64> {
        let lat = self.lattice();
        let v = lat.volume();
        let mut out = Vec::with_capacity(4 * self.code.n_qubits());
        for q in 0..self.code.n_qubits() {
            let (a, c) = (q / v, lat.coords(q % v));
            let (x, y) = (c[0] as f64, c[1] as f64);
            let (dx, dy) = if a == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
            out.extend([x - dx, y - dy, x, y]);
        }
        out
    }

    /// Face check at site `c` is the plaquette centred on `c − (½, ½)`.
    pub fn face_centers(&self) -> Vec<f64> {
        let lat = self.lattice();
        (0..lat.volume())
            .flat_map(|s| {
                let c = lat.coords(s);
                [c[0] as f64 - 0.5, c[1] as f64 - 0.5]
            })
            .collect()
    }

    /// Vertex check at site `c` sits on point `c`.
    pub fn vertices(&self) -> Vec<f64> {
        let lat = self.lattice();
        (0..lat.volume())
            .flat_map(|s| {
                let c = lat.coords(s);
                [c[0] as f64, c[1] as f64]
            })
            .collect()
    }

    /// Draws a fresh depolarizing error. Returns its logical label.
    pub fn sample(&mut self, p: f64, seed: u32) -> Result<u32, JsError> {
        let noise = NoiseModel::new(p).map_err(js)?;
        let s = draw_sample(&self.code, &noise, &mut stream_rng(seed as u64, 0));
        self.error = s.error;
        self.syndrome = s.syndrome;
        Ok(s.label.index() as u32)
    }

    /// Per qubit: 0 = I, 1 = X, 2 = Z, 3 = XZ.
    pub fn error(&self) -> Vec<u8> {
        (0..self.code.n_qubits())
            .map(|q| match self.error.pauli(q) {
                Pauli::I => 0,
                Pauli::X => 1,
                Pauli::Z => 2,
                Pauli::XZ => 3,
            })
            .collect()
    }

    /// Face bits then vertex bits.
    pub fn syndrome(&self) -> Vec<u8> {
        self.syndrome
            .bits()
            .to_bools()
            .into_iter()
            .map(u8::from)
            .collect()
    }

    pub fn label(&self) -> u32 {
        logical_label(&self.code, &self.error).index() as u32
    }

    /// Shifts the current error by `(dx, dy)` and returns the flip mask
    /// predicted from the old syndrome alone; the new label equals the old
    /// one XOR this mask.
    pub fn translate(&mut self, dx: usize, dy: usize) -> Result<u32, JsError> {
        let g = Translation::new(self.lattice(), &[dx, dy]).map_err(js)?;
        let delta = self.tables.delta_bits(&g, &self.syndrome);
        self.error = translate_error(self.lattice(), &g, &self.error);
        self.syndrome = translate_syndrome(&g, &self.syndrome);
        Ok(delta as u32)
    }

    /// Coset probabilities of the current syndrome at prior `p`, exact for
    /// `L = 2` and weight-truncated above. Empty when no low-weight error
    /// explains the syndrome.
    pub fn decode(&self, p: f64) -> Result<Vec<f64>, JsError> {
        let result = if self.size() == 2 {
            ExhaustiveMld::new(&self.code, p)
                .map_err(js)?
                .decode(&self.syndrome)
        } else {
            TruncatedMld::new(&self.code, p, w_max(self.size()))
                .map_err(js)?
                .decode(&self.syndrome)
        }
        .map_err(js)?;
        Ok(result.distribution.unwrap_or_default())
    }

    /// Most likely class of a `decode` output, ties to the lowest.
    pub fn best(distribution: &[f64]) -> u32 {
        argmax(distribution) as u32
    }
}
