use crate::error::{Error, Result};

/// Dense `f32` tensor with row-major extents.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "{} values for shape {shape:?} ({n} elements)",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn fill(&mut self, v: f32) {
        self.data.fill(v);
    }
}

/// Trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Activation layout used between layers: `[batch · positions, channels]`
/// row-major, positions in row-major `(x, y, z)` order per sample, so the
/// channels of one site are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub batch: usize,
    pub extents: [usize; 3],
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, batch: usize, extents: [usize; 3]) -> Self {
        let n = channels * batch * extents.iter().product::<usize>();
        Self {
            channels,
            batch,
            extents,
            data: vec![0.0; n],
        }
    }

    pub fn positions(&self) -> usize {
        self.extents.iter().product()
    }

    /// `batch · positions`.
    pub fn rows(&self) -> usize {
        self.batch * self.positions()
    }

    pub fn same_layout(&self, channels: usize) -> Self {
        Self::zeros(channels, self.batch, self.extents)
    }

    /// From a `[B, C, X, Y, Z]` tensor.
    pub fn from_bcxyz(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        if s.len() != 5 {
            return Err(Error::shape(format!("expected [B,C,X,Y,Z], got {s:?}")));
        }
        let (b, c, ext) = (s[0], s[1], [s[2], s[3], s[4]]);
        let p: usize = ext.iter().product();
        let mut out = Self::zeros(c, b, ext);
        for bi in 0..b {
            for ci in 0..c {
                for (pi, &v) in t.data()[(bi * c + ci) * p..][..p].iter().enumerate() {
                    out.data[(bi * p + pi) * c + ci] = v;
                }
            }
        }
        Ok(out)
    }

    pub fn to_bcxyz(&self) -> Tensor {
        let (b, c, p) = (self.batch, self.channels, self.positions());
        let mut data = vec![0.0; b * c * p];
        for bi in 0..b {
            for ci in 0..c {
                for pi in 0..p {
                    data[(bi * c + ci) * p + pi] = self.data[(bi * p + pi) * c + ci];
                }
            }
        }
        let e = self.extents;
        Tensor::from_vec(&[b, c, e[0], e[1], e[2]], data).expect("sized above")
    }
}
