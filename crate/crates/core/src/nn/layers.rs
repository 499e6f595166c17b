//! Convolution, batch normalization and GELU over [`FeatureMap`]s, each with
//! an explicit backward pass.

use rand::Rng;

use super::init::kaiming_normal;
use super::tensor::{FeatureMap, Param, Tensor};
use crate::error::{Error, Result};

/// Floats per im2col chunk.
const COL_CHUNK: usize = 1 << 18;

/// `c = a·b + beta·c` on strided row-major views.
#[allow(clippy::too_many_arguments)]
#[inline]
fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rs: usize, cs: usize, r: usize, cl: usize| (r - 1) * rs + (cl - 1) * cs;
    assert!(k == 0 || a.len() > last(rsa, csa, m, k));
    assert!(k == 0 || b.len() > last(rsb, csb, k, n));
    assert!(c.len() > last(rsc, csc, m, n));
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `out = a · wᵀ` for row-major `a: [m, k]`, `w: [n, k]`, `out: [m, n]`.
fn matmul_transposed(m: usize, k: usize, n: usize, a: &[f32], w: &[f32], out: &mut [f32]) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= m * k && w.len() >= n * k && out.len() >= m * n);
    // Computed as outᵀ = w · aᵀ, which suits the kernel's tiling for
    // short, wide outputs.
    // SAFETY: the assert above bounds every access.
    unsafe {
        gemm::gemm(
            n,
            m,
            k,
            out.as_mut_ptr(),
            n as isize,
            1,
            false,
            w.as_ptr(),
            1,
            k as isize,
            a.as_ptr(),
            k as isize,
            1,
            0.0,
            1.0,
            false,
            false,
            false,
            gemm::Parallelism::None,
        );
    }
}

/// For each kernel tap `t` and position `p`, the wrapped source position
/// `neighbors[t·P + p]`. Taps are ordered with the last axis fastest;
/// offsets run from `-(k/2)` to `k/2`.
pub(crate) fn neighbor_table(extents: [usize; 3], k: usize) -> Vec<u32> {
    let r = (k / 2) as isize;
    let p: usize = extents.iter().product();
    let mut out = Vec::with_capacity(k * k * k * p);
    let wrap = |c: usize, o: isize, e: usize| ((c as isize + o).rem_euclid(e as isize)) as usize;
    for ox in -r..=r {
        for oy in -r..=r {
            for oz in -r..=r {
                for x in 0..extents[0] {
                    for y in 0..extents[1] {
                        for z in 0..extents[2] {
                            let (sx, sy, sz) = (
                                wrap(x, ox, extents[0]),
                                wrap(y, oy, extents[1]),
                                wrap(z, oz, extents[2]),
                            );
                            out.push(((sx * extents[1] + sy) * extents[2] + sz) as u32);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Source rows of every tap for a chunk of samples, laid out `[row][tap]`
/// and relative to the chunk start. The first `n` rows only reference rows
/// below `n` rounded up to whole samples, so any sample-aligned prefix is a
/// valid table for a shorter chunk.
struct ChunkTable {
    taps: usize,
    idx: Vec<u32>,
}

impl ChunkTable {
    fn new(extents: [usize; 3], k: usize, samples: usize) -> Self {
        let nbr = neighbor_table(extents, k);
        let p: usize = extents.iter().product();
        let taps = k * k * k;
        let mut idx = vec![0u32; samples * p * taps];
        for b in 0..samples {
            for pos in 0..p {
                let row = &mut idx[(b * p + pos) * taps..][..taps];
                for (t, r) in row.iter_mut().enumerate() {
                    *r = (b * p) as u32 + nbr[t * p + pos];
                }
            }
        }
        Self { taps, idx }
    }

    fn row(&self, j: usize) -> &[u32] {
        &self.idx[j * self.taps..][..self.taps]
    }
}

/// 3D cross-correlation with cyclic padding; spatial extents are preserved.
#[derive(Clone, Debug)]
pub struct Conv3d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    /// `[cout, k, k, k, cin]`
    pub weight: Param,
    pub bias: Param,
    input: Option<FeatureMap>,
}

impl Conv3d {
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::param(format!("kernel size {k} must be odd")));
        }
        let weight = kaiming_normal(&[cout, k, k, k, cin], rng);
        Ok(Self {
            cin,
            cout,
            k,
            weight: Param::new(weight),
            bias: Param::new(Tensor::zeros(&[cout])),
            input: None,
        })
    }

    fn taps(&self) -> usize {
        self.k * self.k * self.k
    }

    fn check(&self, x: &FeatureMap) -> Result<()> {
        if x.channels != self.cin {
            return Err(Error::shape(format!(
                "convolution expects {} input channels, got {}",
                self.cin, x.channels
            )));
        }
        Ok(())
    }

    /// Samples per im2col chunk.
    fn batch_chunk(&self, x: &FeatureMap) -> usize {
        (COL_CHUNK / (self.cin * self.taps() * x.positions()).max(1)).clamp(1, x.batch.max(1))
    }

    /// Gathers the receptive fields of rows `r0 .. r0 + n` into `[n, taps · cin]`.
    fn im2col(&self, x: &FeatureMap, table: &ChunkTable, r0: usize, n: usize, col: &mut Vec<f32>) {
        let c = self.cin;
        let kk = c * self.taps();
        col.resize(n * kk, 0.0);
        let src = &x.data[r0 * c..][..n * c];
        for (j, dst) in col.chunks_exact_mut(kk).enumerate() {
            for (d, &s) in dst.chunks_exact_mut(c).zip(table.row(j)) {
                d.copy_from_slice(&src[s as usize * c..][..c]);
            }
        }
    }

    pub fn infer(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let mut out = self.linear(x)?;
        let bias = self.bias.value.data();
        for row in out.data.chunks_exact_mut(self.cout) {
            row.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
        }
        Ok(out)
    }

    /// Inference followed by the per-channel map `v ↦ v·scale + shift` and,
    /// optionally, GELU, fused into a single pass over the output.
    pub(crate) fn infer_fused(
        &self,
        x: &FeatureMap,
        scale: &[f32],
        shift: &[f32],
        gelu_after: bool,
    ) -> Result<FeatureMap> {
        let mut out = self.linear(x)?;
        let shift: Vec<f32> = self
            .bias
            .value
            .data()
            .iter()
            .zip(scale)
            .zip(shift)
            .map(|((b, s), t)| b * s + t)
            .collect();
        for row in out.data.chunks_exact_mut(self.cout) {
            for ((v, s), t) in row.iter_mut().zip(scale).zip(&shift) {
                *v = *v * s + t;
                if gelu_after {
                    *v = gelu(*v);
                }
            }
        }
        Ok(out)
    }

    /// The convolution without bias.
    fn linear(&self, x: &FeatureMap) -> Result<FeatureMap> {
        self.check(x)?;
        let mut out = x.same_layout(self.cout);
        let (p, rows, co) = (x.positions(), x.rows(), self.cout);
        let kk = self.cin * self.taps();
        let wt = self.weight.value.data();
        if self.k == 1 {
            matmul_transposed(rows, kk, co, &x.data, wt, &mut out.data);
        } else {
            let step = self.batch_chunk(x);
            let table = ChunkTable::new(x.extents, self.k, step);
            let mut col = Vec::new();
            for b0 in (0..x.batch).step_by(step) {
                let n = step.min(x.batch - b0) * p;
                self.im2col(x, &table, b0 * p, n, &mut col);
                matmul_transposed(n, kk, co, &col, wt, &mut out.data[b0 * p * co..]);
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &FeatureMap) -> Result<FeatureMap> {
        let out = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &FeatureMap) -> FeatureMap {
        let x = self.input.take().expect("backward without forward");
        let (p, rows, co, ci) = (x.positions(), x.rows(), self.cout, self.cin);
        let kk = ci * self.taps();

        let db = self.bias.grad.data_mut();
        for row in dy.data.chunks_exact(co) {
            db.iter_mut().zip(row).for_each(|(g, v)| *g += v);
        }

        let mut dx = x.same_layout(ci);
        let mut grad = std::mem::replace(&mut self.weight.grad, Tensor::zeros(&[0]));
        let dw = grad.data_mut();
        let wt = self.weight.value.data();
        if self.k == 1 {
            sgemm(
                co,
                rows,
                kk,
                &dy.data,
                (1, co),
                &x.data,
                (kk, 1),
                1.0,
                dw,
                (kk, 1),
            );
            sgemm(
                rows,
                co,
                kk,
                &dy.data,
                (co, 1),
                wt,
                (kk, 1),
                0.0,
                &mut dx.data,
                (kk, 1),
            );
            self.weight.grad = grad;
            return dx;
        }
        let step = self.batch_chunk(&x);
        let table = ChunkTable::new(x.extents, self.k, step);
        let mut col = Vec::new();
        let mut dcol = Vec::new();
        for b0 in (0..x.batch).step_by(step) {
            let n = step.min(x.batch - b0) * p;
            let r0 = b0 * p;
            let dy_chunk = &dy.data[r0 * co..][..n * co];
            self.im2col(&x, &table, r0, n, &mut col);
            sgemm(
                co,
                n,
                kk,
                dy_chunk,
                (1, co),
                &col,
                (kk, 1),
                1.0,
                dw,
                (kk, 1),
            );
            dcol.resize(n * kk, 0.0);
            sgemm(
                n,
                co,
                kk,
                dy_chunk,
                (co, 1),
                wt,
                (kk, 1),
                0.0,
                &mut dcol,
                (kk, 1),
            );
            // Each tap is a bijection whose inverse is the mirrored tap.
            let dst = &mut dx.data[r0 * ci..][..n * ci];
            for (i, d) in dst.chunks_exact_mut(ci).enumerate() {
                for (tap, &src) in table.row(i).iter().rev().enumerate() {
                    let s = &dcol[src as usize * kk + tap * ci..][..ci];
                    d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
                }
            }
        }
        self.weight.grad = grad;
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

/// Per-channel batch normalization with running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm3d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
    cache: Option<(Vec<f32>, Vec<f32>)>,
}

impl BatchNorm3d {
    pub fn new(channels: usize) -> Self {
        let mut gamma = Param::new(Tensor::zeros(&[channels]));
        gamma.value.fill(1.0);
        Self {
            gamma,
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    fn channels(&self) -> usize {
        self.running_mean.len()
    }

    fn check(&self, x: &FeatureMap) -> Result<()> {
        if x.channels != self.channels() {
            return Err(Error::shape(format!(
                "batch norm over {} channels given {}",
                self.channels(),
                x.channels
            )));
        }
        Ok(())
    }

    /// The inference-mode normalization as a per-channel `(scale, shift)`.
    pub fn folded(&self) -> (Vec<f32>, Vec<f32>) {
        (0..self.channels())
            .map(|c| {
                let s = self.gamma.value.data()[c] / (self.running_var[c] + self.eps).sqrt();
                (s, self.beta.value.data()[c] - s * self.running_mean[c])
            })
            .unzip()
    }

    /// Normalizes with the frozen running statistics.
    pub fn infer(&self, x: &FeatureMap) -> Result<FeatureMap> {
        self.check(x)?;
        let (scale, shift) = self.folded();
        let mut out = x.clone();
        for row in out.data.chunks_exact_mut(x.channels) {
            for ((v, s), b) in row.iter_mut().zip(&scale).zip(&shift) {
                *v = *v * s + b;
            }
        }
        Ok(out)
    }

    /// Normalizes with batch statistics and updates the running estimates.
    pub fn forward(&mut self, x: &FeatureMap) -> Result<FeatureMap> {
        self.check(x)?;
        let c = self.channels();
        let n = x.rows();
        let mut mean = vec![0.0f64; c];
        for row in x.data.chunks_exact(c) {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v as f64);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0f64; c];
        for row in x.data.chunks_exact(c) {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);

        let inv_std: Vec<f32> = var
            .iter()
            .map(|v| (1.0 / (v + self.eps as f64).sqrt()) as f32)
            .collect();
        let mean_f: Vec<f32> = mean.iter().map(|&m| m as f32).collect();
        let mut xhat = x.clone();
        for row in xhat.data.chunks_exact_mut(c) {
            for ((v, m), s) in row.iter_mut().zip(&mean_f).zip(&inv_std) {
                *v = (*v - m) * s;
            }
        }
        let mut out = xhat.clone();
        let (g, b) = (self.gamma.value.data(), self.beta.value.data());
        for row in out.data.chunks_exact_mut(c) {
            for ((v, g), b) in row.iter_mut().zip(g).zip(b) {
                *v = g * *v + b;
            }
        }

        let mom = self.momentum;
        for ch in 0..c {
            let unbiased = if n > 1 {
                var[ch] * n as f64 / (n - 1) as f64
            } else {
                var[ch]
            };
            self.running_mean[ch] = (1.0 - mom) * self.running_mean[ch] + mom * mean[ch] as f32;
            self.running_var[ch] = (1.0 - mom) * self.running_var[ch] + mom * unbiased as f32;
        }
        self.cache = Some((xhat.data, inv_std));
        Ok(out)
    }

    pub fn backward(&mut self, dy: &FeatureMap) -> FeatureMap {
        let (xhat, inv_std) = self.cache.take().expect("backward without forward");
        let c = self.channels();
        let n = dy.rows() as f32;
        let mut sum_dy = vec![0.0f32; c];
        let mut sum_dy_xhat = vec![0.0f32; c];
        for (drow, xrow) in dy.data.chunks_exact(c).zip(xhat.chunks_exact(c)) {
            for i in 0..c {
                sum_dy[i] += drow[i];
                sum_dy_xhat[i] += drow[i] * xrow[i];
            }
        }
        for i in 0..c {
            self.gamma.grad.data_mut()[i] += sum_dy_xhat[i];
            self.beta.grad.data_mut()[i] += sum_dy[i];
        }
        let scale: Vec<f32> = (0..c)
            .map(|i| self.gamma.value.data()[i] * inv_std[i] / n)
            .collect();
        let mut dx = dy.clone();
        for (drow, xrow) in dx.data.chunks_exact_mut(c).zip(xhat.chunks_exact(c)) {
            for i in 0..c {
                drow[i] = scale[i] * (n * drow[i] - sum_dy[i] - xrow[i] * sum_dy_xhat[i]);
            }
        }
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&format!("{prefix}.gamma"), &mut self.gamma);
        f(&format!("{prefix}.beta"), &mut self.beta);
    }

    pub fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Vec<f32>)) {
        f(&format!("{prefix}.running_mean"), &mut self.running_mean);
        f(&format!("{prefix}.running_var"), &mut self.running_var);
    }
}

const FRAC_1_SQRT_2: f32 = std::f32::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f32 = 0.398_942_3;

#[inline]
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + libm::erff(x * FRAC_1_SQRT_2))
}

/// Exact (erf-based) GELU.
#[derive(Clone, Debug, Default)]
pub struct Gelu {
    slope: Option<Vec<f32>>,
}

impl Gelu {
    pub fn infer(x: &FeatureMap) -> FeatureMap {
        let mut out = x.clone();
        out.data.iter_mut().for_each(|v| *v = gelu(*v));
        out
    }

    pub fn forward(&mut self, x: &FeatureMap) -> FeatureMap {
        let mut out = x.clone();
        let mut slope = vec![0.0; x.data.len()];
        for (v, s) in out.data.iter_mut().zip(slope.iter_mut()) {
            let cdf = 0.5 * (1.0 + libm::erff(*v * FRAC_1_SQRT_2));
            *s = cdf + *v * FRAC_1_SQRT_2PI * (-0.5 * *v * *v).exp();
            *v *= cdf;
        }
        self.slope = Some(slope);
        out
    }

    pub fn backward(&mut self, dy: &FeatureMap) -> FeatureMap {
        let slope = self.slope.take().expect("backward without forward");
        let mut dx = dy.clone();
        dx.data.iter_mut().zip(&slope).for_each(|(d, s)| *d *= s);
        dx
    }
}
