use std::io::Write;

use crate::error::{Error, Result};

use super::metrics::csv_writer;

/// Accuracy against error rate for one lattice size, on the shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCurve {
    pub l: usize,
    pub accuracy: Vec<f64>,
}

/// Where the curves of two consecutive sizes meet, if they do in the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCrossing {
    pub l1: usize,
    pub l2: usize,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEstimate {
    /// Median crossing, `None` when no pair crosses inside the grid.
    pub p_bar: Option<f64>,
    pub pairs: Vec<PairCrossing>,
    /// Mean absolute distance of the pair crossings from the median.
    pub residual: Option<f64>,
}

impl ThresholdEstimate {
    pub fn describe(&self) -> String {
        match (self.p_bar, self.residual) {
            (Some(p), Some(r)) => format!("threshold {p:.5} (residual {r:.5})"),
            _ => "none found".to_string(),
        }
    }
}

/// First sign change of `acc_{L2} − acc_{L1}` along the grid, located by
/// linear interpolation between grid points.
fn crossing(grid: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let diff: Vec<f64> = b.iter().zip(a).map(|(y2, y1)| y2 - y1).collect();
    for i in 0..grid.len() {
        if diff[i] == 0.0 {
            return Some(grid[i]);
        }
        if i + 1 < grid.len() && diff[i] * diff[i + 1] < 0.0 {
            let t = diff[i] / (diff[i] - diff[i + 1]);
            return Some(grid[i] + t * (grid[i + 1] - grid[i]));
        }
    }
    None
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Crossings of consecutive lattice sizes and their median.
pub fn estimate_threshold(grid: &[f64], curves: &[AccuracyCurve]) -> Result<ThresholdEstimate> {
    if curves.len() < 2 {
        return Err(Error::param("a threshold needs at least two lattice sizes"));
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(
            "the error-rate grid must hold two or more increasing values",
        ));
    }
    if let Some(c) = curves.iter().find(|c| c.accuracy.len() != grid.len()) {
        return Err(Error::shape(format!(
            "curve for L={} has {} points, grid has {}",
            c.l,
            c.accuracy.len(),
            grid.len()
        )));
    }
    let mut order: Vec<&AccuracyCurve> = curves.iter().collect();
    order.sort_by_key(|c| c.l);
    let pairs: Vec<PairCrossing> = order
        .windows(2)
        .map(|w| PairCrossing {
            l1: w[0].l,
            l2: w[1].l,
            p: crossing(grid, &w[0].accuracy, &w[1].accuracy),
        })
        .collect();
    let mut found: Vec<f64> = pairs.iter().filter_map(|c| c.p).collect();
    if found.is_empty() {
        return Ok(ThresholdEstimate {
            p_bar: None,
            pairs,
            residual: None,
        });
    }
    found.sort_by(f64::total_cmp);
    let p_bar = median(&found);
    let residual = found.iter().map(|p| (p - p_bar).abs()).sum::<f64>() / found.len() as f64;
    Ok(ThresholdEstimate {
        p_bar: Some(p_bar),
        pairs,
        residual: Some(residual),
    })
}

/// Measures every `(L, p)` point in order and estimates the threshold.
/// `measure` usually wraps `eval_accuracy`.
pub fn threshold_sweep(
    lattices: &[usize],
    grid: &[f64],
    mut measure: impl FnMut(usize, f64) -> Result<f64>,
) -> Result<(Vec<AccuracyCurve>, ThresholdEstimate)> {
    let mut curves = Vec::with_capacity(lattices.len());
    for &l in lattices {
        let accuracy = grid.iter().map(|&p| measure(l, p)).collect::<Result<_>>()?;
        curves.push(AccuracyCurve { l, accuracy });
    }
    let estimate = estimate_threshold(grid, &curves)?;
    Ok((curves, estimate))
}

/// Columns `L1,L2,crossing_p,p_bar,residual`; missing values are `none`.
pub fn write_threshold<W: Write>(w: W, estimate: &ThresholdEstimate) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
    let mut out = csv_writer(w);
    out.write_record(["L1", "L2", "crossing_p", "p_bar", "residual"])?;
    for pair in &estimate.pairs {
        out.write_record([
            pair.l1.to_string(),
            pair.l2.to_string(),
            fmt(pair.p),
            fmt(estimate.p_bar),
            fmt(estimate.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}
