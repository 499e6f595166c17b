//! Finite-difference checks shared by the layer tests.

use rand::Rng;

use super::tensor::{FeatureMap, Param};
use crate::noise::stream_rng;

const STEP: f32 = 1e-3;
const TOLERANCE: f64 = 1e-3;

pub fn random_map(channels: usize, batch: usize, extents: [usize; 3], seed: u64) -> FeatureMap {
    let mut rng = stream_rng(seed, 99);
    let mut m = FeatureMap::zeros(channels, batch, extents);
    m.data
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-1.0..1.0));
    m
}

fn probe(y: &FeatureMap) -> Vec<f32> {
    let mut rng = stream_rng(y.data.len() as u64, 7);
    (0..y.data.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| u as f64 * v as f64).sum()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = analytic
        .iter()
        .map(|a| a * a)
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    diff / scale
}

type Run<'a, L> = dyn FnMut(&mut L, &FeatureMap) -> FeatureMap + 'a;

pub fn check_map_gradient<L>(
    layer: &mut L,
    x: &FeatureMap,
    run: &mut Run<'_, L>,
    back: &mut dyn FnMut(&mut L, &FeatureMap) -> FeatureMap,
) {
    let y = run(layer, x);
    let r = probe(&y);
    let mut dy = y.clone();
    dy.data.copy_from_slice(&r);
    let dx = back(layer, &dy);
    let analytic: Vec<f64> = dx.data.iter().map(|&v| v as f64).collect();
    let mut numeric = Vec::with_capacity(x.data.len());
    let mut xp = x.clone();
    for i in 0..x.data.len() {
        xp.data[i] = x.data[i] + STEP;
        let up = dot(&run(layer, &xp).data, &r);
        xp.data[i] = x.data[i] - STEP;
        let down = dot(&run(layer, &xp).data, &r);
        xp.data[i] = x.data[i];
        numeric.push((up - down) / (2.0 * STEP as f64));
    }
    let err = relative_error(&analytic, &numeric);
    assert!(err < TOLERANCE, "input gradient relative error {err}");
}

pub fn check_param_gradient<L>(
    layer: &mut L,
    x: &FeatureMap,
    run: &mut Run<'_, L>,
    back: &mut dyn FnMut(&mut L, &FeatureMap) -> FeatureMap,
    param: fn(&mut L) -> &mut Param,
) {
    param(layer).zero_grad();
    let y = run(layer, x);
    let r = probe(&y);
    let mut dy = y.clone();
    dy.data.copy_from_slice(&r);
    back(layer, &dy);
    let analytic: Vec<f64> = param(layer).grad.data().iter().map(|&v| v as f64).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = param(layer).value.data()[i];
        param(layer).value.data_mut()[i] = orig + STEP;
        let up = dot(&run(layer, x).data, &r);
        param(layer).value.data_mut()[i] = orig - STEP;
        let down = dot(&run(layer, x).data, &r);
        param(layer).value.data_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * STEP as f64));
    }
    let err = relative_error(&analytic, &numeric);
    assert!(err < TOLERANCE, "parameter gradient relative error {err}");
}
