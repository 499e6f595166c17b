use crate::error::{Error, Result};

/// Step of the `p_train` search grid (a quarter percentage point).
pub const P_TRAIN_RESOLUTION: f64 = 0.0025;

#[derive(Clone, Debug, PartialEq)]
pub struct PTrainSearch {
    /// Highest grid point whose accuracy exceeds one half.
    pub best: Option<f64>,
    /// Every `(p_train, accuracy)` evaluated, in order.
    pub probes: Vec<(f64, f64)>,
}

/// Binary search over `lo, lo + step, ..., ≤ hi` for the highest training
/// rate that still reaches accuracy above 0.5, assuming accuracy falls as
/// the rate rises.
pub fn search_p_train(
    lo: f64,
    hi: f64,
    step: f64,
    mut accuracy_at: impl FnMut(f64) -> Result<f64>,
) -> Result<PTrainSearch> {
    if !(lo > 0.0 && lo <= hi && hi < 1.0 && step > 0.0) {
        return Err(Error::param(format!(
            "bad search range {lo}..{hi} step {step}"
        )));
    }
    let points = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let at = |k: usize| lo + k as f64 * step;
    let mut probes = Vec::new();
    let mut probe = |k: usize, probes: &mut Vec<(f64, f64)>| -> Result<bool> {
        let acc = accuracy_at(at(k))?;
        probes.push((at(k), acc));
        Ok(acc > 0.5)
    };
    if !probe(0, &mut probes)? {
        return Ok(PTrainSearch { best: None, probes });
    }
    // Invariant: `good` passes, everything above `bad` is known to fail.
    let (mut good, mut bad) = (0, points);
    while bad - good > 1 {
        let mid = (good + bad) / 2;
        if probe(mid, &mut probes)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(PTrainSearch {
        best: Some(at(good)),
        probes,
    })
}
