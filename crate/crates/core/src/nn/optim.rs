use super::tensor::Param;

#[derive(Clone, Debug)]
pub struct AdamW {
    pub betas: (f32, f32),
    pub weight_decay: f32,
    pub eps: f32,
    step: u32,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
}

impl Default for AdamW {
    fn default() -> Self {
        Self::new((0.9, 0.999), 0.05, 1e-8)
    }
}

impl AdamW {
    pub fn new(betas: (f32, f32), weight_decay: f32, eps: f32) -> Self {
        Self {
            betas,
            weight_decay,
            eps,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    /// Starts one update; parameters must then be passed to [`AdamW::update`]
    /// in the same order on every step.
    pub fn begin(&mut self) -> AdamWStep<'_> {
        self.step += 1;
        AdamWStep {
            opt: self,
            index: 0,
        }
    }
}

pub struct AdamWStep<'a> {
    opt: &'a mut AdamW,
    index: usize,
}

impl AdamWStep<'_> {
    /// Decoupled weight decay followed by the bias-corrected Adam step.
    pub fn update(&mut self, p: &mut Param, lr: f32) {
        let opt = &mut *self.opt;
        if opt.moments.len() == self.index {
            opt.moments
                .push((vec![0.0; p.value.len()], vec![0.0; p.value.len()]));
        }
        let (m, v) = &mut opt.moments[self.index];
        assert_eq!(
            m.len(),
            p.value.len(),
            "optimizer state does not match parameter"
        );
        self.index += 1;
        let (b1, b2) = opt.betas;
        let t = opt.step as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let decay = 1.0 - lr * opt.weight_decay;
        let value = p.value.data_mut();
        for (((w, &g), m), v) in value
            .iter_mut()
            .zip(p.grad.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *w *= decay;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let denom = (*v / c2).sqrt() + opt.eps;
            *w -= lr * (*m / c1) / denom;
        }
    }
}

/// Fraction of the schedule spent warming up.
pub const ONECYCLE_PCT_START: f64 = 0.3;
const DIV_FACTOR: f64 = 25.0;
const FINAL_DIV_FACTOR: f64 = 1e4;

/// Step index where the one-cycle schedule peaks.
pub fn onecycle_peak(total: usize) -> f64 {
    ONECYCLE_PCT_START * total as f64 - 1.0
}

/// Cosine one-cycle schedule: from `max_lr / 25` up to `max_lr`, then down
/// to `max_lr / 25 / 1e4` at the last step.
pub fn onecycle_lr(step: usize, total: usize, max_lr: f64) -> f64 {
    let initial = max_lr / DIV_FACTOR;
    let min = initial / FINAL_DIV_FACTOR;
    let peak = onecycle_peak(total);
    let end = total as f64 - 1.0;
    let s = step as f64;
    let anneal = |from: f64, to: f64, frac: f64| {
        to + (from - to) / 2.0 * ((std::f64::consts::PI * frac).cos() + 1.0)
    };
    if s <= peak {
        anneal(initial, max_lr, if peak > 0.0 { s / peak } else { 1.0 })
    } else {
        anneal(max_lr, min, ((s - peak) / (end - peak)).min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn scalar(v: f32) -> Param {
        Param::new(Tensor::from_vec(&[1], vec![v]).unwrap())
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut opt = AdamW::new((0.9, 0.999), 0.0, 1e-8);
        let mut p = scalar(1.5);
        for _ in 0..10 {
            opt.begin().update(&mut p, 0.1);
        }
        assert_eq!(p.value.data()[0], 1.5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = AdamW::new((0.9, 0.999), 0.0, 0.0);
        let mut p = scalar(1.0);
        p.grad.data_mut()[0] = 123.0;
        opt.begin().update(&mut p, 0.01);
        assert!((p.value.data()[0] - 0.99).abs() < 1e-6);
    }

    #[test]
    fn schedule_shape() {
        let total = 1000;
        assert!(onecycle_lr(0, total, 0.1) < 0.1);
        assert!((onecycle_lr(0, total, 0.1) - 0.004).abs() < 1e-12);
        assert!((onecycle_lr(299, total, 0.1) - 0.1).abs() < 1e-12);
        assert!((onecycle_lr(999, total, 0.1) - 0.004 / 1e4).abs() < 1e-12);
        let lrs: Vec<f64> = (0..total).map(|s| onecycle_lr(s, total, 0.1)).collect();
        assert!(lrs[..300].windows(2).all(|w| w[1] >= w[0]));
        assert!(lrs[299..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_descends_after_warmup() {
        // f(w) = (w - 3)² from w = -3, 200 steps of one-cycle AdamW.
        let mut opt = AdamW::new((0.9, 0.999), 0.0, 1e-8);
        let mut p = scalar(-3.0);
        let total = 200;
        let mut losses = Vec::new();
        for s in 0..total {
            let w = p.value.data()[0];
            losses.push((w - 3.0).powi(2));
            p.grad.data_mut()[0] = 2.0 * (w - 3.0);
            opt.begin()
                .update(&mut p, onecycle_lr(s, total, 0.1) as f32);
        }
        let warm = onecycle_peak(total) as usize;
        assert!(
            losses[warm..].windows(2).all(|w| w[1] <= w[0] + 1e-6),
            "{losses:?}"
        );
        assert!(
            losses[total - 1] < 1e-2 * losses[0],
            "{}",
            losses[total - 1]
        );
    }
}
