use rand::Rng;

use super::layers::{BatchNorm3d, Conv3d, Gelu};
use super::tensor::{FeatureMap, Param};
use crate::error::Result;

/// One conv → batch-norm → GELU stage.
#[derive(Clone, Debug)]
pub struct Stage {
    pub conv: Conv3d,
    pub norm: BatchNorm3d,
    act: Gelu,
}

/// Residual block: `proj(x) + stages(x)`, where `proj` is a 1×1×1
/// convolution when the channel count changes and the identity otherwise.
#[derive(Clone, Debug)]
pub struct WideResBlock {
    pub proj: Option<Conv3d>,
    pub stages: Vec<Stage>,
}

impl WideResBlock {
    pub fn new<R: Rng + ?Sized>(
        cin: usize,
        cout: usize,
        depth: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let proj = if cin != cout {
            Some(Conv3d::new(cin, cout, 1, rng)?)
        } else {
            None
        };
        let mut stages = Vec::with_capacity(depth);
        for i in 0..depth {
            let c = if i == 0 { cin } else { cout };
            stages.push(Stage {
                conv: Conv3d::new(c, cout, kernel, rng)?,
                norm: BatchNorm3d::new(cout),
                act: Gelu::default(),
            });
        }
        Ok(Self { proj, stages })
    }

    pub fn infer(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let mut h = x.clone();
        for s in &self.stages {
            let (scale, shift) = s.norm.folded();
            h = s.conv.infer_fused(&h, &scale, &shift, true)?;
        }
        let skip = match &self.proj {
            Some(p) => p.infer(x)?,
            None => x.clone(),
        };
        Ok(add(h, &skip))
    }

    pub fn forward(&mut self, x: &FeatureMap) -> Result<FeatureMap> {
        let mut h = x.clone();
        for s in &mut self.stages {
            h = s.act.forward(&s.norm.forward(&s.conv.forward(&h)?)?);
        }
        let skip = match &mut self.proj {
            Some(p) => p.forward(x)?,
            None => x.clone(),
        };
        Ok(add(h, &skip))
    }

    pub fn backward(&mut self, dy: &FeatureMap) -> FeatureMap {
        let mut g = dy.clone();
        for s in self.stages.iter_mut().rev() {
            g = s.conv.backward(&s.norm.backward(&s.act.backward(&g)));
        }
        let skip = match &mut self.proj {
            Some(p) => p.backward(dy),
            None => dy.clone(),
        };
        add(g, &skip)
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        if let Some(p) = &mut self.proj {
            p.visit_params(&format!("{prefix}.proj"), f);
        }
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.conv.visit_params(&format!("{prefix}.stage{i}.conv"), f);
            s.norm.visit_params(&format!("{prefix}.stage{i}.norm"), f);
        }
    }

    pub fn visit_buffers(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Vec<f32>)) {
        for (i, s) in self.stages.iter_mut().enumerate() {
            s.norm.visit_buffers(&format!("{prefix}.stage{i}.norm"), f);
        }
    }
}

fn add(mut a: FeatureMap, b: &FeatureMap) -> FeatureMap {
    for (u, v) in a.data.iter_mut().zip(&b.data) {
        *u += v;
    }
    a
}
