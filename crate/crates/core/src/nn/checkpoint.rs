use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::head::Pooling;
use super::network::{Network, NetworkSpec};
use super::tensor::Tensor;
use super::train::TrainConfig;
use crate::code::Lattice;
use crate::container::{
    decode_counts, decode_f64s, encode_counts, encode_f64s, lookup, read_container, write_container,
};
use crate::error::{Error, Result};

/// A trained network with the lattice it was trained on and, optionally,
/// the training configuration.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub lattice: Lattice,
    pub network: Network,
    pub train: Option<TrainConfig>,
}

fn network_meta(spec: &NetworkSpec, dim: usize) -> Tensor {
    let mut v = vec![
        dim,
        spec.depth,
        spec.kernel,
        spec.pooling as usize,
        spec.channels.len(),
    ];
    v.extend(&spec.channels);
    encode_counts(&v)
}

fn parse_network_meta(t: &Tensor) -> Result<(NetworkSpec, usize)> {
    let v = decode_counts(t)?;
    let bad = || Error::Format("malformed meta.network".into());
    if v.len() < 5 || v.len() != 5 + v[4] {
        return Err(bad());
    }
    let pooling = match v[3] {
        0 => Pooling::Gap,
        1 => Pooling::GapT,
        _ => return Err(bad()),
    };
    let spec = NetworkSpec {
        channels: v[5..].to_vec(),
        depth: v[1],
        kernel: v[2],
        pooling,
    };
    Ok((spec, v[0]))
}

fn train_meta(c: &TrainConfig) -> Tensor {
    encode_f64s(&[
        c.batch_size as f64,
        c.total_samples as f64,
        c.max_lr,
        c.betas.0 as f64,
        c.betas.1 as f64,
        c.weight_decay as f64,
        c.eps as f64,
        f64::from_bits(c.seed),
        c.p_train,
        c.class_weighting as u8 as f64,
    ])
}

fn parse_train_meta(t: &Tensor) -> Result<TrainConfig> {
    let v = decode_f64s(t)?;
    if v.len() != 10 {
        return Err(Error::Format("malformed meta.train".into()));
    }
    Ok(TrainConfig {
        batch_size: v[0] as usize,
        total_samples: v[1] as usize,
        max_lr: v[2],
        betas: (v[3] as f32, v[4] as f32),
        weight_decay: v[5] as f32,
        eps: v[6] as f32,
        seed: v[7].to_bits(),
        p_train: v[8],
        class_weighting: v[9] != 0.0,
    })
}

impl Checkpoint {
    pub fn tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            (
                "meta.lattice".to_string(),
                encode_counts(&[self.lattice.l, self.lattice.dim]),
            ),
            (
                "meta.network".to_string(),
                network_meta(self.network.spec(), self.network.dim()),
            ),
        ];
        if let Some(t) = &self.train {
            out.push(("meta.train".to_string(), train_meta(t)));
        }
        let mut net = self.network.clone();
        net.visit_params(&mut |name, p| out.push((name.to_string(), p.value.clone())));
        net.visit_buffers(&mut |name, b| {
            out.push((
                name.to_string(),
                Tensor::from_vec(&[b.len()], b.clone()).expect("1-D"),
            ))
        });
        out
    }

    pub fn from_tensors(tensors: &[(String, Tensor)]) -> Result<Self> {
        let lat = decode_counts(lookup(tensors, "meta.lattice")?)?;
        if lat.len() != 2 {
            return Err(Error::Format("meta.lattice must hold [L, dim]".into()));
        }
        let lattice = Lattice::new(lat[0], lat[1])?;
        let (spec, dim) = parse_network_meta(lookup(tensors, "meta.network")?)?;
        if dim != lattice.dim {
            return Err(Error::Format(
                "network and lattice dimensions differ".into(),
            ));
        }
        let train = match lookup(tensors, "meta.train") {
            Ok(t) => Some(parse_train_meta(t)?),
            Err(_) => None,
        };
        let mut network = Network::new(spec, dim, 0)?;
        let mut failure = None;
        network.visit_params(&mut |name, p| match lookup(tensors, name) {
            Ok(t) if t.shape() == p.value.shape() => p.value = t.clone(),
            Ok(t) => {
                failure = Some(format!(
                    "{name} has shape {:?}, expected {:?}",
                    t.shape(),
                    p.value.shape()
                ))
            }
            Err(e) => failure = Some(e.to_string()),
        });
        network.visit_buffers(&mut |name, b| match lookup(tensors, name) {
            Ok(t) if t.len() == b.len() => b.copy_from_slice(t.data()),
            Ok(_) => failure = Some(format!("{name} has the wrong length")),
            Err(e) => failure = Some(e.to_string()),
        });
        if let Some(f) = failure {
            return Err(Error::Format(f));
        }
        Ok(Self {
            lattice,
            network,
            train,
        })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        write_container(w, &self.tensors())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        Self::from_tensors(&read_container(r)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::ToricCode;
    use crate::equivariance::FlipTables;
    use crate::nn::train;
    use crate::noise::{sample_batch, NoiseModel};

    #[test]
    fn round_trip_preserves_predictions() {
        let code = ToricCode::new(3, 3).unwrap();
        let spec = NetworkSpec {
            channels: vec![6, 4],
            depth: 1,
            kernel: 3,
            pooling: Pooling::GapT,
        };
        let cfg = TrainConfig {
            batch_size: 8,
            total_samples: 16,
            seed: u64::MAX - 5,
            max_lr: 0.013,
            ..Default::default()
        };
        let mut network = Network::new(spec, 3, 1).unwrap();
        train(&mut network, &code, &cfg, |_, _| {}).unwrap();
        let ck = Checkpoint {
            lattice: code.lattice(),
            network,
            train: Some(cfg.clone()),
        };
        let mut a = Vec::new();
        ck.write_to(&mut a).unwrap();
        let back = Checkpoint::read_from(&a[..]).unwrap();
        assert_eq!(back.train.as_ref(), Some(&cfg));
        assert_eq!(back.lattice, code.lattice());
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        assert_eq!(a, b);

        let tables = FlipTables::build(&code);
        let s: Vec<_> = sample_batch(&code, &NoiseModel::new(0.05).unwrap(), 0, 0, 4)
            .into_iter()
            .map(|s| s.syndrome)
            .collect();
        assert_eq!(
            ck.network.probabilities(&s, Some(&tables)).unwrap(),
            back.network.probabilities(&s, Some(&tables)).unwrap()
        );
    }

    #[test]
    fn missing_or_misshapen_tensors_are_errors() {
        let net = Network::new(NetworkSpec::desk(Pooling::Gap), 2, 0).unwrap();
        let ck = Checkpoint {
            lattice: Lattice::new(4, 2).unwrap(),
            network: net,
            train: None,
        };
        let mut t = ck.tensors();
        assert!(Checkpoint::from_tensors(&t).unwrap().train.is_none());
        t.retain(|(n, _)| n != "head.bias");
        assert!(Checkpoint::from_tensors(&t).is_err());
        let mut t = ck.tensors();
        t.iter_mut().find(|(n, _)| n == "head.bias").unwrap().1 = Tensor::zeros(&[3]);
        assert!(Checkpoint::from_tensors(&t).is_err());
    }
}
