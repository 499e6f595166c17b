use std::io::{Read, Write};

use crate::code::ToricCode;
use crate::decoders::{Decoder, ExhaustiveMld, NeuralDecoder, TruncatedMld, ZeroDecoder};
use crate::error::{Error, Result};
use crate::nn::{train, Checkpoint, Network, Pooling, TrainReport};

use super::config::{DecoderKind, ExperimentConfig};
use super::metrics::csv_writer;

/// Decoder selected by `config` for `code`. Neural kinds need a checkpoint
/// with the matching pooling head; `p` is the oracles' prior.
pub fn build_decoder(
    config: &ExperimentConfig,
    code: &ToricCode,
    p: f64,
    checkpoint: Option<&Checkpoint>,
) -> Result<Box<dyn Decoder>> {
    Ok(match config.decoder {
        DecoderKind::Gapt | DecoderKind::Gap => {
            let ckpt = checkpoint.ok_or_else(|| {
                Error::param(format!("decoder {} needs a checkpoint", config.decoder))
            })?;
            if Some(ckpt.network.pooling()) != config.decoder.pooling() {
                return Err(Error::param(format!(
                    "checkpoint holds a {} network, {} requested",
                    ckpt.network.pooling().name(),
                    config.decoder
                )));
            }
            Box::new(NeuralDecoder::new(ckpt.network.clone(), code)?)
        }
        DecoderKind::Mld => Box::new(ExhaustiveMld::new(code, p)?),
        DecoderKind::MldTruncated => Box::new(TruncatedMld::new(code, p, config.w_max)?),
        DecoderKind::Zero => Box::new(ZeroDecoder::new(code.dim())),
    })
}

/// Trains a fresh network for lattice `l` at `config.train_error_rate`.
pub fn train_network(
    config: &ExperimentConfig,
    l: usize,
    on_step: impl FnMut(usize, f32),
) -> Result<(Checkpoint, TrainReport)> {
    let pooling: Pooling = config
        .decoder
        .pooling()
        .ok_or_else(|| Error::param(format!("decoder {} is not trainable", config.decoder)))?;
    let code = ToricCode::new(l, config.dim)?;
    let train_config = config.train_config();
    let mut network = Network::new(config.network_spec(pooling), config.dim, config.seed)?;
    let report = train(&mut network, &code, &train_config, on_step)?;
    let checkpoint = Checkpoint {
        lattice: code.lattice(),
        network,
        train: Some(train_config),
    };
    Ok((checkpoint, report))
}

/// Columns `step,loss,ce`: the weighted loss and the unweighted
/// cross-entropy of every step.
pub fn write_loss_trace<W: Write>(w: W, report: &TrainReport) -> Result<()> {
    if report.ce_trace.len() != report.loss_trace.len() {
        return Err(Error::shape(
            "loss and cross-entropy traces differ in length",
        ));
    }
    let mut out = csv_writer(w);
    out.write_record(["step", "loss", "ce"])?;
    for (i, (loss, ce)) in report.loss_trace.iter().zip(&report.ce_trace).enumerate() {
        out.write_record([i.to_string(), loss.to_string(), ce.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_loss_trace<R: Read>(r: R) -> Result<TrainReport> {
    let mut report = TrainReport::default();
    for record in csv::Reader::from_reader(r).deserialize() {
        let (_, loss, ce): (usize, f32, f32) = record?;
        report.loss_trace.push(loss);
        report.ce_trace.push(ce);
    }
    Ok(report)
}
