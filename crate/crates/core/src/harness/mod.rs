//! Experiment driver: accuracy evaluation, threshold sweeps, trainability,
//! runtime benchmarks and the CSV/SVG artifacts they produce.

mod bench;
mod config;
mod eval;
mod experiment;
mod metrics;
mod plot;
mod search;
mod threshold;
mod trainability;

pub use bench::bench_runtime;
pub use config::{DecoderKind, ExperimentConfig};
pub use eval::{accuracy, eval_accuracy, EVAL_STREAM};
pub use experiment::{build_decoder, read_loss_trace, train_network, write_loss_trace};
pub use metrics::{read_metrics, write_metrics, MetricsRow};
pub use plot::{plot_csv, render_svg, Series};
pub use search::{search_p_train, PTrainSearch, P_TRAIN_RESOLUTION};
pub use threshold::{
    estimate_threshold, threshold_sweep, write_threshold, AccuracyCurve, PairCrossing,
    ThresholdEstimate,
};
pub use trainability::{trainability_metric, write_trainability, TrainabilityPoint};
