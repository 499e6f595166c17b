use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nqd_core::code::{build_toric, validate, ToricCode};
use nqd_core::harness::{
    bench_runtime, build_decoder, eval_accuracy, plot_csv, search_p_train, threshold_sweep,
    train_network, trainability_metric, write_loss_trace, write_metrics, write_threshold,
    write_trainability, DecoderKind, ExperimentConfig, MetricsRow, TrainabilityPoint,
    P_TRAIN_RESOLUTION,
};
use nqd_core::nn::{Checkpoint, TrainReport};
use nqd_core::noise::{write_dataset, NoiseModel};

#[derive(Parser)]
#[command(
    name = "nqd",
    version,
    about = "Toric code simulation and neural decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a code, check its structure and save it.
    Build(Common),
    /// Dump labelled syndromes as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        /// RNG stream to draw from.
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Train one network per (lattice, training error rate) pair.
    Train {
        #[command(flatten)]
        common: Common,
        /// Binary-search the highest training rate that keeps accuracy above 0.5.
        #[arg(long)]
        search_p_train: bool,
        /// Search range, `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0025, 0.1])]
        search_range: Vec<f64>,
    },
    /// Accuracy of a checkpoint or oracle at each error rate.
    Eval(Common),
    /// Accuracy curves over several lattice sizes and their crossing.
    Threshold(Common),
    /// Batched and one-at-a-time decoding time.
    Bench(Common),
    /// Render a metrics, loss or trainability CSV as SVG.
    Plot {
        input: PathBuf,
        /// Output file; defaults to the input with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by the experiment subcommands. They override `--config`.
#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice size(s); several sizes make a sweep.
    #[arg(long, value_delimiter = ',')]
    lattice: Vec<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Evaluation error rate(s).
    #[arg(long, value_delimiter = ',')]
    error_rate: Vec<f64>,
    /// Training error rate(s).
    #[arg(long, value_delimiter = ',')]
    train_error_rate: Vec<f64>,
    /// Training samples for `train`, evaluated samples otherwise.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// gapt, gap, mld, mld-truncated or zero.
    #[arg(long)]
    decoder: Option<DecoderKind>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to write (`train`) or read (`eval`, `threshold`, `bench`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    /// Config file (or defaults) with flags applied on top.
    fn resolve(&self, samples_are_training: bool) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        match self.lattice.as_slice() {
            [] => {}
            [l] => {
                c.lattice = *l;
                c.sweep_lattices.clear();
            }
            many => {
                c.lattice = many[0];
                c.sweep_lattices = many.to_vec();
            }
        }
        if let Some(d) = self.dim {
            c.dim = d;
        }
        if !self.error_rate.is_empty() {
            c.error_rates = self.error_rate.clone();
        }
        if let Some(&p) = self.train_error_rate.first() {
            c.train_error_rate = p;
        }
        if let Some(n) = self.samples {
            if samples_are_training {
                c.train_samples = n;
            } else {
                c.eval_samples = n;
            }
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = self.decoder {
            c.decoder = d;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        c.validate()?;
        fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
        Ok(c)
    }

    fn train_rates(&self, c: &ExperimentConfig) -> Vec<f64> {
        if self.train_error_rate.is_empty() {
            vec![c.train_error_rate]
        } else {
            self.train_error_rate.clone()
        }
    }

    fn checkpoint(&self, c: &ExperimentConfig) -> Result<Option<Checkpoint>> {
        if c.decoder.pooling().is_none() {
            return Ok(None);
        }
        let path = self
            .checkpoint
            .as_ref()
            .with_context(|| format!("decoder {} needs --checkpoint", c.decoder))?;
        let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
        Ok(Some(ckpt))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn save_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_metrics(create(path)?, rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn print_row(r: &MetricsRow) {
    let loss = r.loss.map_or(String::new(), |l| format!(" loss {l:.4}"));
    let time = r.wall_time_per_decode.map_or(String::new(), |t| {
        format!(" {:.1} us/decode ({:.0}/s)", t * 1e6, 1.0 / t)
    });
    println!(
        "{} L={} p={}: accuracy {:.4}{loss}{time}",
        r.decoder, r.l, r.p, r.accuracy
    );
}

fn cmd_build(common: &Common) -> Result<()> {
    let c = common.resolve(false)?;
    for l in c.lattices() {
        let code = build_toric(l, c.dim)?;
        let report = validate(&code);
        let lat = code.lattice();
        println!(
            "L={l} dim={}: {} qubits, {} checks, {} logical qubits, {}",
            c.dim,
            lat.n_qubits(),
            lat.n_checks(),
            lat.n_logicals() / 2,
            if report.passed() { "valid" } else { "INVALID" }
        );
        for f in &report.failures {
            println!("  {f}");
        }
        if !report.passed() {
            bail!("code L={l} failed validation");
        }
        let path = c.out.join(format!("code_L{l}_d{}.nqd", c.dim));
        code.save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sample(common: &Common, stream: u64) -> Result<()> {
    let c = common.resolve(false)?;
    let code = ToricCode::new(c.lattice, c.dim)?;
    for &p in &c.error_rates {
        let path = c.out.join(format!("samples_L{}_p{p}.csv", c.lattice));
        write_dataset(
            create(&path)?,
            &code,
            &NoiseModel::new(p)?,
            c.seed,
            stream,
            c.eval_samples,
        )?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Trains with a progress line roughly every tenth of the run.
fn train_logged(c: &ExperimentConfig, l: usize) -> nqd_core::Result<(Checkpoint, TrainReport)> {
    let steps = c.train_config().steps();
    let start = Instant::now();
    let (ckpt, report) = train_network(c, l, |step, loss| {
        if (step + 1) % (steps / 10).max(1) == 0 || step + 1 == steps {
            eprintln!(
                "  L={l} p_train={} step {}/{steps} loss {loss:.4} ({:.0}s)",
                c.train_error_rate,
                step + 1,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    Ok((ckpt, report))
}

fn cmd_train(common: &Common, search: bool, range: &[f64]) -> Result<()> {
    let c = common.resolve(true)?;
    if c.decoder.pooling().is_none() {
        bail!("decoder {} is not trainable (use gapt or gap)", c.decoder);
    }
    if search {
        return cmd_search(&c, range);
    }
    let rates = common.train_rates(&c);
    let lattices = c.lattices();
    let single = rates.len() == 1 && lattices.len() == 1;
    let mut grid = Vec::new();
    for &l in &lattices {
        for &p in &rates {
            let run = ExperimentConfig {
                train_error_rate: p,
                ..c.clone()
            };
            let (ckpt, report) = train_logged(&run, l)?;
            let tag = format!("{}_L{l}_p{p}", c.decoder);
            let path = match (&common.checkpoint, single) {
                (Some(path), true) => path.clone(),
                _ => c.out.join(format!("model_{tag}.nqd")),
            };
            ckpt.save(&path)?;
            write_loss_trace(create(&c.out.join(format!("loss_{tag}.csv")))?, &report)?;
            let t = trainability_metric(&report.ce_trace)?;
            let last = report.ce_trace.len() - 1;
            println!(
                "{tag}: trainability {t:.4}, final loss {:.4}, final ce {:.4}, saved {}",
                report.loss_trace[last],
                report.ce_trace[last],
                path.display()
            );
            grid.push(TrainabilityPoint {
                decoder: c.decoder.to_string(),
                l,
                p_train: p,
                trainability: t,
            });
        }
    }
    write_trainability(create(&c.out.join("trainability.csv"))?, &grid)?;
    Ok(())
}

fn cmd_search(c: &ExperimentConfig, range: &[f64]) -> Result<()> {
    let code = ToricCode::new(c.lattice, c.dim)?;
    let result = search_p_train(range[0], range[1], P_TRAIN_RESOLUTION, |p| {
        let run = ExperimentConfig {
            train_error_rate: p,
            ..c.clone()
        };
        let (ckpt, _) = train_logged(&run, c.lattice)?;
        let decoder = build_decoder(&run, &code, p, Some(&ckpt))?;
        let acc = eval_accuracy(decoder.as_ref(), &code, p, c.eval_samples, c.seed)?.accuracy;
        println!("p_train {p}: accuracy {acc:.4}");
        Ok(acc)
    })?;
    let mut w = create(&c.out.join("p_train_search.csv"))?;
    writeln!(w, "p_train,accuracy")?;
    for (p, acc) in &result.probes {
        writeln!(w, "{p},{acc}")?;
    }
    match result.best {
        Some(p) => println!("highest p_train with accuracy > 0.5: {p}"),
        None => println!("no p_train in range reaches accuracy > 0.5"),
    }
    Ok(())
}

fn cmd_eval(common: &Common) -> Result<()> {
    let c = common.resolve(false)?;
    let ckpt = common.checkpoint(&c)?;
    let p_train = ckpt
        .as_ref()
        .and_then(|k| k.train.as_ref())
        .map(|t| t.p_train);
    let mut rows = Vec::new();
    for l in c.lattices() {
        let code = ToricCode::new(l, c.dim)?;
        for &p in &c.error_rates {
            let decoder = build_decoder(&c, &code, p, ckpt.as_ref())?;
            let mut row = eval_accuracy(decoder.as_ref(), &code, p, c.eval_samples, c.seed)?;
            row.p_train = p_train;
            print_row(&row);
            rows.push(row);
        }
    }
    save_metrics(&c.out.join("metrics.csv"), &rows)
}

fn cmd_threshold(common: &Common) -> Result<()> {
    let c = common.resolve(false)?;
    let ckpt = common.checkpoint(&c)?;
    let lattices = c.lattices();
    if lattices.len() < 2 {
        bail!("a threshold sweep needs at least two lattice sizes (--lattice 3,4,5)");
    }
    let mut grid = c.error_rates.clone();
    grid.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    let (_, estimate) = threshold_sweep(&lattices, &grid, |l, p| {
        let code = ToricCode::new(l, c.dim)?;
        let decoder = build_decoder(&c, &code, p, ckpt.as_ref())?;
        let row = eval_accuracy(decoder.as_ref(), &code, p, c.eval_samples, c.seed)?;
        print_row(&row);
        let acc = row.accuracy;
        rows.push(row);
        Ok(acc)
    })?;
    save_metrics(&c.out.join("threshold_metrics.csv"), &rows)?;
    write_threshold(create(&c.out.join("threshold.csv"))?, &estimate)?;
    for pair in &estimate.pairs {
        let p = pair.p.map_or("none".to_string(), |p| format!("{p:.5}"));
        println!("L={} vs L={}: crossing {p}", pair.l1, pair.l2);
    }
    println!("{}", estimate.describe());
    Ok(())
}

fn cmd_bench(common: &Common) -> Result<()> {
    let c = common.resolve(false)?;
    let ckpt = common.checkpoint(&c)?;
    let code = ToricCode::new(c.lattice, c.dim)?;
    let mut rows = Vec::new();
    for &p in &c.error_rates {
        let decoder = build_decoder(&c, &code, p, ckpt.as_ref())?;
        for row in bench_runtime(decoder.as_ref(), &code, p, c.eval_samples, c.seed)? {
            print_row(&row);
            rows.push(row);
        }
    }
    save_metrics(&c.out.join("bench.csv"), &rows)
}

fn cmd_plot(input: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let svg = plot_csv(&text)?;
    let path = out.map_or_else(|| input.with_extension("svg"), Path::to_path_buf);
    fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Build(common) => cmd_build(&common),
        Command::Sample { common, stream } => cmd_sample(&common, stream),
        Command::Train {
            common,
            search_p_train,
            search_range,
        } => cmd_train(&common, search_p_train, &search_range),
        Command::Eval(common) => cmd_eval(&common),
        Command::Threshold(common) => cmd_threshold(&common),
        Command::Bench(common) => cmd_bench(&common),
        Command::Plot { input, out } => cmd_plot(&input, out.as_deref()),
    }
}
