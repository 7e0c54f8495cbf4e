use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stged::graph::{load_dataset, save_dataset, Dataset, DEFAULT_THRESHOLD_DB};
use stged::models::{gradient_suite, Model, ModelConfig, GRADCHECK_EPS};
use stged::sim::{simulate, MobilityKind, SimConfig};
use stged::train::{
    ablation_csv, ablation_matrix, ablation_table, evaluate, loss_csv, metrics_csv, metrics_table, train_with,
    ExperimentData, OptimizerKind, ReportRow, SplitConfig, TrainConfig,
};

mod analyze;

/// Relative output paths are resolved against this directory when it is set.
const OUT_DIR_ENV: &str = "STGED_OUT_DIR";

#[derive(Parser)]
#[command(name = "stged", version, about = "Tactical-network link prediction: simulate, train, evaluate, ablate, analyze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic snapshot stream.
    Simulate(SimulateArgs),
    /// Train a model and write a checkpoint plus loss curve.
    Train(TrainArgs),
    /// Score a checkpoint on one partition of a dataset.
    Eval(EvalArgs),
    /// Train the spatial × temporal encoder grid.
    Ablate(AblateArgs),
    /// Hop-count matrices and connectivity over time.
    Analyze(AnalyzeArgs),
    /// Finite-difference gradient checks of every layer kind.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with simulation fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mobility: Option<MobilityArg>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    vmax: Option<f64>,
    /// Mean edge records per in-range pair per second.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MobilityArg {
    Rwp,
    Grouped,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Partition {
    Train,
    Val,
    Test,
    All,
}

/// Everything a training run depends on besides the dataset.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    model: ModelConfig,
    train: TrainConfig,
    split: SplitConfig,
    threshold_db: Option<f64>,
}

impl RunConfig {
    fn threshold(&self) -> f64 {
        self.threshold_db.unwrap_or(DEFAULT_THRESHOLD_DB)
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with `model`, `train`, `split` and `threshold_db` sections; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Width preset applied before the config file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    data: PathBuf,
    /// Snapshots per input window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Windows per optimizer step.
    #[arg(long)]
    batch: Option<usize>,
    /// Early-stopping patience; 0 disables early stopping.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_windows_per_epoch: Option<usize>,
    /// Training seed (initialisation, shuffling, balancing, dropout).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
}

impl ExperimentArgs {
    fn resolve(&self, model: Option<&str>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
            None => RunConfig {
                model: match self.preset {
                    Some(Preset::Paper) => ModelConfig::paper(),
                    _ => ModelConfig::desk(),
                },
                train: match self.preset {
                    Some(Preset::Paper) => TrainConfig::paper(),
                    _ => TrainConfig::default(),
                },
                ..RunConfig::default()
            },
        };
        if let Some(name) = model {
            cfg.model = cfg.model.with_model_name(name)?;
        }
        if let Some(w) = self.window {
            cfg.model.window = w;
        }
        let t = &mut cfg.train;
        if let Some(v) = self.epochs {
            t.epochs = v;
        }
        if let Some(v) = self.lr {
            t.learning_rate = v;
        }
        if let Some(v) = self.optimizer {
            t.optimizer = match v {
                OptimizerArg::Adam => OptimizerKind::Adam,
                OptimizerArg::Sgd => OptimizerKind::Sgd,
            };
        }
        if let Some(v) = self.batch {
            t.batch_windows = v;
        }
        if let Some(v) = self.patience {
            t.patience = (v > 0).then_some(v);
        }
        if let Some(v) = self.max_windows_per_epoch {
            t.max_windows_per_epoch = Some(v);
        }
        if let Some(v) = self.seed {
            t.seed = v;
        }
        if let Some(v) = self.split_seed {
            cfg.split.seed = v;
        }
        cfg.model.validate()?;
        t.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Model name such as gtc-lstm, gcn, none-gru, mlp, lstm or gru.
    #[arg(long)]
    model: Option<String>,
    /// Checkpoint path; the loss curve goes to `<out>.loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Partition,
    /// Overrides the split seed recorded next to the checkpoint.
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Concurrent training runs.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Grid CSV; a text table goes to `<out>.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Write hop-count matrices for the selected steps.
    #[arg(long)]
    hops: bool,
    /// Steps whose hop matrices are written (default: the first).
    #[arg(long, value_delimiter = ',')]
    steps: Vec<usize>,
    /// Also emit SVG heatmaps and a connectivity plot.
    #[arg(long)]
    svg: bool,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_DB)]
    threshold: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled entries per parameter for full models.
    #[arg(long, default_value_t = 6)]
    per_param: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn write(p: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(p, contents).with_context(|| format!("writing {}", p.display()))
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn provenance(seed: u64) -> String {
    format!("command: {}\nseed: {seed}", command_line())
}

fn log_config(what: &str, cfg: &impl Serialize) -> Result<()> {
    eprintln!("[stged] {what}: {}", serde_json::to_string(cfg)?);
    Ok(())
}

fn load(p: &Path) -> Result<Dataset> {
    load_dataset(p).with_context(|| format!("loading dataset {}", p.display()))
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg: SimConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => match a.mobility {
            Some(MobilityArg::Grouped) => SimConfig::grouped(),
            _ => SimConfig::default(),
        },
    };
    if let Some(m) = a.mobility {
        cfg.mobility = match m {
            MobilityArg::Rwp => MobilityKind::RandomWaypoint,
            MobilityArg::Grouped => MobilityKind::GroupedWaypoint,
        };
    }
    if let Some(v) = a.nodes {
        cfg.n_nodes = v;
    }
    if let Some(v) = a.steps {
        cfg.n_steps = v;
    }
    if let Some(v) = a.vmax {
        cfg.v_max = v;
    }
    if let Some(v) = a.rate {
        cfg.message_rate = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    log_config("simulation config", &cfg)?;
    let ds = simulate(&cfg)?.with_provenance(provenance(cfg.seed));
    ds.validate()?;
    let out = out_path(&a.out);
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_dataset(&out, &ds).with_context(|| format!("writing {}", out.display()))?;
    let edges: usize = ds.snapshots.iter().map(|s| s.edges.len()).sum();
    eprintln!(
        "[stged] wrote {} ({} steps, {} nodes, {:.1} edges/step)",
        out.display(),
        ds.snapshots.len(),
        cfg.n_nodes,
        edges as f64 / ds.snapshots.len().max(1) as f64
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let cfg = a.exp.resolve(a.model.as_deref())?;
    log_config("run config", &cfg)?;
    let ds = load(&a.exp.data)?;
    let data = ExperimentData::new(&ds.snapshots, &cfg.model, &cfg.split, cfg.threshold())?;
    eprintln!(
        "[stged] {} windows: {} train, {} val, {} test",
        data.labels.len(),
        data.split.train.len(),
        data.split.val.len(),
        data.split.test.len()
    );
    let mut model = Model::new(cfg.model.clone(), data.scaler.clone(), cfg.train.seed)?;
    let history = train_with(&mut model, &data, &cfg.train, |e| {
        eprintln!(
            "[stged] epoch {:>3}  train {:.5}  val {:.5}",
            e.epoch, e.train_loss, e.val_loss
        );
    })?;
    let prov = provenance(cfg.train.seed);
    let out = out_path(&a.out);
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    model.save(&out, &prov)?;
    write(&with_suffix(&out, ".run.json"), serde_json::to_string_pretty(&cfg)?)?;
    write(&with_suffix(&out, ".loss.csv"), loss_csv(&history, &prov))?;
    let val = evaluate(&model, &data, &data.split.val)?;
    eprintln!(
        "[stged] wrote {} (best epoch {}, val accuracy {:.4}, f1 {:.4})",
        out.display(),
        history.best_epoch,
        val.accuracy,
        val.f1
    );
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let model = Model::load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let run_file = with_suffix(&a.checkpoint, ".run.json");
    let mut run: RunConfig = if run_file.exists() {
        serde_json::from_str(&read(&run_file)?)?
    } else {
        RunConfig::default()
    };
    if let Some(s) = a.split_seed {
        run.split.seed = s;
    }
    log_config("split", &run.split)?;
    let ds = load(&a.data)?;
    let data = ExperimentData::with_scaler(&ds.snapshots, &model.config, &run.split, run.threshold(), model.scaler.clone())?;
    let windows: Vec<usize> = match a.split {
        Partition::Train => data.split.train.clone(),
        Partition::Val => data.split.val.clone(),
        Partition::Test => data.split.test.clone(),
        Partition::All => (0..data.labels.len()).collect(),
    };
    let metrics = evaluate(&model, &data, &windows)?;
    let rows = [ReportRow {
        model: model.name(),
        window: model.config.window,
        metrics,
    }];
    write(&out_path(&a.out), metrics_csv(&rows, &provenance(run.train.seed)))?;
    print!("{}", metrics_table(&rows));
    Ok(())
}

fn run_ablate(a: AblateArgs) -> Result<()> {
    let cfg = a.exp.resolve(None)?;
    log_config("run config", &cfg)?;
    let ds = load(&a.exp.data)?;
    let report = ablation_matrix(
        &ds.snapshots,
        &cfg.model,
        &cfg.train,
        &cfg.split,
        cfg.threshold(),
        a.threads,
        |c| match &c.result {
            Ok((m, _)) => eprintln!("[stged] {:<12} accuracy {:.4}  f1 {:.4}", c.name(), m.accuracy, m.f1),
            Err(e) => eprintln!("[stged] {:<12} failed: {e}", c.name()),
        },
    )?;
    let prov = provenance(cfg.train.seed);
    let out = out_path(&a.out);
    write(&out, ablation_csv(&report, &prov))?;
    let table = ablation_table(&report);
    let header: String = prov.lines().map(|l| format!("# {l}\n")).collect();
    write(&with_suffix(&out, ".txt"), format!("{header}{table}"))?;
    print!("{table}");
    let failed = report.cells.iter().filter(|c| c.result.is_err()).count();
    if failed > 0 {
        bail!("{failed} ablation cells failed");
    }
    Ok(())
}

fn run_gradcheck(a: GradcheckArgs) -> Result<()> {
    eprintln!("[stged] gradcheck seed {} eps {GRADCHECK_EPS} tolerance {}", a.seed, a.tolerance);
    let mut failed = 0;
    for o in gradient_suite(a.seed, a.per_param)? {
        let ok = o.report.max_rel_error < a.tolerance;
        failed += usize::from(!ok);
        println!(
            "{} {:<16} max_rel_error {:.3e} ({} entries)",
            if ok { "PASS" } else { "FAIL" },
            o.name,
            o.report.max_rel_error,
            o.report.entries_checked
        );
    }
    if failed > 0 {
        bail!("{failed} gradient checks failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Ablate(a) => run_ablate(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Gradcheck(a) => run_gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
