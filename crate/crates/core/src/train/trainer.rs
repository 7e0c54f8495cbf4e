use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricsReport, PairBatch, Split, SplitConfig, TrainError};
use crate::diffcore::{clip_grad_norm, Adam, DiffError, Sgd, Tape, Var};
use crate::graph::{build_windows, ConnectivityMatrix, Snapshot, DEFAULT_THRESHOLD_DB};
use crate::models::{Ctx, FeatureScaler, Model, ModelConfig, ModelError, PairIndex, Prepared};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_windows: usize,
    pub optimizer: OptimizerKind,
    /// Epochs without validation improvement before stopping; `None` trains every epoch.
    pub patience: Option<usize>,
    pub grad_clip: Option<f64>,
    /// Caps the training windows visited per epoch (a fresh random subset each epoch).
    pub max_windows_per_epoch: Option<usize>,
    /// Caps the validation windows used for the validation loss (fixed subset).
    pub max_val_windows: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 20,
            batch_windows: 4,
            optimizer: OptimizerKind::Adam,
            patience: Some(5),
            grad_clip: Some(5.0),
            max_windows_per_epoch: None,
            max_val_windows: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Published optimisation settings.
    pub fn paper() -> Self {
        Self {
            learning_rate: 1e-6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batch_windows == 0 {
            return Err(TrainError::Config("batch_windows must be at least 1".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(TrainError::Config("grad_clip must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Windows, labels, split and scaled inputs for one dataset and window size.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub window: usize,
    pub n_nodes: usize,
    /// Connectivity of the step after window `k`; window `k` starts at snapshot `k`.
    pub labels: Vec<ConnectivityMatrix>,
    pub split: Split,
    pub scaler: FeatureScaler,
    pub prepared: Prepared,
}

impl ExperimentData {
    /// Builds windows, splits them, fits the scaler on the input snapshots of
    /// training windows and converts every snapshot.
    pub fn new(
        snapshots: &[Snapshot],
        config: &ModelConfig,
        split_config: &SplitConfig,
        threshold_db: f64,
    ) -> Result<Self, TrainError> {
        Self::build(snapshots, config, split_config, threshold_db, None)
    }

    /// Like [`ExperimentData::new`] but scales inputs with a given scaler, for
    /// evaluating a trained model.
    pub fn with_scaler(
        snapshots: &[Snapshot],
        config: &ModelConfig,
        split_config: &SplitConfig,
        threshold_db: f64,
        scaler: FeatureScaler,
    ) -> Result<Self, TrainError> {
        Self::build(snapshots, config, split_config, threshold_db, Some(scaler))
    }

    fn build(
        snapshots: &[Snapshot],
        config: &ModelConfig,
        split_config: &SplitConfig,
        threshold_db: f64,
        scaler: Option<FeatureScaler>,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let w = config.window;
        let windows = build_windows(snapshots, w, threshold_db)?;
        let n_nodes = snapshots[0].n_nodes();
        if let Some(s) = snapshots.iter().find(|s| s.n_nodes() != n_nodes) {
            return Err(TrainError::Config(format!(
                "snapshot {} has {} nodes, expected {n_nodes}",
                s.t,
                s.n_nodes()
            )));
        }
        if n_nodes < 2 {
            return Err(TrainError::Config("need at least two nodes".into()));
        }
        let split = super::split(windows.len(), split_config)?;
        let scaler = scaler.unwrap_or_else(|| {
            let mut used = vec![false; snapshots.len()];
            for &k in &split.train {
                used[k..k + w].iter_mut().for_each(|u| *u = true);
            }
            let train_snaps = snapshots.iter().zip(&used).filter(|(_, &u)| u).map(|(s, _)| s);
            FeatureScaler::fit(train_snaps, config.node_features)
        });
        let with_pairs = config.architecture != crate::models::Architecture::Stged;
        let prepared = Prepared::new(snapshots, &scaler, with_pairs)?;
        Ok(Self {
            window: w,
            n_nodes,
            labels: windows.into_iter().map(|tw| tw.labels).collect(),
            split,
            scaler,
            prepared,
        })
    }

    /// Labels of window `k` in [`PairIndex::all`] order.
    pub fn pair_labels(&self, k: usize) -> Vec<bool> {
        let c = &self.labels[k];
        let n = self.n_nodes;
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| c.get(i, j))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean balanced-batch loss.
    pub train_loss: f64,
    /// Mean loss over every pair of the validation windows.
    pub val_loss: f64,
    /// Batches skipped because they lacked one class.
    pub skipped_batches: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (lowest validation loss).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn non_finite(epoch: usize, batch: usize) -> impl Fn(ModelError) -> TrainError {
    move |e| match e {
        ModelError::Diff(DiffError::NonFinite { op }) => TrainError::NonFinite {
            epoch,
            batch,
            detail: format!("non-finite value in {op}"),
        },
        other => TrainError::Model(other),
    }
}

/// Mean BCE of `model` over the given pairs of the window starting at `start`,
/// recorded on `tape`.
pub fn pair_loss(
    model: &Model,
    tape: &mut Tape,
    data: &Prepared,
    start: usize,
    pairs: &PairIndex,
    labels: &[bool],
    ctx: &mut Ctx,
) -> Result<Var, ModelError> {
    let logits = model.logits(tape, data, start, pairs, ctx)?;
    let y: Arc<[f64]> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    Ok(tape.bce_with_logits(logits, y)?)
}

/// Mean loss over every ordered pair of `windows`, evaluation mode.
pub fn mean_loss(model: &Model, data: &ExperimentData, windows: &[usize]) -> Result<f64, TrainError> {
    let pairs = PairIndex::all(data.n_nodes);
    let mut total = 0.0;
    for &k in windows {
        let mut tape = Tape::new();
        let loss = pair_loss(model, &mut tape, &data.prepared, k, &pairs, &data.pair_labels(k), &mut Ctx::eval())?;
        total += tape.value(loss).data()[0];
    }
    Ok(if windows.is_empty() { 0.0 } else { total / windows.len() as f64 })
}

enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

/// Trains in place. Each epoch visits the training windows in a fresh random
/// order, groups them into batches, balances each batch's pairs, and takes one
/// optimizer step per batch. With early stopping the weights of the best
/// validation epoch are restored at the end.
pub fn train(model: &mut Model, data: &ExperimentData, config: &TrainConfig) -> Result<TrainHistory, TrainError> {
    train_with(model, data, config, |_| {})
}

/// [`train`] reporting each finished epoch to `on_epoch`.
pub fn train_with(
    model: &mut Model,
    data: &ExperimentData,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainHistory, TrainError> {
    config.validate()?;
    if model.config.window != data.window {
        return Err(TrainError::Config(format!(
            "model window {} differs from data window {}",
            model.config.window, data.window
        )));
    }
    if data.split.train.is_empty() {
        return Err(TrainError::Config("no training windows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
    dropout_rng.set_stream(1);
    let mut opt = match config.optimizer {
        OptimizerKind::Adam => Optimizer::Adam(Adam::new(config.learning_rate)),
        OptimizerKind::Sgd => Optimizer::Sgd(Sgd {
            lr: config.learning_rate,
        }),
    };
    let val_windows: Vec<usize> = match config.max_val_windows {
        Some(m) => data.split.val.iter().copied().take(m).collect(),
        None => data.split.val.clone(),
    };
    let n = data.n_nodes;
    let all_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let p = model.config.dropout;

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, crate::diffcore::ParamStore)> = None;
    let mut since_best = 0;
    for epoch in 0..config.epochs {
        let mut order = data.split.train.clone();
        order.shuffle(&mut rng);
        if let Some(m) = config.max_windows_per_epoch {
            order.truncate(m);
        }
        let (mut loss_sum, mut batches, mut skipped) = (0.0, 0usize, 0usize);
        for (b, chunk) in order.chunks(config.batch_windows).enumerate() {
            let mut batch = PairBatch::default();
            for &k in chunk {
                for (pair, label) in all_pairs.iter().zip(data.pair_labels(k)) {
                    batch.push(k, *pair, label);
                }
            }
            let balanced = match batch.balance(&mut rng) {
                Ok(bal) => bal,
                Err(TrainError::EmptyClass(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            model.store.zero_grad();
            let total = balanced.len() as f64;
            let mut batch_loss = 0.0;
            for &k in chunk {
                let sel: Vec<usize> = (0..balanced.len()).filter(|&e| balanced.window[e] == k).collect();
                if sel.is_empty() {
                    continue;
                }
                let pairs = PairIndex::from_pairs(&sel.iter().map(|&e| balanced.pairs[e]).collect::<Vec<_>>());
                let labels: Vec<bool> = sel.iter().map(|&e| balanced.labels[e]).collect();
                let mut tape = Tape::new();
                let mut ctx = Ctx::train(&mut dropout_rng, p);
                let loss = pair_loss(model, &mut tape, &data.prepared, k, &pairs, &labels, &mut ctx)
                    .map_err(non_finite(epoch, b))?;
                let weighted = tape.scale(loss, sel.len() as f64 / total).map_err(|e| non_finite(epoch, b)(e.into()))?;
                batch_loss += tape.value(weighted).data()[0];
                tape.backward(weighted, &mut model.store)
                    .map_err(|e| non_finite(epoch, b)(e.into()))?;
            }
            if !batch_loss.is_finite() || !model.store.grad_norm().is_finite() {
                return Err(TrainError::NonFinite {
                    epoch,
                    batch: b,
                    detail: "loss or gradient is not finite".into(),
                });
            }
            if let Some(c) = config.grad_clip {
                clip_grad_norm(&mut model.store, c);
            }
            match &mut opt {
                Optimizer::Adam(a) => a.step(&mut model.store),
                Optimizer::Sgd(s) => s.step(&mut model.store),
            }
            loss_sum += batch_loss;
            batches += 1;
        }
        let val_loss = mean_loss(model, data, &val_windows)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: if batches == 0 { f64::NAN } else { loss_sum / batches as f64 },
            val_loss,
            skipped_batches: skipped,
        });
        on_epoch(history.epochs.last().unwrap());
        let improved = best.as_ref().is_none_or(|(b, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, model.store.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience.is_some_and(|pat| since_best >= pat) {
                history.stopped_early = true;
                break;
            }
        }
    }
    if config.patience.is_some() {
        if let Some((_, store)) = best {
            model.store.load_values(&store)?;
        }
    }
    Ok(history)
}

/// Confusion counts over every ordered pair of every listed window.
pub fn evaluate(model: &Model, data: &ExperimentData, windows: &[usize]) -> Result<MetricsReport, TrainError> {
    let mut c = super::Confusion::default();
    for &k in windows {
        let scores = model.predict(&data.prepared, k)?;
        for (s, y) in scores.iter().zip(data.pair_labels(k)) {
            c.add(model.decide(*s), y);
        }
    }
    Ok(c.report())
}

/// Result of training one model and scoring it on the test windows.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub model: Model,
    pub history: TrainHistory,
    pub test: MetricsReport,
}

/// Prepares data, initialises the model from `train_config.seed`, trains and evaluates.
pub fn run_experiment(
    snapshots: &[Snapshot],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    split_config: &SplitConfig,
) -> Result<Outcome, TrainError> {
    let data = ExperimentData::new(snapshots, model_config, split_config, DEFAULT_THRESHOLD_DB)?;
    run_on(&data, model_config, train_config)
}

pub fn run_on(data: &ExperimentData, model_config: &ModelConfig, train_config: &TrainConfig) -> Result<Outcome, TrainError> {
    let mut model = Model::new(model_config.clone(), data.scaler.clone(), train_config.seed)?;
    let history = train(&mut model, data, train_config)?;
    let test = evaluate(&model, data, &data.split.test)?;
    Ok(Outcome { model, history, test })
}
