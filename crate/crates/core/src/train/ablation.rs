use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{run_on, ExperimentData, MetricsReport, SplitConfig, TrainConfig, TrainError, TrainHistory};
use crate::graph::Snapshot;
use crate::models::{Architecture, ModelConfig, SpatialKind, TemporalKind};

pub const ABLATION_SPATIAL: [SpatialKind; 4] = [SpatialKind::Gcn, SpatialKind::Gat, SpatialKind::Gatv2, SpatialKind::Gtc];
pub const ABLATION_TEMPORAL: [TemporalKind; 3] = [TemporalKind::None, TemporalKind::Gru, TemporalKind::Lstm];

#[derive(Clone, Debug)]
pub struct AblationCell {
    pub spatial: SpatialKind,
    pub temporal: TemporalKind,
    /// Test metrics, or the error that stopped this cell.
    pub result: Result<(MetricsReport, TrainHistory), String>,
}

impl AblationCell {
    pub fn name(&self) -> String {
        format!("{}-{}", self.spatial.name(), self.temporal.name())
    }
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub window: usize,
    pub cells: Vec<AblationCell>,
}

impl AblationReport {
    pub fn get(&self, spatial: SpatialKind, temporal: TemporalKind) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.spatial == spatial && c.temporal == temporal)
    }
}

/// Trains every spatial × temporal combination on one shared split with the
/// same seeds. A failing cell is recorded and the remaining cells still run.
/// With `threads > 1` cells train concurrently; results do not depend on it.
pub fn ablation_matrix(
    snapshots: &[Snapshot],
    base: &ModelConfig,
    train: &TrainConfig,
    split: &SplitConfig,
    threshold_db: f64,
    threads: usize,
    on_cell: impl FnMut(&AblationCell) + Send,
) -> Result<AblationReport, TrainError> {
    let base = ModelConfig {
        architecture: Architecture::Stged,
        ..base.clone()
    };
    let data = ExperimentData::new(snapshots, &base, split, threshold_db)?;
    let grid: Vec<(SpatialKind, TemporalKind)> = ABLATION_SPATIAL
        .into_iter()
        .flat_map(|s| ABLATION_TEMPORAL.into_iter().map(move |t| (s, t)))
        .collect();
    let run = |(spatial, temporal): (SpatialKind, TemporalKind)| {
        let cfg = ModelConfig {
            spatial_kind: spatial,
            temporal_kind: temporal,
            ..base.clone()
        };
        AblationCell {
            spatial,
            temporal,
            result: run_on(&data, &cfg, train)
                .map(|o| (o.test, o.history))
                .map_err(|e| e.to_string()),
        }
    };
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<AblationCell>>> = grid.iter().map(|_| Mutex::new(None)).collect();
    let on_cell = Mutex::new(on_cell);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        let Some(&job) = grid.get(k) else { break };
        let cell = run(job);
        (on_cell.lock().unwrap())(&cell);
        *slots[k].lock().unwrap() = Some(cell);
    };
    std::thread::scope(|s| {
        for _ in 1..threads.clamp(1, grid.len()) {
            s.spawn(worker);
        }
        worker();
    });
    Ok(AblationReport {
        window: base.window,
        cells: slots.into_iter().map(|c| c.into_inner().unwrap().expect("every cell ran")).collect(),
    })
}
