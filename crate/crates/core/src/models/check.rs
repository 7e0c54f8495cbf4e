use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Recurrent;
use super::*;
use crate::diffcore::{grad_check, grad_check_sampled, DiffError, GradCheckReport, ParamStore, Tensor, Var};
use crate::graph::{EdgeRecord, NodeState, Snapshot};

/// Finite-difference step used by [`gradient_suite`].
pub const GRADCHECK_EPS: f64 = 1e-5;

/// One named gradient check and its worst relative error.
#[derive(Clone, Debug)]
pub struct GradCheckOutcome {
    pub name: String,
    pub report: GradCheckReport,
}

fn snapshot(rng: &mut ChaCha8Rng, t: usize, n: usize, edges: usize) -> Snapshot {
    let nodes = (0..n)
        .map(|id| NodeState {
            id,
            position: [rng.random_range(0.0..3000.0), rng.random_range(0.0..3000.0)],
            velocity: [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
        })
        .collect();
    let edges = (0..edges)
        .map(|_| {
            let src = rng.random_range(0..n);
            EdgeRecord {
                src,
                dst: (src + rng.random_range(1..n)) % n,
                distance: rng.random_range(1.0..3000.0),
                path_loss: rng.random_range(40.0..140.0),
                prop_delay: rng.random_range(0.0..1e-5),
                timestamp: rng.random_range(0.0..1.0),
            }
        })
        .collect();
    Snapshot { t, nodes, edges }
}

fn as_diff(e: ModelError) -> DiffError {
    match e {
        ModelError::Diff(d) => d,
        other => DiffError::InvalidArgument(other.to_string()),
    }
}

/// Gradient checks of every spatial layer kind, both recurrent cells, the pair
/// decoder, and full models on a 3-node, 2-step window at desk widths. Full
/// models check `per_param` sampled entries of each parameter.
pub fn gradient_suite(seed: u64, per_param: usize) -> Result<Vec<GradCheckOutcome>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let snaps: Vec<Snapshot> = (0..2).map(|t| snapshot(&mut rng, t, 3, 6)).collect();
    let scaler = FeatureScaler::fit(&snaps, NodeFeatureSet::VelocityPosition);
    let g = GraphInput::new(&snaps[0], &scaler)?;

    for kind in [SpatialKind::Gcn, SpatialKind::Gat, SpatialKind::Gatv2, SpatialKind::Gtc] {
        let mut store = ParamStore::new();
        let layer = SpatialLayer::new(kind, &mut store, "s", 4, EDGE_DIM, 4, 2, 3, true, &mut rng)?;
        let weights = Tensor::new(vec![3, 3], (0..9).map(|k| (k as f64 * 0.37).sin()).collect())?;
        let report = grad_check(&mut store, GRADCHECK_EPS, |tape, store| {
            let ev = EdgeVars::new(tape, &g);
            let x = tape.constant(g.x.clone());
            let y = layer.forward(tape, store, &ev, x).map_err(as_diff)?;
            let y = tape.tanh(y)?;
            let w = tape.constant(weights.clone());
            let y = tape.mul(y, w)?;
            tape.sum(y)
        })?;
        out.push(GradCheckOutcome {
            name: kind.name().into(),
            report,
        });
    }

    for lstm in [true, false] {
        let mut store = ParamStore::new();
        let rnn = Recurrent::new(&mut store, "r", lstm, 3, 4, 2, &mut rng)?;
        let xs: Vec<Tensor> = (0..3)
            .map(|_| Tensor::new(vec![2, 3], (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect::<Result<_, _>>()?;
        let report = grad_check(&mut store, GRADCHECK_EPS, |tape, store| {
            let seq: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
            let h = rnn.forward(tape, store, &seq, &mut Ctx::eval()).map_err(as_diff)?;
            let h = tape.mul(h, h)?;
            tape.sum(h)
        })?;
        out.push(GradCheckOutcome {
            name: if lstm { "lstm" } else { "gru" }.into(),
            report,
        });
    }

    let pairs = PairIndex::all(3);
    let labels: Arc<[f64]> = (0..6).map(|k| ((k / 2) % 2) as f64).collect();
    {
        let mut store = ParamStore::new();
        let dec = PairDecoder::new(&mut store, "d", 3, &[4, 3], &mut rng)?;
        let z = Tensor::new(vec![3, 3], (0..9).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let report = grad_check(&mut store, GRADCHECK_EPS, |tape, store| {
            let zv = tape.constant(z.clone());
            let l = dec
                .forward(tape, store, zv, &pairs.src, &pairs.dst, &mut Ctx::eval())
                .map_err(as_diff)?;
            tape.bce_with_logits(l, labels.clone())
        })?;
        out.push(GradCheckOutcome {
            name: "decoder".into(),
            report,
        });
    }

    let data = Prepared::new(&snaps, &scaler, true)?;
    for name in ["gtc-lstm", "gcn-gru", "mlp", "lstm"] {
        let config = ModelConfig {
            window: 2,
            ..ModelConfig::desk().with_model_name(name)?
        };
        let model = Model::new(config, scaler.clone(), seed)?;
        let mut store = model.store.clone();
        let report = grad_check_sampled(&mut store, GRADCHECK_EPS, per_param, seed, |tape, store| {
            let l = model
                .logits_with(store, tape, &data, 0, &pairs, &mut Ctx::eval())
                .map_err(as_diff)?;
            tape.bce_with_logits(l, labels.clone())
        })?;
        out.push(GradCheckOutcome {
            name: format!("model {name}"),
            report,
        });
    }
    Ok(out)
}
