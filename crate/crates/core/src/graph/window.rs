use super::{label_connectivity, ConnectivityMatrix, GraphError, Snapshot};

/// `w` consecutive snapshots and the connectivity of the step that follows them.
#[derive(Clone, Debug)]
pub struct TemporalWindow<'a> {
    pub snapshots: &'a [Snapshot],
    pub labels: ConnectivityMatrix,
    pub t_target: usize,
}

impl TemporalWindow<'_> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.n()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("windows are never empty")
    }
}

/// Slides a length-`w` window over `snapshots` one step at a time. Window `k` covers
/// `snapshots[k..k + w]` and is labelled from `snapshots[k + w]`.
pub fn build_windows(
    snapshots: &[Snapshot],
    w: usize,
    threshold_db: f64,
) -> Result<Vec<TemporalWindow<'_>>, GraphError> {
    if w == 0 {
        return Err(GraphError::InvalidArgument("window size must be positive".into()));
    }
    if snapshots.len() <= w {
        return Err(GraphError::TooFewSnapshots {
            len: snapshots.len(),
            required: w + 1,
        });
    }
    for pair in snapshots.windows(2) {
        if pair[1].t != pair[0].t + 1 {
            return Err(GraphError::Invariant(format!(
                "snapshot indices not consecutive: {} follows {}",
                pair[1].t, pair[0].t
            )));
        }
    }
    Ok((0..snapshots.len() - w)
        .map(|k| {
            let target = &snapshots[k + w];
            TemporalWindow {
                snapshots: &snapshots[k..k + w],
                labels: label_connectivity(target, threshold_db),
                t_target: target.t,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeState};

    fn series(len: usize) -> Vec<Snapshot> {
        (0..len)
            .map(|t| Snapshot {
                t,
                nodes: (0..3)
                    .map(|id| NodeState {
                        id,
                        position: [0.0; 2],
                        velocity: [0.0; 2],
                    })
                    .collect(),
                // link t%3 -> (t+1)%3 only
                edges: vec![EdgeRecord {
                    src: t % 3,
                    dst: (t + 1) % 3,
                    distance: 1.0,
                    path_loss: 50.0,
                    prop_delay: 0.0,
                    timestamp: 0.0,
                }],
            })
            .collect()
    }

    #[test]
    fn count_is_len_minus_w() {
        let s = series(12);
        for w in [1, 2, 5] {
            let ws = build_windows(&s, w, 128.0).unwrap();
            assert_eq!(ws.len(), 12 - w);
            let targets: Vec<_> = ws.iter().map(|x| x.t_target).collect();
            assert_eq!(targets, (w..12).collect::<Vec<_>>());
            for x in &ws {
                assert_eq!(x.len(), w);
                assert_eq!(x.last().t + 1, x.t_target);
            }
        }
    }

    #[test]
    fn single_step_window_labels_from_next() {
        let s = series(2);
        let ws = build_windows(&s, 1, 128.0).unwrap();
        assert_eq!(ws.len(), 1);
        assert!(ws[0].labels.get(1, 2));
        assert_eq!(ws[0].labels.count_ones(), 1);
    }

    #[test]
    fn too_short_is_an_error() {
        let s = series(5);
        let err = build_windows(&s, 5, 128.0).unwrap_err();
        assert!(matches!(err, GraphError::TooFewSnapshots { len: 5, required: 6 }));
        assert!(err.to_string().contains('6'));
    }

    #[test]
    fn large_series_window_count() {
        // 3998 states at w = 5
        let s = series(3998);
        assert_eq!(build_windows(&s, 5, 128.0).unwrap().len(), 3993);
    }
}
