use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DiffError, ParamStore, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over all parameter entries of `|analytic - numeric| / max(1, |analytic|)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index where the max occurred.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

/// Compares tape gradients with central finite differences for every scalar of every
/// parameter in `store`. `f` must build a scalar on the fresh tape it is given and be
/// deterministic. Parameter values are restored before returning.
pub fn grad_check<F>(store: &mut ParamStore, eps: f64, f: F) -> Result<GradCheckReport, DiffError>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var, DiffError>,
{
    check_entries(store, eps, |len| (0..len).collect(), f)
}

/// Like [`grad_check`] but probes at most `per_param` randomly chosen entries of
/// each parameter, for models too wide to perturb exhaustively. Entries are
/// picked with a generator seeded by `seed`.
pub fn grad_check_sampled<F>(
    store: &mut ParamStore,
    eps: f64,
    per_param: usize,
    seed: u64,
    f: F,
) -> Result<GradCheckReport, DiffError>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var, DiffError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check_entries(
        store,
        eps,
        |len| {
            let mut picked = rand::seq::index::sample(&mut rng, len, per_param.min(len)).into_vec();
            picked.sort_unstable();
            picked
        },
        f,
    )
}

fn check_entries<F, S>(store: &mut ParamStore, eps: f64, mut select: S, mut f: F) -> Result<GradCheckReport, DiffError>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var, DiffError>,
    S: FnMut(usize) -> Vec<usize>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(DiffError::InvalidArgument(format!("eps {eps} outside (0, 1e-3]")));
    }
    store.zero_grad();
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    tape.backward(out, store)?;
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();

    let mut eval = |store: &ParamStore, name: &str| -> Result<f64, DiffError> {
        let mut tape = Tape::new();
        let v = f(&mut tape, store).map_err(|e| match e {
            DiffError::NonFinite { .. } => DiffError::GradCheckNonFinite(name.to_string()),
            other => other,
        })?;
        let value = tape
            .value(v)
            .item()
            .ok_or_else(|| DiffError::NotScalar { shape: tape.shape(v).to_vec() })?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(DiffError::GradCheckNonFinite(name.to_string()))
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        let name = store.get(id).name.clone();
        for k in select(store.value(id).len()) {
            let orig = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + eps;
            let plus = eval(store, &name);
            store.get_mut(id).value.data_mut()[k] = orig - eps;
            let minus = eval(store, &name);
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic[pi][k];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    Ok(report)
}
