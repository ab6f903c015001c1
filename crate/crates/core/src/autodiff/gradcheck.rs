use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::params::{GradStore, ParameterStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Entries checked per parameter; `None` checks every entry. Half of the
    /// sample is drawn from entries with non-zero analytic gradient.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub entries_checked: usize,
}

/// Compares backward gradients with central differences.
///
/// The error per entry is `|analytic - numeric| / max(1, |numeric|)`; the
/// report carries the maximum over all checked entries.
pub fn grad_check<F>(
    store: &mut ParameterStore,
    build: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<Var>,
{
    let eval = |store: &ParameterStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        Ok(g.scalar(loss))
    };

    let first = eval(store)?;
    let second = eval(store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic(first, second));
    }

    let mut analytic = GradStore::zeros_like(store);
    {
        let mut g = Graph::new(store);
        let loss = build(&mut g)?;
        g.backward(loss, &mut analytic)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        entries_checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.value(id).len();
        let entries: Vec<usize> = match opts.max_entries_per_param {
            Some(k) if k < n => {
                let grad = analytic.get(id).data();
                let mut nonzero: Vec<usize> = (0..n).filter(|&i| grad[i] != 0.0).collect();
                let mut all: Vec<usize> = (0..n).collect();
                nonzero.shuffle(&mut rng);
                all.shuffle(&mut rng);
                let mut picked: Vec<usize> = nonzero.into_iter().take(k.div_ceil(2)).collect();
                for i in all {
                    if picked.len() >= k {
                        break;
                    }
                    if !picked.contains(&i) {
                        picked.push(i);
                    }
                }
                picked
            }
            _ => (0..n).collect(),
        };
        for i in entries {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + opts.eps;
            let plus = eval(store);
            store.value_mut(id).data_mut()[i] = orig - opts.eps;
            let minus = eval(store);
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.eps);
            let a = analytic.get(id).data()[i];
            let err = (a - numeric).abs() / numeric.abs().max(1.0);
            report.entries_checked += 1;
            if report.worst_param.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = Some(store.name(id).to_string());
            }
        }
    }
    Ok(report)
}
