use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, ParamId, ParamSet};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
/// Above this many scalars only a fixed random subsample is probed.
pub const FULL_CHECK_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Entry with the largest error: (parameter name, flat index, analytic, numeric).
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// Compares analytic gradients against central differences.
///
/// `loss` evaluates the objective at the given parameters and, when handed a
/// gradient buffer, accumulates the analytic gradient into it.
pub fn grad_check<F>(params: &ParamSet, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet, Option<&mut Gradients>) -> f64,
{
    let mut analytic = params.zeroed_gradients();
    let base = loss(params, Some(&mut analytic));
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss is {base}")));
    }

    let entries: Vec<(ParamId, usize)> = params
        .iter()
        .flat_map(|(id, _, v)| (0..v.len()).map(move |i| (id, i)))
        .collect();
    let probe: Vec<(ParamId, usize)> = if entries.len() > FULL_CHECK_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
        let mut idx = sample(&mut rng, entries.len(), FULL_CHECK_LIMIT).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| entries[i]).collect()
    } else {
        entries
    };

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: probe.len(),
    };
    for (id, i) in probe {
        let original = work.value(id).as_slice()[i];
        work.value_mut(id).as_mut_slice()[i] = original + FD_STEP;
        let plus = loss(&work, None);
        work.value_mut(id).as_mut_slice()[i] = original - FD_STEP;
        let minus = loss(&work, None);
        work.value_mut(id).as_mut_slice()[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at perturbed {}[{i}]",
                params.name(id)
            )));
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic.get(id).as_slice()[i];
        let err = relative_error(a, numeric);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = err;
            report.worst = Some((params.name(id).to_string(), i, a, numeric));
        }
    }
    Ok(report)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}
