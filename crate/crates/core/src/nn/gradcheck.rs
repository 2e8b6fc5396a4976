use rand::seq::index::sample;
use rand::Rng;

use super::{Matrix, ParameterStore, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Scalar objective evaluated on a fresh tape: its value and the seed gradients
/// `(node, dL/dnode)` that start the backward pass.
pub struct Objective<T> {
    pub value: T,
    pub seeds: Vec<(Var, Matrix<T>)>,
}

impl<T: Scalar> Objective<T> {
    /// Objective whose value is the 1×1 node `loss`.
    pub fn from_scalar(tape: &Tape<'_, T>, loss: Var) -> Self {
        Self {
            value: tape.value(loss).get(0, 0),
            seeds: vec![(loss, Matrix::scalar(T::one()))],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub coordinates_checked: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Relative step: each coordinate moves by `eps · max(1, |θ|)`.
    pub eps: f64,
    /// Parameters with more scalars than this are probed at this many random coordinates.
    pub max_coords_per_param: usize,
    /// Denominator floor for the relative error.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_coords_per_param: 64,
            floor: 1e-8,
        }
    }
}

/// Compares tape gradients against central differences and returns the largest
/// relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn grad_check<T, F, R>(
    store: &mut ParameterStore<T>,
    objective: F,
    cfg: &GradCheckConfig,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<'_, T>) -> Result<Objective<T>>,
    R: Rng + ?Sized,
{
    let analytic = {
        let mut tape = Tape::new(store);
        let obj = objective(&mut tape)?;
        tape.backward(&obj.seeds)?
    };
    let eval = |store: &ParameterStore<T>| -> Result<f64> {
        let mut tape = Tape::new(store);
        Ok(objective(&mut tape)?.value.as_f64())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        coordinates_checked: 0,
    };
    let ids: Vec<_> = (0..store.len()).map(super::ParamId).collect();
    for id in ids {
        let n = store.value(id).len();
        let coords: Vec<usize> = if n > cfg.max_coords_per_param {
            sample(rng, n, cfg.max_coords_per_param).into_vec()
        } else {
            (0..n).collect()
        };
        for i in coords {
            let original = store.value(id).data()[i];
            let step = cfg.eps * original.as_f64().abs().max(1.0);
            store.get_mut(id).value.data_mut()[i] = T::from_f64_lossy(original.as_f64() + step);
            let up = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = T::from_f64_lossy(original.as_f64() - step);
            let down = eval(store)?;
            store.get_mut(id).value.data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic.get(id).map_or(0.0, |g| g.data()[i].as_f64());
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.coordinates_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
