//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ParamStore, Result, TensorError};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Step for `(f(x+h) - f(x-h)) / 2h`.
    pub step: f64,
    pub rel_tolerance: f64,
    /// Coordinates whose absolute error is below this pass regardless of the
    /// relative error (degenerate denominators).
    pub abs_floor: f64,
    /// Coordinates sampled per parameter; all are checked if fewer exist.
    pub coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tolerance: 1e-4,
            abs_floor: 1e-8,
            coords_per_param: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    /// Largest relative error among coordinates above the absolute floor.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }
}

/// Compare the gradients currently accumulated in `store` with central
/// differences of `loss`. `loss` must be deterministic (no dropout).
/// Frozen parameters are not reported.
pub fn finite_diff_check<F>(
    store: &mut ParamStore<f64>,
    mut loss: F,
    config: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore<f64>) -> Result<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = Vec::new();
    let h = config.step;
    for id in 0..store.len() {
        if store.by_id(id).frozen {
            continue;
        }
        let n = store.by_id(id).value.len();
        let coords: Vec<usize> = if n <= config.coords_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, config.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let mut check = ParamCheck {
            name: store.by_id(id).name.clone(),
            coords_checked: coords.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            passed: true,
        };
        for &c in &coords {
            let analytic = store.by_id(id).grad.data()[c];
            let original = store.by_id(id).value.data()[c];
            store.by_id_mut(id).value.data_mut()[c] = original + h;
            let plus = loss(store)?;
            store.by_id_mut(id).value.data_mut()[c] = original - h;
            let minus = loss(store)?;
            store.by_id_mut(id).value.data_mut()[c] = original;
            if !(plus.is_finite() && minus.is_finite() && analytic.is_finite()) {
                return Err(TensorError::NonFinite(format!(
                    "gradient check of {} coordinate {c}",
                    check.name
                )));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let abs = (numeric - analytic).abs();
            check.max_abs_error = check.max_abs_error.max(abs);
            if abs <= config.abs_floor {
                continue;
            }
            let rel = abs / numeric.abs().max(analytic.abs());
            check.max_rel_error = check.max_rel_error.max(rel);
            if rel > config.rel_tolerance {
                check.passed = false;
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport { params: report })
}
