use super::{ParamStore, Real, Result, TensorError};

/// Optimizer and training-loop settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global L2 norm bound applied to the gradients of each batch.
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Seed for batch shuffling and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 32,
            clip_norm: 0.25,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 30,
            early_stop_patience: 3,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("clip_norm", self.clip_norm),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TensorError::Invalid(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(TensorError::Invalid("Adam betas must lie in (0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TensorError::Invalid(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        if self.early_stop_patience == 0 {
            return Err(TensorError::Invalid(
                "early_stop_patience must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Global-norm clipping. Returns the factor the gradients were scaled by.
pub fn clip_gradients<T: Real>(store: &mut ParamStore<T>, clip_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm <= clip_norm || norm == 0.0 {
        return 1.0;
    }
    let factor = clip_norm / norm;
    let f = T::lit(factor);
    for p in store.iter_mut().filter(|p| !p.frozen) {
        p.grad.data_mut().iter_mut().for_each(|g| *g = *g * f);
    }
    factor
}

/// One bias-corrected Adam update (`step_index` starts at 1). Gradients are
/// zeroed afterwards.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    config: &TrainConfig,
    step_index: u64,
) -> Result<()> {
    if step_index == 0 {
        return Err(TensorError::Invalid("Adam step index starts at 1".into()));
    }
    let (b1, b2) = (config.beta1, config.beta2);
    let t = step_index as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.epsilon;
    for p in store.iter_mut() {
        if !p.frozen {
            let grads = p.grad.data();
            let m = p.first_moment.data_mut();
            for (mi, &g) in m.iter_mut().zip(grads) {
                *mi = T::lit(b1 * mi.as_f64() + (1.0 - b1) * g.as_f64());
            }
            let v = p.second_moment.data_mut();
            for (vi, &g) in v.iter_mut().zip(grads) {
                let g = g.as_f64();
                *vi = T::lit(b2 * vi.as_f64() + (1.0 - b2) * g * g);
            }
            let m = p.first_moment.data();
            let v = p.second_moment.data();
            for ((w, &mi), &vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi.as_f64() / c1;
                let v_hat = vi.as_f64() / c2;
                *w = T::lit(w.as_f64() - lr * m_hat / (v_hat.sqrt() + eps));
            }
        }
        p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Partition, Tensor};

    fn store(grad: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let n = grad.len();
        s.insert("w", Partition::Shared, Tensor::row(vec![1.0; n]))
            .unwrap();
        s.get_mut("w").unwrap().grad = Tensor::row(grad);
        s
    }

    #[test]
    fn clipping_scales_large_norms() {
        let mut s = store(vec![0.3, 0.4]); // norm 0.5
        let f = clip_gradients(&mut s, 0.25);
        assert!((f - 0.5).abs() < 1e-12);
        assert!((s.grad_norm() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clipping_leaves_small_norms() {
        let mut s = store(vec![0.06, 0.08]); // norm 0.1
        assert_eq!(clip_gradients(&mut s, 0.25), 1.0);
        assert_eq!(s.get("w").unwrap().grad.data(), &[0.06, 0.08]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store(vec![0.0, 0.0]);
        adam_step(&mut s, &TrainConfig::default(), 1).unwrap();
        assert_eq!(s.value("w").unwrap().data(), &[1.0, 1.0]);
    }

    /// Closed form of the first step: m̂ = g, v̂ = g², update = λ·g/(|g|+ε).
    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut s = store(vec![1.0]);
        adam_step(&mut s, &cfg, 1).unwrap();
        let expected = 1.0 - cfg.learning_rate * 1.0 / (1.0 + cfg.epsilon);
        let got = s.value("w").unwrap().data()[0];
        assert!((got - expected).abs() < 1e-15);
        assert_eq!(s.get("w").unwrap().grad.data(), &[0.0]);
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut s = store(vec![1.0]);
        s.set_frozen("w", true).unwrap();
        adam_step(&mut s, &TrainConfig::default(), 1).unwrap();
        assert_eq!(s.value("w").unwrap().data(), &[1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            early_stop_patience: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
