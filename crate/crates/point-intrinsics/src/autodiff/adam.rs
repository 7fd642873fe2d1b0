//! Adam optimizer with bias correction.

use super::{AutodiffError, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-parameter moment accumulators plus the shared step counter.
pub struct AdamState<T: Scalar> {
    config: AdamConfig,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, param_sizes: &[usize]) -> Self {
        Self {
            config,
            first_moment: param_sizes.iter().map(|&n| vec![T::ZERO; n]).collect(),
            second_moment: param_sizes.iter().map(|&n| vec![T::ZERO; n]).collect(),
            step: 0,
        }
    }

    /// Moment accumulators sized from the parameters themselves.
    pub fn for_params(config: AdamConfig, params: &[&Tensor<T>]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.numel()).collect();
        Self::new(config, &sizes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One Adam update. Each parameter must carry a gradient of its own
    /// shape; a NaN/Inf gradient aborts the step before any mutation.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(AutodiffError::Optimizer(format!(
                "state tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            let grad = p.grad().ok_or_else(|| {
                AutodiffError::Optimizer(format!("parameter {i} has no gradient"))
            })?;
            if grad.len() != self.first_moment[i].len() {
                return Err(AutodiffError::Optimizer(format!(
                    "parameter {i}: gradient size {} vs state size {}",
                    grad.len(),
                    self.first_moment[i].len()
                )));
            }
            if !grad.iter().all(|g| g.is_finite()) {
                return Err(AutodiffError::Optimizer(format!(
                    "parameter {i}: non-finite gradient, step aborted"
                )));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(self.config.beta1);
        let b2 = T::from_f64(self.config.beta2);
        let lr = T::from_f64(self.config.learning_rate);
        let eps = T::from_f64(self.config.epsilon);
        let bias1 = T::from_f64(1.0 - self.config.beta1.powi(t));
        let bias2 = T::from_f64(1.0 - self.config.beta2.powi(t));

        for (i, p) in params.iter_mut().enumerate() {
            let grad = p.grad().unwrap().to_vec();
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let data = p.data_mut();
            for j in 0..data.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (T::ONE - b1) * g;
                v[j] = b2 * v[j] + (T::ONE - b2) * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                data[j] = data[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_grad(w: &Tensor<f64>, target: &[f64]) -> Vec<f64> {
        w.data().iter().zip(target).map(|(&wi, &ti)| 2.0 * (wi - ti)).collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut w = Tensor::new(vec![3], vec![1.0f64, -2.0, 0.5]).unwrap().with_grad();
        w.set_grad(vec![0.0; 3]).unwrap();
        let before = w.data().to_vec();
        let mut state = AdamState::for_params(AdamConfig::default(), &[&w]);
        state.step(&mut [&mut w]).unwrap();
        // m = v = 0 for zero grads, so the update term is exactly 0/(0+eps).
        assert_eq!(w.data(), before.as_slice());
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn single_step_descends_on_square() {
        // f(w) = w², w = 1, lr = 0.1 → w must decrease.
        let mut w = Tensor::scalar(1.0f64).with_grad();
        w.set_grad(vec![2.0]).unwrap();
        let cfg = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
        let mut state = AdamState::for_params(cfg, &[&w]);
        state.step(&mut [&mut w]).unwrap();
        assert!(w.data()[0] < 1.0);
    }

    #[test]
    fn two_parameter_quadratic_converges() {
        // f(w) = (w₀−0.3)² + (w₁−0.2)², minimum value 0.
        let target = [0.3, 0.2];
        let mut w = Tensor::new(vec![2], vec![1.0f64, -0.5]).unwrap().with_grad();
        let cfg = AdamConfig { learning_rate: 0.05, ..AdamConfig::default() };
        let mut state = AdamState::for_params(cfg, &[&w]);
        for _ in 0..200 {
            let g = quadratic_grad(&w, &target);
            w.set_grad(g).unwrap();
            state.step(&mut [&mut w]).unwrap();
        }
        let loss: f64 =
            w.data().iter().zip(&target).map(|(&wi, &ti)| (wi - ti) * (wi - ti)).sum();
        assert!(loss < 1e-4, "loss after 200 steps: {loss}");
    }

    #[test]
    fn nan_gradient_aborts_without_mutation() {
        let mut w = Tensor::new(vec![2], vec![1.0f64, 2.0]).unwrap().with_grad();
        w.set_grad(vec![f64::NAN, 0.0]).unwrap();
        let before = w.data().to_vec();
        let mut state = AdamState::for_params(AdamConfig::default(), &[&w]);
        assert!(state.step(&mut [&mut w]).is_err());
        assert_eq!(w.data(), before.as_slice());
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn deterministic_given_identical_inputs() {
        let run = || {
            let mut w = Tensor::new(vec![2], vec![0.7f64, -0.1]).unwrap().with_grad();
            let mut state = AdamState::for_params(AdamConfig::default(), &[&w]);
            for _ in 0..10 {
                w.set_grad(vec![0.3, -0.8]).unwrap();
                state.step(&mut [&mut w]).unwrap();
            }
            w.data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
