//! Adam optimizer over a list of parameter tensors.

use crate::{Error, Result, Tensor};

/// First/second moment accumulators plus the step counter.
///
/// One state drives one list of parameter tensors; since the update is
/// elementwise, a list of tensors behaves exactly like one concatenated
/// parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Zero-initialized state with the defaults β1=0.9, β2=0.999, ε=1e-8.
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_hyperparameters(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(params: &[Tensor], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update applied in place.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                node: None,
                detail: format!(
                    "adam_step got {} params / {} grads for state of {} tensors",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(self.m.iter()) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::ShapeMismatch {
                    node: None,
                    detail: format!(
                        "adam_step shapes disagree: param {:?}, grad {:?}, state {:?}",
                        p.shape(),
                        g.shape(),
                        m.shape()
                    ),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for i in 0..pd.len() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gd[i];
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bias1;
                let v_hat = vd[i] / bias2;
                pd[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
        let grads = vec![Tensor::zeros(&[3])];
        let mut state = AdamState::new(&params);
        let before = params[0].clone();
        for _ in 0..10 {
            state.step(&mut params, &grads, 0.1).unwrap();
        }
        assert!(params[0].bits_eq(&before));
        assert_eq!(state.step_count(), 10);
    }

    #[test]
    fn first_step_moves_by_about_lr_times_sign() {
        // With bias correction, step 1 gives Δ = lr·g/(|g| + ε) ≈ lr·sign(g).
        let lr = 0.05;
        for &g in &[3.0_f64, -0.7, 1e-3] {
            let mut params = vec![Tensor::scalar(0.0)];
            let grads = vec![Tensor::scalar(g)];
            let mut state = AdamState::new(&params);
            state.step(&mut params, &grads, lr).unwrap();
            let delta = params[0].scalar_value().unwrap();
            assert!(
                (delta + lr * g.signum()).abs() < 1e-6,
                "g={g} delta={delta}"
            );
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![Tensor::zeros(&[3])];
        let grads = vec![Tensor::zeros(&[4])];
        let mut state = AdamState::new(&params);
        assert!(state.step(&mut params, &grads, 0.1).is_err());
    }

    // Frozen from the scalar convergence oracle in tests/adam_convergence.rs:
    // 100 steps on f(x) = x² from x₀ = 1 at lr = 0.1 ends well inside |x| < 0.1.
    #[test]
    fn converges_on_square_scalar() {
        let mut params = vec![Tensor::scalar(1.0)];
        let mut state = AdamState::new(&params);
        for _ in 0..100 {
            let x = params[0].scalar_value().unwrap();
            let grads = vec![Tensor::scalar(2.0 * x)];
            state.step(&mut params, &grads, 0.1).unwrap();
        }
        let x = params[0].scalar_value().unwrap();
        assert!(x.abs() < 0.1, "after 100 steps x = {x}");
    }
}
