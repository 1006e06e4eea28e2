use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Adam moments for one list of parameter tensors.
///
/// Entries whose gradient is exactly zero are skipped: their parameter and
/// both moments stay as they are, so a zero gradient never moves a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[usize], config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first_moment: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        })
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "Adam tracks {} tensors, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first_moment[i].len() || g.len() != p.len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: state {} / params {} / grads {}",
                    self.first_moment[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let cfg = self.config;
        let b1 = T::lit(cfg.beta1);
        let b2 = T::lit(cfg.beta2);
        let one = T::one();
        let correction1 = one - T::lit(cfg.beta1.powi(self.step.min(i32::MAX as u64) as i32));
        let correction2 = one - T::lit(cfg.beta2.powi(self.step.min(i32::MAX as u64) as i32));
        let lr = T::lit(cfg.lr);
        let eps = T::lit(cfg.epsilon);

        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for j in 0..p.len() {
                let gj = g[j];
                if gj == T::zero() {
                    continue;
                }
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(state: &mut AdamState<f64>, p: &mut [f64], g: &[f64]) {
        state.step(&mut [p], &[g]).unwrap();
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut s = AdamState::<f64>::new(&[3], AdamConfig::default()).unwrap();
        let mut p = [1.0, -2.0, 3.0];
        run(&mut s, &mut p, &[0.0; 3]);
        assert_eq!(p, [1.0, -2.0, 3.0]);
        // also after the moments have been populated
        run(&mut s, &mut p, &[1.0, 0.0, 0.0]);
        let snapshot = p;
        run(&mut s, &mut p, &[0.0; 3]);
        assert_eq!(p, snapshot);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        for g in [3.0, -0.02] {
            let mut s = AdamState::<f64>::new(&[1], AdamConfig::default()).unwrap();
            let mut p = [0.0];
            run(&mut s, &mut p, &[g]);
            // bias-corrected moments are g and g^2 exactly
            let expected = -1e-4 * g / (g.abs() + 1e-8);
            assert!((p[0] - expected).abs() < 1e-18, "{} vs {}", p[0], expected);
            assert_eq!(s.step, 1);
        }
    }

    #[test]
    fn two_unit_gradient_steps() {
        let mut s = AdamState::<f64>::new(&[1], AdamConfig::with_lr(1e-4)).unwrap();
        let mut p = [0.5];
        run(&mut s, &mut p, &[1.0]);
        let after_one = p[0];
        run(&mut s, &mut p, &[1.0]);
        assert!(after_one < 0.5 && p[0] < after_one);
        let total = (0.5 - p[0]).abs();
        assert!(total < 2.0 * 1e-4 * 1.01);
        // both steps are -lr / (1 + eps) up to rounding
        assert!((total - 2.0 * 1e-4 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut s = AdamState::<f64>::new(&[2], AdamConfig::default()).unwrap();
        let mut p = [0.0; 3];
        assert!(matches!(s.step(&mut [&mut p], &[&[0.0; 3]]), Err(Error::Shape(_))));
        assert!(AdamState::<f64>::new(&[1], AdamConfig { beta1: 1.0, ..AdamConfig::default() }).is_err());
    }
}
