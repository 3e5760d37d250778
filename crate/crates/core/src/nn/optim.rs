use super::{Matrix, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, _, v)| Matrix::zeros(v.rows(), v.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected update from the accumulated gradients,
    /// then zeroes them.
    pub fn step(&mut self, params: &mut ParamSet) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        {
            let (values, grads) = params.split_mut();
            for (((value, grad), m), v) in values
                .iter_mut()
                .zip(grads)
                .zip(&mut self.first)
                .zip(&mut self.second)
            {
                for (((w, &g), m), v) in value
                    .as_mut_slice()
                    .iter_mut()
                    .zip(grad.as_slice())
                    .zip(m.as_mut_slice())
                    .zip(v.as_mut_slice())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
        params.zero_grads();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_params() {
        let mut p = ParamSet::new();
        p.add("w", Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap());
        let before = p.clone();
        let mut opt = Adam::new(&p, AdamConfig::default());
        for _ in 0..5 {
            opt.step(&mut p);
        }
        assert_eq!(p.value(p.id("w").unwrap()), before.value(before.id("w").unwrap()));
        assert_eq!(opt.steps_taken(), 5);
    }

    #[test]
    fn scalar_first_step_by_hand() {
        let mut p = ParamSet::new();
        let id = p.add("w", Matrix::from_vec(1, 1, vec![1.0]).unwrap());
        p.grads_mut().get_mut(id).set(0, 0, 0.5);
        let mut opt = Adam::new(&p, AdamConfig::default());
        opt.step(&mut p);
        // m = 0.05, v = 0.00025; m̂ = 0.5, v̂ = 0.25 → w = 1 - 1e-3 · 0.5 / (0.5 + 1e-8)
        let expect = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p.value(id).get(0, 0) - expect).abs() < 1e-15);
        assert_eq!(p.grads().get(id).get(0, 0), 0.0);

        p.grads_mut().get_mut(id).set(0, 0, -0.25);
        opt.step(&mut p);
        let m: f64 = 0.9 * 0.05 + 0.1 * -0.25;
        let v: f64 = 0.999 * 0.00025 + 0.001 * 0.0625;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64 * 0.999);
        let expect2 = expect - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.value(id).get(0, 0) - expect2).abs() < 1e-15);
    }
}
