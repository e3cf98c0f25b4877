//! Adam with bias correction. One state per parameter group; `step` is
//! shared across all tensors updated through the same state.

pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params[i]` and `grads[i]` line up with the
    /// `sizes` given at construction; a `None` grad leaves that tensor (and
    /// its moments) untouched.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Option<&[f64]>]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            let Some(grad) = grad else { continue };
            assert_eq!(param.len(), grad.len());
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                param[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction, step 1 is exactly lr * sign(g) up to eps.
        let mut adam = AdamState::new(0.01, &[2]);
        let mut p = vec![1.0, -1.0];
        let g = vec![0.3, -0.7];
        adam.step(&mut [&mut p], &[Some(&g)]);
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((p[1] - (-1.0 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_quadratic() {
        // minimize (x - 3)^2; gradient 2(x - 3).
        let mut adam = AdamState::new(0.1, &[1]);
        let mut x = vec![-4.0];
        for _ in 0..500 {
            let g = vec![2.0 * (x[0] - 3.0)];
            adam.step(&mut [&mut x], &[Some(&g)]);
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn missing_grad_is_a_no_op() {
        let mut adam = AdamState::new(0.1, &[2, 2]);
        let mut a = vec![1.0, 2.0];
        let mut b = vec![3.0, 4.0];
        let g = vec![1.0, 1.0];
        adam.step(&mut [&mut a, &mut b], &[Some(&g), None]);
        assert_ne!(a, vec![1.0, 2.0]);
        assert_eq!(b, vec![3.0, 4.0]);
        // Step counter advanced once even with a skipped tensor.
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut adam = AdamState::new(0.05, &[3]);
            let mut p = vec![0.5, -0.25, 2.0];
            for i in 0..50 {
                let g: Vec<f64> = p.iter().map(|v| v * 0.9 + i as f64 * 0.01).collect();
                adam.step(&mut [&mut p], &[Some(&g)]);
            }
            p
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
