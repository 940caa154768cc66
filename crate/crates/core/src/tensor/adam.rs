use crate::error::{Error, Result};

use super::{Element, Tensor};

/// Adam hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    /// Number of completed steps.
    pub t: u64,
}

impl<T: Element> AdamState<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let m: Vec<_> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }
}

impl Adam {
    /// One bias-corrected Adam update; advances `state.t` before use so the
    /// first call runs with `t = 1`.
    pub fn step<T: Element>(
        &self,
        params: &mut [&mut Tensor<T>],
        grads: &[&Tensor<T>],
        state: &mut AdamState<T>,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != state.m.len() {
            return Err(Error::Shape(format!(
                "adam got {} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.m.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape(format!(
                    "adam shapes disagree: param {:?}, grad {:?}, state {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
        }
        state.t += 1;
        let t = state.t as i32;
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let c1 = T::from_f64_lossy(1.0 - self.beta1.powi(t));
        let c2 = T::from_f64_lossy(1.0 - self.beta2.powi(t));
        let lr = T::from_f64_lossy(self.lr);
        let eps = T::from_f64_lossy(self.eps);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = state.m[i].data_mut();
            let v = state.v[i].data_mut();
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // scalar re-derivation of the bias-corrected update
    fn oracle(grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64, w0: f64) -> f64 {
        let (mut m, mut v, mut w) = (0.0, 0.0, w0);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        w
    }

    #[test]
    fn matches_scalar_oracle() {
        let adam = Adam {
            lr: 0.01,
            ..Adam::default()
        };
        let grads = [0.5, -1.5, 2.0, 0.25, 0.0];
        let mut p = Tensor::<f64>::full(&[1], 1.0);
        let mut state = AdamState::new([&p]);
        for &g in &grads {
            let gt = Tensor::full(&[1], g);
            adam.step(&mut [&mut p], &[&gt], &mut state).unwrap();
        }
        let want = oracle(&grads, 0.01, 0.9, 0.999, 1e-8, 1.0);
        assert!((p.item() - want).abs() < 1e-15);
        assert_eq!(state.t, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let adam = Adam::default();
        let mut p = Tensor::<f64>::zeros(&[3]);
        let mut state = AdamState::new([&p]);
        let g = Tensor::new(vec![3], vec![3.0, -0.01, 100.0]).unwrap();
        adam.step(&mut [&mut p], &[&g], &mut state).unwrap();
        for (&w, s) in p.data().iter().zip([-1.0, 1.0, -1.0]) {
            assert!((w - s * 1e-4).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let adam = Adam::default();
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut state = AdamState::new([&p]);
        let g = Tensor::zeros(&[3]);
        assert!(adam.step(&mut [&mut p], &[&g], &mut state).is_err());
        assert!(adam.step(&mut [&mut p], &[], &mut state).is_err());
    }
}
