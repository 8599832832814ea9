use ndarray::{Array2, Zip};

use super::params::ParamStore;
use super::tape::Matrix;
use crate::error::{Error, Result};

/// Adam with bias correction. Moments are kept per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|(_, p)| Array2::zeros(p.shape()))
                .collect::<Vec<_>>()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn second_moment(&self, index: usize) -> &Matrix {
        &self.v[index]
    }

    /// Applies one update using the gradients stored on `store`. Nothing is
    /// modified if any gradient entry is non-finite.
    pub fn step(&mut self, store: &mut ParamStore, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {lr}")));
        }
        for (_, p) in store.iter() {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let p = store.get_mut(id);
            if !p.requires_grad {
                continue;
            }
            Zip::from(&mut p.value)
                .and(&p.grad)
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .for_each(|w, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::params::ParamKind;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[0.5]], ParamKind::Weight);
        store.get_mut(id).grad.fill(1.0);
        let mut adam = AdamState::new(&store);
        adam.step(&mut store, 1e-4).unwrap();
        // m_hat = 1, v_hat = 1, step = lr / (1 + 1e-8)
        let moved = 0.5 - store.get(id).value[[0, 0]];
        assert!((moved - 1e-4 / (1.0 + 1e-8)).abs() < 1e-16);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[0.5, -2.0]], ParamKind::Weight);
        let mut adam = AdamState::new(&store);
        for _ in 0..3 {
            adam.step(&mut store, 1e-2).unwrap();
        }
        assert_eq!(store.get(id).value, array![[0.5, -2.0]]);
        assert_eq!(adam.steps(), 3);
    }

    #[test]
    fn disjoint_params_update_independently() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[1.0]], ParamKind::Weight);
        let b = store.add("b", array![[1.0]], ParamKind::Weight);
        store.get_mut(a).grad.fill(3.0);
        let mut adam = AdamState::new(&store);
        adam.step(&mut store, 0.1).unwrap();
        assert!(store.get(a).value[[0, 0]] < 1.0);
        assert_eq!(store.get(b).value[[0, 0]], 1.0);
        assert!(adam.second_moment(0).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts_step() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[1.0]], ParamKind::Weight);
        let b = store.add("b", array![[1.0]], ParamKind::Weight);
        store.get_mut(a).grad.fill(1.0);
        store.get_mut(b).grad.fill(f64::NAN);
        let mut adam = AdamState::new(&store);
        let err = adam.step(&mut store, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "b"));
        assert_eq!(store.get(a).value[[0, 0]], 1.0);
        assert_eq!(adam.steps(), 0);
    }
}
