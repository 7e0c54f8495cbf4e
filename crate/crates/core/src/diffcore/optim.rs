use super::ParamStore;

/// Adaptive moment estimation over every parameter in a store.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        if self.m.len() != store.len() {
            self.m = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grad = p.grad.data().to_vec();
            for (((w, g), mi), vi) in p.value.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let update = self.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + self.eps);
                *w -= update;
            }
        }
    }
}

/// Plain gradient descent.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step(&self, store: &mut ParamStore) {
        for p in store.iter_mut() {
            let grad = p.grad.data().to_vec();
            for (w, g) in p.value.data_mut().iter_mut().zip(&grad) {
                *w -= self.lr * g;
            }
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{Tape, Tensor};

    #[test]
    fn adam_minimises_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::row(vec![3.0, -2.0])).unwrap();
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            store.zero_grad();
            let mut tape = Tape::new();
            let x = tape.param(&store, id);
            let sq = tape.mul(x, x).unwrap();
            let loss = tape.sum(sq).unwrap();
            tape.backward(loss, &mut store).unwrap();
            opt.step(&mut store);
        }
        assert!(store.value(id).data().iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::row(vec![1.5])).unwrap();
        store.get_mut(id).grad = Tensor::row(vec![10.0]);
        Adam::new(0.0).step(&mut store);
        Sgd { lr: 0.0 }.step(&mut store);
        assert_eq!(store.value(id).data(), &[1.5]);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::row(vec![0.0, 0.0])).unwrap();
        store.get_mut(id).grad = Tensor::row(vec![3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut store, 1.0), 5.0);
        assert!((store.grad_norm() - 1.0).abs() < 1e-12);
    }
}
