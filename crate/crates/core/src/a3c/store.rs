use std::collections::BTreeMap;
use std::sync::Mutex;

use super::A3cError;
use crate::nn::{GradientSet, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

#[derive(Debug)]
struct Inner {
    params: ParameterSet,
    mean_square: Vec<Vec<f64>>,
    updates: u64,
    per_worker: BTreeMap<usize, u64>,
}

/// Parameters shared by asynchronous workers, with RMSProp statistics.
///
/// Every read and every gradient application holds one lock for the whole
/// parameter set, so readers never see a partially applied update.
#[derive(Debug)]
pub struct SharedParameterStore {
    opt: RmsProp,
    inner: Mutex<Inner>,
}

impl SharedParameterStore {
    pub fn new(params: ParameterSet, opt: RmsProp) -> Self {
        let mean_square = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Self { opt, inner: Mutex::new(Inner { params, mean_square, updates: 0, per_worker: BTreeMap::new() }) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        // A panicking worker cannot leave a torn set behind: updates are
        // computed before any tensor is written.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Copy of the current parameters and the update count they reflect.
    pub fn snapshot(&self) -> (ParameterSet, u64) {
        let g = self.lock();
        (g.params.clone(), g.updates)
    }

    /// Applies one RMSProp step: `s = d s + (1 - d) g^2`, `theta -= lr g / sqrt(s + eps)`.
    pub fn apply(&self, worker: usize, grads: &GradientSet) -> Result<u64, A3cError> {
        if !grads.is_finite() {
            return Err(A3cError::Argument(format!("worker {worker} submitted a non-finite gradient")));
        }
        let mut g = self.lock();
        grads.check_against(&g.params)?;
        let RmsProp { learning_rate: lr, decay, epsilon } = self.opt;
        let inner = &mut *g;
        for ((p, s), gt) in inner.params.tensors.iter_mut().zip(&mut inner.mean_square).zip(&grads.tensors) {
            for ((theta, ms), &grad) in p.data_mut().iter_mut().zip(s.iter_mut()).zip(gt.data()) {
                *ms = decay * *ms + (1.0 - decay) * grad * grad;
                *theta -= lr * grad / (*ms + epsilon).sqrt();
            }
        }
        inner.updates += 1;
        *inner.per_worker.entry(worker).or_insert(0) += 1;
        Ok(inner.updates)
    }

    pub fn update_count(&self) -> u64 {
        self.lock().updates
    }

    /// Updates applied per submitting worker.
    pub fn worker_counts(&self) -> BTreeMap<usize, u64> {
        self.lock().per_worker.clone()
    }

    pub fn into_params(self) -> ParameterSet {
        self.inner.into_inner().unwrap_or_else(|e| e.into_inner()).params
    }
}
