//! Parameter update rules over flat parameter vectors.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `theta <- theta - lr * grad`, the literal sample-transfer update.
    Sgd,
    /// RMSProp with smoothing `alpha` and denominator offset `eps`.
    RmsProp { alpha: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp { alpha: 0.99, eps: 1e-5 }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    square_avg: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let square_avg = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::RmsProp { .. } => vec![0.0; n_params],
        };
        Self { kind, lr, square_avg }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::RmsProp { alpha, eps } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(&mut self.square_avg) {
                    *v = alpha * *v + (1.0 - alpha) * g * g;
                    *p -= self.lr * g / (v.sqrt() + eps);
                }
            }
        }
    }
}

/// Rescales `grad` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
