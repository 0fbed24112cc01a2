use rand::Rng;

/// Dense affine map `y = W x + b` with `W` stored row-major `[rows, cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub(crate) fn init_uniform(&mut self, rng: &mut impl Rng) {
        let bound = 1.0 / (self.cols as f64).sqrt();
        for w in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            *w = rng.random_range(-bound..=bound);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.weight
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| b + dot(row, x))
            .collect()
    }

    /// `grad.W += dy x^T`, `grad.b += dy`.
    pub(crate) fn accumulate(&self, grad: &mut Linear, dy: &[f64], x: &[f64]) {
        for ((row, gb), &d) in grad.weight.chunks_exact_mut(self.cols).zip(&mut grad.bias).zip(dy) {
            if d == 0.0 {
                continue;
            }
            *gb += d;
            for (g, xi) in row.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }

    /// `dx += W^T dy`.
    pub(crate) fn backprop_input(&self, dy: &[f64], dx: &mut [f64]) {
        for (row, &d) in self.weight.chunks_exact(self.cols).zip(dy) {
            if d == 0.0 {
                continue;
            }
            for (g, w) in dx.iter_mut().zip(row) {
                *g += d * w;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
