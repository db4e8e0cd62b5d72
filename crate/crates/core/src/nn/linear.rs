use rand::Rng;

use super::params::{join, Parameters};
use super::{uniform_init, Matrix, NnError};

/// Fully connected layer `y = W x + b` with `W` of shape out×in.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(output_dim, input_dim),
            bias: vec![0.0; output_dim],
        }
    }

    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self, NnError> {
        if bias.len() != weight.rows() {
            return Err(NnError::Dimension {
                op: "LinearParams::new",
                expected: format!("bias of length {}", weight.rows()),
                actual: format!("length {}", bias.len()),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: uniform_init(output_dim, input_dim, rng),
            bias: vec![0.0; output_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Dimension {
                op: "linear",
                expected: format!("input of length {} (weight {})", self.input_dim(), self.weight.shape_str()),
                actual: format!("length {}", x.len()),
            });
        }
        let mut y = self.bias.clone();
        self.weight.gemv_acc(x, &mut y);
        Ok(y)
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut LinearParams) -> Vec<f64> {
        grads.weight.outer_acc(dy, x);
        for (g, d) in grads.bias.iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; self.input_dim()];
        self.weight.gemv_t_acc(dy, &mut dx);
        dx
    }
}

/// Row-wise `out[i] = W · x[i] + b`.
pub fn linear_forward(x: &Matrix, p: &LinearParams) -> Result<Matrix, NnError> {
    if x.cols() != p.input_dim() {
        return Err(NnError::Dimension {
            op: "linear_forward",
            expected: format!("input with {} columns (weight {})", p.input_dim(), p.weight.shape_str()),
            actual: format!("input {}", x.shape_str()),
        });
    }
    let mut out = Matrix::zeros(x.rows(), p.output_dim());
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        row.copy_from_slice(&p.bias);
        p.weight.gemv_acc(x.row(i), row);
    }
    Ok(out)
}

impl Parameters for LinearParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        f(join(prefix, "weight"), self.weight.data());
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        f(join(prefix, "weight"), self.weight.data_mut());
        f(join(prefix, "bias"), &mut self.bias);
    }
}
