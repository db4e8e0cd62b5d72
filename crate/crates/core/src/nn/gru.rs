//! Gated recurrent units and the stacked bidirectional network built on them.
//!
//! Gate convention (reset applied after the recurrent product):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + r ⊙ (U_n h) + b_n)
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;

use super::params::{join, Parameters};
use super::{dropout_mask, uniform_init, Matrix, Mode, NnError};

#[derive(Clone, Debug, PartialEq)]
pub struct GruLayerParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_n: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_n: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_n: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    /// `U_n h_prev`, needed for the reset-gate gradient.
    u: Vec<f64>,
    n: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GruLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_z: Matrix::zeros(hidden_dim, input_dim),
            w_r: Matrix::zeros(hidden_dim, input_dim),
            w_n: Matrix::zeros(hidden_dim, input_dim),
            u_z: Matrix::zeros(hidden_dim, hidden_dim),
            u_r: Matrix::zeros(hidden_dim, hidden_dim),
            u_n: Matrix::zeros(hidden_dim, hidden_dim),
            b_z: vec![0.0; hidden_dim],
            b_r: vec![0.0; hidden_dim],
            b_n: vec![0.0; hidden_dim],
        }
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_z: uniform_init(hidden_dim, input_dim, rng),
            w_r: uniform_init(hidden_dim, input_dim, rng),
            w_n: uniform_init(hidden_dim, input_dim, rng),
            u_z: uniform_init(hidden_dim, hidden_dim, rng),
            u_r: uniform_init(hidden_dim, hidden_dim, rng),
            u_n: uniform_init(hidden_dim, hidden_dim, rng),
            b_z: vec![0.0; hidden_dim],
            b_r: vec![0.0; hidden_dim],
            b_n: vec![0.0; hidden_dim],
        }
    }

    fn step(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, StepCache) {
        let hd = self.hidden_dim;
        let mut z = self.b_z.clone();
        self.w_z.gemv_acc(x, &mut z);
        self.u_z.gemv_acc(h_prev, &mut z);
        let mut r = self.b_r.clone();
        self.w_r.gemv_acc(x, &mut r);
        self.u_r.gemv_acc(h_prev, &mut r);
        let mut u = vec![0.0; hd];
        self.u_n.gemv_acc(h_prev, &mut u);
        let mut n = self.b_n.clone();
        self.w_n.gemv_acc(x, &mut n);
        let mut h = vec![0.0; hd];
        for i in 0..hd {
            z[i] = sigmoid(z[i]);
            r[i] = sigmoid(r[i]);
            n[i] = (n[i] + r[i] * u[i]).tanh();
            h[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
        }
        let cache = StepCache {
            h_prev: h_prev.to_vec(),
            z,
            r,
            u,
            n,
        };
        (h, cache)
    }

    fn check_dims(&self, x: &[f64], h_prev: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_dim || h_prev.len() != self.hidden_dim {
            return Err(NnError::Dimension {
                op: "gru_cell_forward",
                expected: format!("x of length {}, h of length {}", self.input_dim, self.hidden_dim),
                actual: format!("x of length {}, h of length {}", x.len(), h_prev.len()),
            });
        }
        Ok(())
    }

    /// Runs the recursion over `seq` (left to right, or right to left when
    /// `reverse`), writing the state for time `t` into row `t` of the output.
    pub(crate) fn run(&self, seq: &Matrix, reverse: bool) -> (Matrix, Vec<StepCache>) {
        let steps = seq.rows();
        let mut out = Matrix::zeros(steps, self.hidden_dim);
        let mut caches = Vec::with_capacity(steps);
        let mut h = vec![0.0; self.hidden_dim];
        for s in 0..steps {
            let t = if reverse { steps - 1 - s } else { s };
            let (next, cache) = self.step(seq.row(t), &h);
            out.row_mut(t).copy_from_slice(&next);
            caches.push(cache);
            h = next;
        }
        (out, caches)
    }

    /// Backpropagation through time. `d_out` row `t` is `∂L/∂h_t`; the input
    /// gradient is accumulated into `d_seq`.
    pub(crate) fn backward(
        &self,
        seq: &Matrix,
        reverse: bool,
        caches: &[StepCache],
        d_out: &Matrix,
        grads: &mut GruLayerParams,
        d_seq: &mut Matrix,
    ) {
        let steps = seq.rows();
        let hd = self.hidden_dim;
        let mut carry = vec![0.0; hd];
        let mut da_z = vec![0.0; hd];
        let mut da_r = vec![0.0; hd];
        let mut da_n = vec![0.0; hd];
        let mut d_u = vec![0.0; hd];
        for s in (0..steps).rev() {
            let t = if reverse { steps - 1 - s } else { s };
            let c = &caches[s];
            let x = seq.row(t);
            let mut dh_prev = vec![0.0; hd];
            for i in 0..hd {
                let dh = d_out.get(t, i) + carry[i];
                let dn = dh * (1.0 - c.z[i]);
                let dz = dh * (c.h_prev[i] - c.n[i]);
                dh_prev[i] = dh * c.z[i];
                da_n[i] = dn * (1.0 - c.n[i] * c.n[i]);
                let dr = da_n[i] * c.u[i];
                d_u[i] = da_n[i] * c.r[i];
                da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
                da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
            }
            grads.w_z.outer_acc(&da_z, x);
            grads.w_r.outer_acc(&da_r, x);
            grads.w_n.outer_acc(&da_n, x);
            grads.u_z.outer_acc(&da_z, &c.h_prev);
            grads.u_r.outer_acc(&da_r, &c.h_prev);
            grads.u_n.outer_acc(&d_u, &c.h_prev);
            for i in 0..hd {
                grads.b_z[i] += da_z[i];
                grads.b_r[i] += da_r[i];
                grads.b_n[i] += da_n[i];
            }
            let dx = d_seq.row_mut(t);
            self.w_z.gemv_t_acc(&da_z, dx);
            self.w_r.gemv_t_acc(&da_r, dx);
            self.w_n.gemv_t_acc(&da_n, dx);
            self.u_z.gemv_t_acc(&da_z, &mut dh_prev);
            self.u_r.gemv_t_acc(&da_r, &mut dh_prev);
            self.u_n.gemv_t_acc(&d_u, &mut dh_prev);
            carry = dh_prev;
        }
    }
}

/// One GRU update `h_t = GRU(x_t, h_{t-1})`.
pub fn gru_cell_forward(x: &[f64], h_prev: &[f64], p: &GruLayerParams) -> Result<Vec<f64>, NnError> {
    p.check_dims(x, h_prev)?;
    Ok(p.step(x, h_prev).0)
}

impl Parameters for GruLayerParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        f(join(prefix, "w_z"), self.w_z.data());
        f(join(prefix, "w_r"), self.w_r.data());
        f(join(prefix, "w_n"), self.w_n.data());
        f(join(prefix, "u_z"), self.u_z.data());
        f(join(prefix, "u_r"), self.u_r.data());
        f(join(prefix, "u_n"), self.u_n.data());
        f(join(prefix, "b_z"), &self.b_z);
        f(join(prefix, "b_r"), &self.b_r);
        f(join(prefix, "b_n"), &self.b_n);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        f(join(prefix, "w_z"), self.w_z.data_mut());
        f(join(prefix, "w_r"), self.w_r.data_mut());
        f(join(prefix, "w_n"), self.w_n.data_mut());
        f(join(prefix, "u_z"), self.u_z.data_mut());
        f(join(prefix, "u_r"), self.u_r.data_mut());
        f(join(prefix, "u_n"), self.u_n.data_mut());
        f(join(prefix, "b_z"), &mut self.b_z);
        f(join(prefix, "b_r"), &mut self.b_r);
        f(join(prefix, "b_n"), &mut self.b_n);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiGruLayer {
    pub forward: GruLayerParams,
    pub backward: GruLayerParams,
}

impl BiGruLayer {
    pub fn output_dim(&self) -> usize {
        self.forward.hidden_dim + self.backward.hidden_dim
    }
}

/// Stacked bidirectional GRU. Dropout is applied only between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct BiGruParams {
    pub layers: Vec<BiGruLayer>,
    pub inter_layer_dropout_p: f64,
}

struct LayerTrace {
    /// Input for layers above the first (the first layer reads the caller's sequence).
    input: Option<Matrix>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
    mask: Option<Vec<f64>>,
}

pub struct BiGruTrace {
    layers: Vec<LayerTrace>,
}

impl BiGruParams {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, num_layers: usize, dropout: f64, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(num_layers);
        let mut in_dim = input_dim;
        for _ in 0..num_layers {
            layers.push(BiGruLayer {
                forward: GruLayerParams::init(in_dim, hidden_dim, rng),
                backward: GruLayerParams::init(in_dim, hidden_dim, rng),
            });
            in_dim = 2 * hidden_dim;
        }
        Self {
            layers,
            inter_layer_dropout_p: dropout,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.forward.input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, BiGruLayer::output_dim)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layers.is_empty() {
            return Err(NnError::Config("BiGRU needs at least one layer".into()));
        }
        if !(0.0..=1.0).contains(&self.inter_layer_dropout_p) {
            return Err(NnError::Config(format!(
                "dropout probability {} outside [0, 1]",
                self.inter_layer_dropout_p
            )));
        }
        let mut expected_in = self.input_dim();
        for (k, layer) in self.layers.iter().enumerate() {
            for g in [&layer.forward, &layer.backward] {
                if g.input_dim != expected_in {
                    return Err(NnError::Dimension {
                        op: "BiGruParams::validate",
                        expected: format!("layer {k} input_dim {expected_in}"),
                        actual: format!("{}", g.input_dim),
                    });
                }
            }
            expected_in = layer.output_dim();
        }
        Ok(())
    }

    pub fn forward_traced<R: Rng + ?Sized>(&self, seq: &Matrix, mode: Mode, rng: &mut R) -> Result<(Matrix, BiGruTrace), NnError> {
        if seq.rows() == 0 {
            return Err(NnError::EmptySequence { op: "bigru_forward" });
        }
        if seq.cols() != self.input_dim() {
            return Err(NnError::Dimension {
                op: "bigru_forward",
                expected: format!("sequence with {} features", self.input_dim()),
                actual: format!("sequence {}", seq.shape_str()),
            });
        }
        let p = self.inter_layer_dropout_p;
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut input: Option<Matrix> = None;
        for (k, layer) in self.layers.iter().enumerate() {
            let x = input.as_ref().unwrap_or(seq);
            let (fo, fc) = layer.forward.run(x, false);
            let (bo, bc) = layer.backward.run(x, true);
            let hf = layer.forward.hidden_dim;
            let mut out = Matrix::zeros(x.rows(), layer.output_dim());
            for t in 0..x.rows() {
                let row = out.row_mut(t);
                row[..hf].copy_from_slice(fo.row(t));
                row[hf..].copy_from_slice(bo.row(t));
            }
            let is_last = k + 1 == self.layers.len();
            let mask = if !is_last && mode == Mode::Train && p > 0.0 {
                let mask = dropout_mask(out.data().len(), p, rng);
                for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            } else {
                None
            };
            traces.push(LayerTrace {
                input: input.take(),
                fwd: fc,
                bwd: bc,
                mask,
            });
            input = Some(out);
        }
        Ok((input.expect("at least one layer"), BiGruTrace { layers: traces }))
    }

    /// Returns `∂L/∂seq` and accumulates parameter gradients into `grads`.
    pub fn backward(&self, seq: &Matrix, trace: &BiGruTrace, d_out: &Matrix, grads: &mut BiGruParams) -> Matrix {
        let mut d = d_out.clone();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let lt = &trace.layers[k];
            if let Some(mask) = &lt.mask {
                for (g, m) in d.data_mut().iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            let x = lt.input.as_ref().unwrap_or(seq);
            let hf = layer.forward.hidden_dim;
            let hb = layer.backward.hidden_dim;
            let mut d_f = Matrix::zeros(x.rows(), hf);
            let mut d_b = Matrix::zeros(x.rows(), hb);
            for t in 0..x.rows() {
                d_f.row_mut(t).copy_from_slice(&d.row(t)[..hf]);
                d_b.row_mut(t).copy_from_slice(&d.row(t)[hf..]);
            }
            let mut d_x = Matrix::zeros(x.rows(), x.cols());
            let g = &mut grads.layers[k];
            layer.forward.backward(x, false, &lt.fwd, &d_f, &mut g.forward, &mut d_x);
            layer.backward.backward(x, true, &lt.bwd, &d_b, &mut g.backward, &mut d_x);
            d = d_x;
        }
        d
    }
}

/// Output row `t` is `[forward state at t | backward state at t]`.
pub fn bigru_forward<R: Rng + ?Sized>(seq: &Matrix, p: &BiGruParams, mode: Mode, rng: &mut R) -> Result<Matrix, NnError> {
    p.forward_traced(seq, mode, rng).map(|(out, _)| out)
}

impl Parameters for BiGruParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a [f64])) {
        for (k, l) in self.layers.iter().enumerate() {
            l.forward.visit(&join(prefix, &format!("l{k}.fwd")), f);
            l.backward.visit(&join(prefix, &format!("l{k}.bwd")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut [f64])) {
        for (k, l) in self.layers.iter_mut().enumerate() {
            l.forward.visit_mut(&join(prefix, &format!("l{k}.fwd")), f);
            l.backward.visit_mut(&join(prefix, &format!("l{k}.bwd")), f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{assign_flat, flatten, fill};
    use crate::nn::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_seq(t: usize, d: usize, r: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(t, d, (0..t * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_input_zero_state_is_a_fixed_point() {
        let p = GruLayerParams::init(3, 4, &mut rng(1));
        let h = gru_cell_forward(&[0.0; 3], &[0.0; 4], &p).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn saturated_update_gate_carries_state() {
        let mut p = GruLayerParams::init(3, 4, &mut rng(2));
        p.b_z = vec![50.0; 4];
        let h_prev = [0.3, -0.7, 0.1, 0.9];
        let h = gru_cell_forward(&[0.5, -0.2, 0.8], &h_prev, &p).unwrap();
        for (a, b) in h.iter().zip(h_prev) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cell_matches_scalar_reference() {
        let mut r = rng(3);
        let mut p = GruLayerParams::init(3, 3, &mut r);
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_n] {
            for v in b.iter_mut() {
                *v = r.random_range(-0.5..0.5);
            }
        }
        let x = [0.4, -1.1, 0.6];
        let h = [0.2, -0.3, 0.5];
        let out = gru_cell_forward(&x, &h, &p).unwrap();
        for i in 0..3 {
            let mut az = p.b_z[i];
            let mut ar = p.b_r[i];
            let mut an = p.b_n[i];
            let mut un = 0.0;
            for j in 0..3 {
                az += p.w_z.get(i, j) * x[j] + p.u_z.get(i, j) * h[j];
                ar += p.w_r.get(i, j) * x[j] + p.u_r.get(i, j) * h[j];
                an += p.w_n.get(i, j) * x[j];
                un += p.u_n.get(i, j) * h[j];
            }
            let z = sig(az);
            let rr = sig(ar);
            let n = (an + rr * un).tanh();
            let expected = (1.0 - z) * n + z * h[i];
            assert!((out[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_rejects_bad_dims() {
        let p = GruLayerParams::zeros(3, 2);
        assert!(gru_cell_forward(&[0.0; 2], &[0.0; 2], &p).is_err());
        assert!(gru_cell_forward(&[0.0; 3], &[0.0; 3], &p).is_err());
    }

    #[test]
    fn single_step_sees_both_directions_from_zero_state() {
        let mut r = rng(4);
        let p = BiGruParams::init(3, 2, 1, 0.0, &mut r);
        let x = random_seq(1, 3, &mut r);
        let out = bigru_forward(&x, &p, Mode::Eval, &mut r).unwrap();
        let f = gru_cell_forward(x.row(0), &[0.0; 2], &p.layers[0].forward).unwrap();
        let b = gru_cell_forward(x.row(0), &[0.0; 2], &p.layers[0].backward).unwrap();
        assert_eq!(&out.row(0)[..2], f.as_slice());
        assert_eq!(&out.row(0)[2..], b.as_slice());
    }

    #[test]
    fn eval_mode_ignores_dropout() {
        let mut r = rng(5);
        let mut p = BiGruParams::init(3, 4, 2, 0.5, &mut r);
        let x = random_seq(6, 3, &mut r);
        let a = bigru_forward(&x, &p, Mode::Eval, &mut rng(9)).unwrap();
        p.inter_layer_dropout_p = 0.0;
        let b = bigru_forward(&x, &p, Mode::Eval, &mut rng(10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reversing_input_swaps_directions_with_tied_params() {
        let mut r = rng(6);
        let g = GruLayerParams::init(3, 4, &mut r);
        let p = BiGruParams {
            layers: vec![BiGruLayer { forward: g.clone(), backward: g }],
            inter_layer_dropout_p: 0.0,
        };
        let x = random_seq(5, 3, &mut r);
        let rev_rows: Vec<Vec<f64>> = (0..5).rev().map(|t| x.row(t).to_vec()).collect();
        let xr = Matrix::from_rows(&rev_rows).unwrap();
        let out = bigru_forward(&x, &p, Mode::Eval, &mut r).unwrap();
        let out_r = bigru_forward(&xr, &p, Mode::Eval, &mut r).unwrap();
        for t in 0..5 {
            assert_eq!(&out_r.row(t)[..4], &out.row(4 - t)[4..]);
            assert_eq!(&out_r.row(t)[4..], &out.row(4 - t)[..4]);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let p = BiGruParams::init(3, 2, 1, 0.0, &mut rng(0));
        assert!(matches!(
            bigru_forward(&Matrix::zeros(0, 3), &p, Mode::Eval, &mut rng(0)),
            Err(NnError::EmptySequence { .. })
        ));
    }

    #[test]
    fn train_mode_is_deterministic_per_seed() {
        let mut r = rng(7);
        let p = BiGruParams::init(3, 4, 2, 0.5, &mut r);
        let x = random_seq(6, 3, &mut r);
        let a = bigru_forward(&x, &p, Mode::Train, &mut rng(42)).unwrap();
        let b = bigru_forward(&x, &p, Mode::Train, &mut rng(42)).unwrap();
        assert_eq!(a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let values: Vec<f64> = (0..100_000).map(|i| 0.5 + (i % 7) as f64 * 0.1).collect();
        let mask = dropout_mask(values.len(), 0.5, &mut rng(11));
        let plain = values.iter().sum::<f64>() / values.len() as f64;
        let masked = values.iter().zip(&mask).map(|(v, m)| v * m).sum::<f64>() / values.len() as f64;
        assert!(((masked - plain) / plain).abs() < 0.02, "{masked} vs {plain}");
        assert!(mask.iter().all(|m| *m == 0.0 || *m == 2.0));
    }

    #[test]
    fn bigru_gradients_match_finite_differences() {
        for seed in 0..10u64 {
            let mut r = rng(100 + seed);
            let mut p = BiGruParams::init(3, 2, 2, 0.5, &mut r);
            for l in &mut p.layers {
                for g in [&mut l.forward, &mut l.backward] {
                    for b in [&mut g.b_z, &mut g.b_r, &mut g.b_n] {
                        b.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
                    }
                }
            }
            let x = random_seq(4, 3, &mut r);
            let w: Vec<f64> = (0..16).map(|_| r.random_range(-1.0..1.0)).collect();
            let mask_seed = 1000 + seed;
            let loss_of = |p: &BiGruParams, x: &Matrix| {
                let out = bigru_forward(x, p, Mode::Train, &mut rng(mask_seed)).unwrap();
                out.data().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            let (_, trace) = p.forward_traced(&x, Mode::Train, &mut rng(mask_seed)).unwrap();
            let d_out = Matrix::from_vec(4, 4, w.clone()).unwrap();
            let mut grads = p.clone();
            fill(&mut grads, 0.0);
            let d_x = p.backward(&x, &trace, &d_out, &mut grads);

            let flat = flatten(&p);
            let report = grad_check(
                |v: &[f64]| {
                    let mut q = p.clone();
                    assign_flat(&mut q, v);
                    loss_of(&q, &x)
                },
                &flat,
                &flatten(&grads),
                None,
            );
            assert!(report.max_rel_error < 1e-5, "seed {seed}: {report:?}");

            let report = grad_check(
                |v: &[f64]| loss_of(&p, &Matrix::from_vec(4, 3, v.to_vec()).unwrap()),
                x.data(),
                d_x.data(),
                None,
            );
            assert!(report.max_rel_error < 1e-5, "seed {seed}: {report:?}");
        }
    }
}
