//! Stateless differentiable ops: temporal max pooling, ReLU, layer
//! normalization and softmax cross-entropy.

use super::{Matrix, NnError};

/// Column-wise max over time plus the (first) argmax row of each column.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPool {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
    pub steps: usize,
}

pub fn maxpool_time(seq: &Matrix) -> Result<MaxPool, NnError> {
    if seq.rows() == 0 {
        return Err(NnError::EmptySequence { op: "maxpool_time" });
    }
    let mut values = seq.row(0).to_vec();
    let mut argmax = vec![0; seq.cols()];
    for t in 1..seq.rows() {
        for (j, &v) in seq.row(t).iter().enumerate() {
            // strict comparison keeps the first maximal index on ties
            if v > values[j] {
                values[j] = v;
                argmax[j] = t;
            }
        }
    }
    Ok(MaxPool {
        values,
        argmax,
        steps: seq.rows(),
    })
}

pub fn maxpool_backward(pool: &MaxPool, d_out: &[f64]) -> Matrix {
    let mut d = Matrix::zeros(pool.steps, d_out.len());
    for (j, (&t, &g)) in pool.argmax.iter().zip(d_out).enumerate() {
        d.set(t, j, g);
    }
    d
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Subgradient 0 at the kink.
pub fn relu_backward(x: &[f64], d_out: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(d_out)
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub inv_std: f64,
}

/// `(x - mean) / sqrt(var + eps) * gamma + beta` with population variance.
pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Result<(Vec<f64>, LayerNormCache), NnError> {
    let d = x.len();
    if d == 0 {
        return Err(NnError::EmptySequence { op: "layer_norm" });
    }
    if gamma.len() != d || beta.len() != d {
        return Err(NnError::Dimension {
            op: "layer_norm",
            expected: format!("gamma/beta of length {d}"),
            actual: format!("{}/{}", gamma.len(), beta.len()),
        });
    }
    let mean = x.iter().sum::<f64>() / d as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
    let inv_std = 1.0 / (var + eps).sqrt();
    let normalized: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = normalized
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(n, (g, b))| n * g + b)
        .collect();
    Ok((y, LayerNormCache { normalized, inv_std }))
}

/// Returns `∂L/∂x`; accumulates into `d_gamma` and `d_beta`.
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gamma: &[f64],
    d_out: &[f64],
    d_gamma: &mut [f64],
    d_beta: &mut [f64],
) -> Vec<f64> {
    let d = d_out.len() as f64;
    let mut d_norm = Vec::with_capacity(d_out.len());
    for i in 0..d_out.len() {
        d_gamma[i] += d_out[i] * cache.normalized[i];
        d_beta[i] += d_out[i];
        d_norm.push(d_out[i] * gamma[i]);
    }
    let mean_d = d_norm.iter().sum::<f64>() / d;
    let mean_dn = d_norm
        .iter()
        .zip(&cache.normalized)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / d;
    d_norm
        .iter()
        .zip(&cache.normalized)
        .map(|(g, n)| cache.inv_std * (g - mean_d - n * mean_dn))
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Loss `-log softmax(logits)[target]` and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>), NnError> {
    if target >= logits.len() {
        return Err(NnError::TargetOutOfRange {
            target,
            classes: logits.len(),
        });
    }
    let loss = log_sum_exp(logits) - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    #[test]
    fn maxpool_examples() {
        let single = Matrix::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(maxpool_time(&single).unwrap().values, vec![1.0, -2.0, 0.5]);
        let seq = Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.0, 5.0]).unwrap();
        let p = maxpool_time(&seq).unwrap();
        assert_eq!(p.values, vec![1.0, 5.0]);
        assert_eq!(p.argmax, vec![0, 1]);
        assert!(maxpool_time(&Matrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn maxpool_ties_route_to_first_index() {
        let seq = Matrix::from_vec(3, 1, vec![2.0, 2.0, 1.0]).unwrap();
        let p = maxpool_time(&seq).unwrap();
        let d = maxpool_backward(&p, &[1.0]);
        assert_eq!(d.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn maxpool_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let mut r = lcg(seed);
            let x: Vec<f64> = (0..12).map(|_| r()).collect();
            let w: Vec<f64> = (0..3).map(|_| r()).collect();
            let loss = |v: &[f64]| {
                let m = Matrix::from_vec(4, 3, v.to_vec()).unwrap();
                let p = maxpool_time(&m).unwrap();
                p.values.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            let p = maxpool_time(&Matrix::from_vec(4, 3, x.clone()).unwrap()).unwrap();
            let analytic = maxpool_backward(&p, &w).into_vec();
            let report = grad_check(loss, &x, &analytic, None);
            assert!(report.max_rel_error < 1e-5, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(relu(&[-3.0, -0.1]), vec![0.0, 0.0]);
        assert_eq!(relu_backward(&[0.0, 1.0, -1.0], &[5.0, 5.0, 5.0]), vec![0.0, 5.0, 0.0]);
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        for seed in 0..10 {
            let mut r = lcg(seed + 100);
            let x: Vec<f64> = (0..8).map(|_| {
                let v = r();
                if v.abs() < 0.05 { v + 0.1 } else { v }
            }).collect();
            let w: Vec<f64> = (0..8).map(|_| r()).collect();
            let loss = |v: &[f64]| relu(v).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let analytic = relu_backward(&x, &w);
            let report = grad_check(loss, &x, &analytic, None);
            assert!(report.max_rel_error < 1e-6, "{report:?}");
        }
    }

    #[test]
    fn relu_kink_is_excluded_from_gradient_check() {
        let loss = |v: &[f64]| relu(v)[0];
        let report = grad_check(loss, &[0.0], &[0.0], None);
        assert_eq!(report.checked, 0);
        assert_eq!(report.excluded, vec![0]);
    }

    #[test]
    fn layer_norm_examples() {
        let (y, _) = layer_norm(&[0.7; 5], &[1.0; 5], &[0.0; 5], 1e-5).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
        let (y, _) = layer_norm(&[1.0, -1.0], &[1.0; 2], &[0.0; 2], 1e-14).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let mut r = lcg(seed + 7);
            let x: Vec<f64> = (0..7).map(|_| r()).collect();
            let gamma: Vec<f64> = (0..7).map(|_| 1.0 + 0.5 * r()).collect();
            let beta: Vec<f64> = (0..7).map(|_| r()).collect();
            let w: Vec<f64> = (0..7).map(|_| r()).collect();
            let eps = 1e-5;
            let loss = |v: &[f64]| {
                let (y, _) = layer_norm(v, &gamma, &beta, eps).unwrap();
                y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            let (_, cache) = layer_norm(&x, &gamma, &beta, eps).unwrap();
            let mut dg = vec![0.0; 7];
            let mut db = vec![0.0; 7];
            let analytic = layer_norm_backward(&cache, &gamma, &w, &mut dg, &mut db);
            let report = grad_check(loss, &x, &analytic, None);
            assert!(report.max_rel_error < 1e-5, "{report:?}");

            let loss_g = |g: &[f64]| {
                let (y, _) = layer_norm(&x, g, &beta, eps).unwrap();
                y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            };
            assert!(grad_check(loss_g, &gamma, &dg, None).max_rel_error < 1e-5);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, _) = softmax_cross_entropy(&[0.3; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        let (loss, _) = softmax_cross_entropy(&[100.0, 0.0, 0.0], 0).unwrap();
        assert!(loss < 1e-40);
        assert!(matches!(
            softmax_cross_entropy(&[0.0; 3], 3),
            Err(NnError::TargetOutOfRange { target: 3, classes: 3 })
        ));
    }

    #[test]
    fn cross_entropy_matches_naive_formula() {
        for seed in 0..10 {
            let mut r = lcg(seed + 31);
            let logits: Vec<f64> = (0..5).map(|_| 3.0 * r()).collect();
            let target = seed as usize % 5;
            let (loss, grad) = softmax_cross_entropy(&logits, target).unwrap();
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            let naive_loss = -(logits[target].exp() / z).ln();
            assert!((loss - naive_loss).abs() < 1e-10);
            for (k, g) in grad.iter().enumerate() {
                let p = logits[k].exp() / z;
                let expected = if k == target { p - 1.0 } else { p };
                assert!((g - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn softmax_is_a_distribution_for_large_logits() {
        let mut r = lcg(99);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..6).map(|_| 500.0 * r()).collect();
            let p = softmax(&logits);
            assert!(p.iter().all(|v| *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
