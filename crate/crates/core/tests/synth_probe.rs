//! The synthetic generator checked with a model outside the crate: multinomial
//! logistic regression on mean-pooled last-layer features.

use nser_core::repr::{gen_synthetic, SynthSpec, SyntheticCorpus};

fn features(corpus: &SyntheticCorpus) -> Vec<(Vec<f64>, usize)> {
    corpus
        .items
        .iter()
        .map(|(rep, y)| {
            let last = rep.encoder_layers().last().unwrap();
            let mut f = vec![0.0; last.cols()];
            for r in 0..last.rows() {
                for (c, v) in f.iter_mut().enumerate() {
                    *v += last.get(r, c) / last.rows() as f64;
                }
            }
            f.push(1.0);
            (f, *y)
        })
        .collect()
}

fn probe_uar(sep: f64) -> f64 {
    let spec = SynthSpec {
        per_class: 100,
        layers_enc: 4,
        layers_dec: 2,
        dim: 16,
        class_separation: sep,
        seed: 21,
        ..SynthSpec::default()
    };
    let corpus = gen_synthetic(&spec).unwrap();
    let rows = features(&corpus);
    let c = spec.num_classes;
    let (train, test): (Vec<_>, Vec<_>) = rows.iter().enumerate().partition(|(i, _)| i % 5 != 0);
    let dim = rows[0].0.len();
    let mut w = vec![vec![0.0; dim]; c];
    for _ in 0..300 {
        let mut grad = vec![vec![0.0; dim]; c];
        for (_, (x, y)) in &train {
            let z: Vec<f64> = w.iter().map(|wk| wk.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for k in 0..c {
                let g = e[k] / s - if k == *y { 1.0 } else { 0.0 };
                for (gk, xi) in grad[k].iter_mut().zip(x) {
                    *gk += g * xi / train.len() as f64;
                }
            }
        }
        for (wk, gk) in w.iter_mut().zip(&grad) {
            for (a, b) in wk.iter_mut().zip(gk) {
                *a -= 0.5 * b;
            }
        }
    }
    let mut hit = vec![0usize; c];
    let mut seen = vec![0usize; c];
    for (_, (x, y)) in &test {
        let z: Vec<f64> = w.iter().map(|wk| wk.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
        let pred = (0..c).fold(0, |b, k| if z[k] > z[b] { k } else { b });
        seen[*y] += 1;
        hit[*y] += usize::from(pred == *y);
    }
    (0..c).map(|k| hit[k] as f64 / seen[k] as f64).sum::<f64>() / c as f64
}

#[test]
fn separable_corpus_is_linearly_decodable() {
    let u = probe_uar(3.0);
    assert!(u >= 0.9, "probe UAR {u}");
}

#[test]
fn signal_free_corpus_is_not() {
    let u = probe_uar(0.0);
    assert!((u - 0.25).abs() < 0.12, "probe UAR {u}");
}
