use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::adapter::{LayeredRepresentation, Side};
use crate::nn::Matrix;
use crate::seeding::stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

/// Parameters of the synthetic layered corpus.
///
/// Every frame of layer `l` (of `L` on its side) is
/// `class_separation * (l + 1) / L * u_c + noise_scale * N(0, I)`, where the
/// `u_c` are seeded unit vectors (orthonormal when `dim >= num_classes`).
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub dim: usize,
    /// Inclusive range of sequence lengths, drawn per utterance and side.
    pub seq_len: (usize, usize),
    pub class_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            per_class: 200,
            layers_enc: 13,
            layers_dec: 13,
            dim: 64,
            seq_len: (4, 12),
            class_separation: 3.0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Spec(m.into()));
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if self.per_class == 0 || self.layers_enc == 0 || self.dim == 0 {
            return bad("per_class, layers_enc and dim must be positive");
        }
        if self.seq_len.0 == 0 || self.seq_len.0 > self.seq_len.1 {
            return bad("seq_len must satisfy 1 <= min <= max");
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be finite and >= 0");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale must be finite and >= 0");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.num_classes * self.per_class
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_layers(&self, side: Side) -> usize {
        match side {
            Side::Encoder => self.layers_enc,
            Side::Decoder => self.layers_dec,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub spec: SynthSpec,
    pub class_names: Vec<String>,
    /// `(representation, class index)`; classes interleave.
    pub items: Vec<(LayeredRepresentation, usize)>,
    directions: Vec<Vec<f64>>,
}

impl SyntheticCorpus {
    /// Unit vector carrying the signal of `class`.
    pub fn direction(&self, class: usize) -> &[f64] {
        &self.directions[class]
    }

    /// Signal strength along `direction(class)` at a given layer.
    pub fn planted_magnitude(&self, side: Side, layer: usize) -> f64 {
        self.spec.class_separation * (layer + 1) as f64 / self.spec.num_layers(side) as f64
    }

    pub fn planted_mean(&self, class: usize, side: Side, layer: usize) -> Vec<f64> {
        let a = self.planted_magnitude(side, layer);
        self.directions[class].iter().map(|u| a * u).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|(_, y)| *y).collect()
    }
}

fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn directions(spec: &SynthSpec) -> Vec<Vec<f64>> {
    let mut rng = stream(spec.seed, "synth-basis", &[]);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(spec.num_classes);
    for c in 0..spec.num_classes {
        loop {
            let mut v = gaussian(spec.dim, &mut rng);
            if c < spec.dim {
                for b in &basis {
                    let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
                break;
            }
        }
    }
    basis
}

/// Deterministic layered corpus with class signal growing toward deeper layers.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let dirs = directions(spec);
    let class_names: Vec<String> = (0..spec.num_classes).map(|c| format!("c{c}")).collect();
    let d = spec.dim;
    let items = (0..spec.len())
        .map(|k| {
            let class = k % spec.num_classes;
            let mut rng = stream(spec.seed, "synth-utt", &[k as u64]);
            let mut side_layers = |side: Side| {
                let layers = spec.num_layers(side);
                let steps = rng.random_range(spec.seq_len.0..=spec.seq_len.1);
                (0..layers)
                    .map(|l| {
                        let a = spec.class_separation * (l + 1) as f64 / layers as f64;
                        let mut data = gaussian(steps * d, &mut rng);
                        for row in data.chunks_exact_mut(d) {
                            for (x, u) in row.iter_mut().zip(&dirs[class]) {
                                *x = spec.noise_scale * *x + a * u;
                            }
                        }
                        Matrix::from_vec(steps, d, data).expect("shape")
                    })
                    .collect::<Vec<_>>()
            };
            let enc = side_layers(Side::Encoder);
            let dec = side_layers(Side::Decoder);
            let rep = LayeredRepresentation::new(format!("syn{k:05}"), d, enc, dec).expect("valid by construction");
            (rep, class)
        })
        .collect();
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        class_names,
        items,
        directions: dirs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            per_class: 200,
            layers_enc: 3,
            layers_dec: 2,
            dim: 8,
            seq_len: (2, 5),
            seed: 1,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec { per_class: 5, ..small() };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a.items.len(), 20);
        for ((ra, ya), (rb, yb)) in a.items.iter().zip(&b.items) {
            assert_eq!(ya, yb);
            assert_eq!(ra, rb);
        }
        let c = gen_synthetic(&SynthSpec { seed: 18, ..spec }).unwrap();
        assert_ne!(a.items[0].0, c.items[0].0);
    }

    #[test]
    fn directions_are_orthonormal() {
        let corpus = gen_synthetic(&SynthSpec { per_class: 1, ..small() }).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = corpus.direction(i).iter().zip(corpus.direction(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_means_are_recovered() {
        let corpus = gen_synthetic(&small()).unwrap();
        let spec = &corpus.spec;
        for side in [Side::Encoder, Side::Decoder] {
            for layer in 0..spec.num_layers(side) {
                for class in 0..spec.num_classes {
                    let u = corpus.direction(class);
                    let mut sum = 0.0;
                    let mut frames = 0usize;
                    for (rep, y) in &corpus.items {
                        if *y != class {
                            continue;
                        }
                        let m = &rep.layers(side)[layer];
                        for t in 0..m.rows() {
                            sum += m.row(t).iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
                            frames += 1;
                        }
                    }
                    let mean = sum / frames as f64;
                    let se = spec.noise_scale / (frames as f64).sqrt();
                    let planted = corpus.planted_magnitude(side, layer);
                    assert!((mean - planted).abs() < 3.0 * se, "{side} {layer} {class}: {mean} vs {planted}");
                }
            }
        }
    }

    #[test]
    fn zero_separation_has_no_class_mean() {
        let corpus = gen_synthetic(&SynthSpec {
            class_separation: 0.0,
            ..small()
        })
        .unwrap();
        assert!(corpus.planted_mean(2, Side::Encoder, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_synthetic(&SynthSpec { num_classes: 1, ..small() }).is_err());
        assert!(gen_synthetic(&SynthSpec { seq_len: (0, 3), ..small() }).is_err());
        assert!(gen_synthetic(&SynthSpec { seq_len: (4, 3), ..small() }).is_err());
        assert!(gen_synthetic(&SynthSpec {
            class_separation: -1.0,
            ..small()
        })
        .is_err());
    }

    #[test]
    fn encoder_only_corpus() {
        let corpus = gen_synthetic(&SynthSpec {
            layers_dec: 0,
            per_class: 2,
            ..small()
        })
        .unwrap();
        assert!(corpus.items.iter().all(|(r, _)| r.decoder_layers().is_empty()));
    }
}
