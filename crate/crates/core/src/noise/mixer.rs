use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MixError, Waveform};

/// Mean of squared samples.
pub fn rms_power(w: &Waveform) -> f64 {
    power(w.samples())
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64
}

/// `10 log10(P_signal / P_noise)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseOffsetPolicy {
    /// Seeded random offset when the noise is longer than the speech,
    /// otherwise tiled from the start.
    RandomCrop,
    /// Always tiled from the first noise sample.
    Loop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipPolicy {
    /// Divide the whole mix by its peak.
    Rescale,
    /// Hard clip to `[-1, 1]`.
    Saturate,
}

impl FromStr for ClipPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rescale" => Ok(Self::Rescale),
            "saturate" => Ok(Self::Saturate),
            other => Err(format!("unknown clip policy `{other}` (rescale|saturate)")),
        }
    }
}

impl fmt::Display for ClipPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rescale => "rescale",
            Self::Saturate => "saturate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub noise_offset_policy: NoiseOffsetPolicy,
    pub seed: u64,
    pub clip_policy: ClipPolicy,
}

impl MixSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            noise_offset_policy: NoiseOffsetPolicy::RandomCrop,
            seed,
            clip_policy: ClipPolicy::Rescale,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixOutcome {
    pub noisy: Waveform,
    pub applied_gain: f64,
    pub noise_offset: usize,
    /// SNR of the speech against the scaled noise segment, before clipping.
    pub achieved_snr_db: f64,
    /// Peak absolute sample of the mix before clipping.
    pub peak: f64,
    pub clipped: bool,
}

/// The `len` noise samples starting at `offset`, wrapping around.
pub fn noise_segment(noise: &[f64], offset: usize, len: usize) -> Vec<f64> {
    (0..len).map(|i| noise[(offset + i) % noise.len()]).collect()
}

fn choose_offset(noise_len: usize, speech_len: usize, spec: &MixSpec) -> usize {
    match spec.noise_offset_policy {
        NoiseOffsetPolicy::Loop => 0,
        NoiseOffsetPolicy::RandomCrop if noise_len > speech_len => {
            ChaCha8Rng::seed_from_u64(spec.seed).random_range(0..=noise_len - speech_len)
        }
        NoiseOffsetPolicy::RandomCrop => 0,
    }
}

/// Adds `noise` to `speech` scaled so that the speech-to-noise power ratio of
/// the segment actually used equals `spec.snr_db`.
pub fn mix_at_snr(speech: &Waveform, noise: &Waveform, spec: &MixSpec) -> Result<MixOutcome, MixError> {
    if !spec.snr_db.is_finite() {
        return Err(MixError::BadSnr(spec.snr_db));
    }
    if speech.sample_rate() != noise.sample_rate() {
        return Err(MixError::SampleRate {
            speech: speech.sample_rate(),
            noise: noise.sample_rate(),
        });
    }
    let len = speech.len();
    let offset = choose_offset(noise.len(), len, spec);
    let segment = noise_segment(noise.samples(), offset, len);
    let p_speech = rms_power(speech);
    let p_noise = power(&segment);
    if p_speech == 0.0 {
        return Err(MixError::SilentSpeech);
    }
    if p_noise == 0.0 {
        return Err(MixError::SilentNoise);
    }
    let gain = (p_speech / (p_noise * 10f64.powf(spec.snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = segment.iter().map(|n| gain * n).collect();
    let achieved_snr_db = snr_db(speech.samples(), &scaled);
    let mut mix: Vec<f64> = speech.samples().iter().zip(&scaled).map(|(s, n)| s + n).collect();
    let peak = mix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let clipped = peak > 1.0;
    if clipped {
        match spec.clip_policy {
            ClipPolicy::Rescale => mix.iter_mut().for_each(|v| *v /= peak),
            ClipPolicy::Saturate => mix.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0)),
        }
    }
    Ok(MixOutcome {
        noisy: Waveform::new(mix, speech.sample_rate())?,
        applied_gain: gain,
        noise_offset: offset,
        achieved_snr_db,
        peak,
        clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 16000).unwrap()
    }

    fn random_wave(len: usize, amp: f64, r: &mut ChaCha8Rng) -> Waveform {
        wave((0..len).map(|_| amp * r.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn power_examples() {
        assert_eq!(rms_power(&wave(vec![0.5; 10])), 0.25);
        assert_eq!(rms_power(&wave(vec![0.0; 10])), 0.0);
        let n = 1600;
        let sine: Vec<f64> = (0..n).map(|i| (2.0 * PI * 5.0 * i as f64 / n as f64).sin()).collect();
        let mut direct = 0.0;
        for s in &sine {
            direct += s * s;
        }
        direct /= n as f64;
        assert!((direct - 0.5).abs() < 1e-9);
        assert!((rms_power(&wave(sine)) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn equal_power_at_zero_db_has_unit_gain() {
        let speech = wave(vec![0.3, -0.3, 0.3, -0.3]);
        let noise = wave(vec![-0.3, 0.3, 0.3, -0.3]);
        let out = mix_at_snr(&speech, &noise, &MixSpec::new(0.0, 1)).unwrap();
        assert!((out.applied_gain - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ten_db_gain_and_measured_snr() {
        let speech = wave(vec![0.2, -0.2, 0.2, -0.2]);
        let noise = wave(vec![0.2, 0.2, -0.2, -0.2]);
        let out = mix_at_snr(&speech, &noise, &MixSpec::new(10.0, 1)).unwrap();
        assert!((out.applied_gain - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((out.applied_gain - 0.316228).abs() < 1e-6);
        let scaled: Vec<f64> = noise.samples().iter().map(|n| n * out.applied_gain).collect();
        let measured = 10.0 * (rms_power(&speech) / (scaled.iter().map(|v| v * v).sum::<f64>() / 4.0)).log10();
        assert!((measured - 10.0).abs() < 1e-9);
    }

    #[test]
    fn snr_grid_is_hit_exactly() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..30 {
            let speech = random_wave(r.random_range(100..400), 0.2, &mut r);
            let noise = random_wave(r.random_range(50..800), 0.1, &mut r);
            for snr in [-5.0, 0.0, 5.0] {
                let out = mix_at_snr(&speech, &noise, &MixSpec::new(snr, seed)).unwrap();
                assert!(!out.clipped);
                let seg = noise_segment(noise.samples(), out.noise_offset, speech.len());
                let scaled: Vec<f64> = seg.iter().map(|v| v * out.applied_gain).collect();
                assert!((snr_db(speech.samples(), &scaled) - snr).abs() < 1e-6);
                assert!((out.achieved_snr_db - snr).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let speech = wave(vec![0.1; 8]);
        let other_rate = Waveform::new(vec![0.1; 8], 8000).unwrap();
        assert!(matches!(
            mix_at_snr(&speech, &other_rate, &MixSpec::new(0.0, 0)),
            Err(MixError::SampleRate { .. })
        ));
        assert_eq!(mix_at_snr(&speech, &wave(vec![0.0; 8]), &MixSpec::new(0.0, 0)), Err(MixError::SilentNoise));
        assert_eq!(mix_at_snr(&wave(vec![0.0; 8]), &speech, &MixSpec::new(0.0, 0)), Err(MixError::SilentSpeech));
        assert_eq!(Waveform::new(vec![], 16000), Err(MixError::Empty));
        assert!(mix_at_snr(&speech, &speech, &MixSpec::new(f64::NAN, 0)).is_err());
    }

    #[test]
    fn tiling_uses_every_source_sample_in_order() {
        let speech = wave(vec![0.1; 7]);
        let noise = wave(vec![0.1, 0.2, 0.3]);
        for policy in [NoiseOffsetPolicy::Loop, NoiseOffsetPolicy::RandomCrop] {
            let spec = MixSpec {
                noise_offset_policy: policy,
                ..MixSpec::new(0.0, 9)
            };
            let out = mix_at_snr(&speech, &noise, &spec).unwrap();
            assert_eq!(out.noise_offset, 0);
            let reconstructed: Vec<f64> = out
                .noisy
                .samples()
                .iter()
                .zip(speech.samples())
                .map(|(m, s)| (m - s) / out.applied_gain)
                .collect();
            let expected = [0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1];
            for (a, b) in reconstructed.iter().zip(expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crop_stays_inside_longer_noise() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let speech = random_wave(10, 0.5, &mut r);
        let noise = random_wave(25, 0.5, &mut r);
        let offsets: std::collections::BTreeSet<usize> = (0..50)
            .map(|seed| mix_at_snr(&speech, &noise, &MixSpec::new(0.0, seed)).unwrap().noise_offset)
            .collect();
        assert!(offsets.iter().all(|&o| o + 10 <= 25));
        assert!(offsets.len() > 1);
    }

    #[test]
    fn clipping_policies() {
        let speech = wave(vec![0.9, -0.9, 0.9, -0.9]);
        let noise = wave(vec![0.9, -0.9, 0.9, -0.9]);
        let out = mix_at_snr(&speech, &noise, &MixSpec::new(0.0, 0)).unwrap();
        assert!(out.clipped);
        assert!((out.peak - 1.8).abs() < 1e-12);
        assert!(out.noisy.samples().iter().all(|v| v.abs() <= 1.0));
        assert!((out.noisy.samples()[0] - 1.0).abs() < 1e-12);
        let sat = MixSpec {
            clip_policy: ClipPolicy::Saturate,
            ..MixSpec::new(6.0, 0)
        };
        let out = mix_at_snr(&speech, &noise, &sat).unwrap();
        assert!(out.clipped);
        assert_eq!(out.noisy.samples()[0], 1.0);
        assert_eq!(out.noisy.samples()[1], -1.0);
    }

    proptest! {
        #[test]
        fn gain_decreases_with_snr(seed in 0u64..500, lo in -30.0f64..30.0, delta in 0.01f64..20.0) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let speech = random_wave(64, 0.3, &mut r);
            let noise = random_wave(100, 0.3, &mut r);
            let a = mix_at_snr(&speech, &noise, &MixSpec::new(lo, seed)).unwrap();
            let b = mix_at_snr(&speech, &noise, &MixSpec::new(lo + delta, seed)).unwrap();
            prop_assert!(b.applied_gain < a.applied_gain);
        }

        #[test]
        fn mixing_is_deterministic(seed in 0u64..500) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let speech = random_wave(64, 0.3, &mut r);
            let noise = random_wave(200, 0.3, &mut r);
            let a = mix_at_snr(&speech, &noise, &MixSpec::new(0.0, seed)).unwrap();
            let b = mix_at_snr(&speech, &noise, &MixSpec::new(0.0, seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
