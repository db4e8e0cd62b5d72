//! Building noisy corpora: WAV I/O and mixing clean speech with recorded
//! noise at an exact signal-to-noise ratio.

mod corpus;
mod mixer;
pub mod wav;

use thiserror::Error;

pub use corpus::{build_noisy_manifest, load_noise, CorpusError, MixAudit, NoisyCorpus, AUDIT_FILE, MANIFEST_FILE};
pub use mixer::{mix_at_snr, noise_segment, rms_power, snr_db, ClipPolicy, MixOutcome, MixSpec, NoiseOffsetPolicy};
pub use wav::{read_wav, write_wav, WavError};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("empty waveform")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample rate mismatch: speech {speech} Hz, noise {noise} Hz")]
    SampleRate { speech: u32, noise: u32 },
    #[error("noise segment has zero power")]
    SilentNoise,
    #[error("speech has zero power")]
    SilentSpeech,
    #[error("target SNR {0} dB is not finite")]
    BadSnr(f64),
}

/// Mono audio with samples nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, MixError> {
        if samples.is_empty() {
            return Err(MixError::Empty);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(MixError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
