//! 16-bit PCM mono RIFF/WAVE reading and writing.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::Waveform;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("unsupported format at byte {offset}: {reason}")]
    Unsupported { offset: usize, reason: String },
    #[error("truncated {chunk} chunk at byte {offset}: declared {declared} bytes, {available} available")]
    Truncated {
        chunk: String,
        offset: usize,
        declared: usize,
        available: usize,
    },
    #[error("invalid waveform: {0}")]
    Invalid(String),
}

const PCM_FORMAT: u16 = 1;

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a complete WAV file image. Samples are `pcm / 32768`.
pub fn parse_wav(bytes: &[u8]) -> Result<Waveform, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::Malformed {
            offset: 0,
            reason: format!("file is {} bytes, shorter than the RIFF header", bytes.len()),
        });
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(WavError::Malformed {
            offset: 0,
            reason: "missing RIFF tag".into(),
        });
    }
    let riff_size = u32_at(bytes, 4) as usize;
    if riff_size != bytes.len() - 8 {
        return Err(WavError::Malformed {
            offset: 4,
            reason: format!("RIFF size {riff_size} but file holds {} bytes after it", bytes.len() - 8),
        });
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(WavError::Malformed {
            offset: 8,
            reason: "missing WAVE tag".into(),
        });
    }

    let mut pos = 12;
    let mut format: Option<(u32, u16)> = None;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(WavError::Malformed {
                offset: pos,
                reason: "incomplete chunk header".into(),
            });
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let available = bytes.len() - body;
        let name = String::from_utf8_lossy(id).into_owned();
        if size > available {
            return Err(WavError::Truncated {
                chunk: name,
                offset: pos + 4,
                declared: size,
                available,
            });
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::Malformed {
                        offset: pos + 4,
                        reason: format!("fmt chunk of {size} bytes, need at least 16"),
                    });
                }
                let audio_format = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let byte_rate = u32_at(bytes, body + 8);
                let align = u16_at(bytes, body + 12);
                let bits = u16_at(bytes, body + 14);
                if audio_format != PCM_FORMAT {
                    return Err(WavError::Unsupported {
                        offset: body,
                        reason: format!("audio format {audio_format}, only PCM (1) is supported"),
                    });
                }
                if channels != 1 {
                    return Err(WavError::Unsupported {
                        offset: body + 2,
                        reason: format!("{channels} channels, only mono is supported"),
                    });
                }
                if bits != 16 {
                    return Err(WavError::Unsupported {
                        offset: body + 14,
                        reason: format!("{bits} bits per sample, only 16 is supported"),
                    });
                }
                if align != 2 || byte_rate != rate * 2 {
                    return Err(WavError::Malformed {
                        offset: body + 8,
                        reason: format!("byte rate {byte_rate}/block align {align} inconsistent with 16-bit mono at {rate} Hz"),
                    });
                }
                format = Some((rate, bits));
            }
            b"data" => {
                let Some((rate, _)) = format else {
                    return Err(WavError::Malformed {
                        offset: pos,
                        reason: "data chunk before fmt chunk".into(),
                    });
                };
                if !size.is_multiple_of(2) {
                    return Err(WavError::Malformed {
                        offset: pos + 4,
                        reason: format!("data size {size} is not a whole number of 16-bit samples"),
                    });
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])) / 32768.0)
                    .collect();
                return Waveform::new(samples, rate).map_err(|e| WavError::Invalid(e.to_string()));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(WavError::Malformed {
        offset: bytes.len(),
        reason: "no data chunk".into(),
    })
}

/// Rounds half away from zero and saturates to the i16 range.
pub fn quantize(sample: f64) -> i16 {
    let scaled = (sample * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = w.samples().len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in w.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wav(&bytes)
}

pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<(), WavError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(w)).map_err(|source| WavError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm_file(pcm: &[i16], rate: u32) -> Vec<u8> {
        let w = Waveform::new(pcm.iter().map(|&p| f64::from(p) / 32768.0).collect(), rate).unwrap();
        encode_wav(&w)
    }

    #[test]
    fn reads_scaled_pcm() {
        let bytes = pcm_file(&[0, 16384, -32768], 16000);
        let w = parse_wav(&bytes).unwrap();
        assert_eq!(w.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(w.sample_rate(), 16000);
    }

    #[test]
    fn header_layout_is_canonical() {
        let bytes = pcm_file(&[1, -1], 8000);
        assert_eq!(bytes.len(), 48);
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(u32_at(&bytes, 4), 40);
        assert_eq!(u32_at(&bytes, 24), 8000);
        assert_eq!(u32_at(&bytes, 40), 4);
    }

    #[test]
    fn wrong_riff_size_reports_offset() {
        let mut bytes = pcm_file(&[1, 2, 3], 16000);
        bytes[4] ^= 0x01;
        match parse_wav(&bytes) {
            Err(WavError::Malformed { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_data_chunk_reports_offset() {
        let mut bytes = pcm_file(&[1, 2, 3, 4], 16000);
        bytes.truncate(bytes.len() - 2);
        let riff = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff.to_le_bytes());
        match parse_wav(&bytes) {
            Err(WavError::Truncated { offset, declared, available, .. }) => {
                assert_eq!(offset, 40);
                assert_eq!((declared, available), (8, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_stereo_and_non_pcm() {
        let mut stereo = pcm_file(&[1, 2], 16000);
        stereo[22] = 2;
        assert!(matches!(parse_wav(&stereo), Err(WavError::Unsupported { offset: 22, .. })));
        let mut float = pcm_file(&[1, 2], 16000);
        float[20] = 3;
        assert!(matches!(parse_wav(&float), Err(WavError::Unsupported { offset: 20, .. })));
        let mut bits = pcm_file(&[1, 2], 16000);
        bits[34] = 24;
        assert!(matches!(parse_wav(&bits), Err(WavError::Unsupported { offset: 34, .. })));
    }

    #[test]
    fn skips_unknown_chunks() {
        let base = pcm_file(&[7, -7], 16000);
        let mut bytes = base[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&base[36..]);
        let riff = (bytes.len() - 8) as u32;
        bytes[4..8].copy_from_slice(&riff.to_le_bytes());
        let w = parse_wav(&bytes).unwrap();
        assert_eq!(w.samples().len(), 2);
    }

    #[test]
    fn quantization_rounds_half_away_from_zero() {
        assert_eq!(quantize(0.5 / 32768.0), 1);
        assert_eq!(quantize(-0.5 / 32768.0), -1);
        assert_eq!(quantize(1.0), 32767);
        assert_eq!(quantize(-1.0), -32768);
        assert_eq!(quantize(1.4 / 32768.0), 1);
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(pcm in prop::collection::vec(any::<i16>(), 1..200), rate in 1u32..96000) {
            let bytes = pcm_file(&pcm, rate);
            let w = parse_wav(&bytes).unwrap();
            prop_assert_eq!(encode_wav(&w), bytes);
            let back: Vec<i16> = w.samples().iter().map(|&s| quantize(s)).collect();
            prop_assert_eq!(back, pcm);
        }
    }
}
