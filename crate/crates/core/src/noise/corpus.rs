use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use thiserror::Error;

use super::mixer::{mix_at_snr, MixSpec};
use super::wav::{read_wav, write_wav, WavError};
use super::{MixError, Waveform};
use crate::harness::manifest::{Manifest, ManifestError, ManifestRow};
use crate::seeding::keyed_stream;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("utterance {id}: {source}")]
    Wav {
        id: String,
        #[source]
        source: WavError,
    },
    #[error("utterance {id}: {source}")]
    Mix {
        id: String,
        #[source]
        source: MixError,
    },
    #[error("noise manifest has no entries")]
    NoNoise,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What was done to one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct MixAudit {
    pub id: String,
    pub noise_id: String,
    pub noise_offset: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub applied_gain: f64,
    pub achieved_snr_db: f64,
    pub peak: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyCorpus {
    pub manifest: Manifest,
    pub audit: Vec<MixAudit>,
}

pub const AUDIT_FILE: &str = "mix_audit.tsv";
pub const MANIFEST_FILE: &str = "manifest.tsv";

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn audit_tsv(audit: &[MixAudit], spec: &MixSpec) -> String {
    let mut out = String::from("# id\tnoise\toffset\tsnr_db\tseed\tapplied_gain\tachieved_snr_db\tpeak\tclip\n");
    for a in audit {
        let clip = if a.clipped { spec.clip_policy.to_string() } else { "none".into() };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.id, a.noise_id, a.noise_offset, a.snr_db, a.seed, a.applied_gain, a.achieved_snr_db, a.peak, clip
        );
    }
    out
}

/// Mixes every clean utterance with one noise recording at `spec.snr_db` and
/// writes `<id>.wav`, a manifest and a mixing audit into `out_dir`.
///
/// The noise recording and crop offset of each utterance depend only on
/// `(spec.seed, utterance id)`. Rows are emitted in utterance-id order.
pub fn build_noisy_manifest(
    clean: &Manifest,
    noise: &Manifest,
    spec: &MixSpec,
    out_dir: &Path,
) -> Result<NoisyCorpus, CorpusError> {
    if noise.is_empty() {
        return Err(CorpusError::NoNoise);
    }
    let mut missing = Vec::new();
    for m in [clean, noise] {
        if let Err(ManifestError::MissingFiles(files)) = m.check_files() {
            missing.extend(files);
        }
    }
    if !missing.is_empty() {
        return Err(ManifestError::MissingFiles(missing).into());
    }

    let noise_waves: Vec<(String, Waveform)> = noise
        .rows()
        .iter()
        .map(|r| {
            read_wav(noise.resolve(r))
                .map(|w| (r.id.clone(), w))
                .map_err(|source| CorpusError::Wav { id: r.id.clone(), source })
        })
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir).map_err(|source| CorpusError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;

    let mut order: Vec<&ManifestRow> = clean.rows().iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mixed: Vec<Result<(ManifestRow, MixAudit), CorpusError>> = order
        .par_iter()
        .map(|row| {
            let id = row.id.clone();
            let speech = read_wav(clean.resolve(row)).map_err(|source| CorpusError::Wav { id: id.clone(), source })?;
            let pick = keyed_stream(spec.seed, "noise-source", &id).random_range(0..noise_waves.len());
            let (noise_id, noise_wave) = &noise_waves[pick];
            let seed = keyed_stream(spec.seed, "crop", &id).next_u64();
            let utt_spec = MixSpec { seed, ..*spec };
            let out = mix_at_snr(&speech, noise_wave, &utt_spec).map_err(|source| CorpusError::Mix {
                id: id.clone(),
                source,
            })?;
            let file = format!("{}.wav", file_stem(&id));
            write_wav(&out.noisy, out_dir.join(&file)).map_err(|source| CorpusError::Wav { id: id.clone(), source })?;
            let mut new_row = (*row).clone();
            new_row.path = file;
            new_row.snr_db = Some(spec.snr_db);
            let audit = MixAudit {
                id,
                noise_id: noise_id.clone(),
                noise_offset: out.noise_offset,
                snr_db: spec.snr_db,
                seed,
                applied_gain: out.applied_gain,
                achieved_snr_db: out.achieved_snr_db,
                peak: out.peak,
                clipped: out.clipped,
            };
            Ok((new_row, audit))
        })
        .collect();

    let mut rows = Vec::with_capacity(mixed.len());
    let mut audit = Vec::with_capacity(mixed.len());
    for item in mixed {
        let (row, a) = item?;
        rows.push(row);
        audit.push(a);
    }
    let manifest = Manifest::from_rows(rows, out_dir)?;
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    let audit_path = out_dir.join(AUDIT_FILE);
    fs::write(&audit_path, audit_tsv(&audit, spec)).map_err(|source| CorpusError::Io {
        path: audit_path.display().to_string(),
        source,
    })?;
    Ok(NoisyCorpus { manifest, audit })
}

/// Loads noise recordings keyed by id; used by callers that want to re-check
/// an audit against the sources.
pub fn load_noise(noise: &Manifest) -> Result<HashMap<String, Waveform>, CorpusError> {
    noise
        .rows()
        .iter()
        .map(|r| {
            read_wav(noise.resolve(r))
                .map(|w| (r.id.clone(), w))
                .map_err(|source| CorpusError::Wav { id: r.id.clone(), source })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::mixer::{noise_segment, snr_db};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(dir: &Path, n_clean: usize) -> (Manifest, Manifest) {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let mut clean = String::new();
        for i in 0..n_clean {
            let len = r.random_range(200..600);
            let w = Waveform::new((0..len).map(|_| r.random_range(-0.3..0.3)).collect(), 16000).unwrap();
            write_wav(&w, dir.join(format!("c{i}.wav"))).unwrap();
            clean.push_str(&format!("utt{i:02}\tc{i}.wav\t{}\n", ["a", "b"][i % 2]));
        }
        let mut noise = String::new();
        for (i, len) in [300usize, 1000].into_iter().enumerate() {
            let w = Waveform::new((0..len).map(|_| r.random_range(-0.2..0.2)).collect(), 16000).unwrap();
            write_wav(&w, dir.join(format!("n{i}.wav"))).unwrap();
            noise.push_str(&format!("noise{i}\tn{i}.wav\tnoise\n"));
        }
        fs::write(dir.join("clean.tsv"), clean).unwrap();
        fs::write(dir.join("noise.tsv"), noise).unwrap();
        (
            Manifest::load(dir.join("clean.tsv")).unwrap(),
            Manifest::load(dir.join("noise.tsv")).unwrap(),
        )
    }

    fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    }

    #[test]
    fn audit_matches_independent_remeasurement() {
        let tmp = tempfile::tempdir().unwrap();
        let (clean, noise) = fixture(tmp.path(), 20);
        let sources = load_noise(&noise).unwrap();
        for snr in [-5.0, 0.0, 5.0] {
            let out = tmp.path().join(format!("mix{snr}"));
            let corpus = build_noisy_manifest(&clean, &noise, &MixSpec::new(snr, 4), &out).unwrap();
            assert_eq!(corpus.audit.len(), 20);
            for (a, row) in corpus.audit.iter().zip(clean.rows()) {
                assert_eq!(a.id, row.id);
                let speech = read_wav(clean.resolve(row)).unwrap();
                let seg = noise_segment(sources[&a.noise_id].samples(), a.noise_offset, speech.len());
                let scaled: Vec<f64> = seg.iter().map(|v| v * a.applied_gain).collect();
                assert!((snr_db(speech.samples(), &scaled) - snr).abs() < 1e-6);
            }
            let written = Manifest::load(out.join(MANIFEST_FILE)).unwrap();
            assert!(written.rows().iter().all(|r| r.snr_db == Some(snr)));
            assert_eq!(written.len(), 20);
        }
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let (clean, noise) = fixture(tmp.path(), 6);
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        build_noisy_manifest(&clean, &noise, &MixSpec::new(0.0, 9), &a).unwrap();
        build_noisy_manifest(&clean, &noise, &MixSpec::new(0.0, 9), &b).unwrap();
        assert_eq!(dir_bytes(&a), dir_bytes(&b));
        let c = tmp.path().join("c");
        build_noisy_manifest(&clean, &noise, &MixSpec::new(0.0, 10), &c).unwrap();
        assert_ne!(dir_bytes(&a), dir_bytes(&c));
    }

    #[test]
    fn vanishing_noise_leaves_clean_speech() {
        let tmp = tempfile::tempdir().unwrap();
        let (clean, noise) = fixture(tmp.path(), 4);
        let out = tmp.path().join("quiet");
        let corpus = build_noisy_manifest(&clean, &noise, &MixSpec::new(200.0, 1), &out).unwrap();
        for (row, mixed) in clean.rows().iter().zip(corpus.manifest.rows()) {
            let c = read_wav(clean.resolve(row)).unwrap();
            let m = read_wav(corpus.manifest.resolve(mixed)).unwrap();
            let dev = c.samples().iter().zip(m.samples()).fold(0.0f64, |d, (x, y)| d.max((x - y).abs()));
            assert!(dev < 1e-4);
        }
    }

    #[test]
    fn missing_files_are_all_listed() {
        let tmp = tempfile::tempdir().unwrap();
        let (clean, _) = fixture(tmp.path(), 2);
        let noise = Manifest::parse("n0\tgone0.wav\tnoise\nn1\tgone1.wav\tnoise\n", tmp.path()).unwrap();
        match build_noisy_manifest(&clean, &noise, &MixSpec::new(0.0, 1), &tmp.path().join("o")) {
            Err(CorpusError::Manifest(ManifestError::MissingFiles(f))) => {
                assert_eq!(f.len(), 2);
                assert!(f[0].ends_with("gone0.wav"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
