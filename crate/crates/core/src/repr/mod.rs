//! Layered representation files and the synthetic corpus generator.

mod lrf;
mod synth;

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::harness::manifest::{Manifest, ManifestError, ManifestRow};

pub use lrf::{decode_lrf, encode_lrf, read_lrf, write_lrf, LrfError, MAGIC, VERSION};
pub use synth::{gen_synthetic, SynthError, SynthSpec, SyntheticCorpus};

#[derive(Debug, Error)]
pub enum CorpusWriteError {
    #[error(transparent)]
    Lrf(#[from] LrfError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const CORPUS_MANIFEST: &str = "manifest.tsv";

/// Writes one `<id>.lrf` per utterance plus `manifest.tsv` into `dir`.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: &Path) -> Result<Manifest, CorpusWriteError> {
    fs::create_dir_all(dir).map_err(|source| CorpusWriteError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut rows = Vec::with_capacity(corpus.items.len());
    for (rep, y) in &corpus.items {
        let file = format!("{}.lrf", rep.utterance_id);
        write_lrf(rep, dir.join(&file))?;
        rows.push(ManifestRow::new(rep.utterance_id.clone(), file, corpus.class_names[*y].clone()));
    }
    let manifest = Manifest::from_rows(rows, dir)?;
    manifest.write(dir.join(CORPUS_MANIFEST))?;
    Ok(manifest)
}
