use std::path::PathBuf;

use nser_core::adapter::{forward, Model, RepresentationSource, StackConfig, Variant};
use nser_core::nn::Mode;
use nser_core::repr::{decode_lrf, encode_lrf, read_lrf, LrfError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stored_crc(bytes: &[u8]) -> u32 {
    let n = bytes.len();
    u32::from_le_bytes([bytes[n - 4], bytes[n - 3], bytes[n - 2], bytes[n - 1]])
}

#[test]
fn golden_small_parses_to_known_values() {
    let path = fixture("golden_small.lrf");
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 107);
    assert_eq!(stored_crc(&bytes), 0x5432_2a4f);
    let rep = read_lrf(&path).unwrap();
    assert_eq!(rep.utterance_id, "golden-01");
    assert_eq!(rep.dim(), 3);
    assert_eq!((rep.encoder_layers().len(), rep.decoder_layers().len()), (2, 1));
    assert_eq!(rep.encoder_layers()[0].data(), &[0.5, -1.25, 2.0, 0.0, 3.75, -0.125]);
    assert_eq!(rep.encoder_layers()[1].data(), &[1.0, 1.0, 1.0, -2.5, 0.25, 8.0]);
    assert_eq!(rep.decoder_layers()[0].data(), &[0.75, -0.5, 4.0]);
    assert_eq!(encode_lrf(&rep), bytes);
}

#[test]
fn golden_encoder_only_runs_forward() {
    let path = fixture("golden_encoder_only.lrf");
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(stored_crc(&bytes), 0xca60_4c21);
    let rep = read_lrf(&path).unwrap();
    assert!(rep.decoder_layers().is_empty());
    assert_eq!(rep.encoder_layers()[1].data(), &[0.0625, 100.0]);

    let cfg = StackConfig {
        source: RepresentationSource::EncoderOnly,
        variant: Variant::Adapter,
        layers_enc: 2,
        layers_dec: 0,
        input_dim: 2,
        adapter_hidden: 3,
        ..StackConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let model = Model::new(&cfg, vec!["a".into(), "b".into()], &mut rng).unwrap();
    let probs = forward(&rep, &model.stack, &model.classifier, Mode::Eval, &mut rng).unwrap();
    assert!(probs.iter().all(|p| p.is_finite()));
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn golden_corruption_is_detected() {
    let bytes = std::fs::read(fixture("golden_small.lrf")).unwrap();
    let mut bad = bytes.clone();
    bad[45] ^= 0x01;
    assert!(matches!(decode_lrf(&bad), Err(LrfError::Crc { offset: 103, .. })));
}
