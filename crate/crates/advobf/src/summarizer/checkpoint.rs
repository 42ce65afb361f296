//! JSON checkpoints with a content hash over the canonicalized parameters.
//!
//! Checkpoints are self-contained: they carry the input vocabulary, the
//! output subtokens, and the transform set the model was trained under,
//! since the embedding matrix is meaningless without the exact vocabulary
//! ordering.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::minilang::{TransformKind, TransformSet, Vocabulary, PLACEHOLDER, UNK};

use super::model::{Arch, OutputVocab, Params, SummarizerModel};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },
}

#[derive(Serialize, Deserialize)]
struct VocabsSection {
    tokens: Vec<String>,
    identifier_ok: Vec<bool>,
    output_subtokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TransformsSection {
    active: Vec<String>,
    padded: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    arch: Arch,
    vocabs: VocabsSection,
    transforms: TransformsSection,
    params: Params,
    sha256: String,
}

/// Canonical JSON of the parameters; the serde field order is fixed, so
/// two equal parameter sets always hash identically.
fn canonical_params(params: &Params) -> String {
    serde_json::to_string(params).expect("params serialize")
}

fn params_digest(params: &Params) -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical_params(params).as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn save(model: &SummarizerModel, path: &Path) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        arch: model.arch,
        vocabs: VocabsSection {
            tokens: model.vocab.tokens().to_vec(),
            identifier_ok: (0..model.vocab.len())
                .map(|i| model.vocab.is_identifier_ok(i))
                .collect(),
            output_subtokens: model.output_vocab.subtokens()[1..].to_vec(),
        },
        transforms: TransformsSection {
            active: model
                .transforms
                .active_kinds()
                .iter()
                .map(|k| k.name().to_string())
                .collect(),
            padded: model
                .transforms
                .padded_kinds()
                .iter()
                .map(|k| k.name().to_string())
                .collect(),
        },
        params: model.params.clone(),
        sha256: params_digest(&model.params),
    };
    let mut text = serde_json::to_string(&file).expect("checkpoint serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SummarizerModel, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile =
        serde_json::from_str(&text).map_err(|e| CheckpointError::Format(e.to_string()))?;
    let computed = params_digest(&file.params);
    if computed != file.sha256 {
        return Err(CheckpointError::ChecksumMismatch {
            stored: file.sha256,
            computed,
        });
    }
    if file.vocabs.tokens.first().map(String::as_str) != Some(UNK)
        || file.vocabs.tokens.get(1).map(String::as_str) != Some(PLACEHOLDER)
    {
        return Err(CheckpointError::Format(
            "vocabulary must start with the special tokens".into(),
        ));
    }
    let vocab = Vocabulary::new(file.vocabs.tokens.iter().skip(2));
    if vocab.len() != file.arch.omega_size {
        return Err(CheckpointError::Format(format!(
            "vocabulary size {} does not match arch omega_size {}",
            vocab.len(),
            file.arch.omega_size
        )));
    }
    let output_vocab = OutputVocab::new(file.vocabs.output_subtokens);
    if output_vocab.len() != file.arch.output_size {
        return Err(CheckpointError::Format(
            "output vocabulary size does not match arch".into(),
        ));
    }
    let parse_kinds = |names: &[String]| -> Result<Vec<TransformKind>, CheckpointError> {
        names
            .iter()
            .map(|n| {
                TransformKind::from_name(n)
                    .ok_or_else(|| CheckpointError::Format(format!("unknown transform {n:?}")))
            })
            .collect()
    };
    let transforms = TransformSet::from_parts(
        &parse_kinds(&file.transforms.active)?,
        &parse_kinds(&file.transforms.padded)?,
    );
    let shapes_ok = file.params.embed.len() == file.arch.omega_size
        && file.params.embed.iter().all(|r| r.len() == file.arch.d)
        && file.params.w1.len() == file.arch.h
        && file.params.heads_w.len() == file.arch.l
        && file.params.heads_b.len() == file.arch.l;
    if !shapes_ok {
        return Err(CheckpointError::Format("parameter shapes disagree with arch".into()));
    }
    Ok(SummarizerModel {
        arch: file.arch,
        params: file.params,
        vocab,
        output_vocab,
        transforms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{generate_corpus, standard_vocabulary, GenConfig};
    use crate::summarizer::train::{train, ModelConfig, TrainParams};

    fn trained() -> SummarizerModel {
        let entries = generate_corpus(&GenConfig::new(10, 3));
        train(
            &entries,
            &standard_vocabulary(),
            &TransformSet::full(),
            &ModelConfig { d: 6, h: 7, l: 3 },
            &TrainParams {
                epochs: 2,
                batch: 4,
                lr: 0.5,
                seed: 5,
                augment_placeholders: 0.15,
                augment_inserts: 2,
            },
        )
        .unwrap()
        .model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(model, loaded);
        // saving the loaded model reproduces the same bytes
        let path2 = dir.path().join("model2.json");
        save(&loaded, &path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupt_params_fail_checksum() {
        let model = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["params"]["b1"][0] = serde_json::json!(123.456);
        fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        match load(&path) {
            Err(CheckpointError::ChecksumMismatch { .. }) => {}
            other => panic!("expected checksum mismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load(Path::new("/nonexistent/model.json")),
            Err(CheckpointError::Io(_))
        ));
    }
}
