//! Desk-scale attack instances small enough for exhaustive search.
//!
//! A tiny instance is a two-parameter program over an eight-word
//! vocabulary with a micro-summarizer trained on all sixteen programs of
//! the family. The first name subtoken is decided by which first-pool
//! word appears, the second by the second-pool word, so the labels are
//! learnable from the token bag and genuinely attackable through renames.
//! Insert transforms are disabled: their pre-materialized templates would
//! blow the eight-position budget.

use advobf::minilang::{CorpusEntry, TransformSet, Vocabulary};
use advobf::summarizer::train::{train, ModelConfig, TrainParams};
use advobf::summarizer::SummarizerModel;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const POOL_A: [&str; 4] = ["alpha", "beta", "gato", "delta"];
const POOL_B: [&str; 4] = ["echo", "fox", "golf", "hotel"];

fn class_a(word: &str) -> &'static str {
    match word {
        "alpha" | "beta" => "ca",
        _ => "cb",
    }
}

fn class_b(word: &str) -> &'static str {
    match word {
        "echo" | "fox" => "cc",
        _ => "cd",
    }
}

fn source_for(x: &str, y: &str) -> String {
    format!("def f({x}, {y}):\n    return {x} - {y}\n")
}

fn micro_corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::with_capacity(16);
    for &x in &POOL_A {
        for &y in &POOL_B {
            out.push(CorpusEntry {
                id: out.len() as u64,
                source: source_for(x, y),
                name_subtokens: vec![class_a(x).to_string(), class_b(y).to_string()],
            });
        }
    }
    out
}

fn micro_vocab() -> Vocabulary {
    let mut tokens: Vec<String> = vec![
        "def".into(),
        ":".into(),
        "return".into(),
        "-".into(),
    ];
    tokens.extend(POOL_A.iter().map(|s| s.to_string()));
    tokens.extend(POOL_B.iter().map(|s| s.to_string()));
    Vocabulary::new(tokens)
}

/// One exhaustively-searchable attack instance: a fixed trained
/// micro-model, a target program, and a perturbation budget.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub model: SummarizerModel,
    pub entry: CorpusEntry,
    pub k: usize,
}

impl TinyInstance {
    /// Deterministic instance for `seed`: the micro-model's training seed,
    /// the target program, and k in {1, 2} all derive from it.
    pub fn generate(seed: u64) -> TinyInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corpus = micro_corpus();
        let model = train(
            &corpus,
            &micro_vocab(),
            &TransformSet::replace_only(),
            &ModelConfig { d: 8, h: 12, l: 2 },
            &TrainParams {
                epochs: 300,
                batch: 4,
                lr: 0.5,
                seed: rng.gen(),
                augment_placeholders: 0.0,
                augment_inserts: 0,
            },
        )
        .expect("micro corpus trains")
        .model;
        let entry = corpus[rng.gen_range(0..corpus.len())].clone();
        let k = 1 + (rng.gen::<bool>() as usize);
        TinyInstance { model, entry, k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use advobf::minilang::{encode_with_sites, parse_source};
    use advobf::summarizer::train::{build_dataset, per_position_accuracy};

    #[test]
    fn instances_respect_the_size_bounds() {
        let inst = TinyInstance::generate(1);
        let func = parse_source(&inst.entry.source).unwrap();
        let enc = encode_with_sites(&func, &inst.model.vocab, &inst.model.transforms);
        assert!(enc.n() <= 8, "n = {}", enc.n());
        assert!(enc.sitemap.sites.len() <= 3);
        for site in &enc.sitemap.sites {
            assert!(site.candidates.len() <= 8);
        }
        assert!(inst.k <= 2);
    }

    #[test]
    fn micro_model_learns_the_family() {
        let inst = TinyInstance::generate(2);
        let corpus = micro_corpus();
        let ds = build_dataset(
            &corpus,
            &inst.model.vocab,
            &inst.model.output_vocab,
            &inst.model.transforms,
            2,
        )
        .unwrap();
        let acc = per_position_accuracy(&inst.model, &ds);
        assert!(acc >= 0.9, "micro accuracy {acc}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = TinyInstance::generate(5);
        let b = TinyInstance::generate(5);
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.entry, b.entry);
        assert_eq!(a.k, b.k);
    }
}
