//! Factorial evaluation sweeps over optimizers, perturbation strengths,
//! and iteration counts, plus transformation ablations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack, AttackConfig, AttackError, AttackResult, OptimizerKind};
use crate::minilang::{CorpusEntry, TransformKind, TransformSet};
use crate::summarizer::SummarizerModel;

use super::metrics::{asr, counts, f1, fpr, MetricCounts, SampleEval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub method: String,
    pub k: usize,
    pub iters: usize,
    /// Percent; None when the correct subset is empty.
    pub asr: Option<f64>,
    pub f1: Option<f64>,
    /// Fraction; None when no originally-wrong tokens exist.
    pub fpr: Option<f64>,
    pub counts: MetricCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneDiag {
    pub method: String,
    pub iters: usize,
    pub ks: Vec<usize>,
    pub asrs: Vec<Option<f64>>,
    /// ASR non-decreasing in k (ignoring undefined cells).
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    /// Metric definitions and caveats, echoed into every report.
    pub notes: Vec<String>,
    pub cells: Vec<EvalCell>,
    pub monotonicity: Vec<MonotoneDiag>,
    /// Printed to the console only; never serialized, so reports stay
    /// byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub fn metric_notes() -> Vec<String> {
    vec![
        "ASR/F1 computed on the fully-correctly-classified subset only".to_string(),
        "F1 is micro-averaged over output tokens with PAD excluded as a class".to_string(),
        "FPR is the fraction of originally-wrong real tokens the attack turned correct"
            .to_string(),
    ]
}

impl EvalReport {
    /// Aligned plain-text rendering of the cells.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "tool {} config {}\n",
            self.tool_version, self.config_sha256
        ));
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        let fmt_pct = |v: Option<f64>| match v {
            Some(x) => format!("{x:7.2}"),
            None => "      -".to_string(),
        };
        let fmt_frac = |v: Option<f64>| match v {
            Some(x) => format!("{x:7.4}"),
            None => "      -".to_string(),
        };
        out.push_str(&format!(
            "{:<10} {:>3} {:>5} {:>7} {:>7} {:>7} {:>8} {:>8}\n",
            "method", "k", "iters", "ASR%", "F1%", "FPR", "samples", "correct"
        ));
        for c in &self.cells {
            out.push_str(&format!(
                "{:<10} {:>3} {:>5} {} {} {} {:>8} {:>8}\n",
                c.method,
                c.k,
                c.iters,
                fmt_pct(c.asr),
                fmt_pct(c.f1),
                fmt_frac(c.fpr),
                c.counts.samples,
                c.counts.correct_samples,
            ));
        }
        for diag in &self.monotonicity {
            out.push_str(&format!(
                "# ASR vs k for {} (iters {}): {} -> {}\n",
                diag.method,
                diag.iters,
                diag.ks
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                if diag.monotone {
                    "non-decreasing"
                } else {
                    "NOT monotone"
                }
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub methods: Vec<OptimizerKind>,
    pub ks: Vec<usize>,
    pub iters: Vec<usize>,
    /// Template for every attack: optimizer, k, and iters are overridden
    /// per cell.
    pub base: AttackConfig,
    /// Worker threads for per-program attacks (1 = serial).
    pub jobs: usize,
}

/// Attack every corpus entry under `config`, in a deterministic order
/// regardless of `jobs`.
pub fn attack_corpus(
    model: &SummarizerModel,
    corpus: &[CorpusEntry],
    config: &AttackConfig,
    jobs: usize,
) -> Result<Vec<AttackResult>, AttackError> {
    if jobs <= 1 {
        corpus.iter().map(|e| attack(model, e, config)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| {
            corpus
                .par_iter()
                .map(|e| attack(model, e, config))
                .collect()
        })
    }
}

/// Reduce attack results to one evaluation cell.
pub fn evaluate_cell(
    method: &str,
    k: usize,
    iters: usize,
    corpus: &[CorpusEntry],
    results: &[AttackResult],
) -> EvalCell {
    let samples: Vec<SampleEval> = corpus
        .iter()
        .zip(results)
        .map(|(e, r)| SampleEval::new(e.id, &e.name_subtokens, r))
        .collect();
    let subset: Vec<SampleEval> = samples
        .iter()
        .filter(|s| s.fully_correct())
        .cloned()
        .collect();
    EvalCell {
        method: method.to_string(),
        k,
        iters,
        asr: asr(&subset).ok(),
        f1: f1(&subset).ok(),
        fpr: fpr(&samples).ok(),
        counts: counts(&samples),
    }
}

/// Full factorial sweep: every method x k x iteration count.
pub fn sweep(
    model: &SummarizerModel,
    corpus: &[CorpusEntry],
    config: &SweepConfig,
) -> Result<EvalReport, AttackError> {
    let start = std::time::Instant::now();
    let mut cells = Vec::new();
    for &method in &config.methods {
        for &iters in &config.iters {
            for &k in &config.ks {
                let mut attack_config = config.base.clone();
                attack_config.optimizer = method;
                attack_config.k = k;
                attack_config.iters = iters;
                let results = attack_corpus(model, corpus, &attack_config, config.jobs)?;
                cells.push(evaluate_cell(method.name(), k, iters, corpus, &results));
            }
        }
    }
    let mut monotonicity = Vec::new();
    for &method in &config.methods {
        for &iters in &config.iters {
            let ks = config.ks.clone();
            let asrs: Vec<Option<f64>> = ks
                .iter()
                .map(|&k| {
                    cells
                        .iter()
                        .find(|c| c.method == method.name() && c.k == k && c.iters == iters)
                        .and_then(|c| c.asr)
                })
                .collect();
            let defined: Vec<f64> = asrs.iter().flatten().copied().collect();
            let monotone = defined.windows(2).all(|w| w[1] >= w[0] - 1e-9);
            monotonicity.push(MonotoneDiag {
                method: method.name().to_string(),
                iters,
                ks,
                asrs,
                monotone,
            });
        }
    }
    Ok(EvalReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: String::new(),
        config: serde_json::Value::Null,
        notes: metric_notes(),
        cells,
        monotonicity,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// The sweep pipeline with sites of `excluded` kinds removed from every
/// site map. The model's input padding is untouched, so encodings stay in
/// the distribution it was trained on.
pub fn ablate_transforms(
    model: &SummarizerModel,
    corpus: &[CorpusEntry],
    excluded: &[TransformKind],
    config: &SweepConfig,
) -> Result<EvalReport, AttackError> {
    let mut ablated = model.clone();
    ablated.transforms = TransformSet::excluding(excluded);
    sweep(&ablated, corpus, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{generate_corpus, standard_vocabulary, GenConfig};
    use crate::summarizer::train::{train, ModelConfig, TrainParams};

    fn pipeline() -> (SummarizerModel, Vec<CorpusEntry>) {
        let entries = generate_corpus(&GenConfig::new(30, 3));
        let model = train(
            &entries,
            &standard_vocabulary(),
            &TransformSet::full(),
            &ModelConfig { d: 12, h: 16, l: 3 },
            &TrainParams {
                epochs: 150,
                batch: 8,
                lr: 0.5,
                seed: 5,
                augment_placeholders: 0.15,
                augment_inserts: 2,
            },
        )
        .unwrap()
        .model;
        (model, entries)
    }

    fn sweep_config(methods: Vec<OptimizerKind>, ks: Vec<usize>) -> SweepConfig {
        let mut base = AttackConfig::new(OptimizerKind::Ao, 1, 7);
        base.restarts = 1;
        base.draws = 4;
        base.mc_samples = 3;
        SweepConfig {
            methods,
            ks,
            iters: vec![3],
            base,
            jobs: 1,
        }
    }

    #[test]
    fn single_cell_matches_direct_attacks() {
        let (model, entries) = pipeline();
        let corpus = &entries[..10];
        let config = sweep_config(vec![OptimizerKind::Ao], vec![1]);
        let report = sweep(&model, corpus, &config).unwrap();
        assert_eq!(report.cells.len(), 1);
        let mut direct = config.base.clone();
        direct.optimizer = OptimizerKind::Ao;
        direct.k = 1;
        direct.iters = 3;
        let results = attack_corpus(&model, corpus, &direct, 1).unwrap();
        let cell = evaluate_cell("ao", 1, 3, corpus, &results);
        assert_eq!(report.cells[0], cell);
    }

    #[test]
    fn parallel_attacks_match_serial() {
        let (model, entries) = pipeline();
        let corpus = &entries[..8];
        let config = AttackConfig::new(OptimizerKind::AoRs, 2, 9);
        let serial = attack_corpus(&model, corpus, &config, 1).unwrap();
        let parallel = attack_corpus(&model, corpus, &config, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn excluding_every_transform_yields_zero_asr() {
        let (model, entries) = pipeline();
        let corpus = &entries[..10];
        let config = sweep_config(vec![OptimizerKind::RandomReplace], vec![1]);
        let report =
            ablate_transforms(&model, corpus, &TransformKind::ALL, &config).unwrap();
        let cell = &report.cells[0];
        if let Some(asr) = cell.asr {
            assert_eq!(asr, 0.0);
        }
        assert_eq!(cell.counts.flipped_positions, 0);
    }

    #[test]
    fn text_table_renders_every_cell() {
        let (model, entries) = pipeline();
        let corpus = &entries[..6];
        let config = sweep_config(vec![OptimizerKind::RandomReplace], vec![1, 2]);
        let report = sweep(&model, corpus, &config).unwrap();
        let table = report.text_table();
        assert!(table.contains("random"));
        assert!(table.contains("ASR%"));
        assert_eq!(report.monotonicity.len(), 1);
    }
}
