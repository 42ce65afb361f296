//! The end-to-end attack on one program: relax, optimize, discretize,
//! materialize, re-predict.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{
    encode_with_sites, materialize, parse_source, unparse, CorpusEntry, Function,
    IllegalSelection, Selection, SourceError, TransformKind,
};
use crate::rng::{program_rng, tags};
use crate::summarizer::{ModelError, SummarizerModel};

use super::discretize::{discretize, DiscretizeMode, MaskExhausted};
use super::objective::{AttackObjective, ModelObjective, SmoothedObjective};
use super::optimizer::{run_ao, run_jo, run_u_only, PgdParams, PgdRun};
use super::projection::project_z;
use super::relaxed::RelaxedProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Joint PGD over (z, u).
    Jo,
    /// Alternating optimization.
    Ao,
    /// JO under randomized smoothing.
    JoRs,
    /// AO under randomized smoothing.
    AoRs,
    /// Uniformly random sites and tokens, no optimization.
    RandomReplace,
    /// Random site selection, PGD-optimized tokens (the prior art's
    /// protocol).
    Baseline,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Jo,
        OptimizerKind::Ao,
        OptimizerKind::JoRs,
        OptimizerKind::AoRs,
        OptimizerKind::RandomReplace,
        OptimizerKind::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Jo => "jo",
            OptimizerKind::Ao => "ao",
            OptimizerKind::JoRs => "jo_rs",
            OptimizerKind::AoRs => "ao_rs",
            OptimizerKind::RandomReplace => "random",
            OptimizerKind::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        OptimizerKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    pub fn smoothed(self) -> bool {
        matches!(self, OptimizerKind::JoRs | OptimizerKind::AoRs)
    }

    /// Protocol defaults: AO converges in 3 outer iterations, JO takes 10.
    pub fn default_iters(self) -> usize {
        match self {
            OptimizerKind::Jo | OptimizerKind::JoRs => 10,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub optimizer: OptimizerKind,
    /// Perturbation strength: at most k sites transformed.
    pub k: usize,
    /// JO iterations, or AO outer iterations.
    pub iters: usize,
    pub alpha_z: f64,
    pub alpha_u: f64,
    pub inner_z: usize,
    pub inner_u: usize,
    /// Smoothing radius (RS optimizers).
    pub mu_s: f64,
    /// Monte Carlo samples per smoothed evaluation.
    pub mc_samples: usize,
    /// Extend smoothing noise to z as well.
    pub smooth_z: bool,
    pub mode: DiscretizeMode,
    /// Randomized-discretization draws.
    pub draws: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(optimizer: OptimizerKind, k: usize, seed: u64) -> Self {
        AttackConfig {
            optimizer,
            k,
            iters: optimizer.default_iters(),
            alpha_z: 0.5,
            alpha_u: 0.5,
            inner_z: 10,
            inner_u: 10,
            mu_s: 0.01,
            mc_samples: 10,
            smooth_z: false,
            mode: DiscretizeMode::Randomized,
            draws: 10,
            restarts: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.k < 1 {
            return Err(AttackError::BadConfig("k must be >= 1".into()));
        }
        if self.iters < 1 {
            return Err(AttackError::BadConfig("iters must be >= 1".into()));
        }
        if self.optimizer.smoothed() && self.mu_s <= 0.0 {
            return Err(AttackError::BadConfig(
                "mu_s must be positive when smoothing".into(),
            ));
        }
        if self.mc_samples < 1 {
            return Err(AttackError::BadConfig("mc_samples must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    BadConfig(String),
    #[error("program does not parse: {0}")]
    Source(#[from] SourceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Selection(#[from] IllegalSelection),
    #[error(transparent)]
    MaskExhausted(#[from] MaskExhausted),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionItem {
    pub site: usize,
    pub kind: String,
    pub token: String,
}

/// Per-program attack record. The serialized fields are exactly the
/// report schema; diagnostics are kept in memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub id: u64,
    pub optimizer: String,
    pub k: usize,
    pub iters: usize,
    pub loss_trace: Vec<f64>,
    pub selection: Vec<SelectionItem>,
    pub orig_pred: Vec<String>,
    pub pert_pred: Vec<String>,
    /// Per output token: Some(flipped) where the model was originally
    /// correct (PAD targets excluded), None elsewhere.
    pub token_success: Vec<Option<bool>>,
    pub perturbed_source: String,
    pub seed: u64,
    /// No transformable sites: the program could not be attacked.
    #[serde(skip)]
    pub unattackable: bool,
    /// Relaxed loss after optimization.
    #[serde(skip)]
    pub relaxed_loss: f64,
    /// True attack loss of the materialized program.
    #[serde(skip)]
    pub discrete_loss: f64,
    /// Target ids the attack ran against.
    #[serde(skip)]
    pub target: Vec<usize>,
    #[serde(skip)]
    pub orig_ids: Vec<usize>,
    #[serde(skip)]
    pub pert_ids: Vec<usize>,
}

/// True attack loss of a discrete selection: materialize, re-encode under
/// the model's convention, evaluate.
fn discrete_attack_loss(
    model: &SummarizerModel,
    relaxed: &RelaxedProgram,
    func: &Function,
    selection: &Selection,
    target: &[usize],
) -> Result<(f64, String, Vec<usize>), AttackError> {
    let source = materialize(func, &relaxed.enc.sitemap, selection, &model.vocab)?;
    let perturbed = parse_source(&source)?;
    let enc = encode_with_sites(&perturbed, &model.vocab, &model.transforms);
    let loss = -SummarizerModel::loss(&model.forward_tokens(&enc.token_ids), target);
    let pert_ids = model.predict_ids(&enc.token_ids);
    Ok((loss, source, pert_ids))
}

fn random_feasible_init(relaxed: &mut RelaxedProgram, rng: &mut ChaCha8Rng) {
    for z in &mut relaxed.site_z {
        *z = rng.gen::<f64>();
    }
    relaxed.site_z = project_z(&relaxed.site_z, relaxed.k as f64);
    let sites = relaxed.enc.sitemap.sites.clone();
    for (s, site) in sites.iter().enumerate() {
        let row = &mut relaxed.site_u[s];
        row.iter_mut().for_each(|x| *x = 0.0);
        let mut total = 0.0;
        for &j in &site.candidates {
            let w = rng.gen::<f64>();
            row[j] = w;
            total += w;
        }
        for &j in &site.candidates {
            row[j] /= total;
        }
    }
}

/// Start from the linearized-best corner: gradients at the canonical
/// start pick the k most promising sites and each site's best-aligned
/// token. One first-order token flip is often already a strong attack,
/// and the best-iterate tracking keeps it if PGD then wanders off.
fn greedy_corner_init(
    model: &SummarizerModel,
    relaxed: &mut RelaxedProgram,
    target: &[usize],
) {
    let mut obj = ModelObjective::new(model, relaxed, target);
    let (_, gz, gu) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
    let s = relaxed.num_sites();
    let mut order: Vec<usize> = (0..s).collect();
    // descent decreases the loss fastest where the gradient is most
    // negative
    order.sort_by(|&a, &b| gz[a].partial_cmp(&gz[b]).expect("finite gradient"));
    order.truncate(relaxed.k.min(s));
    for z in &mut relaxed.site_z {
        *z = 0.0;
    }
    for &site in &order {
        relaxed.site_z[site] = 1.0;
    }
    let sites = relaxed.enc.sitemap.sites.clone();
    for (site_id, site) in sites.iter().enumerate() {
        let row = &mut relaxed.site_u[site_id];
        row.iter_mut().for_each(|x| *x = 0.0);
        let best = site
            .candidates
            .iter()
            .copied()
            .min_by(|&a, &b| gu[site_id][a].partial_cmp(&gu[site_id][b]).expect("finite"))
            .expect("non-empty mask");
        row[best] = 1.0;
    }
}

/// Start from a random discrete corner: z one-hot on a random site set of
/// size min(k, S), u rows one-hot on random candidates. The best-iterate
/// tracking inside the optimizers scores the corner itself before any
/// step moves off it.
fn random_corner_init(relaxed: &mut RelaxedProgram, rng: &mut ChaCha8Rng) {
    let s = relaxed.num_sites();
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(rng);
    let chosen = relaxed.k.min(s);
    for z in &mut relaxed.site_z {
        *z = 0.0;
    }
    for &site in order.iter().take(chosen) {
        relaxed.site_z[site] = 1.0;
    }
    let sites = relaxed.enc.sitemap.sites.clone();
    for (site_id, site) in sites.iter().enumerate() {
        let row = &mut relaxed.site_u[site_id];
        row.iter_mut().for_each(|x| *x = 0.0);
        let pick = site.candidates[rng.gen_range(0..site.candidates.len())];
        row[pick] = 1.0;
    }
}

/// Uniformly random selection honouring the budget and rename
/// distinctness.
fn random_selection(
    relaxed: &RelaxedProgram,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Selection, MaskExhausted> {
    let s = relaxed.num_sites();
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(rng);
    order.truncate(k.min(s));
    order.sort_unstable();
    let mut used: Vec<usize> = Vec::new();
    let mut selection = Vec::with_capacity(order.len());
    for &site_id in &order {
        let site = &relaxed.enc.sitemap.sites[site_id];
        let rename = matches!(
            site.kind,
            TransformKind::RenameLocalVar | TransformKind::RenameParam | TransformKind::RenameField
        );
        let allowed: Vec<usize> = if rename {
            site.candidates
                .iter()
                .copied()
                .filter(|t| !used.contains(t))
                .collect()
        } else {
            site.candidates.clone()
        };
        if allowed.is_empty() {
            return Err(MaskExhausted { site: site_id });
        }
        let tok = allowed[rng.gen_range(0..allowed.len())];
        if rename {
            used.push(tok);
        }
        selection.push((site_id, tok));
    }
    Ok(selection)
}

fn run_optimizer(
    model: &SummarizerModel,
    relaxed: &mut RelaxedProgram,
    target: &[usize],
    config: &AttackConfig,
    smoothing_rng: ChaCha8Rng,
) -> PgdRun {
    let params = PgdParams {
        alpha_z: config.alpha_z,
        alpha_u: config.alpha_u,
        inner_z: config.inner_z,
        inner_u: config.inner_u,
    };
    let base = ModelObjective::new(model, relaxed, target);
    if config.optimizer.smoothed() {
        let mut obj = SmoothedObjective::new(
            base,
            relaxed,
            config.mu_s,
            config.mc_samples,
            config.smooth_z,
            smoothing_rng,
        );
        match config.optimizer {
            OptimizerKind::JoRs => run_jo(relaxed, &mut obj, config.iters, &params),
            OptimizerKind::AoRs => run_ao(relaxed, &mut obj, config.iters, &params),
            _ => unreachable!("smoothed() covers exactly the RS kinds"),
        }
    } else {
        let mut obj = base;
        match config.optimizer {
            OptimizerKind::Jo => run_jo(relaxed, &mut obj, config.iters, &params),
            OptimizerKind::Ao => run_ao(relaxed, &mut obj, config.iters, &params),
            OptimizerKind::Baseline => {
                run_u_only(relaxed, &mut obj, config.iters, config.inner_u, config.alpha_u)
            }
            _ => unreachable!("random replace never reaches the optimizer"),
        }
    }
}

/// Attack one corpus entry. A program without transformable sites comes
/// back flagged unattackable rather than as an error.
pub fn attack(
    model: &SummarizerModel,
    entry: &CorpusEntry,
    config: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    config.validate()?;
    let func = parse_source(&entry.source)?;
    let enc = encode_with_sites(&func, &model.vocab, &model.transforms);
    let target = model
        .output_vocab
        .encode_name(&entry.name_subtokens, model.arch.l)?;
    let orig_ids = model.predict_ids(&enc.token_ids);
    let clean_loss = -SummarizerModel::loss(&model.forward_tokens(&enc.token_ids), &target);

    let relaxed0 = match RelaxedProgram::relax(enc, config.k, model.vocab.len()) {
        Ok(r) => r,
        Err(_) => {
            return Ok(build_result(
                model,
                entry,
                config,
                &target,
                &orig_ids,
                Vec::new(),
                vec![clean_loss; config.iters],
                clean_loss,
                clean_loss,
                unparse(&func),
                orig_ids.clone(),
                None,
                true,
            ));
        }
    };

    // 1. obtain a selection plus its optimizer trace
    let (selection, trace, relaxed_loss) = match config.optimizer {
        OptimizerKind::RandomReplace => {
            let mut rng = program_rng(config.seed, entry.id, tags::ATTACK);
            let selection = random_selection(&relaxed0, config.k, &mut rng)?;
            let (loss, _, _) =
                discrete_attack_loss(model, &relaxed0, &func, &selection, &target)?;
            (selection, vec![loss; config.iters], clean_loss)
        }
        OptimizerKind::Baseline => {
            let mut rng = program_rng(config.seed, entry.id, tags::ATTACK);
            let mut relaxed = relaxed0.clone();
            let s = relaxed.num_sites();
            let mut order: Vec<usize> = (0..s).collect();
            order.shuffle(&mut rng);
            let chosen: Vec<usize> = order.into_iter().take(config.k.min(s)).collect();
            for z in &mut relaxed.site_z {
                *z = 0.0;
            }
            for &c in &chosen {
                relaxed.site_z[c] = 1.0;
            }
            let run = run_optimizer(model, &mut relaxed, &target, config, rng);
            let selection = discretize_state(model, &relaxed, &func, &target, config, entry.id)?;
            (selection, run.trace, run.final_loss)
        }
        _ => {
            let mut best: Option<(PgdRun, RelaxedProgram)> = None;
            for restart in 0..config.restarts.max(1) {
                let mut relaxed = relaxed0.clone();
                if restart > 0 {
                    let mut rng = program_rng(
                        config.seed,
                        entry.id,
                        tags::RESTART.wrapping_add((restart as u64) << 8),
                    );
                    // restart 1: linearized-best corner; restart 2: random
                    // interior; corners otherwise. Interior starts mostly
                    // flow into one wide basin, corner starts cover the
                    // discrete candidates.
                    match restart {
                        1 => greedy_corner_init(model, &mut relaxed, &target),
                        2 => random_feasible_init(&mut relaxed, &mut rng),
                        _ => random_corner_init(&mut relaxed, &mut rng),
                    }
                }
                let smoothing_rng = program_rng(
                    config.seed,
                    entry.id,
                    tags::SMOOTHING.wrapping_add((restart as u64) << 8),
                );
                let run = run_optimizer(model, &mut relaxed, &target, config, smoothing_rng);
                let better = match &best {
                    Some((b, _)) => run.final_loss < b.final_loss,
                    None => true,
                };
                if better {
                    best = Some((run, relaxed));
                }
            }
            let (run, relaxed) = best.expect("at least one restart");
            let selection = discretize_state(model, &relaxed, &func, &target, config, entry.id)?;
            (selection, run.trace, run.final_loss)
        }
    };

    // 2. materialize the winner and re-predict
    let (discrete_loss, source, pert_ids) =
        discrete_attack_loss(model, &relaxed0, &func, &selection, &target)?;
    Ok(build_result(
        model,
        entry,
        config,
        &target,
        &orig_ids,
        selection,
        trace,
        relaxed_loss,
        discrete_loss,
        source,
        pert_ids,
        Some(&relaxed0),
        false,
    ))
}

fn discretize_state(
    model: &SummarizerModel,
    relaxed: &RelaxedProgram,
    func: &Function,
    target: &[usize],
    config: &AttackConfig,
    program_id: u64,
) -> Result<Selection, AttackError> {
    let mut rng = program_rng(config.seed, program_id, tags::DISCRETIZE);
    let selection = discretize(
        relaxed,
        config.k,
        config.mode,
        config.draws,
        &mut rng,
        |sel| {
            discrete_attack_loss(model, relaxed, func, sel, target)
                .map(|(loss, _, _)| loss)
                .unwrap_or(f64::INFINITY)
        },
    )?;
    Ok(selection)
}

#[allow(clippy::too_many_arguments)]
fn build_result(
    model: &SummarizerModel,
    entry: &CorpusEntry,
    config: &AttackConfig,
    target: &[usize],
    orig_ids: &[usize],
    selection: Selection,
    loss_trace: Vec<f64>,
    relaxed_loss: f64,
    discrete_loss: f64,
    perturbed_source: String,
    pert_ids: Vec<usize>,
    relaxed: Option<&RelaxedProgram>,
    unattackable: bool,
) -> AttackResult {
    let pad = model.output_vocab.pad_id();
    let token_success = target
        .iter()
        .enumerate()
        .map(|(l, &t)| {
            if t != pad && orig_ids[l] == t {
                Some(pert_ids[l] != t)
            } else {
                None
            }
        })
        .collect();
    AttackResult {
        id: entry.id,
        optimizer: config.optimizer.name().to_string(),
        k: config.k,
        iters: config.iters,
        loss_trace,
        selection: selection
            .iter()
            .map(|&(site, tok)| SelectionItem {
                site,
                kind: relaxed
                    .map(|r| r.enc.sitemap.sites[site].kind.name().to_string())
                    .unwrap_or_default(),
                token: model.vocab.token(tok).to_string(),
            })
            .collect(),
        orig_pred: model.decode(orig_ids),
        pert_pred: model.decode(&pert_ids),
        token_success,
        perturbed_source,
        seed: config.seed,
        unattackable,
        relaxed_loss,
        discrete_loss,
        target: target.to_vec(),
        orig_ids: orig_ids.to_vec(),
        pert_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{generate_corpus, standard_vocabulary, GenConfig, TransformSet};
    use crate::summarizer::train::{train, ModelConfig, TrainParams};

    fn pipeline() -> (SummarizerModel, Vec<CorpusEntry>) {
        let entries = generate_corpus(&GenConfig::new(40, 3));
        let model = train(
            &entries,
            &standard_vocabulary(),
            &TransformSet::full(),
            &ModelConfig { d: 12, h: 16, l: 3 },
            &TrainParams {
                epochs: 120,
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

    #[test]
    fn trace_length_matches_config() {
        let (model, entries) = pipeline();
        for kind in OptimizerKind::ALL {
            let mut config = AttackConfig::new(kind, 2, 7);
            config.iters = 4;
            config.restarts = 2;
            config.mc_samples = 2;
            let res = attack(&model, &entries[0], &config).unwrap();
            assert_eq!(res.loss_trace.len(), 4, "{kind:?}");
            assert_eq!(res.optimizer, kind.name());
        }
    }

    #[test]
    fn attack_is_deterministic() {
        let (model, entries) = pipeline();
        let mut config = AttackConfig::new(OptimizerKind::AoRs, 2, 11);
        config.restarts = 2;
        config.mc_samples = 3;
        let a = attack(&model, &entries[1], &config).unwrap();
        let b = attack(&model, &entries[1], &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn perturbed_program_parses_and_respects_budget() {
        let (model, entries) = pipeline();
        let config = AttackConfig::new(OptimizerKind::Ao, 2, 3);
        for entry in entries.iter().take(10) {
            let res = attack(&model, entry, &config).unwrap();
            assert!(res.selection.len() <= 2);
            parse_source(&res.perturbed_source).unwrap();
        }
    }

    #[test]
    fn unattackable_program_is_flagged() {
        let (model, entries) = pipeline();
        let entry = CorpusEntry {
            id: 999,
            source: "def f():\n    return 1 + 2\n".to_string(),
            // reuse a name the model's output vocabulary is known to hold
            name_subtokens: entries[0].name_subtokens.clone(),
        };
        // replace-only model convention would have no sites here; with the
        // full set, insert sites exist, so force a replace-only view
        let mut model2 = model.clone();
        model2.transforms = TransformSet::replace_only();
        let res = attack(&model2, &entry, &AttackConfig::new(OptimizerKind::Jo, 1, 1)).unwrap();
        assert!(res.unattackable);
        assert!(res.selection.is_empty());
        assert_eq!(res.orig_pred, res.pert_pred);
    }

    #[test]
    fn random_replace_needs_no_gradients() {
        let (model, entries) = pipeline();
        let config = AttackConfig::new(OptimizerKind::RandomReplace, 3, 5);
        let res = attack(&model, &entries[2], &config).unwrap();
        assert!(res.selection.len() <= 3);
        assert!(!res.selection.is_empty());
        parse_source(&res.perturbed_source).unwrap();
    }
}
