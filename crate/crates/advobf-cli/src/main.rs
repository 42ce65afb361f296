//! Batch front end: corpus generation, training, attacking, evaluation,
//! sweeps, and adversarial training as reproducible runs.
//!
//! Every run requires an explicit seed, logs its fully-resolved
//! configuration as the first line of the report it writes, and prints
//! progress (including wall-clock time) to stdout only, so report files
//! are byte-identical across reruns and `--jobs` settings.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use advobf::harness::{
    adversarial_train, attack_corpus, evaluate_cell, metric_notes, read_attack_report, sweep,
    write_attack_report, write_eval_report, AdvTrainParams, EvalCell, EvalReport, ReportHeader,
    SampleEval, SweepConfig,
};
use advobf::minilang::{
    generate_corpus, read_corpus, standard_vocabulary, write_corpus, Vocabulary,
};
use advobf::summarizer::{self, build_dataset, per_position_accuracy, train};

use config::{
    load_config, override_field, parse_families, parse_optimizer, AttackKnobs, GenRun, TrainKnobs,
};

#[derive(Parser)]
#[command(
    name = "advobf",
    version,
    about = "Adversarial obfuscation pipelines for MiniLang programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AttackFlags {
    /// Optimizer: random | jo | ao | jo_rs | ao_rs | baseline
    #[arg(long)]
    optimizer: Option<String>,
    /// Perturbation strength (max sites transformed)
    #[arg(long)]
    k: Option<usize>,
    /// Iterations (JO) or outer iterations (AO)
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    alpha_z: Option<f64>,
    #[arg(long)]
    alpha_u: Option<f64>,
    #[arg(long)]
    inner_z: Option<usize>,
    #[arg(long)]
    inner_u: Option<usize>,
    /// Smoothing radius for the RS optimizers
    #[arg(long)]
    mu_s: Option<f64>,
    /// Monte Carlo samples per smoothed evaluation
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Extend smoothing noise to the site-selection variables
    #[arg(long)]
    smooth_z: bool,
    /// Discretization: randomized | argmax
    #[arg(long)]
    mode: Option<String>,
    /// Randomized-discretization draws
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl AttackFlags {
    fn apply(&self, knobs: &mut AttackKnobs) {
        override_field!(knobs.optimizer, self.optimizer.clone());
        override_field!(knobs.k, self.k);
        if self.iters.is_some() {
            knobs.iters = self.iters;
        }
        override_field!(knobs.alpha_z, self.alpha_z);
        override_field!(knobs.alpha_u, self.alpha_u);
        override_field!(knobs.inner_z, self.inner_z);
        override_field!(knobs.inner_u, self.inner_u);
        override_field!(knobs.mu_s, self.mu_s);
        override_field!(knobs.mc_samples, self.mc_samples);
        if self.smooth_z {
            knobs.smooth_z = true;
        }
        override_field!(knobs.mode, self.mode.clone());
        override_field!(knobs.draws, self.draws);
        override_field!(knobs.restarts, self.restarts);
    }
}

#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Placeholder-noise probability during training
    #[arg(long)]
    augment_placeholders: Option<f64>,
    /// Max simulated benign insertions per training example
    #[arg(long)]
    augment_inserts: Option<usize>,
    /// Embedding width
    #[arg(long)]
    d: Option<usize>,
    /// Hidden width
    #[arg(long)]
    h: Option<usize>,
    /// Output positions
    #[arg(long)]
    l: Option<usize>,
}

impl TrainFlags {
    fn apply(&self, knobs: &mut TrainKnobs) {
        override_field!(knobs.epochs, self.epochs);
        override_field!(knobs.batch, self.batch);
        override_field!(knobs.lr, self.lr);
        override_field!(knobs.augment_placeholders, self.augment_placeholders);
        override_field!(knobs.augment_inserts, self.augment_inserts);
        override_field!(knobs.d, self.d);
        override_field!(knobs.h, self.h);
        override_field!(knobs.l, self.l);
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic program corpus (JSONL) and vocabulary.
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        /// Comma-separated family list
        #[arg(long)]
        families: Option<String>,
        /// Noun-label noise rate
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the shared vocabulary here
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Train the summarizer on a corpus and write a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        /// Vocabulary file (defaults to the built-in standard vocabulary)
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Attack every corpus program and write a JSONL report.
    Attack {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Attack only the first N programs
        #[arg(long)]
        limit: Option<usize>,
        /// Worker threads (results identical for any value)
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Compute ASR/F1/FPR from an attack report.
    Eval {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorial sweep over optimizers, strengths, and iteration counts.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated optimizer names
        #[arg(long)]
        optimizers: Option<String>,
        /// Comma-separated perturbation strengths
        #[arg(long, value_name = "K,K,...")]
        k: Option<String>,
        /// Comma-separated iteration counts ("auto" = per-optimizer default)
        #[arg(long)]
        iters: Option<String>,
        /// Exclude these transform kinds from the site maps
        #[arg(long)]
        exclude_transforms: Option<String>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        attack: AttackFlags,
    },
    /// Adversarial training: perturb a fraction of each minibatch.
    Advtrain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Fraction of each minibatch replaced adversarially
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        attack: AttackFlags,
    },
}

fn load_vocab(path: Option<&PathBuf>) -> Result<Vocabulary> {
    match path {
        Some(p) => Ok(Vocabulary::load(p)?),
        None => Ok(standard_vocabulary()),
    }
}

fn resolved_header<T: serde::Serialize>(command: &str, resolved: &T) -> ReportHeader {
    let mut config = serde_json::to_value(resolved).expect("config serializes");
    if let serde_json::Value::Object(map) = &mut config {
        map.insert(
            "command".to_string(),
            serde_json::Value::String(command.to_string()),
        );
    }
    ReportHeader::new(config)
}

fn cmd_gen(run: GenRun) -> Result<()> {
    let header = resolved_header("gen", &run);
    println!(
        "gen: config {} -> {}",
        header.config_sha256,
        serde_json::to_string(&header.config)?
    );
    let entries = generate_corpus(&run.to_gen_config());
    write_corpus(&run.out, &entries)?;
    println!("gen: wrote {} programs to {}", entries.len(), run.out.display());
    if let Some(vocab_path) = &run.vocab_out {
        standard_vocabulary().save(vocab_path)?;
        println!("gen: wrote vocabulary to {}", vocab_path.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct TrainResolved<'a> {
    corpus: &'a PathBuf,
    seed: u64,
    #[serde(flatten)]
    knobs: &'a TrainKnobs,
}

fn cmd_train(
    corpus: PathBuf,
    vocab: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    knobs: TrainKnobs,
) -> Result<()> {
    let start = Instant::now();
    let header = resolved_header(
        "train",
        &TrainResolved {
            corpus: &corpus,
            seed,
            knobs: &knobs,
        },
    );
    println!(
        "train: config {} -> {}",
        header.config_sha256,
        serde_json::to_string(&header.config)?
    );
    let entries = read_corpus(&corpus)?;
    let vocab = load_vocab(vocab.as_ref())?;
    let (params, model_config) = knobs.to_params(seed);
    let output = train(
        &entries,
        &vocab,
        &advobf::minilang::TransformSet::full(),
        &model_config,
        &params,
    )?;
    let dataset = build_dataset(
        &entries,
        &vocab,
        &output.model.output_vocab,
        &output.model.transforms,
        model_config.l,
    )?;
    let accuracy = per_position_accuracy(&output.model, &dataset);
    summarizer::save(&output.model, &out)?;
    println!(
        "train: {} programs, final loss {:.6}, per-position accuracy {:.4}, wall {:.1}s",
        entries.len(),
        output.loss_trace.last().copied().unwrap_or(f64::NAN),
        accuracy,
        start.elapsed().as_secs_f64()
    );
    println!("train: checkpoint written to {}", out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct AttackResolved<'a> {
    checkpoint: &'a PathBuf,
    corpus: &'a PathBuf,
    seed: u64,
    limit: Option<usize>,
    jobs: usize,
    #[serde(flatten)]
    knobs: &'a AttackKnobs,
}

fn cmd_attack(
    checkpoint: PathBuf,
    corpus: PathBuf,
    seed: u64,
    out: PathBuf,
    limit: Option<usize>,
    jobs: usize,
    knobs: AttackKnobs,
) -> Result<()> {
    let start = Instant::now();
    let header = resolved_header(
        "attack",
        &AttackResolved {
            checkpoint: &checkpoint,
            corpus: &corpus,
            seed,
            limit,
            jobs,
            knobs: &knobs,
        },
    );
    println!(
        "attack: config {} -> {}",
        header.config_sha256,
        serde_json::to_string(&header.config)?
    );
    let model = summarizer::load(&checkpoint)?;
    let mut entries = read_corpus(&corpus)?;
    if let Some(n) = limit {
        entries.truncate(n);
    }
    let attack_config = knobs.to_attack_config(seed)?;
    let results = attack_corpus(&model, &entries, &attack_config, jobs)?;
    write_attack_report(&out, &header, &results)?;
    let flipped = results
        .iter()
        .flat_map(|r| &r.token_success)
        .filter(|s| **s == Some(true))
        .count();
    println!(
        "attack: {} programs, {} originally-correct tokens flipped, wall {:.1}s",
        results.len(),
        flipped,
        start.elapsed().as_secs_f64()
    );
    println!("attack: report written to {}", out.display());
    Ok(())
}

fn cmd_eval(report: PathBuf, corpus: PathBuf, out: PathBuf) -> Result<()> {
    let (header, results) = read_attack_report(&report)?;
    let entries = read_corpus(&corpus)?;
    let by_id: std::collections::HashMap<u64, &advobf::minilang::CorpusEntry> =
        entries.iter().map(|e| (e.id, e)).collect();
    let mut matched = Vec::new();
    let mut samples = Vec::new();
    for r in &results {
        let entry = by_id
            .get(&r.id)
            .with_context(|| format!("program {} missing from corpus", r.id))?;
        samples.push(SampleEval::new(r.id, &entry.name_subtokens, r));
        matched.push((*entry).clone());
    }
    let (method, k, iters) = results
        .first()
        .map(|r| (r.optimizer.clone(), r.k, r.iters))
        .unwrap_or_default();
    let cell: EvalCell = evaluate_cell(&method, k, iters, &matched, &results);
    let eval = EvalReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: header.config_sha256.clone(),
        config: header.config.clone(),
        notes: metric_notes(),
        cells: vec![cell],
        monotonicity: vec![],
        wall_clock_secs: 0.0,
    };
    write_eval_report(&out, &eval)?;
    print!("{}", eval.text_table());
    println!("eval: report written to {}", out.display());
    let _ = samples;
    Ok(())
}

#[derive(serde::Serialize)]
struct SweepResolved<'a> {
    checkpoint: &'a PathBuf,
    corpus: &'a PathBuf,
    optimizers: &'a [String],
    ks: &'a [usize],
    iters: &'a str,
    exclude_transforms: &'a [String],
    seed: u64,
    jobs: usize,
    #[serde(flatten)]
    knobs: &'a AttackKnobs,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    checkpoint: PathBuf,
    corpus: PathBuf,
    optimizers: Vec<String>,
    ks: Vec<usize>,
    iters_spec: String,
    exclude: Vec<String>,
    seed: u64,
    out: PathBuf,
    jobs: usize,
    knobs: AttackKnobs,
) -> Result<()> {
    let start = Instant::now();
    let header = resolved_header(
        "sweep",
        &SweepResolved {
            checkpoint: &checkpoint,
            corpus: &corpus,
            optimizers: &optimizers,
            ks: &ks,
            iters: &iters_spec,
            exclude_transforms: &exclude,
            seed,
            jobs,
            knobs: &knobs,
        },
    );
    println!(
        "sweep: config {} -> {}",
        header.config_sha256,
        serde_json::to_string(&header.config)?
    );
    let mut model = summarizer::load(&checkpoint)?;
    if !exclude.is_empty() {
        let kinds: Vec<advobf::minilang::TransformKind> = exclude
            .iter()
            .map(|name| {
                advobf::minilang::TransformKind::from_name(name)
                    .with_context(|| format!("unknown transform {name:?}"))
            })
            .collect::<Result<_>>()?;
        model.transforms = advobf::minilang::TransformSet::excluding(&kinds);
    }
    let entries = read_corpus(&corpus)?;
    let methods = optimizers
        .iter()
        .map(|name| parse_optimizer(name))
        .collect::<Result<Vec<_>>>()?;
    let base = knobs.to_attack_config(seed)?;

    let mut report = if iters_spec == "auto" {
        // per-optimizer protocol defaults need one sweep call per method
        let mut cells = Vec::new();
        let mut monotonicity = Vec::new();
        for &method in &methods {
            let config = SweepConfig {
                methods: vec![method],
                ks: ks.clone(),
                iters: vec![method.default_iters()],
                base: base.clone(),
                jobs,
            };
            let partial = sweep(&model, &entries, &config)?;
            cells.extend(partial.cells);
            monotonicity.extend(partial.monotonicity);
        }
        EvalReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: String::new(),
            config: serde_json::Value::Null,
            notes: metric_notes(),
            cells,
            monotonicity,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        }
    } else {
        let iters: Vec<usize> = iters_spec
            .split(',')
            .map(|s| s.trim().parse().context("bad --iters"))
            .collect::<Result<_>>()?;
        let config = SweepConfig {
            methods,
            ks: ks.clone(),
            iters,
            base,
            jobs,
        };
        sweep(&model, &entries, &config)?
    };
    report.config_sha256 = header.config_sha256.clone();
    report.config = header.config.clone();
    write_eval_report(&out, &report)?;
    print!("{}", report.text_table());
    println!(
        "sweep: wall {:.1}s, report written to {}",
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct AdvtrainResolved<'a> {
    corpus: &'a PathBuf,
    fraction: f64,
    seed: u64,
    #[serde(flatten)]
    train: &'a TrainKnobs,
    #[serde(flatten)]
    attack: &'a AttackKnobs,
}

fn cmd_advtrain(
    corpus: PathBuf,
    vocab: Option<PathBuf>,
    fraction: f64,
    seed: u64,
    out: PathBuf,
    train_knobs: TrainKnobs,
    attack_knobs: AttackKnobs,
) -> Result<()> {
    let start = Instant::now();
    let header = resolved_header(
        "advtrain",
        &AdvtrainResolved {
            corpus: &corpus,
            fraction,
            seed,
            train: &train_knobs,
            attack: &attack_knobs,
        },
    );
    println!(
        "advtrain: config {} -> {}",
        header.config_sha256,
        serde_json::to_string(&header.config)?
    );
    let entries = read_corpus(&corpus)?;
    let vocab = load_vocab(vocab.as_ref())?;
    let (train_params, model_config) = train_knobs.to_params(seed);
    let attack_config = attack_knobs.to_attack_config(seed)?;
    let output = adversarial_train(
        &entries,
        &vocab,
        &advobf::minilang::TransformSet::full(),
        &model_config,
        &AdvTrainParams {
            fraction,
            attack: attack_config,
            train: train_params,
        },
    )?;
    summarizer::save(&output.model, &out)?;
    println!(
        "advtrain: {} epochs, {} adversarial examples, {} attack failures, wall {:.1}s",
        output.report.epochs,
        output.report.perturbed_examples,
        output.report.attack_failures,
        start.elapsed().as_secs_f64()
    );
    println!("advtrain: checkpoint written to {}", out.display());
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            config,
            count,
            families,
            noise,
            seed,
            out,
            vocab_out,
        } => {
            let mut run: GenRun = load_config(config.as_deref())?;
            override_field!(run.count, count);
            if let Some(f) = families {
                run.families = parse_families(&f)?;
            }
            override_field!(run.noise, noise);
            override_field!(run.seed, seed);
            override_field!(run.out, out);
            if vocab_out.is_some() {
                run.vocab_out = vocab_out;
            }
            cmd_gen(run)
        }
        Command::Train {
            config,
            corpus,
            vocab,
            seed,
            out,
            train,
        } => {
            let mut knobs: TrainKnobs = load_config(config.as_deref())?;
            train.apply(&mut knobs);
            cmd_train(corpus, vocab, seed, out, knobs)
        }
        Command::Attack {
            config,
            checkpoint,
            corpus,
            seed,
            out,
            limit,
            jobs,
            attack,
        } => {
            let mut knobs: AttackKnobs = load_config(config.as_deref())?;
            attack.apply(&mut knobs);
            cmd_attack(checkpoint, corpus, seed, out, limit, jobs, knobs)
        }
        Command::Eval {
            report,
            corpus,
            out,
        } => cmd_eval(report, corpus, out),
        Command::Sweep {
            config,
            checkpoint,
            corpus,
            optimizers,
            k,
            iters,
            exclude_transforms,
            seed,
            out,
            jobs,
            attack,
        } => {
            let mut knobs: AttackKnobs = load_config(config.as_deref())?;
            attack.apply(&mut knobs);
            let optimizers: Vec<String> = optimizers
                .unwrap_or_else(|| "random,baseline,jo,jo_rs,ao,ao_rs".to_string())
                .split(',')
                .map(|s| s.trim().to_string())
                .collect();
            let ks: Vec<usize> = k
                .unwrap_or_else(|| "1,5".to_string())
                .split(',')
                .map(|s| s.trim().parse().context("bad --k"))
                .collect::<Result<_>>()?;
            let iters = iters.unwrap_or_else(|| "auto".to_string());
            let exclude: Vec<String> = exclude_transforms
                .map(|s| s.split(',').map(|t| t.trim().to_string()).collect())
                .unwrap_or_default();
            cmd_sweep(
                checkpoint, corpus, optimizers, ks, iters, exclude, seed, out, jobs, knobs,
            )
        }
        Command::Advtrain {
            config,
            corpus,
            vocab,
            fraction,
            seed,
            out,
            train,
            attack,
        } => {
            let mut train_knobs: TrainKnobs = load_config(config.as_deref())?;
            train.apply(&mut train_knobs);
            let mut attack_knobs = AttackKnobs::default();
            attack.apply(&mut attack_knobs);
            cmd_advtrain(
                corpus,
                vocab,
                fraction.unwrap_or(0.5),
                seed,
                out,
                train_knobs,
                attack_knobs,
            )
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
