use advobf::attack::{AttackConfig, DiscretizeMode, OptimizerKind};
use advobf::harness::{attack_corpus, evaluate_cell};
use advobf::minilang::{generate_corpus, standard_vocabulary, GenConfig, TransformSet};
use advobf::summarizer::train::{build_dataset, per_position_accuracy, train, ModelConfig, TrainParams};

fn main() {
    let all = generate_corpus(&GenConfig::new(600, 7));
    let train_slice = &all[..500];
    let entries = all.clone();
    let vocab = standard_vocabulary();
    let params = TrainParams { epochs: 600, batch: 16, lr: 0.5, seed: 42, augment_placeholders: 0.15 };
    let model = train(train_slice, &vocab, &TransformSet::full(), &ModelConfig::default(), &params).unwrap().model;
    let ds = build_dataset(train_slice, &vocab, &model.output_vocab, &TransformSet::full(), 3).unwrap();
    let ds_all = build_dataset(&entries, &vocab, &model.output_vocab, &TransformSet::full(), 3).unwrap();
    println!("train acc {:.4}, full-set acc {:.4}", per_position_accuracy(&model, &ds), per_position_accuracy(&model, &ds_all));

    let mut base = AttackConfig::new(OptimizerKind::Ao, 1, 7);
    base.restarts = 1;
    base.draws = 10;
    base.mode = DiscretizeMode::Randomized;
    base.alpha_u = 1.0;
    let methods = [
        OptimizerKind::RandomReplace,
        OptimizerKind::Baseline,
        OptimizerKind::Jo,
        OptimizerKind::JoRs,
        OptimizerKind::Ao,
        OptimizerKind::AoRs,
    ];
    let mut grid = std::collections::BTreeMap::new();
    for &method in &methods {
        for &k in &[1usize, 5] {
            let mut cfg = base.clone();
            cfg.optimizer = method;
            cfg.k = k;
            cfg.iters = method.default_iters();
            let t1 = std::time::Instant::now();
            let results = attack_corpus(&model, &entries, &cfg, 4).unwrap();
            let cell = evaluate_cell(method.name(), k, cfg.iters, &entries, &results);
            println!(
                "{:<9} k={} it={:>2}: ASR {:>6.2} F1 {:>6.2} FPR {:>7.4} wrong={} [{:.1?}]",
                method.name(), k, cfg.iters,
                cell.asr.unwrap_or(-1.0), cell.f1.unwrap_or(-1.0), cell.fpr.unwrap_or(-1.0),
                cell.counts.wrong_tokens, t1.elapsed()
            );
            grid.insert((method.name().to_string(), k), cell.asr.unwrap_or(-1.0));
        }
    }
    // jo at 3 iterations for the AO-vs-JO clause
    let mut cfg = base.clone();
    cfg.optimizer = OptimizerKind::Jo;
    cfg.k = 5;
    cfg.iters = 3;
    let results = attack_corpus(&model, &entries, &cfg, 4).unwrap();
    let cell = evaluate_cell("jo", 5, 3, &entries, &results);
    println!("jo@3 k=5: ASR {:.2}", cell.asr.unwrap_or(-1.0));
    let g = |m: &str, k: usize| grid[&(m.to_string(), k)];
    println!("--- criterion clauses ---");
    println!("random<=5 (k1): {} ({:.2})", g("random",1) <= 5.0, g("random",1));
    println!("random<=5 (k5): {} ({:.2})", g("random",5) <= 5.0, g("random",5));
    println!("ao>baseline k1: {} ({:.2} vs {:.2})", g("ao",1) > g("baseline",1), g("ao",1), g("baseline",1));
    println!("ao>baseline k5: {} ({:.2} vs {:.2})", g("ao",5) > g("baseline",5), g("ao",5), g("baseline",5));
    println!("ao_rs>=ao k1: {} | k5: {}", g("ao_rs",1) >= g("ao",1), g("ao_rs",5) >= g("ao",5));
    println!("jo_rs>=jo k1: {} | k5: {}", g("jo_rs",1) >= g("jo",1), g("jo_rs",5) >= g("jo",5));
    for m in ["random", "baseline", "jo", "jo_rs", "ao", "ao_rs"] {
        if g(m,5) < g(m,1) { println!("MONOTONE FAIL {m}: {:.2} -> {:.2}", g(m,1), g(m,5)); }
    }
    println!("ao@3(k5) >= jo@3(k5): {} ({:.2} vs {:.2})", g("ao",5) >= cell.asr.unwrap(), g("ao",5), cell.asr.unwrap());
}
