use advobf::attack::{attack, AttackConfig, OptimizerKind};
use advobf::harness::SampleEval;
use advobf::minilang::{generate_corpus, standard_vocabulary, GenConfig, TransformSet};
use advobf::summarizer::train::{build_dataset, per_position_accuracy, train, ModelConfig, TrainParams};

fn main() {
    let vocab = standard_vocabulary();
    for &(noise, epochs, aug, ins) in &[(0.05f64, 900usize, 0.3f64, 4usize), (0.05, 900, 0.5, 4), (0.05, 1200, 0.5, 5)] {
        let mut gc = GenConfig::new(600, 7);
        gc.noise = noise;
        let all = generate_corpus(&gc);
        let params = TrainParams { epochs, batch: 16, lr: 0.5, seed: 42, augment_placeholders: aug, augment_inserts: ins };
        let model = train(&all[..500], &vocab, &TransformSet::full(), &ModelConfig::default(), &params).unwrap().model;
        let ds = build_dataset(&all, &vocab, &model.output_vocab, &TransformSet::full(), 3).unwrap();
        let acc = per_position_accuracy(&model, &ds);
        // random k=5 ASR + ao k=5 quick check on 300 entries
        let mut subset = 0usize; let mut flips = 0usize; let mut wrong = 0usize;
        let cfg = AttackConfig::new(OptimizerKind::RandomReplace, 5, 7);
        for e in all.iter() {
            let res = attack(&model, e, &cfg).unwrap();
            let se = SampleEval::new(e.id, &e.name_subtokens, &res);
            for l in 0..3 { if se.orig[l] != se.target[l] && se.target[l] != "<pad>" { wrong += 1; } }
            if !se.fully_correct() { continue; }
            subset += 1;
            for l in 0..3 { if se.pert[l] != se.target[l] { flips += 1; } }
        }
        let random_asr = 100.0 * flips as f64 / (3 * subset) as f64;
        let mut cfg_ao = AttackConfig::new(OptimizerKind::Ao, 5, 7);
        cfg_ao.alpha_u = 1.0;
        let mut aflips = 0usize;
        let sub: Vec<_> = all.iter().take(200).collect();
        let mut asubset = 0;
        for e in &sub {
            let res = attack(&model, e, &cfg_ao).unwrap();
            let se = SampleEval::new(e.id, &e.name_subtokens, &res);
            if !se.fully_correct() { continue; }
            asubset += 1;
            for l in 0..3 { if se.pert[l] != se.target[l] { aflips += 1; } }
        }
        println!(
            "noise={noise} epochs={epochs} aug={aug} ins={ins}: acc={acc:.4} wrong={wrong} random_k5_ASR={random_asr:.2} ao_k5_ASR~{:.2} (subset {})",
            100.0 * aflips as f64 / (3 * asubset) as f64, subset
        );
    }
}
