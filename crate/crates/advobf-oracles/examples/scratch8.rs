use advobf::attack::{attack, AttackConfig, OptimizerKind};
use advobf::harness::SampleEval;
use advobf::minilang::{generate_corpus, standard_vocabulary, GenConfig, TransformSet};
use advobf::summarizer::train::{train, ModelConfig, TrainParams};
use std::collections::BTreeMap;

fn main() {
    let mut gc = GenConfig::new(600, 7); gc.noise = 0.05; let all = generate_corpus(&gc);
    let vocab = standard_vocabulary();
    let params = TrainParams { epochs: 900, batch: 16, lr: 0.5, seed: 42, augment_placeholders: 0.5, augment_inserts: 6 };
    let model = train(&all[..500], &vocab, &TransformSet::full(), &ModelConfig::default(), &params).unwrap().model;
    let cfg = AttackConfig::new(OptimizerKind::RandomReplace, 5, 7);
    let mut pos_flips = [0usize; 3];
    let mut flips_by_verb: BTreeMap<String, usize> = BTreeMap::new();
    let mut pair_flip = 0usize;
    let mut nonpair_flip = 0usize;
    let mut noun_to: BTreeMap<String, usize> = BTreeMap::new();
    let mut subset = 0usize;
    for e in all.iter() {
        let res = attack(&model, e, &cfg).unwrap();
        let se = SampleEval::new(e.id, &e.name_subtokens, &res);
        if !se.fully_correct() { continue; }
        subset += 1;
        for l in 0..3 {
            if se.pert[l] != se.target[l] {
                pos_flips[l] += 1;
                if l == 0 {
                    *flips_by_verb.entry(se.target[0].clone()).or_default() += 1;
                    let pairs = [["add","plus"],["sub","minus"],["mul","times"],["div","split"],["get","load"],["check","test"],["show","emit"]];
                    let paired = pairs.iter().any(|p| p.contains(&se.target[0].as_str()) && p.contains(&se.pert[0].as_str()));
                    if paired { pair_flip += 1; } else { nonpair_flip += 1; }
                }
                if l == 1 {
                    *noun_to.entry(format!("{}->{}", se.target[1], se.pert[1])).or_default() += 1;
                }
            }
        }
    }
    println!("subset {}; flips verb={} noun={} pos2={}", subset, pos_flips[0], pos_flips[1], pos_flips[2]);
    println!("verb flips within pair: {pair_flip}, cross-pair: {nonpair_flip}");
    println!("verb flips by true verb: {:?}", flips_by_verb);
    let mut nt: Vec<_> = noun_to.into_iter().collect();
    nt.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
    println!("top noun flips: {:?}", &nt[..nt.len().min(8)]);
}
