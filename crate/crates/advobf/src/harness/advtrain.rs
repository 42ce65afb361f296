//! Adversarial training: min-max training with an attack generator as the
//! inner maximizer.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{attack, AttackConfig};
use crate::minilang::{encode_with_sites, parse_source, CorpusEntry, TransformSet, Vocabulary};
use crate::summarizer::train::{
    build_dataset, init_model, train_batch, Augmenter, ModelConfig, TrainError, TrainParams,
};
use crate::summarizer::{OutputVocab, SummarizerModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvTrainParams {
    /// Fraction of each minibatch replaced by adversarial versions.
    pub fraction: f64,
    pub attack: AttackConfig,
    pub train: TrainParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvTrainReport {
    pub epochs: usize,
    pub perturbed_examples: usize,
    pub attack_failures: usize,
}

pub struct AdvTrainOutput {
    pub model: SummarizerModel,
    pub loss_trace: Vec<f64>,
    pub report: AdvTrainReport,
}

/// Train with a fraction of every minibatch perturbed by the configured
/// attack against the current model.
///
/// With `fraction = 0` no attack ever runs and the RNG consumption is
/// identical to plain training, so the checkpoints match bit for bit. The
/// perturbed slots are the leading entries of each (already shuffled)
/// batch, which costs no extra randomness; the attack seed is mixed with
/// the epoch so perturbations vary over training.
pub fn adversarial_train(
    entries: &[CorpusEntry],
    vocab: &Vocabulary,
    transforms: &TransformSet,
    config: &ModelConfig,
    params: &AdvTrainParams,
) -> Result<AdvTrainOutput, TrainError> {
    assert!(
        (0.0..=1.0).contains(&params.fraction),
        "fraction must be in [0, 1]"
    );
    let output_vocab =
        OutputVocab::from_names(entries.iter().map(|e| e.name_subtokens.as_slice()));
    let dataset = build_dataset(entries, vocab, &output_vocab, transforms, config.l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.train.seed);
    let mut model = init_model(
        vocab.clone(),
        output_vocab,
        transforms.clone(),
        config,
        &mut rng,
    );
    let augmenter = Augmenter::new(
        vocab,
        params.train.augment_placeholders,
        params.train.augment_inserts,
    );
    let mut loss_trace = Vec::with_capacity(params.train.epochs);
    let mut perturbed_examples = 0usize;
    let mut attack_failures = 0usize;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..params.train.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(params.train.batch.max(1)) {
            let n_perturb = (params.fraction * chunk.len() as f64).round() as usize;
            let mut adversarial: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(chunk.len());
            for (slot, &i) in chunk.iter().enumerate() {
                if slot < n_perturb {
                    let mut attack_config = params.attack.clone();
                    attack_config.seed = params
                        .attack
                        .seed
                        .wrapping_add((epoch as u64).wrapping_mul(0x9e37_79b9));
                    match attack(&model, &entries[i], &attack_config) {
                        Ok(res) if !res.unattackable => {
                            match parse_source(&res.perturbed_source) {
                                Ok(func) => {
                                    let enc = encode_with_sites(&func, vocab, transforms);
                                    perturbed_examples += 1;
                                    adversarial
                                        .push((enc.token_ids, dataset.targets[i].clone()));
                                    continue;
                                }
                                Err(_) => attack_failures += 1,
                            }
                        }
                        Ok(_) => {}
                        Err(_) => attack_failures += 1,
                    }
                }
                adversarial.push((dataset.inputs[i].clone(), dataset.targets[i].clone()));
            }
            for (input, _) in adversarial.iter_mut() {
                *input = augmenter.augment(input, &mut rng);
            }
            let batch: Vec<(&[usize], &[usize])> = adversarial
                .iter()
                .map(|(input, target)| (input.as_slice(), target.as_slice()))
                .collect();
            epoch_loss += train_batch(&mut model, &batch, params.train.lr);
            batches += 1;
        }
        loss_trace.push(epoch_loss / batches as f64);
    }
    Ok(AdvTrainOutput {
        model,
        loss_trace,
        report: AdvTrainReport {
            epochs: params.train.epochs,
            perturbed_examples,
            attack_failures,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::OptimizerKind;
    use crate::minilang::{generate_corpus, standard_vocabulary, GenConfig};
    use crate::summarizer::train::train;

    #[test]
    fn zero_fraction_matches_plain_training_bit_exactly() {
        let entries = generate_corpus(&GenConfig::new(20, 3));
        let vocab = standard_vocabulary();
        let config = ModelConfig { d: 8, h: 9, l: 3 };
        let train_params = TrainParams {
            epochs: 5,
            batch: 8,
            lr: 0.5,
            seed: 11,
            augment_placeholders: 0.15,
            augment_inserts: 2,
        };
        let plain = train(
            &entries,
            &vocab,
            &TransformSet::full(),
            &config,
            &train_params,
        )
        .unwrap();
        let adv = adversarial_train(
            &entries,
            &vocab,
            &TransformSet::full(),
            &config,
            &AdvTrainParams {
                fraction: 0.0,
                attack: AttackConfig::new(OptimizerKind::Ao, 1, 7),
                train: train_params,
            },
        )
        .unwrap();
        assert_eq!(plain.model.params, adv.model.params);
        assert_eq!(plain.loss_trace, adv.loss_trace);
        assert_eq!(adv.report.perturbed_examples, 0);
    }

    #[test]
    fn nonzero_fraction_perturbs_and_stays_deterministic() {
        let entries = generate_corpus(&GenConfig::new(12, 3));
        let vocab = standard_vocabulary();
        let config = ModelConfig { d: 8, h: 9, l: 3 };
        let mut attack_config = AttackConfig::new(OptimizerKind::RandomReplace, 1, 7);
        attack_config.draws = 2;
        let params = AdvTrainParams {
            fraction: 0.5,
            attack: attack_config,
            train: TrainParams {
                epochs: 2,
                batch: 6,
                lr: 0.5,
                seed: 11,
                augment_placeholders: 0.15,
                augment_inserts: 2,
            },
        };
        let a = adversarial_train(&entries, &vocab, &TransformSet::full(), &config, &params)
            .unwrap();
        let b = adversarial_train(&entries, &vocab, &TransformSet::full(), &config, &params)
            .unwrap();
        assert_eq!(a.model.params, b.model.params);
        assert!(a.report.perturbed_examples > 0);
    }
}
