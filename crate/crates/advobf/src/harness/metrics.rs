//! Attack success rate, F1, and false-positive rate.
//!
//! All three are token-level micro metrics. ASR and F1 are computed over
//! the fully-correctly-classified subset only; FPR over originally-wrong
//! tokens of every evaluated sample. A sample is fully correct when the
//! prediction matches the padded target at every output position, so the
//! ASR denominator is exactly the subset's position count and F1 = 100
//! if and only if ASR = 0.

use thiserror::Error;

use crate::attack::AttackResult;
use crate::summarizer::PAD;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("empty denominator computing {metric}")]
pub struct EmptyDenominator {
    pub metric: &'static str,
}

/// One attacked sample reduced to comparable token strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleEval {
    pub id: u64,
    pub target: Vec<String>,
    pub orig: Vec<String>,
    pub pert: Vec<String>,
}

impl SampleEval {
    /// Join an attack record with its ground-truth name (padded to the
    /// prediction length).
    pub fn new(id: u64, name_subtokens: &[String], result: &AttackResult) -> Self {
        let l = result.orig_pred.len();
        let mut target: Vec<String> = name_subtokens.to_vec();
        target.resize(l, PAD.to_string());
        SampleEval {
            id,
            target,
            orig: result.orig_pred.clone(),
            pert: result.pert_pred.clone(),
        }
    }

    /// Correct at every output position, PAD included.
    pub fn fully_correct(&self) -> bool {
        self.orig == self.target
    }
}

/// Attack success rate in percent: flipped positions over all positions
/// of the fully-correct subset.
pub fn asr(subset: &[SampleEval]) -> Result<f64, EmptyDenominator> {
    debug_assert!(subset.iter().all(SampleEval::fully_correct));
    let mut flips = 0usize;
    let mut total = 0usize;
    for s in subset {
        for (t, p) in s.target.iter().zip(&s.pert) {
            total += 1;
            if p != t {
                flips += 1;
            }
        }
    }
    if total == 0 {
        return Err(EmptyDenominator { metric: "asr" });
    }
    Ok(100.0 * flips as f64 / total as f64)
}

/// Micro-averaged token F1 in percent over the fully-correct subset, PAD
/// excluded as a class.
pub fn f1(subset: &[SampleEval]) -> Result<f64, EmptyDenominator> {
    debug_assert!(subset.iter().all(SampleEval::fully_correct));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut saw_position = false;
    for s in subset {
        for (t, p) in s.target.iter().zip(&s.pert) {
            saw_position = true;
            let t_real = t != PAD;
            let p_real = p != PAD;
            match (t_real, p_real) {
                (true, true) if t == p => tp += 1,
                (true, true) => {
                    fn_ += 1;
                    fp += 1;
                }
                (true, false) => fn_ += 1,
                (false, true) => fp += 1,
                (false, false) => {}
            }
        }
    }
    if !saw_position {
        return Err(EmptyDenominator { metric: "f1" });
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// False-positive rate as a fraction: originally-wrong real tokens that
/// the perturbation turned correct.
pub fn fpr(samples: &[SampleEval]) -> Result<f64, EmptyDenominator> {
    let mut wrong = 0usize;
    let mut fixed = 0usize;
    for s in samples {
        for ((t, o), p) in s.target.iter().zip(&s.orig).zip(&s.pert) {
            if t != PAD && o != t {
                wrong += 1;
                if p == t {
                    fixed += 1;
                }
            }
        }
    }
    if wrong == 0 {
        return Err(EmptyDenominator { metric: "fpr" });
    }
    Ok(fixed as f64 / wrong as f64)
}

/// Raw counts backing the metrics, for report transparency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MetricCounts {
    pub samples: usize,
    pub correct_samples: usize,
    pub subset_positions: usize,
    pub flipped_positions: usize,
    pub wrong_tokens: usize,
    pub fixed_tokens: usize,
}

pub fn counts(samples: &[SampleEval]) -> MetricCounts {
    let mut c = MetricCounts {
        samples: samples.len(),
        correct_samples: 0,
        subset_positions: 0,
        flipped_positions: 0,
        wrong_tokens: 0,
        fixed_tokens: 0,
    };
    for s in samples {
        if s.fully_correct() {
            c.correct_samples += 1;
            for (t, p) in s.target.iter().zip(&s.pert) {
                c.subset_positions += 1;
                if p != t {
                    c.flipped_positions += 1;
                }
            }
        }
        for ((t, o), p) in s.target.iter().zip(&s.orig).zip(&s.pert) {
            if t != PAD && o != t {
                c.wrong_tokens += 1;
                if p == t {
                    c.fixed_tokens += 1;
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(target: &[&str], orig: &[&str], pert: &[&str]) -> SampleEval {
        SampleEval {
            id: 0,
            target: target.iter().map(|s| s.to_string()).collect(),
            orig: orig.iter().map(|s| s.to_string()).collect(),
            pert: pert.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn asr_counts_flipped_positions() {
        // 2 samples x 2 real tokens, all correct pre-attack, 3 of 4 flipped
        let subset = vec![
            sample(&["add", "five"], &["add", "five"], &["sub", "one"]),
            sample(&["get", "x"], &["get", "x"], &["load", "x"]),
        ];
        assert_eq!(asr(&subset).unwrap(), 75.0);
    }

    #[test]
    fn no_perturbation_means_zero_asr_and_full_f1() {
        let subset = vec![sample(
            &["add", "five", PAD],
            &["add", "five", PAD],
            &["add", "five", PAD],
        )];
        assert_eq!(asr(&subset).unwrap(), 0.0);
        assert_eq!(f1(&subset).unwrap(), 100.0);
    }

    #[test]
    fn all_flipped_means_zero_f1() {
        let subset = vec![sample(
            &["add", "five", PAD],
            &["add", "five", PAD],
            &["sub", "one", "x"],
        )];
        assert_eq!(f1(&subset).unwrap(), 0.0);
        assert!(asr(&subset).unwrap() > 99.0);
    }

    #[test]
    fn f1_matches_hand_tallied_confusion() {
        // positions: (add->add) TP, (five->one) FP+FN, (PAD->x) FP,
        // (get->PAD) FN, (x->x) TP, (PAD->PAD) nothing
        let subset = vec![
            sample(&["add", "five", PAD], &["add", "five", PAD], &["add", "one", "x"]),
            sample(&["get", "x", PAD], &["get", "x", PAD], &[PAD, "x", PAD]),
        ];
        // tp=2, fp=2, fn=2 -> precision=recall=0.5 -> F1=50
        assert_eq!(f1(&subset).unwrap(), 50.0);
    }

    #[test]
    fn complementarity_on_the_subset() {
        // flip only a PAD position: ASR catches it, so F1 may not be 100
        // when ASR is 0 is never violated
        let flipped_pad = vec![sample(
            &["add", "five", PAD],
            &["add", "five", PAD],
            &["add", "five", "x"],
        )];
        assert!(asr(&flipped_pad).unwrap() > 0.0);
        assert!(f1(&flipped_pad).unwrap() < 100.0);
    }

    #[test]
    fn fpr_counts_accidental_fixes() {
        // first sample: originally wrong at both real tokens, one becomes
        // correct; second fully correct contributes nothing
        let samples = vec![
            sample(&["add", "five"], &["sub", "one"], &["add", "one"]),
            sample(&["get", "x"], &["get", "x"], &["get", "x"]),
        ];
        assert_eq!(fpr(&samples).unwrap(), 0.5);
    }

    #[test]
    fn identity_perturbation_has_zero_fpr() {
        let samples = vec![sample(&["add", "five"], &["sub", "five"], &["sub", "five"])];
        assert_eq!(fpr(&samples).unwrap(), 0.0);
    }

    #[test]
    fn empty_denominators_are_errors() {
        assert!(asr(&[]).is_err());
        assert!(f1(&[]).is_err());
        let all_correct = vec![sample(&["a"], &["a"], &["a"])];
        assert!(fpr(&all_correct).is_err());
    }
}
