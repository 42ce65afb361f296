//! Ground truth for the discrete attack problem: enumerate every feasible
//! selection, materialize it, and score the true model loss.

use advobf::minilang::{
    encode_with_sites, materialize, parse_source, CorpusEntry, Selection, Site, TransformKind,
};
use advobf::summarizer::SummarizerModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    /// Smallest (strongest) attack loss over the search space.
    pub best_loss: f64,
    /// Lexicographically smallest selection attaining it.
    pub best_selection: Selection,
    /// Number of selections evaluated (the empty selection included).
    pub evaluated: usize,
}

fn is_rename(kind: TransformKind) -> bool {
    matches!(
        kind,
        TransformKind::RenameLocalVar | TransformKind::RenameParam | TransformKind::RenameField
    )
}

fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for size in 1..=k.min(n) {
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == size {
                out.push(prefix);
                continue;
            }
            let start = prefix.last().map(|&x| x + 1).unwrap_or(0);
            for next in start..n {
                let mut p = prefix.clone();
                p.push(next);
                stack.push(p);
            }
        }
    }
    out
}

fn assignments(
    sites: &[&Site],
    used_renames: &mut Vec<usize>,
    chosen: &mut Selection,
    score: &mut impl FnMut(&Selection),
) {
    match sites.split_first() {
        None => score(chosen),
        Some((site, rest)) => {
            for &tok in &site.candidates {
                let rename = is_rename(site.kind);
                if rename && used_renames.contains(&tok) {
                    continue;
                }
                chosen.push((site.id, tok));
                if rename {
                    used_renames.push(tok);
                }
                assignments(rest, used_renames, chosen, score);
                if rename {
                    used_renames.pop();
                }
                chosen.pop();
            }
        }
    }
}

/// Enumerate every selection of at most k sites with all legal token
/// assignments and return the minimum true attack loss. Ties break toward
/// the lexicographically smallest selection, so any enumeration order
/// yields the same outcome.
pub fn exhaustive_attack(
    model: &SummarizerModel,
    entry: &CorpusEntry,
    k: usize,
) -> ExhaustiveOutcome {
    let func = parse_source(&entry.source).expect("entry parses");
    let enc = encode_with_sites(&func, &model.vocab, &model.transforms);
    let target = model
        .output_vocab
        .encode_name(&entry.name_subtokens, model.arch.l)
        .expect("entry name encodes");
    let sites = &enc.sitemap.sites;

    let mut evaluated = 0usize;
    let mut best_loss = f64::INFINITY;
    let mut best_selection: Selection = Vec::new();
    let mut consider = |sel: &Selection| {
        let source = materialize(&func, &enc.sitemap, sel, &model.vocab)
            .expect("enumerated selections are legal");
        let perturbed = parse_source(&source).expect("materialized output parses");
        let enc2 = encode_with_sites(&perturbed, &model.vocab, &model.transforms);
        let loss = -SummarizerModel::loss(&model.forward_tokens(&enc2.token_ids), &target);
        evaluated += 1;
        let better = loss < best_loss || (loss == best_loss && *sel < best_selection);
        if better {
            best_loss = loss;
            best_selection = sel.clone();
        }
    };

    for subset in subsets_up_to(sites.len(), k) {
        let chosen: Vec<&Site> = subset.iter().map(|&s| &sites[s]).collect();
        let mut used = Vec::new();
        let mut sel = Vec::new();
        assignments(&chosen, &mut used, &mut sel, &mut consider);
    }
    ExhaustiveOutcome {
        best_loss,
        best_selection,
        evaluated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiny::TinyInstance;

    #[test]
    fn k_zero_returns_the_clean_loss() {
        let inst = TinyInstance::generate(3);
        let out = exhaustive_attack(&inst.model, &inst.entry, 0);
        assert!(out.best_selection.is_empty());
        assert_eq!(out.evaluated, 1);
        let func = parse_source(&inst.entry.source).unwrap();
        let enc = encode_with_sites(&func, &inst.model.vocab, &inst.model.transforms);
        let target = inst
            .model
            .output_vocab
            .encode_name(&inst.entry.name_subtokens, 2)
            .unwrap();
        let clean =
            -SummarizerModel::loss(&inst.model.forward_tokens(&enc.token_ids), &target);
        assert_eq!(out.best_loss, clean);
    }

    #[test]
    fn single_site_visits_every_candidate_once() {
        let inst = TinyInstance::generate(4);
        let out = exhaustive_attack(&inst.model, &inst.entry, 1);
        // empty + 2 sites x 6 candidates each
        assert_eq!(out.evaluated, 1 + 2 * 6);
        assert!(out.best_loss <= exhaustive_attack(&inst.model, &inst.entry, 0).best_loss);
    }

    #[test]
    fn search_space_matches_the_closed_form() {
        let inst = TinyInstance::generate(6);
        let out = exhaustive_attack(&inst.model, &inst.entry, 2);
        // empty + C(2,1)*6 + C(2,2)*6*5 (renames must be distinct)
        assert_eq!(out.evaluated, 1 + 12 + 30);
    }

    #[test]
    fn optimum_is_enumeration_order_independent() {
        let inst = TinyInstance::generate(7);
        let a = exhaustive_attack(&inst.model, &inst.entry, 2);
        let b = exhaustive_attack(&inst.model, &inst.entry, 2);
        assert_eq!(a.best_loss, b.best_loss);
        assert_eq!(a.best_selection, b.best_selection);
    }
}
