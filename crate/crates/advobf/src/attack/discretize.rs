//! Map the relaxed state to a concrete site/token selection.
//!
//! Randomized mode treats z as per-site Bernoulli probabilities and each u
//! row as a categorical over its mask, draws `s` complete selections, and
//! keeps the one whose materialized program attacks hardest. Argmax mode
//! is the deterministic counterpart.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{Selection, TransformKind};

use super::relaxed::RelaxedProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizeMode {
    Randomized,
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("candidate mask exhausted while enforcing distinct rename tokens (site {site})")]
pub struct MaskExhausted {
    pub site: usize,
}

fn is_rename(kind: TransformKind) -> bool {
    matches!(
        kind,
        TransformKind::RenameLocalVar | TransformKind::RenameParam | TransformKind::RenameField
    )
}

/// Sample one token from the site's u row restricted to `allowed`,
/// proportionally to mass. Falls back to uniform when no mass survives.
fn sample_token(
    row: &[f64],
    allowed: &[usize],
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    if allowed.is_empty() {
        return None;
    }
    let total: f64 = allowed.iter().map(|&j| row[j]).sum();
    if total > 0.0 {
        let mut roll = rng.gen::<f64>() * total;
        for &j in allowed {
            roll -= row[j];
            if roll <= 0.0 {
                return Some(j);
            }
        }
        return Some(*allowed.last().expect("non-empty"));
    }
    Some(allowed[rng.gen_range(0..allowed.len())])
}

/// Keep at most k drawn sites, preferring larger z (ties by site id).
fn truncate_to_budget(drawn: &mut Vec<usize>, z: &[f64], k: usize) {
    if drawn.len() <= k {
        return;
    }
    drawn.sort_by(|&a, &b| {
        z[b].partial_cmp(&z[a])
            .expect("finite z")
            .then(a.cmp(&b))
    });
    drawn.truncate(k);
    drawn.sort_unstable();
}

fn draw_selection(
    relaxed: &RelaxedProgram,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Selection, MaskExhausted> {
    let sites = &relaxed.enc.sitemap.sites;
    let mut drawn: Vec<usize> = Vec::new();
    for (s, &zs) in relaxed.site_z.iter().enumerate() {
        if rng.gen::<f64>() < zs {
            drawn.push(s);
        }
    }
    truncate_to_budget(&mut drawn, &relaxed.site_z, k);
    let mut used_rename: Vec<usize> = Vec::new();
    let mut selection = Vec::with_capacity(drawn.len());
    for &s in &drawn {
        let site = &sites[s];
        let allowed: Vec<usize> = if is_rename(site.kind) {
            site.candidates
                .iter()
                .copied()
                .filter(|t| !used_rename.contains(t))
                .collect()
        } else {
            site.candidates.clone()
        };
        let tok = sample_token(&relaxed.site_u[s], &allowed, rng)
            .ok_or(MaskExhausted { site: s })?;
        if is_rename(site.kind) {
            used_rename.push(tok);
        }
        selection.push((s, tok));
    }
    Ok(selection)
}

fn argmax_selection(relaxed: &RelaxedProgram, k: usize) -> Result<Selection, MaskExhausted> {
    let sites = &relaxed.enc.sitemap.sites;
    let mut order: Vec<usize> = (0..relaxed.num_sites())
        .filter(|&s| relaxed.site_z[s] > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        relaxed.site_z[b]
            .partial_cmp(&relaxed.site_z[a])
            .expect("finite z")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order.sort_unstable();
    let mut used_rename: Vec<usize> = Vec::new();
    let mut selection = Vec::with_capacity(order.len());
    for &s in &order {
        let site = &sites[s];
        let mut best: Option<usize> = None;
        let mut best_mass = f64::NEG_INFINITY;
        for &j in &site.candidates {
            if is_rename(site.kind) && used_rename.contains(&j) {
                continue;
            }
            if relaxed.site_u[s][j] > best_mass {
                best_mass = relaxed.site_u[s][j];
                best = Some(j);
            }
        }
        let tok = best.ok_or(MaskExhausted { site: s })?;
        if is_rename(site.kind) {
            used_rename.push(tok);
        }
        selection.push((s, tok));
    }
    Ok(selection)
}

/// Discretize the relaxed state. `score` evaluates a candidate selection
/// (lower = stronger attack); in randomized mode the best of `s_draws`
/// complete draws wins.
pub fn discretize<F>(
    relaxed: &RelaxedProgram,
    k: usize,
    mode: DiscretizeMode,
    s_draws: usize,
    rng: &mut ChaCha8Rng,
    mut score: F,
) -> Result<Selection, MaskExhausted>
where
    F: FnMut(&Selection) -> f64,
{
    if k == 0 {
        return Ok(Vec::new());
    }
    match mode {
        DiscretizeMode::Argmax => argmax_selection(relaxed, k),
        DiscretizeMode::Randomized => {
            let mut best: Option<(f64, Selection)> = None;
            for _ in 0..s_draws.max(1) {
                let sel = draw_selection(relaxed, k, rng)?;
                let s = score(&sel);
                match &best {
                    Some((b, _)) if *b <= s => {}
                    _ => best = Some((s, sel)),
                }
            }
            Ok(best.expect("at least one draw").1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{encode_with_sites, parse_source, standard_vocabulary, TransformSet};
    use rand::SeedableRng;

    fn relaxed(src: &str, k: usize) -> RelaxedProgram {
        let vocab = standard_vocabulary();
        let func = parse_source(src).unwrap();
        let enc = encode_with_sites(&func, &vocab, &TransformSet::replace_only());
        RelaxedProgram::relax(enc, k, vocab.len()).unwrap()
    }

    #[test]
    fn k_zero_selects_nothing() {
        let r = relaxed("def f(p): total = p - 5; return total", 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sel = discretize(&r, 0, DiscretizeMode::Randomized, 5, &mut rng, |_| 0.0).unwrap();
        assert!(sel.is_empty());
    }

    #[test]
    fn one_hot_state_is_unambiguous_in_both_modes() {
        let mut r = relaxed("def f(p): total = p - 5; return total", 1);
        // z one-hot on site 1, u one-hot on its first candidate
        r.site_z = vec![0.0, 1.0];
        let tok = r.enc.sitemap.sites[1].candidates[0];
        for row in &mut r.site_u {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        r.site_u[1][tok] = 1.0;
        let expected = vec![(1usize, tok)];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let sel =
                discretize(&r, 1, DiscretizeMode::Randomized, 3, &mut rng, |_| 0.0).unwrap();
            assert_eq!(sel, expected);
        }
        let sel = discretize(&r, 1, DiscretizeMode::Argmax, 1, &mut rng, |_| 0.0).unwrap();
        assert_eq!(sel, expected);
    }

    #[test]
    fn budget_is_hard_even_when_all_sites_drawn() {
        let r = {
            let mut r = relaxed("def f(p, q): total = p - q; return total", 1);
            r.site_z = vec![1.0; r.num_sites()];
            r
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let sel =
                discretize(&r, 1, DiscretizeMode::Randomized, 1, &mut rng, |_| 0.0).unwrap();
            assert_eq!(sel.len(), 1);
        }
    }

    #[test]
    fn rename_tokens_are_pairwise_distinct() {
        let mut r = relaxed("def f(p, q): total = p - q; return total", 3);
        r.site_z = vec![1.0; r.num_sites()];
        // concentrate every u row on the same candidate to force resampling
        let tok = r.enc.sitemap.sites[0].candidates[0];
        for row in &mut r.site_u {
            row.iter_mut().for_each(|x| *x = 0.0);
            row[tok] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sel = discretize(&r, 3, DiscretizeMode::Randomized, 1, &mut rng, |_| 0.0).unwrap();
        assert_eq!(sel.len(), 3);
        let mut toks: Vec<usize> = sel.iter().map(|&(_, t)| t).collect();
        toks.sort_unstable();
        toks.dedup();
        assert_eq!(toks.len(), 3, "rename tokens must be distinct");
    }

    #[test]
    fn best_of_s_tracks_the_score() {
        let r = relaxed("def f(p): total = p - 5; return total", 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // scorer prefers selections containing site 0
        let sel = discretize(&r, 1, DiscretizeMode::Randomized, 64, &mut rng, |sel| {
            if sel.iter().any(|&(s, _)| s == 0) {
                -1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(sel.iter().any(|&(s, _)| s == 0));
    }
}
