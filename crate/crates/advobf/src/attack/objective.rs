//! The attack loss as an optimizable objective over the per-site state.
//!
//! The loss is the negated cross-entropy of the victim on the relaxed
//! program, so descending it strengthens the attack. Gradients chain
//! through the perturbed-row construction: with g the shared row gradient
//! of the loss, each site receives `sum over its tied positions of
//! g . (u - P_i)` for z and `z * |group| * g` masked to candidates for u.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::summarizer::SummarizerModel;

use super::relaxed::RelaxedProgram;

/// Loss and gradients over the per-site variables.
pub trait AttackObjective {
    fn loss(&mut self, z: &[f64], u: &[Vec<f64>]) -> f64;
    /// Returns (loss, d/dz, d/du) at (z, u).
    fn loss_grad(&mut self, z: &[f64], u: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<Vec<f64>>);
    /// Value used to rank visited iterates. Smoothed objectives rank by
    /// the underlying raw loss so the Monte Carlo noise steers only the
    /// steps, never the selection.
    fn score(&mut self, z: &[f64], u: &[Vec<f64>]) -> f64 {
        self.loss(z, u)
    }
    /// Strongest feasible point this objective evaluated as a side effect
    /// (smoothed objectives probe the neighbourhood of every iterate).
    /// Returns (raw score, z, u) and clears the record.
    fn take_best_probe(&mut self) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        None
    }
}

/// Per-site constants precomputed from the encoded program.
struct SiteGeom {
    /// Candidate ids (sorted) of this site.
    mask: Vec<usize>,
    /// Original token id at each tied position.
    p_tokens: Vec<usize>,
    /// Sum of embeddings of the original tokens across the group.
    p_embed_sum: Vec<f64>,
}

/// The victim-model attack loss for one encoded program.
pub struct ModelObjective<'a> {
    model: &'a SummarizerModel,
    target: &'a [usize],
    n: usize,
    sites: Vec<SiteGeom>,
    /// Sum of embeddings over all non-site positions.
    base_embed: Vec<f64>,
}

impl<'a> ModelObjective<'a> {
    pub fn new(
        model: &'a SummarizerModel,
        relaxed: &RelaxedProgram,
        target: &'a [usize],
    ) -> Self {
        let d = model.arch.d;
        let enc = &relaxed.enc;
        let mut base_embed = vec![0.0; d];
        for (i, owner) in enc.sitemap.site_of_token.iter().enumerate() {
            if owner.is_none() {
                let e = &model.params.embed[enc.token_ids[i]];
                for k in 0..d {
                    base_embed[k] += e[k];
                }
            }
        }
        let sites = enc
            .sitemap
            .sites
            .iter()
            .map(|site| {
                let p_tokens: Vec<usize> =
                    site.token_indices.iter().map(|&i| enc.token_ids[i]).collect();
                let mut p_embed_sum = vec![0.0; d];
                for &t in &p_tokens {
                    let e = &model.params.embed[t];
                    for k in 0..d {
                        p_embed_sum[k] += e[k];
                    }
                }
                SiteGeom {
                    mask: site.candidates.clone(),
                    p_tokens,
                    p_embed_sum,
                }
            })
            .collect();
        ModelObjective {
            model,
            target,
            n: enc.n(),
            sites,
            base_embed,
        }
    }

    /// Mixture embedding of one site row. Scans the full row rather than
    /// the candidate mask so off-mask mass (the u = P degeneracy) is
    /// still honoured by the loss.
    fn mix(&self, row: &[f64]) -> Vec<f64> {
        let d = self.model.arch.d;
        let mut out = vec![0.0; d];
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let e = &self.model.params.embed[j];
                for k in 0..d {
                    out[k] += w * e[k];
                }
            }
        }
        out
    }

    fn pooled(&self, z: &[f64], u: &[Vec<f64>]) -> Vec<f64> {
        let d = self.model.arch.d;
        let mut sum = self.base_embed.clone();
        for (s, site) in self.sites.iter().enumerate() {
            let zs = z[s];
            let mixed = self.mix(&u[s]);
            let group = site.p_tokens.len() as f64;
            for k in 0..d {
                sum[k] += (1.0 - zs) * site.p_embed_sum[k] + zs * group * mixed[k];
            }
        }
        let inv_n = 1.0 / self.n as f64;
        sum.iter().map(|&x| x * inv_n).collect()
    }
}

impl AttackObjective for ModelObjective<'_> {
    fn loss(&mut self, z: &[f64], u: &[Vec<f64>]) -> f64 {
        let pooled = self.pooled(z, u);
        let logits = self.model.forward_pooled(&pooled);
        -SummarizerModel::loss(&logits, self.target)
    }

    fn loss_grad(&mut self, z: &[f64], u: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let d = self.model.arch.d;
        let omega = self.model.arch.omega_size;
        let pooled = self.pooled(z, u);
        let (ce, d_pooled_ce) = self.model.loss_grad_pooled(&pooled, self.target);
        // attack loss is -CE
        let t: Vec<f64> = d_pooled_ce.iter().map(|&x| -x / self.n as f64).collect();
        let mut grad_z = vec![0.0; self.sites.len()];
        let mut grad_u = vec![vec![0.0; omega]; self.sites.len()];
        for (s, site) in self.sites.iter().enumerate() {
            let mixed = self.mix(&u[s]);
            let mut t_dot_mix = 0.0;
            for k in 0..d {
                t_dot_mix += t[k] * mixed[k];
            }
            let mut t_dot_p = 0.0;
            for k in 0..d {
                t_dot_p += t[k] * site.p_embed_sum[k];
            }
            let group = site.p_tokens.len() as f64;
            grad_z[s] = group * t_dot_mix - t_dot_p;
            let zs = z[s];
            if zs != 0.0 {
                for &j in &site.mask {
                    let e = &self.model.params.embed[j];
                    let mut t_dot_e = 0.0;
                    for k in 0..d {
                        t_dot_e += t[k] * e[k];
                    }
                    grad_u[s][j] = zs * group * t_dot_e;
                }
            }
        }
        (-ce, grad_z, grad_u)
    }
}

/// Randomized smoothing: Monte Carlo average of the wrapped objective
/// under uniform unit-ball noise on the masked u coordinates (and, when
/// enabled, on z). Deterministic given the rng state.
pub struct SmoothedObjective<O: AttackObjective> {
    pub inner: O,
    pub mu: f64,
    pub samples: usize,
    pub smooth_z: bool,
    masks: Vec<Vec<usize>>,
    k: usize,
    rng: ChaCha8Rng,
    best_probe: Option<(f64, Vec<f64>, Vec<Vec<f64>>)>,
}

impl<O: AttackObjective> SmoothedObjective<O> {
    pub fn new(
        inner: O,
        relaxed: &RelaxedProgram,
        mu: f64,
        samples: usize,
        smooth_z: bool,
        rng: ChaCha8Rng,
    ) -> Self {
        assert!(mu > 0.0, "smoothing radius must be positive");
        assert!(samples >= 1, "need at least one Monte Carlo sample");
        SmoothedObjective {
            inner,
            mu,
            samples,
            smooth_z,
            masks: relaxed
                .enc
                .sitemap
                .sites
                .iter()
                .map(|s| s.candidates.clone())
                .collect(),
            k: relaxed.k,
            rng,
            best_probe: None,
        }
    }

    /// Rank the projected probe against the best seen so far by its raw
    /// loss, so smoothing doubles as neighbourhood search.
    fn observe_probe(&mut self, z: &[f64], u: &[Vec<f64>]) {
        let z_feasible = if self.smooth_z {
            super::projection::project_z(z, self.k as f64)
        } else {
            z.to_vec()
        };
        let mut u_feasible = u.to_vec();
        for (row, mask) in u_feasible.iter_mut().zip(&self.masks) {
            super::projection::project_simplex_masked(row, mask);
        }
        let score = self.inner.score(&z_feasible, &u_feasible);
        if self.best_probe.as_ref().map(|(b, _, _)| score < *b).unwrap_or(true) {
            self.best_probe = Some((score, z_feasible, u_feasible));
        }
    }

    /// Uniform sample from the unit ball in `dim` dimensions.
    fn ball(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        // gaussian direction, radius U^(1/dim)
        let mut v = Vec::with_capacity(dim);
        let mut norm_sq = 0.0;
        for _ in 0..dim {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            norm_sq += g * g;
            v.push(g);
        }
        let norm = norm_sq.sqrt().max(f64::MIN_POSITIVE);
        let radius = rng.gen::<f64>().powf(1.0 / dim as f64);
        v.iter_mut().for_each(|x| *x *= radius / norm);
        v
    }

    fn perturbed(&mut self, z: &[f64], u: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dim: usize = self.masks.iter().map(|m| m.len()).sum();
        let tau = Self::ball(&mut self.rng, dim);
        let mut u2: Vec<Vec<f64>> = u.to_vec();
        let mut offset = 0;
        for (row, mask) in u2.iter_mut().zip(&self.masks) {
            for &j in mask {
                row[j] += self.mu * tau[offset];
                offset += 1;
            }
        }
        let z2 = if self.smooth_z {
            let xi = Self::ball(&mut self.rng, z.len());
            z.iter().zip(&xi).map(|(&a, &b)| a + self.mu * b).collect()
        } else {
            z.to_vec()
        };
        (z2, u2)
    }
}

impl<O: AttackObjective> AttackObjective for SmoothedObjective<O> {
    fn score(&mut self, z: &[f64], u: &[Vec<f64>]) -> f64 {
        self.inner.score(z, u)
    }

    fn take_best_probe(&mut self) -> Option<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        self.best_probe.take()
    }

    fn loss(&mut self, z: &[f64], u: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for _ in 0..self.samples {
            let (z2, u2) = self.perturbed(z, u);
            self.observe_probe(&z2, &u2);
            total += self.inner.loss(&z2, &u2);
        }
        total / self.samples as f64
    }

    fn loss_grad(&mut self, z: &[f64], u: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let mut total = 0.0;
        let mut gz_acc: Vec<f64> = vec![0.0; z.len()];
        let mut gu_acc: Vec<Vec<f64>> = u.iter().map(|row| vec![0.0; row.len()]).collect();
        for _ in 0..self.samples {
            let (z2, u2) = self.perturbed(z, u);
            self.observe_probe(&z2, &u2);
            let (l, gz, gu) = self.inner.loss_grad(&z2, &u2);
            total += l;
            for (a, b) in gz_acc.iter_mut().zip(&gz) {
                *a += b;
            }
            for (ra, rb) in gu_acc.iter_mut().zip(&gu) {
                for (a, b) in ra.iter_mut().zip(rb) {
                    *a += b;
                }
            }
        }
        let inv = 1.0 / self.samples as f64;
        total *= inv;
        gz_acc.iter_mut().for_each(|x| *x *= inv);
        gu_acc
            .iter_mut()
            .for_each(|row| row.iter_mut().for_each(|x| *x *= inv));
        (total, gz_acc, gu_acc)
    }
}

/// The attack loss at the relaxed state (public entry for tests and the
/// dispatcher): negated cross-entropy at `(1 - z) . P + z . u`.
pub fn attack_loss(model: &SummarizerModel, relaxed: &RelaxedProgram, target: &[usize]) -> f64 {
    let mut obj = ModelObjective::new(model, relaxed, target);
    obj.loss(&relaxed.site_z, &relaxed.site_u)
}

/// Gradients of the attack loss in the position-indexed shape: tied
/// positions carry their site's accumulated gradient, non-site positions
/// zero.
pub fn grad_zu(
    model: &SummarizerModel,
    relaxed: &RelaxedProgram,
    target: &[usize],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut obj = ModelObjective::new(model, relaxed, target);
    let (_, gz, gu) = obj.loss_grad(&relaxed.site_z, &relaxed.site_u);
    let n = relaxed.n();
    let mut z_full = vec![0.0; n];
    let mut u_full = vec![vec![0.0; relaxed.omega()]; n];
    for (i, owner) in relaxed.enc.sitemap.site_of_token.iter().enumerate() {
        if let Some(s) = owner {
            z_full[i] = gz[*s];
            u_full[i] = gu[*s].clone();
        }
    }
    (z_full, u_full)
}

/// Site-indexed gradients (one entry per site).
pub fn grad_zu_sites(
    model: &SummarizerModel,
    relaxed: &RelaxedProgram,
    target: &[usize],
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let mut obj = ModelObjective::new(model, relaxed, target);
    obj.loss_grad(&relaxed.site_z, &relaxed.site_u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{
        encode_with_sites, generate_corpus, parse_source, standard_vocabulary, GenConfig,
        TransformSet,
    };
    use crate::summarizer::train::{train, ModelConfig, TrainParams};
    use rand::SeedableRng;

    fn small_model() -> SummarizerModel {
        let entries = generate_corpus(&GenConfig::new(30, 3));
        train(
            &entries,
            &standard_vocabulary(),
            &TransformSet::full(),
            &ModelConfig { d: 8, h: 10, l: 3 },
            &TrainParams {
                epochs: 30,
                batch: 8,
                lr: 0.5,
                seed: 5,
                augment_placeholders: 0.15,
                augment_inserts: 2,
            },
        )
        .unwrap()
        .model
    }

    fn relaxed_for(model: &SummarizerModel, src: &str, k: usize) -> RelaxedProgram {
        let func = parse_source(src).unwrap();
        let enc = encode_with_sites(&func, &model.vocab, &model.transforms);
        RelaxedProgram::relax(enc, k, model.vocab.len()).unwrap()
    }

    #[test]
    fn structured_loss_matches_dense_forward() {
        let model = small_model();
        let mut relaxed = relaxed_for(&model, "def f(p): total = p + 5\n    return total", 1);
        // move to a non-trivial interior state
        for z in &mut relaxed.site_z {
            *z = 0.37;
        }
        let target = vec![1usize, 2, 0];
        let structured = attack_loss(&model, &relaxed, &target);
        let dense = -SummarizerModel::loss(
            &model.forward(&relaxed.rows()).unwrap(),
            &target,
        );
        assert!(
            (structured - dense).abs() <= 1e-12,
            "structured {structured} vs dense {dense}"
        );
    }

    #[test]
    fn z_zero_loss_equals_clean_loss() {
        let model = small_model();
        let mut relaxed = relaxed_for(&model, "def f(p): total = p + 5\n    return total", 1);
        for z in &mut relaxed.site_z {
            *z = 0.0;
        }
        let target = vec![1usize, 2, 0];
        let loss = attack_loss(&model, &relaxed, &target);
        let clean = -SummarizerModel::loss(&model.forward_tokens(&relaxed.enc.token_ids), &target);
        assert!((loss - clean).abs() <= 1e-12);
    }

    #[test]
    fn u_equals_p_makes_loss_independent_of_z() {
        let model = small_model();
        let mut relaxed = relaxed_for(&model, "def f(p): total = p + 5\n    return total", 2);
        // u rows concentrated on the original tokens; masks do not contain
        // the original token for rename sites, so write it directly
        for (s, site) in relaxed.enc.sitemap.sites.clone().iter().enumerate() {
            let tok = relaxed.enc.token_ids[site.token_indices[0]];
            relaxed.site_u[s] = vec![0.0; model.vocab.len()];
            relaxed.site_u[s][tok] = 1.0;
        }
        let target = vec![1usize, 2, 0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let reference = attack_loss(&model, &relaxed, &target);
        for _ in 0..20 {
            for z in &mut relaxed.site_z {
                *z = rand::Rng::gen::<f64>(&mut rng);
            }
            let loss = attack_loss(&model, &relaxed, &target);
            assert!(
                (loss - reference).abs() <= 1e-12,
                "loss varied with z: {loss} vs {reference}"
            );
        }
    }

    #[test]
    fn zero_z_freezes_u_gradient() {
        let model = small_model();
        let mut relaxed = relaxed_for(&model, "def f(p): total = p + 5; return total", 2);
        relaxed.site_z[0] = 0.0;
        let target = vec![1usize, 2, 0];
        let (_, _, gu) = grad_zu_sites(&model, &relaxed, &target);
        assert!(gu[0].iter().all(|&g| g == 0.0));
        // the position-indexed view mirrors that
        let (_, gu_view) = grad_zu(&model, &relaxed, &target);
        let site0 = &relaxed.enc.sitemap.sites[0];
        for &i in &site0.token_indices {
            assert!(gu_view[i].iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn u_equals_p_zeroes_z_gradient() {
        let model = small_model();
        let mut relaxed = relaxed_for(&model, "def f(p): total = p + 5; return total", 2);
        for (s, site) in relaxed.enc.sitemap.sites.clone().iter().enumerate() {
            let tok = relaxed.enc.token_ids[site.token_indices[0]];
            relaxed.site_u[s] = vec![0.0; model.vocab.len()];
            relaxed.site_u[s][tok] = 1.0;
        }
        let target = vec![1usize, 2, 0];
        let (_, gz, _) = grad_zu_sites(&model, &relaxed, &target);
        for g in gz {
            assert!(
                g.abs() <= 1e-13,
                "grad z should vanish when u replicates P, got {g}"
            );
        }
    }

    #[test]
    fn smoothing_of_constant_objective_is_exact_zero() {
        struct Constant;
        impl AttackObjective for Constant {
            fn loss(&mut self, _: &[f64], _: &[Vec<f64>]) -> f64 {
                3.5
            }
            fn loss_grad(&mut self, z: &[f64], u: &[Vec<f64>]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
                (3.5, vec![0.0; z.len()], u.iter().map(|r| vec![0.0; r.len()]).collect())
            }
        }
        let model = small_model();
        let relaxed = relaxed_for(&model, "def f(p): total = p + 5; return total", 1);
        let rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut smoothed = SmoothedObjective::new(Constant, &relaxed, 0.01, 50, false, rng);
        let (l, gz, gu) = smoothed.loss_grad(&relaxed.site_z, &relaxed.site_u);
        assert_eq!(l, 3.5);
        assert!(gz.iter().all(|&g| g.abs() <= 1e-12));
        assert!(gu.iter().flatten().all(|&g| g.abs() <= 1e-12));
    }

    #[test]
    fn smoothing_is_deterministic_given_seed() {
        let model = small_model();
        let relaxed = relaxed_for(&model, "def f(p): total = p + 5; return total", 1);
        let target = vec![1usize, 2, 0];
        let run = |seed: u64| {
            let inner = ModelObjective::new(&model, &relaxed, &target);
            let rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut sm = SmoothedObjective::new(inner, &relaxed, 0.01, 1, false, rng);
            sm.loss_grad(&relaxed.site_z, &relaxed.site_u)
        };
        let (l1, gz1, gu1) = run(11);
        let (l2, gz2, gu2) = run(11);
        assert_eq!(l1, l2);
        assert_eq!(gz1, gz2);
        assert_eq!(gu1, gu2);
        let (l3, _, _) = run(12);
        assert_ne!(l1, l3);
    }
}
