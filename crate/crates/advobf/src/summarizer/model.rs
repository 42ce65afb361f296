//! The victim model: mean-pooled token embeddings, one tanh hidden layer,
//! and an independent softmax head per output position. All math is f64
//! and hand-written so gradients stay exact and oracle-checkable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{TransformSet, Vocabulary};

/// Output-side subtoken vocabulary. Id 0 is always PAD.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputVocab {
    subtokens: Vec<String>,
}

pub const PAD: &str = "<pad>";

impl OutputVocab {
    pub fn new<I, S>(subtokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut list = vec![PAD.to_string()];
        for s in subtokens {
            let s = s.as_ref();
            if !list.iter().any(|t| t == s) {
                list.push(s.to_string());
            }
        }
        OutputVocab { subtokens: list }
    }

    /// Distinct subtokens observed in corpus names, sorted.
    pub fn from_names<'a, I>(names: I) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut seen: Vec<String> = Vec::new();
        for name in names {
            for st in name {
                if !seen.contains(st) {
                    seen.push(st.clone());
                }
            }
        }
        seen.sort();
        OutputVocab::new(seen)
    }

    pub fn len(&self) -> usize {
        self.subtokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtokens.is_empty()
    }

    pub fn pad_id(&self) -> usize {
        0
    }

    pub fn id(&self, subtoken: &str) -> Option<usize> {
        self.subtokens.iter().position(|t| t == subtoken)
    }

    pub fn subtoken(&self, id: usize) -> &str {
        &self.subtokens[id]
    }

    pub fn subtokens(&self) -> &[String] {
        &self.subtokens
    }

    /// Map a name to ids, right-padded to `l`.
    pub fn encode_name(&self, name: &[String], l: usize) -> Result<Vec<usize>, ModelError> {
        if name.is_empty() || name.len() > l {
            return Err(ModelError::BadName {
                len: name.len(),
                max: l,
            });
        }
        let mut out = Vec::with_capacity(l);
        for st in name {
            out.push(self.id(st).ok_or_else(|| ModelError::UnknownSubtoken {
                subtoken: st.clone(),
            })?);
        }
        out.resize(l, self.pad_id());
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub d: usize,
    pub h: usize,
    pub l: usize,
    pub omega_size: usize,
    pub output_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// |Ω| x d token embeddings.
    pub embed: Vec<Vec<f64>>,
    /// h x d hidden weights.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    /// L heads of |Σ| x h.
    pub heads_w: Vec<Vec<Vec<f64>>>,
    pub heads_b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarizerModel {
    pub arch: Arch,
    pub params: Params,
    pub vocab: Vocabulary,
    pub output_vocab: OutputVocab,
    pub transforms: TransformSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("name has {len} subtokens, must be 1..={max}")]
    BadName { len: usize, max: usize },
    #[error("subtoken {subtoken:?} not in output vocabulary")]
    UnknownSubtoken { subtoken: String },
}

/// Per-position logits, L x |Σ|.
pub type Logits = Vec<Vec<f64>>;

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl SummarizerModel {
    /// Mixture embedding of one row: E^T row.
    fn mix_row(&self, row: &[f64]) -> Vec<f64> {
        let d = self.arch.d;
        let mut out = vec![0.0; d];
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let e = &self.params.embed[j];
                for k in 0..d {
                    out[k] += w * e[k];
                }
            }
        }
        out
    }

    /// Mean-pooled embedding of dense rows.
    pub fn pool_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        if rows.is_empty() {
            return Err(ModelError::DimensionMismatch {
                context: "no input rows".into(),
            });
        }
        let omega = self.arch.omega_size;
        let mut pooled = vec![0.0; self.arch.d];
        for row in rows {
            if row.len() != omega {
                return Err(ModelError::DimensionMismatch {
                    context: format!("row has {} entries, vocabulary has {omega}", row.len()),
                });
            }
            let mix = self.mix_row(row);
            for k in 0..self.arch.d {
                pooled[k] += mix[k];
            }
        }
        let n = rows.len() as f64;
        for v in &mut pooled {
            *v /= n;
        }
        Ok(pooled)
    }

    /// Mean-pooled embedding of a discrete token-id sequence.
    pub fn pool_tokens(&self, token_ids: &[usize]) -> Vec<f64> {
        let mut pooled = vec![0.0; self.arch.d];
        for &t in token_ids {
            let e = &self.params.embed[t];
            for k in 0..self.arch.d {
                pooled[k] += e[k];
            }
        }
        let n = token_ids.len().max(1) as f64;
        for v in &mut pooled {
            *v /= n;
        }
        pooled
    }

    /// Forward from the pooled embedding.
    pub fn forward_pooled(&self, pooled: &[f64]) -> Logits {
        let Arch { d, h, l, .. } = self.arch;
        debug_assert_eq!(pooled.len(), d);
        let mut hidden = vec![0.0; h];
        for i in 0..h {
            let mut a = self.params.b1[i];
            let w = &self.params.w1[i];
            for k in 0..d {
                a += w[k] * pooled[k];
            }
            hidden[i] = a.tanh();
        }
        let mut logits = Vec::with_capacity(l);
        for pos in 0..l {
            let wl = &self.params.heads_w[pos];
            let bl = &self.params.heads_b[pos];
            let mut row = vec![0.0; self.arch.output_size];
            for (c, out) in row.iter_mut().enumerate() {
                let mut a = bl[c];
                let w = &wl[c];
                for i in 0..h {
                    a += w[i] * hidden[i];
                }
                *out = a;
            }
            logits.push(row);
        }
        logits
    }

    /// Forward on a row-stochastic n x |Ω| matrix.
    pub fn forward(&self, rows: &[Vec<f64>]) -> Result<Logits, ModelError> {
        Ok(self.forward_pooled(&self.pool_rows(rows)?))
    }

    /// Forward on a discrete program (one-hot rows implied).
    pub fn forward_tokens(&self, token_ids: &[usize]) -> Logits {
        self.forward_pooled(&self.pool_tokens(token_ids))
    }

    /// Sum of per-position cross-entropies.
    pub fn loss(logits: &Logits, target: &[usize]) -> f64 {
        debug_assert_eq!(logits.len(), target.len());
        let mut total = 0.0;
        for (row, &t) in logits.iter().zip(target) {
            let p = softmax(row);
            total -= p[t].max(f64::MIN_POSITIVE).ln();
        }
        total
    }

    /// Cross-entropy and its gradient with respect to the pooled embedding.
    pub fn loss_grad_pooled(&self, pooled: &[f64], target: &[usize]) -> (f64, Vec<f64>) {
        let (loss, grads) = self.backward_pooled(pooled, target);
        (loss, grads.d_pooled)
    }

    /// Full backward pass from the pooled embedding. Returns the loss and
    /// gradients for every parameter plus the pooled input.
    pub fn backward_pooled(&self, pooled: &[f64], target: &[usize]) -> (f64, PooledGrads) {
        let Arch { d, h, l, .. } = self.arch;
        let mut pre = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        for i in 0..h {
            let mut a = self.params.b1[i];
            let w = &self.params.w1[i];
            for k in 0..d {
                a += w[k] * pooled[k];
            }
            pre[i] = a;
            hidden[i] = a.tanh();
        }

        let mut loss = 0.0;
        let mut d_hidden = vec![0.0; h];
        let mut d_heads_w = Vec::with_capacity(l);
        let mut d_heads_b = Vec::with_capacity(l);
        for pos in 0..l {
            let wl = &self.params.heads_w[pos];
            let bl = &self.params.heads_b[pos];
            let mut row = vec![0.0; self.arch.output_size];
            for (c, out) in row.iter_mut().enumerate() {
                let mut a = bl[c];
                let w = &wl[c];
                for i in 0..h {
                    a += w[i] * hidden[i];
                }
                *out = a;
            }
            let p = softmax(&row);
            loss -= p[target[pos]].max(f64::MIN_POSITIVE).ln();
            // d logits = softmax - onehot(target)
            let mut dw = vec![vec![0.0; h]; self.arch.output_size];
            let mut db = vec![0.0; self.arch.output_size];
            for c in 0..self.arch.output_size {
                let mut dl = p[c];
                if c == target[pos] {
                    dl -= 1.0;
                }
                db[c] = dl;
                let wl_c = &wl[c];
                for i in 0..h {
                    dw[c][i] = dl * hidden[i];
                    d_hidden[i] += dl * wl_c[i];
                }
            }
            d_heads_w.push(dw);
            d_heads_b.push(db);
        }

        let mut d_pre = vec![0.0; h];
        for i in 0..h {
            d_pre[i] = d_hidden[i] * (1.0 - hidden[i] * hidden[i]);
        }
        let mut d_w1 = vec![vec![0.0; d]; h];
        let mut d_b1 = vec![0.0; h];
        let mut d_pooled = vec![0.0; d];
        for i in 0..h {
            d_b1[i] = d_pre[i];
            let w = &self.params.w1[i];
            for k in 0..d {
                d_w1[i][k] = d_pre[i] * pooled[k];
                d_pooled[k] += d_pre[i] * w[k];
            }
        }

        (
            loss,
            PooledGrads {
                d_pooled,
                d_w1,
                d_b1,
                d_heads_w,
                d_heads_b,
            },
        )
    }

    /// Gradient of the loss with respect to one input row. Mean pooling
    /// makes this identical for every row: E * d_pooled / n.
    pub fn row_gradient(&self, d_pooled: &[f64], n: usize) -> Vec<f64> {
        let inv_n = 1.0 / n as f64;
        self.params
            .embed
            .iter()
            .map(|e| {
                let mut g = 0.0;
                for k in 0..self.arch.d {
                    g += e[k] * d_pooled[k];
                }
                g * inv_n
            })
            .collect()
    }

    /// d loss / d rows for a dense input: n stacked copies of the shared
    /// row gradient.
    pub fn input_gradient(
        &self,
        rows: &[Vec<f64>],
        target: &[usize],
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let pooled = self.pool_rows(rows)?;
        let (_, d_pooled) = self.loss_grad_pooled(&pooled, target);
        let shared = self.row_gradient(&d_pooled, rows.len());
        Ok(vec![shared; rows.len()])
    }

    /// Per-position argmax prediction.
    pub fn predict_ids(&self, token_ids: &[usize]) -> Vec<usize> {
        self.forward_tokens(token_ids)
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.output_vocab.subtoken(i).to_string())
            .collect()
    }
}

/// Gradients from one backward pass.
pub struct PooledGrads {
    pub d_pooled: Vec<f64>,
    pub d_w1: Vec<Vec<f64>>,
    pub d_b1: Vec<f64>,
    pub d_heads_w: Vec<Vec<Vec<f64>>>,
    pub d_heads_b: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{standard_vocabulary, TransformSet};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Vec<Vec<f64>> {
        (0..r)
            .map(|_| (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect()
    }

    fn vecr(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
    }

    pub(crate) fn tiny_model(output: usize, seed: u64) -> SummarizerModel {
        let vocab = standard_vocabulary();
        let arch = Arch {
            d: 4,
            h: 5,
            l: 2,
            omega_size: vocab.len(),
            output_size: output,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed = mat(&mut rng, arch.omega_size, arch.d);
        let w1 = mat(&mut rng, arch.h, arch.d);
        let b1 = vecr(&mut rng, arch.h);
        let heads_w = (0..arch.l)
            .map(|_| mat(&mut rng, arch.output_size, arch.h))
            .collect();
        let heads_b = (0..arch.l)
            .map(|_| vecr(&mut rng, arch.output_size))
            .collect();
        SummarizerModel {
            arch,
            params: Params {
                embed,
                w1,
                b1,
                heads_w,
                heads_b,
            },
            vocab,
            output_vocab: OutputVocab::new((0..output - 1).map(|i| format!("t{i}"))),
            transforms: TransformSet::full(),
        }
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let logits = vec![vec![0.7; 4]];
        let loss = SummarizerModel::loss(&logits, &[2]);
        assert_relative_eq!(loss, 4.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn peaked_logits_loss_vanishes() {
        let mut row = vec![-60.0; 4];
        row[1] = 60.0;
        let loss = SummarizerModel::loss(&vec![row], &[1]);
        assert!(loss < 1e-12, "{loss}");
    }

    #[test]
    fn one_hot_rows_match_token_forward() {
        let m = tiny_model(4, 2);
        let ids = vec![3usize, 5, 3, 7];
        let rows: Vec<Vec<f64>> = ids
            .iter()
            .map(|&t| {
                let mut r = vec![0.0; m.arch.omega_size];
                r[t] = 1.0;
                r
            })
            .collect();
        let a = m.forward(&rows).unwrap();
        let b = m.forward_tokens(&ids);
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn duplicating_rows_preserves_pooled_logits() {
        let m = tiny_model(4, 3);
        let ids = vec![2usize, 9, 4];
        let doubled: Vec<usize> = ids.iter().chain(ids.iter()).copied().collect();
        let a = m.forward_tokens(&ids);
        let b = m.forward_tokens(&doubled);
        for (ra, rb) in a.iter().zip(&b) {
            for (x, y) in ra.iter().zip(rb) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_embedding_model_has_zero_input_gradient() {
        let mut m = tiny_model(4, 4);
        for row in &mut m.params.embed {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let rows: Vec<Vec<f64>> = vec![vec![1.0 / m.arch.omega_size as f64; m.arch.omega_size]; 3];
        let g = m.input_gradient(&rows, &[0, 1]).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = tiny_model(4, 5);
        let rows = vec![vec![0.5; 3]];
        assert!(matches!(
            m.forward(&rows),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn softmax_rows_normalize() {
        let m = tiny_model(4, 6);
        let logits = m.forward_tokens(&[1, 2, 3]);
        for row in &logits {
            let p = softmax(row);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
