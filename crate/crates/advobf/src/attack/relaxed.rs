//! The continuous attack state: one selection weight and one perturbation
//! row per site.
//!
//! Tied token positions share a single decision, so the state is stored
//! per site and broadcast into the position-indexed views on demand. The
//! budget counts one unit per site, matching the narrative that at most k
//! sites may be transformed no matter how many occurrences each one ties.

use thiserror::Error;

use crate::minilang::EncodedProgram;

use super::projection::{project_simplex_masked, BisectionStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("program has no transformable sites")]
pub struct NoSites;

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedProgram {
    pub enc: EncodedProgram,
    pub k: usize,
    omega: usize,
    /// Per-site selection weight, broadcast to tied positions.
    pub site_z: Vec<f64>,
    /// Per-site perturbation row over the vocabulary (off-mask entries
    /// stay exactly zero).
    pub site_u: Vec<Vec<f64>>,
}

impl RelaxedProgram {
    /// Feasible starting point: every site at `min(k / S, 1)`, rows
    /// uniform over their candidate masks.
    pub fn relax(enc: EncodedProgram, k: usize, omega: usize) -> Result<Self, NoSites> {
        let s = enc.sitemap.sites.len();
        if s == 0 {
            return Err(NoSites);
        }
        let z0 = (k as f64 / s as f64).min(1.0);
        let site_z = vec![z0; s];
        let site_u = enc
            .sitemap
            .sites
            .iter()
            .map(|site| {
                let mut row = vec![0.0; omega];
                let w = 1.0 / site.candidates.len() as f64;
                for &j in &site.candidates {
                    row[j] = w;
                }
                row
            })
            .collect();
        Ok(RelaxedProgram {
            enc,
            k,
            omega,
            site_z,
            site_u,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.site_z.len()
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.enc.n()
    }

    /// Project the state back onto the feasible set: the site-z vector
    /// onto the capped box, each u row onto its masked simplex. Returns
    /// any bisection diagnostics produced.
    pub fn project(&mut self) -> Vec<BisectionStats> {
        let mut stats = Vec::new();
        let (z, zstats) =
            super::projection::project_z_stats(&self.site_z, self.k as f64);
        self.site_z = z;
        if let Some(s) = zstats {
            stats.push(s);
        }
        for (row, site) in self.site_u.iter_mut().zip(&self.enc.sitemap.sites) {
            if let Some(s) = project_simplex_masked(row, &site.candidates) {
                stats.push(s);
            }
        }
        stats
    }

    /// Position-indexed selection vector: tied positions share their
    /// site's value, non-site positions are exactly zero.
    pub fn z_view(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n()];
        for (i, owner) in self.enc.sitemap.site_of_token.iter().enumerate() {
            if let Some(s) = owner {
                z[i] = self.site_z[*s];
            }
        }
        z
    }

    /// Position-indexed perturbation rows: tied positions share their
    /// site's row, non-site positions carry their one-hot program row.
    pub fn u_view(&self) -> Vec<Vec<f64>> {
        let mut u = Vec::with_capacity(self.n());
        for (i, owner) in self.enc.sitemap.site_of_token.iter().enumerate() {
            match owner {
                Some(s) => u.push(self.site_u[*s].clone()),
                None => {
                    let mut row = vec![0.0; self.omega];
                    row[self.enc.token_ids[i]] = 1.0;
                    u.push(row);
                }
            }
        }
        u
    }

    /// The relaxed program rows `(1 - z) . P + z . u`, row-stochastic by
    /// construction.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.n());
        for (i, owner) in self.enc.sitemap.site_of_token.iter().enumerate() {
            let mut row = vec![0.0; self.omega];
            match owner {
                Some(s) => {
                    let z = self.site_z[*s];
                    row[self.enc.token_ids[i]] += 1.0 - z;
                    for (j, &uj) in self.site_u[*s].iter().enumerate() {
                        if uj != 0.0 {
                            row[j] += z * uj;
                        }
                    }
                }
                None => row[self.enc.token_ids[i]] = 1.0,
            }
            rows.push(row);
        }
        rows
    }

    /// Check every state invariant within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let sum_z: f64 = self.site_z.iter().sum();
        if sum_z > self.k as f64 + tol {
            return false;
        }
        if !self.site_z.iter().all(|&z| (-tol..=1.0 + tol).contains(&z)) {
            return false;
        }
        for (row, site) in self.site_u.iter().zip(&self.enc.sitemap.sites) {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return false;
            }
            if row.iter().any(|&x| x < -tol) {
                return false;
            }
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 && site.candidates.binary_search(&j).is_err() {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{
        encode_with_sites, parse_source, standard_vocabulary, TransformSet,
    };

    fn relaxed(src: &str, k: usize, transforms: &TransformSet) -> RelaxedProgram {
        let vocab = standard_vocabulary();
        let func = parse_source(src).unwrap();
        let enc = encode_with_sites(&func, &vocab, transforms);
        RelaxedProgram::relax(enc, k, vocab.len()).unwrap()
    }

    #[test]
    fn two_sites_k1_initializes_at_half() {
        let r = relaxed(
            "def f(p): total = p - 5; return total",
            1,
            &TransformSet::replace_only(),
        );
        assert_eq!(r.num_sites(), 2);
        assert_eq!(r.site_z, vec![0.5, 0.5]);
        assert!(r.is_feasible(1e-12));
    }

    #[test]
    fn budget_capped_at_one() {
        let r = relaxed(
            "def f(p): total = p - 5; return total",
            7,
            &TransformSet::replace_only(),
        );
        assert_eq!(r.site_z, vec![1.0, 1.0]);
        assert!(r.is_feasible(1e-12));
    }

    #[test]
    fn no_sites_is_an_error() {
        let vocab = standard_vocabulary();
        let func = parse_source("def f(): return 5").unwrap();
        let enc = encode_with_sites(&func, &vocab, &TransformSet::replace_only());
        assert_eq!(
            RelaxedProgram::relax(enc, 1, vocab.len()),
            Err(NoSites)
        );
    }

    #[test]
    fn views_broadcast_site_values() {
        let r = relaxed(
            "def f(p): total = p - 5; return total",
            1,
            &TransformSet::replace_only(),
        );
        let z = r.z_view();
        let sites = &r.enc.sitemap.sites;
        for site in sites {
            for &i in &site.token_indices {
                assert_eq!(z[i], r.site_z[site.id]);
            }
        }
        // non-site positions are exactly zero
        for (i, owner) in r.enc.sitemap.site_of_token.iter().enumerate() {
            if owner.is_none() {
                assert_eq!(z[i], 0.0);
            }
        }
        let rows = r.rows();
        for row in &rows {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn projection_restores_feasibility() {
        let mut r = relaxed(
            "def f(p): total = p - 5; return total",
            1,
            &TransformSet::full(),
        );
        for z in &mut r.site_z {
            *z += 0.9;
        }
        for row in &mut r.site_u {
            for x in row.iter_mut() {
                *x += 0.3;
            }
        }
        assert!(!r.is_feasible(1e-8));
        r.project();
        assert!(r.is_feasible(1e-8), "projection must restore feasibility");
    }
}
