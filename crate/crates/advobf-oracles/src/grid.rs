//! Grid-search projection oracle.
//!
//! Finds the exact minimizer of ||z - v||^2 over grid points of spacing
//! `resolution` inside the constraint set, via dynamic programming on the
//! quantized budget. Equivalent to brute-force enumeration of the grid,
//! but tractable at n = 4 and one-hundredth resolution.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintSet {
    /// `{z in [0,1]^n : sum z <= k}`
    CappedBox { k: f64 },
    /// `{u >= 0 : sum u = 1}` (entries capped at 1, harmless on the
    /// simplex)
    Simplex,
}

/// The feasible grid point closest to `v` in Euclidean distance.
pub fn grid_project_oracle(v: &[f64], set: ConstraintSet, resolution: f64) -> Vec<f64> {
    assert!(resolution > 0.0 && resolution <= 0.5);
    let steps = (1.0 / resolution).round() as usize;
    let (budget, exact): (usize, bool) = match set {
        ConstraintSet::CappedBox { k } => (((k * steps as f64) + 1e-9) as usize, false),
        ConstraintSet::Simplex => (steps, true),
    };
    let n = v.len();
    // dp[b] = best cost using the first i coords with b budget units spent
    let inf = f64::INFINITY;
    let mut dp = vec![inf; budget + 1];
    dp[0] = 0.0;
    let mut choice = vec![vec![usize::MAX; budget + 1]; n];
    for (i, &vi) in v.iter().enumerate() {
        let mut ndp = vec![inf; budget + 1];
        for b in 0..=budget {
            if dp[b] == inf {
                continue;
            }
            for g in 0..=steps.min(budget - b) {
                let zi = g as f64 / steps as f64;
                let cost = dp[b] + (zi - vi) * (zi - vi);
                if cost < ndp[b + g] {
                    ndp[b + g] = cost;
                    choice[i][b + g] = g;
                }
            }
        }
        dp = ndp;
    }
    let best_b = if exact {
        budget
    } else {
        (0..=budget)
            .min_by(|&a, &b| dp[a].partial_cmp(&dp[b]).expect("finite costs"))
            .expect("non-empty budget range")
    };
    assert!(dp[best_b] < inf, "no feasible grid point");
    // walk the choices back
    let mut out = vec![0.0; n];
    let mut b = best_b;
    for i in (0..n).rev() {
        let g = choice[i][b];
        out[i] = g as f64 / steps as f64;
        b -= g;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn feasible_point_snaps_to_grid() {
        let v = vec![0.31, 0.22];
        let p = grid_project_oracle(&v, ConstraintSet::CappedBox { k: 2.0 }, 0.01);
        assert_eq!(p, vec![0.31, 0.22]);
    }

    #[test]
    fn symmetric_capped_box_case() {
        let v = vec![0.9, 0.9, 0.9];
        let p = grid_project_oracle(&v, ConstraintSet::CappedBox { k: 1.0 }, 0.01);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() <= 0.011, "{p:?}");
        }
        let sum: f64 = p.iter().sum();
        assert!(sum <= 1.0 + 1e-9);
    }

    #[test]
    fn simplex_mass_is_exact_on_the_grid() {
        let v = vec![0.4, -0.2, 0.1];
        let p = grid_project_oracle(&v, ConstraintSet::Simplex, 0.01);
        let units: f64 = p.iter().map(|x| (x * 100.0).round()).sum();
        assert_eq!(units, 100.0);
    }

    #[test]
    fn matches_brute_force_enumeration_at_coarse_resolution() {
        // coarse grid so full enumeration stays cheap
        let v = vec![0.83, -0.4, 0.62];
        let res = 0.1;
        let steps = 10usize;
        let dp = grid_project_oracle(&v, ConstraintSet::CappedBox { k: 1.0 }, res);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    if a + b + c > steps {
                        continue;
                    }
                    let z = vec![
                        a as f64 / steps as f64,
                        b as f64 / steps as f64,
                        c as f64 / steps as f64,
                    ];
                    let d = dist(&z, &v);
                    if best.as_ref().map(|(bd, _)| d < *bd).unwrap_or(true) {
                        best = Some((d, z));
                    }
                }
            }
        }
        let (bd, bz) = best.unwrap();
        assert!(
            (dist(&dp, &v) - bd).abs() <= 1e-12,
            "dp {dp:?} vs brute {bz:?}"
        );
    }
}
