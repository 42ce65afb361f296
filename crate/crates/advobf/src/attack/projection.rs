//! Euclidean projections onto the two constraint sets, solved by bisection
//! on a scalar root equation.
//!
//! Both feasible sets decompose the joint projection: the site-selection
//! vector lands in the capped box `{z in [0,1]^n : sum z <= k}`, each
//! perturbation row on the probability simplex. The scalar equations are
//! piecewise linear in the shift, so after the bisection bracket is narrow
//! a final exact solve on the active linear piece drives the residual to
//! machine precision without extra halvings.

pub const ROOT_TOL: f64 = 1e-10;

/// Diagnostics from one bisection solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStats {
    /// Halving steps performed.
    pub iterations: usize,
    /// ceil(log2(initial bracket / tolerance)): the spec'd iteration bound.
    pub bound: usize,
    /// |g(root)| at the returned root.
    pub residual: f64,
}

fn linear_root(a: f64, ga: f64, b: f64, gb: f64) -> f64 {
    if ga == gb {
        return a;
    }
    a + ga * (b - a) / (ga - gb)
}

/// Find the root of a non-increasing piecewise-linear `g` on `[lo, hi]`
/// with `g(lo) >= 0 >= g(hi)`. `breakpoints` are the kink locations of g.
fn bisect<F: Fn(f64) -> f64>(
    g: F,
    mut lo: f64,
    mut hi: f64,
    breakpoints: &[f64],
    tol: f64,
) -> (f64, BisectionStats) {
    let range = hi - lo;
    let bound = if range > tol {
        (range / tol).log2().ceil() as usize
    } else {
        0
    };
    let mut iterations = 0;
    while iterations < bound && hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.abs() <= tol {
            return (
                mid,
                BisectionStats {
                    iterations: iterations + 1,
                    bound,
                    residual: gm.abs(),
                },
            );
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    // the bracket is narrow; finish exactly on the linear piece that
    // crosses zero
    let mut pts = vec![lo];
    let mut kinks: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > lo && b < hi)
        .collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    pts.extend(kinks);
    pts.push(hi);
    let vals: Vec<f64> = pts.iter().map(|&p| g(p)).collect();
    for w in 0..pts.len() - 1 {
        let (a, ga, b, gb) = (pts[w], vals[w], pts[w + 1], vals[w + 1]);
        if ga >= 0.0 && gb <= 0.0 {
            let root = linear_root(a, ga, b, gb);
            return (
                root,
                BisectionStats {
                    iterations,
                    bound,
                    residual: g(root).abs(),
                },
            );
        }
    }
    // g never changed sign inside the bracket (numerically flat): take
    // the midpoint
    let mid = 0.5 * (lo + hi);
    (
        mid,
        BisectionStats {
            iterations,
            bound,
            residual: g(mid).abs(),
        },
    )
}

fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Projection onto `{z in [0,1]^n : sum z <= k}`. Returns bisection stats
/// when the sum constraint was active.
pub fn project_z_stats(v: &[f64], k: f64) -> (Vec<f64>, Option<BisectionStats>) {
    let clipped: Vec<f64> = v.iter().map(|&x| clip01(x)).collect();
    let sum: f64 = clipped.iter().sum();
    if sum <= k + 1e-9 {
        return (clipped, None);
    }
    // root of sum(clip(v - tau)) = k; tau in (0, max(v)]
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g = |tau: f64| -> f64 { v.iter().map(|&x| clip01(x - tau)).sum::<f64>() - k };
    let mut breakpoints = Vec::with_capacity(2 * v.len());
    for &x in v {
        breakpoints.push(x);
        breakpoints.push(x - 1.0);
    }
    let (tau, stats) = bisect(g, 0.0, hi, &breakpoints, ROOT_TOL);
    let z = v.iter().map(|&x| clip01(x - tau)).collect();
    (z, Some(stats))
}

/// Euclidean projection onto `{z in [0,1]^n : sum z <= k}`.
pub fn project_z(v: &[f64], k: f64) -> Vec<f64> {
    project_z_stats(v, k).0
}

/// Projection onto the probability simplex `{u >= 0, sum u = 1}`.
pub fn project_simplex_stats(v: &[f64]) -> (Vec<f64>, Option<BisectionStats>) {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= 1e-9 {
        return (v.to_vec(), None);
    }
    // root of sum(max(v - mu, 0)) = 1; mu in [max(v) - 1, max(v)]
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g = |mu: f64| -> f64 { v.iter().map(|&x| (x - mu).max(0.0)).sum::<f64>() - 1.0 };
    let (mu, stats) = bisect(g, hi - 1.0, hi, v, ROOT_TOL);
    let u = v.iter().map(|&x| (x - mu).max(0.0)).collect();
    (u, Some(stats))
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    project_simplex_stats(v).0
}

/// Project the masked coordinates of a full-width row onto the simplex,
/// forcing everything off-mask to zero.
pub fn project_simplex_masked(row: &mut [f64], mask: &[usize]) -> Option<BisectionStats> {
    let sub: Vec<f64> = mask.iter().map(|&j| row[j]).collect();
    let (projected, stats) = project_simplex_stats(&sub);
    for x in row.iter_mut() {
        *x = 0.0;
    }
    for (&j, &p) in mask.iter().zip(&projected) {
        row[j] = p;
    }
    stats
}
