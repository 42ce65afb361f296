//! The classical sort-and-threshold simplex projection, independent of the
//! bisection path it verifies.

/// Exact Euclidean projection of `v` onto `{u >= 0, sum u = 1}`.
pub fn sort_simplex_oracle(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty());
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = 0.0;
    let mut rho = 0usize;
    let mut theta = 0.0;
    for (j, &w) in sorted.iter().enumerate() {
        cumsum += w;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if w - candidate > 0.0 {
            rho = j + 1;
            theta = candidate;
        }
    }
    debug_assert!(rho >= 1);
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_simplex_is_fixed() {
        assert_eq!(sort_simplex_oracle(&[0.2, 0.8]), vec![0.2, 0.8]);
    }

    #[test]
    fn symmetric_input_spreads_evenly() {
        let u = sort_simplex_oracle(&[0.0, 0.0, 0.0]);
        for x in &u {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn known_threshold() {
        let u = sort_simplex_oracle(&[1.2, 0.3, -0.5]);
        assert!((u[0] - 0.95).abs() < 1e-12);
        assert!((u[1] - 0.05).abs() < 1e-12);
        assert_eq!(u[2], 0.0);
    }

    #[test]
    fn output_is_always_feasible() {
        let cases: &[&[f64]] = &[
            &[-5.0, -6.0],
            &[100.0, 0.0, -100.0],
            &[0.5],
            &[2.0, 2.0, 2.0, 2.0],
        ];
        for v in cases {
            let u = sort_simplex_oracle(v);
            let sum: f64 = u.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{v:?} -> {u:?}");
            assert!(u.iter().all(|&x| x >= 0.0));
        }
    }
}
