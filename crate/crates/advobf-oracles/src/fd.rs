//! Central finite-difference gradients.

/// Central-difference gradient estimate of `f` at `x` with step `h`.
pub fn fd_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0);
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_to_second_order() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1] * x[1] - 2.0 * x[0] * x[1];
        let g = fd_gradient(f, &[1.5, -0.5], 1e-4);
        // exact gradient: (2x - 2y, 6y - 2x)
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - (-6.0)).abs() < 1e-8);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = fd_gradient(|_| 7.25, &[0.3, 0.4, 0.5], 1e-4);
        assert!(g.iter().all(|&x| x == 0.0));
    }
}
