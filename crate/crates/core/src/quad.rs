//! Composite Simpson quadrature on uniform nodes.

/// Simpson weights for `n` nodes (n odd, ≥ 3) spaced by `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "Simpson rule needs an odd node count ≥ 3");
    let mut w = vec![0.0; n];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}

/// Uniform nodes on [a, b].
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|k| a + h * k as f64).collect()
}

/// Integrates `f` over [a, b] with `n` Simpson nodes (rounded up to odd).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n + 1 } else { n.max(3) };
    let h = (b - a) / (n - 1) as f64;
    simpson_weights(n, h)
        .iter()
        .enumerate()
        .map(|(k, w)| w * f(a + h * k as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 3);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-12);
    }
}
