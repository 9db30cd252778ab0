//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. Bit-stable under a fixed element order and
/// more accurate than a running sum for long batches.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Logistic sigmoid, stable on both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// |a - b| / max(|a|, |b|, floor).
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_on_ones() {
        let xs = vec![1.0; 1000];
        assert_eq!(pairwise_sum(&xs), 1000.0);
    }

    #[test]
    fn pairwise_beats_naive_on_alternating_magnitudes() {
        let mut xs = Vec::new();
        for i in 0..10_000 {
            xs.push(1.0 + (i as f64) * 1e-12);
        }
        let exact = 10_000.0 + 1e-12 * (9999.0 * 10_000.0 / 2.0);
        assert!((pairwise_sum(&xs) - exact).abs() < 1e-9);
    }

    #[test]
    fn linspace_endpoints() {
        let xs = linspace(-8.0, 8.0, 401);
        assert_eq!(xs.len(), 401);
        assert_eq!(xs[0], -8.0);
        assert_eq!(xs[400], 8.0);
    }

    #[test]
    fn sigmoid_tails() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn softplus_identities() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        // softplus(x) - x = softplus(-x)
        for &x in &[-30.0, -2.0, 0.3, 5.0, 40.0] {
            assert!((softplus(x) - x - softplus(-x)).abs() < 1e-15);
        }
    }
}
