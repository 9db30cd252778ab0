//! Pushforward densities of p and q through a critic: the distribution of
//! critic outputs d(x) under x ~ p and x ~ q. At the optimal critic the two
//! satisfy q~(d) = p~(d) e^-d, and any f-divergence reduces to the
//! one-dimensional integral of max(p~, q~) times the s-curve.

use crate::dist::{Critic, Density};
use crate::divergence::Divergence;
use crate::quad::QuadOptions;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushforwardHistogram {
    /// bins + 1 edges on the d axis.
    pub bin_edges: Vec<f64>,
    /// Normalized density of d(x), x ~ p.
    pub p_density: Vec<f64>,
    /// Normalized density of d(x), x ~ q.
    pub q_density: Vec<f64>,
    pub p_counts: Vec<u64>,
    pub q_counts: Vec<u64>,
    /// Samples drawn from each of p and q.
    pub n_samples: usize,
    /// Set when all critic outputs coincided and a single synthetic bin was
    /// used.
    pub degenerate: bool,
}

impl PushforwardHistogram {
    pub fn bins(&self) -> usize {
        self.p_density.len()
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }
}

/// Histogram the critic outputs of `n` samples from each of p and q over a
/// common binning spanning the observed range padded by 5%.
pub fn pushforward_empirical(
    p: &Density,
    q: &Density,
    critic: &dyn Critic,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<PushforwardHistogram> {
    if bins == 0 || n < bins {
        return Err(Error::InvalidConfig {
            reason: format!("need n >= bins >= 1, got n = {n}, bins = {bins}"),
        });
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mut rng = crate::rng::seeded(seed);
    let sp = p.sample_with(&mut rng, n);
    let sq = q.sample_with(&mut rng, n);
    let d_p: Vec<f64> = sp.iter().map(|x| critic.value(x)).collect();
    let d_q: Vec<f64> = sq.iter().map(|x| critic.value(x)).collect();

    let lo = d_p
        .iter()
        .chain(&d_q)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = d_p
        .iter()
        .chain(&d_q)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let (edges, bins, degenerate) = if span == 0.0 {
        (vec![lo - 0.5, lo + 0.5], 1, true)
    } else {
        let pad = 0.05 * span;
        let (lo, hi) = (lo - pad, hi + pad);
        let w = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + w * i as f64).collect();
        edges[bins] = hi;
        (edges, bins, false)
    };

    let lo = edges[0];
    let hi = *edges.last().unwrap();
    let width = (hi - lo) / bins as f64;
    let mut p_counts = vec![0u64; bins];
    let mut q_counts = vec![0u64; bins];
    for &d in &d_p {
        let idx = (((d - lo) / width) as usize).min(bins - 1);
        p_counts[idx] += 1;
    }
    for &d in &d_q {
        let idx = (((d - lo) / width) as usize).min(bins - 1);
        q_counts[idx] += 1;
    }
    let norm = 1.0 / (n as f64 * width);
    Ok(PushforwardHistogram {
        bin_edges: edges,
        p_density: p_counts.iter().map(|&c| c as f64 * norm).collect(),
        q_density: q_counts.iter().map(|&c| c as f64 * norm).collect(),
        p_counts,
        q_counts,
        n_samples: n,
        degenerate,
    })
}

/// Closed-form pushforwards for Gaussians p, q with common covariance and
/// squared Mahalanobis distance `sigma2` between the means:
/// p~ = N(sigma2/2, sigma2) and q~ = N(-sigma2/2, sigma2).
pub fn pushforward_gaussian_closed_form(sigma2: f64) -> Result<(Density, Density)> {
    if !(sigma2 > 0.0) {
        return Err(Error::DomainError {
            what: "squared Mahalanobis distance",
            value: sigma2,
        });
    }
    let p_tilde = Density::gaussian_1d(0.5 * sigma2, sigma2)?;
    let q_tilde = Density::gaussian_1d(-0.5 * sigma2, sigma2)?;
    Ok((p_tilde, q_tilde))
}

pub enum PushforwardInput<'a> {
    /// Analytic 1D pushforward densities (p~, q~).
    ClosedForm {
        p_tilde: &'a Density,
        q_tilde: &'a Density,
    },
    Histogram(&'a PushforwardHistogram),
}

/// D_f recovered from pushforwards via the one-dimensional integral of
/// max(p~, q~) s_f: adaptive quadrature for closed forms, bin sums (bins
/// treated as piecewise-constant densities) for histograms.
pub fn divergence_from_pushforward(div: &Divergence, input: PushforwardInput) -> Result<f64> {
    match input {
        PushforwardInput::ClosedForm { p_tilde, q_tilde } => {
            if p_tilde.dim() != 1 || q_tilde.dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: p_tilde.dim().max(q_tilde.dim()),
                });
            }
            let opts = QuadOptions {
                abs_tol: 1e-10,
                rel_tol: 1e-10,
                max_intervals: 4096,
            };
            crate::dist::integrate_over_pair(p_tilde, q_tilde, opts, |x, lp, lq| {
                let s = div.s_curve(x[0]);
                if s == 0.0 {
                    0.0
                } else {
                    lp.max(lq).exp() * s
                }
            })
        }
        PushforwardInput::Histogram(h) => {
            let w = h.bin_width();
            Ok((0..h.bins())
                .map(|i| h.p_density[i].max(h.q_density[i]) * div.s_curve(h.bin_center(i)) * w)
                .sum())
        }
    }
}

/// Indices of strict interior local maxima with height at least
/// `min_height`.
pub fn local_maxima(values: &[f64], min_height: f64) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| {
            values[i] > values[i - 1] && values[i] > values[i + 1] && values[i] >= min_height
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{divergence_quadrature, optimal_critic};
    use crate::divergence::Builtin;

    #[test]
    fn closed_form_matches_the_stated_gaussians() {
        let (p_tilde, q_tilde) = pushforward_gaussian_closed_form(1.0).unwrap();
        assert_eq!(p_tilde.mean()[0], 0.5);
        assert_eq!(q_tilde.mean()[0], -0.5);
        assert_eq!(p_tilde.covariance()[0], 1.0);
        assert!(pushforward_gaussian_closed_form(0.0).is_err());
        // sigma2 -> 0 collapses both toward a point mass at 0.
        let (p0, q0) = pushforward_gaussian_closed_form(1e-8).unwrap();
        assert!(p0.mean()[0].abs() < 1e-8 && q0.mean()[0].abs() < 1e-8);
        assert!(p0.covariance()[0] < 1e-7 && q0.covariance()[0] < 1e-7);
    }

    #[test]
    fn pushforward_ratio_identity_closed_form() {
        let (p_tilde, q_tilde) = pushforward_gaussian_closed_form(1.0).unwrap();
        for i in -50..=50 {
            let d = 0.1 * i as f64;
            let lhs = p_tilde.logp(&[d]).exp() * (-d).exp();
            let rhs = q_tilde.logp(&[d]).exp();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-12),
                "at d={d}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn closed_form_integral_reproduces_the_divergence() {
        // sigma2 = 1 corresponds to e.g. p = N(1,1), q = N(0,1).
        let p = Density::gaussian_1d(1.0, 1.0).unwrap();
        let q = Density::gaussian_1d(0.0, 1.0).unwrap();
        let (p_tilde, q_tilde) = pushforward_gaussian_closed_form(1.0).unwrap();
        for b in Builtin::ALL {
            let div = Divergence::builtin(b);
            let direct = divergence_quadrature(&div, &p, &q).unwrap();
            let via_pushforward = divergence_from_pushforward(
                &div,
                PushforwardInput::ClosedForm {
                    p_tilde: &p_tilde,
                    q_tilde: &q_tilde,
                },
            )
            .unwrap();
            assert!(
                (direct - via_pushforward).abs() < 1e-6,
                "{b}: {direct} vs {via_pushforward}"
            );
        }
        let kl = Divergence::builtin(Builtin::Kl);
        let v = divergence_from_pushforward(
            &kl,
            PushforwardInput::ClosedForm {
                p_tilde: &p_tilde,
                q_tilde: &q_tilde,
            },
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-8);
    }

    #[test]
    fn max_form_equals_the_split_form() {
        let (p_tilde, q_tilde) = pushforward_gaussian_closed_form(2.0).unwrap();
        let opts = QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_intervals: 4096,
        };
        for b in [Builtin::Kl, Builtin::Js4, Builtin::Srkl] {
            let div = Divergence::builtin(b);
            let max_form = divergence_from_pushforward(
                &div,
                PushforwardInput::ClosedForm {
                    p_tilde: &p_tilde,
                    q_tilde: &q_tilde,
                },
            )
            .unwrap();
            // Split form: q~ s on d < 0 plus p~ s on d > 0.
            let split = crate::dist::integrate_over_pair(&p_tilde, &q_tilde, opts, |x, lp, lq| {
                let d = x[0];
                let s = div.s_curve(d);
                if d <= 0.0 {
                    lq.exp() * s
                } else {
                    lp.exp() * s
                }
            })
            .unwrap();
            assert!((max_form - split).abs() < 1e-9, "{b}: {max_form} vs {split}");
        }
    }

    #[test]
    fn point_mass_pushforward_is_zero() {
        // p = q through the (zero) optimal critic: everything lands at 0.
        let p = Density::gaussian_1d(0.3, 2.0).unwrap();
        let critic = optimal_critic(&p, &p).unwrap();
        let h = pushforward_empirical(&p, &p, &critic, 5_000, 50, 4).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.bins(), 1);
        assert_eq!(h.p_counts[0], 5_000);
        assert_eq!(h.q_counts[0], 5_000);
        let kl = Divergence::builtin(Builtin::Kl);
        let v = divergence_from_pushforward(&kl, PushforwardInput::Histogram(&h)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn empirical_pushforward_moments() {
        // q~ for p = N(1,1), q = N(0,1) is N(-1/2, 1).
        let p = Density::gaussian_1d(1.0, 1.0).unwrap();
        let q = Density::gaussian_1d(0.0, 1.0).unwrap();
        let critic = optimal_critic(&p, &q).unwrap();
        let n = 200_000;
        let h = pushforward_empirical(&p, &q, &critic, n, 80, 12).unwrap();
        assert!(!h.degenerate);
        let w = h.bin_width();
        let mean_q: f64 = (0..h.bins())
            .map(|i| h.bin_center(i) * h.q_density[i] * w)
            .sum();
        let var_q: f64 = (0..h.bins())
            .map(|i| {
                let c = h.bin_center(i) - mean_q;
                c * c * h.q_density[i] * w
            })
            .sum();
        assert!((mean_q + 0.5).abs() < 0.01, "mean {mean_q}");
        assert!((var_q - 1.0).abs() < 0.02, "var {var_q}");
        // Each histogram integrates to ~1.
        let mass_p: f64 = h.p_density.iter().map(|d| d * w).sum();
        assert!((mass_p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_ratio_identity_on_well_populated_bins() {
        let p = Density::gaussian_1d(1.0, 1.0).unwrap();
        let q = Density::gaussian_1d(0.0, 1.0).unwrap();
        let critic = optimal_critic(&p, &q).unwrap();
        let h = pushforward_empirical(&p, &q, &critic, 1_000_000, 100, 3).unwrap();
        let mut checked = 0;
        for i in 0..h.bins() {
            if h.p_counts[i] >= 100 && h.q_counts[i] >= 100 {
                let ratio = h.q_density[i] / (h.p_density[i] * (-h.bin_center(i)).exp());
                assert!(
                    (ratio - 1.0).abs() < 0.2,
                    "bin {i} (d = {}): ratio {ratio}",
                    h.bin_center(i)
                );
                checked += 1;
            }
        }
        assert!(checked > 20, "only {checked} well-populated bins");
    }

    #[test]
    fn histogram_divergence_tracks_the_quadrature_value() {
        let p = Density::gaussian_1d(1.0, 1.0).unwrap();
        let q = Density::gaussian_1d(0.0, 1.0).unwrap();
        let critic = optimal_critic(&p, &q).unwrap();
        let h = pushforward_empirical(&p, &q, &critic, 1_000_000, 100, 5).unwrap();
        let js4 = Divergence::builtin(Builtin::Js4);
        let est = divergence_from_pushforward(&js4, PushforwardInput::Histogram(&h)).unwrap();
        let exact = divergence_quadrature(&js4, &p, &q).unwrap();
        assert!((est - exact).abs() < 0.01, "{est} vs {exact}");
    }

    #[test]
    fn pushforward_rejects_undersized_requests() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let critic = optimal_critic(&p, &p).unwrap();
        assert!(pushforward_empirical(&p, &p, &critic, 10, 20, 0).is_err());
        assert!(pushforward_empirical(&p, &p, &critic, 10, 0, 0).is_err());
    }

    #[test]
    fn local_maxima_detection() {
        let vals = [0.0, 1.0, 0.5, 2.0, 0.1, 0.05, 3.0, 0.0];
        assert_eq!(local_maxima(&vals, 0.0), vec![1, 3, 6]);
        assert_eq!(local_maxima(&vals, 1.5), vec![3, 6]);
        assert!(local_maxima(&[1.0, 2.0], 0.0).is_empty());
    }
}
