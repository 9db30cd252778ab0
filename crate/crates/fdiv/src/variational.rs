//! The variational lower bound, its Monte Carlo estimation, generator and
//! critic objectives, and gradient-matching verification.
//!
//! Sign conventions: the generator performs gradient *descent* on the
//! returned loss, the critic performs gradient *ascent* on its objective.
//! All per-sample derivatives come back ready for those directions, so the
//! trainer carries no divergence-specific logic.

use crate::dist::{integrate_over_pair, Critic, Density, Samples};
use crate::divergence::{Builtin, Divergence, DUAL_CLAMP};
use crate::quad::{self, QuadOptions};
use crate::util::{mean, pairwise_sum};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Saturating,
    NonSaturating,
}

/// A hybrid training scheme: the generator descends the divergence `generator`
/// (through b, or through a in non-saturating mode) while the critic ascends
/// the bound for `critic`. Non-saturating mode under critic divergence h is
/// behaviorally identical to saturating mode under `ns_partner(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub generator: Builtin,
    pub critic: Builtin,
    pub mode: Mode,
}

impl SchemeConfig {
    pub fn saturating(generator: Builtin, critic: Builtin) -> Self {
        SchemeConfig {
            generator,
            critic,
            mode: Mode::Saturating,
        }
    }

    pub fn non_saturating(h: Builtin) -> Self {
        SchemeConfig {
            generator: h,
            critic: h,
            mode: Mode::NonSaturating,
        }
    }

    /// The divergence this scheme actually minimizes.
    pub fn effective_divergence(&self) -> Divergence {
        match self.mode {
            Mode::Saturating => Divergence::builtin(self.generator),
            Mode::NonSaturating => {
                crate::algebra::ns_partner(&Divergence::builtin(self.generator))
            }
        }
    }
}

/// Monte Carlo estimate of the lower bound E(p, q, d).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub value: f64,
    /// Mean of a(d(x)) over p-samples.
    pub term_p: f64,
    /// Mean of b(d(x)) over q-samples.
    pub term_q: f64,
    pub n_p: usize,
    pub n_q: usize,
}

fn clamp_d(d: f64) -> f64 {
    d.clamp(-DUAL_CLAMP, DUAL_CLAMP)
}

/// E = mean_p[a(d(x))] - mean_q[b(d(x))] from samples through a critic.
/// Critic outputs are pinned to the dual-coordinate clamp range.
pub fn bound_estimate(
    div: &Divergence,
    samples_p: &Samples,
    samples_q: &Samples,
    critic: &dyn Critic,
) -> Result<BoundEstimate> {
    if samples_p.is_empty() || samples_q.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let a_vals: Vec<f64> = samples_p
        .iter()
        .map(|x| div.a(clamp_d(critic.value(x))))
        .collect();
    let b_vals: Vec<f64> = samples_q
        .iter()
        .map(|x| div.b(clamp_d(critic.value(x))))
        .collect();
    let term_p = mean(&a_vals);
    let term_q = mean(&b_vals);
    Ok(BoundEstimate {
        value: term_p - term_q,
        term_p,
        term_q,
        n_p: samples_p.len(),
        n_q: samples_q.len(),
    })
}

/// Deterministic quadrature evaluation of the bound (the noise-free backend
/// used for verification): int p(x) a(d(x)) dx - int q(x) b(d(x)) dx.
pub fn bound_quadrature(
    div: &Divergence,
    p: &Density,
    q: &Density,
    critic: &dyn Critic,
) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-9,
        rel_tol: 1e-10,
        max_intervals: 4096,
    };
    integrate_over_pair(p, q, opts, |x, lp, lq| {
        let d = clamp_d(critic.value(x));
        lp.exp() * div.a(d) - lq.exp() * div.b(d)
    })
}

/// Generator loss and its per-sample derivative with respect to the critic
/// values d_i = d(g(z_i)): saturating descends -mean b(d), non-saturating
/// descends -mean a(d).
pub fn generator_objective(
    div: &Divergence,
    mode: Mode,
    critic_values: &[f64],
) -> (f64, Vec<f64>) {
    let n = critic_values.len() as f64;
    match mode {
        Mode::Saturating => {
            let vals: Vec<f64> = critic_values.iter().map(|&d| div.b(clamp_d(d))).collect();
            let loss = -pairwise_sum(&vals) / n;
            let dloss = critic_values
                .iter()
                .map(|&d| -div.b_prime(clamp_d(d)) / n)
                .collect();
            (loss, dloss)
        }
        Mode::NonSaturating => {
            let vals: Vec<f64> = critic_values.iter().map(|&d| div.a(clamp_d(d))).collect();
            let loss = -pairwise_sum(&vals) / n;
            let dloss = critic_values
                .iter()
                .map(|&d| -div.a_prime(clamp_d(d)) / n)
                .collect();
            (loss, dloss)
        }
    }
}

/// Critic objective (to be ascended) and its per-sample d-gradients.
#[derive(Debug, Clone)]
pub struct CriticObjective {
    pub value: f64,
    pub grad_on_p: Vec<f64>,
    pub grad_on_q: Vec<f64>,
}

pub fn critic_objective(
    div: &Divergence,
    d_on_p: &[f64],
    d_on_q: &[f64],
) -> Result<CriticObjective> {
    if d_on_p.is_empty() || d_on_q.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_p = d_on_p.len() as f64;
    let n_q = d_on_q.len() as f64;
    let a_vals: Vec<f64> = d_on_p.iter().map(|&d| div.a(clamp_d(d))).collect();
    let b_vals: Vec<f64> = d_on_q.iter().map(|&d| div.b(clamp_d(d))).collect();
    let value = pairwise_sum(&a_vals) / n_p - pairwise_sum(&b_vals) / n_q;
    Ok(CriticObjective {
        value,
        grad_on_p: d_on_p
            .iter()
            .map(|&d| div.a_prime(clamp_d(d)) / n_p)
            .collect(),
        grad_on_q: d_on_q
            .iter()
            .map(|&d| -div.b_prime(clamp_d(d)) / n_q)
            .collect(),
    })
}

/// Two independent computations of the gradient of D(p, N(mu, sigma^2))
/// with respect to (mu, sigma).
#[derive(Debug, Clone, Copy)]
pub struct GradientMatch {
    /// Central finite differences of the quadrature divergence value.
    pub analytic: [f64; 2],
    /// Reparameterized variational gradient at the optimal critic,
    /// evaluated by quadrature over the noise variable.
    pub variational: [f64; 2],
    /// Max relative disagreement across the two components.
    pub discrepancy: f64,
}

pub fn gradient_matching_check(
    div: &Divergence,
    p: &Density,
    mu: f64,
    sigma: f64,
) -> Result<GradientMatch> {
    if !(sigma > 0.0) {
        return Err(Error::DomainError {
            what: "generator sigma",
            value: sigma,
        });
    }
    if p.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim(),
        });
    }

    let tight = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 8192,
    };
    let d_of = |m: f64, s: f64| -> Result<f64> {
        let q = Density::gaussian_1d(m, s * s)?;
        crate::dist::divergence_quadrature_opts(div, p, &q, tight)
    };
    let h = 1e-4;
    let analytic = [
        (d_of(mu + h, sigma)? - d_of(mu - h, sigma)?) / (2.0 * h),
        (d_of(mu, sigma + h)? - d_of(mu, sigma - h)?) / (2.0 * h),
    ];

    // Reparameterized gradient: x = mu + sigma z with z standard normal;
    // grad = -E_z[ b'(d*(x)) d*'(x) dx/dtheta ], evaluated by quadrature.
    let q = Density::gaussian_1d(mu, sigma * sigma)?;
    let critic = crate::dist::optimal_critic(p, &q)?;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let weighted = |z: f64| {
        let x = [mu + sigma * z];
        let d = clamp_d(critic.value(&x));
        let slope = critic.input_grad(&x)[0];
        -phi(z) * div.b_prime(d) * slope
    };
    let zopts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_intervals: 8192,
    };
    let grad_mu = quad::integrate(weighted, -12.0, 12.0, zopts)?.value;
    let grad_sigma = quad::integrate(|z| weighted(z) * z, -12.0, 12.0, zopts)?.value;
    let variational = [grad_mu, grad_sigma];

    let discrepancy = analytic
        .iter()
        .zip(&variational)
        .map(|(a, v)| (a - v).abs() / a.abs().max(v.abs()).max(1e-6))
        .fold(0.0, f64::max);
    Ok(GradientMatch {
        analytic,
        variational,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{divergence_quadrature, optimal_critic, OptimalCritic};
    use crate::util::rel_err;

    struct PerturbedCritic {
        base: OptimalCritic,
        offset: f64,
        scale: f64,
        wobble: f64,
    }

    impl Critic for PerturbedCritic {
        fn value(&self, x: &[f64]) -> f64 {
            self.scale * self.base.value(x) + self.offset + self.wobble * x[0].sin()
        }
        fn input_grad(&self, x: &[f64]) -> Vec<f64> {
            let mut g = self.base.input_grad(x);
            g[0] = self.scale * g[0] + self.wobble * x[0].cos();
            g
        }
    }

    struct ZeroCritic;
    impl Critic for ZeroCritic {
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn input_grad(&self, x: &[f64]) -> Vec<f64> {
            vec![0.0; x.len()]
        }
    }

    #[test]
    fn zero_critic_gives_exactly_zero_bound() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let q = Density::gaussian_1d(1.0, 1.0).unwrap();
        let sp = p.sample(1000, 1);
        let sq = q.sample(1000, 2);
        for b in [Builtin::Kl, Builtin::Rkl, Builtin::Jeffreys, Builtin::NeymannChi2] {
            let est =
                bound_estimate(&Divergence::builtin(b), &sp, &sq, &ZeroCritic).unwrap();
            assert_eq!(est.value, 0.0, "{b}");
        }
        for b in [Builtin::Js4, Builtin::Srkl, Builtin::Igog] {
            let est =
                bound_estimate(&Divergence::builtin(b), &sp, &sq, &ZeroCritic).unwrap();
            assert!(est.value.abs() < 1e-15, "{b}: {}", est.value);
        }
    }

    #[test]
    fn bound_estimate_rejects_empty_batches() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let empty = Samples {
            dim: 1,
            data: vec![],
        };
        let full = p.sample(10, 1);
        let div = Divergence::builtin(Builtin::Kl);
        assert!(bound_estimate(&div, &empty, &full, &ZeroCritic).is_err());
        assert!(bound_estimate(&div, &full, &empty, &ZeroCritic).is_err());
    }

    #[test]
    fn optimal_critic_makes_the_bound_tight_monte_carlo() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let q = Density::gaussian_1d(1.0, 1.0).unwrap();
        let critic = optimal_critic(&p, &q).unwrap();
        let js4 = Divergence::builtin(Builtin::Js4);
        let n = 1_000_000;
        let sp = p.sample(n, 10);
        let sq = q.sample(n, 11);
        let est = bound_estimate(&js4, &sp, &sq, &critic).unwrap();
        let exact = divergence_quadrature(&js4, &p, &q).unwrap();
        // Standard error of the estimator, from the sample variances.
        let a_var = {
            let vals: Vec<f64> = sp.iter().map(|x| js4.a(critic.value(x))).collect();
            let m = mean(&vals);
            mean(&vals.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>())
        };
        let b_var = {
            let vals: Vec<f64> = sq.iter().map(|x| js4.b(critic.value(x))).collect();
            let m = mean(&vals);
            mean(&vals.iter().map(|v| (v - m) * (v - m)).collect::<Vec<_>>())
        };
        let se = ((a_var + b_var) / n as f64).sqrt();
        assert!(
            (est.value - exact).abs() < 3.0 * se,
            "est {} exact {} se {}",
            est.value,
            exact,
            se
        );
        assert!((est.value - (est.term_p - est.term_q)).abs() < 1e-15);
    }

    #[test]
    fn perturbed_critic_sits_strictly_below_the_divergence() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let q = Density::gaussian_1d(1.0, 1.0).unwrap();
        let base = optimal_critic(&p, &q).unwrap();
        let critic = PerturbedCritic {
            base,
            offset: 0.0,
            scale: 1.0,
            wobble: 0.5,
        };
        let js4 = Divergence::builtin(Builtin::Js4);
        let exact = divergence_quadrature(&js4, &p, &q).unwrap();
        let bound = bound_quadrature(&js4, &p, &q, &critic).unwrap();
        assert!(bound < exact - 1e-3, "bound {bound} vs {exact}");
    }

    #[test]
    fn lower_bound_property_across_critics_and_divergences() {
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let q = Density::gaussian_1d(0.7, 1.69).unwrap();
        let perturbations: Vec<(f64, f64, f64)> = vec![
            (0.0, 1.0, 0.0),  // optimal
            (0.5, 1.0, 0.0),  // shifted
            (0.0, 0.7, 0.0),  // scaled
            (0.0, 1.0, 0.4),  // wobbled
            (-0.2, 1.1, 0.3), // all of it
        ];
        for b in Builtin::ALL {
            let div = Divergence::builtin(b);
            let exact = divergence_quadrature(&div, &p, &q).unwrap();
            for &(offset, scale, wobble) in &perturbations {
                let critic = PerturbedCritic {
                    base: optimal_critic(&p, &q).unwrap(),
                    offset,
                    scale,
                    wobble,
                };
                let bound = bound_quadrature(&div, &p, &q, &critic).unwrap();
                assert!(
                    bound <= exact + 1e-8,
                    "{b} with ({offset},{scale},{wobble}): {bound} > {exact}"
                );
                if offset == 0.0 && scale == 1.0 && wobble == 0.0 {
                    assert!((bound - exact).abs() < 1e-7, "{b}: tightness");
                }
            }
        }
    }

    #[test]
    fn optimal_critic_is_a_stationary_point() {
        // Directional derivative of the bound along sin(x) vanishes at d*.
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let q = Density::gaussian_1d(1.0, 1.0).unwrap();
        let js4 = Divergence::builtin(Builtin::Js4);
        let eps = 1e-4;
        let at = |t: f64| {
            let critic = PerturbedCritic {
                base: optimal_critic(&p, &q).unwrap(),
                offset: 0.0,
                scale: 1.0,
                wobble: t,
            };
            bound_quadrature(&js4, &p, &q, &critic).unwrap()
        };
        let deriv = (at(eps) - at(-eps)) / (2.0 * eps);
        assert!(deriv.abs() < 1e-6, "directional derivative {deriv}");
    }

    #[test]
    fn generator_objective_at_zero_critic() {
        let d = vec![0.0; 8];
        for b in Builtin::ALL {
            let div = Divergence::builtin(b);
            let (loss, grads) = generator_objective(&div, Mode::Saturating, &d);
            assert!(loss.abs() < 1e-15, "{b}");
            for g in &grads {
                // b'(0) = 1 for canonical divergences.
                assert!((g + 1.0 / 8.0).abs() < 1e-15, "{b}: {g}");
            }
        }
    }

    #[test]
    fn generator_objective_js4_non_saturating_values() {
        let js4 = Divergence::builtin(Builtin::Js4);
        let (loss, grads) = generator_objective(&js4, Mode::NonSaturating, &[2.0]);
        // a(2) = 2 ln sigma(2) + 2 ln 2, computed independently.
        let sig2 = 1.0 / (1.0 + (-2.0f64).exp());
        let expected = -(2.0 * sig2.ln() + 2.0 * std::f64::consts::LN_2);
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((loss + 1.1324383390339453).abs() < 1e-12);
        let expected_grad = -2.0 / (1.0 + 2.0f64.exp());
        assert!((grads[0] - expected_grad).abs() < 1e-12);
        assert!((grads[0] + 0.23840584404423515).abs() < 1e-10);
    }

    #[test]
    fn non_saturating_equals_saturating_under_the_partner() {
        let js4 = Divergence::builtin(Builtin::Js4);
        let srkl = Divergence::builtin(Builtin::Srkl);
        let ds: Vec<f64> = (-30..=30).map(|i| 0.1 * i as f64).collect();
        let (loss_ns, grads_ns) = generator_objective(&js4, Mode::NonSaturating, &ds);
        let (loss_sat, grads_sat) = generator_objective(&srkl, Mode::Saturating, &ds);
        assert_eq!(loss_ns.to_bits(), loss_sat.to_bits());
        for (a, b) in grads_ns.iter().zip(&grads_sat) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ns_equivalence_for_every_builtin_partner() {
        for h in Builtin::ALL {
            let hdiv = Divergence::builtin(h);
            let partner = crate::algebra::ns_partner(&hdiv);
            let ds: Vec<f64> = (-20..=20).map(|i| 0.5 * i as f64).collect();
            let (_, ns) = generator_objective(&hdiv, Mode::NonSaturating, &ds);
            let (_, sat) = generator_objective(&partner, Mode::Saturating, &ds);
            for (i, (a, b)) in ns.iter().zip(&sat).enumerate() {
                assert!(
                    (a - b).abs() <= 1e-12 * a.abs().max(1e-12),
                    "{h} at d={}: {a} vs {b}",
                    ds[i]
                );
            }
        }
    }

    #[test]
    fn critic_objective_known_values() {
        let rkl = Divergence::builtin(Builtin::Rkl);
        let co = critic_objective(&rkl, &[-1.0], &[-1.0]).unwrap();
        // a(-1) = 1 - e, b(-1) = -1.
        let e = std::f64::consts::E;
        assert!((co.value - (2.0 - e)).abs() < 1e-14);
        assert!((co.grad_on_p[0] - e).abs() < 1e-14);
        assert!((co.grad_on_q[0] + 1.0).abs() < 1e-14);

        // Zero critic on canonical divergences.
        let js4 = Divergence::builtin(Builtin::Js4);
        let co = critic_objective(&js4, &[0.0; 4], &[0.0; 2]).unwrap();
        assert!(co.value.abs() < 1e-15);
        for g in &co.grad_on_p {
            assert!((g - 0.25).abs() < 1e-15);
        }
        for g in &co.grad_on_q {
            assert!((g + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn single_critic_monitors_many_divergences() {
        let p = Density::toy_mixture_1d();
        let q = Density::gaussian_1d(1.8, 1.8 * 1.8).unwrap();
        let critic = optimal_critic(&p, &q).unwrap();
        let n = 400_000;
        let sp = p.sample(n, 21);
        let sq = q.sample(n, 22);
        for b in [Builtin::Kl, Builtin::Rkl, Builtin::Srkl, Builtin::Js4] {
            let div = Divergence::builtin(b);
            let est = bound_estimate(&div, &sp, &sq, &critic).unwrap();
            let exact = divergence_quadrature(&div, &p, &q).unwrap();
            let se = {
                let a_vals: Vec<f64> = sp.iter().map(|x| div.a(critic.value(x))).collect();
                let b_vals: Vec<f64> = sq.iter().map(|x| div.b(critic.value(x))).collect();
                let (ma, mb) = (mean(&a_vals), mean(&b_vals));
                let va = mean(&a_vals.iter().map(|v| (v - ma) * (v - ma)).collect::<Vec<_>>());
                let vb = mean(&b_vals.iter().map(|v| (v - mb) * (v - mb)).collect::<Vec<_>>());
                ((va + vb) / n as f64).sqrt()
            };
            assert!(
                (est.value - exact).abs() < 4.0 * se,
                "{b}: est {} exact {} se {}",
                est.value,
                exact,
                se
            );
        }
    }

    #[test]
    fn gradient_matching_at_a_representable_optimum() {
        let p = Density::gaussian_1d(0.7, 1.21).unwrap();
        let gm = gradient_matching_check(
            &Divergence::builtin(Builtin::Js4),
            &p,
            0.7,
            1.1,
        )
        .unwrap();
        for i in 0..2 {
            assert!(gm.analytic[i].abs() < 1e-6, "analytic {:?}", gm.analytic);
            assert!(gm.variational[i].abs() < 1e-6, "variational {:?}", gm.variational);
        }
    }

    #[test]
    fn gradient_matching_on_the_toy_mixture() {
        let p = Density::toy_mixture_1d();
        for b in [Builtin::Js4, Builtin::Srkl] {
            let gm =
                gradient_matching_check(&Divergence::builtin(b), &p, 1.8, 1.8).unwrap();
            assert!(gm.discrepancy < 1e-4, "{b}: {:?}", gm);
        }
        // The saturating (JS4) and non-saturating (SRKL) gradient directions
        // differ by more than a degree at this point.
        let g_js4 = gradient_matching_check(&Divergence::builtin(Builtin::Js4), &p, 1.8, 1.8)
            .unwrap()
            .variational;
        let g_srkl = gradient_matching_check(&Divergence::builtin(Builtin::Srkl), &p, 1.8, 1.8)
            .unwrap()
            .variational;
        let dot = g_js4[0] * g_srkl[0] + g_js4[1] * g_srkl[1];
        let cos = dot
            / (g_js4[0].hypot(g_js4[1]) * g_srkl[0].hypot(g_srkl[1]));
        let angle_deg = cos.clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle_deg > 1.0, "angle only {angle_deg} degrees");
    }

    #[test]
    fn gradient_matching_rejects_bad_sigma() {
        let p = Density::toy_mixture_1d();
        assert!(
            gradient_matching_check(&Divergence::builtin(Builtin::Kl), &p, 1.0, 0.0).is_err()
        );
    }

    #[test]
    fn kl_gradient_matches_its_closed_form() {
        // D_KL(N(0,1), N(mu, s^2)) = ln s + (1 + mu^2)/(2 s^2) - 1/2.
        let p = Density::gaussian_1d(0.0, 1.0).unwrap();
        let (mu, sigma) = (1.8, 1.8);
        let gm =
            gradient_matching_check(&Divergence::builtin(Builtin::Kl), &p, mu, sigma).unwrap();
        let expect_mu = mu / (sigma * sigma);
        let expect_sigma = 1.0 / sigma - (1.0 + mu * mu) / (sigma * sigma * sigma);
        assert!(rel_err(gm.analytic[0], expect_mu, 1e-9) < 1e-6, "{:?}", gm);
        assert!(rel_err(gm.analytic[1], expect_sigma, 1e-9) < 1e-6, "{:?}", gm);
        assert!(gm.discrepancy < 1e-6, "{:?}", gm);
    }
}
