//! Analytic densities (1D/2D Gaussians and mixtures), sampling, optimal
//! critics, quadrature-based exact divergence evaluation, the two-point
//! discrete construction, and closed-form / numeric Gaussian fits.

use crate::divergence::Divergence;
use crate::quad::{self, QuadOptions};
use crate::rng::{seeded, standard_normal};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Integration boxes cover all component means plus/minus this many
/// per-axis standard deviations; Gaussian mass beyond is < 1e-20.
pub const SUPPORT_SIGMAS: f64 = 10.0;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Density

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityKind {
    #[serde(rename = "gaussian1d")]
    Gaussian1d,
    #[serde(rename = "gaussian_mixture_1d")]
    GaussianMixture1d,
    #[serde(rename = "gaussian2d")]
    Gaussian2d,
    #[serde(rename = "gaussian_mixture_2d")]
    GaussianMixture2d,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// The on-disk density schema: `{kind, components: [{weight, mean, cov}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensitySpec {
    pub kind: DensityKind,
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone)]
struct Comp {
    weight: f64,
    log_weight: f64,
    mean: Vec<f64>,
    /// Row-major dim x dim covariance.
    cov: Vec<f64>,
    inv: Vec<f64>,
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    /// -0.5 (k ln 2pi + ln det).
    log_norm: f64,
    /// Square roots of the covariance diagonal, for support boxes.
    sigma_axes: Vec<f64>,
}

/// An analytic probability density: a Gaussian mixture over R or R^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DensitySpec", into = "DensitySpec")]
pub struct Density {
    dim: usize,
    comps: Vec<Comp>,
}

fn make_comp(weight: f64, mean: Vec<f64>, cov_rows: Vec<Vec<f64>>) -> Result<Comp> {
    let dim = mean.len();
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidDensity {
            reason: format!("only 1D and 2D densities are supported, got dim {dim}"),
        });
    }
    if !(weight > 0.0) {
        return Err(Error::InvalidDensity {
            reason: format!("component weight must be positive, got {weight}"),
        });
    }
    if cov_rows.len() != dim || cov_rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidDensity {
            reason: "covariance shape does not match mean dimension".into(),
        });
    }
    let mut cov = vec![0.0; dim * dim];
    for (i, row) in cov_rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cov[i * dim + j] = v;
        }
    }

    let (inv, chol, log_det) = if dim == 1 {
        let v = cov[0];
        if !(v > 0.0) {
            return Err(Error::InvalidDensity {
                reason: format!("variance must be positive, got {v}"),
            });
        }
        (vec![1.0 / v], vec![v.sqrt()], v.ln())
    } else {
        let (a, b, b2, c) = (cov[0], cov[1], cov[2], cov[3]);
        if (b - b2).abs() > 1e-12 * (1.0 + b.abs()) {
            return Err(Error::InvalidDensity {
                reason: format!("covariance must be symmetric, got {b} vs {b2}"),
            });
        }
        let det = a * c - b * b;
        if !(a > 0.0) || !(det > 0.0) {
            return Err(Error::InvalidDensity {
                reason: format!("covariance must be positive-definite (a={a}, det={det})"),
            });
        }
        let inv = vec![c / det, -b / det, -b / det, a / det];
        let l00 = a.sqrt();
        let l10 = b / l00;
        let l11 = (c - l10 * l10).sqrt();
        (inv, vec![l00, 0.0, l10, l11], det.ln())
    };

    let sigma_axes = (0..dim).map(|i| cov[i * dim + i].sqrt()).collect();
    Ok(Comp {
        weight,
        log_weight: weight.ln(),
        mean,
        cov,
        inv,
        chol,
        log_norm: -0.5 * (dim as f64 * TWO_PI.ln() + log_det),
        sigma_axes,
    })
}

impl TryFrom<DensitySpec> for Density {
    type Error = Error;

    fn try_from(spec: DensitySpec) -> Result<Density> {
        let expected_dim = match spec.kind {
            DensityKind::Gaussian1d | DensityKind::GaussianMixture1d => 1,
            DensityKind::Gaussian2d | DensityKind::GaussianMixture2d => 2,
        };
        if spec.components.is_empty() {
            return Err(Error::InvalidDensity {
                reason: "density needs at least one component".into(),
            });
        }
        if matches!(spec.kind, DensityKind::Gaussian1d | DensityKind::Gaussian2d)
            && spec.components.len() != 1
        {
            return Err(Error::InvalidDensity {
                reason: "non-mixture kinds take exactly one component".into(),
            });
        }
        let comps: Vec<Comp> = spec
            .components
            .into_iter()
            .map(|c| make_comp(c.weight, c.mean, c.cov))
            .collect::<Result<_>>()?;
        if comps.iter().any(|c| c.mean.len() != expected_dim) {
            return Err(Error::InvalidDensity {
                reason: "component dimension does not match kind".into(),
            });
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity {
                reason: format!("weights must sum to 1, got {total}"),
            });
        }
        Ok(Density {
            dim: expected_dim,
            comps,
        })
    }
}

impl From<Density> for DensitySpec {
    fn from(d: Density) -> DensitySpec {
        let kind = match (d.dim, d.comps.len()) {
            (1, 1) => DensityKind::Gaussian1d,
            (1, _) => DensityKind::GaussianMixture1d,
            (_, 1) => DensityKind::Gaussian2d,
            _ => DensityKind::GaussianMixture2d,
        };
        DensitySpec {
            kind,
            components: d
                .comps
                .iter()
                .map(|c| ComponentSpec {
                    weight: c.weight,
                    mean: c.mean.clone(),
                    cov: (0..d.dim)
                        .map(|i| c.cov[i * d.dim..(i + 1) * d.dim].to_vec())
                        .collect(),
                })
                .collect(),
        }
    }
}

impl Density {
    pub fn gaussian_1d(mean: f64, var: f64) -> Result<Density> {
        Ok(Density {
            dim: 1,
            comps: vec![make_comp(1.0, vec![mean], vec![vec![var]])?],
        })
    }

    pub fn mixture_1d(parts: &[(f64, f64, f64)]) -> Result<Density> {
        let comps: Vec<Comp> = parts
            .iter()
            .map(|&(w, m, v)| make_comp(w, vec![m], vec![vec![v]]))
            .collect::<Result<_>>()?;
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity {
                reason: format!("weights must sum to 1, got {total}"),
            });
        }
        Ok(Density { dim: 1, comps })
    }

    pub fn gaussian_2d(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Density> {
        Ok(Density {
            dim: 2,
            comps: vec![make_comp(
                1.0,
                mean.to_vec(),
                cov.iter().map(|r| r.to_vec()).collect(),
            )?],
        })
    }

    pub fn mixture_2d(parts: &[(f64, [f64; 2], [[f64; 2]; 2])]) -> Result<Density> {
        let comps: Vec<Comp> = parts
            .iter()
            .map(|&(w, m, cov)| {
                make_comp(w, m.to_vec(), cov.iter().map(|r| r.to_vec()).collect())
            })
            .collect::<Result<_>>()?;
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity {
                reason: format!("weights must sum to 1, got {total}"),
            });
        }
        Ok(Density { dim: 2, comps })
    }

    /// The bimodal 1D target used by the training experiments:
    /// 0.5 N(0, 0.3^2) + 0.5 N(2, 1).
    pub fn toy_mixture_1d() -> Density {
        Density::mixture_1d(&[(0.5, 0.0, 0.09), (0.5, 2.0, 1.0)]).expect("static density")
    }

    /// `k` equally weighted unit-covariance Gaussians with means on a
    /// circle of the given radius.
    pub fn circle_of_gaussians(k: usize, radius: f64) -> Result<Density> {
        if k == 0 {
            return Err(Error::InvalidDensity {
                reason: "need at least one component".into(),
            });
        }
        let w = 1.0 / k as f64;
        let parts: Vec<(f64, [f64; 2], [[f64; 2]; 2])> = (0..k)
            .map(|i| {
                let th = TWO_PI * i as f64 / k as f64;
                (
                    w,
                    [radius * th.cos(), radius * th.sin()],
                    [[1.0, 0.0], [0.0, 1.0]],
                )
            })
            .collect();
        Density::mixture_2d(&parts)
    }

    /// Gaussian-smoothed two-point distribution on atoms {0, 1}:
    /// r N(0, sigma^2) + (1-r) N(1, sigma^2).
    pub fn smoothed_two_point(r: f64, sigma: f64) -> Result<Density> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::DomainError {
                what: "two-point probability",
                value: r,
            });
        }
        Density::mixture_1d(&[(r, 0.0, sigma * sigma), (1.0 - r, 1.0, sigma * sigma)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    /// Natural-log density; exact for Gaussians, log-sum-exp for mixtures.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.logp(x))
    }

    pub(crate) fn logp(&self, x: &[f64]) -> f64 {
        if self.comps.len() == 1 {
            return self.comp_log(&self.comps[0], x);
        }
        let mut best = f64::NEG_INFINITY;
        let mut logs = [0.0f64; 8];
        let mut extra: Vec<f64>;
        let slots: &mut [f64] = if self.comps.len() <= 8 {
            &mut logs[..self.comps.len()]
        } else {
            extra = vec![0.0; self.comps.len()];
            &mut extra
        };
        for (slot, c) in slots.iter_mut().zip(&self.comps) {
            let l = self.comp_log(c, x);
            *slot = l;
            if l > best {
                best = l;
            }
        }
        if best == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = slots.iter().map(|&l| (l - best).exp()).sum();
        best + sum.ln()
    }

    fn comp_log(&self, c: &Comp, x: &[f64]) -> f64 {
        let q = if self.dim == 1 {
            let dx = x[0] - c.mean[0];
            dx * dx * c.inv[0]
        } else {
            let dx0 = x[0] - c.mean[0];
            let dx1 = x[1] - c.mean[1];
            dx0 * dx0 * c.inv[0] + 2.0 * dx0 * dx1 * c.inv[1] + dx1 * dx1 * c.inv[3]
        };
        c.log_weight + c.log_norm - 0.5 * q
    }

    /// Gradient of the log density with respect to x.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        // Responsibility-weighted component gradients, computed in log space.
        let logs: Vec<f64> = self.comps.iter().map(|c| self.comp_log(c, x)).collect();
        let best = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logs.iter().map(|&l| (l - best).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mut grad = vec![0.0; self.dim];
        for (w, c) in weights.iter().zip(&self.comps) {
            if self.dim == 1 {
                let dx = x[0] - c.mean[0];
                grad[0] += w * (-c.inv[0] * dx);
            } else {
                let dx0 = x[0] - c.mean[0];
                let dx1 = x[1] - c.mean[1];
                grad[0] += w * (-(c.inv[0] * dx0 + c.inv[1] * dx1));
                grad[1] += w * (-(c.inv[2] * dx0 + c.inv[3] * dx1));
            }
        }
        Ok(grad)
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.comps {
            for i in 0..self.dim {
                m[i] += c.weight * c.mean[i];
            }
        }
        m
    }

    /// Mixture covariance (row-major): sum w (cov + mu mu^T) - m m^T.
    pub fn covariance(&self) -> Vec<f64> {
        let m = self.mean();
        let d = self.dim;
        let mut cov = vec![0.0; d * d];
        for c in &self.comps {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += c.weight * (c.cov[i * d + j] + c.mean[i] * c.mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= m[i] * m[j];
            }
        }
        cov
    }

    /// Per-axis interval containing every component mean +- 10 sigma.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|ax| {
                let lo = self
                    .comps
                    .iter()
                    .map(|c| c.mean[ax] - SUPPORT_SIGMAS * c.sigma_axes[ax])
                    .fold(f64::INFINITY, f64::min);
                let hi = self
                    .comps
                    .iter()
                    .map(|c| c.mean[ax] + SUPPORT_SIGMAS * c.sigma_axes[ax])
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect()
    }

    fn axis_means(&self, ax: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c.mean[ax]).collect()
    }

    /// Deterministic sampling: component choice by cumulative weight, then
    /// a Cholesky-transformed standard normal draw.
    pub fn sample(&self, n: usize, seed: u64) -> Samples {
        let mut rng = seeded(seed);
        self.sample_with(&mut rng, n)
    }

    /// Draw from an existing stream (the trainer interleaves many draws on
    /// one seeded stream).
    pub fn sample_with<R: rand::Rng>(&self, rng: &mut R, n: usize) -> Samples {
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let pick: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = self.comps.len() - 1;
            for (i, c) in self.comps.iter().enumerate() {
                acc += c.weight;
                if pick < acc {
                    chosen = i;
                    break;
                }
            }
            let c = &self.comps[chosen];
            if self.dim == 1 {
                let z = standard_normal(rng);
                data.push(c.mean[0] + c.chol[0] * z);
            } else {
                let z0 = standard_normal(rng);
                let z1 = standard_normal(rng);
                data.push(c.mean[0] + c.chol[0] * z0);
                data.push(c.mean[1] + c.chol[2] * z0 + c.chol[3] * z1);
            }
        }
        Samples {
            dim: self.dim,
            data,
        }
    }
}

/// A flat batch of points (row-major, `dim` values per point).
#[derive(Debug, Clone)]
pub struct Samples {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column_mean(&self, ax: usize) -> f64 {
        let n = self.len();
        crate::util::pairwise_sum(
            &self.iter().map(|p| p[ax]).collect::<Vec<f64>>(),
        ) / n as f64
    }

    pub fn column_variance(&self, ax: usize) -> f64 {
        let m = self.column_mean(ax);
        let sq: Vec<f64> = self.iter().map(|p| (p[ax] - m) * (p[ax] - m)).collect();
        crate::util::pairwise_sum(&sq) / self.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Critics

/// A scalar function of data space approximating the log density ratio.
pub trait Critic: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn input_grad(&self, x: &[f64]) -> Vec<f64>;
}

/// The analytic optimal critic d*(x) = log p(x) - log q(x).
#[derive(Debug, Clone)]
pub struct OptimalCritic {
    p: Density,
    q: Density,
}

pub fn optimal_critic(p: &Density, q: &Density) -> Result<OptimalCritic> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(OptimalCritic {
        p: p.clone(),
        q: q.clone(),
    })
}

impl Critic for OptimalCritic {
    fn value(&self, x: &[f64]) -> f64 {
        self.p.logp(x) - self.q.logp(x)
    }

    fn input_grad(&self, x: &[f64]) -> Vec<f64> {
        let gp = self.p.grad_log_density(x).expect("dims checked at build");
        let gq = self.q.grad_log_density(x).expect("dims checked at build");
        gp.iter().zip(gq).map(|(a, b)| a - b).collect()
    }
}

// ---------------------------------------------------------------------------
// Exact divergence evaluation

/// Pointwise integrand of D_f in a form that never overflows: with
/// d = log p - log q,
///   q f(p/q) = q s_f(d) for d <= 0 and p s_f(d) for d > 0,
/// i.e. max(p, q) * s_f(d).
fn stable_integrand(div: &Divergence, log_p: f64, log_q: f64) -> f64 {
    let d = log_p - log_q;
    let s = div.s_curve(d);
    if s == 0.0 {
        return 0.0;
    }
    let log_max = if d <= 0.0 { log_q } else { log_p };
    log_max.exp() * s
}

fn union_interval(p: &Density, q: &Density, ax: usize) -> (f64, f64) {
    let bp = p.support_box()[ax];
    let bq = q.support_box()[ax];
    (bp.0.min(bq.0), bp.1.max(bq.1))
}

fn union_splits(p: &Density, q: &Density, ax: usize) -> Vec<f64> {
    let mut s = p.axis_means(ax);
    s.extend(q.axis_means(ax));
    s
}

pub fn default_quad_options(dim: usize) -> QuadOptions {
    QuadOptions {
        abs_tol: if dim == 1 { 1e-10 } else { 1e-8 },
        rel_tol: 1e-10,
        max_intervals: 4096,
    }
}

/// D_f(p, q) by adaptive quadrature over the joint support box.
pub fn divergence_quadrature(div: &Divergence, p: &Density, q: &Density) -> Result<f64> {
    divergence_quadrature_opts(div, p, q, default_quad_options(p.dim()))
}

pub fn divergence_quadrature_opts(
    div: &Divergence,
    p: &Density,
    q: &Density,
    opts: QuadOptions,
) -> Result<f64> {
    integrate_over_pair(p, q, opts, |_, lp, lq| stable_integrand(div, lp, lq))
}

/// Integrate `g(x, log p(x), log q(x))` over the joint support box of p and
/// q (1D directly, 2D by a tensor-product adaptive rule).
pub(crate) fn integrate_over_pair<G>(
    p: &Density,
    q: &Density,
    opts: QuadOptions,
    g: G,
) -> Result<f64>
where
    G: Fn(&[f64], f64, f64) -> f64 + Sync,
{
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.dim() == 1 {
        let (lo, hi) = union_interval(p, q, 0);
        let splits = union_splits(p, q, 0);
        let r = quad::integrate_with_splits(
            |x| {
                let pt = [x];
                g(&pt, p.logp(&pt), q.logp(&pt))
            },
            lo,
            hi,
            &splits,
            opts,
        )?;
        Ok(r.value)
    } else {
        let (xlo, xhi) = union_interval(p, q, 0);
        let (ylo, yhi) = union_interval(p, q, 1);
        let xsplits = union_splits(p, q, 0);
        let ysplits = union_splits(p, q, 1);
        // Inner integrals must be accurate enough that their errors cannot
        // accumulate past the outer tolerance.
        let inner_opts = QuadOptions {
            abs_tol: opts.abs_tol / (4.0 * (xhi - xlo)),
            rel_tol: opts.rel_tol,
            max_intervals: opts.max_intervals,
        };
        let outer_opts = QuadOptions {
            abs_tol: 0.5 * opts.abs_tol,
            ..opts
        };
        let r = quad::integrate_with_splits(
            |x| {
                quad::integrate_with_splits(
                    |y| {
                        let pt = [x, y];
                        g(&pt, p.logp(&pt), q.logp(&pt))
                    },
                    ylo,
                    yhi,
                    &ysplits,
                    inner_opts,
                )
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
            },
            xlo,
            xhi,
            &xsplits,
            outer_opts,
        )?;
        Ok(r.value)
    }
}

/// Split D_f into the contributions of left mismatches (q > p) and right
/// mismatches (q < p); they sum to the full divergence.
pub fn mismatch_decomposition(
    div: &Divergence,
    p: &Density,
    q: &Density,
) -> Result<(f64, f64)> {
    let opts = default_quad_options(p.dim());
    let left = integrate_over_pair(p, q, opts, |_, lp, lq| {
        if lp < lq {
            stable_integrand(div, lp, lq)
        } else {
            0.0
        }
    })?;
    let right = integrate_over_pair(p, q, opts, |_, lp, lq| {
        if lp > lq {
            stable_integrand(div, lp, lq)
        } else {
            0.0
        }
    })?;
    Ok((left, right))
}

// ---------------------------------------------------------------------------
// Two-point distributions

/// D_f between the two-point distributions p(0) = r and q(0) = s:
/// the expectation of f(p/q) under q over the two atoms.
pub fn two_point_divergence(div: &Divergence, r: f64, s: f64) -> Result<f64> {
    for (what, v) in [("r", r), ("s", s)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::DomainError {
                what: if what == "r" {
                    "two-point probability r"
                } else {
                    "two-point probability s"
                },
                value: v,
            });
        }
    }
    Ok(s * div.f(r / s) + (1.0 - s) * div.f((1.0 - r) / (1.0 - s)))
}

// ---------------------------------------------------------------------------
// Gaussian fits

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitObjective {
    /// Minimize D_KL(p, q): moment matching in closed form.
    Kl,
    /// Minimize KL(q || p): numeric descent on the quadrature value.
    Rkl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitConstraint {
    Diagonal,
    Isotropic,
}

fn density_from_params(constraint: FitConstraint, theta: &[f64]) -> Density {
    let (m, vars) = match constraint {
        FitConstraint::Diagonal => (
            [theta[0], theta[1]],
            [theta[2].exp(), theta[3].exp()],
        ),
        FitConstraint::Isotropic => {
            let v = theta[2].exp();
            ([theta[0], theta[1]], [v, v])
        }
    };
    Density::gaussian_2d(m, [[vars[0], 0.0], [0.0, vars[1]]]).expect("positive variances")
}

/// Fit a constrained 2D Gaussian to `p`.
///
/// The forward-KL objective has the classic closed form: match the mean and
/// the (diagonal of the) covariance, or their isotropic average. The
/// reverse-KL objective is minimized by fixed-step gradient descent with
/// backtracking halving on the quadrature value, using central-difference
/// gradients, until the gradient norm falls below 1e-6.
pub fn fit_gaussian(
    p: &Density,
    objective: FitObjective,
    constraint: FitConstraint,
) -> Result<Density> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: p.dim(),
        });
    }
    match objective {
        FitObjective::Kl => {
            let m = p.mean();
            let cov = p.covariance();
            let (v0, v1) = match constraint {
                FitConstraint::Diagonal => (cov[0], cov[3]),
                FitConstraint::Isotropic => {
                    let v = 0.5 * (cov[0] + cov[3]);
                    (v, v)
                }
            };
            Density::gaussian_2d([m[0], m[1]], [[v0, 0.0], [0.0, v1]])
        }
        FitObjective::Rkl => fit_rkl(p, constraint),
    }
}

fn fit_rkl(p: &Density, constraint: FitConstraint) -> Result<Density> {
    let rkl = Divergence::builtin(crate::divergence::Builtin::Rkl);
    // The reverse-KL landscape is multimodal for mixture targets; start on
    // the first component so descent commits to a mode instead of stalling
    // on a symmetric saddle.
    let m0 = &p.comps[0].mean;
    let mut theta: Vec<f64> = match constraint {
        FitConstraint::Diagonal => vec![m0[0], m0[1], 0.0, 0.0],
        FitConstraint::Isotropic => vec![m0[0], m0[1], 0.0],
    };

    // Loose quadrature far from the optimum, tight for the endgame (the
    // finite-difference gradient can only be trusted down to quad_tol / h).
    let stages: [(QuadOptions, f64); 2] = [
        (
            QuadOptions {
                abs_tol: 1e-7,
                rel_tol: 1e-9,
                max_intervals: 4096,
            },
            1e-4,
        ),
        (
            QuadOptions {
                abs_tol: 1e-11,
                rel_tol: 1e-11,
                max_intervals: 8192,
            },
            1e-6,
        ),
    ];

    let max_iters = 10_000;
    let mut iters = 0;
    let h = 1e-3;
    let mut grad_norm = f64::INFINITY;

    for (opts, gtol) in stages {
        let value = |th: &[f64]| -> Result<f64> {
            divergence_quadrature_opts(&rkl, p, &density_from_params(constraint, th), opts)
        };
        let mut fv = value(&theta)?;
        let mut step = 1.0;
        loop {
            if iters >= max_iters {
                return Err(Error::FitDidNotConverge {
                    iterations: iters,
                    grad_norm,
                    last_params: theta,
                });
            }
            iters += 1;

            let mut grad = vec![0.0; theta.len()];
            for i in 0..theta.len() {
                let mut plus = theta.clone();
                plus[i] += h;
                let mut minus = theta.clone();
                minus[i] -= h;
                grad[i] = (value(&plus)? - value(&minus)?) / (2.0 * h);
            }
            grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if grad_norm < gtol {
                break;
            }

            // Backtracking line search on the Armijo condition.
            let mut accepted = false;
            for _ in 0..50 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&grad)
                    .map(|(t, g)| t - step * g)
                    .collect();
                let fc = value(&cand)?;
                if fc <= fv - 1e-4 * step * grad_norm * grad_norm {
                    theta = cand;
                    fv = fc;
                    step = (step * 2.0).min(4.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // Step underflow: gradient noise floor reached.
                break;
            }
        }
    }

    if grad_norm >= 1e-6 {
        return Err(Error::FitDidNotConverge {
            iterations: iters,
            grad_norm,
            last_params: theta,
        });
    }
    Ok(density_from_params(constraint, &theta))
}
