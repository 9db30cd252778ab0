//! f-divergences represented by their defining functions.
//!
//! A divergence is stored as a triple of evaluators for the defining
//! function `f` and its first two derivatives on u > 0, normalized so that
//! f(1) = f'(1) = 0 and f''(1) = 1 (canonical scale). Since f(1) = f'(1) = 0,
//! f'' alone pins a divergence down, and [`Divergence::from_fpp`] rebuilds
//! f' and f from f'' by quadrature.
//!
//! Each divergence also carries evaluators in log-ratio coordinates
//! d = log u: the tangent-line coefficients a(d) = f'(e^d) and
//! b(d) = e^d f'(e^d) - f(e^d) together with their d-derivatives. Built-ins
//! use closed forms for these (they drive the training losses and must not
//! lose precision to the exp/log round trip).

use crate::quad::{self, QuadOptions};
use crate::util::{sigmoid, softplus};
use crate::{Error, Result};
use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

pub type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// log-ratio magnitude beyond which dual coordinates are pinned.
/// exp(60) is ~1e26: far past anything the toy experiments produce, but
/// small enough that every built-in's b(d) stays finite.
pub const DUAL_CLAMP: f64 = 60.0;

/// Internal clamp for s-curve evaluation; exp of this stays finite and all
/// built-in f values at exp(+-600) are representable.
const S_CURVE_CLAMP: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Builtin {
    #[serde(rename = "KL")]
    Kl,
    #[serde(rename = "RKL")]
    Rkl,
    #[serde(rename = "JS4")]
    Js4,
    #[serde(rename = "Jeffreys")]
    Jeffreys,
    #[serde(rename = "NeymannChi2")]
    NeymannChi2,
    #[serde(rename = "SRKL")]
    Srkl,
    #[serde(rename = "IGOG")]
    Igog,
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Kl,
        Builtin::Rkl,
        Builtin::Js4,
        Builtin::Jeffreys,
        Builtin::NeymannChi2,
        Builtin::Srkl,
        Builtin::Igog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Kl => "KL",
            Builtin::Rkl => "RKL",
            Builtin::Js4 => "JS4",
            Builtin::Jeffreys => "Jeffreys",
            Builtin::NeymannChi2 => "NeymannChi2",
            Builtin::Srkl => "SRKL",
            Builtin::Igog => "IGOG",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "kl" => Ok(Builtin::Kl),
            "rkl" | "reversekl" => Ok(Builtin::Rkl),
            "js4" | "js" | "jensenshannon" => Ok(Builtin::Js4),
            "jeffreys" => Ok(Builtin::Jeffreys),
            "neymannchi2" | "neymann" => Ok(Builtin::NeymannChi2),
            "srkl" | "softenedrkl" => Ok(Builtin::Srkl),
            "igog" => Ok(Builtin::Igog),
            _ => Err(Error::UnknownDivergence {
                name: s.to_string(),
                valid: Builtin::ALL.map(|b| b.name()).join(", "),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Builtin,
    DerivedByOperator,
    FromFpp,
}

/// The three defining-function values at a point u > 0.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub f: f64,
    pub f_prime: f64,
    pub f_double_prime: f64,
    /// Set when a value overflowed to +-infinity (never a silent NaN).
    pub saturated: bool,
}

/// Values of a(d), b(d) and their d-derivatives at a log ratio d.
#[derive(Debug, Clone, Copy)]
pub struct DualCoords {
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    /// Set when |d| exceeded [`DUAL_CLAMP`] and was pinned.
    pub clamped: bool,
}

#[derive(Clone)]
pub struct Divergence {
    name: String,
    builtin: Option<Builtin>,
    provenance: Provenance,
    f: Eval,
    f_prime: Eval,
    f_double_prime: Eval,
    a: Eval,
    b: Eval,
    a_prime: Eval,
    b_prime: Eval,
    analytic_tails: Option<(f64, f64)>,
}

impl fmt::Debug for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Divergence")
            .field("name", &self.name)
            .field("provenance", &self.provenance)
            .field("analytic_tails", &self.analytic_tails)
            .finish()
    }
}

// Shared closed forms, written once so that algebraically equal coordinates
// of different divergences evaluate bit-identically (the non-saturating
// JS4 generator derivative and the saturating SRKL one are the same
// function, and the trainer relies on that being exact).
fn js4_a(d: f64) -> f64 {
    2.0 * (LN_2 - softplus(-d))
}
fn two_sigma_neg(d: f64) -> f64 {
    2.0 * sigmoid(-d)
}

/// ln((1+u)/(2u)) without the inf - inf traps at either end of the u range.
fn log_half_ratio(u: f64) -> f64 {
    if u >= 1.0 {
        (1.0 / u).ln_1p() - LN_2
    } else {
        ((1.0 + u) / (2.0 * u)).ln()
    }
}

impl Divergence {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new_raw(
        name: impl Into<String>,
        builtin: Option<Builtin>,
        provenance: Provenance,
        f: Eval,
        f_prime: Eval,
        f_double_prime: Eval,
        dual: Option<(Eval, Eval, Eval, Eval)>,
        analytic_tails: Option<(f64, f64)>,
    ) -> Self {
        let (a, b, a_prime, b_prime) = match dual {
            Some(t) => t,
            None => {
                // Default log-ratio coordinates composed from the u-side.
                let (fc, fpc, fppc) = (f.clone(), f_prime.clone(), f_double_prime.clone());
                let a: Eval = {
                    let fpc = fpc.clone();
                    Arc::new(move |d: f64| fpc(d.exp()))
                };
                let b: Eval = Arc::new(move |d: f64| {
                    let u = d.exp();
                    u * fpc(u) - fc(u)
                });
                let a_prime: Eval = {
                    let fppc = fppc.clone();
                    Arc::new(move |d: f64| {
                        let u = d.exp();
                        u * fppc(u)
                    })
                };
                let b_prime: Eval = Arc::new(move |d: f64| {
                    let u = d.exp();
                    u * u * fppc(u)
                });
                (a, b, a_prime, b_prime)
            }
        };
        Divergence {
            name: name.into(),
            builtin,
            provenance,
            f,
            f_prime,
            f_double_prime,
            a,
            b,
            a_prime,
            b_prime,
            analytic_tails,
        }
    }

    /// Canonical (f''(1) = 1) built-in divergence.
    pub fn builtin(which: Builtin) -> Divergence {
        let tails = match which {
            Builtin::Kl => (1.0, 2.0),
            Builtin::Rkl => (2.0, 1.0),
            Builtin::Js4 => (1.0, 1.0),
            Builtin::Jeffreys => (2.0, 2.0),
            Builtin::NeymannChi2 => (3.0, 0.0),
            Builtin::Srkl => (2.0, 0.0),
            Builtin::Igog => (2.0, 0.0),
        };
        let (f, fp, fpp): (Eval, Eval, Eval) = match which {
            Builtin::Kl => (
                Arc::new(|u: f64| u * u.ln() - u + 1.0),
                Arc::new(|u: f64| u.ln()),
                Arc::new(|u: f64| 1.0 / u),
            ),
            Builtin::Rkl => (
                Arc::new(|u: f64| u - 1.0 - u.ln()),
                Arc::new(|u: f64| 1.0 - 1.0 / u),
                Arc::new(|u: f64| 1.0 / (u * u)),
            ),
            Builtin::Js4 => (
                Arc::new(|u: f64| {
                    -2.0 * u * log_half_ratio(u) + 2.0 * (LN_2 - u.ln_1p())
                }),
                Arc::new(|u: f64| -2.0 * log_half_ratio(u)),
                Arc::new(|u: f64| 2.0 / (u * (1.0 + u))),
            ),
            Builtin::Jeffreys => (
                Arc::new(|u: f64| 0.5 * (u - 1.0) * u.ln()),
                Arc::new(|u: f64| 0.5 * (u.ln() + 1.0 - 1.0 / u)),
                Arc::new(|u: f64| 0.5 * (1.0 / u + 1.0 / (u * u))),
            ),
            Builtin::NeymannChi2 => (
                Arc::new(|u: f64| 0.5 * (u - 2.0 + 1.0 / u)),
                Arc::new(|u: f64| 0.5 * (1.0 - 1.0 / (u * u))),
                Arc::new(|u: f64| 1.0 / (u * u * u)),
            ),
            Builtin::Srkl => (
                Arc::new(|u: f64| 2.0 * (1.0 + u) * log_half_ratio(u) + 2.0 * (u - 1.0)),
                Arc::new(|u: f64| 2.0 * log_half_ratio(u) + 2.0 - 2.0 / u),
                Arc::new(|u: f64| 2.0 / (u * u * (1.0 + u))),
            ),
            Builtin::Igog => (
                Arc::new(|u: f64| 4.0 / 3.0 * (log_half_ratio(u) + 0.5 * (u - 1.0))),
                Arc::new(|u: f64| 4.0 / 3.0 * (0.5 - 1.0 / u + 1.0 / (1.0 + u))),
                Arc::new(|u: f64| {
                    let v = 1.0 + u;
                    4.0 / 3.0 * (1.0 / (u * u) - 1.0 / (v * v))
                }),
            ),
        };
        let dual: (Eval, Eval, Eval, Eval) = match which {
            Builtin::Kl => (
                Arc::new(|d: f64| d),
                Arc::new(|d: f64| d.exp_m1()),
                Arc::new(|_| 1.0),
                Arc::new(|d: f64| d.exp()),
            ),
            Builtin::Rkl => (
                Arc::new(|d: f64| -(-d).exp_m1()),
                Arc::new(|d: f64| d),
                Arc::new(|d: f64| (-d).exp()),
                Arc::new(|_| 1.0),
            ),
            Builtin::Js4 => (
                Arc::new(js4_a),
                Arc::new(|d: f64| 2.0 * (softplus(d) - LN_2)),
                Arc::new(two_sigma_neg),
                Arc::new(|d: f64| 2.0 * sigmoid(d)),
            ),
            Builtin::Jeffreys => (
                Arc::new(|d: f64| 0.5 * (d - (-d).exp_m1())),
                Arc::new(|d: f64| 0.5 * (d + d.exp_m1())),
                Arc::new(|d: f64| 0.5 * (1.0 + (-d).exp())),
                Arc::new(|d: f64| 0.5 * (1.0 + d.exp())),
            ),
            Builtin::NeymannChi2 => (
                Arc::new(|d: f64| -0.5 * (-2.0 * d).exp_m1()),
                Arc::new(|d: f64| -(-d).exp_m1()),
                Arc::new(|d: f64| (-2.0 * d).exp()),
                Arc::new(|d: f64| (-d).exp()),
            ),
            Builtin::Srkl => (
                Arc::new(|d: f64| 2.0 * softplus(-d) - 2.0 * LN_2 + 2.0 - 2.0 * (-d).exp()),
                Arc::new(js4_a),
                Arc::new(|d: f64| 2.0 * (-d).exp() - 2.0 * sigmoid(-d)),
                Arc::new(two_sigma_neg),
            ),
            Builtin::Igog => (
                Arc::new(|d: f64| 4.0 / 3.0 * (0.5 - (-d).exp() + sigmoid(-d))),
                Arc::new(|d: f64| 4.0 / 3.0 * (sigmoid(d) - 0.5 + LN_2 - softplus(-d))),
                Arc::new(|d: f64| 4.0 / 3.0 * ((-d).exp() - sigmoid(d) * sigmoid(-d))),
                Arc::new(|d: f64| {
                    let s = sigmoid(d);
                    4.0 / 3.0 * (1.0 - s * s)
                }),
            ),
        };
        Divergence::new_raw(
            which.name(),
            Some(which),
            Provenance::Builtin,
            f,
            fp,
            fpp,
            Some(dual),
            Some(tails),
        )
    }

    /// Look up a built-in by name; unknown names report the valid list.
    pub fn by_name(name: &str) -> Result<Divergence> {
        name.parse::<Builtin>().map(Divergence::builtin)
    }

    /// Build a divergence from its second derivative alone. `fpp` must be
    /// strictly positive; f' and f are recovered by quadrature anchored at
    /// u = 1 (relative accuracy ~1e-11 over u in [1e-6, 1e6]).
    pub fn from_fpp<F>(fpp: F, name: impl Into<String>) -> Result<Divergence>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let fpp: Eval = Arc::new(fpp);
        for k in -8..=8 {
            let u = 10f64.powi(k);
            let v = fpp(u);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NotADefiningFunction { u, value: v });
            }
        }
        let (f, f_prime) = antiderivatives_from_fpp(fpp.clone());
        Ok(Divergence::new_raw(
            name,
            None,
            Provenance::FromFpp,
            f,
            f_prime,
            fpp,
            None,
            None,
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        self.builtin
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Known analytic (left, right) tail weights, if any.
    pub fn analytic_tails(&self) -> Option<(f64, f64)> {
        self.analytic_tails
    }

    /// Raw evaluators; callers guarantee u > 0.
    pub fn f(&self, u: f64) -> f64 {
        (self.f)(u)
    }
    pub fn f_prime(&self, u: f64) -> f64 {
        (self.f_prime)(u)
    }
    pub fn f_double_prime(&self, u: f64) -> f64 {
        (self.f_double_prime)(u)
    }

    /// Log-ratio coordinate evaluators (no clamping; callers keep d sane).
    pub fn a(&self, d: f64) -> f64 {
        (self.a)(d)
    }
    pub fn b(&self, d: f64) -> f64 {
        (self.b)(d)
    }
    pub fn a_prime(&self, d: f64) -> f64 {
        (self.a_prime)(d)
    }
    pub fn b_prime(&self, d: f64) -> f64 {
        (self.b_prime)(d)
    }

    /// Checked pointwise evaluation of (f, f', f'') at u.
    pub fn evaluate(&self, u: f64) -> Result<Evaluation> {
        if !(u > 0.0) || u.is_nan() {
            return Err(Error::DomainError {
                what: "defining function argument",
                value: u,
            });
        }
        let f = self.f(u);
        let f_prime = self.f_prime(u);
        let f_double_prime = self.f_double_prime(u);
        let saturated = !(f.is_finite() && f_prime.is_finite() && f_double_prime.is_finite());
        Ok(Evaluation {
            f,
            f_prime,
            f_double_prime,
            saturated,
        })
    }

    /// Dual coordinates at log ratio d, pinned to |d| <= [`DUAL_CLAMP`].
    pub fn dual_coords(&self, d: f64) -> DualCoords {
        let clamped = d.abs() > DUAL_CLAMP;
        let d = d.clamp(-DUAL_CLAMP, DUAL_CLAMP);
        DualCoords {
            a: self.a(d),
            b: self.b(d),
            a_prime: self.a_prime(d),
            b_prime: self.b_prime(d),
            clamped,
        }
    }

    /// Symmetry-preserving curve: s(d) = f(e^d) for d <= 0, f(e^d)/e^d
    /// for d > 0. Continuous and C^2 at zero since f(1) = f'(1) = 0.
    pub fn s_curve(&self, d: f64) -> f64 {
        let d = d.clamp(-S_CURVE_CLAMP, S_CURVE_CLAMP);
        let u = d.exp();
        if d <= 0.0 {
            self.f(u)
        } else {
            self.f(u) / u
        }
    }
}

/// Quadrature-backed antiderivative closures anchored at u = 1, in log
/// coordinates (t = e^s) so polynomially singular tails stay tame:
///   f'(u) = int_0^{ln u} fpp(e^s) e^s ds
///   f(u)  = int_0^{ln u} (u - e^s) fpp(e^s) e^s ds
/// The second form folds the double integral into a single one.
pub(crate) fn antiderivatives_from_fpp(fpp: Eval) -> (Eval, Eval) {
    let opts = QuadOptions {
        abs_tol: 1e-30,
        rel_tol: 1e-12,
        max_intervals: 4096,
    };

    let fpp_p = fpp.clone();
    let f_prime: Eval = Arc::new(move |u: f64| {
        let t = u.ln();
        let g = |s: f64| {
            let es = s.exp();
            fpp_p(es) * es
        };
        let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
        sign * quad::integrate(g, lo, hi, opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    });

    let f: Eval = Arc::new(move |u: f64| {
        let t = u.ln();
        let g = |s: f64| {
            let es = s.exp();
            (u - es) * fpp(es) * es
        };
        let (lo, hi, sign) = if t >= 0.0 { (0.0, t, 1.0) } else { (t, 0.0, -1.0) };
        sign * quad::integrate(g, lo, hi, opts)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    });

    (f, f_prime)
}
