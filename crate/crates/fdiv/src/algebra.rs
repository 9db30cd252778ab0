//! Operators that build new divergences from old, and numeric
//! classification of any divergence by tail weights and boundedness.
//!
//! All operators compose closed forms for f, f' and f'' (the transforms are
//! exact), so operator-derived divergences lose no precision against their
//! hand-written counterparts. The one exception is [`ns_partner`] on an
//! unrecognized divergence, where only f'' has a closed transform and f, f'
//! are rebuilt by quadrature.

use crate::divergence::{antiderivatives_from_fpp, Builtin, Divergence, Eval, Provenance};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Csiszar dual: f_R(u) = u f(1/u), which swaps the arguments of the
/// divergence and the (left, right) tail weights.
pub fn reverse(div: &Divergence) -> Divergence {
    let name = format!("reverse({})", div.name());
    let d0 = div.clone();
    let f: Eval = Arc::new(move |u: f64| u * d0.f(1.0 / u));
    let d1 = div.clone();
    let f_prime: Eval = Arc::new(move |u: f64| {
        let v = 1.0 / u;
        d1.f(v) - v * d1.f_prime(v)
    });
    let d2 = div.clone();
    let f_double_prime: Eval = Arc::new(move |u: f64| {
        let v = 1.0 / u;
        d2.f_double_prime(v) / (u * u * u)
    });
    // a_R(d) = -b(-d), b_R(d) = -a(-d); derivatives follow by chain rule.
    let d3 = div.clone();
    let a: Eval = Arc::new(move |d: f64| -d3.b(-d));
    let d4 = div.clone();
    let b: Eval = Arc::new(move |d: f64| -d4.a(-d));
    let d5 = div.clone();
    let a_prime: Eval = Arc::new(move |d: f64| d5.b_prime(-d));
    let d6 = div.clone();
    let b_prime: Eval = Arc::new(move |d: f64| d6.a_prime(-d));

    Divergence::new_raw(
        name,
        None,
        Provenance::DerivedByOperator,
        f,
        f_prime,
        f_double_prime,
        Some((a, b, a_prime, b_prime)),
        div.analytic_tails().map(|(l, r)| (r, l)),
    )
}

/// Symmetrization: the arithmetic mean of a divergence and its reverse.
pub fn symmetrize(div: &Divergence) -> Divergence {
    let rev = reverse(div);
    let name = format!("symmetrize({})", div.name());
    let (d0, r0) = (div.clone(), rev.clone());
    let f: Eval = Arc::new(move |u: f64| 0.5 * d0.f(u) + 0.5 * r0.f(u));
    let (d1, r1) = (div.clone(), rev.clone());
    let f_prime: Eval = Arc::new(move |u: f64| 0.5 * d1.f_prime(u) + 0.5 * r1.f_prime(u));
    let (d2, r2) = (div.clone(), rev.clone());
    let f_double_prime: Eval =
        Arc::new(move |u: f64| 0.5 * d2.f_double_prime(u) + 0.5 * r2.f_double_prime(u));
    let (d3, r3) = (div.clone(), rev.clone());
    let a: Eval = Arc::new(move |d: f64| 0.5 * d3.a(d) + 0.5 * r3.a(d));
    let (d4, r4) = (div.clone(), rev.clone());
    let b: Eval = Arc::new(move |d: f64| 0.5 * d4.b(d) + 0.5 * r4.b(d));
    let (d5, r5) = (div.clone(), rev.clone());
    let a_prime: Eval = Arc::new(move |d: f64| 0.5 * d5.a_prime(d) + 0.5 * r5.a_prime(d));
    let (d6, r6) = (div.clone(), rev);
    let b_prime: Eval = Arc::new(move |d: f64| 0.5 * d6.b_prime(d) + 0.5 * r6.b_prime(d));

    let tails = div
        .analytic_tails()
        .map(|(l, r)| (l.max(r), l.max(r)));
    Divergence::new_raw(
        name,
        None,
        Provenance::DerivedByOperator,
        f,
        f_prime,
        f_double_prime,
        Some((a, b, a_prime, b_prime)),
        tails,
    )
}

/// q-softening: replaces the second argument by the even mixture of both,
/// times four so a canonical divergence stays canonical. Using
/// w = 2u/(1+u):
///   f~(u)   = 2 (1+u) f(w)
///   f~'(u)  = 2 f(w) + 4/(1+u) f'(w)
///   f~''(u) = 8/(1+u)^3 f''(w)
/// Zeroes the right tail weight.
pub fn soften_q(div: &Divergence) -> Divergence {
    let name = format!("soften_q({})", div.name());
    let d0 = div.clone();
    let f: Eval = Arc::new(move |u: f64| 2.0 * (1.0 + u) * d0.f(2.0 * u / (1.0 + u)));
    let d1 = div.clone();
    let f_prime: Eval = Arc::new(move |u: f64| {
        let w = 2.0 * u / (1.0 + u);
        2.0 * d1.f(w) + 4.0 / (1.0 + u) * d1.f_prime(w)
    });
    let d2 = div.clone();
    let f_double_prime: Eval = Arc::new(move |u: f64| {
        let v = 1.0 + u;
        8.0 / (v * v * v) * d2.f_double_prime(2.0 * u / v)
    });
    Divergence::new_raw(
        name,
        None,
        Provenance::DerivedByOperator,
        f,
        f_prime,
        f_double_prime,
        None,
        div.analytic_tails().map(|(l, _)| (l, 0.0)),
    )
}

/// p-softening: replaces the first argument by the even mixture.
///   f~(u)   = 4 f((1+u)/2)
///   f~'(u)  = 2 f'((1+u)/2)
///   f~''(u) = f''((1+u)/2)
/// Zeroes the left tail weight.
pub fn soften_p(div: &Divergence) -> Divergence {
    let name = format!("soften_p({})", div.name());
    let d0 = div.clone();
    let f: Eval = Arc::new(move |u: f64| 4.0 * d0.f(0.5 * (1.0 + u)));
    let d1 = div.clone();
    let f_prime: Eval = Arc::new(move |u: f64| 2.0 * d1.f_prime(0.5 * (1.0 + u)));
    let d2 = div.clone();
    let f_double_prime: Eval = Arc::new(move |u: f64| d2.f_double_prime(0.5 * (1.0 + u)));
    Divergence::new_raw(
        name,
        None,
        Provenance::DerivedByOperator,
        f,
        f_prime,
        f_double_prime,
        None,
        div.analytic_tails().map(|(_, r)| (0.0, r)),
    )
}

/// The divergence actually minimized when "non-saturating" training uses
/// critic divergence `h`: the unique f with f''(u) = h''(u)/u, which makes
/// b_f' = a_h'. The three classic partners come back as their closed-form
/// built-ins; anything else is rebuilt from f'' by quadrature.
pub fn ns_partner(h: &Divergence) -> Divergence {
    match h.as_builtin() {
        Some(Builtin::Kl) => return Divergence::builtin(Builtin::Rkl),
        Some(Builtin::Rkl) => return Divergence::builtin(Builtin::NeymannChi2),
        Some(Builtin::Js4) => return Divergence::builtin(Builtin::Srkl),
        _ => {}
    }
    let name = format!("ns_partner({})", h.name());
    let h0 = h.clone();
    let f_double_prime: Eval = Arc::new(move |u: f64| h0.f_double_prime(u) / u);
    let (f, f_prime) = antiderivatives_from_fpp(f_double_prime.clone());
    // b_f'(d) = u^2 f''(u) = u h''(u) = a_h'(d): reuse h's evaluator so the
    // defining identity holds exactly, and a_f'(d) = e^-d a_h'(d).
    let h1 = h.clone();
    let b_prime: Eval = Arc::new(move |d: f64| h1.a_prime(d));
    let h2 = h.clone();
    let a_prime: Eval = Arc::new(move |d: f64| (-d).exp() * h2.a_prime(d));
    let fp = f_prime.clone();
    let a: Eval = Arc::new(move |d: f64| fp(d.exp()));
    let (fc, fpc) = (f.clone(), f_prime.clone());
    let b: Eval = Arc::new(move |d: f64| {
        let u = d.exp();
        u * fpc(u) - fc(u)
    });
    Divergence::new_raw(
        name,
        None,
        Provenance::DerivedByOperator,
        f,
        f_prime,
        f_double_prime,
        Some((a, b, a_prime, b_prime)),
        h.analytic_tails().map(|(l, r)| (l + 1.0, r - 1.0)),
    )
}

/// Power-law tail exponents of f'' and the matching coefficients:
/// f''(u) ~ left_coeff * u^-left as u -> 0 and
/// f''(u) ~ right_coeff * u^(right-3) as u -> infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWeights {
    pub left: f64,
    pub right: f64,
    pub left_coeff: f64,
    pub right_coeff: f64,
}

/// Log-log slope sequence over one decade steps, Richardson-extrapolated.
/// Errors out when the slopes do not settle (spread above 0.1).
fn settled_slope(log_fpp: &[f64], side: &'static str) -> Result<f64> {
    let slopes: Vec<f64> = log_fpp
        .windows(2)
        .map(|w| (w[1] - w[0]) / std::f64::consts::LN_10)
        .collect();
    let spread = slopes.iter().cloned().fold(f64::MIN, f64::max)
        - slopes.iter().cloned().fold(f64::MAX, f64::min);
    if !spread.is_finite() || spread > 0.1 {
        return Err(Error::NoPowerLawTail { side, slopes });
    }
    let (s1, s2, s3) = (slopes[0], slopes[1], slopes[2]);
    let (d1, d2) = (s2 - s1, s3 - s2);
    // Geometric extrapolation of the residual when the increments still
    // shrink visibly; otherwise the last slope is already converged.
    if d2.abs() > 1e-9 && d1.abs() > d2.abs() {
        Ok(s3 + d2 * d2 / (d1 - d2))
    } else {
        Ok(s3)
    }
}

/// Estimate (left, right) tail weights from f'' probes at
/// u = 1e-5..1e-8 and u = 1e5..1e8.
pub fn tail_weights(div: &Divergence) -> Result<TailWeights> {
    let left_probes = [1e-5, 1e-6, 1e-7, 1e-8];
    let right_probes = [1e5, 1e6, 1e7, 1e8];

    // Probes descend toward zero, so the forward slope over w[k] = ln f''
    // is (Delta ln f'') / ln 10 = +L for f'' ~ C u^-L.
    let left_logs: Vec<f64> = left_probes
        .iter()
        .map(|&u| div.f_double_prime(u).ln())
        .collect();
    let left = settled_slope(&left_logs, "left")?;
    let right_logs: Vec<f64> = right_probes
        .iter()
        .map(|&u| div.f_double_prime(u).ln())
        .collect();
    let right = 3.0 + settled_slope(&right_logs, "right")?;

    let u_min = left_probes[3];
    let u_max = right_probes[3];
    Ok(TailWeights {
        left,
        right,
        left_coeff: div.f_double_prime(u_min) * u_min.powf(left),
        right_coeff: div.f_double_prime(u_max) * u_max.powf(3.0 - right),
    })
}

/// Range-of-values decomposition of the supremum of a divergence:
/// m0 = sup of f on (0,1), m_inf = sup of f(u)/u for u > 1, m = m0 + m_inf.
/// Infinities are legal values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInfo {
    pub m0: f64,
    pub m_inf: f64,
    pub m: f64,
}

/// A defining function decreases on (0,1), so the supremum is the limit at
/// zero; probe it along u = 1e-6, 1e-9, 1e-12 and call it infinite when the
/// values are still moving.
fn limit_at_zero<F: Fn(f64) -> f64>(f: F) -> f64 {
    let g9 = f(1e-9);
    let g12 = f(1e-12);
    if !g12.is_finite() || (g12 - g9).abs() > 1e-6 * (1.0 + g12.abs()) {
        f64::INFINITY
    } else {
        g12
    }
}

pub fn bounds(div: &Divergence) -> BoundInfo {
    let m0 = limit_at_zero(|u| div.f(u));
    let rev = reverse(div);
    let m_inf = limit_at_zero(|u| rev.f(u));
    BoundInfo {
        m0,
        m_inf,
        m: m0 + m_inf,
    }
}

/// One row of the built-in classification table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailTableRow {
    pub name: String,
    #[serde(rename = "L")]
    pub left: f64,
    #[serde(rename = "R")]
    pub right: f64,
    pub bounded: bool,
}

/// Tail weights and boundedness for every built-in divergence.
pub fn builtin_tail_table() -> Result<Vec<TailTableRow>> {
    Builtin::ALL
        .iter()
        .map(|&b| {
            let div = Divergence::builtin(b);
            let tw = tail_weights(&div)?;
            Ok(TailTableRow {
                name: b.name().to_string(),
                left: tw.left,
                right: tw.right,
                bounded: bounds(&div).m.is_finite(),
            })
        })
        .collect()
}
