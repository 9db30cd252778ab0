//! Adaptive one-dimensional quadrature on a Gauss-Kronrod 7/15 pair.
//!
//! Intervals are kept in a worst-error-first queue and bisected until the
//! summed error estimate meets `max(abs_tol, rel_tol * |integral|)`. The
//! per-interval error uses the QUADPACK rescaling of |K15 - G7| so smooth
//! integrands converge with few subdivisions.

use crate::{Error, Result};
use std::collections::BinaryHeap;

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (positive half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Weights of the 15-point Kronrod rule.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Weights of the embedded 7-point Gauss rule (odd Kronrod abscissae).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Hard cap on the number of interval bisections.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4096,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// One G7/K15 evaluation over [lo, hi].
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let f_center = f(center);
    let mut result_gauss = WG[3] * f_center;
    let mut result_kronrod = WGK[7] * f_center;
    let mut resabs = WGK[7] * f_center.abs();

    let mut values = [0.0_f64; 15];
    values[7] = f_center;

    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let f_lo = f(center - dx);
        let f_hi = f(center + dx);
        values[j] = f_lo;
        values[14 - j] = f_hi;
        let sum = f_lo + f_hi;
        result_kronrod += WGK[j] * sum;
        resabs += WGK[j] * (f_lo.abs() + f_hi.abs());
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * sum;
        }
    }

    let mean = 0.5 * result_kronrod;
    let mut resasc = WGK[7] * (f_center - mean).abs();
    for (j, &v) in values.iter().enumerate().take(7) {
        resasc += WGK[j] * ((v - mean).abs() + (values[14 - j] - mean).abs());
    }

    let value = result_kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();

    let mut error = ((result_kronrod - result_gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let round_off = 50.0 * f64::EPSILON * resabs;
    if round_off > error {
        error = round_off;
    }

    Segment {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrate `f` over `[lo, hi]`, pre-splitting at the sorted interior
/// points in `splits` (hints such as mixture component means).
pub fn integrate_with_splits<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    splits: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if lo == hi {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if !(lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }

    // A single panel over a wide interval can miss narrow features
    // entirely (zero value, zero error estimate), so always start from a
    // modest uniform subdivision merged with the caller's hints.
    const MIN_PANELS: usize = 16;
    let mut cuts = vec![lo];
    for i in 1..MIN_PANELS {
        cuts.push(lo + (hi - lo) * i as f64 / MIN_PANELS as f64);
    }
    for &s in splits {
        if s > lo && s < hi {
            cuts.push(s);
        }
    }
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let seg = gauss_kronrod(&f, w[0], w[1]);
        total += seg.value;
        total_err += seg.error;
        heap.push(seg);
        evaluations += 15;
    }

    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureFailed {
                achieved: f64::INFINITY,
            });
        }
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            // Resum from the heap so the reported value does not carry
            // accumulated increment/decrement round-off.
            let value = heap.iter().map(|s| s.value).sum();
            let error_estimate = heap.iter().map(|s| s.error).sum();
            return Ok(QuadResult {
                value,
                error_estimate,
                evaluations,
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailed {
                achieved: total_err,
            });
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval is at floating-point resolution; keep its estimate.
            total_err -= worst.error;
            let mut pinned = worst;
            pinned.error = 0.0;
            heap.push(pinned);
            continue;
        }
        let left = gauss_kronrod(&f, worst.lo, mid);
        let right = gauss_kronrod(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_splits(f, lo, hi, &[], opts)
}
