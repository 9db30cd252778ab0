//! Randomized invariants over the divergence calculus.

use fdiv::algebra::{bounds, ns_partner, reverse};
use fdiv::dist::two_point_divergence;
use fdiv::divergence::{Builtin, Divergence};
use fdiv::variational::{generator_objective, Mode};
use proptest::prelude::*;

fn any_builtin() -> impl Strategy<Value = Builtin> {
    prop::sample::select(Builtin::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// b'(d) = e^d a'(d) holds for every divergence at every log ratio.
    #[test]
    fn dual_derivative_identity(b in any_builtin(), d in -30.0..30.0f64) {
        let div = Divergence::builtin(b);
        let c = div.dual_coords(d);
        let expected = d.exp() * c.a_prime;
        prop_assert!(
            (c.b_prime - expected).abs() <= 1e-12 * expected.abs().max(c.b_prime.abs()),
            "{b} at d={d}: {} vs {}", c.b_prime, expected
        );
    }

    /// Defining functions never produce a silent NaN on (0, inf), even at
    /// the edges of the representable range.
    #[test]
    fn evaluate_never_returns_nan(b in any_builtin(), log10_u in -307.0..307.0f64) {
        let div = Divergence::builtin(b);
        let u = 10f64.powf(log10_u);
        let e = div.evaluate(u).unwrap();
        prop_assert!(!e.f.is_nan(), "{b}: f({u}) is NaN");
        prop_assert!(!e.f_prime.is_nan(), "{b}: f'({u}) is NaN");
        prop_assert!(!e.f_double_prime.is_nan(), "{b}: f''({u}) is NaN");
        // f is nonnegative with its minimum at 1.
        prop_assert!(e.f >= 0.0, "{b}: f({u}) = {}", e.f);
    }

    /// Reversal is an involution on the defining function.
    #[test]
    fn reverse_involution(b in any_builtin(), log_u in -6.0..6.0f64) {
        let div = Divergence::builtin(b);
        let back = reverse(&reverse(&div));
        let u = log_u.exp();
        let (orig, rt) = (div.f(u), back.f(u));
        prop_assert!(
            (orig - rt).abs() <= 1e-11 * orig.abs().max(1e-12),
            "{b} at u={u}: {orig} vs {rt}"
        );
    }

    /// Reversal mirrors the symmetry-preserving curve: s_rev(d) = s(-d).
    #[test]
    fn reverse_mirrors_the_s_curve(b in any_builtin(), d in -30.0..30.0f64) {
        let div = Divergence::builtin(b);
        let rev = reverse(&div);
        let (lhs, rhs) = (rev.s_curve(d), div.s_curve(-d));
        prop_assert!(
            (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-12),
            "{b} at d={d}: {lhs} vs {rhs}"
        );
    }

    /// Two-point divergences are nonnegative, vanish on the diagonal, and
    /// never exceed the supremum bound m0 + m_inf.
    #[test]
    fn two_point_respects_the_range_of_values(
        b in any_builtin(),
        r in 1e-6..0.999999f64,
        s in 1e-6..0.999999f64,
    ) {
        let div = Divergence::builtin(b);
        let d = two_point_divergence(&div, r, s).unwrap();
        prop_assert!(d >= -1e-12, "{b} at ({r},{s}): {d}");
        let m = bounds(&div).m;
        prop_assert!(d <= m + 1e-9, "{b} at ({r},{s}): {d} > {m}");
        let on_diag = two_point_divergence(&div, r, r).unwrap();
        prop_assert!(on_diag.abs() <= 1e-12);
    }

    /// Non-saturating training under h has exactly the saturating
    /// per-sample generator derivatives of its partner divergence.
    #[test]
    fn ns_partner_matches_generator_derivatives(
        b in any_builtin(),
        ds in prop::collection::vec(-12.0..12.0f64, 1..40),
    ) {
        let h = Divergence::builtin(b);
        let partner = ns_partner(&h);
        let (_, ns) = generator_objective(&h, Mode::NonSaturating, &ds);
        let (_, sat) = generator_objective(&partner, Mode::Saturating, &ds);
        for (i, (a, b)) in ns.iter().zip(&sat).enumerate() {
            prop_assert!(
                (a - b).abs() <= 1e-12 * a.abs().max(1e-12),
                "sample {i} (d = {}): {a} vs {b}", ds[i]
            );
        }
    }

    /// The s-curve is continuous at zero and nonnegative.
    #[test]
    fn s_curve_basic_shape(b in any_builtin(), d in -40.0..40.0f64) {
        let div = Divergence::builtin(b);
        prop_assert!(div.s_curve(d) >= 0.0);
        prop_assert!((div.s_curve(-1e-9) - div.s_curve(1e-9)).abs() < 1e-8);
    }
}
