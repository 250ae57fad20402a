//! The analytic "Rashomon couple": for targets `f(x) = sign(x) |x|^alpha` on
//! `x ~ U[-1, 1]`, the best one-parameter linear model `b1 * x` and the best
//! one-parameter sign stump `sign(x) * b0` have closed-form population MSEs
//! that cross at `alpha = (sqrt(3) - 1) / 2`, where the two families tie
//! exactly while predicting differently.
//!
//! Closed forms (population OLS):
//!
//! ```text
//! b1  = 3 / (2 + alpha)          mse_linear = 1/(1+2a) - 3/(2+a)^2
//! b0  = 1 / (1 + alpha)          mse_stump  = 1/(1+2a) - 1/(1+a)^2
//! ```
//!
//! Every closed form is cross-checkable against adaptive quadrature of the
//! defining integrals; the integrands are even, so integration runs on
//! `[0, 1]` only.

use crate::error::{Error, Result};
use crate::rng::Substream;

/// Exponent of the target family; must exceed -1/2 so `E[f^2]` is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupleSpec {
    pub alpha: f64,
}

impl CoupleSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > -0.5) || !alpha.is_finite() {
            return Err(Error::Config(format!("alpha={alpha} must be > -0.5")));
        }
        Ok(Self { alpha })
    }

    /// Target value `sign(x) |x|^alpha`.
    pub fn target(&self, x: f64) -> f64 {
        x.signum() * x.abs().powf(self.alpha)
    }
}

/// The tie exponent `(sqrt(3) - 1) / 2`.
pub fn tie_alpha() -> f64 {
    (3.0f64.sqrt() - 1.0) / 2.0
}

/// Best linear slope and its population MSE, closed form.
pub fn best_linear(spec: &CoupleSpec) -> (f64, f64) {
    let a = spec.alpha;
    let b1 = 3.0 / (2.0 + a);
    let mse = 1.0 / (1.0 + 2.0 * a) - 3.0 / ((2.0 + a) * (2.0 + a));
    (b1, mse)
}

/// Best stump level and its population MSE, closed form.
pub fn best_stump(spec: &CoupleSpec) -> (f64, f64) {
    let a = spec.alpha;
    let b0 = 1.0 / (1.0 + a);
    let mse = 1.0 / (1.0 + 2.0 * a) - 1.0 / ((1.0 + a) * (1.0 + a));
    (b0, mse)
}

/// Integrate `g` over `[0, 1]` after the substitution `x = t^8`, which
/// absorbs the endpoint singularity of `x^alpha` terms for alpha > -1/2:
/// the transformed integrand `8 t^7 g(t^8)` extends continuously to 0.
fn integrate_unit<F: Fn(f64) -> f64>(g: F, tol: f64) -> f64 {
    integrate(
        move |t| if t == 0.0 { 0.0 } else { 8.0 * t.powi(7) * g(t.powi(8)) },
        0.0,
        1.0,
        tol,
    )
}

/// Quadrature route for the linear family: slope from the moment integrals,
/// MSE from the squared-error integral. Independent of the closed forms.
pub fn best_linear_quadrature(spec: &CoupleSpec) -> (f64, f64) {
    let a = spec.alpha;
    let exy = integrate_unit(|x| x.powf(1.0 + a), 1e-12);
    let exx = integrate_unit(|x| x * x, 1e-12);
    let b1 = exy / exx;
    let mse = integrate_unit(|x| (x.powf(a) - b1 * x).powi(2), 1e-12);
    (b1, mse)
}

/// Quadrature route for the stump family.
pub fn best_stump_quadrature(spec: &CoupleSpec) -> (f64, f64) {
    let a = spec.alpha;
    let b0 = integrate_unit(|x| x.powf(a), 1e-12);
    let mse = integrate_unit(|x| (x.powf(a) - b0).powi(2), 1e-12);
    (b0, mse)
}

/// `mse_stump - mse_linear`: negative where the stump wins (alpha near 0),
/// positive where the line wins (alpha near 1).
pub fn mse_gap(alpha: f64) -> f64 {
    let spec = CoupleSpec { alpha };
    best_stump(&spec).1 - best_linear(&spec).1
}

/// Root of [`mse_gap`] on (0, 1) by bisection to 1e-12.
pub fn find_couple_exponent() -> f64 {
    let mut lo = 1e-9;
    let mut hi = 1.0 - 1e-9;
    debug_assert!(mse_gap(lo) < 0.0 && mse_gap(hi) > 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mse_gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fit both families by sample OLS on `n` uniform draws and report held-out
/// MSE on `n` fresh draws.
pub fn couple_montecarlo(spec: &CoupleSpec, n: usize, seed: u64) -> (f64, f64) {
    let mut train = Substream::new(seed, "couple/train");
    let mut sum_xy = 0.0;
    let mut sum_xx = 0.0;
    let mut sum_sy = 0.0;
    for _ in 0..n {
        let x = train.uniform_pm1();
        let y = spec.target(x);
        sum_xy += x * y;
        sum_xx += x * x;
        sum_sy += x.signum() * y;
    }
    let b1 = sum_xy / sum_xx;
    let b0 = sum_sy / n as f64;
    let mut test = Substream::new(seed, "couple/test");
    let mut sse_lin = 0.0;
    let mut sse_stump = 0.0;
    for _ in 0..n {
        let x = test.uniform_pm1();
        let y = spec.target(x);
        let el = y - b1 * x;
        let es = y - x.signum() * b0;
        sse_lin += el * el;
        sse_stump += es * es;
    }
    (sse_lin / n as f64, sse_stump / n as f64)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth >= 60 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_on_known_integrals() {
        assert!((integrate(|x| x * x, 0.0, 1.0, 1e-12) - 1.0 / 3.0).abs() < 1e-12);
        assert!((integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12) - 2.0).abs() < 1e-11);
        // Unbounded derivative at zero still meets tolerance.
        assert!((integrate(f64::sqrt, 0.0, 1.0, 1e-12) - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn linear_family_trivial_cases() {
        // alpha = 1: target is already linear.
        let spec = CoupleSpec::new(1.0).unwrap();
        let (b1, mse) = best_linear(&spec);
        assert!((b1 - 1.0).abs() < 1e-15);
        assert!(mse.abs() < 1e-15);
    }

    #[test]
    fn stump_family_trivial_cases() {
        // alpha = 0: target is already a stump.
        let spec = CoupleSpec::new(0.0).unwrap();
        let (b0, mse) = best_stump(&spec);
        assert!((b0 - 1.0).abs() < 1e-15);
        assert!(mse.abs() < 1e-15);
        // alpha = 1: hand integration gives b0 = 1/2, mse = 1/3 - 1/4.
        let spec = CoupleSpec::new(1.0).unwrap();
        let (b0, mse) = best_stump(&spec);
        assert!((b0 - 0.5).abs() < 1e-15);
        assert!((mse - (1.0 / 3.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn paper_values_at_tie_alpha() {
        let spec = CoupleSpec::new(tie_alpha()).unwrap();
        let (b1, mse_lin) = best_linear(&spec);
        let (b0, mse_stump) = best_stump(&spec);
        let s3 = 3.0f64.sqrt();
        assert!((b1 - 6.0 / (s3 + 3.0)).abs() < 1e-14);
        assert!((b0 - 2.0 / (s3 + 1.0)).abs() < 1e-14);
        assert!((mse_lin - (1.0 / s3 - 12.0 / ((s3 + 3.0) * (s3 + 3.0)))).abs() < 1e-14);
        assert!((b1 - 1.2679492).abs() < 1e-7);
        assert!((b0 - 0.7320508).abs() < 1e-7);
        assert!((mse_lin - 0.0414518).abs() < 1e-6);
        assert!((mse_lin - mse_stump).abs() <= 1e-12);
    }

    #[test]
    fn closed_forms_match_quadrature_over_alpha_range() {
        // 50 exponents spanning (-0.4, 3].
        for k in 0..50 {
            let alpha = -0.4 + (k as f64 + 1.0) * (3.4 / 50.0);
            let spec = CoupleSpec::new(alpha).unwrap();
            let (b1, ml) = best_linear(&spec);
            let (b1q, mlq) = best_linear_quadrature(&spec);
            assert!((b1 - b1q).abs() < 1e-9, "alpha={alpha}: b1 {b1} vs {b1q}");
            assert!((ml - mlq).abs() < 1e-9, "alpha={alpha}: mse_lin {ml} vs {mlq}");
            let (b0, ms) = best_stump(&spec);
            let (b0q, msq) = best_stump_quadrature(&spec);
            assert!((b0 - b0q).abs() < 1e-9, "alpha={alpha}: b0 {b0} vs {b0q}");
            assert!((ms - msq).abs() < 1e-9, "alpha={alpha}: mse_stump {ms} vs {msq}");
        }
    }

    #[test]
    fn gap_sign_convention_at_endpoints() {
        // At alpha=0 the stump is exact, so the gap equals -mse_linear(0) < 0.
        let lin0 = best_linear(&CoupleSpec { alpha: 0.0 }).1;
        assert!((mse_gap(0.0) + lin0).abs() < 1e-15);
        assert!(mse_gap(0.0) < 0.0);
        // At alpha=1 the line is exact, so the gap equals +mse_stump(1) = 1/12.
        assert!((mse_gap(1.0) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn root_is_the_tie_alpha() {
        let alpha = find_couple_exponent();
        assert!((alpha - tie_alpha()).abs() < 1e-10, "alpha={alpha}");
        assert!(mse_gap(alpha).abs() < 1e-11);
    }

    #[test]
    fn montecarlo_agrees_at_tie() {
        let spec = CoupleSpec::new(tie_alpha()).unwrap();
        let (ml, ms) = couple_montecarlo(&spec, 1_000_000, 77);
        assert!((ml - 0.0414518).abs() < 1e-3, "mc mse_lin={ml}");
        assert!((ms - 0.0414518).abs() < 1e-3, "mc mse_stump={ms}");
        assert!((ml - ms).abs() <= 3.0 / (1_000_000f64).sqrt());
    }

    #[test]
    fn montecarlo_orders_families_correctly() {
        let lin_target = CoupleSpec::new(1.0).unwrap();
        let (ml, ms) = couple_montecarlo(&lin_target, 10_000, 5);
        assert!(ml < ms);
        let stump_target = CoupleSpec::new(0.0).unwrap();
        let (ml, ms) = couple_montecarlo(&stump_target, 10_000, 5);
        assert!(ms < ml);
    }

    #[test]
    fn invalid_alpha_is_rejected() {
        assert!(CoupleSpec::new(-0.5).is_err());
        assert!(CoupleSpec::new(f64::NAN).is_err());
    }
}
