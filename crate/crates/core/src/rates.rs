//! Absorption, transmission and reflection probabilities at the thermostat.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::spectral::{check_nu, lim_lc, theta_f_from_limit, theta_from_limit};

const PROBABILITY_SLACK: f64 = 1e-9;

static CLAMPS: AtomicUsize = AtomicUsize::new(0);

/// Number of rate components that were nudged back into `[0, 1]` so far.
pub fn clamp_events() -> usize {
    CLAMPS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTriple {
    pub k: f64,
    pub r_a: f64,
    pub r_t: f64,
    pub r_r: f64,
}

impl RateTriple {
    pub fn sum(&self) -> f64 {
        self.r_a + self.r_t + self.r_r
    }

    fn checked(self) -> Result<Self> {
        let fix = |name: &'static str, v: f64| -> Result<f64> {
            if !(v >= -PROBABILITY_SLACK && v <= 1.0 + PROBABILITY_SLACK) {
                return Err(Error::NonPhysical { k: self.k, name, value: v });
            }
            if !(0.0..=1.0).contains(&v) {
                CLAMPS.fetch_add(1, Ordering::Relaxed);
            }
            Ok(v.clamp(0.0, 1.0))
        };
        Ok(RateTriple {
            k: self.k,
            r_a: fix("r_a", self.r_a)?,
            r_t: fix("r_t", self.r_t)?,
            r_r: fix("r_r", self.r_r)?,
        })
    }
}

/// Rates with friction `ν` and no feedback.
pub fn rates_uncontrolled(disp: &Dispersion, nu: f64, k: f64) -> Result<RateTriple> {
    check_nu(nu)?;
    let lim = lim_lc(disp, k)?;
    Ok(uncontrolled_from_limit(disp, nu, k, lim)?)
}

pub(crate) fn uncontrolled_from_limit(disp: &Dispersion, nu: f64, k: f64, lim: Complex64) -> Result<RateTriple> {
    let v = disp.group_velocity(k).abs();
    let th = theta_from_limit(nu, lim);
    let r_a = nu * th.norm_sqr() / v;
    let r_r = nu * r_a / (4.0 * v);
    let r_t = 1.0 - th.re * nu / v + r_r;
    RateTriple { k, r_a, r_t, r_r }.checked()
}

/// Rates under the memory feedback whose transform at `ω(k)/2π` is `fhat`.
pub fn rates_feedback(disp: &Dispersion, fhat: Complex64, k: f64) -> Result<RateTriple> {
    if !(fhat.re < 0.0) {
        return Err(Error::AssumptionL1Violated { k, re: fhat.re });
    }
    let lim = lim_lc(disp, k)?;
    feedback_from_limit(disp, fhat, k, lim)
}

pub(crate) fn feedback_from_limit(disp: &Dispersion, fhat: Complex64, k: f64, lim: Complex64) -> Result<RateTriple> {
    let v = disp.group_velocity(k).abs();
    let th = theta_f_from_limit(fhat, lim);
    let amp = fhat.norm_sqr() * th.norm_sqr();
    let r_a = -fhat.re * th.norm_sqr() / v;
    let r_r = amp / (4.0 * v * v);
    let r_t = 1.0 + (fhat.conj() * th).re / v + r_r;
    RateTriple { k, r_a, r_t, r_r }.checked()
}

/// Residual of `Re θ = (1 + νπ/|ω′|)|θ|²`.
pub fn theta_identity_residual(disp: &Dispersion, nu: f64, k: f64) -> Result<f64> {
    let th = theta_from_limit(nu, lim_lc(disp, k)?);
    let wp = disp.omega_prime(k).abs();
    Ok((th.re - (1.0 + nu * PI / wp) * th.norm_sqr()).abs())
}

/// Residual of `Re(conj(F̂)θ_F) = (Re F̂ − |F̂|²π/|ω′|)|θ_F|²`.
pub fn theta_f_identity_residual(disp: &Dispersion, fhat: Complex64, k: f64) -> Result<f64> {
    let th = theta_f_from_limit(fhat, lim_lc(disp, k)?);
    let wp = disp.omega_prime(k).abs();
    let lhs = (fhat.conj() * th).re;
    let rhs = (fhat.re - fhat.norm_sqr() * PI / wp) * th.norm_sqr();
    Ok((lhs - rhs).abs())
}

/// What drives the rates on a grid.
pub enum RateControl<'a> {
    Uncontrolled { nu: f64 },
    /// `k ↦ F̂(ω(k)/2π)`.
    Feedback(&'a (dyn Fn(f64) -> Complex64 + Sync)),
}

/// Pointwise rates over a grid; failures stay in place.
pub fn rate_grid(disp: &Dispersion, control: &RateControl<'_>, k_grid: &[f64]) -> Vec<Result<RateTriple>> {
    k_grid
        .par_iter()
        .map(|&k| match control {
            RateControl::Uncontrolled { nu } => rates_uncontrolled(disp, *nu, k),
            RateControl::Feedback(f) => rates_feedback(disp, f(k), k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::uniform_grid;
    use crate::spectral::{lim_laplace_c_omega, LimitMethod};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit() -> Dispersion {
        Dispersion::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn small_friction_is_transparent() {
        let r = rates_uncontrolled(&unit(), 1e-12, 0.3).unwrap();
        assert_abs_diff_eq!(r.r_a, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.r_r, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.r_t, 1.0, epsilon = 1e-10);
        let r = rates_uncontrolled(&unit(), 0.0, 0.3).unwrap();
        assert_eq!((r.r_a, r.r_t, r.r_r), (0.0, 1.0, 0.0));
    }

    #[test]
    fn golden_triple_at_quarter() {
        // independent composition: numeric oracle for the limit, formulas by hand
        let d = unit();
        let lim = lim_laplace_c_omega(&d, 0.25.into(), LimitMethod::NumericOracle).unwrap();
        let v = d.group_velocity(0.25);
        let th = 1.0 / (1.0 + lim);
        let r_a = th.norm_sqr() / v;
        let r = rates_uncontrolled(&d, 1.0, 0.25).unwrap();
        assert_abs_diff_eq!(r.r_a, r_a, epsilon = 1e-7);
        assert_abs_diff_eq!(r.r_a, 0.485_281_4, epsilon = 1e-6);
        assert_abs_diff_eq!(r.r_t, 0.171_572_9, epsilon = 1e-6);
        assert_abs_diff_eq!(r.r_r, 0.343_145_8, epsilon = 1e-6);
        assert!((r.sum() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sum_rule_on_grid() {
        let d = unit();
        for k in uniform_grid(0.05, 0.45, 64) {
            let r = rates_uncontrolled(&d, 1.0, k).unwrap();
            assert!((r.sum() - 1.0).abs() < 1e-6, "{k}: {r:?}");
        }
    }

    #[test]
    fn feedback_equals_friction() {
        let d = unit();
        for k in uniform_grid(0.05, 0.45, 33) {
            for &nu in &[0.5, 1.0, 2.0] {
                let a = rates_feedback(&d, Complex64::new(-nu, 0.0), k).unwrap();
                let b = rates_uncontrolled(&d, nu, k).unwrap();
                assert!((a.r_a - b.r_a).abs() < 1e-9);
                assert!((a.r_t - b.r_t).abs() < 1e-9);
                assert!((a.r_r - b.r_r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weak_feedback_is_transparent() {
        let r = rates_feedback(&unit(), Complex64::new(-1e-9, 1e-9), 0.2).unwrap();
        assert!(r.r_a < 1e-8 && r.r_r < 1e-8 && (r.r_t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn complex_feedback_sums_to_one() {
        let r = rates_feedback(&unit(), Complex64::new(-1.0, 0.5), 0.3).unwrap();
        assert!((r.sum() - 1.0).abs() < 1e-6);
        assert!(matches!(
            rates_feedback(&unit(), Complex64::new(0.1, 0.5), 0.3),
            Err(Error::AssumptionL1Violated { .. })
        ));
    }

    #[test]
    fn grid_examples() {
        let d = unit();
        assert!(rate_grid(&d, &RateControl::Uncontrolled { nu: 1.0 }, &[]).is_empty());
        let out = rate_grid(&d, &RateControl::Uncontrolled { nu: 1.0 }, &[0.1, 0.25, 0.4]);
        assert!(out.iter().all(|r| (r.as_ref().unwrap().sum() - 1.0).abs() < 1e-6));
        let out = rate_grid(&d, &RateControl::Uncontrolled { nu: 1.0 }, &[0.1, 0.5, 0.4]);
        assert!(matches!(out[1], Err(Error::BandEdge { .. })));
        assert!(out[0].is_ok() && out[2].is_ok());
        let f = |_k: f64| Complex64::new(-1.0, 0.2);
        let out = rate_grid(&d, &RateControl::Feedback(&f), &[0.1, 0.3]);
        assert!(out.iter().all(|r| r.is_ok()));
    }

    #[test]
    fn large_friction_suppresses_absorption() {
        let d = unit();
        let a: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&nu| rates_uncontrolled(&d, nu, 0.3).unwrap().r_a)
            .collect();
        assert!(a[0] > a[1] && a[1] > a[2]);
        let r = rates_uncontrolled(&d, 1e4, 0.3).unwrap();
        assert!(r.r_r > 0.99, "{r:?}");
    }

    #[test]
    fn identities_hold() {
        let d = unit();
        for k in uniform_grid(0.05, 0.45, 40) {
            assert!(theta_identity_residual(&d, 1.3, k).unwrap() < 1e-6);
            assert!(theta_f_identity_residual(&d, Complex64::new(-0.7, -0.4), k).unwrap() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn even_in_k(k in 0.02f64..0.48, nu in 0.05f64..5.0) {
            let d = unit();
            let a = rates_uncontrolled(&d, nu, k).unwrap();
            let b = rates_uncontrolled(&d, nu, -k).unwrap();
            prop_assert!((a.r_a - b.r_a).abs() < 1e-9);
            prop_assert!((a.r_t - b.r_t).abs() < 1e-9);
            prop_assert!((a.r_r - b.r_r).abs() < 1e-9);
        }

        #[test]
        fn square_root_triangle(k in 0.02f64..0.48, re in -5.0f64..-0.01, im in -5.0f64..5.0,
                                w0 in 0.3f64..3.0, g in 0.2f64..4.0) {
            let d = Dispersion::new(w0, g).unwrap();
            let r = rates_feedback(&d, Complex64::new(re, im), k).unwrap();
            prop_assert!((r.sum() - 1.0).abs() < 1e-6);
            prop_assert!(r.r_t.sqrt() + r.r_r.sqrt() >= 1.0 - 1e-9);
        }
    }
}
