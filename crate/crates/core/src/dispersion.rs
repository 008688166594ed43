//! Nearest-neighbour dispersion relation on the unit torus.
//!
//! `ω(k) = sqrt(ω0² + γ(1 − cos 2πk))`, even in `k`, increasing on `(0, 1/2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A wavenumber on the torus, stored as its centred representative in `(−1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Self {
        Wavenumber(wrap(k))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for Wavenumber {
    fn from(k: f64) -> Self {
        Wavenumber::new(k)
    }
}

/// Wraps `k` modulo 1. Both ±1/2 map to +1/2.
pub fn wrap(k: f64) -> f64 {
    if k > -0.5 && k <= 0.5 {
        return k;
    }
    let r = k - k.floor();
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    omega0: f64,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint {
    pub k: f64,
    pub omega: f64,
    pub omega_prime: f64,
    pub v_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn of(k: f64) -> Branch {
        if k < 0.0 {
            Branch::Minus
        } else {
            Branch::Plus
        }
    }

    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quotient {
    Central,
    Plus,
    Minus,
}

impl Dispersion {
    pub fn new(omega0: f64, gamma: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidParameter(format!("omega0 must be > 0, got {omega0}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Dispersion { omega0, gamma })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega_min(&self) -> f64 {
        self.omega0
    }

    pub fn omega_max(&self) -> f64 {
        (self.omega0 * self.omega0 + 2.0 * self.gamma).sqrt()
    }

    /// `σ̂(k) = ω(k)²`.
    pub fn sigma_hat(&self, k: f64) -> f64 {
        self.omega0 * self.omega0 + self.gamma * (1.0 - (2.0 * PI * k).cos())
    }

    pub fn omega(&self, k: f64) -> f64 {
        self.sigma_hat(k).sqrt()
    }

    pub fn omega_prime(&self, k: f64) -> f64 {
        self.gamma * PI * (2.0 * PI * k).sin() / self.omega(k)
    }

    pub fn omega_second(&self, k: f64) -> f64 {
        let w = self.omega(k);
        let wp = self.omega_prime(k);
        (2.0 * PI * PI * self.gamma * (2.0 * PI * k).cos() - wp * wp) / w
    }

    pub fn group_velocity(&self, k: f64) -> f64 {
        self.omega_prime(k) / (2.0 * PI)
    }

    pub fn evaluate(&self, k: Wavenumber) -> DispersionPoint {
        let k = k.value();
        let omega_prime = self.omega_prime(k);
        DispersionPoint {
            k,
            omega: self.omega(k),
            omega_prime,
            v_g: omega_prime / (2.0 * PI),
        }
    }

    /// Inverse of ω on the chosen half of the torus.
    pub fn phi_inverse(&self, wbar: f64, branch: Branch) -> Result<f64> {
        let s = self.inverse_arg(wbar)?;
        Ok(branch.sign() * s.sqrt().asin() / PI)
    }

    /// Derivative of `phi_inverse` in `wbar`; infinite at the band edges.
    pub fn phi_inverse_derivative(&self, wbar: f64, branch: Branch) -> Result<f64> {
        let s = self.inverse_arg(wbar)?;
        let d = wbar / (PI * self.gamma * (s * (1.0 - s)).sqrt() * 2.0);
        Ok(branch.sign() * d)
    }

    fn inverse_arg(&self, wbar: f64) -> Result<f64> {
        let (lo, hi) = (self.omega_min(), self.omega_max());
        let slack = 1e-12 * hi;
        if !(wbar >= lo - slack && wbar <= hi + slack) {
            return Err(Error::OutOfBand { wbar, lo, hi });
        }
        let s = (wbar * wbar - self.omega0 * self.omega0) / (2.0 * self.gamma);
        Ok(s.clamp(0.0, 1.0))
    }

    /// Regular factor at the bottom edge: `φ′+(w̄)·sqrt(w̄ − ω_min) = φ1(w̄)`.
    pub fn edge_factor_min(&self, wbar: f64) -> f64 {
        let s = (wbar * wbar - self.omega0 * self.omega0) / (2.0 * self.gamma);
        wbar / (PI * (2.0 * self.gamma).sqrt() * (wbar + self.omega0).sqrt() * (1.0 - s).sqrt())
    }

    /// Regular factor at the top edge: `φ′+(w̄)·sqrt(ω_max − w̄) = φ2(w̄)`.
    pub fn edge_factor_max(&self, wbar: f64) -> f64 {
        let s = (wbar * wbar - self.omega0 * self.omega0) / (2.0 * self.gamma);
        wbar / (PI * (2.0 * self.gamma).sqrt() * (wbar + self.omega_max()).sqrt() * s.sqrt())
    }

    /// Difference quotient of ω in the direction `ξ` at scale `eps`.
    pub fn d_epsilon(&self, k: Wavenumber, xi: f64, eps: f64, variant: Quotient) -> f64 {
        let k = k.value();
        let w = |q: f64| self.omega(wrap(q));
        match variant {
            Quotient::Central => (w(k + 0.5 * eps * xi) - w(k - 0.5 * eps * xi)) / eps,
            Quotient::Plus => (w(k + eps * xi) - w(k)) / eps,
            Quotient::Minus => (w(k) - w(k - eps * xi)) / eps,
        }
    }

    pub fn check_assumptions(&self) -> AssumptionReport {
        let n = 1024;
        let grid: Vec<f64> = (0..n).map(|j| j as f64 / n as f64 - 0.5).collect();
        let even_residual = grid
            .iter()
            .map(|&k| (self.omega(k) - self.omega(-k)).abs())
            .fold(0.0, f64::max);
        let positive = grid.iter().all(|&k| self.sigma_hat(k) > 0.0);
        let half: Vec<f64> = (1..n / 2).map(|j| j as f64 / n as f64).collect();
        let monotone = half.windows(2).all(|w| self.omega(w[1]) > self.omega(w[0]));

        let (lo, hi) = (self.omega_min(), self.omega_max());
        // one-sided step, relative to the band width so narrow bands are resolved
        let h = 1e-6 * (hi - lo);
        let fd = |w: f64, dir: f64| -> f64 {
            let a = self.phi_inverse(w, Branch::Plus).unwrap_or(f64::NAN);
            let b = self.phi_inverse(w + dir * h, Branch::Plus).unwrap_or(f64::NAN);
            dir * (b - a) / h
        };
        let mut min_edge_error: f64 = 0.0;
        let mut max_edge_error: f64 = 0.0;
        let band = hi - lo;
        for &d in &[1e-2, 3e-3, 1e-3] {
            let w = lo + d * band;
            let product = fd(w, 1.0) * (w - lo).sqrt();
            min_edge_error = min_edge_error.max(rel(product, self.edge_factor_min(w)));
            let w = hi - d * band;
            let product = fd(w, -1.0) * (hi - w).sqrt();
            max_edge_error = max_edge_error.max(rel(product, self.edge_factor_max(w)));
        }
        AssumptionReport {
            even_residual,
            even: even_residual < 1e-14,
            positive,
            monotone,
            min_edge_limit: self.edge_factor_min(lo),
            min_edge_error,
            min_edge_ok: min_edge_error < 1e-2 && self.edge_factor_min(lo).is_finite(),
            max_edge_limit: self.edge_factor_max(hi),
            max_edge_error,
            max_edge_ok: max_edge_error < 1e-2 && self.edge_factor_max(hi).is_finite(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub even_residual: f64,
    pub even: bool,
    pub positive: bool,
    pub monotone: bool,
    /// `φ1(ω_min)`.
    pub min_edge_limit: f64,
    /// Worst relative gap between the finite-difference product and `φ1` near the bottom edge.
    pub min_edge_error: f64,
    pub min_edge_ok: bool,
    pub max_edge_limit: f64,
    pub max_edge_error: f64,
    pub max_edge_ok: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.even && self.positive && self.monotone && self.min_edge_ok && self.max_edge_ok
    }
}

/// Uniform grid of `n` points on `[a, b]`, endpoints included.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect(),
    }
}

/// The discrete torus `k_j = j/n − 1/2`.
pub fn torus_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / n as f64 - 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit() -> Dispersion {
        Dispersion::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn values_at_quarter() {
        let p = unit().evaluate(0.25.into());
        assert_abs_diff_eq!(p.omega, 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.omega_prime, PI / 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(p.v_g, 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn values_at_edges() {
        let d = unit();
        let p = d.evaluate(0.0.into());
        assert_eq!((p.omega, p.omega_prime, p.v_g), (1.0, 0.0, 0.0));
        let p = d.evaluate(0.5.into());
        assert_abs_diff_eq!(p.omega, 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.omega_prime, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Dispersion::new(0.0, 1.0).is_err());
        assert!(Dispersion::new(1.0, -1.0).is_err());
        assert!(Dispersion::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn wrapping_ties_go_up() {
        assert_eq!(wrap(-0.5), 0.5);
        assert_eq!(wrap(0.5), 0.5);
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.75), 0.25);
    }

    #[test]
    fn inverse_examples() {
        let d = unit();
        assert_abs_diff_eq!(d.phi_inverse(2f64.sqrt(), Branch::Plus).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(d.phi_inverse(1.0, Branch::Plus).unwrap(), 0.0);
        let w = d.omega(0.3);
        assert_abs_diff_eq!(d.phi_inverse(w, Branch::Minus).unwrap(), -0.3, epsilon = 1e-13);
        assert!(matches!(d.phi_inverse(0.5, Branch::Plus), Err(Error::OutOfBand { .. })));
        assert!(matches!(d.phi_inverse(2.0, Branch::Plus), Err(Error::OutOfBand { .. })));
    }

    #[test]
    fn inverse_derivative_matches_finite_difference() {
        let d = unit();
        for &w in &[1.1, 1.4, 1.7] {
            let h = 1e-6;
            let fd = (d.phi_inverse(w + h, Branch::Plus).unwrap()
                - d.phi_inverse(w - h, Branch::Plus).unwrap())
                / (2.0 * h);
            let exact = d.phi_inverse_derivative(w, Branch::Plus).unwrap();
            assert!((fd - exact).abs() < 1e-7 * exact.abs(), "{w}: {fd} vs {exact}");
        }
    }

    #[test]
    fn quotient_examples() {
        let d = unit();
        assert_eq!(d.d_epsilon(0.3.into(), 0.0, 0.1, Quotient::Central), 0.0);
        let c = d.d_epsilon(0.25.into(), 1.0, 1e-6, Quotient::Central);
        assert_abs_diff_eq!(c, 2.221_441_5, epsilon = 1e-5);
        let c = d.d_epsilon(0.25.into(), 2.0, 0.1, Quotient::Central);
        assert_abs_diff_eq!(c, 10.0 * (d.omega(0.35) - d.omega(0.15)), epsilon = 1e-14);
    }

    #[test]
    fn central_quotient_is_second_order() {
        let d = unit();
        let err = |eps: f64| {
            let mut m: f64 = 0.0;
            for i in 0..20 {
                let k = -0.45 + 0.9 * i as f64 / 19.0;
                for &xi in &[-2.0, -0.5, 1.0, 3.0] {
                    let q = d.d_epsilon(k.into(), xi, eps, Quotient::Central);
                    m = m.max((q - d.omega_prime(k) * xi).abs());
                }
            }
            m
        };
        let (e2, e3, e4) = (err(1e-2), err(1e-3), err(1e-4));
        assert!(e2 / e3 > 80.0 && e3 / e4 > 80.0, "{e2} {e3} {e4}");
    }

    #[test]
    fn assumptions_hold_for_unit_family() {
        let r = unit().check_assumptions();
        assert!(r.all_pass(), "{r:?}");
        assert_abs_diff_eq!(r.min_edge_limit, 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert_eq!(r.even_residual, 0.0);
    }

    #[test]
    fn assumptions_hold_for_other_parameters() {
        for &(w0, g) in &[(0.3, 2.0), (2.0, 0.1), (1.0, 10.0)] {
            let r = Dispersion::new(w0, g).unwrap().check_assumptions();
            assert!(r.all_pass(), "{w0} {g}: {r:?}");
        }
    }

    #[test]
    fn group_velocity_is_exact_ratio() {
        let d = unit();
        for k in torus_grid(1024) {
            let p = d.evaluate(k.into());
            assert_eq!(p.v_g, p.omega_prime / (2.0 * PI));
        }
    }

    #[test]
    fn monotone_on_open_half() {
        let d = Dispersion::new(0.7, 1.3).unwrap();
        let g = uniform_grid(1e-4, 0.5 - 1e-4, 4000);
        assert!(g.windows(2).all(|w| d.omega(w[1]) > d.omega(w[0])));
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let d = unit();
        for &k in &[0.0, 0.1, 0.25, 0.4] {
            let h = 1e-5;
            let fd = (d.omega_prime(k + h) - d.omega_prime(k - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, d.omega_second(k), epsilon = 1e-6);
        }
    }

    proptest! {
        #[test]
        fn inverse_round_trip(k in -0.4999f64..0.4999, w0 in 0.2f64..3.0, g in 0.1f64..5.0) {
            let d = Dispersion::new(w0, g).unwrap();
            let w = d.omega(k);
            let back = d.phi_inverse(w, Branch::of(k)).unwrap();
            prop_assert!((d.omega(back) - w).abs() < 1e-12);
        }

        #[test]
        fn parity(k in -0.5f64..0.5) {
            let d = unit();
            prop_assert_eq!(d.omega(k), d.omega(-k));
            prop_assert!((d.omega_prime(k) + d.omega_prime(-k)).abs() < 1e-15);
        }

        #[test]
        fn wrap_is_idempotent_and_periodic(k in -10.0f64..10.0) {
            let w = wrap(k);
            prop_assert!(w > -0.5 && w <= 0.5);
            prop_assert_eq!(wrap(w), w);
            prop_assert!((wrap(k + 1.0) - w).abs() < 1e-12 || (wrap(k + 1.0) - w).abs() > 0.999);
        }
    }
}
