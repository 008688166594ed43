//! Cosine kernel `C_ω`, its Laplace transform, and the boundary value on the
//! imaginary axis that drives every scattering amplitude.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{Dispersion, Wavenumber};
use crate::error::{Error, Result};
use crate::quadrature::{richardson, torus_mean, GaussLegendre};

/// Below this `|ω′(k)|` the boundary limit is refused.
pub const BAND_EDGE_THRESHOLD: f64 = 1e-3;

/// Default node count for smooth torus integrals.
pub const TORUS_NODES: usize = 4096;

/// `C_ω(t) = ∫ cos(ω(k) t) dk`.
pub fn c_omega_time(disp: &Dispersion, t: f64) -> f64 {
    c_omega_time_with(disp, t, TORUS_NODES)
}

pub fn c_omega_time_with(disp: &Dispersion, t: f64, nodes: usize) -> f64 {
    torus_mean(nodes, |k| (disp.omega(k) * t).cos())
}

/// `L(C_ω)(Z) = ∫ Z / (Z² + ω(k)²) dk` for `Re Z > 0`.
///
/// The node count adapts to the distance of the integrand's poles from the
/// real axis, so the result stays at machine accuracy as `Z` approaches the
/// imaginary axis.
pub fn laplace_c_omega(disp: &Dispersion, z: Complex64) -> Result<Complex64> {
    if !(z.re > 0.0) {
        return Err(Error::DomainError(z.re));
    }
    let delta = pole_distance(disp, z);
    let need = (6.0 / delta).ceil();
    let nodes = if need > (1u64 << 24) as f64 {
        1usize << 24
    } else {
        (need as usize).max(TORUS_NODES)
    };
    Ok(laplace_c_omega_with(disp, z, nodes))
}

/// Fixed-node variant of [`laplace_c_omega`].
pub fn laplace_c_omega_with(disp: &Dispersion, z: Complex64, nodes: usize) -> Complex64 {
    let z2 = z * z;
    let f = |k: f64| z / (z2 + disp.sigma_hat(k));
    if nodes % 2 == 1 {
        return torus_mean(nodes, f);
    }
    // even integrand: sum over [0, 1/2] with the end weights halved
    let h = 1.0 / nodes as f64;
    let mut s = 0.5 * (f(0.0) + f(0.5));
    for j in 1..nodes / 2 {
        s += f(j as f64 * h);
    }
    s * (2.0 * h)
}

/// Imaginary distance from the real axis to the nearest pole of `Z/(Z²+ω²)`
/// viewed as a function of `k`.
fn pole_distance(disp: &Dispersion, z: Complex64) -> f64 {
    let g = disp.gamma();
    let c = (z * z + disp.omega0() * disp.omega0() + g) / g;
    (c.acos().im / (2.0 * PI)).abs().max(1e-300)
}

/// Which algebraic arrangement of the boundary-limit closed form to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitReading {
    /// The logarithm and `C_{ω,0}` share the factor `1/|ω′(k)|`.
    Uniform,
    /// Only `C_{ω,0}` carries `1/|ω′(k)|`.
    LogUnscaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitMethod {
    ClosedForm(LimitReading),
    NumericOracle,
}

impl Default for LimitMethod {
    fn default() -> Self {
        LimitMethod::ClosedForm(LimitReading::Uniform)
    }
}

/// `lim_{Z→0⁺} L(C_ω)(Z − iω(k))`, the closed-form default.
pub fn lim_lc(disp: &Dispersion, k: f64) -> Result<Complex64> {
    lim_laplace_c_omega(disp, k.into(), LimitMethod::default())
}

pub fn lim_laplace_c_omega(disp: &Dispersion, k: Wavenumber, method: LimitMethod) -> Result<Complex64> {
    let k = k.value().abs();
    let wp = disp.omega_prime(k).abs();
    if wp < BAND_EDGE_THRESHOLD || k == 0.0 || k >= 0.5 {
        return Err(Error::BandEdge { k, omega_prime: wp });
    }
    match method {
        LimitMethod::ClosedForm(reading) => Ok(closed_form(disp, k, reading)),
        LimitMethod::NumericOracle => numeric_oracle(disp, k),
    }
}

/// `∫_0^{1/2} dh / (ω(k) + ω(h))`.
pub fn s1(disp: &Dispersion, k: f64) -> f64 {
    let w = disp.omega(k);
    GaussLegendre::sixteen().integrate(|h| 1.0 / (w + disp.omega(h)), 0.0, 0.5, 4)
}

/// `C_{ω,0}(k) = ∫_0^{1/2} (ω′(k) − ω′(h)) / (ω(k) − ω(h)) dh`, `k ∈ (0, 1/2)`.
///
/// Panels are split at `h = k`; the removable value there is `ω″(k)/ω′(k)`.
pub fn c_omega_0(disp: &Dispersion, k: f64) -> f64 {
    let (w, wp) = (disp.omega(k), disp.omega_prime(k));
    let at_k = disp.omega_second(k) / wp;
    let f = |h: f64| {
        if (h - k).abs() < 1e-7 {
            at_k
        } else {
            (wp - disp.omega_prime(h)) / (w - disp.omega(h))
        }
    };
    let gl = GaussLegendre::sixteen();
    gl.integrate(f, 0.0, k, 6) + gl.integrate(f, k, 0.5, 6)
}

fn closed_form(disp: &Dispersion, k: f64, reading: LimitReading) -> Complex64 {
    let w = disp.omega(k);
    let wp = disp.omega_prime(k).abs();
    let log = ((w - disp.omega_min()) / (disp.omega_max() - w)).ln();
    let c0 = c_omega_0(disp, k);
    let im = match reading {
        LimitReading::Uniform => s1(disp, k) + (log + c0) / wp,
        LimitReading::LogUnscaled => s1(disp, k) + log + c0 / wp,
    };
    Complex64::new(PI / wp, im)
}

fn numeric_oracle(disp: &Dispersion, k: f64) -> Result<Complex64> {
    let w = disp.omega(k);
    let z0 = 1.0;
    let values = (4..=14)
        .map(|j| laplace_c_omega(disp, Complex64::new(z0 * 0.5f64.powi(j), -w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(richardson(&values, 2.0, 2))
}

/// Picks the closed-form reading closest to the numeric oracle over `k_grid`.
/// Returns the winner and the worst relative error of each reading.
pub fn select_reading(disp: &Dispersion, k_grid: &[f64]) -> Result<(LimitReading, f64, f64)> {
    let mut worst = [0.0f64; 2];
    for &k in k_grid {
        let oracle = lim_laplace_c_omega(disp, k.into(), LimitMethod::NumericOracle)?;
        for (i, r) in [LimitReading::Uniform, LimitReading::LogUnscaled].iter().enumerate() {
            let c = lim_laplace_c_omega(disp, k.into(), LimitMethod::ClosedForm(*r))?;
            worst[i] = worst[i].max((c - oracle).norm() / oracle.norm());
        }
    }
    let pick = if worst[0] <= worst[1] {
        LimitReading::Uniform
    } else {
        LimitReading::LogUnscaled
    };
    Ok((pick, worst[0], worst[1]))
}

/// Boundary limit together with the friction amplitude at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub k: f64,
    pub lim_lc: Complex64,
    pub theta: Complex64,
}

pub fn spectral_point(disp: &Dispersion, nu: f64, k: f64) -> Result<SpectralPoint> {
    let lim = lim_lc(disp, k)?;
    Ok(SpectralPoint { k, lim_lc: lim, theta: theta_from_limit(nu, lim) })
}

/// `θ(k) = 1 / (1 + ν·lim L(C_ω))`.
pub fn theta(disp: &Dispersion, nu: f64, k: f64) -> Result<Complex64> {
    check_nu(nu)?;
    Ok(theta_from_limit(nu, lim_lc(disp, k)?))
}

pub fn theta_from_limit(nu: f64, lim: Complex64) -> Complex64 {
    if nu.is_infinite() {
        return Complex64::new(0.0, 0.0);
    }
    1.0 / (1.0 + nu * lim)
}

/// `θ_F(k) = 1 / (1 − conj(F̂)·lim L(C_ω))`, requires `Re F̂ < 0`.
pub fn theta_f(disp: &Dispersion, fhat: Complex64, k: f64) -> Result<Complex64> {
    if !(fhat.re < 0.0) {
        return Err(Error::AssumptionL1Violated { k, re: fhat.re });
    }
    Ok(theta_f_from_limit(fhat, lim_lc(disp, k)?))
}

pub fn theta_f_from_limit(fhat: Complex64, lim: Complex64) -> Complex64 {
    1.0 / (1.0 - fhat.conj() * lim)
}

pub(crate) fn check_nu(nu: f64) -> Result<()> {
    if nu >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("friction must be >= 0, got {nu}")))
    }
}
