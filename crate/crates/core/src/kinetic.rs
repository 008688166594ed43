//! Closed-form kinetic limits: ballistic transport plus scattering at the origin.
//!
//! For `x` outside the swept interval `[0, v t]` the initial density is simply
//! transported. Inside, it is the thermal plateau plus the transmitted and
//! reflected copies. The impulsive control also leaves a Dirac term on the
//! characteristic `x = v t`, kept as a separate per-k weight.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::dispersion::{wrap, Dispersion};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rates::{rates_feedback, rates_uncontrolled, RateTriple};
use crate::sim::WavePacket;
use crate::wigner::{KHalf, PhaseSpaceMass, TestFunction};

/// Initial Wigner density `W₀(x, k)`.
pub trait InitialWigner: Sync {
    fn value(&self, x: f64, k: f64) -> f64;
    /// `∫_a^b W₀(x, k) dx`.
    fn x_mass(&self, a: f64, b: f64, k: f64) -> f64;
}

pub struct ZeroInitial;

impl InitialWigner for ZeroInitial {
    fn value(&self, _x: f64, _k: f64) -> f64 {
        0.0
    }
    fn x_mass(&self, _a: f64, _b: f64, _k: f64) -> f64 {
        0.0
    }
}

/// Spatially flat density, e.g. equilibrium at temperature `T`.
pub struct ConstantInitial(pub f64);

impl InitialWigner for ConstantInitial {
    fn value(&self, _x: f64, _k: f64) -> f64 {
        self.0
    }
    fn x_mass(&self, a: f64, b: f64, _k: f64) -> f64 {
        self.0 * (b - a)
    }
}

/// Limit density of the sampled wave packet: Gaussian in `x` and in `k`.
#[derive(Debug, Clone, Copy)]
pub struct PacketInitial {
    pub packet: WavePacket,
    pub sigma_k: f64,
}

impl PacketInitial {
    pub fn new(packet: WavePacket, eps: f64) -> Self {
        PacketInitial { packet, sigma_k: packet.sigma_k(eps) }
    }

    fn k_density(&self, k: f64) -> f64 {
        let d = wrap(k - self.packet.k0);
        (-d * d / (2.0 * self.sigma_k * self.sigma_k)).exp() / (self.sigma_k * (2.0 * PI).sqrt())
    }
}

impl InitialWigner for PacketInitial {
    fn value(&self, x: f64, k: f64) -> f64 {
        let p = &self.packet;
        let d = (x - p.x0) / p.sigma_x;
        p.mass * (-0.5 * d * d).exp() / (p.sigma_x * (2.0 * PI).sqrt()) * self.k_density(k)
    }

    fn x_mass(&self, a: f64, b: f64, k: f64) -> f64 {
        let p = &self.packet;
        let s = p.sigma_x * 2f64.sqrt();
        p.mass * 0.5 * (erf((b - p.x0) / s) - erf((a - p.x0) / s)) * self.k_density(k)
    }
}

/// How the thermostat site is driven in the limit.
#[derive(Clone, Copy)]
pub enum KineticControl<'a> {
    /// Friction `ν` plus an external pulse with transform `k ↦ 𝓕(k)`.
    Impulsive { nu: f64, script_f: &'a (dyn Fn(f64) -> Complex64 + Sync) },
    /// Memory feedback `k ↦ F̂(ω(k)/2π)` with noise strength from `ν`.
    Feedback { nu: f64, fhat: &'a (dyn Fn(f64) -> Complex64 + Sync) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticCoefficients {
    pub k: f64,
    pub v: f64,
    pub rates: RateTriple,
    pub plateau: f64,
    pub atom: f64,
}

pub struct KineticModel<'a> {
    pub disp: Dispersion,
    pub temperature: f64,
    pub w0: &'a dyn InitialWigner,
    pub control: KineticControl<'a>,
}

/// Swept interval `[min(0, vt), max(0, vt)]`, or `None` when it is degenerate.
fn swept(v: f64, t: f64) -> Option<(f64, f64)> {
    let e = v * t;
    if e == 0.0 {
        None
    } else {
        Some((e.min(0.0), e.max(0.0)))
    }
}

impl<'a> KineticModel<'a> {
    pub fn coefficients(&self, k: f64) -> Result<KineticCoefficients> {
        let v = self.disp.group_velocity(k);
        match self.control {
            KineticControl::Impulsive { nu, script_f } => {
                let rates = rates_uncontrolled(&self.disp, nu, k)?;
                let atom = if nu > 0.0 { v.abs() * rates.r_a * script_f(k).norm_sqr() / nu } else { 0.0 };
                Ok(KineticCoefficients { k, v, rates, plateau: rates.r_a * self.temperature, atom })
            }
            KineticControl::Feedback { nu, fhat } => {
                let f = fhat(k);
                let rates = rates_feedback(&self.disp, f, k)?;
                let plateau = -nu * self.temperature * rates.r_a / f.re;
                Ok(KineticCoefficients { k, v, rates, plateau, atom: 0.0 })
            }
        }
    }

    /// Regular part of `W(t, x, k)` given the coefficients at `k`.
    pub fn regular(&self, c: &KineticCoefficients, t: f64, x: f64) -> f64 {
        let shift = c.v * t;
        match swept(c.v, t) {
            Some((lo, hi)) if (lo..=hi).contains(&x) => {
                c.plateau + c.rates.r_t * self.w0.value(x - shift, c.k) + c.rates.r_r * self.w0.value(shift - x, -c.k)
            }
            _ => self.w0.value(x - shift, c.k),
        }
    }

    /// `∫_a^b W(t, x, k) dx`, atom included.
    pub fn x_mass(&self, c: &KineticCoefficients, t: f64, a: f64, b: f64) -> f64 {
        let shift = c.v * t;
        let mut total = self.w0.x_mass(a - shift, b - shift, c.k);
        if let Some((lo, hi)) = swept(c.v, t) {
            let (ia, ib) = (a.max(lo), b.min(hi));
            if ib > ia {
                let inside = self.w0.x_mass(ia - shift, ib - shift, c.k);
                let reflected = self.w0.x_mass(shift - ib, shift - ia, -c.k);
                total += c.plateau * (ib - ia) + (c.rates.r_t - 1.0) * inside + c.rates.r_r * reflected;
            }
        }
        if c.atom != 0.0 && (a..=b).contains(&shift) {
            total += c.atom;
        }
        total
    }

    /// Samples the field on a grid; band-edge wavenumbers are an error.
    pub fn field(&self, t: f64, x_grid: &[f64], k_grid: &[f64]) -> Result<KineticField> {
        let coeffs = k_grid.par_iter().map(|&k| self.coefficients(k)).collect::<Result<Vec<_>>>()?;
        let mut regular = vec![0.0; x_grid.len() * k_grid.len()];
        regular.par_chunks_mut(k_grid.len()).zip(x_grid.par_iter()).for_each(|(row, &x)| {
            for (r, c) in row.iter_mut().zip(&coeffs) {
                *r = self.regular(c, t, x);
            }
        });
        Ok(KineticField {
            t,
            x: x_grid.to_vec(),
            k: k_grid.to_vec(),
            regular,
            atom_weight: coeffs.iter().map(|c| c.atom).collect(),
            atom_position: coeffs.iter().map(|c| c.v * t).collect(),
        })
    }

    /// The model frozen at time `t`, integrated over `x ∈ [−half_length, half_length]`.
    pub fn at(&self, t: f64, half_length: f64) -> KineticSlice<'_, 'a> {
        KineticSlice { model: self, t, half_length, k_nodes: 8192 }
    }
}

/// One time slice of a kinetic model, integrated by exact `x` masses and a fine `k` rule.
pub struct KineticSlice<'m, 'a> {
    pub model: &'m KineticModel<'a>,
    pub t: f64,
    pub half_length: f64,
    /// Midpoint nodes on the whole torus.
    pub k_nodes: usize,
}

impl KineticSlice<'_, '_> {
    fn midpoints(&self, half: KHalf) -> Vec<f64> {
        let n = self.k_nodes;
        (0..n).map(|i| -0.5 + (i as f64 + 0.5) / n as f64).filter(|&k| half.contains(k)).collect()
    }

    fn coefficient_map<T: Send>(&self, half: KHalf, f: impl Fn(&KineticCoefficients) -> T + Sync) -> Result<Vec<T>> {
        self.midpoints(half)
            .par_iter()
            .filter_map(|&k| match self.model.coefficients(k) {
                Ok(c) => Some(Ok(f(&c))),
                // a measure-zero neighbourhood of the band edges is left out
                Err(Error::BandEdge { .. }) => None,
                Err(e) => Some(Err(e)),
            })
            .collect()
    }

    /// `∫∫ O W dx dk` with the atom paired at `x = v t`.
    pub fn pair(&self, o: &TestFunction) -> Result<f64> {
        let gl = GaussLegendre::sixteen();
        let (t, l) = (self.t, self.half_length);
        let parts = self.coefficient_map(KHalf::All, |c| {
            let weight = o.k_profile(c.k);
            if weight < 1e-14 {
                return 0.0;
            }
            let mut cuts = vec![-l, l];
            for p in [0.0, c.v * t] {
                if p > -l && p < l {
                    cuts.push(p);
                }
            }
            cuts.sort_by(f64::total_cmp);
            let mut s = 0.0;
            for w in cuts.windows(2) {
                s += gl.integrate(|x| o.value(x, c.k) * self.model.regular(c, t, x), w[0], w[1], 24);
            }
            s + c.atom * o.value(c.v * t, c.k)
        })?;
        Ok(parts.iter().sum::<f64>() / self.k_nodes as f64)
    }
}

impl PhaseSpaceMass for KineticSlice<'_, '_> {
    fn mass(&self, a: f64, b: f64, half: KHalf) -> Result<f64> {
        let parts = self.coefficient_map(half, |c| self.model.x_mass(c, self.t, a, b))?;
        Ok(parts.iter().sum::<f64>() / self.k_nodes as f64)
    }
}

/// Gridded regular part plus the atom channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticField {
    pub t: f64,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// Row-major over `(x, k)`.
    pub regular: Vec<f64>,
    pub atom_weight: Vec<f64>,
    /// `v(k)·t`, where each atom sits.
    pub atom_position: Vec<f64>,
}

impl KineticField {
    pub fn at(&self, ix: usize, ik: usize) -> f64 {
        self.regular[ix * self.k.len() + ik]
    }

    /// Riemann sum on uniform grids plus the atom channel.
    pub fn pair(&self, o: &TestFunction) -> f64 {
        let dx = if self.x.len() > 1 { self.x[1] - self.x[0] } else { 1.0 };
        let dk = if self.k.len() > 1 { self.k[1] - self.k[0] } else { 1.0 };
        let mut s = 0.0;
        for (ix, &x) in self.x.iter().enumerate() {
            for (ik, &k) in self.k.iter().enumerate() {
                s += o.value(x, k) * self.at(ix, ik);
            }
        }
        let atoms: f64 = self
            .k
            .iter()
            .zip(&self.atom_weight)
            .zip(&self.atom_position)
            .map(|((&k, &w), &x)| w * o.value(x, k))
            .sum();
        s * dx * dk + atoms * dk
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.regular.len() * 16);
        for v in &self.regular {
            out.extend_from_slice(&v.to_le_bytes());
            out.extend_from_slice(&0f64.to_le_bytes());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionOptions {
    /// Width of the band around the origin excluded from both lobes.
    pub margin: f64,
    /// Integration range is `[−half_length, half_length]`.
    pub half_length: f64,
    /// Largest mass allowed inside the margin band, relative to the initial mass.
    pub separation_tol: f64,
}

impl Default for FractionOptions {
    fn default() -> Self {
        FractionOptions { margin: 0.05, half_length: 0.5, separation_tol: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub transmitted: f64,
    pub reflected: f64,
    pub absorbed: f64,
}

/// Splits the mass of a packet that came in with carrier `k0` after it met the origin.
pub fn energy_fractions<M: PhaseSpaceMass + ?Sized>(
    field: &M,
    k0: f64,
    initial_mass: f64,
    opts: &FractionOptions,
) -> Result<Fractions> {
    if !(initial_mass > 0.0) {
        return Err(Error::InvalidParameter("initial mass must be positive".into()));
    }
    let (m, l) = (opts.margin, opts.half_length);
    let stuck = field.mass(-m, m, KHalf::All)?;
    if stuck.abs() > opts.separation_tol * initial_mass {
        return Err(Error::PacketNotSeparated { mass: stuck / initial_mass });
    }
    let (forward, backward) = if k0 > 0.0 { (KHalf::Positive, KHalf::Negative) } else { (KHalf::Negative, KHalf::Positive) };
    let (ahead, behind) = if k0 > 0.0 { ((m, l), (-l, -m)) } else { ((-l, -m), (m, l)) };
    let transmitted = field.mass(ahead.0, ahead.1, forward)? / initial_mass;
    let reflected = field.mass(behind.0, behind.1, backward)? / initial_mass;
    Ok(Fractions { transmitted, reflected, absorbed: 1.0 - transmitted - reflected })
}
