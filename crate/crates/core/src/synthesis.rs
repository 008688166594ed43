//! Feedback control synthesis: admissible target rates → frequency response
//! `F̄` → causal time-domain kernel `F` → cutoff family `F_N` → recovered rates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{uniform_grid, Branch, Dispersion};
use crate::error::{Error, Result};
use crate::quadrature::trapezoid_weights;
use crate::rates::{feedback_from_limit, RateTriple};
use crate::spectral::{lim_laplace_c_omega, LimitMethod};

/// Target rates sampled on an increasing grid inside `(0, 1/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRates {
    pub k_grid: Vec<f64>,
    pub r_a: Vec<f64>,
    pub r_t: Vec<f64>,
    pub r_r: Vec<f64>,
    pub c1: f64,
}

impl TargetRates {
    pub fn new(k_grid: Vec<f64>, r_a: Vec<f64>, r_t: Vec<f64>, r_r: Vec<f64>, c1: f64) -> Result<Self> {
        let n = k_grid.len();
        if n == 0 || r_a.len() != n || r_t.len() != n || r_r.len() != n {
            return Err(Error::InvalidParameter("target columns must be non-empty and of equal length".into()));
        }
        if k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("target k grid must be strictly increasing".into()));
        }
        Ok(TargetRates { k_grid, r_a, r_t, r_r, c1 })
    }

    /// Targets `k ↦ (r_t, r_r)` with `r_a = 1 − r_t − r_r` and `c1 = min r_a`.
    pub fn from_fn(k_grid: Vec<f64>, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let (r_t, r_r): (Vec<f64>, Vec<f64>) = k_grid.iter().map(|&k| f(k)).unzip();
        let r_a: Vec<f64> = r_t.iter().zip(&r_r).map(|(t, r)| 1.0 - t - r).collect();
        let c1 = r_a.iter().cloned().fold(f64::INFINITY, f64::min);
        TargetRates::new(k_grid, r_a, r_t, r_r, c1)
    }

    pub fn constant(k_grid: Vec<f64>, r_a: f64, r_t: f64, r_r: f64) -> Result<Self> {
        let n = k_grid.len();
        TargetRates::new(k_grid, vec![r_a; n], vec![r_t; n], vec![r_r; n], r_a)
    }

    pub fn len(&self) -> usize {
        self.k_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_grid.is_empty()
    }

    /// Linear interpolation in `k`, constant beyond the grid ends.
    pub fn at(&self, k: f64) -> (f64, f64, f64) {
        let g = &self.k_grid;
        let n = g.len();
        if n == 1 || k <= g[0] {
            return (self.r_a[0], self.r_t[0], self.r_r[0]);
        }
        if k >= g[n - 1] {
            return (self.r_a[n - 1], self.r_t[n - 1], self.r_r[n - 1]);
        }
        let j = g.partition_point(|&x| x <= k) - 1;
        let s = (k - g[j]) / (g[j + 1] - g[j]);
        let lerp = |v: &[f64]| v[j] + s * (v[j + 1] - v[j]);
        (lerp(&self.r_a), lerp(&self.r_t), lerp(&self.r_r))
    }
}

/// Largest jump between neighbouring target samples that still counts as continuous.
pub const H4_MAX_JUMP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ran: bool,
    pub passed: bool,
    /// Worst violation measure for this check (0 when clean).
    pub worst: f64,
    pub failures: Vec<f64>,
}

impl Check {
    fn run(k_grid: &[f64], violation: impl Fn(usize) -> f64) -> Check {
        let mut worst: f64 = 0.0;
        let mut failures = Vec::new();
        for (i, &k) in k_grid.iter().enumerate() {
            let v = violation(i);
            if v > 0.0 || v.is_nan() {
                failures.push(k);
                worst = worst.max(if v.is_nan() { f64::INFINITY } else { v });
            }
        }
        Check { ran: true, passed: failures.is_empty(), worst, failures }
    }

    fn skipped() -> Check {
        Check { ran: false, passed: false, worst: 0.0, failures: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H6Report {
    pub probes: Vec<f64>,
    pub max_discrepancy: f64,
    pub max_abs_f: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub h1: Check,
    pub h2: Check,
    pub h3: Check,
    pub h4: Check,
    pub h5: Check,
    pub h6: Option<H6Report>,
    pub l1: Check,
}

impl AdmissibilityReport {
    /// The gate for building a design: domain, sum rule, positivity, square-root inequality.
    pub fn admissible(&self) -> bool {
        self.h1.passed && self.h2.passed && self.h3.passed && self.h5.passed
    }

    pub fn failed_checks(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, c) in [("H1", &self.h1), ("H2", &self.h2), ("H3", &self.h3), ("H4", &self.h4), ("H5", &self.h5), ("L1", &self.l1)] {
            if c.ran && !c.passed {
                out.push(name);
            }
        }
        if matches!(&self.h6, Some(h) if !h.passed) {
            out.push("H6");
        }
        out
    }
}

pub fn check_targets(targets: &TargetRates) -> AdmissibilityReport {
    let k = &targets.k_grid;
    let t = targets;
    let h1 = Check::run(k, |i| if k[i] > 0.0 && k[i] < 0.5 { 0.0 } else { 1.0 });
    let h2 = Check::run(k, |i| {
        let e = (t.r_a[i] + t.r_t[i] + t.r_r[i] - 1.0).abs();
        if e > 1e-9 { e } else { 0.0 }
    });
    let h3 = Check::run(k, |i| {
        let mut v: f64 = 0.0;
        if !(t.r_t[i] > 0.0) {
            v = v.max(-t.r_t[i]).max(1e-300);
        }
        if !(t.r_r[i] > 0.0) {
            v = v.max(-t.r_r[i]).max(1e-300);
        }
        if !(t.c1 > 0.0) || t.r_a[i] < t.c1 - 1e-12 {
            v = v.max(t.c1 - t.r_a[i]).max(1e-300);
        }
        v
    });
    let h4 = Check::run(k, |i| {
        if i == 0 {
            return 0.0;
        }
        let jump = [&t.r_a, &t.r_t, &t.r_r]
            .iter()
            .map(|c| (c[i] - c[i - 1]).abs())
            .fold(0.0, f64::max);
        if jump > H4_MAX_JUMP { jump } else { 0.0 }
    });
    let h5 = Check::run(k, |i| {
        let s = t.r_t[i].max(0.0).sqrt() + t.r_r[i].max(0.0).sqrt();
        if s < 1.0 - 1e-12 { 1.0 - s } else { 0.0 }
    });
    AdmissibilityReport { h1, h2, h3, h4, h5, h6: None, l1: Check::skipped() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub k: f64,
    pub v_g: f64,
    pub re: f64,
    pub im: f64,
    pub ft: Complex64,
    pub lim_lc: Complex64,
    pub th: Complex64,
    pub fbar: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub min_th: f64,
    pub th_bound: f64,
    pub th_ok: bool,
    /// Largest `|F̄| / (8|v_g|r_r/c1)` over the grid.
    pub fbar_bound_ratio: f64,
    pub fbar_ok: bool,
    pub im_nonnegative: bool,
    /// `max |FT|²/(4v²) − r_r|` over the grid.
    pub rr_residual: f64,
    /// `max |1 + Re FT/|v| + |FT|²/(4v²) − r_t|` over the grid.
    pub rt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDesign {
    pub disp: Dispersion,
    pub c1: f64,
    pub points: Vec<DesignPoint>,
    /// Frequencies `u` inside the band where `F̄` is sampled.
    pub u: Vec<f64>,
    pub fbar: Vec<Complex64>,
    pub report: DesignReport,
}

pub const U_NODES: usize = 2048;

fn design_point(disp: &Dispersion, k: f64, r_t: f64, r_r: f64) -> Result<DesignPoint> {
    let v = disp.group_velocity(k).abs();
    let re = v * (r_t - r_r - 1.0);
    let im2 = 4.0 * v * v * r_r - re * re;
    if im2 < -1e-12 {
        return Err(Error::NotAdmissible(format!("4v²r_r − RE² = {im2:.3e} < 0 at k = {k}")));
    }
    let im = im2.max(0.0).sqrt();
    let ft = Complex64::new(re, im);
    let lim = lim_laplace_c_omega(disp, k.into(), LimitMethod::default())?;
    let th = 1.0 + ft * lim;
    Ok(DesignPoint { k, v_g: disp.group_velocity(k), re, im, ft, lim_lc: lim, th, fbar: ft / th })
}

pub fn build_frequency_design(targets: &TargetRates, disp: &Dispersion) -> Result<FrequencyDesign> {
    let adm = check_targets(targets);
    if !adm.admissible() {
        return Err(Error::NotAdmissible(adm.failed_checks().join(", ")));
    }
    let c1 = targets.c1;
    let points = targets
        .k_grid
        .par_iter()
        .enumerate()
        .map(|(i, &k)| design_point(disp, k, targets.r_t[i], targets.r_r[i]))
        .collect::<Result<Vec<_>>>()?;

    let mut report = DesignReport {
        min_th: f64::INFINITY,
        th_bound: c1 / 4.0,
        th_ok: true,
        fbar_bound_ratio: 0.0,
        fbar_ok: true,
        im_nonnegative: true,
        rr_residual: 0.0,
        rt_residual: 0.0,
    };
    for (i, p) in points.iter().enumerate() {
        let th = p.th.norm();
        if th < c1 / 8.0 {
            return Err(Error::DegenerateTh { k: p.k, value: th });
        }
        let v = p.v_g.abs();
        report.min_th = report.min_th.min(th);
        report.fbar_bound_ratio = report
            .fbar_bound_ratio
            .max(p.fbar.norm() / (8.0 * v * targets.r_r[i] / c1));
        report.im_nonnegative &= p.im >= 0.0;
        let rr = p.ft.norm_sqr() / (4.0 * v * v);
        report.rr_residual = report.rr_residual.max((rr - targets.r_r[i]).abs());
        let rt = 1.0 + p.ft.re / v + rr;
        report.rt_residual = report.rt_residual.max((rt - targets.r_t[i]).abs());
    }
    report.th_ok = report.min_th >= c1 / 4.0;
    report.fbar_ok = report.fbar_bound_ratio <= 1.0 + 1e-12;

    let (lo, hi) = (disp.omega_min(), disp.omega_max());
    let delta = 1e-4 * (hi - lo);
    let u = uniform_grid(lo + delta, hi - delta, U_NODES);
    let fbar = u
        .par_iter()
        .map(|&w| {
            let k = disp.phi_inverse(w, Branch::Plus)?;
            let (_, r_t, r_r) = targets.at(k);
            Ok(design_point(disp, k, r_t, r_r)?.fbar)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FrequencyDesign { disp: *disp, c1, points, u, fbar, report })
}

/// Uniform time samples `t_i = i·dt`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0 && t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("time grid needs dt > 0 and t_max > 0, got {dt}, {t_max}")));
        }
        Ok(TimeGrid { dt, len: (t_max / dt).ceil() as usize + 1 })
    }

    /// Grid long enough for cutoffs up to `n_max`, resolving the fastest band
    /// oscillation with `samples_per_period` points.
    pub fn for_horizon(disp: &Dispersion, n_max: usize, samples_per_period: usize) -> Result<Self> {
        let t_max = n_max as f64 + 1.0 + 10.0 / disp.omega_min();
        let dt = 2.0 * PI / (disp.omega_max() * samples_per_period.max(20) as f64);
        TimeGrid::new(dt, t_max)
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.t(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SynthesisMethod {
    /// `F(t) = (2/π)∫ Re F̄(u) cos(ut) du`.
    CosineInversion,
    /// Regularized least-squares fit of a causal kernel whose truncations
    /// `F·s_N` reproduce `F̄` inside the band, jointly over a ladder of horizons.
    BandFit { ladder: Vec<usize>, ridge: f64 },
}

impl SynthesisMethod {
    pub fn band_fit() -> Self {
        SynthesisMethod::BandFit { ladder: vec![8, 16, 32, 64], ridge: 1e-5 }
    }
}

impl Default for SynthesisMethod {
    fn default() -> Self {
        SynthesisMethod::band_fit()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedControl {
    pub grid: TimeGrid,
    pub f: Vec<f64>,
    pub cutoff: Option<usize>,
    pub f_n: Vec<f64>,
    pub k_grid: Vec<f64>,
    /// `ω(k)` for each grid wavenumber.
    pub freqs: Vec<f64>,
    /// `F̂_N(ω(k)/2π) = f^c(ω) − i f^s(ω)` on the grid.
    pub fhat: Vec<Complex64>,
}

impl SynthesizedControl {
    /// Builds a control from explicit samples; `fhat` is filled on `k_grid`.
    pub fn from_samples(disp: &Dispersion, grid: TimeGrid, f: Vec<f64>, k_grid: Vec<f64>) -> Self {
        let freqs: Vec<f64> = k_grid.iter().map(|&k| disp.omega(k)).collect();
        let mut c = SynthesizedControl { grid, f_n: f.clone(), f, cutoff: None, k_grid, freqs, fhat: Vec::new() };
        c.refresh_fhat();
        c
    }

    fn refresh_fhat(&mut self) {
        self.fhat = self
            .transforms(&self.freqs)
            .into_iter()
            .map(|(c, s)| Complex64::new(c, -s))
            .collect();
    }

    /// Half-line cosine and sine transforms of the current kernel.
    pub fn transforms(&self, freqs: &[f64]) -> Vec<(f64, f64)> {
        half_line_transforms(&self.f_n, self.grid.dt, freqs)
    }

    /// `F̂_N(ω/2π)` at arbitrary frequencies.
    pub fn fhat_at(&self, freqs: &[f64]) -> Vec<Complex64> {
        self.transforms(freqs).into_iter().map(|(c, s)| Complex64::new(c, -s)).collect()
    }
}

/// `s(τ) = 1 − (6τ⁵ − 15τ⁴ + 10τ³)` clamped to `[0, 1]` outside `(0, 1)`.
pub fn smoothstep_down(tau: f64) -> f64 {
    if tau <= 0.0 {
        1.0
    } else if tau >= 1.0 {
        0.0
    } else {
        1.0 - tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
    }
}

pub fn synthesize_f(design: &FrequencyDesign, grid: TimeGrid, method: &SynthesisMethod) -> Result<SynthesizedControl> {
    let f = match method {
        SynthesisMethod::CosineInversion => cosine_inversion(design, grid),
        SynthesisMethod::BandFit { ladder, ridge } => band_fit(design, grid, ladder, *ridge)?,
    };
    let k_grid: Vec<f64> = design.points.iter().map(|p| p.k).collect();
    Ok(SynthesizedControl::from_samples(&design.disp, grid, f, k_grid))
}

fn u_weights(design: &FrequencyDesign) -> Vec<f64> {
    let n = design.u.len();
    let du = if n > 1 { design.u[1] - design.u[0] } else { 0.0 };
    trapezoid_weights(n, du)
}

fn cosine_inversion(design: &FrequencyDesign, grid: TimeGrid) -> Vec<f64> {
    let w = u_weights(design);
    (0..grid.len)
        .into_par_iter()
        .map(|i| {
            let t = grid.t(i);
            let s: f64 = design
                .u
                .iter()
                .zip(&design.fbar)
                .zip(&w)
                .map(|((u, fb), w)| w * fb.re * (u * t).cos())
                .sum();
            2.0 / PI * s
        })
        .collect()
}

fn band_fit(design: &FrequencyDesign, grid: TimeGrid, ladder: &[usize], ridge: f64) -> Result<Vec<f64>> {
    if ladder.is_empty() || !(ridge > 0.0) {
        return Err(Error::InvalidParameter("band fit needs a non-empty ladder and a positive ridge".into()));
    }
    let n_max = *ladder.iter().max().unwrap();
    let span = n_max as f64 + 1.0;
    if span > grid.t_max() {
        return Err(Error::HorizonExceeded { n: n_max, need: span, t_max: grid.t_max() });
    }
    let dt = grid.dt;
    let m = ((span / dt).floor() as usize + 1).min(grid.len);
    let uw = u_weights(design);

    // Gram entries depend on the lag only
    let lag: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|l| {
            let t = l as f64 * dt;
            design.u.iter().zip(&uw).map(|(u, w)| w * (u * t).cos()).sum()
        })
        .collect();
    let proj: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let t = grid.t(i);
            design
                .u
                .iter()
                .zip(&design.fbar)
                .zip(&uw)
                .map(|((u, fb), w)| w * (fb.re * (u * t).cos() + fb.im * (u * t).sin()))
                .sum()
        })
        .collect();

    let total: f64 = ladder.iter().map(|&n| n as f64).sum();
    let weights: Vec<f64> = ladder.iter().map(|&n| n as f64 / total).collect();
    let tau: Vec<f64> = (0..m).map(|i| if i == 0 { 0.5 * dt } else { dt }).collect();
    let masks: Vec<Vec<f64>> = ladder
        .iter()
        .map(|&n| (0..m).map(|i| smoothstep_down(grid.t(i) - n as f64)).collect())
        .collect();
    // mixed[i][j] = Σ_N w_N s_N(t_i) s_N(t_j); masks agree up to the smallest horizon
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..m {
        let mut r = 0.0;
        for (w, s) in weights.iter().zip(&masks) {
            r += w * s[i];
        }
        rhs[i] = r * tau[i] * proj[i];
        for j in 0..=i {
            let mut mix = 0.0;
            for (w, s) in weights.iter().zip(&masks) {
                mix += w * s[i] * s[j];
            }
            let v = mix * tau[i] * tau[j] * lag[i - j];
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, i)] += ridge * dt;
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("band-fit normal matrix is not positive definite".into()))?;
    let x = chol.solve(&rhs);
    let mut f = vec![0.0; grid.len];
    f[..m].copy_from_slice(x.as_slice());
    Ok(f)
}

/// `F_N = F·s(t − N)`.
pub fn apply_cutoff(control: &SynthesizedControl, n: usize) -> Result<SynthesizedControl> {
    if n == 0 {
        return Err(Error::InvalidParameter("cutoff horizon must be >= 1".into()));
    }
    let need = n as f64 + 1.0;
    if need > control.grid.t_max() + 1e-12 {
        return Err(Error::HorizonExceeded { n, need, t_max: control.grid.t_max() });
    }
    let mut out = control.clone();
    out.cutoff = Some(n);
    out.f_n = control
        .f
        .iter()
        .enumerate()
        .map(|(i, &f)| f * smoothstep_down(control.grid.t(i) - n as f64))
        .collect();
    out.refresh_fhat();
    Ok(out)
}

/// Trapezoid half-line transforms `(∫F cos(st)dt, ∫F sin(st)dt)` of uniformly sampled `F`.
pub fn half_line_transforms(samples: &[f64], dt: f64, freqs: &[f64]) -> Vec<(f64, f64)> {
    let w = trapezoid_weights(samples.len(), dt);
    let last = samples.iter().rposition(|&v| v != 0.0).map_or(0, |p| p + 1);
    freqs
        .par_iter()
        .map(|&s| {
            let (mut c, mut sn) = (0.0, 0.0);
            for i in 0..last {
                let t = i as f64 * dt;
                let (si, co) = (s * t).sin_cos();
                c += w[i] * samples[i] * co;
                sn += w[i] * samples[i] * si;
            }
            (c, sn)
        })
        .collect()
}

/// Numerical test of `∫Re F̄ cos(ut)du = ∫Im F̄ sin(ut)du` at the probe times.
pub fn check_h6(design: &FrequencyDesign, probes: &[f64]) -> H6Report {
    let w = u_weights(design);
    let mut max_disc: f64 = 0.0;
    let mut max_f: f64 = 0.0;
    for &t in probes {
        let (mut c, mut s) = (0.0, 0.0);
        for ((u, fb), w) in design.u.iter().zip(&design.fbar).zip(&w) {
            let (si, co) = (u * t).sin_cos();
            c += w * fb.re * co;
            s += w * fb.im * si;
        }
        max_disc = max_disc.max(2.0 / PI * (c - s).abs());
        max_f = max_f.max(2.0 / PI * c.abs());
    }
    let threshold = 5e-2 * max_f;
    H6Report { probes: probes.to_vec(), max_discrepancy: max_disc, max_abs_f: max_f, threshold, passed: max_disc <= threshold }
}

/// L1 for a realised control: `Re F̂(ω(k)/2π) < 0` for `k ∈ [margin, 1/2 − margin]`.
pub fn check_l1(k_grid: &[f64], fhat: &[Complex64], margin: f64) -> Check {
    Check::run(k_grid, |i| {
        let k = k_grid[i];
        if k < margin || k > 0.5 - margin || fhat[i].re < 0.0 {
            0.0
        } else {
            fhat[i].re.max(1e-300)
        }
    })
}

/// Default probe times for the causality diagnostic.
pub fn h6_probes(t_max: f64) -> Vec<f64> {
    uniform_grid(0.25, t_max, 64)
}

/// Rates produced by a feedback whose transform on the grid is given by `fhat`.
pub fn recover_rates(disp: &Dispersion, k_grid: &[f64], fhat: impl Fn(usize, f64) -> Complex64 + Sync) -> Vec<Result<RateTriple>> {
    k_grid
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let f = fhat(i, k);
            if !(f.re < 0.0) {
                return Err(Error::AssumptionL1Violated { k, re: f.re });
            }
            let lim = lim_laplace_c_omega(disp, k.into(), LimitMethod::default())?;
            feedback_from_limit(disp, f, k, lim)
        })
        .collect()
}

/// Rates recovered from the control's own transform at `ω(k)/2π`.
pub fn roundtrip_rates(control: &SynthesizedControl, disp: &Dispersion, k_grid: &[f64]) -> Vec<Result<RateTriple>> {
    let freqs: Vec<f64> = k_grid.iter().map(|&k| disp.omega(k)).collect();
    let fhat = control.fhat_at(&freqs);
    recover_rates(disp, k_grid, |i, _| fhat[i])
}

/// Grid-L² distance between recovered and target `(r_t, r_r)` over
/// `k ∈ [margin, 1/2 − margin]`. `recovered` runs along the target grid.
pub fn roundtrip_error(targets: &TargetRates, recovered: &[Result<RateTriple>], margin: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut count = 0usize;
    for (&k, r) in targets.k_grid.iter().zip(recovered) {
        if k < margin || k > 0.5 - margin {
            continue;
        }
        let r = r.as_ref().map_err(|e| e.clone())?;
        let (_, t, rr) = targets.at(r.k);
        acc += (r.r_t - t).powi(2) + (r.r_r - rr).powi(2);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidParameter("no grid points inside the error window".into()));
    }
    Ok((acc / count as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub n: usize,
    pub error: f64,
    pub recovered: Vec<Result<RateTriple>>,
}

/// Round-trip errors over a list of cutoffs.
pub fn cutoff_sweep(control: &SynthesizedControl, targets: &TargetRates, disp: &Dispersion, ladder: &[usize], margin: f64) -> Result<Vec<SweepEntry>> {
    ladder
        .iter()
        .map(|&n| {
            let c = apply_cutoff(control, n)?;
            let recovered = roundtrip_rates(&c, disp, &targets.k_grid);
            let error = roundtrip_error(targets, &recovered, margin).unwrap_or(f64::INFINITY);
            Ok(SweepEntry { n, error, recovered })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::rates_uncontrolled;
    use approx::assert_abs_diff_eq;

    fn unit() -> Dispersion {
        Dispersion::new(1.0, 1.0).unwrap()
    }

    fn constant_targets(n: usize) -> TargetRates {
        TargetRates::constant(uniform_grid(0.02, 0.48, n), 0.35, 0.49, 0.16).unwrap()
    }

    #[test]
    fn constant_targets_are_admissible() {
        let r = check_targets(&TargetRates::constant(vec![0.25], 0.35, 0.49, 0.16).unwrap());
        assert!(r.admissible() && r.h4.passed);
        assert!(r.h6.is_none() && !r.l1.ran);
    }

    #[test]
    fn zero_reflection_fails_h3() {
        let t = TargetRates::constant(vec![0.1, 0.2], 0.3, 0.7, 0.0).unwrap();
        let r = check_targets(&t);
        assert!(!r.h3.passed && !r.admissible());
        assert!(r.failed_checks().contains(&"H3"));
    }

    #[test]
    fn square_root_boundary_is_allowed() {
        let t = TargetRates::constant(vec![0.2], 0.5, 0.25, 0.25).unwrap();
        assert!(check_targets(&t).h5.passed);
        let t = TargetRates::constant(vec![0.2], 0.6, 0.2, 0.2).unwrap();
        assert!(!check_targets(&t).h5.passed);
    }

    #[test]
    fn sum_rule_and_domain_checked() {
        let t = TargetRates::new(vec![0.2, 0.6], vec![0.3; 2], vec![0.5; 2], vec![0.3; 2], 0.3).unwrap();
        let r = check_targets(&t);
        assert!(!r.h1.passed && !r.h2.passed);
        assert_eq!(r.h1.failures, vec![0.6]);
    }

    #[test]
    fn jumps_fail_h4() {
        let t = TargetRates::from_fn(vec![0.1, 0.2, 0.3], |k| if k > 0.25 { (0.3, 0.3) } else { (0.49, 0.16) }).unwrap();
        assert!(!check_targets(&t).h4.passed);
    }

    #[test]
    fn design_values_at_quarter() {
        let d = unit();
        let t = TargetRates::constant(vec![0.25], 0.35, 0.49, 0.16).unwrap();
        let des = build_frequency_design(&t, &d).unwrap();
        let p = des.points[0];
        assert_abs_diff_eq!(p.re, -0.236_880_8, epsilon = 1e-7);
        // |v_g|·sqrt(4·0.16 − 0.67²) with |v_g| = 1/(2√2)
        assert_abs_diff_eq!(p.im, 0.1911f64.sqrt() / (2.0 * 2f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(p.im, 0.154_555_8, epsilon = 1e-7);
        assert!(des.report.min_th >= 0.35 / 4.0);
    }

    #[test]
    fn design_reproduces_targets_algebraically() {
        let d = unit();
        let t = TargetRates::from_fn(uniform_grid(0.03, 0.47, 41), |k| {
            let s = (2.0 * PI * k).sin();
            (0.49 - 0.04 * s, 0.16 + 0.04 * s)
        })
        .unwrap();
        let des = build_frequency_design(&t, &d).unwrap();
        assert!(des.report.rr_residual < 1e-10 && des.report.rt_residual < 1e-10, "{:?}", des.report);
        assert!(des.report.th_ok && des.report.fbar_ok && des.report.im_nonnegative);
        assert_eq!(des.u.len(), U_NODES);
        assert!(des.u[0] > d.omega_min() && *des.u.last().unwrap() < d.omega_max());
    }

    #[test]
    fn inadmissible_design_is_refused() {
        let t = TargetRates::constant(vec![0.2], 0.6, 0.2, 0.2).unwrap();
        assert!(matches!(build_frequency_design(&t, &unit()), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn smoothstep_values() {
        assert_eq!(smoothstep_down(-1.0), 1.0);
        assert_eq!(smoothstep_down(0.5), 0.5);
        assert_eq!(smoothstep_down(2.0), 0.0);
        // C² at the joins
        let h = 1e-4;
        let d1 = (smoothstep_down(h) - 1.0) / h;
        assert!(d1.abs() < 1e-6);
    }

    fn flat_design(a: f64, b: f64, value: Complex64) -> FrequencyDesign {
        let mut des = build_frequency_design(&constant_targets(5), &unit()).unwrap();
        des.u = uniform_grid(a, b, 4097);
        des.fbar = vec![value; des.u.len()];
        des
    }

    #[test]
    fn cosine_inversion_of_box_matches_closed_form() {
        let (a, b) = (1.1, 1.6);
        let des = flat_design(a, b, Complex64::new(1.0, 0.0));
        let grid = TimeGrid::new(0.1, 20.0).unwrap();
        let c = synthesize_f(&des, grid, &SynthesisMethod::CosineInversion).unwrap();
        for (i, &f) in c.f.iter().enumerate().skip(1) {
            let t = grid.t(i);
            let exact = 2.0 / PI * ((b * t).sin() - (a * t).sin()) / t;
            assert!((f - exact).abs() < 1e-6, "{t}: {f} {exact}");
        }
        assert_abs_diff_eq!(c.f[0], 2.0 / PI * (b - a), epsilon = 1e-12);
    }

    #[test]
    fn zero_design_gives_zero_control() {
        let des = flat_design(1.1, 1.6, Complex64::new(0.0, 0.0));
        let grid = TimeGrid::new(0.1, 80.0).unwrap();
        for m in [SynthesisMethod::CosineInversion, SynthesisMethod::band_fit()] {
            let c = synthesize_f(&des, grid, &m).unwrap();
            assert!(c.f.iter().all(|&v| v == 0.0));
        }
        let h = check_h6(&des, &h6_probes(10.0));
        assert_eq!(h.max_discrepancy, 0.0);
    }

    #[test]
    fn anticausal_response_flagged_by_h6() {
        let des = flat_design(1.1, 1.6, Complex64::new(0.0, 1.0));
        let h = check_h6(&des, &h6_probes(10.0));
        assert!(h.max_discrepancy > 0.1 && !h.passed);
    }

    #[test]
    fn transforms_of_box() {
        let dt = 1e-3;
        let mut f: Vec<f64> = (0..=1000).map(|_| 1.0).chain(std::iter::repeat(0.0).take(100)).collect();
        // half value at the jump keeps the trapezoid second order
        f[1000] = 0.5;
        let out = half_line_transforms(&f, dt, &[0.7, 2.0]);
        for (s, (c, sn)) in [0.7f64, 2.0].iter().zip(out) {
            assert!((c - s.sin() / s).abs() < 1e-6);
            assert!((sn - (1.0 - s.cos()) / s).abs() < 1e-6);
        }
        let zero = half_line_transforms(&[0.0; 10], dt, &[1.0]);
        assert_eq!(zero[0], (0.0, 0.0));
    }

    #[test]
    fn cutoff_shape() {
        let grid = TimeGrid::new(0.25, 12.0).unwrap();
        let f: Vec<f64> = (0..grid.len).map(|i| 1.0 + grid.t(i)).collect();
        let c = SynthesizedControl::from_samples(&unit(), grid, f.clone(), vec![0.25]);
        let cut = apply_cutoff(&c, 4).unwrap();
        assert_eq!(cut.f_n[8], f[8]); // t = 2
        assert_eq!(cut.f_n[18], 0.5 * f[18]); // t = 4.5
        assert_eq!(cut.f_n[24], 0.0); // t = 6
        assert!(matches!(apply_cutoff(&c, 12), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn friction_transform_recovers_uncontrolled_rates() {
        let d = unit();
        let k = uniform_grid(0.05, 0.45, 17);
        let rec = recover_rates(&d, &k, |_, _| Complex64::new(-1.3, 0.0));
        for (r, &k) in rec.iter().zip(&k) {
            let r = r.as_ref().unwrap();
            let u = rates_uncontrolled(&d, 1.3, k).unwrap();
            assert!((r.r_t - u.r_t).abs() < 1e-12 && (r.r_r - u.r_r).abs() < 1e-12);
        }
        let rec = recover_rates(&d, &k, |_, _| Complex64::new(0.1, 0.0));
        assert!(rec.iter().all(|r| matches!(r, Err(Error::AssumptionL1Violated { .. }))));
    }

    #[test]
    fn band_fit_round_trip_improves_with_horizon() {
        let d = unit();
        let t = constant_targets(64);
        let des = build_frequency_design(&t, &d).unwrap();
        let grid = TimeGrid::for_horizon(&d, 64, 32).unwrap();
        let c = synthesize_f(&des, grid, &SynthesisMethod::band_fit()).unwrap();
        let sweep = cutoff_sweep(&c, &t, &d, &[8, 16, 32, 64], 0.05).unwrap();
        let errs: Vec<f64> = sweep.iter().map(|s| s.error).collect();
        assert!(errs.iter().all(|e| e.is_finite()), "{errs:?}");
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
        assert!(errs[3] < 5e-2, "{errs:?}");
        for s in &sweep {
            for r in s.recovered.iter().flatten() {
                assert!((r.sum() - 1.0).abs() < 1e-6);
            }
        }
    }
}
