//! Monte-Carlo simulation of the thermostatted chain in Fourier space.
//!
//! Each mode rotates exactly, `ψ̂(k) ← e^{−iω(k)dt} ψ̂(k)`, and then every mode
//! receives the same kick `i(g·dt + √(2νT)·ΔW)` where `g` is the boundary force
//! (friction plus pulse, or the memory feedback) and `ΔW` is the one shared
//! Wiener increment of the step.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{torus_grid, Dispersion};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::wigner::{half_grid_interpolate, TestFunction, WignerAccumulator, WignerGrid};

/// Unit-mass raised-cosine pulse of width `w` (microscopic time), scaled by `ε^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub width: f64,
    pub eps: f64,
}

impl Pulse {
    pub fn new(width: f64, eps: f64) -> Result<Self> {
        if !(width > 0.0) || !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("pulse needs width > 0 and eps in (0,1], got {width}, {eps}")));
        }
        Ok(Pulse { width, eps })
    }

    /// `η_w(t) = (1 − cos(2πt/w))/w` on `[0, w]`.
    pub fn eta(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.width {
            0.0
        } else {
            (1.0 - (2.0 * PI * t / self.width).cos()) / self.width
        }
    }

    /// The force at microscopic time `t`.
    pub fn value(&self, t: f64) -> f64 {
        self.eta(t) / self.eps.sqrt()
    }

    /// `η̂(ω) = ∫ η_w(t) e^{−iωt} dt`, the pulse's limiting transform.
    pub fn script_f(&self, omega: f64) -> Complex64 {
        let gl = GaussLegendre::sixteen();
        let re = gl.integrate(|t| self.eta(t) * (omega * t).cos(), 0.0, self.width, 8);
        let im = gl.integrate(|t| -self.eta(t) * (omega * t).sin(), 0.0, self.width, 8);
        Complex64::new(re, im)
    }

    /// `∫_0^{t/ε} ε F(s)² ds`.
    pub fn energy_budget(&self, t_macro: f64) -> f64 {
        let end = (t_macro / self.eps).min(self.width);
        self.eps * GaussLegendre::sixteen().integrate(|s| self.value(s).powi(2), 0.0, end, 8)
    }
}

/// Feedback kernel `F_N` sampled at the simulation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackKernel {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl FeedbackKernel {
    /// Discrete kernel whose trapezoid convolution is exactly friction `ν`
    /// applied to the current `α₀`.
    pub fn friction(nu: f64, dt: f64) -> Self {
        FeedbackKernel { dt, samples: vec![-2.0 * nu / dt] }
    }

    /// `−ν` times a unit-mass triangle spanning `width_steps` steps.
    pub fn smeared_friction(nu: f64, dt: f64, width_steps: usize) -> Self {
        let m = width_steps.max(1);
        if m == 1 {
            return Self::friction(nu, dt);
        }
        let raw: Vec<f64> = (0..=m).map(|i| 1.0 - i as f64 / m as f64).collect();
        let mass = dt * (raw.iter().sum::<f64>() - 0.5 * (raw[0] + raw[m]));
        FeedbackKernel { dt, samples: raw.iter().map(|v| -nu * v / mass).collect() }
    }
}

impl FeedbackKernel {
    /// Linear resampling of a kernel tabulated at increasing times `t`
    /// (starting at 0) onto the step `dt`; the trailing zero tail is dropped.
    pub fn resample(t: &[f64], f: &[f64], dt: f64) -> Result<Self> {
        if t.len() != f.len() || t.len() < 2 || t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) || !(dt > 0.0) {
            return Err(Error::InvalidParameter("kernel table needs increasing times from 0 and dt > 0".into()));
        }
        let end = f.iter().rposition(|&v| v != 0.0).map_or(1, |p| (p + 1).min(t.len() - 1));
        let m = (t[end] / dt).floor() as usize;
        let mut j = 0;
        let samples = (0..=m)
            .map(|i| {
                let s = i as f64 * dt;
                while j + 1 < t.len() - 1 && t[j + 1] < s {
                    j += 1;
                }
                let w = ((s - t[j]) / (t[j + 1] - t[j])).clamp(0.0, 1.0);
                f[j] + w * (f[j + 1] - f[j])
            })
            .collect();
        Ok(FeedbackKernel { dt, samples })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Control {
    None,
    Impulsive(Pulse),
    Feedback(FeedbackKernel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub disp: Dispersion,
    pub n_modes: usize,
    pub eps: f64,
    pub nu: f64,
    pub temperature: f64,
    pub dt: f64,
    pub n_realizations: usize,
    pub seed: u64,
    pub control: Control,
    pub step_cap: u64,
    /// Realizations handled per parallel batch.
    pub batch: usize,
}

impl SimConfig {
    pub fn new(disp: Dispersion) -> Self {
        SimConfig {
            disp,
            n_modes: 512,
            eps: 1.0 / 512.0,
            nu: 1.0,
            temperature: 0.0,
            dt: 0.05,
            n_realizations: 1,
            seed: 0,
            control: Control::None,
            step_cap: 50_000_000,
            batch: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_modes < 2 || self.n_modes % 2 != 0 {
            return bad(format!("n_modes must be even and >= 2, got {}", self.n_modes));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if !(self.dt > 0.0 && self.dt * self.disp.omega_max() < 0.1) {
            return bad(format!("dt·omega_max must be < 0.1, got {}", self.dt * self.disp.omega_max()));
        }
        if self.n_realizations == 0 {
            return bad("n_realizations must be >= 1".into());
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) || !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("nu and temperature must be finite and >= 0, got {}, {}", self.nu, self.temperature));
        }
        match &self.control {
            Control::Impulsive(p) if p.width < 2.0 * self.dt => bad(format!("pulse width {} is below 2·dt", p.width)),
            Control::Feedback(k) if (k.dt - self.dt).abs() > 1e-12 * self.dt => {
                Err(Error::HistoryUnderflow { kernel_dt: k.dt, dt: self.dt })
            }
            Control::Feedback(k) if k.samples.is_empty() => bad("feedback kernel is empty".into()),
            _ => Ok(()),
        }
    }

    pub fn k_grid(&self) -> Vec<f64> {
        torus_grid(self.n_modes)
    }

    /// Number of steps to reach macroscopic time `t`.
    pub fn steps_for(&self, t_macro: f64) -> u64 {
        (t_macro / (self.eps * self.dt)).round() as u64
    }

    /// Length of the ring in macroscopic units.
    pub fn ring_length(&self) -> f64 {
        self.eps * self.n_modes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    /// Macroscopic centre.
    pub x0: f64,
    pub sigma_x: f64,
    pub k0: f64,
    /// Total Wigner mass `∫∫W₀`.
    pub mass: f64,
}

impl WavePacket {
    /// Spectral width of a coherent packet of spatial width `σ_x` at scale `ε`.
    pub fn sigma_k(&self, eps: f64) -> f64 {
        eps / (4.0 * PI * self.sigma_x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialMeasure {
    Zero,
    /// `W₀ ≡ T` on the ring, with modes within `margin` of a band edge left empty.
    Thermal { temperature: f64, margin: f64 },
    WavePacket { packet: WavePacket, margin: f64 },
}

/// Distance from `k` to the nearest band edge `{0, ±1/2}`.
pub fn edge_distance(k: f64) -> f64 {
    let a = k.abs();
    a.min(0.5 - a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub psi_hat: Vec<Complex64>,
    /// Ring buffer of past `α₀` values, newest at `head`.
    pub alpha0_history: Vec<f64>,
    head: usize,
    pub steps: u64,
    pub t_micro: f64,
}

impl Realization {
    pub fn zero(n: usize, history: usize) -> Self {
        Realization {
            psi_hat: vec![Complex64::new(0.0, 0.0); n],
            alpha0_history: vec![0.0; history.max(1)],
            head: 0,
            steps: 0,
            t_micro: 0.0,
        }
    }

    /// `α₀ = mean_k Im ψ̂(k)`.
    pub fn alpha0(&self) -> f64 {
        self.psi_hat.iter().map(|z| z.im).sum::<f64>() / self.psi_hat.len() as f64
    }
}

/// `ε·Σ|ψ̂|²·Δk`.
pub fn energy(psi_hat: &[Complex64], eps: f64) -> f64 {
    eps * psi_hat.iter().map(|z| z.norm_sqr()).sum::<f64>() / psi_hat.len() as f64
}

/// `Ψ(t) = mean_k Im(ψ̂(0,k) e^{−iω(k)t})`, the free part of `α₀`.
pub fn free_alpha0(disp: &Dispersion, psi0: &[Complex64], t: f64) -> f64 {
    let n = psi0.len();
    torus_grid(n)
        .iter()
        .zip(psi0)
        .map(|(&k, z)| (z * Complex64::from_polar(1.0, -disp.omega(k) * t)).im)
        .sum::<f64>()
        / n as f64
}

/// Per-realization random stream derived from the seed by counter.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform_phase<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * rng.gen::<f64>())
}

pub fn init_realization<R: Rng>(config: &SimConfig, measure: &InitialMeasure, rng: &mut R) -> Result<Realization> {
    let n = config.n_modes;
    let history = match &config.control {
        Control::Feedback(k) => k.samples.len(),
        _ => 1,
    };
    let mut r = Realization::zero(n, history);
    let ks = config.k_grid();
    let eps = config.eps;
    match measure {
        InitialMeasure::Zero => {}
        InitialMeasure::Thermal { temperature, margin } => {
            // E|ψ̂|² = (2/ε)∫W₀ dx makes the sampled Wigner mean equal W₀
            let amp = (2.0 * temperature * config.ring_length() / eps).sqrt();
            let mut any = false;
            for (z, &k) in r.psi_hat.iter_mut().zip(&ks) {
                let phase = uniform_phase(rng);
                if edge_distance(k) >= *margin {
                    *z = amp * phase;
                    any = true;
                }
            }
            if !any && *temperature > 0.0 {
                return Err(Error::UnsupportedMeasure);
            }
        }
        InitialMeasure::WavePacket { packet, margin } => {
            let sk = packet.sigma_k(eps);
            // discrete normalisation: (ε/2)·mean|ψ̂|² = mass
            let env: Vec<f64> = ks
                .iter()
                .map(|&k| {
                    let d = crate::dispersion::wrap(k - packet.k0);
                    (-d * d / (4.0 * sk * sk)).exp()
                })
                .collect();
            let norm = env.iter().map(|e| e * e).sum::<f64>() / n as f64;
            let total = if norm > 0.0 { (2.0 * packet.mass / (eps * norm)).sqrt() } else { 0.0 };
            let shift = packet.x0 / eps;
            let phase = uniform_phase(rng);
            let mut kept = 0.0;
            for ((z, &k), e) in r.psi_hat.iter_mut().zip(&ks).zip(&env) {
                if edge_distance(k) >= *margin {
                    *z = total * e * Complex64::from_polar(1.0, -2.0 * PI * k * shift) * phase;
                    kept += e * e;
                }
            }
            if packet.mass > 0.0 && kept <= 1e-12 * norm * n as f64 {
                return Err(Error::UnsupportedMeasure);
            }
        }
    }
    Ok(r)
}

/// Precomputed per-mode rotations for a configuration.
pub struct Stepper<'a> {
    pub config: &'a SimConfig,
    rot: Vec<Complex64>,
    noise: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(config: &'a SimConfig) -> Self {
        let rot = config
            .k_grid()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -config.disp.omega(k) * config.dt))
            .collect();
        let noise = (2.0 * config.nu * config.temperature).sqrt();
        Stepper { config, rot, noise }
    }

    fn kick<R: Rng>(&self, state: &mut Realization, force: f64, rng: &mut R) {
        let xi: f64 = rng.sample(StandardNormal);
        let dt = self.config.dt;
        let kick = Complex64::new(0.0, force * dt + self.noise * dt.sqrt() * xi);
        for (z, r) in state.psi_hat.iter_mut().zip(&self.rot) {
            *z = *z * r + kick;
        }
        state.steps += 1;
        state.t_micro = state.steps as f64 * dt;
    }

    /// One step with friction and an external force `f` (the pulse value at the step start).
    pub fn step_impulsive<R: Rng>(&self, state: &mut Realization, f: f64, rng: &mut R) {
        let force = -self.config.nu * state.alpha0() + f;
        self.kick(state, force, rng);
    }

    /// One step with the memory feedback `(F⋆α₀)(t)`.
    pub fn step_feedback<R: Rng>(&self, state: &mut Realization, kernel: &FeedbackKernel, rng: &mut R) -> Result<()> {
        if (kernel.dt - self.config.dt).abs() > 1e-12 * self.config.dt {
            return Err(Error::HistoryUnderflow { kernel_dt: kernel.dt, dt: self.config.dt });
        }
        let len = state.alpha0_history.len();
        if len < kernel.samples.len() {
            return Err(Error::HistoryUnderflow { kernel_dt: kernel.dt, dt: self.config.dt });
        }
        let m = state.steps as usize;
        state.head = (state.head + 1) % len;
        state.alpha0_history[state.head] = state.alpha0();
        let reach = kernel.samples.len().min(m + 1);
        let mut conv = 0.0;
        for (i, f) in kernel.samples.iter().take(reach).enumerate() {
            let a = state.alpha0_history[(state.head + len - i) % len];
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            conv += w * f * a;
        }
        self.kick(state, conv * self.config.dt, rng);
        Ok(())
    }

    /// Advances according to the configured control.
    pub fn step<R: Rng>(&self, state: &mut Realization, rng: &mut R) -> Result<()> {
        match &self.config.control {
            Control::None => self.step_impulsive(state, 0.0, rng),
            Control::Impulsive(p) => self.step_impulsive(state, p.value(state.t_micro), rng),
            Control::Feedback(k) => self.step_feedback(state, k, rng)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observers {
    /// Record the energy every this many steps (0 disables).
    pub energy_every: u64,
    /// Macroscopic times of Wigner snapshots.
    pub wigner_times: Vec<f64>,
    /// Test functions paired with every realization at each snapshot.
    #[serde(default)]
    pub battery: Vec<TestFunction>,
}

impl Observers {
    pub fn energy_only(every: u64) -> Self {
        Observers { energy_every: every, wigner_times: Vec::new(), battery: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t_macro: f64,
    pub mean_energy: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_realizations: usize,
    pub energy: Vec<EnergyRow>,
    pub wigner: Vec<WignerGrid>,
}

impl EnsembleSummary {
    /// Flat little-endian dump of every number, for bitwise comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in &self.energy {
            for v in [r.t_macro, r.mean_energy, r.stderr] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for g in &self.wigner {
            out.extend(g.to_bytes());
            for p in &g.pairings {
                out.extend_from_slice(&p.mean.to_le_bytes());
                out.extend_from_slice(&p.stderr.to_le_bytes());
            }
        }
        out
    }

    /// Least-squares slope of the mean energy against macroscopic time.
    pub fn energy_slope(&self) -> f64 {
        let n = self.energy.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mt = self.energy.iter().map(|r| r.t_macro).sum::<f64>() / n;
        let me = self.energy.iter().map(|r| r.mean_energy).sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for r in &self.energy {
            sxy += (r.t_macro - mt) * (r.mean_energy - me);
            sxx += (r.t_macro - mt).powi(2);
        }
        sxy / sxx
    }
}

struct RealizationOutput {
    energies: Vec<f64>,
    snapshots: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

fn run_one(config: &SimConfig, measure: &InitialMeasure, steps: u64, obs: &Observers, snap_steps: &[u64], index: usize) -> Result<RealizationOutput> {
    let mut rng = realization_rng(config.seed, index as u64);
    let mut state = init_realization(config, measure, &mut rng)?;
    let stepper = Stepper::new(config);
    let mut energies = Vec::new();
    let mut snapshots = Vec::new();
    let mut next_snap = 0;
    for s in 0..=steps {
        if obs.energy_every > 0 && (s % obs.energy_every == 0 || s == steps) {
            energies.push(energy(&state.psi_hat, config.eps));
        }
        while next_snap < snap_steps.len() && snap_steps[next_snap] == s {
            let half = half_grid_interpolate(&state.psi_hat);
            snapshots.push((state.psi_hat.clone(), half));
            next_snap += 1;
        }
        if s < steps {
            stepper.step(&mut state, &mut rng)?;
        }
    }
    Ok(RealizationOutput { energies, snapshots })
}

/// Runs the ensemble to `horizon_macro`. Results do not depend on the thread count.
pub fn run_ensemble(config: &SimConfig, measure: &InitialMeasure, horizon_macro: f64, obs: &Observers) -> Result<EnsembleSummary> {
    config.validate()?;
    let steps = config.steps_for(horizon_macro);
    if steps > config.step_cap {
        return Err(Error::BudgetExceeded { steps, cap: config.step_cap });
    }
    let mut times: Vec<f64> = obs.wigner_times.clone();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let snap_steps: Vec<u64> = times.iter().map(|&t| config.steps_for(t).min(steps)).collect();
    let energy_times: Vec<f64> = if obs.energy_every > 0 {
        let mut v: Vec<u64> = (0..=steps).step_by(obs.energy_every as usize).collect();
        if *v.last().unwrap() != steps {
            v.push(steps);
        }
        v.iter().map(|&s| s as f64 * config.dt * config.eps).collect()
    } else {
        Vec::new()
    };

    let mut e_sum = vec![0.0; energy_times.len()];
    let mut e_sq = vec![0.0; energy_times.len()];
    let mut acc: Vec<WignerAccumulator> = snap_steps
        .iter()
        .map(|&s| WignerAccumulator::new(config.n_modes, config.eps, s as f64 * config.dt * config.eps).with_battery(obs.battery.clone()))
        .collect();

    let batch = config.batch.max(1);
    let mut start = 0;
    while start < config.n_realizations {
        let end = (start + batch).min(config.n_realizations);
        let outs = (start..end)
            .into_par_iter()
            .map(|i| run_one(config, measure, steps, obs, &snap_steps, i))
            .collect::<Result<Vec<_>>>()?;
        for o in &outs {
            for (i, e) in o.energies.iter().enumerate() {
                e_sum[i] += e;
                e_sq[i] += e * e;
            }
        }
        for (j, a) in acc.iter_mut().enumerate() {
            let batch: Vec<(&[Complex64], &[Complex64])> =
                outs.iter().map(|o| (o.snapshots[j].0.as_slice(), o.snapshots[j].1.as_slice())).collect();
            a.add_batch(&batch);
        }
        start = end;
    }

    let m = config.n_realizations as f64;
    let energy = energy_times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mean = e_sum[i] / m;
            let var = if m > 1.0 { ((e_sq[i] / m - mean * mean) * m / (m - 1.0)).max(0.0) } else { 0.0 };
            EnergyRow { t_macro: t, mean_energy: mean, stderr: (var / m).sqrt() }
        })
        .collect();
    Ok(EnsembleSummary { n_realizations: config.n_realizations, energy, wigner: acc.into_iter().map(|a| a.finish()).collect() })
}
