//! Ensemble estimate of the Wigner transform
//! `Ŵ(ξ,k) = (ε/2)·E[conj ψ̂(k − εξ/2) ψ̂(k + εξ/2)]`.
//!
//! Offsets `±εξ/2` are half-integer multiples of the mode spacing, so the
//! amplitudes are needed on the doubled grid; the odd points come from
//! band-limited (trigonometric) interpolation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dispersion::{torus_grid, wrap};
use crate::error::{Error, Result};

/// Amplitudes at `k_j + 1/(2n)` from the samples at `k_j = j/n − 1/2`.
pub fn half_grid_interpolate(psi_hat: &[Complex64]) -> Vec<Complex64> {
    let n = psi_hat.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = psi_hat.to_vec();
    planner.plan_fft_inverse(n).process(&mut buf);
    // buf[x] now holds n·(−1)^x ψ_x for the sites x = idx (idx < n/2) or idx − n
    for (idx, z) in buf.iter_mut().enumerate() {
        let x = if idx < n / 2 { idx as f64 } else { idx as f64 - n as f64 };
        *z *= Complex64::from_polar(1.0 / n as f64, -PI * x / n as f64);
    }
    planner.plan_fft_forward(n).process(&mut buf);
    buf
}

/// A Gaussian test function on phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub x_c: f64,
    pub sigma_x: f64,
    pub k_c: f64,
    pub sigma_k: f64,
}

impl TestFunction {
    pub fn k_profile(&self, k: f64) -> f64 {
        let d = wrap(k - self.k_c);
        (-d * d / (2.0 * self.sigma_k * self.sigma_k)).exp()
    }

    pub fn value(&self, x: f64, k: f64) -> f64 {
        let d = x - self.x_c;
        (-d * d / (2.0 * self.sigma_x * self.sigma_x)).exp() * self.k_profile(k)
    }

    /// `∫ e^{−2πiξx} O(x,k) dx`.
    pub fn hat(&self, xi: f64, k: f64) -> Complex64 {
        let s = self.sigma_x;
        let amp = s * (2.0 * PI).sqrt() * (-2.0 * PI * PI * s * s * xi * xi).exp() * self.k_profile(k);
        Complex64::from_polar(amp, -2.0 * PI * xi * self.x_c)
    }

    /// Eight Gaussians: four positions times the carriers `±k_ref`.
    pub fn battery(k_ref: f64) -> Vec<TestFunction> {
        let mut out = Vec::new();
        for &k_c in &[k_ref, -k_ref] {
            for &x_c in &[-0.3, -0.15, 0.15, 0.3] {
                out.push(TestFunction { x_c, sigma_x: 0.06, k_c, sigma_k: 0.05 });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingStat {
    pub id: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Which half of the torus to keep when integrating a Wigner function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KHalf {
    Positive,
    Negative,
    All,
}

impl KHalf {
    pub fn contains(self, k: f64) -> bool {
        match self {
            KHalf::Positive => k > 0.0 && k < 0.5,
            KHalf::Negative => k < 0.0 && k > -0.5,
            KHalf::All => true,
        }
    }
}

/// Anything that can report the Wigner mass in a phase-space box.
pub trait PhaseSpaceMass {
    /// `∫_{k ∈ half} ∫_a^b W(x, k) dx dk`.
    fn mass(&self, a: f64, b: f64, half: KHalf) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub t: f64,
    pub eps: f64,
    pub n_modes: usize,
    pub count: usize,
    /// `ξ_q = q/(εn)` for `q = −n..n`.
    pub xi: Vec<f64>,
    pub k: Vec<f64>,
    /// Row-major over `(ξ, k)`.
    pub values: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub pairings: Vec<PairingStat>,
}

impl WignerGrid {
    pub fn rows(&self) -> usize {
        self.xi.len()
    }

    pub fn cols(&self) -> usize {
        self.k.len()
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.cols() + col]
    }

    pub fn d_xi(&self) -> f64 {
        1.0 / (self.eps * self.n_modes as f64)
    }

    /// Row holding `ξ`, or `GridMismatch` when `εξ/2` is off the half-grid.
    pub fn row_for_xi(&self, xi: f64) -> Result<usize> {
        let n = self.n_modes;
        let q = xi * self.eps * n as f64;
        let qr = q.round();
        if (q - qr).abs() > 1e-9 * q.abs().max(1.0) || qr < -(n as f64) || qr >= n as f64 {
            return Err(Error::GridMismatch { xi, n, eps: self.eps });
        }
        Ok((qr as i64 + n as i64) as usize)
    }

    /// Estimates at the requested `ξ` values, one row per entry.
    pub fn select(&self, xi: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        xi.iter()
            .map(|&x| {
                let r = self.row_for_xi(x)?;
                Ok(self.values[r * self.cols()..(r + 1) * self.cols()].to_vec())
            })
            .collect()
    }

    /// Largest `|Ŵ(ξ,k) − conj Ŵ(−ξ,k)|` over the grid.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.n_modes;
        let mut worst: f64 = 0.0;
        for q in 1..n {
            let (a, b) = (n + q, n - q);
            for j in 0..self.cols() {
                worst = worst.max((self.at(a, j) - self.at(b, j).conj()).norm());
            }
        }
        worst
    }

    /// `∫∫ O W dx dk` on the grid.
    pub fn pair(&self, o: &TestFunction) -> f64 {
        let dk = 1.0 / self.cols() as f64;
        let dxi = self.d_xi();
        let mut s = 0.0;
        for (r, &xi) in self.xi.iter().enumerate() {
            for (j, &k) in self.k.iter().enumerate() {
                s += (self.at(r, j) * o.hat(xi, k).conj()).re;
            }
        }
        s * dk * dxi
    }

    /// Real `W(x, k)` on `x_m = −L/2 + mε/2`, row-major over `(x, k)`.
    pub fn to_x_space(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_modes;
        let m = 2 * n;
        let cols = self.cols();
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(m);
        let mut out = vec![0.0; m * cols];
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..cols {
            // slot q mod 2n, with the (−1)^q factor shifting x to start at −L/2
            for (r, _) in self.xi.iter().enumerate() {
                let q = r as i64 - n as i64;
                let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                buf[q.rem_euclid(m as i64) as usize] = self.at(r, j) * sign;
            }
            fft.process(&mut buf);
            for (i, z) in buf.iter().enumerate() {
                out[i * cols + j] = z.re * self.d_xi();
            }
        }
        let l = self.eps * n as f64;
        let xs = (0..m).map(|i| -0.5 * l + i as f64 * l / m as f64).collect();
        (xs, out)
    }

    /// Little-endian dump of the values, used by the binary grid writer.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 16);
        for z in &self.values {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }
}

impl PhaseSpaceMass for WignerGrid {
    fn mass(&self, a: f64, b: f64, half: KHalf) -> Result<f64> {
        let dk = 1.0 / self.cols() as f64;
        let dxi = self.d_xi();
        let mut total = 0.0;
        for (r, &xi) in self.xi.iter().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, &k) in self.k.iter().enumerate() {
                if half.contains(k) {
                    s += self.at(r, j);
                }
            }
            let integral = if xi == 0.0 {
                Complex64::new(b - a, 0.0)
            } else {
                let w = 2.0 * PI * xi;
                (Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a)) / Complex64::new(0.0, w)
            };
            total += (s * integral).re;
        }
        Ok(total * dk * dxi)
    }
}

/// Mergeable running sums for one snapshot time.
#[derive(Debug, Clone)]
pub struct WignerAccumulator {
    n: usize,
    eps: f64,
    t: f64,
    count: usize,
    sum: Vec<Complex64>,
    sumsq: Vec<f64>,
    battery: Vec<TestFunction>,
    pair_sum: Vec<f64>,
    pair_sq: Vec<f64>,
}

impl WignerAccumulator {
    pub fn new(n: usize, eps: f64, t: f64) -> Self {
        WignerAccumulator {
            n,
            eps,
            t,
            count: 0,
            sum: vec![Complex64::new(0.0, 0.0); 2 * n * n],
            sumsq: vec![0.0; 2 * n * n],
            battery: Vec::new(),
            pair_sum: Vec::new(),
            pair_sq: Vec::new(),
        }
    }

    /// Also tracks per-realization pairings with these test functions.
    pub fn with_battery(mut self, battery: Vec<TestFunction>) -> Self {
        self.pair_sum = vec![0.0; battery.len()];
        self.pair_sq = vec![0.0; battery.len()];
        self.battery = battery;
        self
    }

    fn doubled(grid: &[Complex64], half: &[Complex64]) -> Vec<Complex64> {
        grid.iter().zip(half).flat_map(|(a, b)| [*a, *b]).collect()
    }

    /// Adds realizations `(ψ̂ on the grid, ψ̂ on the half grid)` in order.
    pub fn add_batch(&mut self, batch: &[(&[Complex64], &[Complex64])]) {
        let n = self.n;
        let scale = 0.5 * self.eps;
        let doubled: Vec<Vec<Complex64>> = batch.iter().map(|(g, h)| Self::doubled(g, h)).collect();
        let m = 2 * n;
        self.sum
            .par_chunks_mut(n)
            .zip(self.sumsq.par_chunks_mut(n))
            .enumerate()
            .for_each(|(row, (sum, sq))| {
                let q = row as i64 - n as i64;
                for d in &doubled {
                    for j in 0..n {
                        let lo = (2 * j as i64 - q).rem_euclid(m as i64) as usize;
                        let hi = (2 * j as i64 + q).rem_euclid(m as i64) as usize;
                        let v = d[lo].conj() * d[hi] * scale;
                        sum[j] += v;
                        sq[j] += v.norm_sqr();
                    }
                }
            });
        if !self.battery.is_empty() {
            let ks = torus_grid(n);
            let dxi = 1.0 / (self.eps * n as f64);
            let dk = 1.0 / n as f64;
            for d in &doubled {
                for (i, o) in self.battery.iter().enumerate() {
                    // the transform of a Gaussian is negligible beyond ~6 widths in ξ
                    let cut = (6.0 / (2.0 * PI * o.sigma_x) / dxi).ceil() as i64;
                    let mut p = 0.0;
                    for q in (-cut).max(-(n as i64))..cut.min(n as i64) {
                        let xi = q as f64 * dxi;
                        for (j, &k) in ks.iter().enumerate() {
                            let lo = (2 * j as i64 - q).rem_euclid(m as i64) as usize;
                            let hi = (2 * j as i64 + q).rem_euclid(m as i64) as usize;
                            p += (d[lo].conj() * d[hi] * o.hat(xi, k).conj()).re;
                        }
                    }
                    let p = p * scale * dxi * dk;
                    self.pair_sum[i] += p;
                    self.pair_sq[i] += p * p;
                }
            }
        }
        self.count += batch.len();
    }

    pub fn finish(self) -> WignerGrid {
        let n = self.n;
        let m = self.count.max(1) as f64;
        let values: Vec<Complex64> = self.sum.iter().map(|s| s / m).collect();
        let stderr = self
            .sumsq
            .iter()
            .zip(&values)
            .map(|(sq, mean)| {
                if self.count > 1 {
                    (((sq / m - mean.norm_sqr()) * m / (m - 1.0)).max(0.0) / m).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let pairings = self
            .pair_sum
            .iter()
            .zip(&self.pair_sq)
            .enumerate()
            .map(|(id, (s, sq))| {
                let mean = s / m;
                let stderr = if self.count > 1 { (((sq / m - mean * mean) * m / (m - 1.0)).max(0.0) / m).sqrt() } else { 0.0 };
                PairingStat { id, mean, stderr }
            })
            .collect();
        WignerGrid {
            t: self.t,
            eps: self.eps,
            n_modes: n,
            count: self.count,
            xi: (0..2 * n).map(|r| (r as f64 - n as f64) / (self.eps * n as f64)).collect(),
            k: torus_grid(n),
            values,
            stderr,
            pairings,
        }
    }
}

/// Wigner estimate from a set of snapshots taken at macroscopic time `t`.
pub fn estimate_wigner(snapshots: &[Vec<Complex64>], t: f64, eps: f64) -> Result<WignerGrid> {
    let n = snapshots.first().map_or(0, |s| s.len());
    if n < 2 || n % 2 != 0 || snapshots.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParameter("snapshots need one common even length".into()));
    }
    let mut acc = WignerAccumulator::new(n, eps, t);
    let halves: Vec<Vec<Complex64>> = snapshots.iter().map(|s| half_grid_interpolate(s)).collect();
    let batch: Vec<(&[Complex64], &[Complex64])> = snapshots.iter().zip(&halves).map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    acc.add_batch(&batch);
    Ok(acc.finish())
}
