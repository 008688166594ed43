//! Small quadrature toolbox: Gauss–Legendre panels, periodic trapezoid, Richardson tables.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn sixteen() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
        total
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Mean of `f` over `n` equispaced points of the torus `[-1/2, 1/2)`.
/// Spectrally accurate for smooth periodic integrands.
pub fn torus_mean<T, F>(n: usize, f: F) -> T
where
    T: std::iter::Sum<T> + std::ops::Div<f64, Output = T>,
    F: Fn(f64) -> T,
{
    (0..n).map(|j| f(j as f64 / n as f64 - 0.5)).sum::<T>() / n as f64
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => h * (samples.iter().sum::<f64>() - 0.5 * (samples[0] + samples[n - 1])),
    }
}

/// Trapezoid weights for `n` uniformly spaced samples with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    } else if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// Richardson table for a sequence computed at step sizes `h, h/r, h/r², ...`
/// with error expansion in integer powers of `h`. Eliminates `order` leading
/// terms and returns the value built from the finest entries.
pub fn richardson<T>(values: &[T], ratio: f64, order: usize) -> T
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    assert!(!values.is_empty());
    let mut row: Vec<T> = values.to_vec();
    let levels = order.min(values.len() - 1);
    for m in 1..=levels {
        let f = ratio.powi(m as i32);
        row = row
            .windows(2)
            .map(|w| w[1] + (w[1] - w[0]) * (1.0 / (f - 1.0)))
            .collect();
    }
    *row.last().unwrap()
}
