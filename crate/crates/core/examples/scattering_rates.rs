//! Rate triples for friction and for a constant feedback transform.
//!
//! cargo run --example scattering_rates -- [nu]

use num_complex::Complex64;
use thermochain::dispersion::uniform_grid;
use thermochain::rates::{rate_grid, RateControl};
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let nu: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let disp = Dispersion::new(1.0, 1.0)?;
    let ks = uniform_grid(0.05, 0.45, 9);
    let fhat = |_: f64| Complex64::new(-1.0, 0.5);
    for (name, control) in [("friction", RateControl::Uncontrolled { nu }), ("feedback -1+0.5i", RateControl::Feedback(&fhat))] {
        println!("{name}");
        for r in rate_grid(&disp, &control, &ks) {
            let r = r?;
            println!("  k={:.3}  r_a={:.6} r_t={:.6} r_r={:.6}  sum-1={:+.1e}", r.k, r.r_a, r.r_t, r.r_r, r.sum() - 1.0);
        }
    }
    Ok(())
}
