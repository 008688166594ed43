//! Boundary limit of the Laplace transform: closed form against the numeric oracle.
//!
//! cargo run --release --example limit_oracle

use thermochain::dispersion::uniform_grid;
use thermochain::spectral::{lim_laplace_c_omega, select_reading, LimitMethod, LimitReading};
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let disp = Dispersion::new(1.0, 1.0)?;
    let ks = uniform_grid(0.05, 0.45, 64);
    let (pick, uniform, unscaled) = select_reading(&disp, &ks)?;
    println!("worst relative error: uniform {uniform:.2e}, log unscaled {unscaled:.2e}; using {pick:?}");
    for &k in ks.iter().step_by(8) {
        let c = lim_laplace_c_omega(&disp, k.into(), LimitMethod::ClosedForm(LimitReading::Uniform))?;
        let o = lim_laplace_c_omega(&disp, k.into(), LimitMethod::NumericOracle)?;
        println!("k={k:.4}  closed {:.7}{:+.7}i  oracle {:.7}{:+.7}i", c.re, c.im, o.re, o.im);
    }
    Ok(())
}
