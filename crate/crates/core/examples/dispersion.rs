//! Dispersion relation, group velocity and the structural checks on ω.
//!
//! cargo run --example dispersion -- [omega0] [gamma]

use thermochain::dispersion::uniform_grid;
use thermochain::{Dispersion, Wavenumber};

fn main() -> thermochain::Result<()> {
    let arg = |i: usize, d: f64| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let disp = Dispersion::new(arg(1, 1.0), arg(2, 1.0))?;
    println!("band [{:.4}, {:.4}]", disp.omega_min(), disp.omega_max());
    for k in uniform_grid(0.0, 0.5, 11) {
        let p = disp.evaluate(Wavenumber::new(k));
        println!("k={:.2}  ω={:.6}  ω'={:+.6}  v={:+.6}", p.k, p.omega, p.omega_prime, p.v_g);
    }
    let report = disp.check_assumptions();
    println!("assumptions hold: {}", report.all_pass());
    println!("{report:#?}");
    Ok(())
}
