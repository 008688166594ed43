//! A short force pulse on a cold chain: energy injected against the budget.
//!
//! cargo run --release --example impulsive_pulse -- [width]

use thermochain::sim::{run_ensemble, Control, InitialMeasure, Observers, Pulse, SimConfig};
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let w: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let disp = Dispersion::new(1.0, 1.0)?;
    for n in [128usize, 512, 2048] {
        let eps = 1.0 / n as f64;
        let pulse = Pulse::new(w, eps)?;
        let c = SimConfig { n_modes: n, eps, n_realizations: 1, control: Control::Impulsive(pulse), ..SimConfig::new(disp) };
        let out = run_ensemble(&c, &InitialMeasure::Zero, 0.5, &Observers::energy_only(8))?;
        let peak = out.energy.iter().map(|r| r.mean_energy).fold(0.0, f64::max);
        let last = out.energy.last().map_or(0.0, |r| r.mean_energy);
        // AM-GM on the work term gives E ≤ ∫εF²/(2ν)
        println!(
            "ε={eps:.1e}  budget {:.4}  peak energy {peak:.4e}  at t=0.5 {last:.4e}  bound {:.4}",
            pulse.energy_budget(0.5),
            pulse.energy_budget(0.5) / (2.0 * c.nu)
        );
    }
    Ok(())
}
