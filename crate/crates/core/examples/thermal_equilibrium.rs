//! Start in equilibrium at temperature T and check that it stays there.
//!
//! cargo run --release --example thermal_equilibrium -- [realizations]

use thermochain::sim::{run_ensemble, InitialMeasure, Observers, SimConfig};
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let config = SimConfig { nu: 1.0, temperature: 1.0, n_realizations: m, seed: 5, ..SimConfig::new(Dispersion::new(1.0, 1.0)?) };
    let obs = Observers { energy_every: 512, wigner_times: vec![1.0], battery: Vec::new() };
    let start = std::time::Instant::now();
    let out = run_ensemble(&config, &InitialMeasure::Thermal { temperature: 1.0, margin: 0.02 }, 1.0, &obs)?;
    let g = &out.wigner[0];
    let row = g.row_for_xi(0.0)?;
    let mid: Vec<(f64, f64, f64)> = g
        .k
        .iter()
        .enumerate()
        .filter(|(_, k)| (0.15..=0.35).contains(&k.abs()))
        .map(|(j, &k)| (k, g.at(row, j).re, g.stderr[row * g.cols() + j]))
        .collect();
    let mean = mid.iter().map(|m| m.1).sum::<f64>() / mid.len() as f64;
    println!("{m} realizations in {:.1?}", start.elapsed());
    println!("mid-band W(ξ=0) averaged over {} modes: {mean:.4} (T = 1)", mid.len());
    for (k, w, se) in mid.iter().step_by(16) {
        println!("  k={k:+.3}  W={w:.3} ± {se:.3}");
    }
    for r in out.energy.iter().step_by(4) {
        println!("t={:.3}  E={:.4} ± {:.4}", r.t_macro, r.mean_energy, r.stderr);
    }
    println!("energy slope {:.4} (bound 2νT·1.2 = 2.4)", out.energy_slope());
    Ok(())
}
