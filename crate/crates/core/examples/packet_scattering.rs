//! A wave packet hits the thermostat; compare the split with the rate triple.
//!
//! cargo run --release --example packet_scattering -- [realizations]

use num_complex::Complex64;
use thermochain::kinetic::{energy_fractions, FractionOptions, KineticControl, KineticModel, PacketInitial};
use thermochain::rates::rates_uncontrolled;
use thermochain::sim::{run_ensemble, InitialMeasure, Observers, SimConfig, WavePacket};
use thermochain::wigner::TestFunction;
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let disp = Dispersion::new(1.0, 1.0)?;
    let k0 = 0.25;
    let packet = WavePacket { x0: -0.125, sigma_x: 0.035, k0, mass: 1.0 };
    let config = SimConfig { nu: 1.0, temperature: 0.0, n_realizations: m, seed: 11, ..SimConfig::new(disp) };
    let battery = TestFunction::battery(k0);
    let obs = Observers { energy_every: 0, wigner_times: vec![1.0], battery: battery.clone() };
    let start = std::time::Instant::now();
    let out = run_ensemble(&config, &InitialMeasure::WavePacket { packet, margin: 0.05 }, 1.0, &obs)?;
    let grid = &out.wigner[0];
    let opts = FractionOptions::default();
    let measured = energy_fractions(grid, k0, packet.mass, &opts)?;

    let w0 = PacketInitial::new(packet, config.eps);
    let no_pulse = |_: f64| Complex64::new(0.0, 0.0);
    let model = KineticModel { disp, temperature: 0.0, w0: &w0, control: KineticControl::Impulsive { nu: 1.0, script_f: &no_pulse } };
    let slice = model.at(1.0, 0.5);
    let closed = energy_fractions(&slice, k0, packet.mass, &opts)?;
    let r = rates_uncontrolled(&disp, 1.0, k0)?;

    println!("{m} realizations in {:.1?}", start.elapsed());
    println!("rates       r_t={:.4} r_r={:.4} r_a={:.4}", r.r_t, r.r_r, r.r_a);
    println!("simulated   t={:.4} r={:.4} a={:.4}", measured.transmitted, measured.reflected, measured.absorbed);
    println!("closed form t={:.4} r={:.4} a={:.4}", closed.transmitted, closed.reflected, closed.absorbed);
    for (o, p) in battery.iter().zip(&grid.pairings) {
        println!("O(x={:+.2}, k={:+.2})  sim {:.5} ± {:.1e}  limit {:.5}", o.x_c, o.k_c, p.mean, p.stderr, slice.pair(o)?);
    }
    Ok(())
}
