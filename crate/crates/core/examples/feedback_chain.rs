//! Simulate a packet under a synthesized memory feedback and compare with its rates.
//!
//! cargo run --release --example feedback_chain -- [realizations]

use thermochain::dispersion::uniform_grid;
use thermochain::kinetic::{energy_fractions, FractionOptions};
use thermochain::rates::rates_feedback;
use thermochain::sim::{run_ensemble, Control, FeedbackKernel, InitialMeasure, Observers, SimConfig, WavePacket};
use thermochain::synthesis::{apply_cutoff, build_frequency_design, synthesize_f, SynthesisMethod, TargetRates, TimeGrid};
use thermochain::Dispersion;

fn main() -> thermochain::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let disp = Dispersion::new(1.0, 1.0)?;
    let targets = TargetRates::constant(uniform_grid(0.02, 0.48, 64), 0.35, 0.49, 0.16)?;
    let design = build_frequency_design(&targets, &disp)?;
    let grid = TimeGrid::for_horizon(&disp, 64, 32)?;
    let control = apply_cutoff(&synthesize_f(&design, grid, &SynthesisMethod::band_fit())?, 64)?;
    let k0 = 0.25;
    let fhat = control.fhat_at(&[disp.omega(k0)])[0];
    let expected = rates_feedback(&disp, fhat, k0)?;

    let mut c = SimConfig { n_realizations: m, seed: 5, ..SimConfig::new(disp) };
    c.control = Control::Feedback(FeedbackKernel::resample(&grid.times(), &control.f_n, c.dt)?);
    let packet = WavePacket { x0: -0.125, sigma_x: 0.035, k0, mass: 1.0 };
    let obs = Observers { energy_every: 0, wigner_times: vec![1.0], battery: Vec::new() };
    let out = run_ensemble(&c, &InitialMeasure::WavePacket { packet, margin: 0.05 }, 1.0, &obs)?;
    let f = energy_fractions(&out.wigner[0], k0, packet.mass, &FractionOptions::default())?;
    println!("F̂ at k0: {:.4}{:+.4}i", fhat.re, fhat.im);
    println!("kernel rates r_t={:.4} r_r={:.4} r_a={:.4}", expected.r_t, expected.r_r, expected.r_a);
    println!("simulated    t={:.4} r={:.4} a={:.4}", f.transmitted, f.reflected, f.absorbed);
    Ok(())
}
