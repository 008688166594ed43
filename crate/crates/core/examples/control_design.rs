//! Design a memory feedback for prescribed rates and check the round trip.
//!
//! cargo run --release --example control_design

use std::f64::consts::PI;

use thermochain::dispersion::uniform_grid;
use thermochain::synthesis::{
    build_frequency_design, check_h6, check_targets, cutoff_sweep, h6_probes, synthesize_f, SynthesisMethod, TargetRates, TimeGrid,
};
use thermochain::Dispersion;

fn run(name: &str, targets: &TargetRates, disp: &Dispersion) -> thermochain::Result<()> {
    let report = check_targets(targets);
    println!("{name}: admissible={} failed={:?}", report.admissible(), report.failed_checks());
    let design = build_frequency_design(targets, disp)?;
    println!("  min|TH| = {:.4} (bound {:.4}), |F̄| bound ratio {:.3}", design.report.min_th, design.report.th_bound, design.report.fbar_bound_ratio);
    let grid = TimeGrid::for_horizon(disp, 64, 32)?;
    let h6 = check_h6(&design, &h6_probes(grid.t_max()));
    println!("  causality diagnostic: {:.3e} vs threshold {:.3e}", h6.max_discrepancy, h6.threshold);
    let control = synthesize_f(&design, grid, &SynthesisMethod::band_fit())?;
    for s in cutoff_sweep(&control, targets, disp, &[8, 16, 32, 64], 0.05)? {
        println!("  N={:>2}  L2 error {:.4e}", s.n, s.error);
    }
    Ok(())
}

fn main() -> thermochain::Result<()> {
    let disp = Dispersion::new(1.0, 1.0)?;
    let ks = uniform_grid(0.02, 0.48, 64);
    run("constant (0.35, 0.49, 0.16)", &TargetRates::constant(ks.clone(), 0.35, 0.49, 0.16)?, &disp)?;
    let smooth = TargetRates::from_fn(ks, |k| {
        let s = (2.0 * PI * k).sin();
        (0.49 - 0.04 * s, 0.16 + 0.04 * s)
    })?;
    run("smooth family", &smooth, &disp)
}
