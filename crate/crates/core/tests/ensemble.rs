use num_complex::Complex64;
use thermochain::dispersion::uniform_grid;
use thermochain::sim::{
    init_realization, realization_rng, run_ensemble, Control, FeedbackKernel, InitialMeasure, Observers, Pulse, SimConfig, WavePacket,
};
use thermochain::synthesis::{apply_cutoff, build_frequency_design, synthesize_f, SynthesisMethod, TargetRates, TimeGrid};
use thermochain::wigner::TestFunction;
use thermochain::Dispersion;

fn unit() -> Dispersion {
    Dispersion::new(1.0, 1.0).unwrap()
}

fn small(n: usize) -> SimConfig {
    SimConfig { n_modes: n, eps: 1.0 / n as f64, ..SimConfig::new(unit()) }
}

fn thermal() -> InitialMeasure {
    InitialMeasure::Thermal { temperature: 1.0, margin: 0.02 }
}

#[test]
fn bytes_do_not_depend_on_threads_or_batching() {
    let mut c = small(64);
    c.temperature = 1.0;
    c.n_realizations = 23;
    c.seed = 42;
    let obs = Observers { energy_every: 16, wigner_times: vec![0.25, 0.5], battery: TestFunction::battery(0.25) };
    let run_with = |threads: usize, batch: usize| {
        let c = SimConfig { batch, ..c.clone() };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&c, &thermal(), 0.5, &obs).unwrap().to_bytes())
    };
    let reference = run_with(1, 32);
    assert!(!reference.is_empty());
    assert_eq!(reference, run_with(4, 32));
    assert_eq!(reference, run_with(3, 5));
    assert_eq!(reference, run_with(1, 32));
}

#[test]
fn packet_amplitudes_are_phase_invariant() {
    // ⟨ψ̂(k)ψ̂(h)⟩ = 0 because of the uniform phase
    let c = small(64);
    let p = WavePacket { x0: -2.0, sigma_x: 0.3, k0: 0.25, mass: 1.0 };
    let m = InitialMeasure::WavePacket { packet: p, margin: 0.05 };
    let draws = 10_000;
    let (j, l) = (47, 49);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for i in 0..draws {
        let mut rng = realization_rng(17, i);
        let s = init_realization(&c, &m, &mut rng).unwrap();
        acc += s.psi_hat[j] * s.psi_hat[l];
        scale += s.psi_hat[j].norm() * s.psi_hat[l].norm();
    }
    let rel = acc.norm() / scale;
    assert!(rel < 3.0 / (draws as f64).sqrt(), "{rel}");
}

#[test]
fn thermal_state_is_stationary() {
    let mut c = small(128);
    c.temperature = 1.0;
    c.n_realizations = 160;
    c.seed = 3;
    let obs = Observers { energy_every: 64, wigner_times: vec![0.5], battery: Vec::new() };
    let out = run_ensemble(&c, &thermal(), 0.5, &obs).unwrap();
    let g = &out.wigner[0];
    let row = g.row_for_xi(0.0).unwrap();
    let mut inside = 0;
    let mut total = 0;
    let mut mean = 0.0;
    for (j, &k) in g.k.iter().enumerate() {
        if (0.15..=0.35).contains(&k.abs()) {
            let (w, se) = (g.at(row, j).re, g.stderr[row * g.cols() + j]);
            total += 1;
            mean += w;
            if (w - 1.0).abs() <= 2.0 * se {
                inside += 1;
            }
        }
    }
    mean /= total as f64;
    assert!((mean - 1.0).abs() < 0.05, "{mean}");
    assert!(inside as f64 >= 0.85 * total as f64, "{inside}/{total}");
    // the thermostat neither heats nor cools the equilibrium beyond the growth bound
    assert!(out.energy_slope() <= 2.0 * 1.2, "{}", out.energy_slope());
    let e0 = out.energy[0].mean_energy;
    assert!(out.energy.iter().all(|r| (r.mean_energy - e0).abs() < 0.1 * e0));
}

#[test]
fn pulse_energy_bound() {
    // dE/dt ≤ F²/(2ν) + 2νT, and ∫F² over macroscopic time is ∫η² = 1.5/w
    for &w in &[0.5, 2.0] {
        let mut c = small(128);
        c.control = Control::Impulsive(Pulse::new(w, c.eps).unwrap());
        c.n_realizations = 2;
        let out = run_ensemble(&c, &InitialMeasure::Zero, 0.5, &Observers::energy_only(16)).unwrap();
        let bound = 1.5 / w / (2.0 * c.nu);
        let peak = out.energy.iter().map(|r| r.mean_energy).fold(0.0, f64::max);
        assert!(peak > 0.0 && peak <= bound, "{peak} {bound}");
    }
}

#[test]
fn pulse_budget_is_scale_free() {
    let budgets: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&eps| Pulse::new(0.5, eps).unwrap().energy_budget(1.0)).collect();
    for b in &budgets {
        assert!((b - 3.0).abs() < 1e-12, "{budgets:?}");
    }
}

#[test]
fn designed_feedback_does_not_heat_a_cold_chain() {
    let disp = unit();
    let targets = TargetRates::constant(uniform_grid(0.02, 0.48, 48), 0.35, 0.49, 0.16).unwrap();
    let design = build_frequency_design(&targets, &disp).unwrap();
    let grid = TimeGrid::for_horizon(&disp, 64, 32).unwrap();
    let control = apply_cutoff(&synthesize_f(&design, grid, &SynthesisMethod::band_fit()).unwrap(), 64).unwrap();
    let times: Vec<f64> = grid.times();
    let mut c = small(128);
    c.control = Control::Feedback(FeedbackKernel::resample(&times, &control.f_n, c.dt).unwrap());
    c.n_realizations = 4;
    let p = WavePacket { x0: -0.125, sigma_x: 0.035, k0: 0.25, mass: 1.0 };
    let out = run_ensemble(&c, &InitialMeasure::WavePacket { packet: p, margin: 0.05 }, 1.0, &Observers::energy_only(32)).unwrap();
    let e: Vec<f64> = out.energy.iter().map(|r| r.mean_energy).collect();
    let slack = 3.0 * out.energy.iter().map(|r| r.stderr).fold(0.0, f64::max) + 1e-3 * e[0];
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + slack, "{e:?}");
    }
    assert!(e[e.len() - 1] < e[0]);
}

#[test]
fn smeared_friction_keeps_equilibrium_growth_bounded() {
    let mut c = small(64);
    c.temperature = 1.0;
    c.control = Control::Feedback(FeedbackKernel::smeared_friction(1.0, c.dt, 4));
    c.n_realizations = 48;
    let out = run_ensemble(&c, &thermal(), 1.0, &Observers::energy_only(32)).unwrap();
    assert!(out.energy_slope() <= 2.0 * 1.2, "{}", out.energy_slope());
}
