use ness_core::error::Error;
use ness_core::incoming::{incoming_on_uniform, Branch};
use ness_core::model::{make_chain_system, ChainSpec, PowerLawChannel, ReservoirChannel, SystemSpec, ThermoState};
use ness_core::oracle::{compare_with_landauer, discretize, initial_correlation, ness_two_point, plateau_current, LatticeEvolution};
use ness_core::transport::CurrentConvention;

fn wideband() -> PowerLawChannel {
    PowerLawChannel::new(1.0, -0.5, 1.0, 1.0, 6.0).unwrap()
}

fn chain() -> SystemSpec {
    make_chain_system(&ChainSpec::new(3, 1.0, 0.0).unwrap(), 0.2, 0.2).unwrap()
}

#[test]
fn benchmark_matches_landauer() {
    let ch = wideband();
    let th = ThermoState::new(5.0, 5.0, 0.5, -0.5).unwrap();
    let cmp = compare_with_landauer(&chain(), &ch, &ch, &th, CurrentConvention::default(), 400, 200.0, 0.2).unwrap();
    assert!(cmp.rel_err <= 0.05, "{cmp:?}");
    assert_eq!((cmp.best.prefactor, cmp.best.measure_2pi), (4.0, true));
    assert!(cmp.j_lattice_spread < 0.1 * cmp.j_lattice_mean.abs());
    assert!(cmp.configured.rel_err > 1.0);
}

#[test]
fn lattice_state_relaxes_to_incoming_occupations() {
    let ch = wideband();
    let sys = chain();
    let th = ThermoState::new(5.0, 5.0, 0.5, -0.5).unwrap();
    let model = discretize(&sys, &ch, &ch, 400).unwrap();
    let c0 = initial_correlation(&model, &th, &[0.0; 3]).unwrap();
    let evo = LatticeEvolution::new(&model, &c0).unwrap();
    let field = incoming_on_uniform(&sys, &ch, &ch, 400, Branch::Minus).unwrap();
    let packets = [(-0.5, 0.2), (0.0, 0.2), (0.5, 0.2), (1.0, 0.5), (2.0, 0.5), (3.0, 0.5)];
    for t in [100.0, 150.0] {
        for p in ness_two_point(&evo, &model, &field, &th, t, &packets).unwrap() {
            assert!(p.rel_err <= 0.1, "t = {t}: {p:?}");
        }
    }
}

#[test]
fn equilibrium_lattice_carries_no_current() {
    let ch = wideband();
    let th = ThermoState::new(3.0, 3.0, 0.2, 0.2).unwrap();
    let model = discretize(&chain(), &ch, &ch, 200).unwrap();
    let c0 = initial_correlation(&model, &th, &[0.5; 3]).unwrap();
    let p = plateau_current(&model, &c0, 80.0, 0.2).unwrap();
    assert!(p.mean.abs() < 5e-3, "{p:?}");
}

#[test]
fn lattice_level_decays_at_golden_rule_rate() {
    // One filled level coupled to an empty left lattice: n(t) ≈ exp(−2π J w² t).
    let ch = wideband();
    let w = 0.15;
    let sys = make_chain_system(&ChainSpec::new(1, 1.0, 2.0).unwrap(), w, 0.0).unwrap();
    let model = discretize(&sys, &ch, &ch, 600).unwrap();
    let th = ThermoState::new(f64::INFINITY, f64::INFINITY, -5.0, -5.0).unwrap();
    let c0 = initial_correlation(&model, &th, &[1.0]).unwrap();
    let evo = LatticeEvolution::new(&model, &c0).unwrap();
    let gamma = 2.0 * std::f64::consts::PI * ch.spectral_density(2.0) * w * w;
    // Least-squares slope of ln n over a few lifetimes, past the initial transient.
    let ts: Vec<f64> = (0..41).map(|i| (1.0 + 4.0 * i as f64 / 40.0) / gamma).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| evo.block(t, 0..1, 0..1)[(0, 0)].re.ln()).collect();
    let (tm, ym) = (ts.iter().sum::<f64>() / 41.0, ys.iter().sum::<f64>() / 41.0);
    let slope = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum::<f64>() / ts.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
    assert!((-slope - gamma).abs() < 0.15 * gamma, "rate {} vs {gamma}", -slope);
}

#[test]
fn recurrence_window_is_enforced() {
    let ch = wideband();
    let th = ThermoState::new(5.0, 5.0, 0.5, -0.5).unwrap();
    let model = discretize(&chain(), &ch, &ch, 50).unwrap();
    let c0 = initial_correlation(&model, &th, &[0.0; 3]).unwrap();
    assert!(matches!(plateau_current(&model, &c0, 1e3, 0.2), Err(Error::RecurrenceRisk { .. })));
}
