use ness_core::incoming::{
    bound_state_scan, branch_diagnostic, check_completeness, completeness_residuals, eigenoperator_residual, incoming_on_uniform, single_level_h, Branch,
};
use ness_core::linalg::C64;
use ness_core::model::{make_chain_system, ChainSpec, PowerLawChannel, ReservoirChannel, SystemSpec};
use ness_core::transport::self_energy;

fn wideband() -> PowerLawChannel {
    PowerLawChannel::new(1.0, -0.5, 1.0, 1.0, 6.0).unwrap()
}

fn level(u: f64, vl: f64, vr: f64) -> SystemSpec {
    make_chain_system(&ChainSpec::new(1, 1.0, u).unwrap(), vl, vr).unwrap()
}

#[test]
fn wideband_residuals_shrink_with_modes() {
    let ch = wideband();
    let sys = level(2.0, 0.1, 0.1);
    let maxima: Vec<f64> = [100, 200, 400].iter().map(|&m| check_completeness(&sys, &ch, &ch, m).unwrap().report.max()).collect();
    assert!(maxima[0] > maxima[1] && maxima[1] > maxima[2], "{maxima:?}");
    let last = check_completeness(&sys, &ch, &ch, 400).unwrap();
    assert!(last.passes(), "{last:?}");
}

#[test]
fn each_condition_decreases() {
    let ch = wideband();
    let sys = level(2.0, 0.1, 0.1);
    let a = completeness_residuals(&incoming_on_uniform(&sys, &ch, &ch, 100, Branch::Minus).unwrap());
    let b = completeness_residuals(&incoming_on_uniform(&sys, &ch, &ch, 400, Branch::Minus).unwrap());
    for (x, y) in a.conditions().iter().zip(b.conditions()) {
        assert!(y <= *x, "{a:?} -> {b:?}");
    }
}

#[test]
fn three_site_chain_certifies() {
    let ch = wideband();
    let sys = make_chain_system(&ChainSpec::new(3, 1.0, 2.5).unwrap(), 0.2, 0.2).unwrap();
    let c = check_completeness(&sys, &ch, &ch, 400).unwrap();
    assert!(c.bound_states.is_empty());
    assert!(c.report.max() < 5e-2, "{c:?}");
}

#[test]
fn decoupled_and_bound_state_models_fail() {
    let ch = wideband();
    let dec = check_completeness(&level(2.0, 0.0, 0.0), &ch, &ch, 200).unwrap();
    assert!(!dec.passes());
    assert!((dec.report.c9 - 1.0).abs() < 1e-12);
    let bound = check_completeness(&level(-3.0, 0.1, 0.0), &ch, &ch, 200).unwrap();
    assert!(!bound.passes());
    assert_eq!(bound.bound_states.len(), 1);
    assert!((bound.bound_states[0] + 3.085).abs() < 1e-2, "{:?}", bound.bound_states);
}

#[test]
fn bound_state_above_band() {
    let ch = wideband();
    let roots = bound_state_scan(&level(8.0, 0.3, 0.3), &ch, &ch, 0.01).unwrap();
    assert_eq!(roots.len(), 1, "{roots:?}");
    assert!(roots[0] > 5.0);
}

#[test]
fn eigen_residual_detects_perturbed_coefficients() {
    let ch = wideband();
    let field = incoming_on_uniform(&level(2.0, 0.1, 0.1), &ch, &ch, 1600, Branch::Minus).unwrap();
    let base = eigenoperator_residual(&field).max();
    let mut bad = field.clone();
    for a in bad.a_l.iter_mut() {
        *a *= 1.01;
    }
    let off = eigenoperator_residual(&bad).max();
    assert!(off >= 5.0 * base, "{base} -> {off}");
}

#[test]
fn field_matches_single_level_closed_form() {
    let ch = wideband();
    let (eps, wl, wr) = (1.5, 0.3, 0.2);
    let f = incoming_on_uniform(&level(eps, wl, wr), &ch, &ch, 64, Branch::Minus).unwrap();
    for k in (0..64).step_by(7) {
        let om = f.left.energies[k];
        let xi = self_energy(&ch, om).unwrap();
        let u = f.left.couplings[k];
        let want = single_level_h(eps, wl, wr, xi, xi, om, u);
        assert!((f.h[(k, 0)] - want).norm() <= 1e-10 * want.norm(), "{k}");
    }
}

#[test]
fn minus_branch_is_the_incoming_one() {
    let ch = wideband();
    let f = incoming_on_uniform(&level(2.0, 0.1, 0.1), &ch, &ch, 200, Branch::Minus).unwrap();
    let d = branch_diagnostic(&f);
    assert!(d.minus < 0.1 * d.plus, "{d:?}");
}

#[test]
fn left_right_swap_exchanges_fields() {
    let ch = wideband();
    let sys = level(2.0, 0.3, 0.1);
    let f = incoming_on_uniform(&sys, &ch, &ch, 50, Branch::Minus).unwrap();
    let g = incoming_on_uniform(&sys.swapped(), &ch, &ch, 50, Branch::Minus).unwrap();
    let close = |a: &[C64], b: &[C64]| a.iter().zip(b).all(|(x, y)| (x - y).norm() <= 1e-12 * (1.0 + x.norm()));
    assert!(close(&f.a_l, &g.abar_r) && close(&f.a_r, &g.abar_l));
    assert!(close(f.h.as_slice(), g.hbar.as_slice()));
    assert_eq!(ch.band(), wideband().band());
}
