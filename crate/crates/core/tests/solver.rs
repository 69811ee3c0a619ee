//! Nonlinear solution: closed-form beam deflection, trivial and gap-driven
//! solutions, convergence and determinism.

use beamtie::beam_fem::CrossSection;
use beamtie::generators::{cantilever, patch_test, PATCH_DIVISIONS};
use beamtie::model::Variant;
use beamtie::problem::Problem;
use beamtie::shapes::ElementKind;
use beamtie::solver::{solve, SolveError};
use beamtie::verify::{max_solid_displacement, mean_beam_displacement};
use nalgebra::Vector3;

#[test]
fn cantilever_tip_deflection_matches_bending_theory() {
    let section = CrossSection { radius: 0.02, youngs_modulus: 1000.0, poisson_ratio: 0.3 };
    let (length, force) = (1.0, 1e-6);
    for n_el in [8, 16] {
        let p = Problem::new(cantilever(n_el, length, section, Vector3::new(0.0, 0.0, force))).unwrap();
        let s = solve(&p).unwrap();
        let w = s.state.beams[0][n_el].position.z;
        let exact = force * length.powi(3) / (3.0 * section.youngs_modulus * section.inertia());
        assert!((w / exact - 1.0).abs() < 0.01, "{n_el} elements: {w} vs {exact}");
    }
}

#[test]
fn unloaded_patch_stays_at_rest() {
    for variant in [Variant::Cons, Variant::Disp] {
        let mut m = patch_test(ElementKind::Hex8, false, variant, PATCH_DIVISIONS);
        m.solve.load_scale = 0.0;
        let p = Problem::new(m).unwrap();
        let s = solve(&p).unwrap();
        assert!(max_solid_displacement(&s.state) < 1e-14);
        for (b, b0) in s.state.beams.iter().flatten().zip(p.reference_state().beams.iter().flatten()) {
            assert!((b.position - b0.position).norm() < 1e-14);
        }
    }
}

#[test]
fn ref_variant_closes_the_gap_without_load() {
    let mut m = patch_test(ElementKind::Hex8, false, Variant::Ref, PATCH_DIVISIONS);
    m.solve.load_scale = 0.0;
    let p = Problem::new(m).unwrap();
    let s = solve(&p).unwrap();
    // The free beams drop onto the surface; the block barely notices.
    let u = mean_beam_displacement(&p, &s.state);
    assert!((u.z + 0.05).abs() < 1e-3, "{u:?}");
}

#[test]
fn converged_residual_is_within_tolerance() {
    let p = Problem::new(patch_test(ElementKind::Hex8, true, Variant::Cons, PATCH_DIVISIONS)).unwrap();
    let s = solve(&p).unwrap();
    let last = s.history.last().unwrap();
    let ev = p.evaluate(&s.state, last.load_factor, false).unwrap();
    let r = p.free_residual(&ev).norm();
    let cfg = &p.model.solve;
    assert!(r <= cfg.absolute_tolerance.max(cfg.tolerance * last.residuals[0]), "{r}");
    assert!((r - last.residuals.last().unwrap()).abs() <= 1e-12 * last.residuals[0]);
}

#[test]
fn patch_test_converges_quickly() {
    for curved in [false, true] {
        let p = Problem::new(patch_test(ElementKind::Hex8, curved, Variant::Cons, PATCH_DIVISIONS)).unwrap();
        let s = solve(&p).unwrap();
        for rec in &s.history {
            assert!(rec.iterations() <= 5, "curved={curved}: {:?}", rec.residuals);
        }
    }
}

#[test]
fn iteration_limit_is_reported() {
    let mut m = patch_test(ElementKind::Hex8, true, Variant::Cons, PATCH_DIVISIONS);
    m.solve.max_iterations = 1;
    match solve(&Problem::new(m).unwrap()) {
        Err(e @ SolveError::NotConverged { .. }) => assert!(e.to_string().contains("load step 1")),
        other => panic!("expected non-convergence, got {:?}", other.map(|s| s.history)),
    }
}

#[test]
fn assembly_is_deterministic() {
    let p = Problem::new(patch_test(ElementKind::Tet10, true, Variant::Cons, PATCH_DIVISIONS)).unwrap();
    let mut state = p.reference_state();
    for (i, u) in state.displacement.iter_mut().enumerate() {
        *u = Vector3::new(1e-3 * (i as f64).sin(), 1e-3 * (i as f64).cos(), 2e-3 * (0.3 * i as f64).sin());
    }
    let a = p.evaluate(&state, 1.0, true).unwrap();
    let b = p.evaluate(&state, 1.0, true).unwrap();
    assert_eq!(a.residual, b.residual);
    assert_eq!(a.tangent.unwrap().entries, b.tangent.unwrap().entries);
}
