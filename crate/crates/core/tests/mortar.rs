//! Segmentation, integration and variant behaviour of the beam-to-surface
//! coupling.

use beamtie::generators::{minimal, patch_test, PATCH_DIVISIONS};
use beamtie::model::{Model, Variant};
use beamtie::problem::Problem;
use beamtie::shapes::ElementKind;
use beamtie::surface::DOMAIN_TOL;
use beamtie::verify::random_state;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planar(variant: Variant) -> Problem {
    Problem::new(patch_test(ElementKind::Hex8, false, variant, PATCH_DIVISIONS)).unwrap()
}

/// The minimal model with its beam lying directly on the flat top face.
fn flat_contact(variant: Variant) -> Model {
    let mut m = minimal(variant);
    for n in &mut m.beams[0].nodes {
        n.position.z = 1.0;
    }
    m
}

#[test]
fn segments_end_on_facet_boundaries() {
    let p = planar(Variant::Cons);
    let cells = PATCH_DIVISIONS[0] as f64;
    for (b, c) in p.couplings.iter().enumerate() {
        let beam = &p.beams[c.beam];
        let mut interior = 0;
        for w in c.segments.windows(2) {
            if w[0].element != w[1].element {
                continue;
            }
            assert_ne!(w[0].facet, w[1].facet, "beam {b}: adjacent segments on one facet");
            assert!((w[0].xi[1] - w[1].xi[0]).abs() < 1e-12);
            let el = &beam.elements[w[0].element];
            let s = [&beam.reference[el.nodes[0]], &beam.reference[el.nodes[1]]];
            let x = el.position(w[0].xi[1], s);
            // Facet edges lie on the lines x, y = -1/2 + k / cells; facets
            // accept points within DOMAIN_TOL of their parameter domain.
            let off = |v: f64| {
                let t = (v + 0.5) * cells;
                (t - t.round()).abs() / cells
            };
            assert!(off(x.x).min(off(x.y)) < DOMAIN_TOL / cells, "split at {x:?} is not on an edge");
            interior += 1;
        }
        assert!(interior > 0, "beam {b} never crosses a facet edge");
    }
}

#[test]
fn nodal_weights_sum_to_coupled_length() {
    let p = planar(Variant::Cons);
    let length = (0.78f64.powi(2) + 0.62f64.powi(2)).sqrt();
    for c in &p.couplings {
        let total: f64 = c.kappa.iter().sum();
        assert!((total - c.coupled_length()).abs() < 1e-13);
        assert!((c.coupled_length() - length).abs() < 1e-10, "{}", c.coupled_length());
        assert!(c.active.iter().all(|&a| a));
    }
}

#[test]
fn disp_constraints_vanish_in_reference_configuration() {
    for curved in [false, true] {
        let p = Problem::new(patch_test(ElementKind::Hex8, curved, Variant::Disp, PATCH_DIVISIONS)).unwrap();
        let ev = p.evaluate(&p.reference_state(), 0.0, false).unwrap();
        let r = ev.residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(r < 1e-14, "residual {r}");
        assert!(ev.penalty_energy < 1e-28);
    }
}

#[test]
fn ref_penalises_the_initial_gap() {
    let p = planar(Variant::Ref);
    let ev = p.evaluate(&p.reference_state(), 0.0, false).unwrap();
    for c in &ev.couplings {
        for r in c.r_pos.iter().zip(&p.couplings[0].kappa) {
            if *r.1 > 0.0 {
                assert!(r.0.norm() > 0.0);
            }
        }
    }
    assert!(ev.penalty_energy > 0.0);
}

#[test]
fn variants_agree_without_a_gap_on_a_flat_surface() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let problems: Vec<Problem> = Variant::ALL.iter().map(|&v| Problem::new(flat_contact(v)).unwrap()).collect();
    for _ in 0..5 {
        let state = random_state(&problems[0], &mut rng, 0.4, 0.02, 0.05);
        let evs: Vec<_> = problems.iter().map(|p| p.evaluate(&state, 0.0, false).unwrap()).collect();
        let scale = evs[0].residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for ev in &evs[1..] {
            assert!((ev.penalty_energy - evs[0].penalty_energy).abs() <= 1e-12 * evs[0].penalty_energy.max(1e-300));
            for (a, b) in ev.residual.iter().zip(&evs[0].residual) {
                assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn doubling_gauss_points_leaves_integrals_unchanged() {
    let base = patch_test(ElementKind::Hex8, false, Variant::Disp, PATCH_DIVISIONS);
    let mut fine = base.clone();
    fine.coupling.gauss_points = 12;
    let (p6, p12) = (Problem::new(base).unwrap(), Problem::new(fine).unwrap());
    for (a, b) in p6.couplings.iter().zip(&p12.couplings) {
        assert!((a.coupled_length() - b.coupled_length()).abs() < 1e-13);
        for (x, y) in a.kappa.iter().zip(&b.kappa) {
            assert!((x - y).abs() < 1e-13);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let state = random_state(&p6, &mut rng, 0.2, 0.01, 0.02);
    let (e6, e12) = (p6.evaluate(&state, 0.0, false).unwrap(), p12.evaluate(&state, 0.0, false).unwrap());
    assert!((e6.penalty_energy - e12.penalty_energy).abs() <= 1e-11 * e6.penalty_energy);
    let scale = e6.residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (a, b) in e6.residual.iter().zip(&e12.residual) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn beam_outside_the_surface_is_uncoupled() {
    let mut m = minimal(Variant::Cons);
    for n in &mut m.beams[0].nodes {
        n.position.x += 5.0;
    }
    let p = Problem::new(m).unwrap();
    assert!(p.couplings[0].segments.is_empty());
    assert!(p.couplings[0].active.iter().all(|&a| !a));
    let ev = p.evaluate(&p.reference_state(), 0.0, false).unwrap();
    assert_eq!(ev.penalty_energy, 0.0);
}
