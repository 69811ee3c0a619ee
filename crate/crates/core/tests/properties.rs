//! Property-based checks of the kinematic building blocks, the element
//! kernels and the coupling invariants.

use beamtie::autodiff::{Dual2, Scalar, V3};
use beamtie::beam_fem::{BeamElement, BeamNodeState, CrossSection};
use beamtie::generators::structured_mesh;
use beamtie::model::Variant;
use beamtie::problem::Problem;
use beamtie::shapes::ElementKind;
use beamtie::so3::{exp_map, orthonormality_defect, relative_rotation, rotation_vector, smallest_rotation_from_e1};
use beamtie::solid_fem::{element_geometry, element_response, Material};
use beamtie::surface::{facet_geometry, Surface, SurfaceFrame};
use beamtie::verify::{normal_continuity, random_coupled_model, random_state};
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn rotation(max_angle: f64) -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), 0.0..max_angle)
        .prop_filter_map("axis", move |(a, t)| (a.norm() > 1e-3).then(|| exp_map(&(a.normalize() * t))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exp_matches_quaternion_rotation(psi in vec3(6.0)) {
        let q = UnitQuaternion::from_scaled_axis(psi).to_rotation_matrix().into_inner();
        prop_assert!((exp_map(&psi) - q).amax() < 1e-13);
    }

    #[test]
    fn exp_of_rotation_vector_is_identity(r in rotation(std::f64::consts::PI - 1e-6)) {
        let psi = rotation_vector(&r).unwrap();
        prop_assert!((exp_map(&psi) - r).amax() < 1e-10);
        prop_assert!(psi.norm() <= std::f64::consts::PI);
    }

    #[test]
    fn rotation_preserves_length(psi in vec3(20.0), v in vec3(10.0)) {
        prop_assert!(((exp_map(&psi) * v).norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn relative_rotation_reverses(l1 in rotation(3.0), l2 in rotation(3.0)) {
        if let (Ok(a), Ok(b)) = (relative_rotation(&l1, &l2), relative_rotation(&l2, &l1)) {
            prop_assert!((exp_map(&b) - exp_map(&a).transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn small_angle_branch_is_continuous(dir in vec3(1.0), t in 1e-9f64..1e-5) {
        prop_assume!(dir.norm() > 1e-2);
        let psi = dir.normalize() * t;
        let q = UnitQuaternion::from_scaled_axis(psi).to_rotation_matrix().into_inner();
        prop_assert!((exp_map(&psi) - q).amax() < 1e-15);
    }
}

/// Composite test function exercising every elementary operation.
fn composite<T: Scalar>(x: &[T]) -> T {
    let a = V3::new(x[0].clone(), x[1].clone(), x[2].clone());
    let b = V3::new(x[3].clone(), x[4].clone(), x[5].clone());
    let n = a.cross(&b).normalize();
    let s = (a.norm_sq() + 1.0).sqrt();
    n.dot(&b) * s / (x[0].clone() * x[0].clone() + 2.0) + x[1].sin() * x[2].cos() + x[4].atan2(&(x[5].clone() + 3.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_derivatives_match_finite_differences(x in prop::array::uniform6(-1.5f64..1.5)) {
        let a = Vector3::new(x[0], x[1], x[2]);
        let b = Vector3::new(x[3], x[4], x[5]);
        prop_assume!(a.cross(&b).norm() > 0.1);
        let d = composite(&Dual2::seed(&x));
        let f = |y: &[f64]| composite(y);
        let h = 1e-5;
        let g = d.grad(6);
        let hs = d.hess(6);
        for i in 0..6 {
            let (mut p, mut m) = (x, x);
            p[i] += h;
            m[i] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-6 * g.amax().max(1.0), "grad {i}: {} vs {fd}", g[i]);
            let dp = composite(&Dual2::seed(&p)).grad(6);
            let dm = composite(&Dual2::seed(&m)).grad(6);
            for j in 0..6 {
                let fd2 = (dp[j] - dm[j]) / (2.0 * h);
                prop_assert!((hs[(i, j)] - fd2).abs() <= 1e-4 * hs.amax().max(1.0));
            }
        }
    }
}

fn kind_strategy() -> impl Strategy<Value = ElementKind> {
    prop::sample::select(ElementKind::ALL.to_vec())
}

fn material_strategy() -> impl Strategy<Value = Material> {
    (0.5f64..3.0, 0.0f64..0.45, any::<bool>()).prop_map(|(e, nu, nh)| {
        if nh {
            Material::NeoHookean { youngs_modulus: e, poisson_ratio: nu }
        } else {
            Material::SaintVenantKirchhoff { youngs_modulus: e, poisson_ratio: nu }
        }
    })
}

fn one_element(kind: ElementKind) -> Vec<Vector3<f64>> {
    let sm = structured_mesh(kind, [1, 1, 1], |u| Vector3::new(u[0] + 0.1 * u[1], u[1], 0.8 * u[2] + 0.05 * u[0]));
    let e = &sm.mesh.elements[0];
    e.nodes.iter().map(|&n| sm.mesh.nodes[n]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solid_force_is_energy_gradient(kind in kind_strategy(), mat in material_strategy(), seed in any::<u64>()) {
        let x = one_element(kind);
        let geom = element_geometry(kind, &x, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rnd = |rng: &mut ChaCha8Rng, s: f64| Vector3::new(
            rand::Rng::gen_range(rng, -s..s), rand::Rng::gen_range(rng, -s..s), rand::Rng::gen_range(rng, -s..s));
        let u: Vec<Vector3<f64>> = (0..x.len()).map(|_| rnd(&mut rng, 0.05)).collect();
        let du: Vec<Vector3<f64>> = (0..x.len()).map(|_| rnd(&mut rng, 1.0)).collect();
        let r = element_response(&geom, &mat, &u, false, 0).unwrap();
        let h = 1e-6;
        let shifted = |s: f64| {
            let v: Vec<Vector3<f64>> = u.iter().zip(&du).map(|(a, b)| a + s * b).collect();
            element_response(&geom, &mat, &v, false, 0).unwrap().energy
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let dot: f64 = du.iter().enumerate().map(|(a, d)| d.dot(&Vector3::new(r.force[3 * a], r.force[3 * a + 1], r.force[3 * a + 2]))).sum();
        prop_assert!((dot - fd).abs() <= 1e-6 * dot.abs().max(1e-8), "{dot} vs {fd}");
    }

    #[test]
    fn rigid_motion_gives_zero_solid_force(kind in kind_strategy(), mat in material_strategy(), q in rotation(3.0), c in vec3(2.0)) {
        let x = one_element(kind);
        let geom = element_geometry(kind, &x, 0).unwrap();
        let u: Vec<Vector3<f64>> = x.iter().map(|p| q * p + c - p).collect();
        let r = element_response(&geom, &mat, &u, false, 0).unwrap();
        prop_assert!(r.force.amax() < 1e-12, "{}", r.force.amax());
        prop_assert!(r.energy.abs() < 1e-12);
    }

    #[test]
    fn solid_tangent_is_symmetric(kind in kind_strategy(), mat in material_strategy(), seed in any::<u64>()) {
        let x = one_element(kind);
        let geom = element_geometry(kind, &x, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<Vector3<f64>> = (0..x.len())
            .map(|_| Vector3::from_fn(|_, _| rand::Rng::gen_range(&mut rng, -0.05..0.05)))
            .collect();
        let k = element_response(&geom, &mat, &u, true, 0).unwrap().tangent.unwrap();
        prop_assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
    }
}

fn section() -> CrossSection {
    CrossSection { radius: 0.1, youngs_modulus: 10.0, poisson_ratio: 0.3 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beam_energy_is_objective(
        d in vec3(0.3), t1 in vec3(0.3), t2 in vec3(0.3), w1 in vec3(0.4), w2 in vec3(0.4),
        q in rotation(3.0), c in vec3(3.0),
    ) {
        let t0 = Vector3::new(1.0, 0.2, 0.0).normalize();
        let ref0 = BeamNodeState { position: Vector3::zeros(), tangent: t0, triad: smallest_rotation_from_e1(&t0) };
        let ref1 = BeamNodeState { position: Vector3::new(1.0, 0.3, 0.1), tangent: t0, triad: smallest_rotation_from_e1(&t0) };
        let el = BeamElement::new(0, [0, 1], [&ref0, &ref1], section()).unwrap();
        let s0 = BeamNodeState { position: ref0.position, tangent: ref0.tangent + t1, triad: exp_map(&w1) * ref0.triad };
        let s1 = BeamNodeState { position: ref1.position + d, tangent: ref1.tangent + t2, triad: exp_map(&w2) * ref1.triad };
        let moved = |s: &BeamNodeState| BeamNodeState { position: q * s.position + c, tangent: q * s.tangent, triad: q * s.triad };
        let e = el.energy([&s0, &s1]).unwrap();
        let em = el.energy([&moved(&s0), &moved(&s1)]).unwrap();
        prop_assert!((e - em).abs() <= 1e-12 * e.abs().max(1e-12), "{e} vs {em}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surface_triad_ignores_normal_part_of_deformation(
        xa in vec3(0.3), xb in vec3(0.3), fp in prop::array::uniform9(-0.3f64..0.3), a in vec3(2.0), tilt in -0.5f64..0.5,
    ) {
        let xa = xa + Vector3::x();
        let xb = xb + Vector3::y();
        let n0 = xa.cross(&xb).normalize();
        let g1 = (xa + 0.4 * xb + tilt * n0).normalize();
        let Ok(frame) = SurfaceFrame::new(&xa, &xb, &smallest_rotation_from_e1(&g1)) else { return Ok(()) };
        let f = Matrix3::identity() + Matrix3::from_row_slice(&fp);
        prop_assume!(f.determinant() > 0.2);
        let triad = |f: &Matrix3<f64>| frame.triad(&(f * xa), &(f * xb));
        let l = triad(&f);
        let l2 = triad(&(f + a * n0.transpose()));
        prop_assert!((l - l2).amax() < 1e-12);
        prop_assert!(orthonormality_defect(&l) < 1e-12);
        prop_assert!((l.determinant() - 1.0).abs() < 1e-12);
        let dn = frame.triad_from_deformation(&(f + a * n0.transpose()), &(f * xa).cross(&(f * xb)));
        prop_assert!((dn - l).amax() < 1e-12);
    }

    #[test]
    fn surface_triad_is_objective(xa in vec3(0.3), xb in vec3(0.3), q in rotation(3.0)) {
        let xa = xa + Vector3::x();
        let xb = xb + Vector3::y();
        let g1 = (xa - 0.3 * xb).normalize();
        let Ok(frame) = SurfaceFrame::new(&xa, &xb, &smallest_rotation_from_e1(&g1)) else { return Ok(()) };
        prop_assert!((frame.triad(&(q * xa), &(q * xb)) - q * frame.triad(&xa, &xb)).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn averaged_normals_are_continuous(kind in kind_strategy(), seed in any::<u64>()) {
        prop_assert!(normal_continuity(kind, seed) < 1e-13);
    }

    #[test]
    fn projection_gap_is_a_distance_lower_bound(seed in any::<u64>(), hex in any::<bool>()) {
        let kind = if hex { ElementKind::Hex8 } else { ElementKind::Tet4 };
        let sm = structured_mesh(kind, [2, 2, 1], |u| Vector3::new(u[0], u[1], u[2] * (0.4 + 0.1 * u[0] * u[1])));
        let faces = sm.faces_where(|u| u[2] == 1.0);
        let s = Surface::extract(&sm.mesh, &faces).unwrap();
        let x = &sm.mesh.nodes;
        let normals = s.averaged_normals(x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Vector3::new(
            rand::Rng::gen_range(&mut rng, 0.2..0.8),
            rand::Rng::gen_range(&mut rng, 0.2..0.8),
            0.45 + rand::Rng::gen_range(&mut rng, 0.0..0.2),
        );
        let pr = s.project(&p, None, 10.0, x, &normals).unwrap().expect("point above the surface");
        prop_assert!(((pr.point + pr.gap * pr.normal) - p).norm() < 1e-12);
        for _ in 0..200 {
            let f = rand::Rng::gen_range(&mut rng, 0..s.facets.len());
            let kind = s.facets[f].kind;
            let (a, b): (f64, f64) = (rand::Rng::gen_range(&mut rng, 0.0..1.0), rand::Rng::gen_range(&mut rng, 0.0..1.0));
            let q = if kind.is_quad() { [2.0 * a - 1.0, 2.0 * b - 1.0] } else if a + b <= 1.0 { [a, b] } else { [1.0 - a, 1.0 - b] };
            let y = facet_geometry(kind, &s.facet_coords(f, x), &q).x;
            // The normal field is smooth on this gently curved surface, so
            // the gap is within a tight margin of the true distance.
            prop_assert!(pr.gap.abs() <= (y - p).norm() * (1.0 + 1e-3) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coupling_forces_balance_for_all_variants(seed in any::<u64>(), hex in any::<bool>(), gap in 0.0f64..0.1, v in 0usize..3) {
        let kind = if hex { ElementKind::Hex8 } else { ElementKind::Tet4 };
        let variant = Variant::ALL[v];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Problem::new(random_coupled_model(&mut rng, kind, variant, gap)).unwrap();
        let state = random_state(&p, &mut rng, 0.3, 0.02, 0.05);
        let ev = p.evaluate(&state, 0.0, false).unwrap();
        let a = p.momentum_audit(&state, &ev);
        prop_assert!(a.force.norm() <= 1e-12 * a.scale.max(1e-300));
        if variant == Variant::Cons {
            prop_assert!(a.moment.norm() <= 1e-11 * a.scale.max(1e-300));
        }
    }
}
