//! Model files, generators and result export.

use beamtie::generators::{builtin_examples, minimal, patch_test, PATCH_DIVISIONS};
use beamtie::model::Variant;
use beamtie::model_io::{
    beams_vtp, load_model, model_to_json, parse_model, save_model, solid_vtu, IoError, BEAM_SAMPLES,
};
use beamtie::problem::Problem;
use beamtie::shapes::ElementKind;
use beamtie::solver::solve;
use beamtie::verify::max_s33;

fn scratch_dir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("beamtie-io-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn minimal_model_has_expected_size() {
    let m = minimal(Variant::Cons);
    let s = m.solid.as_ref().unwrap();
    assert_eq!(s.mesh.nodes.len(), 8);
    assert_eq!(s.mesh.elements.len(), 1);
    assert_eq!(m.beams.len(), 1);
    assert_eq!(m.beams[0].nodes.len(), 2);
    m.validate().unwrap();
}

#[test]
fn patch_generator_layout() {
    let m = patch_test(ElementKind::Hex8, false, Variant::Cons, PATCH_DIVISIONS);
    let s = m.solid.as_ref().unwrap();
    let n: usize = PATCH_DIVISIONS.iter().map(|d| d + 1).product();
    assert_eq!(s.mesh.nodes.len(), n);
    let elements: Vec<usize> = m.beams.iter().map(|b| b.elements.len()).collect();
    assert_eq!(elements, vec![5, 7]);
    assert_eq!(m.beams[0].line_load.z, 0.025);
    assert_eq!(m.beams[1].line_load.z, -0.025);
    assert!(m.beams.iter().all(|b| b.coupled_to.as_deref() == Some("top")));
    assert_eq!(s.resolve_faces("top").unwrap().len(), PATCH_DIVISIONS[0] * PATCH_DIVISIONS[1]);
}

#[test]
fn unknown_face_set_is_named_in_the_error() {
    let mut m = minimal(Variant::Cons);
    m.beams[0].coupled_to = Some("lid".into());
    let text = model_to_json(&m);
    let err = parse_model(&text, "broken.json").unwrap_err();
    assert!(matches!(err, IoError::Invalid { .. }));
    let msg = err.to_string();
    assert!(msg.contains("lid") && msg.contains("broken.json"), "{msg}");
}

#[test]
fn malformed_json_reports_the_location() {
    let text = model_to_json(&minimal(Variant::Cons)).replace("\"penalty_position\"", "\"penalty_positon\"");
    let err = parse_model(&text, "typo.json").unwrap_err();
    assert!(matches!(err, IoError::Parse { .. }));
    assert!(err.to_string().contains("penalty_positon"), "{err}");
}

#[test]
fn models_round_trip_through_files() {
    let dir = scratch_dir("roundtrip");
    for (name, m) in builtin_examples() {
        let path = dir.join(format!("{name}.json"));
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m, "{name}");
        assert_eq!(model_to_json(&back), std::fs::read_to_string(&path).unwrap());
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_model("/nonexistent/model.json"), Err(IoError::Io { .. })));
}

#[test]
fn reference_state_exports_zero_fields() {
    let p = Problem::new(minimal(Variant::Cons)).unwrap();
    let state = p.reference_state();
    let vtu = solid_vtu(&p, &state).unwrap();
    assert!(vtu.contains("NumberOfPoints=\"8\" NumberOfCells=\"1\""));
    let block = vtu.split("Name=\"displacement\"").nth(1).unwrap();
    let values = block.split('>').nth(1).unwrap().split('<').next().unwrap();
    let nums: Vec<f64> = values.split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(nums.len(), 24);
    assert!(nums.iter().all(|&v| v == 0.0));
}

#[test]
fn beam_polylines_have_fixed_sampling() {
    let m = patch_test(ElementKind::Hex8, false, Variant::Cons, PATCH_DIVISIONS);
    let p = Problem::new(m).unwrap();
    let vtp = beams_vtp(&p, &p.reference_state(), None);
    let cells: usize = p.beams.iter().map(|b| b.elements.len()).sum();
    assert!(vtp.contains(&format!("NumberOfPoints=\"{}\"", cells * BEAM_SAMPLES)));
    assert!(vtp.contains(&format!("NumberOfLines=\"{cells}\"")));
    assert!(vtp.contains("Name=\"coupling_force\"") && vtp.contains("Name=\"curvature\""));
}

#[test]
fn patch_test_stress_vanishes_and_export_is_deterministic() {
    let p = Problem::new(patch_test(ElementKind::Hex8, false, Variant::Cons, PATCH_DIVISIONS)).unwrap();
    let s = solve(&p).unwrap();
    assert!(max_s33(&p, &s.state) <= 1e-10);
    let a = (solid_vtu(&p, &s.state).unwrap(), beams_vtp(&p, &s.state, Some(&s.evaluation)));
    let s2 = solve(&p).unwrap();
    let b = (solid_vtu(&p, &s2.state).unwrap(), beams_vtp(&p, &s2.state, Some(&s2.evaluation)));
    assert_eq!(a, b);
}
