//! Model files (JSON) and result export: ASCII VTU for the solid, VTP
//! polylines for the beams, and plain-text / JSON run reports.

use crate::model::{Model, ModelError};
use crate::problem::{Evaluation, Problem, State};
use crate::solver::StepRecord;
use crate::verify::{max_curvature, max_s33, max_solid_displacement, mean_beam_displacement};
use nalgebra::Vector3;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Beam samples per element in the polyline output.
pub const BEAM_SAMPLES: usize = 5;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}: at {at}: {message}")]
    Parse { file: String, at: String, message: String },
    #[error("{file}: {source}")]
    Invalid { file: String, source: ModelError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Parses and validates a model from JSON text; `file` labels diagnostics.
pub fn parse_model(text: &str, file: &str) -> Result<Model, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let model: Model = serde_path_to_error::deserialize(de).map_err(|e| IoError::Parse {
        file: file.to_string(),
        at: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    model.validate().map_err(|source| IoError::Invalid { file: file.to_string(), source })?;
    Ok(model)
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_model(&text, &path.display().to_string())
}

/// Serialises a model to pretty JSON.
pub fn model_to_json(model: &Model) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("model serialisation cannot fail");
    s.push('\n');
    s
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(io_err(path))
}

/// 17 significant digits, fixed layout.
fn num(v: f64) -> String {
    if v == 0.0 {
        // normalise -0
        "0.0000000000000000e0".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn data_array(out: &mut String, name: &str, comps: usize, values: impl Iterator<Item = f64>) {
    let _ = writeln!(
        out,
        "        <DataArray type=\"Float64\" Name=\"{name}\" NumberOfComponents=\"{comps}\" format=\"ascii\">"
    );
    write_values(out, values, comps);
    out.push_str("        </DataArray>\n");
}

fn write_values(out: &mut String, values: impl Iterator<Item = f64>, per_line: usize) {
    let mut k = 0;
    for v in values {
        if k == 0 {
            out.push_str("          ");
        } else {
            out.push(' ');
        }
        out.push_str(&num(v));
        k += 1;
        if k == per_line {
            out.push('\n');
            k = 0;
        }
    }
    if k != 0 {
        out.push('\n');
    }
}

fn int_array(out: &mut String, name: &str, ty: &str, values: &[usize]) {
    let _ = writeln!(out, "        <DataArray type=\"{ty}\" Name=\"{name}\" format=\"ascii\">");
    for chunk in values.chunks(12) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "          {}", line.join(" "));
    }
    out.push_str("        </DataArray>\n");
}

/// Solid results as VTU text: reference points, `displacement` and nodal
/// second Piola-Kirchhoff `S33`. `None` without a solid.
pub fn solid_vtu(problem: &Problem, state: &State) -> Option<String> {
    let s = problem.model.solid.as_ref()?;
    let mesh = &s.mesh;
    let stress = problem.nodal_stress(state);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str(
        "<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\" header_type=\"UInt64\">\n",
    );
    out.push_str("  <UnstructuredGrid>\n");
    let _ =
        writeln!(out, "    <Piece NumberOfPoints=\"{}\" NumberOfCells=\"{}\">", mesh.nodes.len(), mesh.elements.len());
    out.push_str("      <Points>\n");
    data_array(&mut out, "Points", 3, mesh.nodes.iter().flat_map(|x| [x.x, x.y, x.z]));
    out.push_str("      </Points>\n");
    out.push_str("      <Cells>\n");
    let conn: Vec<usize> = mesh.elements.iter().flat_map(|e| e.nodes.iter().copied()).collect();
    let mut offsets = Vec::with_capacity(mesh.elements.len());
    let mut o = 0;
    for e in &mesh.elements {
        o += e.nodes.len();
        offsets.push(o);
    }
    let types: Vec<usize> = mesh.elements.iter().map(|e| e.kind.vtk_type() as usize).collect();
    int_array(&mut out, "connectivity", "Int64", &conn);
    int_array(&mut out, "offsets", "Int64", &offsets);
    int_array(&mut out, "types", "UInt8", &types);
    out.push_str("      </Cells>\n");
    out.push_str("      <PointData Vectors=\"displacement\" Scalars=\"S33\">\n");
    data_array(&mut out, "displacement", 3, state.displacement.iter().flat_map(|u| [u.x, u.y, u.z]));
    data_array(&mut out, "S33", 1, stress.iter().map(|m| m[(2, 2)]));
    out.push_str("      </PointData>\n");
    out.push_str("    </Piece>\n  </UnstructuredGrid>\n</VTKFile>\n");
    Some(out)
}

/// Beam results as VTP text: `BEAM_SAMPLES` points per element (element
/// polylines), sampled `displacement`, coupling line loads acting on the
/// beams (`coupling_force`, `coupling_moment`, i.e. the negative
/// multiplier fields) and the element `curvature` at the mid-point.
pub fn beams_vtp(problem: &Problem, state: &State, eval: Option<&Evaluation>) -> String {
    let mut pts: Vec<Vector3<f64>> = Vec::new();
    let mut disp = Vec::new();
    let mut force = Vec::new();
    let mut moment = Vec::new();
    let mut curv = Vec::new();
    let mut beam_id = Vec::new();
    let curvatures = problem.beam_curvatures(state);
    for (b, bd) in problem.beams.iter().enumerate() {
        let lam =
            eval.and_then(|ev| problem.couplings.iter().zip(&ev.couplings).find(|(c, _)| c.beam == b).map(|(_, e)| e));
        for (e, el) in bd.elements.iter().enumerate() {
            let cur = [&state.beams[b][el.nodes[0]], &state.beams[b][el.nodes[1]]];
            let refs = [&bd.reference[el.nodes[0]], &bd.reference[el.nodes[1]]];
            for i in 0..BEAM_SAMPLES {
                let xi = -1.0 + 2.0 * i as f64 / (BEAM_SAMPLES - 1) as f64;
                let x0 = el.position(xi, refs);
                pts.push(x0);
                disp.push(el.position(xi, cur) - x0);
                let phi = [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)];
                let (f, m) = match lam {
                    Some(ev) => (
                        -(phi[0] * ev.lambda_pos[el.nodes[0]] + phi[1] * ev.lambda_pos[el.nodes[1]]),
                        -(phi[0] * ev.lambda_rot[el.nodes[0]] + phi[1] * ev.lambda_rot[el.nodes[1]]),
                    ),
                    None => (Vector3::zeros(), Vector3::zeros()),
                };
                force.push(f);
                moment.push(m);
            }
            curv.push(curvatures[b][e]);
            beam_id.push(b);
        }
    }
    let n_lines = curv.len();
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\"?>\n");
    out.push_str("<VTKFile type=\"PolyData\" version=\"1.0\" byte_order=\"LittleEndian\" header_type=\"UInt64\">\n");
    out.push_str("  <PolyData>\n");
    let _ = writeln!(
        out,
        "    <Piece NumberOfPoints=\"{}\" NumberOfVerts=\"0\" NumberOfLines=\"{n_lines}\" NumberOfStrips=\"0\" NumberOfPolys=\"0\">",
        pts.len()
    );
    out.push_str("      <Points>\n");
    data_array(&mut out, "Points", 3, pts.iter().flat_map(|x| [x.x, x.y, x.z]));
    out.push_str("      </Points>\n");
    out.push_str("      <Lines>\n");
    let conn: Vec<usize> = (0..pts.len()).collect();
    let offsets: Vec<usize> = (1..=n_lines).map(|k| k * BEAM_SAMPLES).collect();
    int_array(&mut out, "connectivity", "Int64", &conn);
    int_array(&mut out, "offsets", "Int64", &offsets);
    out.push_str("      </Lines>\n");
    out.push_str("      <PointData Vectors=\"displacement\">\n");
    let v3 = |v: &Vec<Vector3<f64>>| v.iter().flat_map(|x| [x.x, x.y, x.z]).collect::<Vec<_>>();
    data_array(&mut out, "displacement", 3, v3(&disp).into_iter());
    data_array(&mut out, "coupling_force", 3, v3(&force).into_iter());
    data_array(&mut out, "coupling_moment", 3, v3(&moment).into_iter());
    out.push_str("      </PointData>\n");
    out.push_str("      <CellData Scalars=\"curvature\">\n");
    data_array(&mut out, "curvature", 1, curv.iter().copied());
    int_array(&mut out, "beam", "Int64", &beam_id);
    out.push_str("      </CellData>\n");
    out.push_str("    </Piece>\n  </PolyData>\n</VTKFile>\n");
    out
}

/// Writes `<stem>_solid.vtu` (if there is a solid) and `<stem>_beams.vtp`
/// into `dir`; returns the written paths.
pub fn export_vtu(
    problem: &Problem,
    state: &State,
    eval: Option<&Evaluation>,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<Vec<PathBuf>, IoError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if let Some(text) = solid_vtu(problem, state) {
        let p = dir.join(format!("{stem}_solid.vtu"));
        std::fs::write(&p, text).map_err(io_err(&p))?;
        written.push(p);
    }
    if !problem.beams.is_empty() {
        let p = dir.join(format!("{stem}_beams.vtp"));
        std::fs::write(&p, beams_vtp(problem, state, eval)).map_err(io_err(&p))?;
        written.push(p);
    }
    Ok(written)
}

/// Tip (last node) displacement of one beam.
#[derive(Clone, Debug, Serialize)]
pub struct BeamTip {
    pub beam: String,
    pub displacement: [f64; 3],
}

/// Summary of a converged run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub description: Option<String>,
    pub variant: String,
    pub rotational_coupling: bool,
    pub penalty_position: f64,
    pub penalty_rotation: f64,
    pub unknowns: usize,
    pub free_unknowns: usize,
    pub steps: Vec<StepRecord>,
    pub solid_energy: f64,
    pub beam_energy: f64,
    pub penalty_energy: f64,
    /// Solid + beam + penalty energy.
    pub internal_energy: f64,
    pub external_work: f64,
    pub beam_tips: Vec<BeamTip>,
    pub mean_beam_displacement: [f64; 3],
    pub max_solid_displacement: f64,
    pub max_s33: f64,
    pub max_beam_curvature: f64,
    pub max_positional_constraint: f64,
    pub max_rotational_constraint: f64,
    pub net_coupling_force: [f64; 3],
    pub net_coupling_moment: [f64; 3],
    pub momentum_scale: f64,
}

impl RunReport {
    pub fn new(problem: &Problem, state: &State, eval: &Evaluation, steps: Vec<StepRecord>) -> RunReport {
        let m = &problem.model;
        let audit = problem.momentum_audit(state, eval);
        let amax = |f: &dyn Fn(&crate::mortar::CouplingEval) -> &Vec<Vector3<f64>>| {
            eval.couplings.iter().flat_map(|c| f(c).iter()).map(|v| v.amax()).fold(0.0, f64::max)
        };
        RunReport {
            description: m.description.clone(),
            variant: m.coupling.variant.name().to_uppercase(),
            rotational_coupling: m.coupling.rotational,
            penalty_position: m.coupling.penalty_position,
            penalty_rotation: m.coupling.penalty_rotation,
            unknowns: problem.n_dofs,
            free_unknowns: problem.free_map().1,
            steps,
            solid_energy: eval.solid_energy,
            beam_energy: eval.beam_energy,
            penalty_energy: eval.penalty_energy,
            internal_energy: eval.internal_energy(),
            external_work: eval.external_work,
            beam_tips: problem
                .beams
                .iter()
                .enumerate()
                .map(|(b, bd)| {
                    let k = bd.reference.len() - 1;
                    BeamTip {
                        beam: bd.name.clone(),
                        displacement: (state.beams[b][k].position - bd.reference[k].position).into(),
                    }
                })
                .collect(),
            mean_beam_displacement: mean_beam_displacement(problem, state).into(),
            max_solid_displacement: max_solid_displacement(state),
            max_s33: max_s33(problem, state),
            max_beam_curvature: max_curvature(problem, state),
            max_positional_constraint: amax(&|c| &c.r_pos),
            max_rotational_constraint: amax(&|c| &c.r_rot),
            net_coupling_force: audit.force.into(),
            net_coupling_moment: audit.moment.into(),
            momentum_scale: audit.scale,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialisation cannot fail");
        s.push('\n');
        s
    }

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let v3 = |v: &[f64; 3]| format!("[{:.6e}, {:.6e}, {:.6e}]", v[0], v[1], v[2]);
        let mut s = String::new();
        if let Some(d) = &self.description {
            let _ = writeln!(s, "model: {d}");
        }
        let _ = writeln!(
            s,
            "coupling: {}{} (eps_r = {}, eps_theta = {})",
            self.variant,
            if self.rotational_coupling { " with rotational coupling" } else { ", positional only" },
            self.penalty_position,
            self.penalty_rotation
        );
        let _ = writeln!(s, "unknowns: {} ({} free)", self.unknowns, self.free_unknowns);
        for st in &self.steps {
            let trace: Vec<String> = st.residuals.iter().map(|r| format!("{r:.3e}")).collect();
            let _ = writeln!(
                s,
                "step {:>3} (load {:.4}): {} iterations, residuals {}",
                st.step,
                st.load_factor,
                st.iterations(),
                trace.join(" ")
            );
        }
        let _ = writeln!(s, "internal energy (incl. penalty): {:.6e}", self.internal_energy);
        let _ = writeln!(
            s,
            "  solid {:.6e}, beams {:.6e}, penalty {:.6e}",
            self.solid_energy, self.beam_energy, self.penalty_energy
        );
        let _ = writeln!(s, "external work: {:.6e}", self.external_work);
        for t in &self.beam_tips {
            let _ = writeln!(s, "beam '{}' tip displacement: {}", t.beam, v3(&t.displacement));
        }
        let _ = writeln!(s, "mean beam displacement: {}", v3(&self.mean_beam_displacement));
        let _ = writeln!(s, "max solid displacement: {:.6e}", self.max_solid_displacement);
        let _ = writeln!(s, "max |S33|: {:.6e}", self.max_s33);
        let _ = writeln!(s, "max beam curvature: {:.6e}", self.max_beam_curvature);
        let _ = writeln!(
            s,
            "constraint residuals (max abs): positional {:.6e}, rotational {:.6e}",
            self.max_positional_constraint, self.max_rotational_constraint
        );
        let _ = writeln!(
            s,
            "coupling momentum audit: force {}, moment {} (scale {:.3e})",
            v3(&self.net_coupling_force),
            v3(&self.net_coupling_moment),
            self.momentum_scale
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::minimal;
    use crate::model::Variant;

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-0.0), num(0.0));
        assert_eq!(num(1.0).parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn parse_reports_json_path() {
        let mut v: serde_json::Value = serde_json::from_str(&model_to_json(&minimal(Variant::Cons))).unwrap();
        v["beams"][0]["section"]["radius"] = serde_json::Value::String("thick".into());
        let e = parse_model(&v.to_string(), "m.json").unwrap_err().to_string();
        assert!(e.contains("beams[0].section.radius"), "{e}");
    }
}
