//! Model description: solid mesh and material, beams, loads, supports, and
//! coupling/solver settings. The same types define the JSON model format.

use crate::beam_fem::CrossSection;
use crate::mesh::{FaceRef, SolidMesh};
use crate::solid_fem::Material;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Constraint formulation of the positional coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Consistent: preserves the reference gap along the current normal.
    Cons,
    /// Forces beam centreline onto the surface (ignores the reference gap).
    Ref,
    /// Ties beam and surface displacements.
    Disp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cons, Variant::Ref, Variant::Disp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cons => "cons",
            Variant::Ref => "ref",
            Variant::Disp => "disp",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cons" => Ok(Variant::Cons),
            "ref" => Ok(Variant::Ref),
            "disp" => Ok(Variant::Disp),
            other => Err(format!("unknown coupling variant '{other}' (expected cons, ref or disp)")),
        }
    }
}

/// Selects a set of boundary faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaceSelector {
    /// Explicit element faces.
    Faces { faces: Vec<FaceRef> },
    /// All boundary faces whose nodes lie inside an axis-aligned box.
    Box { min: Vector3<f64>, max: Vector3<f64> },
}

/// Selects a set of solid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeSelector {
    Nodes { nodes: Vec<usize> },
    Box { min: Vector3<f64>, max: Vector3<f64> },
}

/// Homogeneous Dirichlet condition on solid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidSupport {
    pub node_set: String,
    /// Fixed displacement components (0, 1, 2).
    pub components: Vec<usize>,
}

/// Dead traction per unit reference area on a face set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceLoad {
    pub face_set: String,
    pub traction: Vector3<f64>,
}

/// The solid body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidModel {
    pub mesh: SolidMesh,
    pub material: Material,
    #[serde(default)]
    pub face_sets: BTreeMap<String, FaceSelector>,
    #[serde(default)]
    pub node_sets: BTreeMap<String, NodeSelector>,
    #[serde(default)]
    pub supports: Vec<SolidSupport>,
    #[serde(default)]
    pub loads: Vec<SurfaceLoad>,
}

/// Reference data of one beam node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamNodeInput {
    pub position: Vector3<f64>,
    /// Unit centreline tangent.
    pub tangent: Vector3<f64>,
    /// Reference triad as a rotation vector; defaults to the smallest
    /// rotation taking `e1` onto the tangent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vector3<f64>>,
}

/// Nodal unknown groups of a beam node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamDofGroup {
    Position,
    Tangent,
    Rotation,
}

/// Homogeneous Dirichlet condition on a beam node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSupport {
    pub node: usize,
    pub fix: Vec<BeamDofGroup>,
}

/// Concentrated dead force on a beam node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoad {
    pub node: usize,
    pub force: Vector3<f64>,
}

/// One beam (a chain of two-node elements).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamModel {
    pub name: String,
    pub nodes: Vec<BeamNodeInput>,
    pub elements: Vec<[usize; 2]>,
    pub section: CrossSection,
    /// Dead distributed load per unit reference length.
    #[serde(default = "zero3")]
    pub line_load: Vector3<f64>,
    #[serde(default)]
    pub point_loads: Vec<PointLoad>,
    #[serde(default)]
    pub supports: Vec<BeamSupport>,
    /// Face set of the solid this beam is coupled to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupled_to: Option<String>,
}

fn zero3() -> Vector3<f64> {
    Vector3::zeros()
}

/// Coupling settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub variant: Variant,
    /// Couple rotations in addition to positions.
    #[serde(default = "yes")]
    pub rotational: bool,
    pub penalty_position: f64,
    #[serde(default)]
    pub penalty_rotation: f64,
    /// Gauss points per integration segment.
    #[serde(default = "six")]
    pub gauss_points: usize,
    /// Maximum |gap| for a valid projection; defaults to three times the
    /// largest facet diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_radius: Option<f64>,
}

fn yes() -> bool {
    true
}
fn six() -> usize {
    6
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            variant: Variant::Cons,
            rotational: true,
            penalty_position: 100.0,
            penalty_rotation: 1.0,
            gauss_points: 6,
            search_radius: None,
        }
    }
}

/// Nonlinear solution settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "ten")]
    pub load_steps: usize,
    #[serde(default = "rel_tol")]
    pub tolerance: f64,
    #[serde(default = "abs_tol")]
    pub absolute_tolerance: f64,
    #[serde(default = "max_iter")]
    pub max_iterations: usize,
    /// Multiplies all external loads.
    #[serde(default = "one")]
    pub load_scale: f64,
}

fn ten() -> usize {
    10
}
fn rel_tol() -> f64 {
    1e-9
}
fn abs_tol() -> f64 {
    1e-12
}
fn max_iter() -> usize {
    25
}
fn one() -> f64 {
    1.0
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { load_steps: 10, tolerance: 1e-9, absolute_tolerance: 1e-12, max_iterations: 25, load_scale: 1.0 }
    }
}

/// Complete model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<SolidModel>,
    #[serde(default)]
    pub beams: Vec<BeamModel>,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub solve: SolveConfig,
}

impl SolidModel {
    /// Resolves a face set to concrete faces (box selectors pick boundary
    /// faces whose nodes all lie inside the box).
    pub fn resolve_faces(&self, name: &str) -> Option<Vec<FaceRef>> {
        match self.face_sets.get(name)? {
            FaceSelector::Faces { faces } => Some(faces.clone()),
            FaceSelector::Box { min, max } => {
                let inside = |p: &Vector3<f64>| (0..3).all(|k| p[k] >= min[k] - 1e-12 && p[k] <= max[k] + 1e-12);
                Some(
                    self.mesh
                        .boundary_faces()
                        .into_iter()
                        .filter(|&f| self.mesh.face_nodes(f).iter().all(|&n| inside(&self.mesh.nodes[n])))
                        .collect(),
                )
            }
        }
    }

    /// Resolves a node set to node ids.
    pub fn resolve_nodes(&self, name: &str) -> Option<Vec<usize>> {
        match self.node_sets.get(name)? {
            NodeSelector::Nodes { nodes } => Some(nodes.clone()),
            NodeSelector::Box { min, max } => Some(
                self.mesh
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| (0..3).all(|k| p[k] >= min[k] - 1e-12 && p[k] <= max[k] + 1e-12))
                    .map(|(i, _)| i)
                    .collect(),
            ),
        }
    }
}

/// Validation failure, located by a JSON-style path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ModelError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError { path: path.into(), message: message.into() })
}

fn finite3(v: &Vector3<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl Model {
    /// Checks ids, set references, parameter ranges and reference data.
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(solid) = &self.solid {
            solid.validate()?;
        }
        let mut names = std::collections::BTreeSet::new();
        for (b, beam) in self.beams.iter().enumerate() {
            let p = format!("beams[{b}]");
            if !names.insert(beam.name.as_str()) {
                return err(format!("{p}.name"), format!("duplicate beam name '{}'", beam.name));
            }
            beam.validate(&p)?;
            if let Some(fs) = &beam.coupled_to {
                match &self.solid {
                    None => return err(format!("{p}.coupled_to"), "coupling requires a solid"),
                    Some(s) if !s.face_sets.contains_key(fs) => {
                        return err(format!("{p}.coupled_to"), format!("unknown face set '{fs}'"))
                    }
                    _ => {}
                }
            }
        }
        let c = &self.coupling;
        if !(c.penalty_position.is_finite() && c.penalty_position > 0.0) {
            return err("coupling.penalty_position", "must be positive");
        }
        if !(c.penalty_rotation.is_finite() && c.penalty_rotation >= 0.0) {
            return err("coupling.penalty_rotation", "must be non-negative");
        }
        if !(1..=20).contains(&c.gauss_points) {
            return err("coupling.gauss_points", "must be between 1 and 20");
        }
        if let Some(r) = c.search_radius {
            if !(r.is_finite() && r > 0.0) {
                return err("coupling.search_radius", "must be positive");
            }
        }
        let s = &self.solve;
        if s.load_steps == 0 {
            return err("solve.load_steps", "must be at least 1");
        }
        if !(s.tolerance > 0.0 && s.absolute_tolerance > 0.0) {
            return err("solve.tolerance", "tolerances must be positive");
        }
        if s.max_iterations == 0 {
            return err("solve.max_iterations", "must be at least 1");
        }
        if !s.load_scale.is_finite() {
            return err("solve.load_scale", "must be finite");
        }
        Ok(())
    }
}

impl SolidModel {
    fn validate(&self) -> Result<(), ModelError> {
        let nn = self.mesh.nodes.len();
        for (i, x) in self.mesh.nodes.iter().enumerate() {
            if !finite3(x) {
                return err(format!("solid.mesh.nodes[{i}]"), "non-finite coordinate");
            }
        }
        for (e, el) in self.mesh.elements.iter().enumerate() {
            let p = format!("solid.mesh.elements[{e}]");
            if el.nodes.len() != el.kind.num_nodes() {
                return err(
                    format!("{p}.nodes"),
                    format!("{} expects {} nodes, got {}", el.kind.name(), el.kind.num_nodes(), el.nodes.len()),
                );
            }
            if let Some(k) = el.nodes.iter().position(|&n| n >= nn) {
                return err(format!("{p}.nodes[{k}]"), format!("node {} out of range ({nn} nodes)", el.nodes[k]));
            }
        }
        self.material.validate().map_err(|e| ModelError { path: "solid.material".into(), message: e.to_string() })?;
        for (name, sel) in &self.face_sets {
            if let FaceSelector::Faces { faces } = sel {
                for (i, f) in faces.iter().enumerate() {
                    let p = format!("solid.face_sets.{name}.faces[{i}]");
                    let Some(el) = self.mesh.elements.get(f.element) else {
                        return err(p, format!("element {} does not exist", f.element));
                    };
                    if f.face >= el.kind.faces().len() {
                        return err(p, format!("{} has no face {}", el.kind.name(), f.face));
                    }
                }
            }
        }
        for (name, sel) in &self.node_sets {
            if let NodeSelector::Nodes { nodes } = sel {
                if let Some(i) = nodes.iter().position(|&n| n >= nn) {
                    return err(
                        format!("solid.node_sets.{name}.nodes[{i}]"),
                        format!("node {} out of range", nodes[i]),
                    );
                }
            }
        }
        for (i, s) in self.supports.iter().enumerate() {
            if !self.node_sets.contains_key(&s.node_set) {
                return err(format!("solid.supports[{i}].node_set"), format!("unknown node set '{}'", s.node_set));
            }
            if s.components.iter().any(|&c| c > 2) {
                return err(format!("solid.supports[{i}].components"), "components must be 0, 1 or 2");
            }
        }
        for (i, l) in self.loads.iter().enumerate() {
            if !self.face_sets.contains_key(&l.face_set) {
                return err(format!("solid.loads[{i}].face_set"), format!("unknown face set '{}'", l.face_set));
            }
            if !finite3(&l.traction) {
                return err(format!("solid.loads[{i}].traction"), "non-finite traction");
            }
        }
        Ok(())
    }
}

impl BeamModel {
    fn validate(&self, p: &str) -> Result<(), ModelError> {
        let nn = self.nodes.len();
        if self.elements.is_empty() {
            return err(format!("{p}.elements"), "a beam needs at least one element");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !finite3(&n.position) || !finite3(&n.tangent) || n.tangent.norm() < 1e-14 {
                return err(format!("{p}.nodes[{i}]"), "position and non-zero tangent required");
            }
            if let Some(rv) = &n.rotation {
                let g1 = crate::so3::exp_map(rv).column(0).into_owned();
                if (g1 - n.tangent.normalize()).norm() > 1e-8 {
                    return err(format!("{p}.nodes[{i}].rotation"), "first base vector must align with the tangent");
                }
            }
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el[0] >= nn || el[1] >= nn || el[0] == el[1] {
                return err(format!("{p}.elements[{e}]"), "invalid node ids");
            }
        }
        self.section.validate().map_err(|e| ModelError { path: format!("{p}.section"), message: e.to_string() })?;
        for (i, s) in self.supports.iter().enumerate() {
            if s.node >= nn {
                return err(format!("{p}.supports[{i}].node"), format!("node {} out of range", s.node));
            }
        }
        for (i, l) in self.point_loads.iter().enumerate() {
            if l.node >= nn {
                return err(format!("{p}.point_loads[{i}].node"), format!("node {} out of range", l.node));
            }
        }
        Ok(())
    }

    /// Reference triad of node `i` (explicit, or smallest rotation from e1).
    pub fn reference_triad(&self, i: usize) -> crate::so3::Triad {
        let n = &self.nodes[i];
        match &n.rotation {
            Some(rv) => crate::so3::exp_map(rv),
            None => crate::so3::smallest_rotation_from_e1(&n.tangent),
        }
    }
}
