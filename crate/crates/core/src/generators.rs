//! Built-in geometries: structured solid meshes and the example models
//! (patch tests on flat and curved blocks, half-pipe with helical beam,
//! supported plate, beam-only cantilever).

use crate::beam_fem::CrossSection;
use crate::mesh::{FaceRef, SolidElement, SolidMesh};
use crate::model::{
    BeamDofGroup, BeamModel, BeamNodeInput, BeamSupport, CouplingConfig, FaceSelector, Model, NodeSelector, PointLoad,
    SolidModel, SolidSupport, SolveConfig, SurfaceLoad, Variant,
};
use crate::shapes::ElementKind;
use crate::solid_fem::Material;
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Load factor applied to the second patch-test beam so that the resultants
/// of both line loads balance on the curved block.
pub const CURVED_PATCH_LOAD_FACTOR: f64 = 0.9995346;

/// A mesh of the unit cube mapped to physical space, with the unit-cube
/// coordinates of every node kept for selections.
#[derive(Clone, Debug)]
pub struct StructuredMesh {
    pub mesh: SolidMesh,
    pub unit: Vec<[f64; 3]>,
}

/// Kuhn subdivision of the unit cube (corner offsets in {0, 1}).
fn kuhn_tets() -> Vec<[[usize; 3]; 4]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| {
            let mut v = [[0usize; 3]; 4];
            for s in 0..3 {
                v[s + 1] = v[s];
                v[s + 1][p[s]] = 1;
            }
            v
        })
        .collect()
}

/// Structured mesh of `[0,1]^3` with `n` cells per direction, mapped by
/// `map`. Hexahedral kinds use one element per cell, tetrahedral kinds six.
/// Element orientation is corrected so that every reference Jacobian is
/// positive.
pub fn structured_mesh(kind: ElementKind, n: [usize; 3], map: impl Fn([f64; 3]) -> Vector3<f64>) -> StructuredMesh {
    assert!(n.iter().all(|&k| k > 0), "structured mesh needs at least one cell per direction");
    // Doubled lattice: every mid-edge / mid-face / centre node is a lattice point.
    let dims = [2 * n[0] + 1, 2 * n[1] + 1, 2 * n[2] + 1];
    let lid = |p: [usize; 3]| (p[2] * dims[1] + p[1]) * dims[0] + p[0];
    let unit_of = |p: [usize; 3]| {
        [p[0] as f64 / (dims[0] - 1) as f64, p[1] as f64 / (dims[1] - 1) as f64, p[2] as f64 / (dims[2] - 1) as f64]
    };
    let natural = kind.node_coords();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for c in 0..n[2] {
        for b in 0..n[1] {
            for a in 0..n[0] {
                let base = [2 * a, 2 * b, 2 * c];
                if kind.is_hex() {
                    let mut nodes: Vec<usize> = natural
                        .iter()
                        .map(|xi| {
                            let off = |k: usize| (xi[k] + 1.0).round() as usize;
                            lid([base[0] + off(0), base[1] + off(1), base[2] + off(2)])
                        })
                        .collect();
                    if orientation(&nodes, kind, &map, &unit_of, dims) < 0.0 {
                        nodes = mirror_hex(&natural, base, &lid);
                    }
                    cells.push(nodes);
                } else {
                    for t in kuhn_tets() {
                        let mut v: Vec<[usize; 3]> =
                            t.iter().map(|o| [base[0] + 2 * o[0], base[1] + 2 * o[1], base[2] + 2 * o[2]]).collect();
                        let x: Vec<Vector3<f64>> = v.iter().map(|p| map(unit_of(*p))).collect();
                        if (x[1] - x[0]).cross(&(x[2] - x[0])).dot(&(x[3] - x[0])) < 0.0 {
                            v.swap(1, 2);
                        }
                        let nodes = natural
                            .iter()
                            .map(|l| {
                                let mut p = [0usize; 3];
                                for (k, pk) in p.iter_mut().enumerate() {
                                    let f = v[0][k] as f64
                                        + l[0] * (v[1][k] as f64 - v[0][k] as f64)
                                        + l[1] * (v[2][k] as f64 - v[0][k] as f64)
                                        + l[2] * (v[3][k] as f64 - v[0][k] as f64);
                                    *pk = f.round() as usize;
                                }
                                lid(p)
                            })
                            .collect();
                        cells.push(nodes);
                    }
                }
            }
        }
    }
    // Compact to the lattice points actually used, in lattice order.
    let total = dims[0] * dims[1] * dims[2];
    let mut used = vec![false; total];
    for c in &cells {
        for &i in c {
            used[i] = true;
        }
    }
    let mut renum = vec![usize::MAX; total];
    let mut nodes = Vec::new();
    let mut unit = Vec::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let l = lid([i, j, k]);
                if used[l] {
                    renum[l] = nodes.len();
                    let u = unit_of([i, j, k]);
                    nodes.push(map(u));
                    unit.push(u);
                }
            }
        }
    }
    let elements =
        cells.into_iter().map(|c| SolidElement { kind, nodes: c.into_iter().map(|i| renum[i]).collect() }).collect();
    StructuredMesh { mesh: SolidMesh { nodes, elements }, unit }
}

/// Sign of the reference Jacobian at the centre of a hexahedral cell.
fn orientation(
    nodes: &[usize],
    kind: ElementKind,
    map: &impl Fn([f64; 3]) -> Vector3<f64>,
    unit_of: &impl Fn([usize; 3]) -> [f64; 3],
    dims: [usize; 3],
) -> f64 {
    let (_, dn) = kind.eval(&kind.natural_centroid());
    let mut j = nalgebra::Matrix3::zeros();
    for (a, &id) in nodes.iter().enumerate() {
        let p = [id % dims[0], (id / dims[0]) % dims[1], id / (dims[0] * dims[1])];
        let x = map(unit_of(p));
        for r in 0..3 {
            for c in 0..3 {
                j[(r, c)] += x[r] * dn[a][c];
            }
        }
    }
    j.determinant()
}

/// Hexahedral cell with the first natural axis reversed.
fn mirror_hex(natural: &[[f64; 3]], base: [usize; 3], lid: &impl Fn([usize; 3]) -> usize) -> Vec<usize> {
    natural
        .iter()
        .map(|xi| {
            let off = |k: usize, s: f64| (s * xi[k] + 1.0).round() as usize;
            lid([base[0] + off(0, -1.0), base[1] + off(1, 1.0), base[2] + off(2, 1.0)])
        })
        .collect()
}

impl StructuredMesh {
    /// Boundary faces whose nodes all satisfy `pred` on unit coordinates.
    pub fn faces_where(&self, pred: impl Fn([f64; 3]) -> bool) -> Vec<FaceRef> {
        self.mesh
            .boundary_faces()
            .into_iter()
            .filter(|&f| self.mesh.face_nodes(f).iter().all(|&n| pred(self.unit[n])))
            .collect()
    }

    /// Nodes whose unit coordinates satisfy `pred`.
    pub fn nodes_where(&self, pred: impl Fn([f64; 3]) -> bool) -> Vec<usize> {
        (0..self.unit.len()).filter(|&i| pred(self.unit[i])).collect()
    }
}

const EDGE_TOL: f64 = 1e-12;

fn at(v: f64, target: f64) -> bool {
    (v - target).abs() < EDGE_TOL
}

/// Beam through a parametrised centreline `c(s)`, `s in [0, 1]`, with
/// `n_el` equal parameter intervals. `dc` is the derivative.
pub fn beam_from_curve(
    name: &str,
    n_el: usize,
    section: CrossSection,
    c: impl Fn(f64) -> Vector3<f64>,
    dc: impl Fn(f64) -> Vector3<f64>,
) -> BeamModel {
    let nodes = (0..=n_el)
        .map(|i| {
            let s = i as f64 / n_el as f64;
            BeamNodeInput { position: c(s), tangent: dc(s).normalize(), rotation: None }
        })
        .collect();
    BeamModel {
        name: name.to_string(),
        nodes,
        elements: (0..n_el).map(|i| [i, i + 1]).collect(),
        section,
        line_load: Vector3::zeros(),
        point_loads: Vec::new(),
        supports: Vec::new(),
        coupled_to: None,
    }
}

fn faces_selector(f: Vec<FaceRef>) -> FaceSelector {
    FaceSelector::Faces { faces: f }
}

fn nodes_selector(n: Vec<usize>) -> NodeSelector {
    NodeSelector::Nodes { nodes: n }
}

/// Default cells per direction of the patch-test block.
pub const PATCH_DIVISIONS: [usize; 3] = [3, 3, 4];

/// Top surface of the curved patch block.
pub fn curved_top(i: f64, j: f64) -> f64 {
    1.25 - i * i - j * j
}

/// Beam layout in the top face: a skewed straight line in the `(i, j)` plane.
fn patch_line(s: f64) -> (f64, f64) {
    let a = (-0.41, -0.33);
    let b = (0.37, 0.29);
    (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
}

const PATCH_LINE_DIR: (f64, f64) = (0.37 + 0.41, 0.29 + 0.33);

/// Constant-stress-transfer model: a 1 x 1 x 1.2 block, clamped at the
/// bottom, with two coincident beams (5 and 7 elements) on the top face under
/// opposing line loads. With `curved` the top face follows
/// `z = 5/4 - x^2 - y^2` and the beams are offset by `R` along the exact
/// surface normal.
pub fn patch_test(kind: ElementKind, curved: bool, variant: Variant, divisions: [usize; 3]) -> Model {
    let sm = structured_mesh(kind, divisions, |u| {
        let (i, j) = (u[0] - 0.5, u[1] - 0.5);
        let h = if curved { curved_top(i, j) } else { 1.2 };
        Vector3::new(i, j, u[2] * h)
    });
    let radius = 0.05;
    let section = CrossSection { radius, youngs_modulus: 100.0, poisson_ratio: 0.0 };
    let centre = move |s: f64| -> Vector3<f64> {
        let (i, j) = patch_line(s);
        if curved {
            let m = Vector3::new(2.0 * i, 2.0 * j, 1.0);
            Vector3::new(i, j, curved_top(i, j)) + radius * m.normalize()
        } else {
            Vector3::new(i, j, 1.2 + radius)
        }
    };
    let dcentre = move |s: f64| -> Vector3<f64> {
        let (i, j) = patch_line(s);
        let (di, dj) = PATCH_LINE_DIR;
        if curved {
            let m = Vector3::new(2.0 * i, 2.0 * j, 1.0);
            let dm = Vector3::new(2.0 * di, 2.0 * dj, 0.0);
            let nm = m.norm();
            let n = m / nm;
            let dn = (dm - n * n.dot(&dm)) / nm;
            Vector3::new(di, dj, -2.0 * i * di - 2.0 * j * dj) + radius * dn
        } else {
            Vector3::new(di, dj, 0.0)
        }
    };
    let t = 0.025;
    let mut beams = Vec::new();
    for (name, n_el, q) in [("B1", 5, t), ("B2", 7, -t * if curved { CURVED_PATCH_LOAD_FACTOR } else { 1.0 })] {
        let mut b = beam_from_curve(name, n_el, section, centre, dcentre);
        b.line_load = Vector3::new(0.0, 0.0, q);
        b.coupled_to = Some("top".into());
        beams.push(b);
    }
    let mut face_sets = BTreeMap::new();
    face_sets.insert("top".into(), faces_selector(sm.faces_where(|u| at(u[2], 1.0))));
    let mut node_sets = BTreeMap::new();
    node_sets.insert("bottom".into(), nodes_selector(sm.nodes_where(|u| at(u[2], 0.0))));
    Model {
        description: Some(format!(
            "{} constant stress transfer, {} block",
            if curved { "curved" } else { "planar" },
            kind.name()
        )),
        solid: Some(SolidModel {
            mesh: sm.mesh,
            material: Material::SaintVenantKirchhoff { youngs_modulus: 1.0, poisson_ratio: 0.0 },
            face_sets,
            node_sets,
            supports: vec![SolidSupport { node_set: "bottom".into(), components: vec![0, 1, 2] }],
            loads: Vec::new(),
        }),
        beams,
        coupling: CouplingConfig {
            variant,
            rotational: true,
            penalty_position: 100.0,
            penalty_rotation: 0.1,
            gauss_points: 6,
            search_radius: None,
        },
        solve: SolveConfig { load_steps: 1, ..SolveConfig::default() },
    }
}

/// Half-pipe (inner radius 0.8, outer 1, length 1 along `e2`) meshed with
/// 2 x 12 x 4 hex8 cells, clamped at `y = 0`, with a helical beam
/// (radius 1.05, pitch 2) coupled to the outer surface and a tip force
/// `0.0004 e3` scaled by `load`.
pub fn half_pipe(variant: Variant, load: f64) -> Model {
    // u = 0 is the outer surface (keeps the cell orientation positive).
    let sm = structured_mesh(ElementKind::Hex8, [2, 12, 4], |u| {
        let r = 1.0 - 0.2 * u[0];
        let phi = PI * u[1];
        Vector3::new(r * phi.cos(), u[2], r * phi.sin())
    });
    let rb = 1.05;
    let section = CrossSection { radius: 0.1, youngs_modulus: 50.0, poisson_ratio: 0.0 };
    let mut beam = beam_from_curve(
        "helix",
        10,
        section,
        |s| Vector3::new(rb * (PI * s).cos(), s, rb * (PI * s).sin()),
        |s| Vector3::new(-rb * PI * (PI * s).sin(), 1.0, rb * PI * (PI * s).cos()),
    );
    beam.point_loads.push(PointLoad { node: 10, force: Vector3::new(0.0, 0.0, 0.0004 * load) });
    beam.coupled_to = Some("outer".into());
    let mut face_sets = BTreeMap::new();
    face_sets.insert("outer".into(), faces_selector(sm.faces_where(|u| at(u[0], 0.0))));
    let mut node_sets = BTreeMap::new();
    node_sets.insert("fixed".into(), nodes_selector(sm.nodes_where(|u| at(u[2], 0.0))));
    Model {
        description: Some("half-pipe with helical beam".into()),
        solid: Some(SolidModel {
            mesh: sm.mesh,
            material: Material::NeoHookean { youngs_modulus: 1.0, poisson_ratio: 0.0 },
            face_sets,
            node_sets,
            supports: vec![SolidSupport { node_set: "fixed".into(), components: vec![0, 1, 2] }],
            loads: Vec::new(),
        }),
        beams: vec![beam],
        coupling: CouplingConfig {
            variant,
            rotational: true,
            penalty_position: 10.0,
            penalty_rotation: 1.0,
            gauss_points: 6,
            search_radius: None,
        },
        solve: SolveConfig::default(),
    }
}

/// Supported plate: 3 x 1 x 0.1 neo-Hookean plate (30 x 10 x 1 hex8) under
/// a bottom-face load `0.0002 e3`, stiffened by a straight beam on the top
/// face at `y = 0.35`; plate and beam are clamped at `x = 3`.
pub fn plate(rotational: bool, penalty_position: f64) -> Model {
    let sm = structured_mesh(ElementKind::Hex8, [30, 10, 1], |u| Vector3::new(3.0 * u[0], u[1] - 0.5, 0.1 * u[2]));
    let radius = 0.075;
    let section = CrossSection { radius, youngs_modulus: 100.0, poisson_ratio: 0.0 };
    let mut beam = beam_from_curve(
        "strut",
        10,
        section,
        |s| Vector3::new(3.0 * s, 0.35, 0.1 + radius),
        |_| Vector3::new(1.0, 0.0, 0.0),
    );
    beam.supports.push(BeamSupport {
        node: 10,
        fix: vec![BeamDofGroup::Position, BeamDofGroup::Tangent, BeamDofGroup::Rotation],
    });
    beam.coupled_to = Some("top".into());
    let mut face_sets = BTreeMap::new();
    face_sets.insert("top".into(), faces_selector(sm.faces_where(|u| at(u[2], 1.0))));
    face_sets.insert("bottom".into(), faces_selector(sm.faces_where(|u| at(u[2], 0.0))));
    let mut node_sets = BTreeMap::new();
    node_sets.insert("clamped".into(), nodes_selector(sm.nodes_where(|u| at(u[0], 1.0))));
    Model {
        description: Some(format!(
            "supported plate, {} coupling",
            if rotational { "positional and rotational" } else { "positional" }
        )),
        solid: Some(SolidModel {
            mesh: sm.mesh,
            material: Material::NeoHookean { youngs_modulus: 1.0, poisson_ratio: 0.0 },
            face_sets,
            node_sets,
            supports: vec![SolidSupport { node_set: "clamped".into(), components: vec![0, 1, 2] }],
            loads: vec![SurfaceLoad { face_set: "bottom".into(), traction: Vector3::new(0.0, 0.0, 0.0002) }],
        }),
        beams: vec![beam],
        coupling: CouplingConfig {
            variant: Variant::Cons,
            rotational,
            penalty_position,
            penalty_rotation: 0.1,
            gauss_points: 6,
            search_radius: None,
        },
        solve: SolveConfig::default(),
    }
}

/// Straight cantilever along `e1` (length `length`), clamped at `x = 0`, tip
/// force `force` at the free end. No solid.
pub fn cantilever(n_el: usize, length: f64, section: CrossSection, force: Vector3<f64>) -> Model {
    let mut beam = beam_from_curve(
        "cantilever",
        n_el,
        section,
        |s| Vector3::new(length * s, 0.0, 0.0),
        |_| Vector3::new(1.0, 0.0, 0.0),
    );
    beam.supports.push(BeamSupport {
        node: 0,
        fix: vec![BeamDofGroup::Position, BeamDofGroup::Tangent, BeamDofGroup::Rotation],
    });
    beam.point_loads.push(PointLoad { node: n_el, force });
    Model {
        description: Some("cantilever beam".into()),
        solid: None,
        beams: vec![beam],
        coupling: CouplingConfig::default(),
        solve: SolveConfig { load_steps: 4, ..SolveConfig::default() },
    }
}

/// Smallest coupled model: one unit hex8 and a two-node beam on its top face.
pub fn minimal(variant: Variant) -> Model {
    let sm = structured_mesh(ElementKind::Hex8, [1, 1, 1], |u| Vector3::new(u[0], u[1], u[2]));
    let section = CrossSection { radius: 0.05, youngs_modulus: 100.0, poisson_ratio: 0.0 };
    let mut beam = beam_from_curve(
        "beam",
        1,
        section,
        |s| Vector3::new(0.1 + 0.8 * s, 0.3 + 0.4 * s, 1.05),
        |_| Vector3::new(0.8, 0.4, 0.0),
    );
    beam.coupled_to = Some("top".into());
    beam.point_loads.push(PointLoad { node: 1, force: Vector3::new(0.0, 0.0, -0.001) });
    let mut face_sets = BTreeMap::new();
    face_sets.insert("top".into(), faces_selector(sm.faces_where(|u| at(u[2], 1.0))));
    let mut node_sets = BTreeMap::new();
    node_sets.insert("bottom".into(), nodes_selector(sm.nodes_where(|u| at(u[2], 0.0))));
    Model {
        description: Some("one hex8 with one beam element".into()),
        solid: Some(SolidModel {
            mesh: sm.mesh,
            material: Material::NeoHookean { youngs_modulus: 1.0, poisson_ratio: 0.0 },
            face_sets,
            node_sets,
            supports: vec![SolidSupport { node_set: "bottom".into(), components: vec![0, 1, 2] }],
            loads: Vec::new(),
        }),
        beams: vec![beam],
        coupling: CouplingConfig { variant, ..CouplingConfig::default() },
        solve: SolveConfig { load_steps: 1, ..SolveConfig::default() },
    }
}

/// Named built-in examples written by the `generate` command.
pub fn builtin_examples() -> Vec<(&'static str, Model)> {
    vec![
        ("patch_planar", patch_test(ElementKind::Hex8, false, Variant::Cons, PATCH_DIVISIONS)),
        ("patch_curved", patch_test(ElementKind::Hex8, true, Variant::Cons, PATCH_DIVISIONS)),
        ("halfpipe", half_pipe(Variant::Cons, 1.0)),
        ("plate", plate(true, 100.0)),
        (
            "cantilever",
            cantilever(
                10,
                1.0,
                CrossSection { radius: 0.05, youngs_modulus: 100.0, poisson_ratio: 0.0 },
                Vector3::new(0.0, 0.0, 1e-6),
            ),
        ),
        ("minimal", minimal(Variant::Cons)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solid_fem::element_geometry;

    #[test]
    fn structured_meshes_are_valid_for_all_kinds() {
        for kind in ElementKind::ALL {
            let sm = structured_mesh(kind, [2, 1, 2], |u| Vector3::new(u[0], 2.0 * u[1], 0.5 * u[2]));
            let mut vol = 0.0;
            for e in 0..sm.mesh.elements.len() {
                let g = element_geometry(kind, &sm.mesh.element_coords(e), e).unwrap();
                vol += g.dvol.iter().sum::<f64>();
            }
            assert!((vol - 1.0).abs() < 1e-12, "{kind:?}: {vol}");
            // Every lattice node is referenced.
            let mut used = vec![false; sm.mesh.nodes.len()];
            for el in &sm.mesh.elements {
                for &n in &el.nodes {
                    used[n] = true;
                }
            }
            assert!(used.iter().all(|&u| u));
        }
    }

    #[test]
    fn mirrored_map_keeps_positive_jacobians() {
        let sm = structured_mesh(ElementKind::Hex20, [1, 2, 1], |u| Vector3::new(-u[0], u[1], u[2]));
        for e in 0..sm.mesh.elements.len() {
            assert!(element_geometry(ElementKind::Hex20, &sm.mesh.element_coords(e), e).is_ok());
        }
    }

    #[test]
    fn generated_models_validate() {
        for (name, m) in builtin_examples() {
            m.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        for kind in ElementKind::ALL {
            patch_test(kind, true, Variant::Disp, PATCH_DIVISIONS).validate().unwrap();
        }
    }

    #[test]
    fn patch_block_dimensions() {
        let m = patch_test(ElementKind::Hex8, false, Variant::Cons, PATCH_DIVISIONS);
        let s = m.solid.as_ref().unwrap();
        let (lo, hi) = s
            .mesh
            .nodes
            .iter()
            .fold((Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)), |(a, b), x| {
                (a.inf(x), b.sup(x))
            });
        assert_eq!(lo, Vector3::new(-0.5, -0.5, 0.0));
        assert_eq!(hi, Vector3::new(0.5, 0.5, 1.2));
        assert_eq!(m.beams[0].elements.len(), 5);
        assert_eq!(m.beams[1].elements.len(), 7);
        assert_eq!(m.beams[0].line_load.z, 0.025);
        assert_eq!(m.beams[1].line_load.z, -0.025);
    }
}
