//! Discrete coupled problem: unknown numbering, state, and global assembly
//! of the total potential (solid + beams + coupling penalty - dead loads).

use crate::beam_fem::{line_load_vector, spin_correction, BeamElement, BeamError, BeamNodeState, NODE_DOFS};
use crate::linalg::{LocalBlock, SparseSystem};
use crate::model::{BeamDofGroup, Model, ModelError};
use crate::mortar::{Coupling, CouplingEval, MortarError};
use crate::so3::{exp_map, So3Error};
use crate::solid_fem::{element_geometry, element_mean_stress, element_response, ElementGeometry, SolidError};
use crate::surface::{facet_geometry, Surface, SurfaceError};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid model: {0}")]
    Model(#[from] ModelError),
    #[error("solid: {0}")]
    Solid(#[from] SolidError),
    #[error("beam '{beam}': {source}")]
    Beam { beam: String, source: BeamError },
    #[error("surface of face set '{set}': {source}")]
    Surface { set: String, source: SurfaceError },
    #[error("coupling of beam '{beam}': {source}")]
    Mortar { beam: String, source: MortarError },
    #[error("face set '{0}' selects no faces")]
    EmptyFaceSet(String),
}

/// Discretised beam.
#[derive(Clone, Debug)]
pub struct BeamData {
    pub name: String,
    pub elements: Vec<BeamElement>,
    pub reference: Vec<BeamNodeState>,
    /// Global index of the first unknown of node 0.
    pub offset: usize,
}

/// Solution state: solid displacements and beam nodal states.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub displacement: Vec<Vector3<f64>>,
    pub beams: Vec<Vec<BeamNodeState>>,
}

/// Energies, residual and tangent of one state.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub solid_energy: f64,
    pub beam_energy: f64,
    pub penalty_energy: f64,
    pub external_work: f64,
    /// Gradient of the total potential (all unknowns, supports included).
    pub residual: Vec<f64>,
    pub tangent: Option<SparseSystem>,
    pub couplings: Vec<CouplingEval>,
}

impl Evaluation {
    /// Elastic (solid + beam) energy.
    pub fn elastic_energy(&self) -> f64 {
        self.solid_energy + self.beam_energy
    }
    /// Elastic plus penalty energy.
    pub fn internal_energy(&self) -> f64 {
        self.elastic_energy() + self.penalty_energy
    }
}

/// Net coupling force and moment about the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumAudit {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    /// `sum_j |lambda_j|` (positional) times the coupled length scale.
    pub scale: f64,
}

/// The assembled problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: Model,
    pub solid_geometry: Vec<ElementGeometry>,
    pub beams: Vec<BeamData>,
    pub couplings: Vec<Coupling>,
    pub n_dofs: usize,
    pub fixed: Vec<bool>,
    /// Reference external load vector (load factor 1, before `load_scale`).
    pub external: Vec<f64>,
}

impl Problem {
    pub fn new(model: Model) -> Result<Problem, ProblemError> {
        model.validate()?;
        let solid_ref: Vec<Vector3<f64>> = model.solid.as_ref().map(|s| s.mesh.nodes.clone()).unwrap_or_default();
        let mut solid_geometry = Vec::new();
        if let Some(s) = &model.solid {
            solid_geometry = (0..s.mesh.elements.len())
                .into_par_iter()
                .map(|e| element_geometry(s.mesh.elements[e].kind, &s.mesh.element_coords(e), e))
                .collect::<Result<Vec<_>, _>>()?;
        }
        let mut n = 3 * solid_ref.len();
        let mut beams = Vec::new();
        for bm in &model.beams {
            let reference: Vec<BeamNodeState> = (0..bm.nodes.len())
                .map(|i| BeamNodeState {
                    position: bm.nodes[i].position,
                    tangent: bm.nodes[i].tangent.normalize(),
                    triad: bm.reference_triad(i),
                })
                .collect();
            let elements = bm
                .elements
                .iter()
                .enumerate()
                .map(|(e, &[a, b])| BeamElement::new(e, [a, b], [&reference[a], &reference[b]], bm.section))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| ProblemError::Beam { beam: bm.name.clone(), source })?;
            beams.push(BeamData { name: bm.name.clone(), elements, reference, offset: n });
            n += NODE_DOFS * bm.nodes.len();
        }

        let mut couplings = Vec::new();
        for (b, bm) in model.beams.iter().enumerate() {
            let Some(set) = &bm.coupled_to else { continue };
            let solid = model.solid.as_ref().unwrap();
            let faces = solid.resolve_faces(set).unwrap_or_default();
            if faces.is_empty() {
                return Err(ProblemError::EmptyFaceSet(set.clone()));
            }
            let surface = Surface::extract(&solid.mesh, &faces)
                .map_err(|source| ProblemError::Surface { set: set.clone(), source })?;
            let c = Coupling::new(b, surface, &solid_ref, &beams[b].elements, &beams[b].reference, &model.coupling)
                .map_err(|source| ProblemError::Mortar { beam: bm.name.clone(), source })?;
            couplings.push(c);
        }

        let mut fixed = vec![false; n];
        let mut external = vec![0.0; n];
        if let Some(s) = &model.solid {
            for sup in &s.supports {
                for node in s.resolve_nodes(&sup.node_set).unwrap_or_default() {
                    for &c in &sup.components {
                        fixed[3 * node + c] = true;
                    }
                }
            }
            for load in &s.loads {
                for f in s.resolve_faces(&load.face_set).unwrap_or_default() {
                    let nodes = s.mesh.face_nodes(f);
                    let kind = s.mesh.elements[f.element].kind.facet_kind();
                    let xs: Vec<Vector3<f64>> = nodes.iter().map(|&i| solid_ref[i]).collect();
                    let rule = kind.quadrature();
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        let (sh, _, _) = kind.eval(p);
                        let g = facet_geometry(kind, &xs, p);
                        let da = g.xa.cross(&g.xb).norm() * w;
                        for (k, &node) in nodes.iter().enumerate() {
                            for c in 0..3 {
                                external[3 * node + c] += sh[k] * da * load.traction[c];
                            }
                        }
                    }
                }
            }
        }
        for (bm, bd) in model.beams.iter().zip(&beams) {
            for sup in &bm.supports {
                for g in &sup.fix {
                    let k0 = match g {
                        BeamDofGroup::Position => 0,
                        BeamDofGroup::Tangent => 3,
                        BeamDofGroup::Rotation => 6,
                    };
                    for k in k0..k0 + 3 {
                        fixed[bd.offset + NODE_DOFS * sup.node + k] = true;
                    }
                }
            }
            for el in &bd.elements {
                let f = line_load_vector(el.length, &bm.line_load);
                for (a, &node) in el.nodes.iter().enumerate() {
                    for c in 0..3 {
                        external[bd.offset + NODE_DOFS * node + c] += f[2 * a][c];
                        external[bd.offset + NODE_DOFS * node + 3 + c] += f[2 * a + 1][c];
                    }
                }
            }
            for pl in &bm.point_loads {
                for c in 0..3 {
                    external[bd.offset + NODE_DOFS * pl.node + c] += pl.force[c];
                }
            }
        }
        Ok(Problem { model, solid_geometry, beams, couplings, n_dofs: n, fixed, external })
    }

    pub fn n_solid_nodes(&self) -> usize {
        self.model.solid.as_ref().map_or(0, |s| s.mesh.nodes.len())
    }

    /// Undeformed state.
    pub fn reference_state(&self) -> State {
        State {
            displacement: vec![Vector3::zeros(); self.n_solid_nodes()],
            beams: self.beams.iter().map(|b| b.reference.clone()).collect(),
        }
    }

    /// Free-unknown numbering: `map[i] = Some(k)` for free global unknown `i`.
    pub fn free_map(&self) -> (Vec<Option<usize>>, usize) {
        let mut k = 0;
        let map = self
            .fixed
            .iter()
            .map(|&f| {
                if f {
                    None
                } else {
                    k += 1;
                    Some(k - 1)
                }
            })
            .collect();
        (map, k)
    }

    /// Human-readable name of a global unknown.
    pub fn dof_name(&self, i: usize) -> String {
        const C: [&str; 3] = ["x", "y", "z"];
        let ns = 3 * self.n_solid_nodes();
        if i < ns {
            return format!("solid node {} u_{}", i / 3, C[i % 3]);
        }
        for b in &self.beams {
            let end = b.offset + NODE_DOFS * b.reference.len();
            if i >= b.offset && i < end {
                let l = i - b.offset;
                let group = ["r", "t", "theta"][(l % NODE_DOFS) / 3];
                return format!("beam '{}' node {} {}_{}", b.name, l / NODE_DOFS, group, C[l % 3]);
            }
        }
        format!("unknown {i}")
    }

    /// Current solid node positions.
    pub fn solid_positions(&self, state: &State) -> Vec<Vector3<f64>> {
        match &self.model.solid {
            Some(s) => s.mesh.nodes.iter().zip(&state.displacement).map(|(x, u)| x + u).collect(),
            None => Vec::new(),
        }
    }

    /// Applies an increment (all global unknowns): additive for solid
    /// displacements, beam positions and tangents; multiplicative for triads.
    pub fn apply_increment(&self, state: &mut State, dx: &[f64]) {
        for (n, u) in state.displacement.iter_mut().enumerate() {
            *u += Vector3::new(dx[3 * n], dx[3 * n + 1], dx[3 * n + 2]);
        }
        for (b, bd) in self.beams.iter().enumerate() {
            for (n, s) in state.beams[b].iter_mut().enumerate() {
                let o = bd.offset + NODE_DOFS * n;
                s.position += Vector3::new(dx[o], dx[o + 1], dx[o + 2]);
                s.tangent += Vector3::new(dx[o + 3], dx[o + 4], dx[o + 5]);
                let th = Vector3::new(dx[o + 6], dx[o + 7], dx[o + 8]);
                if th != Vector3::zeros() {
                    s.triad = exp_map(&th) * s.triad;
                }
            }
        }
    }

    /// Assembles energies, the residual (gradient of the total potential at
    /// load factor `load`) and optionally the consistent tangent.
    pub fn evaluate(&self, state: &State, load: f64, with_tangent: bool) -> Result<Evaluation, ProblemError> {
        let n = self.n_dofs;
        let mut blocks: Vec<LocalBlock> = Vec::new();
        let mut solid_energy = 0.0;
        if let Some(s) = &self.model.solid {
            let res: Vec<(f64, LocalBlock)> = (0..s.mesh.elements.len())
                .into_par_iter()
                .map(|e| {
                    let el = &s.mesh.elements[e];
                    let u: Vec<Vector3<f64>> = el.nodes.iter().map(|&i| state.displacement[i]).collect();
                    let r = element_response(&self.solid_geometry[e], &s.material, &u, with_tangent, e)?;
                    let dofs = el.nodes.iter().flat_map(|&i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
                    Ok((r.energy, LocalBlock { dofs, grad: r.force, hess: r.tangent }))
                })
                .collect::<Result<_, SolidError>>()?;
            for (e, b) in res {
                solid_energy += e;
                blocks.push(b);
            }
        }
        let mut beam_energy = 0.0;
        for (b, bd) in self.beams.iter().enumerate() {
            let st = &state.beams[b];
            let res: Vec<(f64, LocalBlock)> = bd
                .elements
                .par_iter()
                .enumerate()
                .map(|(e, el)| {
                    let (en, g, h) = el.response([&st[el.nodes[0]], &st[el.nodes[1]]]).map_err(|source| {
                        ProblemError::Beam { beam: bd.name.clone(), source: rotation_error(e, source) }
                    })?;
                    let dofs = el
                        .nodes
                        .iter()
                        .flat_map(|&i| (0..NODE_DOFS).map(move |k| bd.offset + NODE_DOFS * i + k))
                        .collect();
                    Ok((en, LocalBlock { dofs, grad: g, hess: if with_tangent { Some(h) } else { None } }))
                })
                .collect::<Result<_, ProblemError>>()?;
            for (e, blk) in res {
                beam_energy += e;
                blocks.push(blk);
            }
        }
        let solid_x = self.solid_positions(state);
        let mut couplings = Vec::with_capacity(self.couplings.len());
        let mut penalty_energy = 0.0;
        for c in &self.couplings {
            let bd = &self.beams[c.beam];
            let ev = c
                .evaluate(&solid_x, &bd.elements, &state.beams[c.beam], bd.offset, with_tangent)
                .map_err(|source| ProblemError::Mortar { beam: bd.name.clone(), source })?;
            penalty_energy += ev.energy;
            couplings.push(ev);
        }

        let mut sys = SparseSystem::new(n);
        sys.scatter(&blocks);
        for c in &couplings {
            sys.scatter(&c.blocks);
        }
        let scale = load * self.model.solve.load_scale;
        let mut external_work = 0.0;
        let mut residual = std::mem::take(&mut sys.rhs);
        // Dead loads: work on position and tangent changes.
        for (n, u) in state.displacement.iter().enumerate() {
            for c in 0..3 {
                external_work += scale * self.external[3 * n + c] * u[c];
            }
        }
        for (b, bd) in self.beams.iter().enumerate() {
            for (k, (s, s0)) in state.beams[b].iter().zip(&bd.reference).enumerate() {
                let o = bd.offset + NODE_DOFS * k;
                for c in 0..3 {
                    external_work += scale * self.external[o + c] * (s.position[c] - s0.position[c]);
                    external_work += scale * self.external[o + 3 + c] * (s.tangent[c] - s0.tangent[c]);
                }
            }
        }
        for (r, f) in residual.iter_mut().zip(&self.external) {
            *r -= scale * f;
        }
        if with_tangent {
            // multiplicative spin update: -1/2 S(m) on each nodal rotation block
            for bd in &self.beams {
                for k in 0..bd.reference.len() {
                    let o = bd.offset + NODE_DOFS * k + 6;
                    let m = Vector3::new(residual[o], residual[o + 1], residual[o + 2]);
                    let c = spin_correction(&m);
                    for i in 0..3 {
                        for j in 0..3 {
                            if c[(i, j)] != 0.0 {
                                sys.entries.push((o + i, o + j, c[(i, j)]));
                            }
                        }
                    }
                }
            }
            sys.compress();
        }
        Ok(Evaluation {
            solid_energy,
            beam_energy,
            penalty_energy,
            external_work,
            residual,
            tangent: if with_tangent { Some(sys) } else { None },
            couplings,
        })
    }

    /// Net force and moment (about the origin) exerted by the coupling
    /// terms on beams and solid, from the coupling force vector.
    pub fn momentum_audit(&self, state: &State, eval: &Evaluation) -> MomentumAudit {
        let solid_x = self.solid_positions(state);
        let mut f = vec![0.0; self.n_dofs];
        for c in &eval.couplings {
            for b in &c.blocks {
                for (a, &i) in b.dofs.iter().enumerate() {
                    f[i] += b.grad[a];
                }
            }
        }
        let mut force = Vector3::zeros();
        let mut moment = Vector3::zeros();
        for (n, x) in solid_x.iter().enumerate() {
            let v = Vector3::new(f[3 * n], f[3 * n + 1], f[3 * n + 2]);
            force += v;
            moment += x.cross(&v);
        }
        for (b, bd) in self.beams.iter().enumerate() {
            for (k, s) in state.beams[b].iter().enumerate() {
                let o = bd.offset + NODE_DOFS * k;
                let fr = Vector3::new(f[o], f[o + 1], f[o + 2]);
                let ft = Vector3::new(f[o + 3], f[o + 4], f[o + 5]);
                let m = Vector3::new(f[o + 6], f[o + 7], f[o + 8]);
                force += fr;
                moment += s.position.cross(&fr) + s.tangent.cross(&ft) + m;
            }
        }
        let mut scale = 0.0;
        for (c, ev) in self.couplings.iter().zip(&eval.couplings) {
            let lam: f64 = ev.lambda_pos.iter().map(|l| l.norm()).sum();
            scale += lam * c.coupled_length().max(self.characteristic_length());
        }
        MomentumAudit { force, moment, scale }
    }

    /// Size of the model (bounding diagonal of solid and beam nodes).
    pub fn characteristic_length(&self) -> f64 {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        let solid = self.model.solid.as_ref().map(|s| s.mesh.nodes.clone()).unwrap_or_default();
        for p in solid.iter().chain(self.beams.iter().flat_map(|b| b.reference.iter().map(|s| &s.position))) {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if lo.x.is_finite() {
            (hi - lo).norm()
        } else {
            0.0
        }
    }

    /// Nodal second Piola-Kirchhoff stresses: element means averaged over
    /// the elements sharing each node.
    pub fn nodal_stress(&self, state: &State) -> Vec<Matrix3<f64>> {
        let Some(s) = &self.model.solid else { return Vec::new() };
        let mut acc = vec![Matrix3::zeros(); s.mesh.nodes.len()];
        let mut cnt = vec![0usize; s.mesh.nodes.len()];
        for (e, el) in s.mesh.elements.iter().enumerate() {
            let u: Vec<Vector3<f64>> = el.nodes.iter().map(|&i| state.displacement[i]).collect();
            let sm = element_mean_stress(&self.solid_geometry[e], &s.material, &u)
                .unwrap_or(Matrix3::from_element(f64::NAN));
            for &i in &el.nodes {
                acc[i] += sm;
                cnt[i] += 1;
            }
        }
        acc.iter().zip(&cnt).map(|(a, &c)| if c > 0 { a / c as f64 } else { *a }).collect()
    }

    /// Material bending curvature `|Omega_2,3|` of every beam element.
    pub fn beam_curvatures(&self, state: &State) -> Vec<Vec<f64>> {
        self.beams
            .iter()
            .enumerate()
            .map(|(b, bd)| {
                bd.elements
                    .iter()
                    .map(|el| {
                        let s = [&state.beams[b][el.nodes[0]], &state.beams[b][el.nodes[1]]];
                        el.strains(s).map(|(_, om)| (om[1] * om[1] + om[2] * om[2]).sqrt()).unwrap_or(f64::NAN)
                    })
                    .collect()
            })
            .collect()
    }

    /// Dense tangent restricted to the free unknowns (small problems/tests).
    pub fn dense_free_tangent(&self, eval: &Evaluation) -> DMatrix<f64> {
        let (map, nf) = self.free_map();
        eval.tangent.as_ref().expect("tangent not assembled").restrict(&map, nf).to_dense()
    }

    /// Residual restricted to free unknowns.
    pub fn free_residual(&self, eval: &Evaluation) -> DVector<f64> {
        let (map, nf) = self.free_map();
        let mut r = DVector::zeros(nf);
        for (i, m) in map.iter().enumerate() {
            if let Some(k) = m {
                r[*k] = eval.residual[i];
            }
        }
        r
    }
}

fn rotation_error(element: usize, e: So3Error) -> BeamError {
    match e {
        So3Error::NearPi { angle } => BeamError::NearPi { element, angle },
        other => BeamError::Rotation { element, source: other },
    }
}
