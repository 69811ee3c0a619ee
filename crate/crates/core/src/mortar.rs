//! Mortar-type beam-to-surface coupling with penalty regularisation.
//!
//! Setup (reference configuration, frozen for the whole solve): every beam
//! element is split into segments that each project into a single facet;
//! Gauss points on the segments carry the projection `(facet, xi_s, g0)`.
//! Multipliers are interpolated linearly between the beam nodes.
//!
//! Evaluation: with `r_j = int Phi_j c ds` (positional constraint `c`) the
//! penalty potential is `sum_j eps / (2 kappa_j) |r_j|^2`, so the
//! multipliers are `lambda_j = eps r_j / kappa_j`, the coupling forces are
//! `J_j^T lambda_j` and the tangent is
//! `sum_j eps / kappa_j J_j^T J_j + sum_j lambda_j . d2 r_j`.
//! For the consistent variant the second term is the curvature of the
//! averaged normal field, obtained by autodiff in two levels: the
//! interpolated normal as a function of the nodal averaged normals, and each
//! nodal averaged normal as a function of its facet patch coordinates.

use crate::autodiff::{Dual2, V3};
use crate::beam_fem::{derivative_weights, position_weights, BeamElement, BeamNodeState, NODE_DOFS};
use crate::linalg::LocalBlock;
use crate::model::{CouplingConfig, Variant};
use crate::quadrature::gauss_legendre;
use crate::so3::{exp_g, rv_g, GEODESIC_PI_MARGIN};
use crate::surface::{facet_geometry, facet_point_g, Surface, SurfaceError, SurfaceFrame};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Parent-coordinate tolerance of segment boundaries.
pub const SEGMENT_TOL: f64 = 1e-10;
/// Samples per beam element used to detect facet changes.
pub const SEGMENT_SAMPLES: usize = 16;
/// Multipliers with `kappa_j < KAPPA_TOL * L_e` are deactivated.
pub const KAPPA_TOL: f64 = 1e-12;
/// Largest admissible relative rotation between beam and surface triads.
pub const ROTATION_LIMIT: f64 = std::f64::consts::PI - 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MortarError {
    #[error("beam {beam}, element {element}: projection failed at arc length {arc:.6} (xi = {xi:.6}): {source}")]
    Projection { beam: usize, element: usize, xi: f64, arc: f64, source: SurfaceError },
    #[error("beam {beam}, element {element}: Gauss point at xi = {xi:.6} does not project onto facet {facet}")]
    GaussPoint { beam: usize, element: usize, xi: f64, facet: usize },
    #[error("beam {beam}, element {element}: surface triad at xi = {xi:.6}: {source}")]
    Triad { beam: usize, element: usize, xi: f64, source: SurfaceError },
    #[error("beam {beam}, element {element}: relative rotation {angle:.6} at xi = {xi:.6} exceeds the coupling range")]
    RotationRange { beam: usize, element: usize, xi: f64, angle: f64 },
    #[error("beam {beam}, element {element}: nodal triads are nearly opposite ({angle:.6} rad)")]
    BeamRotation { beam: usize, element: usize, angle: f64 },
    #[error("coupling surface: {0}")]
    Surface(#[from] SurfaceError),
}

/// Part of a beam element that projects into one facet.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub element: usize,
    pub xi: [f64; 2],
    pub facet: usize,
}

/// Quadrature point of the coupling integrals.
#[derive(Clone, Debug)]
pub struct CouplingPoint {
    pub element: usize,
    pub xi: f64,
    /// Quadrature weight times the reference arc-length measure.
    pub weight: f64,
    /// Multiplier shape functions of the element's two nodes.
    pub phi: [f64; 2],
    /// Hermite weights for `(r1, t1, r2, t2)`.
    pub hermite: [f64; 4],
    pub facet: usize,
    pub surf_xi: [f64; 2],
    /// Facet shape functions at `surf_xi`.
    pub shape: Vec<f64>,
    /// Reference gap along the averaged normal.
    pub gap: f64,
    /// `r0 - X_S` at this point.
    pub offset0: Vector3<f64>,
    pub frame: Option<SurfaceFrame>,
}

/// Reference-configuration data of one beam's coupling to a surface.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub beam: usize,
    pub config: CouplingConfig,
    pub surface: Surface,
    pub segments: Vec<Segment>,
    pub points: Vec<CouplingPoint>,
    /// `kappa_j = int Phi_j ds` per beam node.
    pub kappa: Vec<f64>,
    pub active: Vec<bool>,
    pub search_radius: f64,
}

/// Result of evaluating one coupling in a given state.
#[derive(Clone, Debug, Default)]
pub struct CouplingEval {
    /// Penalty potential.
    pub energy: f64,
    pub blocks: Vec<LocalBlock>,
    /// Positional constraint vectors `r_j` per beam node.
    pub r_pos: Vec<Vector3<f64>>,
    /// Rotational constraint vectors per beam node.
    pub r_rot: Vec<Vector3<f64>>,
    pub lambda_pos: Vec<Vector3<f64>>,
    pub lambda_rot: Vec<Vector3<f64>>,
    /// Positional constraint Jacobians `J_j` (3 x dofs) per active node.
    pub jac_pos: Vec<Option<(Vec<usize>, DMatrix<f64>)>>,
}

/// Default projection search radius: three times the largest facet size.
pub fn default_search_radius(surface: &Surface, x: &[Vector3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for fc in &surface.facets {
        for &a in &fc.nodes {
            for &b in &fc.nodes {
                d = d.max((x[a] - x[b]).norm());
            }
        }
    }
    3.0 * d
}

fn arc_start(elements: &[BeamElement], e: usize) -> f64 {
    elements[..e].iter().map(|el| el.length).sum()
}

impl Coupling {
    /// Segments the beam against the surface and builds the coupling points.
    pub fn new(
        beam: usize,
        surface: Surface,
        solid_ref: &[Vector3<f64>],
        elements: &[BeamElement],
        beam_ref: &[BeamNodeState],
        config: &CouplingConfig,
    ) -> Result<Coupling, MortarError> {
        let normals = surface.averaged_normals(solid_ref)?;
        let radius = config.search_radius.unwrap_or_else(|| default_search_radius(&surface, solid_ref));
        let mut segments = Vec::new();
        let mut hint = None;
        for (e, el) in elements.iter().enumerate() {
            let s = [&beam_ref[el.nodes[0]], &beam_ref[el.nodes[1]]];
            let status = |xi: f64, hint: &mut Option<usize>| -> Result<Option<usize>, MortarError> {
                let p = el.position(xi, s);
                let r = surface.project(&p, *hint, radius, solid_ref, &normals).map_err(|source| {
                    MortarError::Projection {
                        beam,
                        element: e,
                        xi,
                        arc: arc_start(elements, e) + 0.5 * (xi + 1.0) * el.length,
                        source,
                    }
                })?;
                if let Some(pr) = &r {
                    *hint = Some(pr.facet);
                }
                Ok(r.map(|pr| pr.facet))
            };
            // (parent coordinate, status from here on)
            let mut marks: Vec<(f64, Option<usize>)> = vec![(-1.0, status(-1.0, &mut hint)?)];
            for i in 1..=SEGMENT_SAMPLES {
                let x = -1.0 + 2.0 * i as f64 / SEGMENT_SAMPLES as f64;
                let sx = status(x, &mut hint)?;
                let mut guard = 0;
                while marks.last().unwrap().1 != sx && guard < 64 {
                    guard += 1;
                    let (xl, sl) = *marks.last().unwrap();
                    let (mut lo, mut hi, mut shi) = (xl, x, sx);
                    while hi - lo > SEGMENT_TOL {
                        let mid = 0.5 * (lo + hi);
                        let sm = status(mid, &mut hint)?;
                        if sm == sl {
                            lo = mid;
                        } else {
                            hi = mid;
                            shi = sm;
                        }
                    }
                    marks.push((0.5 * (lo + hi), shi));
                }
            }
            marks.push((1.0, None));
            for w in marks.windows(2) {
                if let (Some(f), true) = (w[0].1, w[1].0 - w[0].0 > 1e-14) {
                    segments.push(Segment { element: e, xi: [w[0].0, w[1].0], facet: f });
                }
            }
        }

        let (gx, gw) = gauss_legendre(config.gauss_points);
        let mut points = Vec::with_capacity(segments.len() * gx.len());
        let mut kappa = vec![0.0; beam_ref.len()];
        for seg in &segments {
            let el = &elements[seg.element];
            let s = [&beam_ref[el.nodes[0]], &beam_ref[el.nodes[1]]];
            let half = 0.5 * (seg.xi[1] - seg.xi[0]);
            for (&x, &w) in gx.iter().zip(&gw) {
                let xi = seg.xi[0] + half * (x + 1.0);
                let d = derivative_weights(xi, el.length);
                let rs = d[0] * s[0].position + d[1] * s[0].tangent + d[2] * s[1].position + d[3] * s[1].tangent;
                let weight = w * half * 0.5 * el.length * rs.norm();
                let r0 = el.position(xi, s);
                let pr = surface
                    .project_on_facet(seg.facet, &r0, solid_ref, &normals)
                    .ok_or(MortarError::GaussPoint { beam, element: seg.element, xi, facet: seg.facet })?;
                let fc = &surface.facets[seg.facet];
                let (shape, _, _) = fc.kind.eval(&pr.xi);
                let frame = if config.rotational {
                    let g = facet_geometry(fc.kind, &surface.facet_coords(seg.facet, solid_ref), &pr.xi);
                    let lb0 = el.triad(xi, s).map_err(|_| MortarError::BeamRotation {
                        beam,
                        element: seg.element,
                        angle: std::f64::consts::PI,
                    })?;
                    Some(SurfaceFrame::new(&g.xa, &g.xb, &lb0).map_err(|source| MortarError::Triad {
                        beam,
                        element: seg.element,
                        xi,
                        source,
                    })?)
                } else {
                    None
                };
                let phi = [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)];
                kappa[el.nodes[0]] += weight * phi[0];
                kappa[el.nodes[1]] += weight * phi[1];
                points.push(CouplingPoint {
                    element: seg.element,
                    xi,
                    weight,
                    phi,
                    hermite: position_weights(xi, el.length),
                    facet: seg.facet,
                    surf_xi: pr.xi,
                    shape,
                    gap: pr.gap,
                    offset0: r0 - pr.point,
                    frame,
                });
            }
        }
        let mut node_len = vec![0.0f64; beam_ref.len()];
        for el in elements {
            for &n in &el.nodes {
                node_len[n] = node_len[n].max(el.length);
            }
        }
        let active = kappa.iter().zip(&node_len).map(|(&k, &l)| k > 0.0 && k >= KAPPA_TOL * l).collect();
        Ok(Coupling { beam, config: config.clone(), surface, segments, points, kappa, active, search_radius: radius })
    }

    /// Total coupled reference length.
    pub fn coupled_length(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Evaluates constraints, multipliers, penalty potential, coupling
    /// forces and (optionally) the tangent. Beam node `n` has global unknowns
    /// starting at `beam_offset + 9 n`; solid node `m` at `3 m`.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        &self,
        solid_x: &[Vector3<f64>],
        elements: &[BeamElement],
        beam: &[BeamNodeState],
        beam_offset: usize,
        with_tangent: bool,
    ) -> Result<CouplingEval, MortarError> {
        let nb = beam.len();
        let mut out = CouplingEval {
            r_pos: vec![Vector3::zeros(); nb],
            r_rot: vec![Vector3::zeros(); nb],
            lambda_pos: vec![Vector3::zeros(); nb],
            lambda_rot: vec![Vector3::zeros(); nb],
            jac_pos: vec![None; nb],
            ..Default::default()
        };
        if self.points.is_empty() {
            return Ok(out);
        }
        let eps_r = self.config.penalty_position;
        if eps_r > 0.0 {
            self.positional(solid_x, elements, beam, beam_offset, with_tangent, &mut out)?;
        }
        let eps_t = self.config.penalty_rotation;
        if self.config.rotational && eps_t > 0.0 {
            self.rotational(solid_x, elements, beam, beam_offset, with_tangent, &mut out)?;
        }
        Ok(out)
    }

    fn beam_dof(&self, beam_offset: usize, node: usize, k: usize) -> usize {
        beam_offset + NODE_DOFS * node + k
    }

    #[allow(clippy::too_many_arguments)]
    fn positional(
        &self,
        solid_x: &[Vector3<f64>],
        elements: &[BeamElement],
        beam: &[BeamNodeState],
        beam_offset: usize,
        with_tangent: bool,
        out: &mut CouplingEval,
    ) -> Result<(), MortarError> {
        let variant = self.config.variant;
        let cons = variant == Variant::Cons;
        let nb = beam.len();
        let surf = &self.surface;
        let normals = if cons { surf.averaged_normals(solid_x)? } else { Vec::new() };

        // Averaged-normal duals of all surface nodes of touched facets.
        let touched: BTreeSet<usize> = self.points.iter().map(|p| p.facet).collect();
        let mut node_duals: HashMap<usize, (Vec<usize>, [Dual2; 3])> = HashMap::new();
        // Per facet: union patch (solid ids) and d a / d x (3 nf x 3 nu).
        let mut facet_jac: HashMap<usize, (Vec<usize>, DMatrix<f64>)> = HashMap::new();
        if cons {
            let needed: BTreeSet<usize> =
                touched.iter().flat_map(|&f| surf.facets[f].surface_nodes.iter().copied()).collect();
            let list: Vec<usize> = needed.into_iter().collect();
            let duals: Vec<(Vec<usize>, [Dual2; 3])> =
                list.par_iter().map(|&k| surf.averaged_normal_dual(k, solid_x)).collect();
            node_duals = list.into_iter().zip(duals).collect();
            for &f in &touched {
                let sn = &surf.facets[f].surface_nodes;
                let mut union: Vec<usize> = sn.iter().flat_map(|k| node_duals[k].0.iter().copied()).collect();
                union.sort_unstable();
                union.dedup();
                let mut ja = DMatrix::zeros(3 * sn.len(), 3 * union.len());
                for (a, k) in sn.iter().enumerate() {
                    let (patch, comps) = &node_duals[k];
                    for c in 0..3 {
                        let g = comps[c].grad_slice();
                        for (i, n) in patch.iter().enumerate() {
                            let u = union.binary_search(n).unwrap();
                            for d in 0..3 {
                                ja[(3 * a + c, 3 * u + d)] = g.get(3 * i + d).copied().unwrap_or(0.0);
                            }
                        }
                    }
                }
                facet_jac.insert(f, (union, ja));
            }
        }

        // Interpolated normal per point as a dual in the facet's nodal
        // averaged normals.
        let nh_duals: Vec<Option<[Dual2; 3]>> = if cons {
            self.points
                .par_iter()
                .map(|p| {
                    let fc = &surf.facets[p.facet];
                    let mut vals = Vec::with_capacity(3 * fc.surface_nodes.len());
                    for &sn in &fc.surface_nodes {
                        vals.extend_from_slice(normals[sn].as_slice());
                    }
                    let v = Dual2::seed(&vals);
                    let mut m: V3<Dual2> = V3::zeros();
                    for (k, nk) in p.shape.iter().enumerate() {
                        let ak = V3::new(v[3 * k].clone(), v[3 * k + 1].clone(), v[3 * k + 2].clone());
                        m = m.add(&ak.scale_f(*nk));
                    }
                    Some(m.normalize().0)
                })
                .collect()
        } else {
            vec![None; self.points.len()]
        };

        // Pass 1: constraint vectors and Jacobians.
        let mut jac: Vec<BTreeMap<usize, Vector3<f64>>> = vec![BTreeMap::new(); nb];
        // (node, facet) -> d q_j / d a  (3 x 3 nf)
        let mut qa: BTreeMap<(usize, usize), DMatrix<f64>> = BTreeMap::new();
        for (p, nh) in self.points.iter().zip(&nh_duals) {
            let el = &elements[p.element];
            let fc = &surf.facets[p.facet];
            let s = [&beam[el.nodes[0]], &beam[el.nodes[1]]];
            let h = p.hermite;
            let r = h[0] * s[0].position + h[1] * s[0].tangent + h[2] * s[1].position + h[3] * s[1].tangent;
            let xs: Vector3<f64> = fc.nodes.iter().zip(&p.shape).map(|(&n, &nk)| nk * solid_x[n]).sum();
            let mut c = r - xs;
            match variant {
                Variant::Cons => {
                    let nv = nh.as_ref().unwrap();
                    c -= p.gap * Vector3::new(nv[0].value(), nv[1].value(), nv[2].value());
                }
                Variant::Ref => {}
                Variant::Disp => c -= p.offset0,
            }
            for (a, &j) in el.nodes.iter().enumerate() {
                let wj = p.weight * p.phi[a];
                if wj == 0.0 {
                    continue;
                }
                out.r_pos[j] += wj * c;
                let col = &mut jac[j];
                for (b, &n) in el.nodes.iter().enumerate() {
                    for k in 0..3 {
                        *col.entry(self.beam_dof(beam_offset, n, k)).or_default() +=
                            wj * h[2 * b] * Vector3::ith(k, 1.0);
                        *col.entry(self.beam_dof(beam_offset, n, 3 + k)).or_default() +=
                            wj * h[2 * b + 1] * Vector3::ith(k, 1.0);
                    }
                }
                for (&n, &nk) in fc.nodes.iter().zip(&p.shape) {
                    for k in 0..3 {
                        *col.entry(3 * n + k).or_default() -= wj * nk * Vector3::ith(k, 1.0);
                    }
                }
                if let Some(nv) = nh {
                    let m = qa.entry((j, p.facet)).or_insert_with(|| DMatrix::zeros(3, 3 * fc.nodes.len()));
                    for cc in 0..3 {
                        for (v, g) in nv[cc].grad_slice().iter().enumerate() {
                            m[(cc, v)] += wj * p.gap * g;
                        }
                    }
                }
            }
        }
        // chain the normal dependence: J_j -= (d q_j / d a) (d a / d x)
        for ((j, f), m) in &qa {
            let (union, ja) = &facet_jac[f];
            let contrib = m * ja;
            let col = &mut jac[*j];
            for (u, &n) in union.iter().enumerate() {
                for d in 0..3 {
                    let v = Vector3::new(contrib[(0, 3 * u + d)], contrib[(1, 3 * u + d)], contrib[(2, 3 * u + d)]);
                    *col.entry(3 * n + d).or_default() -= v;
                }
            }
        }

        // Multipliers, energy, forces, main tangent term.
        let eps = self.config.penalty_position;
        for j in 0..nb {
            if !self.active[j] {
                continue;
            }
            let kj = self.kappa[j];
            let lam = eps * out.r_pos[j] / kj;
            out.lambda_pos[j] = lam;
            out.energy += 0.5 * eps / kj * out.r_pos[j].norm_squared();
            let dofs: Vec<usize> = jac[j].keys().copied().collect();
            let mut jm = DMatrix::zeros(3, dofs.len());
            for (i, v) in jac[j].values().enumerate() {
                jm.set_column(i, v);
            }
            let grad = jm.transpose() * lam;
            let hess = if with_tangent { Some(jm.transpose() * &jm * (eps / kj)) } else { None };
            out.blocks.push(LocalBlock { dofs: dofs.clone(), grad, hess });
            out.jac_pos[j] = Some((dofs, jm));
        }

        // Pass 2: curvature of the normal field, - d2 (lambda . q).
        if cons && with_tangent {
            let mut per_facet: BTreeMap<usize, (DVector<f64>, DMatrix<f64>)> = BTreeMap::new();
            for (p, nh) in self.points.iter().zip(&nh_duals) {
                let el = &elements[p.element];
                let lam = p.phi[0] * out.lambda_pos[el.nodes[0]] + p.phi[1] * out.lambda_pos[el.nodes[1]];
                let cvec = p.weight * p.gap * lam;
                if cvec == Vector3::zeros() {
                    continue;
                }
                let nv = nh.as_ref().unwrap();
                let nvar = nv[0].nvars();
                let e = per_facet.entry(p.facet).or_insert_with(|| (DVector::zeros(nvar), DMatrix::zeros(nvar, nvar)));
                for cc in 0..3 {
                    for (v, g) in nv[cc].grad_slice().iter().enumerate() {
                        e.0[v] += cvec[cc] * g;
                    }
                    for (v, hh) in nv[cc].hess_slice().iter().enumerate() {
                        e.1[(v / nvar, v % nvar)] += cvec[cc] * hh;
                    }
                }
            }
            for (f, (ga, ha)) in per_facet {
                let (union, ja) = &facet_jac[&f];
                let mut hx = ja.transpose() * ha * ja;
                let sn = &surf.facets[f].surface_nodes;
                for (a, k) in sn.iter().enumerate() {
                    let (patch, comps) = &node_duals[k];
                    let np = 3 * patch.len();
                    let map: Vec<usize> = patch
                        .iter()
                        .flat_map(|n| {
                            let u = union.binary_search(n).unwrap();
                            [3 * u, 3 * u + 1, 3 * u + 2]
                        })
                        .collect();
                    for c in 0..3 {
                        let w = ga[3 * a + c];
                        let hs = comps[c].hess_slice();
                        if w == 0.0 || hs.is_empty() {
                            continue;
                        }
                        for r in 0..np {
                            for s in 0..np {
                                hx[(map[r], map[s])] += w * hs[r * np + s];
                            }
                        }
                    }
                }
                let dofs: Vec<usize> = union.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
                let nd = dofs.len();
                out.blocks.push(LocalBlock { dofs, grad: DVector::zeros(nd), hess: Some(-hx) });
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn rotational(
        &self,
        solid_x: &[Vector3<f64>],
        elements: &[BeamElement],
        beam: &[BeamNodeState],
        beam_offset: usize,
        with_tangent: bool,
        out: &mut CouplingEval,
    ) -> Result<(), MortarError> {
        let surf = &self.surface;
        // psi = rv(Lambda_Gamma Lambda_B^T) per point, dual in
        // (facet coordinates, spin of node 1, spin of node 2).
        let psis: Vec<Result<[Dual2; 3], MortarError>> = self
            .points
            .par_iter()
            .map(|p| {
                let el = &elements[p.element];
                let fc = &surf.facets[p.facet];
                let nf = fc.nodes.len();
                let mut vals = Vec::with_capacity(3 * nf + 6);
                for &n in &fc.nodes {
                    vals.extend_from_slice(solid_x[n].as_slice());
                }
                vals.extend_from_slice(&[0.0; 6]);
                let v = Dual2::seed(&vals);
                let v3 = |o: usize| V3::new(v[o].clone(), v[o + 1].clone(), v[o + 2].clone());
                let xs: Vec<V3<Dual2>> = (0..nf).map(|k| v3(3 * k)).collect();
                let (_, xa, xb) = facet_point_g(fc.kind, &xs, &p.surf_xi);
                let lg = p.frame.as_ref().expect("rotational coupling without surface frame").triad_g(&xa, &xb);
                let l1 = exp_g(&v3(3 * nf)).mul_f(&beam[el.nodes[0]].triad);
                let l2 = exp_g(&v3(3 * nf + 3)).mul_f(&beam[el.nodes[1]].triad);
                let phi = rv_g(&l2.mul(&l1.transpose()));
                let a = phi.norm_sq().value().sqrt();
                if a >= std::f64::consts::PI - GEODESIC_PI_MARGIN {
                    return Err(MortarError::BeamRotation { beam: self.beam, element: p.element, angle: a });
                }
                let lb = exp_g(&phi.scale_f(0.5 * (p.xi + 1.0))).mul(&l1);
                let psi = rv_g(&lg.mul(&lb.transpose()));
                let angle = psi.norm_sq().value().sqrt();
                if angle >= ROTATION_LIMIT {
                    return Err(MortarError::RotationRange { beam: self.beam, element: p.element, xi: p.xi, angle });
                }
                Ok(psi.0)
            })
            .collect();
        let psis: Vec<[Dual2; 3]> = psis.into_iter().collect::<Result<_, _>>()?;

        let point_dofs = |p: &CouplingPoint| -> Vec<usize> {
            let el = &elements[p.element];
            let mut d: Vec<usize> =
                surf.facets[p.facet].nodes.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
            for &n in &el.nodes {
                d.extend((6..9).map(|k| self.beam_dof(beam_offset, n, k)));
            }
            d
        };

        let nb = beam.len();
        let mut jac: Vec<BTreeMap<usize, Vector3<f64>>> = vec![BTreeMap::new(); nb];
        for (p, psi) in self.points.iter().zip(&psis) {
            let el = &elements[p.element];
            let dofs = point_dofs(p);
            let val = Vector3::new(psi[0].value(), psi[1].value(), psi[2].value());
            for (a, &j) in el.nodes.iter().enumerate() {
                let wj = p.weight * p.phi[a];
                out.r_rot[j] += wj * val;
                let col = &mut jac[j];
                for (v, &d) in dofs.iter().enumerate() {
                    let g = Vector3::new(psi[0].grad_slice()[v], psi[1].grad_slice()[v], psi[2].grad_slice()[v]);
                    *col.entry(d).or_default() += wj * g;
                }
            }
        }
        let eps = self.config.penalty_rotation;
        for j in 0..nb {
            if !self.active[j] {
                continue;
            }
            let kj = self.kappa[j];
            let lam = eps * out.r_rot[j] / kj;
            out.lambda_rot[j] = lam;
            out.energy += 0.5 * eps / kj * out.r_rot[j].norm_squared();
            let dofs: Vec<usize> = jac[j].keys().copied().collect();
            let mut jm = DMatrix::zeros(3, dofs.len());
            for (i, v) in jac[j].values().enumerate() {
                jm.set_column(i, v);
            }
            let grad = jm.transpose() * lam;
            let hess = if with_tangent { Some(jm.transpose() * &jm * (eps / kj)) } else { None };
            out.blocks.push(LocalBlock { dofs, grad, hess });
        }
        if with_tangent {
            for (p, psi) in self.points.iter().zip(&psis) {
                let el = &elements[p.element];
                let lam = p.phi[0] * out.lambda_rot[el.nodes[0]] + p.phi[1] * out.lambda_rot[el.nodes[1]];
                if lam == Vector3::zeros() {
                    continue;
                }
                let dofs = point_dofs(p);
                let n = dofs.len();
                let mut h = DMatrix::zeros(n, n);
                for c in 0..3 {
                    let w = p.weight * lam[c];
                    for (v, hh) in psi[c].hess_slice().iter().enumerate() {
                        h[(v / n, v % n)] += w * hh;
                    }
                }
                out.blocks.push(LocalBlock { dofs, grad: DVector::zeros(n), hess: Some(h) });
            }
        }
        Ok(())
    }
}

/// Current surface triad at a coupling point (for output and tests).
pub fn surface_triad(surface: &Surface, p: &CouplingPoint, solid_x: &[Vector3<f64>]) -> Option<Matrix3<f64>> {
    let fc = &surface.facets[p.facet];
    let g = facet_geometry(fc.kind, &surface.facet_coords(p.facet, solid_x), &p.surf_xi);
    Some(p.frame.as_ref()?.triad(&g.xa, &g.xb))
}
