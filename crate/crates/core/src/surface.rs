//! Solid boundary surfaces: facet extraction, averaged nodal normals, the
//! C0 interpolated normal field, closest-point projection of beam points,
//! and the surface triad that attaches an orthonormal frame to a projected
//! point.

use crate::autodiff::{Dual2, Scalar, M3, V3};
use crate::mesh::{FaceRef, SolidMesh};
use crate::shapes::FacetKind;
use crate::so3::Triad;
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use std::collections::{BTreeSet, HashMap, VecDeque};
use thiserror::Error;

/// Parameter-domain tolerance for accepting a projection on a facet.
pub const DOMAIN_TOL: f64 = 1e-8;
/// Maximum Newton iterations of the point projection.
pub const PROJECTION_MAX_ITER: usize = 20;
/// Minimum `|N x g1|` for the surface triad construction.
pub const TRIAD_PARALLEL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("face set references element {element} which does not exist")]
    UnknownElement { element: usize },
    #[error("face set references face {face} of element {element}, which has only {available} faces")]
    UnknownFace { element: usize, face: usize, available: usize },
    #[error("face {face} of element {element} is an interior face shared with another element")]
    InteriorFace { element: usize, face: usize },
    #[error("face {face} of element {element} is listed twice")]
    DuplicateFace { element: usize, face: usize },
    #[error("facet {facet} is not oriented outward with respect to its parent element")]
    Orientation { facet: usize },
    #[error("facet {facet} has a degenerate normal at node {node}")]
    DegenerateNormal { facet: usize, node: usize },
    #[error("projection of point ({x:.6}, {y:.6}, {z:.6}) did not converge on any candidate facet")]
    ProjectionFailed { x: f64, y: f64, z: f64 },
    #[error("surface normal is parallel to the beam tangent (|N x g1| = {value:.3e})")]
    ParallelTangent { value: f64 },
}

/// One boundary facet.
#[derive(Clone, Debug)]
pub struct Facet {
    pub kind: FacetKind,
    /// Solid node ids in facet order.
    pub nodes: Vec<usize>,
    /// Indices into [`Surface::nodes`].
    pub surface_nodes: Vec<usize>,
    pub face: FaceRef,
}

/// A set of outward-oriented boundary facets with node adjacency.
#[derive(Clone, Debug)]
pub struct Surface {
    pub facets: Vec<Facet>,
    /// Solid node ids of the surface nodes.
    pub nodes: Vec<usize>,
    /// Solid node id -> surface node index.
    pub node_index: HashMap<usize, usize>,
    /// Facets incident to each surface node, with the node's local index.
    pub node_facets: Vec<Vec<(usize, usize)>>,
    /// Facets sharing at least one node with each facet.
    pub facet_neighbors: Vec<Vec<usize>>,
}

/// Position and parameter derivatives of a facet at `p`.
pub fn facet_point_g<T: Scalar>(kind: FacetKind, xs: &[V3<T>], p: &[f64; 2]) -> (V3<T>, V3<T>, V3<T>) {
    let (n, d, _) = kind.eval(p);
    let mut x = V3::zeros();
    let mut xa = V3::zeros();
    let mut xb = V3::zeros();
    for (k, xk) in xs.iter().enumerate() {
        x = x.add(&xk.scale_f(n[k]));
        xa = xa.add(&xk.scale_f(d[k][0]));
        xb = xb.add(&xk.scale_f(d[k][1]));
    }
    (x, xa, xb)
}

/// Plain-`f64` facet geometry: position, first and second derivatives.
pub struct FacetGeometry {
    pub x: Vector3<f64>,
    pub xa: Vector3<f64>,
    pub xb: Vector3<f64>,
    pub xaa: Vector3<f64>,
    pub xab: Vector3<f64>,
    pub xbb: Vector3<f64>,
}

pub fn facet_geometry(kind: FacetKind, xs: &[Vector3<f64>], p: &[f64; 2]) -> FacetGeometry {
    let (n, d, dd) = kind.eval(p);
    let mut g = FacetGeometry {
        x: Vector3::zeros(),
        xa: Vector3::zeros(),
        xb: Vector3::zeros(),
        xaa: Vector3::zeros(),
        xab: Vector3::zeros(),
        xbb: Vector3::zeros(),
    };
    for (k, xk) in xs.iter().enumerate() {
        g.x += n[k] * xk;
        g.xa += d[k][0] * xk;
        g.xb += d[k][1] * xk;
        g.xaa += dd[k][0] * xk;
        g.xab += dd[k][1] * xk;
        g.xbb += dd[k][2] * xk;
    }
    g
}

impl Surface {
    /// Builds the surface of the selected faces. Facets are oriented outward
    /// (checked against the parent element centroid); interior or duplicate
    /// faces are rejected.
    pub fn extract(mesh: &SolidMesh, faces: &[FaceRef]) -> Result<Surface, SurfaceError> {
        let mult = mesh.face_multiplicity();
        let mut seen = BTreeSet::new();
        let mut facets = Vec::with_capacity(faces.len());
        for &f in faces {
            let el = mesh.elements.get(f.element).ok_or(SurfaceError::UnknownElement { element: f.element })?;
            let nf = el.kind.faces().len();
            if f.face >= nf {
                return Err(SurfaceError::UnknownFace { element: f.element, face: f.face, available: nf });
            }
            if !seen.insert(f) {
                return Err(SurfaceError::DuplicateFace { element: f.element, face: f.face });
            }
            if mult.get(&mesh.face_key(f)).copied().unwrap_or(0) > 1 {
                return Err(SurfaceError::InteriorFace { element: f.element, face: f.face });
            }
            let kind = el.kind.facet_kind();
            let mut nodes = mesh.face_nodes(f);
            // orientation check against the parent centroid
            let xs: Vec<Vector3<f64>> = nodes.iter().map(|&n| mesh.nodes[n]).collect();
            let g = facet_geometry(kind, &xs, &kind.centroid());
            let centroid =
                mesh.element_coords(f.element).iter().fold(Vector3::zeros(), |a, p| a + p) / el.nodes.len() as f64;
            if g.xa.cross(&g.xb).dot(&(g.x - centroid)) < 0.0 {
                reverse_facet(kind, &mut nodes);
            }
            facets.push(Facet { kind, nodes, surface_nodes: Vec::new(), face: f });
        }
        let mut node_index = HashMap::new();
        let mut snodes = Vec::new();
        for fc in facets.iter_mut() {
            fc.surface_nodes = fc
                .nodes
                .iter()
                .map(|&n| {
                    *node_index.entry(n).or_insert_with(|| {
                        snodes.push(n);
                        snodes.len() - 1
                    })
                })
                .collect();
        }
        let mut node_facets = vec![Vec::new(); snodes.len()];
        for (fi, fc) in facets.iter().enumerate() {
            for (l, &sn) in fc.surface_nodes.iter().enumerate() {
                node_facets[sn].push((fi, l));
            }
        }
        let facet_neighbors = facets
            .iter()
            .enumerate()
            .map(|(fi, fc)| {
                let mut s = BTreeSet::new();
                for &sn in &fc.surface_nodes {
                    for &(o, _) in &node_facets[sn] {
                        if o != fi {
                            s.insert(o);
                        }
                    }
                }
                s.into_iter().collect()
            })
            .collect();
        let surf = Surface { facets, nodes: snodes, node_index, node_facets, facet_neighbors };
        for (fi, fc) in surf.facets.iter().enumerate() {
            let xs: Vec<Vector3<f64>> = fc.nodes.iter().map(|&n| mesh.nodes[n]).collect();
            let g = facet_geometry(fc.kind, &xs, &fc.kind.centroid());
            let centroid = mesh.element_coords(fc.face.element).iter().fold(Vector3::zeros(), |a, p| a + p)
                / mesh.elements[fc.face.element].nodes.len() as f64;
            if g.xa.cross(&g.xb).dot(&(g.x - centroid)) <= 0.0 {
                return Err(SurfaceError::Orientation { facet: fi });
            }
        }
        Ok(surf)
    }

    /// Current coordinates of a facet's nodes.
    pub fn facet_coords(&self, facet: usize, positions: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        self.facets[facet].nodes.iter().map(|&n| positions[n]).collect()
    }

    /// Unit normal of facet `e` at its local node `k`.
    pub fn facet_node_normal(&self, facet: usize, k: usize, positions: &[Vector3<f64>]) -> Vector3<f64> {
        let fc = &self.facets[facet];
        let p = fc.kind.node_coords()[k];
        let g = facet_geometry(fc.kind, &self.facet_coords(facet, positions), &p);
        g.xa.cross(&g.xb).normalize()
    }

    /// Averaged nodal normals `normalize(sum_e n^e_k)` for every surface node.
    pub fn averaged_normals(&self, positions: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>, SurfaceError> {
        let mut out = vec![Vector3::zeros(); self.nodes.len()];
        for (fi, fc) in self.facets.iter().enumerate() {
            let xs = self.facet_coords(fi, positions);
            for (k, p) in fc.kind.node_coords().iter().enumerate() {
                let g = facet_geometry(fc.kind, &xs, p);
                let c = g.xa.cross(&g.xb);
                let nrm = c.norm();
                if !(nrm > 0.0) {
                    return Err(SurfaceError::DegenerateNormal { facet: fi, node: fc.nodes[k] });
                }
                out[fc.surface_nodes[k]] += c / nrm;
            }
        }
        for (k, v) in out.iter_mut().enumerate() {
            let n = v.norm();
            if !(n > 1e-12) {
                let (fi, _) = self.node_facets[k][0];
                return Err(SurfaceError::DegenerateNormal { facet: fi, node: self.nodes[k] });
            }
            *v /= n;
        }
        Ok(out)
    }

    /// Interpolated normal `n_h = normalize(sum_k N_k a_k)` on a facet and its
    /// parameter derivatives.
    pub fn interpolated_normal(
        &self,
        facet: usize,
        p: &[f64; 2],
        normals: &[Vector3<f64>],
    ) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let fc = &self.facets[facet];
        let (n, d, _) = fc.kind.eval(p);
        let mut m = Vector3::zeros();
        let mut ma = Vector3::zeros();
        let mut mb = Vector3::zeros();
        for (k, &sn) in fc.surface_nodes.iter().enumerate() {
            m += n[k] * normals[sn];
            ma += d[k][0] * normals[sn];
            mb += d[k][1] * normals[sn];
        }
        let len = m.norm();
        let nh = m / len;
        let proj = Matrix3::identity() - nh * nh.transpose();
        (nh, proj * ma / len, proj * mb / len)
    }

    /// Averaged normal of surface node `k` as a dual in the coordinates of
    /// its patch (all nodes of the facets incident to `k`). Returns the patch
    /// solid node ids and the three normal components; variable `3 i + c` is
    /// coordinate `c` of patch node `i`.
    pub fn averaged_normal_dual(&self, k: usize, positions: &[Vector3<f64>]) -> (Vec<usize>, [Dual2; 3]) {
        let mut patch: Vec<usize> =
            self.node_facets[k].iter().flat_map(|&(fi, _)| self.facets[fi].nodes.iter().copied()).collect();
        patch.sort_unstable();
        patch.dedup();
        let np = 3 * patch.len();
        let mut sum: [Dual2; 3] = std::array::from_fn(|_| Dual2::constant(0.0));
        for &(fi, local) in &self.node_facets[k] {
            let fc = &self.facets[fi];
            let nf = fc.nodes.len();
            let mut vals = Vec::with_capacity(3 * nf);
            for &n in &fc.nodes {
                vals.extend_from_slice(positions[n].as_slice());
            }
            let v = Dual2::seed(&vals);
            let xs: Vec<V3<Dual2>> =
                (0..nf).map(|i| V3::new(v[3 * i].clone(), v[3 * i + 1].clone(), v[3 * i + 2].clone())).collect();
            let p = fc.kind.node_coords()[local];
            let (_, xa, xb) = facet_point_g(fc.kind, &xs, &p);
            let ne = xa.cross(&xb).normalize();
            let map: Vec<usize> = fc
                .nodes
                .iter()
                .flat_map(|n| {
                    let i = patch.binary_search(n).unwrap();
                    [3 * i, 3 * i + 1, 3 * i + 2]
                })
                .collect();
            for c in 0..3 {
                sum[c] += ne.0[c].embed(&map, np);
            }
        }
        let a = V3(sum).normalize();
        (patch, a.0)
    }

    /// Axis-aligned bounding box of a facet's nodes.
    fn facet_aabb(&self, facet: usize, positions: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for &n in &self.facets[facet].nodes {
            lo = lo.inf(&positions[n]);
            hi = hi.sup(&positions[n]);
        }
        (lo, hi)
    }

    /// Projects `point` onto one facet along the interpolated normal field:
    /// solves `X(xi, eta) + g n_h(xi, eta) = point`. Returns `None` if Newton
    /// does not converge within [`PROJECTION_MAX_ITER`] iterations.
    pub fn project_on_facet(
        &self,
        facet: usize,
        point: &Vector3<f64>,
        positions: &[Vector3<f64>],
        normals: &[Vector3<f64>],
    ) -> Option<Projection> {
        let fc = &self.facets[facet];
        let xs = self.facet_coords(facet, positions);
        let c = fc.kind.centroid();
        let mut p = [c[0], c[1]];
        let g0 = facet_geometry(fc.kind, &xs, &p);
        let (n0, _, _) = self.interpolated_normal(facet, &p, normals);
        let mut gap = (point - g0.x).dot(&n0);
        let scale = (g0.xa.norm() + g0.xb.norm()).max(1e-300);
        for _ in 0..PROJECTION_MAX_ITER {
            let g = facet_geometry(fc.kind, &xs, &p);
            let (nh, na, nb) = self.interpolated_normal(facet, &p, normals);
            let r = g.x + gap * nh - point;
            let j = Matrix3::from_columns(&[g.xa + gap * na, g.xb + gap * nb, nh]);
            let delta = j.lu().solve(&(-r))?;
            p[0] += delta[0];
            p[1] += delta[1];
            gap += delta[2];
            if !(p[0].is_finite() && p[1].is_finite() && gap.is_finite()) || p[0].abs() > 1e3 || p[1].abs() > 1e3 {
                return None;
            }
            if delta[0].abs().max(delta[1].abs()) < 1e-14 && delta[2].abs() < 1e-14 * scale.max(gap.abs()) {
                let g = facet_geometry(fc.kind, &xs, &p);
                let (nh, _, _) = self.interpolated_normal(facet, &p, normals);
                return Some(Projection {
                    facet,
                    xi: p,
                    gap,
                    point: g.x,
                    normal: nh,
                    outside: fc.kind.outside_distance(&p),
                });
            }
        }
        None
    }

    /// Closest-point projection with facet search: the hint facet and its
    /// neighbourhood first (breadth-first), then all facets whose bounding box
    /// inflated by `search_radius` contains the point. Among accepting facets
    /// (inside the parameter domain within [`DOMAIN_TOL`]) the smallest
    /// `|gap|` wins, ties going to the lowest facet id. `Ok(None)` means the
    /// point projects outside the surface.
    pub fn project(
        &self,
        point: &Vector3<f64>,
        hint: Option<usize>,
        search_radius: f64,
        positions: &[Vector3<f64>],
        normals: &[Vector3<f64>],
    ) -> Result<Option<Projection>, SurfaceError> {
        let mut candidates: Vec<usize> = Vec::new();
        let mut visited = vec![false; self.facets.len()];
        if let Some(h) = hint.filter(|&h| h < self.facets.len()) {
            // two rings of neighbours around the hint
            let mut queue = VecDeque::from([(h, 0usize)]);
            visited[h] = true;
            while let Some((f, depth)) = queue.pop_front() {
                candidates.push(f);
                if depth < 2 {
                    for &o in &self.facet_neighbors[f] {
                        if !visited[o] {
                            visited[o] = true;
                            queue.push_back((o, depth + 1));
                        }
                    }
                }
            }
        }
        let mut accepted = self.try_candidates(&candidates, point, search_radius, positions, normals);
        let mut any_converged = accepted.1;
        if accepted.0.is_none() {
            let rest: Vec<usize> = (0..self.facets.len())
                .filter(|&f| !visited[f])
                .filter(|&f| {
                    let (lo, hi) = self.facet_aabb(f, positions);
                    (0..3).all(|k| point[k] >= lo[k] - search_radius && point[k] <= hi[k] + search_radius)
                })
                .collect();
            let r = self.try_candidates(&rest, point, search_radius, positions, normals);
            any_converged |= r.1;
            accepted = r;
        }
        match accepted.0 {
            Some(p) => Ok(Some(p)),
            None if !any_converged && self.within_footprint(point, search_radius, positions) => {
                Err(SurfaceError::ProjectionFailed { x: point.x, y: point.y, z: point.z })
            }
            None => Ok(None),
        }
    }

    fn try_candidates(
        &self,
        cands: &[usize],
        point: &Vector3<f64>,
        search_radius: f64,
        positions: &[Vector3<f64>],
        normals: &[Vector3<f64>],
    ) -> (Option<Projection>, bool) {
        let mut best: Option<Projection> = None;
        let mut converged = false;
        for &f in cands {
            let Some(pr) = self.project_on_facet(f, point, positions, normals) else { continue };
            converged = true;
            if pr.outside > DOMAIN_TOL || pr.gap.abs() > search_radius {
                continue;
            }
            best = match best {
                None => Some(pr),
                Some(b) => {
                    let tol = 1e-10 * (1.0 + b.gap.abs());
                    if pr.gap.abs() < b.gap.abs() - tol
                        || ((pr.gap.abs() - b.gap.abs()).abs() <= tol && pr.facet < b.facet)
                    {
                        Some(pr)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        (best, converged)
    }

    fn within_footprint(&self, point: &Vector3<f64>, search_radius: f64, positions: &[Vector3<f64>]) -> bool {
        (0..self.facets.len()).any(|f| {
            let (lo, hi) = self.facet_aabb(f, positions);
            (0..3).all(|k| point[k] >= lo[k] - search_radius && point[k] <= hi[k] + search_radius)
        })
    }

    /// Total reference area of the surface (Gauss quadrature).
    pub fn area(&self, positions: &[Vector3<f64>]) -> f64 {
        let mut a = 0.0;
        for (fi, fc) in self.facets.iter().enumerate() {
            let xs = self.facet_coords(fi, positions);
            let rule = fc.kind.quadrature();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let g = facet_geometry(fc.kind, &xs, p);
                a += w * g.xa.cross(&g.xb).norm();
            }
        }
        a
    }
}

fn reverse_facet(kind: FacetKind, nodes: &mut [usize]) {
    let nc = kind.num_corners();
    let corners: Vec<usize> = nodes[..nc].to_vec();
    let mids: Vec<usize> = if nodes.len() > nc { nodes[nc..nc + nc.min(nodes.len() - nc)].to_vec() } else { vec![] };
    // corners 0, n-1, ..., 1; edge (i,i+1) mids reversed accordingly
    for i in 0..nc {
        nodes[i] = corners[(nc - i) % nc];
    }
    if !mids.is_empty() {
        for i in 0..nc {
            // new edge i connects new corners i and i+1 = old corners (nc-i)%nc and (nc-i-1)%nc
            nodes[nc + i] = mids[(2 * nc - i - 1) % nc];
        }
    }
}

/// Result of projecting a point onto the surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub facet: usize,
    pub xi: [f64; 2],
    /// Signed gap along the interpolated normal (positive outside).
    pub gap: f64,
    /// Projected surface point.
    pub point: Vector3<f64>,
    /// Interpolated normal at the projected point.
    pub normal: Vector3<f64>,
    /// Distance outside the facet's parameter domain (<= 0 inside).
    pub outside: f64,
}

/// Reference data of the surface triad at a projected point.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFrame {
    /// In-plane coefficients with `g~0 = a X_xi + b X_eta`.
    pub coeffs: [f64; 2],
    /// Reference surface-fixed triad `[g~0, N, g~0 x N]`.
    pub tilde0: Triad,
    /// `tilde0^T Lambda_B0`, the constant offset to the beam reference triad.
    pub offset: Matrix3<f64>,
}

impl SurfaceFrame {
    /// Builds the frame from reference surface directors at the projected
    /// point and the reference beam triad there. `N` is the point-wise
    /// facet normal.
    pub fn new(xa: &Vector3<f64>, xb: &Vector3<f64>, beam_triad0: &Triad) -> Result<SurfaceFrame, SurfaceError> {
        let n = xa.cross(xb).normalize();
        let g1 = beam_triad0.column(0).into_owned();
        let c = n.cross(&g1);
        let cn = c.norm();
        if cn <= TRIAD_PARALLEL_TOL {
            return Err(SurfaceError::ParallelTangent { value: cn });
        }
        let g0 = c / cn;
        let metric = Matrix2::new(xa.dot(xa), xa.dot(xb), xa.dot(xb), xb.dot(xb));
        let rhs = Vector2::new(xa.dot(&g0), xb.dot(&g0));
        let ab = metric.lu().solve(&rhs).ok_or(SurfaceError::ParallelTangent { value: 0.0 })?;
        let tilde0 = Matrix3::from_columns(&[g0, n, g0.cross(&n)]);
        Ok(SurfaceFrame { coeffs: [ab[0], ab[1]], tilde0, offset: tilde0.transpose() * beam_triad0 })
    }

    /// Current surface triad from current surface directors (generic).
    pub fn triad_g<T: Scalar>(&self, xa: &V3<T>, xb: &V3<T>) -> M3<T> {
        let v = xa.scale_f(self.coeffs[0]).add(&xb.scale_f(self.coeffs[1]));
        self.triad_from_vectors_g(&v, &xa.cross(xb))
    }

    /// Current surface triad given the pushed-forward direction `F g~0`
    /// (any positive multiple) and a (not necessarily unit) current normal.
    pub fn triad_from_vectors_g<T: Scalar>(&self, fg: &V3<T>, normal: &V3<T>) -> M3<T> {
        let g = fg.normalize();
        let n = normal.normalize();
        let t = M3::from_cols(&g, &n, &g.cross(&n));
        t.mul_f(&self.offset)
    }

    /// Current surface triad from current surface directors.
    pub fn triad(&self, xa: &Vector3<f64>, xb: &Vector3<f64>) -> Triad {
        self.triad_g(&V3::<f64>::from_f64(xa), &V3::from_f64(xb)).values()
    }

    /// Current surface triad from a deformation gradient and current normal;
    /// only the in-plane action `F g~0` enters.
    pub fn triad_from_deformation(&self, f: &Matrix3<f64>, normal: &Vector3<f64>) -> Triad {
        let fg = f * self.tilde0.column(0);
        self.triad_from_vectors_g(&V3::<f64>::from_f64(&fg), &V3::from_f64(normal)).values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SolidElement;
    use crate::shapes::ElementKind;
    use crate::so3::{exp_map, orthonormality_defect};

    fn unit_cube() -> SolidMesh {
        let kind = ElementKind::Hex8;
        SolidMesh {
            nodes: kind.node_coords().iter().map(|c| Vector3::new(c[0] + 1.0, c[1] + 1.0, c[2] + 1.0) * 0.5).collect(),
            elements: vec![SolidElement { kind, nodes: (0..8).collect() }],
        }
    }

    #[test]
    fn cube_faces_have_outward_normals() {
        let mesh = unit_cube();
        let faces: Vec<FaceRef> = (0..6).map(|f| FaceRef { element: 0, face: f }).collect();
        let s = Surface::extract(&mesh, &faces).unwrap();
        assert_eq!(s.nodes.len(), 8);
        let expect = [-Vector3::x(), Vector3::x(), -Vector3::y(), Vector3::y(), -Vector3::z(), Vector3::z()];
        for (fi, e) in expect.iter().enumerate() {
            let n = s.facet_node_normal(fi, 0, &mesh.nodes);
            assert!((n - e).norm() < 1e-14);
        }
        // corner averaged normal points along the diagonal
        let a = s.averaged_normals(&mesh.nodes).unwrap();
        let k = s.node_index[&6];
        assert!((a[k] - Vector3::repeat(1.0).normalize()).norm() < 1e-14);
    }

    #[test]
    fn reversed_face_order_is_fixed() {
        for kind in ElementKind::ALL {
            let fk = kind.facet_kind();
            let mut nodes: Vec<usize> = (0..fk.num_nodes()).collect();
            reverse_facet(fk, &mut nodes);
            let coords = fk.node_coords();
            // reversed facet must still be a consistent facet: the mid node of
            // each edge lies between its corners
            let nc = fk.num_corners();
            if nodes.len() > nc {
                for e in 0..nc {
                    let a = coords[nodes[e]];
                    let b = coords[nodes[(e + 1) % nc]];
                    let m = coords[nodes[nc + e]];
                    assert!(((a[0] + b[0]) / 2.0 - m[0]).abs() < 1e-14 && ((a[1] + b[1]) / 2.0 - m[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn interior_face_is_rejected() {
        let mut mesh = unit_cube();
        let kind = ElementKind::Hex8;
        // second cube stacked in +z sharing face 5 of the first
        for c in kind.node_coords().iter().skip(4) {
            mesh.nodes.push(Vector3::new(c[0] + 1.0, c[1] + 1.0, c[2] + 3.0) * 0.5);
        }
        mesh.elements.push(SolidElement { kind, nodes: vec![4, 5, 6, 7, 8, 9, 10, 11] });
        let err = Surface::extract(&mesh, &[FaceRef { element: 0, face: 5 }]).unwrap_err();
        assert!(matches!(err, SurfaceError::InteriorFace { element: 0, face: 5 }));
        assert!(matches!(
            Surface::extract(&mesh, &[FaceRef { element: 4, face: 0 }]),
            Err(SurfaceError::UnknownElement { .. })
        ));
    }

    #[test]
    fn projection_onto_top_face_returns_gap_and_parameters() {
        let mesh = unit_cube();
        let s = Surface::extract(&mesh, &[FaceRef { element: 0, face: 5 }]).unwrap();
        let a = s.averaged_normals(&mesh.nodes).unwrap();
        let p = s.project(&Vector3::new(0.3, 0.6, 1.25), None, 1.0, &mesh.nodes, &a).unwrap().unwrap();
        assert!((p.gap - 0.25).abs() < 1e-14);
        assert!((p.point - Vector3::new(0.3, 0.6, 1.0)).norm() < 1e-14);
        // below the surface: negative gap
        let q = s.project(&Vector3::new(0.3, 0.6, 0.9), Some(0), 1.0, &mesh.nodes, &a).unwrap().unwrap();
        assert!((q.gap + 0.1).abs() < 1e-14);
        // beyond the edge: outside
        assert!(s.project(&Vector3::new(1.3, 0.6, 1.2), None, 1.0, &mesh.nodes, &a).unwrap().is_none());
    }

    #[test]
    fn surface_triad_reproduces_beam_triad_in_reference() {
        let xa = Vector3::new(0.5, 0.0, 0.1);
        let xb = Vector3::new(0.05, 0.4, -0.1);
        let lb = exp_map(&Vector3::new(0.2, 0.3, -0.4));
        let fr = SurfaceFrame::new(&xa, &xb, &lb).unwrap();
        assert!((fr.triad(&xa, &xb) - lb).abs().max() < 1e-14);
        assert!(orthonormality_defect(&fr.tilde0) < 1e-14);
    }

    #[test]
    fn surface_triad_rejects_normal_tangent() {
        let xa = Vector3::x();
        let xb = Vector3::y();
        let lb = crate::so3::smallest_rotation_from_e1(&Vector3::z());
        assert!(matches!(SurfaceFrame::new(&xa, &xb, &lb), Err(SurfaceError::ParallelTangent { .. })));
    }
}
