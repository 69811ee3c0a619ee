//! Lagrange/serendipity shape functions for solid elements and their
//! boundary facets, node numbering, and outward-oriented face tables.
//!
//! Node numbering follows the VTK conventions for every element kind so that
//! meshes can be exported without reordering.

use crate::quadrature::{hex_rule, quad_rule, tet_rule, tri_rule, Rule};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Volume element kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Hex8,
    Hex20,
    Hex27,
    Tet4,
    Tet10,
}

/// Boundary facet kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetKind {
    Quad4,
    Quad8,
    Quad9,
    Tri3,
    Tri6,
}

const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];
const HEX_EDGES: [(usize, usize); 12] =
    [(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7)];
const HEX27_FACES: [[f64; 3]; 7] = [
    [0.0, -1.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0],
];
const TET_CORNERS: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
const TET_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

fn mid(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

impl ElementKind {
    pub const ALL: [ElementKind; 5] =
        [ElementKind::Hex8, ElementKind::Hex20, ElementKind::Hex27, ElementKind::Tet4, ElementKind::Tet10];

    pub fn num_nodes(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Hex20 => 20,
            ElementKind::Hex27 => 27,
            ElementKind::Tet4 => 4,
            ElementKind::Tet10 => 10,
        }
    }

    pub fn is_hex(self) -> bool {
        matches!(self, ElementKind::Hex8 | ElementKind::Hex20 | ElementKind::Hex27)
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Hex8 => "hex8",
            ElementKind::Hex20 => "hex20",
            ElementKind::Hex27 => "hex27",
            ElementKind::Tet4 => "tet4",
            ElementKind::Tet10 => "tet10",
        }
    }

    /// VTK cell type id.
    pub fn vtk_type(self) -> u8 {
        match self {
            ElementKind::Hex8 => 12,
            ElementKind::Hex20 => 25,
            ElementKind::Hex27 => 29,
            ElementKind::Tet4 => 10,
            ElementKind::Tet10 => 24,
        }
    }

    /// Natural coordinates of the element nodes.
    pub fn node_coords(self) -> Vec<[f64; 3]> {
        match self {
            ElementKind::Hex8 => HEX_CORNERS.to_vec(),
            ElementKind::Hex20 | ElementKind::Hex27 => {
                let mut c = HEX_CORNERS.to_vec();
                c.extend(HEX_EDGES.iter().map(|&(a, b)| mid(HEX_CORNERS[a], HEX_CORNERS[b])));
                if self == ElementKind::Hex27 {
                    c.extend(HEX27_FACES.iter().copied());
                }
                c
            }
            ElementKind::Tet4 => TET_CORNERS.to_vec(),
            ElementKind::Tet10 => {
                let mut c = TET_CORNERS.to_vec();
                c.extend(TET_EDGES.iter().map(|&(a, b)| mid(TET_CORNERS[a], TET_CORNERS[b])));
                c
            }
        }
    }

    /// Centroid of the natural domain.
    pub fn natural_centroid(self) -> [f64; 3] {
        if self.is_hex() {
            [0.0; 3]
        } else {
            [0.25; 3]
        }
    }

    /// Default volume quadrature.
    pub fn quadrature(self) -> Rule<3> {
        match self {
            ElementKind::Hex8 => hex_rule(2),
            ElementKind::Hex20 | ElementKind::Hex27 => hex_rule(3),
            ElementKind::Tet4 => tet_rule(1),
            ElementKind::Tet10 => tet_rule(4),
        }
    }

    /// Shape function values and natural derivatives at `xi`.
    pub fn eval(self, xi: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        match self {
            ElementKind::Hex8 => {
                let mut n = Vec::with_capacity(8);
                let mut d = Vec::with_capacity(8);
                for c in HEX_CORNERS.iter() {
                    let a = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
                    n.push(a[0] * a[1] * a[2] / 8.0);
                    d.push([c[0] * a[1] * a[2] / 8.0, a[0] * c[1] * a[2] / 8.0, a[0] * a[1] * c[2] / 8.0]);
                }
                (n, d)
            }
            ElementKind::Hex27 => {
                let coords = self.node_coords();
                let mut n = Vec::with_capacity(27);
                let mut d = Vec::with_capacity(27);
                for c in coords.iter() {
                    let l: [(f64, f64); 3] = std::array::from_fn(|k| lagrange_quadratic(c[k], xi[k]));
                    n.push(l[0].0 * l[1].0 * l[2].0);
                    d.push([l[0].1 * l[1].0 * l[2].0, l[0].0 * l[1].1 * l[2].0, l[0].0 * l[1].0 * l[2].1]);
                }
                (n, d)
            }
            ElementKind::Hex20 => {
                let coords = self.node_coords();
                let mut n = Vec::with_capacity(20);
                let mut d = Vec::with_capacity(20);
                let (x, y, z) = (xi[0], xi[1], xi[2]);
                for c in coords.iter() {
                    let (a, b, e) = (c[0], c[1], c[2]);
                    if a != 0.0 && b != 0.0 && e != 0.0 {
                        let (p, q, r) = (1.0 + a * x, 1.0 + b * y, 1.0 + e * z);
                        let s = a * x + b * y + e * z - 2.0;
                        n.push(p * q * r * s / 8.0);
                        d.push([a * q * r * (s + p) / 8.0, b * p * r * (s + q) / 8.0, e * p * q * (s + r) / 8.0]);
                    } else if a == 0.0 {
                        let (q, r) = (1.0 + b * y, 1.0 + e * z);
                        n.push((1.0 - x * x) * q * r / 4.0);
                        d.push([-2.0 * x * q * r / 4.0, (1.0 - x * x) * b * r / 4.0, (1.0 - x * x) * q * e / 4.0]);
                    } else if b == 0.0 {
                        let (p, r) = (1.0 + a * x, 1.0 + e * z);
                        n.push((1.0 - y * y) * p * r / 4.0);
                        d.push([(1.0 - y * y) * a * r / 4.0, -2.0 * y * p * r / 4.0, (1.0 - y * y) * p * e / 4.0]);
                    } else {
                        let (p, q) = (1.0 + a * x, 1.0 + b * y);
                        n.push((1.0 - z * z) * p * q / 4.0);
                        d.push([(1.0 - z * z) * a * q / 4.0, (1.0 - z * z) * p * b / 4.0, -2.0 * z * p * q / 4.0]);
                    }
                }
                (n, d)
            }
            ElementKind::Tet4 => {
                let l0 = 1.0 - xi[0] - xi[1] - xi[2];
                (
                    vec![l0, xi[0], xi[1], xi[2]],
                    vec![[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                )
            }
            ElementKind::Tet10 => {
                let l = [1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]];
                let dl = [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
                let mut n = Vec::with_capacity(10);
                let mut d = Vec::with_capacity(10);
                for i in 0..4 {
                    n.push(l[i] * (2.0 * l[i] - 1.0));
                    d.push(std::array::from_fn(|k| (4.0 * l[i] - 1.0) * dl[i][k]));
                }
                for &(i, j) in TET_EDGES.iter() {
                    n.push(4.0 * l[i] * l[j]);
                    d.push(std::array::from_fn(|k| 4.0 * (dl[i][k] * l[j] + l[i] * dl[j][k])));
                }
                (n, d)
            }
        }
    }

    /// Facet kind of the element's boundary faces.
    pub fn facet_kind(self) -> FacetKind {
        match self {
            ElementKind::Hex8 => FacetKind::Quad4,
            ElementKind::Hex20 => FacetKind::Quad8,
            ElementKind::Hex27 => FacetKind::Quad9,
            ElementKind::Tet4 => FacetKind::Tri3,
            ElementKind::Tet10 => FacetKind::Tri6,
        }
    }

    /// Local node lists of the element faces, ordered so that the facet
    /// parameterization's normal `X_xi x X_eta` points out of the element for
    /// positively oriented elements. Hex faces are `-x, +x, -y, +y, -z, +z`;
    /// tet face `i` is opposite corner `i`.
    pub fn faces(self) -> &'static [Vec<usize>] {
        static CACHE: [OnceLock<Vec<Vec<usize>>>; 5] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let slot = ElementKind::ALL.iter().position(|&k| k == self).unwrap();
        CACHE[slot].get_or_init(|| self.compute_faces())
    }

    fn compute_faces(self) -> Vec<Vec<usize>> {
        let coords = self.node_coords();
        let find = |p: [f64; 3]| -> usize {
            coords
                .iter()
                .position(|c| (0..3).all(|k| (c[k] - p[k]).abs() < 1e-12))
                .expect("face node not found in element table")
        };
        let centroid = self.natural_centroid();
        let corner_sets: Vec<Vec<usize>> = if self.is_hex() {
            let mut v = Vec::new();
            for axis in 0..3 {
                for side in [-1.0, 1.0] {
                    v.push((0..8).filter(|&i| HEX_CORNERS[i][axis] == side).collect());
                }
            }
            v
        } else {
            (0..4).map(|opp| (0..4).filter(|&i| i != opp).collect()).collect()
        };
        let fk = self.facet_kind();
        corner_sets
            .into_iter()
            .map(|corners| {
                let pts: Vec<[f64; 3]> = corners.iter().map(|&i| coords[i]).collect();
                let nc = pts.len() as f64;
                let fc: [f64; 3] = std::array::from_fn(|k| pts.iter().map(|p| p[k]).sum::<f64>() / nc);
                let out: [f64; 3] = std::array::from_fn(|k| fc[k] - centroid[k]);
                // order corners cyclically around the face centre
                let (u, w) = plane_basis(&out);
                let mut idx: Vec<usize> = (0..corners.len()).collect();
                idx.sort_by(|&a, &b| {
                    let ang = |p: &[f64; 3]| {
                        let r = [p[0] - fc[0], p[1] - fc[1], p[2] - fc[2]];
                        dot(&r, &w).atan2(dot(&r, &u))
                    };
                    ang(&pts[a]).partial_cmp(&ang(&pts[b])).unwrap()
                });
                let mut ordered: Vec<usize> = idx.iter().map(|&i| corners[i]).collect();
                // start at the lowest local id for determinism
                let start = ordered.iter().enumerate().min_by_key(|(_, &v)| v).unwrap().0;
                ordered.rotate_left(start);
                let p0 = coords[ordered[0]];
                let p1 = coords[ordered[1]];
                let pl = coords[*ordered.last().unwrap()];
                let n = cross(&sub(&p1, &p0), &sub(&pl, &p0));
                if dot(&n, &out) < 0.0 {
                    ordered[1..].reverse();
                }
                let mut nodes = ordered.clone();
                if matches!(fk, FacetKind::Quad8 | FacetKind::Quad9 | FacetKind::Tri6) {
                    let m = ordered.len();
                    for e in 0..m {
                        nodes.push(find(mid(coords[ordered[e]], coords[ordered[(e + 1) % m]])));
                    }
                }
                if fk == FacetKind::Quad9 {
                    nodes.push(find(fc));
                }
                nodes
            })
            .collect()
    }
}

fn lagrange_quadratic(node: f64, x: f64) -> (f64, f64) {
    if node < -0.5 {
        (0.5 * x * (x - 1.0), x - 0.5)
    } else if node > 0.5 {
        (0.5 * x * (x + 1.0), x + 0.5)
    } else {
        (1.0 - x * x, -2.0 * x)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
fn plane_basis(n: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let len = dot(n, n).sqrt();
    let n = [n[0] / len, n[1] / len, n[2] / len];
    let trial = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = cross(&n, &trial);
    let ul = dot(&u, &u).sqrt();
    let u = [u[0] / ul, u[1] / ul, u[2] / ul];
    let w = cross(&n, &u);
    (u, w)
}

impl FacetKind {
    pub fn num_nodes(self) -> usize {
        match self {
            FacetKind::Quad4 => 4,
            FacetKind::Quad8 => 8,
            FacetKind::Quad9 => 9,
            FacetKind::Tri3 => 3,
            FacetKind::Tri6 => 6,
        }
    }

    pub fn is_quad(self) -> bool {
        matches!(self, FacetKind::Quad4 | FacetKind::Quad8 | FacetKind::Quad9)
    }

    pub fn num_corners(self) -> usize {
        if self.is_quad() {
            4
        } else {
            3
        }
    }

    /// Parameter-space coordinates of the facet nodes.
    pub fn node_coords(self) -> Vec<[f64; 2]> {
        let q = vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let t = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        match self {
            FacetKind::Quad4 => q,
            FacetKind::Quad8 | FacetKind::Quad9 => {
                let mut c = q;
                c.extend([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]);
                if self == FacetKind::Quad9 {
                    c.push([0.0, 0.0]);
                }
                c
            }
            FacetKind::Tri3 => t,
            FacetKind::Tri6 => {
                let mut c = t;
                c.extend([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
                c
            }
        }
    }

    /// Parameter-space centroid.
    pub fn centroid(self) -> [f64; 2] {
        if self.is_quad() {
            [0.0, 0.0]
        } else {
            [1.0 / 3.0, 1.0 / 3.0]
        }
    }

    /// Signed distance-like measure of how far `(xi, eta)` lies outside the
    /// parameter domain (non-positive inside).
    pub fn outside_distance(self, p: &[f64; 2]) -> f64 {
        if self.is_quad() {
            (p[0].abs() - 1.0).max(p[1].abs() - 1.0)
        } else {
            (-p[0]).max(-p[1]).max(p[0] + p[1] - 1.0)
        }
    }

    /// Clamps a parameter point into the facet domain.
    pub fn clamp(self, p: &[f64; 2]) -> [f64; 2] {
        if self.is_quad() {
            [p[0].clamp(-1.0, 1.0), p[1].clamp(-1.0, 1.0)]
        } else {
            let mut a = p[0].max(0.0);
            let mut b = p[1].max(0.0);
            let s = a + b;
            if s > 1.0 {
                a /= s;
                b /= s;
            }
            [a, b]
        }
    }

    /// Surface quadrature rule for load integration.
    pub fn quadrature(self) -> Rule<2> {
        match self {
            FacetKind::Quad4 => quad_rule(2),
            FacetKind::Quad8 | FacetKind::Quad9 => quad_rule(3),
            FacetKind::Tri3 => tri_rule(3),
            FacetKind::Tri6 => tri_rule(7),
        }
    }

    /// Shape values, first and second parameter derivatives at `p`.
    /// Second derivatives are returned as `[N_xixi, N_xieta, N_etaeta]`.
    pub fn eval(self, p: &[f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 3]>) {
        let (x, y) = (p[0], p[1]);
        match self {
            FacetKind::Quad4 => {
                let mut n = Vec::with_capacity(4);
                let mut d = Vec::with_capacity(4);
                let mut dd = Vec::with_capacity(4);
                for c in self.node_coords() {
                    let (a, b) = (1.0 + c[0] * x, 1.0 + c[1] * y);
                    n.push(a * b / 4.0);
                    d.push([c[0] * b / 4.0, a * c[1] / 4.0]);
                    dd.push([0.0, c[0] * c[1] / 4.0, 0.0]);
                }
                (n, d, dd)
            }
            FacetKind::Quad9 => {
                let mut n = Vec::with_capacity(9);
                let mut d = Vec::with_capacity(9);
                let mut dd = Vec::with_capacity(9);
                for c in self.node_coords() {
                    let (lx, dlx, ddlx) = lagrange_quadratic2(c[0], x);
                    let (ly, dly, ddly) = lagrange_quadratic2(c[1], y);
                    n.push(lx * ly);
                    d.push([dlx * ly, lx * dly]);
                    dd.push([ddlx * ly, dlx * dly, lx * ddly]);
                }
                (n, d, dd)
            }
            FacetKind::Quad8 => {
                let mut n = Vec::with_capacity(8);
                let mut d = Vec::with_capacity(8);
                let mut dd = Vec::with_capacity(8);
                for c in self.node_coords() {
                    let (a, b) = (c[0], c[1]);
                    if a != 0.0 && b != 0.0 {
                        let (p, q) = (1.0 + a * x, 1.0 + b * y);
                        let s = a * x + b * y - 1.0;
                        n.push(p * q * s / 4.0);
                        d.push([a * q * (s + p) / 4.0, b * p * (s + q) / 4.0]);
                        dd.push([2.0 * a * a * q / 4.0, a * b * (s + p + q) / 4.0, 2.0 * b * b * p / 4.0]);
                    } else if a == 0.0 {
                        let q = 1.0 + b * y;
                        n.push((1.0 - x * x) * q / 2.0);
                        d.push([-x * q, (1.0 - x * x) * b / 2.0]);
                        dd.push([-q, -x * b, 0.0]);
                    } else {
                        let p = 1.0 + a * x;
                        n.push((1.0 - y * y) * p / 2.0);
                        d.push([(1.0 - y * y) * a / 2.0, -y * p]);
                        dd.push([0.0, -y * a, -p]);
                    }
                }
                (n, d, dd)
            }
            FacetKind::Tri3 => (vec![1.0 - x - y, x, y], vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]], vec![[0.0; 3]; 3]),
            FacetKind::Tri6 => {
                let l = [1.0 - x - y, x, y];
                let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
                let mut n = Vec::with_capacity(6);
                let mut d = Vec::with_capacity(6);
                let mut dd = Vec::with_capacity(6);
                for i in 0..3 {
                    n.push(l[i] * (2.0 * l[i] - 1.0));
                    d.push([(4.0 * l[i] - 1.0) * dl[i][0], (4.0 * l[i] - 1.0) * dl[i][1]]);
                    dd.push([4.0 * dl[i][0] * dl[i][0], 4.0 * dl[i][0] * dl[i][1], 4.0 * dl[i][1] * dl[i][1]]);
                }
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    n.push(4.0 * l[i] * l[j]);
                    d.push([4.0 * (dl[i][0] * l[j] + l[i] * dl[j][0]), 4.0 * (dl[i][1] * l[j] + l[i] * dl[j][1])]);
                    dd.push([
                        8.0 * dl[i][0] * dl[j][0],
                        4.0 * (dl[i][0] * dl[j][1] + dl[i][1] * dl[j][0]),
                        8.0 * dl[i][1] * dl[j][1],
                    ]);
                }
                (n, d, dd)
            }
        }
    }

    /// VTK cell type id.
    pub fn vtk_type(self) -> u8 {
        match self {
            FacetKind::Quad4 => 9,
            FacetKind::Quad8 => 23,
            FacetKind::Quad9 => 28,
            FacetKind::Tri3 => 5,
            FacetKind::Tri6 => 22,
        }
    }
}

fn lagrange_quadratic2(node: f64, x: f64) -> (f64, f64, f64) {
    if node < -0.5 {
        (0.5 * x * (x - 1.0), x - 0.5, 1.0)
    } else if node > 0.5 {
        (0.5 * x * (x + 1.0), x + 0.5, 1.0)
    } else {
        (1.0 - x * x, -2.0 * x, -2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_shape_functions_are_interpolatory_with_consistent_derivatives() {
        for kind in ElementKind::ALL {
            let coords = kind.node_coords();
            assert_eq!(coords.len(), kind.num_nodes());
            for (i, c) in coords.iter().enumerate() {
                let (n, _) = kind.eval(c);
                for (j, v) in n.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((v - e).abs() < 1e-14, "{kind:?} node {i} fn {j}");
                }
            }
            let p = if kind.is_hex() { [0.13, -0.41, 0.27] } else { [0.21, 0.17, 0.33] };
            let (n, d) = kind.eval(&p);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let h = 1e-6;
            for k in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[k] += h;
                pm[k] -= h;
                let (np, _) = kind.eval(&pp);
                let (nm, _) = kind.eval(&pm);
                for a in 0..n.len() {
                    assert!(((np[a] - nm[a]) / (2.0 * h) - d[a][k]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn facet_shape_functions_are_interpolatory_with_consistent_derivatives() {
        for kind in [FacetKind::Quad4, FacetKind::Quad8, FacetKind::Quad9, FacetKind::Tri3, FacetKind::Tri6] {
            for (i, c) in kind.node_coords().iter().enumerate() {
                let (n, _, _) = kind.eval(c);
                for (j, v) in n.iter().enumerate() {
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                }
            }
            let p = if kind.is_quad() { [0.3, -0.6] } else { [0.2, 0.3] };
            let (_, d, dd) = kind.eval(&p);
            let h = 1e-6;
            for k in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[k] += h;
                pm[k] -= h;
                let (np, dp, _) = kind.eval(&pp);
                let (nm, dm, _) = kind.eval(&pm);
                for a in 0..np.len() {
                    assert!(((np[a] - nm[a]) / (2.0 * h) - d[a][k]).abs() < 1e-8);
                    let dd_fd = [(dp[a][0] - dm[a][0]) / (2.0 * h), (dp[a][1] - dm[a][1]) / (2.0 * h)];
                    if k == 0 {
                        assert!((dd_fd[0] - dd[a][0]).abs() < 1e-7);
                        assert!((dd_fd[1] - dd[a][1]).abs() < 1e-7);
                    } else {
                        assert!((dd_fd[1] - dd[a][2]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn faces_are_outward_and_match_facet_numbering() {
        for kind in ElementKind::ALL {
            let coords = kind.node_coords();
            let fk = kind.facet_kind();
            let faces = kind.faces();
            assert_eq!(faces.len(), if kind.is_hex() { 6 } else { 4 });
            let c = kind.natural_centroid();
            for f in faces.iter() {
                assert_eq!(f.len(), fk.num_nodes());
                // facet geometry in natural space: evaluate directors at centroid
                let (n, d, _) = fk.eval(&fk.centroid());
                let mut x = [0.0; 3];
                let mut xa = [0.0; 3];
                let mut xb = [0.0; 3];
                for (a, &node) in f.iter().enumerate() {
                    for k in 0..3 {
                        x[k] += n[a] * coords[node][k];
                        xa[k] += d[a][0] * coords[node][k];
                        xb[k] += d[a][1] * coords[node][k];
                    }
                }
                let nrm = cross(&xa, &xb);
                assert!(dot(&nrm, &sub(&x, &c)) > 0.0, "{kind:?} face {f:?} inward");
                // every facet node must reproduce its parameter location
                for (a, pc) in fk.node_coords().iter().enumerate() {
                    let (n, _, _) = fk.eval(pc);
                    let mut p = [0.0; 3];
                    for (b, &node) in f.iter().enumerate() {
                        for k in 0..3 {
                            p[k] += n[b] * coords[node][k];
                        }
                    }
                    assert!((0..3).all(|k| (p[k] - coords[f[a]][k]).abs() < 1e-14));
                }
            }
        }
    }
}
