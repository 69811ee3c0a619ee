//! Solid mesh container.

use crate::shapes::ElementKind;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// One volume element: kind and global node ids (VTK ordering).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidElement {
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
}

/// Reference node coordinates and element connectivity.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidMesh {
    pub nodes: Vec<Vector3<f64>>,
    pub elements: Vec<SolidElement>,
}

/// A boundary face: element id and local face index (see
/// [`ElementKind::faces`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceRef {
    pub element: usize,
    pub face: usize,
}

impl SolidMesh {
    /// Global node ids of a face, in facet order.
    pub fn face_nodes(&self, f: FaceRef) -> Vec<usize> {
        let e = &self.elements[f.element];
        e.kind.faces()[f.face].iter().map(|&l| e.nodes[l]).collect()
    }

    /// Element node coordinates.
    pub fn element_coords(&self, e: usize) -> Vec<Vector3<f64>> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Characteristic size: bounding-box diagonal.
    pub fn bounding_diagonal(&self) -> f64 {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in &self.nodes {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.nodes.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    /// All faces that belong to exactly one element.
    pub fn boundary_faces(&self) -> Vec<FaceRef> {
        let counts = self.face_multiplicity();
        let mut out = Vec::new();
        for (e, el) in self.elements.iter().enumerate() {
            for (f, _) in el.kind.faces().iter().enumerate() {
                let key = self.face_key(FaceRef { element: e, face: f });
                if counts.get(&key).copied().unwrap_or(0) == 1 {
                    out.push(FaceRef { element: e, face: f });
                }
            }
        }
        out
    }

    /// Sorted corner-node key identifying a face independent of orientation.
    pub fn face_key(&self, f: FaceRef) -> Vec<usize> {
        let el = &self.elements[f.element];
        let nc = el.kind.facet_kind().num_corners();
        let mut k: Vec<usize> = el.kind.faces()[f.face][..nc].iter().map(|&l| el.nodes[l]).collect();
        k.sort_unstable();
        k
    }

    /// Number of elements sharing each face.
    pub fn face_multiplicity(&self) -> std::collections::HashMap<Vec<usize>, usize> {
        let mut counts = std::collections::HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            for f in 0..el.kind.faces().len() {
                *counts.entry(self.face_key(FaceRef { element: e, face: f })).or_insert(0) += 1;
            }
        }
        counts
    }
}
