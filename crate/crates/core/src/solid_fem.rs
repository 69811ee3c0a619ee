//! Total-Lagrangian solid elements with hyperelastic materials.
//!
//! Internal forces and the consistent tangent (material plus geometric part)
//! are derived analytically from the strain energy; the tests check them
//! against finite differences of the energy.

use crate::shapes::ElementKind;
use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

type Voigt = SVector<f64, 6>;
type VoigtMat = SMatrix<f64, 6, 6>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolidError {
    #[error(
        "element {element}: degenerate or inverted reference geometry (det J = {det_j:.3e} at quadrature point {qp})"
    )]
    DegenerateJacobian { element: usize, qp: usize, det_j: f64 },
    #[error("element {element}: material inversion (det F = {det_f:.3e} at quadrature point {qp})")]
    Inversion { element: usize, qp: usize, det_f: f64 },
    #[error("invalid material parameters: {0}")]
    InvalidMaterial(String),
}

/// Hyperelastic material law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Material {
    /// `Psi = lambda/2 (tr E)^2 + mu E:E`.
    SaintVenantKirchhoff { youngs_modulus: f64, poisson_ratio: f64 },
    /// Compressible neo-Hookean:
    /// `Psi = mu/2 (tr C - 3) - mu ln J + lambda/2 (ln J)^2`.
    NeoHookean { youngs_modulus: f64, poisson_ratio: f64 },
}

impl Material {
    pub fn validate(&self) -> Result<(), SolidError> {
        let (e, nu) = self.parameters();
        if !(e > 0.0) || !e.is_finite() {
            return Err(SolidError::InvalidMaterial(format!("Young's modulus must be positive, got {e}")));
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(SolidError::InvalidMaterial(format!("Poisson ratio must lie in (-1, 0.5), got {nu}")));
        }
        Ok(())
    }

    pub fn parameters(&self) -> (f64, f64) {
        match *self {
            Material::SaintVenantKirchhoff { youngs_modulus, poisson_ratio }
            | Material::NeoHookean { youngs_modulus, poisson_ratio } => (youngs_modulus, poisson_ratio),
        }
    }

    /// Lame parameters `(lambda, mu)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = self.parameters();
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }

    /// Energy density, second Piola-Kirchhoff stress and material tangent
    /// `dS/dE` (Voigt, engineering shear strains) for deformation gradient `f`.
    /// Returns `None` for `det F <= 0` with the neo-Hookean law.
    pub fn evaluate(&self, f: &Matrix3<f64>) -> Option<(f64, Matrix3<f64>, VoigtMat)> {
        let (lam, mu) = self.lame();
        let c = f.transpose() * f;
        match self {
            Material::SaintVenantKirchhoff { .. } => {
                let e = 0.5 * (c - Matrix3::identity());
                let tr = e.trace();
                let s = lam * tr * Matrix3::identity() + 2.0 * mu * e;
                let psi = 0.5 * lam * tr * tr + mu * e.component_mul(&e).sum();
                let mut d = VoigtMat::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        d[(i, j)] = lam;
                    }
                    d[(i, i)] += 2.0 * mu;
                    d[(i + 3, i + 3)] = mu;
                }
                Some((psi, s, d))
            }
            Material::NeoHookean { .. } => {
                let det = f.determinant();
                if !(det > 0.0) {
                    return None;
                }
                let lnj = det.ln();
                let ci = c.try_inverse()?;
                let s = mu * (Matrix3::identity() - ci) + lam * lnj * ci;
                let psi = 0.5 * mu * (c.trace() - 3.0) - mu * lnj + 0.5 * lam * lnj * lnj;
                let coef = mu - lam * lnj;
                let mut d = VoigtMat::zeros();
                for a in 0..6 {
                    let (i, j) = VOIGT[a];
                    for b in 0..6 {
                        let (k, l) = VOIGT[b];
                        d[(a, b)] =
                            lam * ci[(i, j)] * ci[(k, l)] + coef * (ci[(i, k)] * ci[(j, l)] + ci[(i, l)] * ci[(j, k)]);
                    }
                }
                Some((psi, s, d))
            }
        }
    }
}

/// Voigt index pairs: 11, 22, 33, 12, 23, 13.
pub const VOIGT: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

fn to_voigt(s: &Matrix3<f64>) -> Voigt {
    Voigt::from_fn(|a, _| s[VOIGT[a]])
}

/// Energy, internal force and tangent of one element.
#[derive(Clone, Debug)]
pub struct ElementResult {
    pub energy: f64,
    pub force: DVector<f64>,
    pub tangent: Option<DMatrix<f64>>,
}

/// Quadrature-point geometry of an element in the reference configuration.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    /// Reference gradients of the shape functions at each quadrature point.
    pub grads: Vec<Vec<Vector3<f64>>>,
    /// Integration weights times `det J`.
    pub dvol: Vec<f64>,
}

/// Precomputes reference shape gradients; fails on non-positive Jacobians.
pub fn element_geometry(kind: ElementKind, x: &[Vector3<f64>], element: usize) -> Result<ElementGeometry, SolidError> {
    let rule = kind.quadrature();
    let mut grads = Vec::with_capacity(rule.points.len());
    let mut dvol = Vec::with_capacity(rule.points.len());
    let scale = {
        let mut lo = x[0];
        let mut hi = x[0];
        for p in x {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (hi - lo).norm().max(f64::MIN_POSITIVE)
    };
    for (qp, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let (_, d) = kind.eval(p);
        let mut j = Matrix3::zeros();
        for (a, da) in d.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    j[(r, c)] += x[a][r] * da[c];
                }
            }
        }
        let det_j = j.determinant();
        if !(det_j > 1e-12 * scale.powi(3)) {
            return Err(SolidError::DegenerateJacobian { element, qp, det_j });
        }
        let jinv_t = j.try_inverse().unwrap().transpose();
        grads.push(d.iter().map(|da| jinv_t * Vector3::new(da[0], da[1], da[2])).collect());
        dvol.push(w * det_j);
    }
    Ok(ElementGeometry { grads, dvol })
}

/// Deformation gradient at a quadrature point.
pub fn deformation_gradient(grads: &[Vector3<f64>], u: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut f = Matrix3::identity();
    for (g, ua) in grads.iter().zip(u) {
        f += ua * g.transpose();
    }
    f
}

/// Evaluates energy, internal force and (optionally) the tangent stiffness.
pub fn element_response(
    geom: &ElementGeometry,
    material: &Material,
    u: &[Vector3<f64>],
    with_tangent: bool,
    element: usize,
) -> Result<ElementResult, SolidError> {
    let nn = u.len();
    let mut energy = 0.0;
    let mut force = DVector::zeros(3 * nn);
    let mut tangent = if with_tangent { Some(DMatrix::zeros(3 * nn, 3 * nn)) } else { None };
    let mut b = vec![SMatrix::<f64, 6, 3>::zeros(); nn];
    for (qp, (grads, &dv)) in geom.grads.iter().zip(&geom.dvol).enumerate() {
        let f = deformation_gradient(grads, u);
        let (psi, s, d) = material.evaluate(&f).ok_or(SolidError::Inversion { element, qp, det_f: f.determinant() })?;
        energy += psi * dv;
        let sv = to_voigt(&s);
        for a in 0..nn {
            let g = &grads[a];
            let ba = &mut b[a];
            for i in 0..3 {
                ba[(0, i)] = f[(i, 0)] * g[0];
                ba[(1, i)] = f[(i, 1)] * g[1];
                ba[(2, i)] = f[(i, 2)] * g[2];
                ba[(3, i)] = f[(i, 0)] * g[1] + f[(i, 1)] * g[0];
                ba[(4, i)] = f[(i, 1)] * g[2] + f[(i, 2)] * g[1];
                ba[(5, i)] = f[(i, 0)] * g[2] + f[(i, 2)] * g[0];
            }
            let fa = ba.transpose() * sv * dv;
            for i in 0..3 {
                force[3 * a + i] += fa[i];
            }
        }
        if let Some(k) = tangent.as_mut() {
            let db: Vec<SMatrix<f64, 6, 3>> = b.iter().map(|ba| d * ba * dv).collect();
            for a in 0..nn {
                let sga = s * grads[a];
                for c in 0..nn {
                    let kab = b[a].transpose() * db[c];
                    let geo = sga.dot(&grads[c]) * dv;
                    for i in 0..3 {
                        for j in 0..3 {
                            k[(3 * a + i, 3 * c + j)] += kab[(i, j)] + if i == j { geo } else { 0.0 };
                        }
                    }
                }
            }
        }
    }
    Ok(ElementResult { energy, force, tangent })
}

/// Mean second Piola-Kirchhoff stress over the element's quadrature points.
pub fn element_mean_stress(geom: &ElementGeometry, material: &Material, u: &[Vector3<f64>]) -> Option<Matrix3<f64>> {
    let mut acc = Matrix3::zeros();
    for grads in &geom.grads {
        let f = deformation_gradient(grads, u);
        acc += material.evaluate(&f)?.1;
    }
    Some(acc / geom.grads.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_map;

    fn unit_element(kind: ElementKind) -> Vec<Vector3<f64>> {
        // a mildly distorted reference element
        kind.node_coords()
            .iter()
            .map(|c| {
                let p = Vector3::new(c[0], c[1], c[2]);
                Vector3::new(p.x + 0.05 * p.y * p.z, 1.1 * p.y + 0.03 * p.x, 0.9 * p.z + 0.02 * p.x * p.y)
            })
            .collect()
    }

    fn disp(n: usize, amp: f64) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|a| {
                let t = a as f64;
                amp * Vector3::new((0.7 * t).sin(), (1.3 * t + 0.2).cos(), (0.4 * t - 0.5).sin())
            })
            .collect()
    }

    fn materials() -> [Material; 2] {
        [
            Material::SaintVenantKirchhoff { youngs_modulus: 3.0, poisson_ratio: 0.3 },
            Material::NeoHookean { youngs_modulus: 2.0, poisson_ratio: 0.25 },
        ]
    }

    #[test]
    fn force_and_tangent_match_energy_differences() {
        for kind in ElementKind::ALL {
            let x = unit_element(kind);
            let geom = element_geometry(kind, &x, 0).unwrap();
            for mat in materials() {
                let u = disp(x.len(), 0.05);
                let r = element_response(&geom, &mat, &u, true, 0).unwrap();
                let k = r.tangent.unwrap();
                let h = 1e-6;
                let mut max_k = 0.0f64;
                let mut err_k = 0.0f64;
                for dof in 0..3 * x.len() {
                    let mut up = u.clone();
                    let mut um = u.clone();
                    up[dof / 3][dof % 3] += h;
                    um[dof / 3][dof % 3] -= h;
                    let rp = element_response(&geom, &mat, &up, false, 0).unwrap();
                    let rm = element_response(&geom, &mat, &um, false, 0).unwrap();
                    let fd_f = (rp.energy - rm.energy) / (2.0 * h);
                    assert!((fd_f - r.force[dof]).abs() < 1e-6 * (1.0 + r.force.amax()), "{kind:?} force");
                    let col = (&rp.force - &rm.force) / (2.0 * h);
                    for i in 0..3 * x.len() {
                        err_k = err_k.max((col[i] - k[(i, dof)]).abs());
                        max_k = max_k.max(k[(i, dof)].abs());
                    }
                }
                assert!(err_k <= 1e-6 * max_k, "{kind:?} {mat:?}: tangent error {err_k:e} vs {max_k:e}");
                let asym = (&k - k.transpose()).amax();
                assert!(asym <= 1e-10 * max_k, "{kind:?}: asymmetric tangent {asym:e}");
            }
        }
    }

    #[test]
    fn rigid_motion_is_stress_free() {
        let rot = exp_map(&Vector3::new(0.4, -1.1, 0.7));
        let shift = Vector3::new(0.3, -2.0, 1.0);
        for kind in ElementKind::ALL {
            let x = unit_element(kind);
            let geom = element_geometry(kind, &x, 0).unwrap();
            let u: Vec<_> = x.iter().map(|p| rot * p + shift - p).collect();
            for mat in materials() {
                let r = element_response(&geom, &mat, &u, false, 0).unwrap();
                assert!(r.force.amax() < 1e-12, "{kind:?}");
                assert!(r.energy.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniaxial_stretch_stress_matches_closed_form() {
        // F = diag(1.1, 1, 1): S11 = lam trE + 2 mu E11 for SVK
        let mat = Material::SaintVenantKirchhoff { youngs_modulus: 1.0, poisson_ratio: 0.3 };
        let (lam, mu) = mat.lame();
        let f = Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        let (_, s, _) = mat.evaluate(&f).unwrap();
        let e11 = 0.5 * (1.21 - 1.0);
        assert!((s[(0, 0)] - (lam + 2.0 * mu) * e11).abs() < 1e-14);
        assert!((s[(1, 1)] - lam * e11).abs() < 1e-14);
    }

    #[test]
    fn neo_hookean_rejects_inversion() {
        let mat = Material::NeoHookean { youngs_modulus: 1.0, poisson_ratio: 0.0 };
        let f = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -0.5));
        assert!(mat.evaluate(&f).is_none());
        let kind = ElementKind::Hex8;
        let x = unit_element(kind);
        let geom = element_geometry(kind, &x, 3).unwrap();
        let u: Vec<_> = x.iter().map(|p| Vector3::new(0.0, 0.0, -2.0 * p.z)).collect();
        let err = element_response(&geom, &mat, &u, false, 3).unwrap_err();
        assert!(matches!(err, SolidError::Inversion { element: 3, .. }));
    }

    #[test]
    fn degenerate_element_is_rejected() {
        let mut x = unit_element(ElementKind::Hex8);
        for p in x.iter_mut() {
            p.z = 0.0;
        }
        assert!(matches!(
            element_geometry(ElementKind::Hex8, &x, 7),
            Err(SolidError::DegenerateJacobian { element: 7, .. })
        ));
    }

    #[test]
    fn volume_is_integrated_exactly() {
        for kind in ElementKind::ALL {
            let x: Vec<_> = kind.node_coords().iter().map(|c| Vector3::new(2.0 * c[0], c[1], 3.0 * c[2])).collect();
            let geom = element_geometry(kind, &x, 0).unwrap();
            let vol: f64 = geom.dvol.iter().sum();
            let expect = if kind.is_hex() { 48.0 } else { 1.0 };
            assert!((vol - expect).abs() < 1e-12, "{kind:?} {vol}");
        }
    }
}
