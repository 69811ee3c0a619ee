//! Geometrically exact Simo-Reissner beam element with a C1 Hermite
//! centreline and nodal triads interpolated along the geodesic.
//!
//! Each node carries nine unknowns: position `r`, centreline tangent `t` and a
//! spin increment `theta` acting multiplicatively on the nodal triad,
//! `Lambda <- exp(theta) Lambda`. Element residual and stiffness come from
//! second-order automatic differentiation of the element strain energy with
//! respect to these 18 unknowns.

use crate::autodiff::{Dual2, Scalar, M3, V3};
use crate::quadrature::gauss_legendre;
use crate::so3::{exp_g, rv_g, So3Error, Triad, GEODESIC_PI_MARGIN};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unknowns per beam node: position, tangent, spin.
pub const NODE_DOFS: usize = 9;
/// Gauss points used for the element energy.
pub const ENERGY_GAUSS_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("beam element {element}: {source}")]
    Rotation { element: usize, source: So3Error },
    #[error("beam element {element}: relative nodal rotation {angle:.6} is too close to pi")]
    NearPi { element: usize, angle: f64 },
    #[error("beam element {element}: zero reference length")]
    ZeroLength { element: usize },
    #[error("invalid cross-section: {0}")]
    InvalidSection(String),
}

/// Circular cross-section with linear elastic constitutive law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSection {
    pub radius: f64,
    pub youngs_modulus: f64,
    #[serde(default)]
    pub poisson_ratio: f64,
}

impl CrossSection {
    pub fn validate(&self) -> Result<(), BeamError> {
        if !(self.radius > 0.0 && self.youngs_modulus > 0.0) {
            return Err(BeamError::InvalidSection("radius and Young's modulus must be positive".into()));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(BeamError::InvalidSection(format!("Poisson ratio {} out of range", self.poisson_ratio)));
        }
        Ok(())
    }
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(2)
    }
    pub fn inertia(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(4) / 4.0
    }
    pub fn polar_inertia(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(4) / 2.0
    }
    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }
    /// Diagonal of the force-strain stiffness `diag(EA, GA, GA)`.
    pub fn c_force(&self) -> Vector3<f64> {
        let a = self.area();
        Vector3::new(self.youngs_modulus * a, self.shear_modulus() * a, self.shear_modulus() * a)
    }
    /// Diagonal of the moment-curvature stiffness `diag(GJ, EI, EI)`.
    pub fn c_moment(&self) -> Vector3<f64> {
        let i = self.inertia();
        Vector3::new(self.shear_modulus() * self.polar_inertia(), self.youngs_modulus * i, self.youngs_modulus * i)
    }
}

/// Current state of a beam node.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamNodeState {
    pub position: Vector3<f64>,
    pub tangent: Vector3<f64>,
    pub triad: Triad,
}

/// Cubic Hermite basis on `[-1, 1]`: values and `d/dxi`.
/// Order: position 1, tangent 1, position 2, tangent 2 (tangent functions
/// without the `L/2` scaling).
pub fn hermite(xi: f64) -> ([f64; 4], [f64; 4]) {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    (
        [
            (2.0 - 3.0 * xi + x3) / 4.0,
            (1.0 - xi - x2 + x3) / 4.0,
            (2.0 + 3.0 * xi - x3) / 4.0,
            (-1.0 - xi + x2 + x3) / 4.0,
        ],
        [
            (-3.0 + 3.0 * x2) / 4.0,
            (-1.0 - 2.0 * xi + 3.0 * x2) / 4.0,
            (3.0 - 3.0 * x2) / 4.0,
            (-1.0 + 2.0 * xi + 3.0 * x2) / 4.0,
        ],
    )
}

/// Hermite weights multiplying `(r1, t1, r2, t2)` for the centreline position.
pub fn position_weights(xi: f64, length: f64) -> [f64; 4] {
    let (h, _) = hermite(xi);
    [h[0], 0.5 * length * h[1], h[2], 0.5 * length * h[3]]
}

/// Hermite weights multiplying `(r1, t1, r2, t2)` for `dr/ds`.
pub fn derivative_weights(xi: f64, length: f64) -> [f64; 4] {
    let (_, d) = hermite(xi);
    [2.0 * d[0] / length, d[1], 2.0 * d[2] / length, d[3]]
}

fn hermite_point(xi: f64, length: f64, r: &[Vector3<f64>; 2], t: &[Vector3<f64>; 2]) -> (Vector3<f64>, Vector3<f64>) {
    let w = position_weights(xi, length);
    let d = derivative_weights(xi, length);
    (w[0] * r[0] + w[1] * t[0] + w[2] * r[1] + w[3] * t[1], d[0] * r[0] + d[1] * t[0] + d[2] * r[1] + d[3] * t[1])
}

/// Reference length: fixed point of `L = arc length of the Hermite curve
/// whose end tangents are scaled by L`.
pub fn reference_length(r: &[Vector3<f64>; 2], t: &[Vector3<f64>; 2]) -> f64 {
    let (x, w) = gauss_legendre(16);
    let mut l = (r[1] - r[0]).norm();
    if l == 0.0 {
        return 0.0;
    }
    for _ in 0..100 {
        let arc: f64 = x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| {
                let (_, d) = hermite(xi);
                let rx = d[0] * r[0] + 0.5 * l * d[1] * t[0] + d[2] * r[1] + 0.5 * l * d[3] * t[1];
                wi * rx.norm()
            })
            .sum();
        if (arc - l).abs() <= 1e-15 * l {
            l = arc;
            break;
        }
        l = arc;
    }
    l
}

/// Reference data of one beam element.
#[derive(Clone, Debug)]
pub struct BeamElement {
    pub nodes: [usize; 2],
    pub length: f64,
    pub section: CrossSection,
    /// `Lambda_0^T r_0'` at the energy Gauss points.
    gamma0: Vec<Vector3<f64>>,
    /// Reference material curvature.
    k0: Vector3<f64>,
}

impl BeamElement {
    pub fn new(
        index: usize,
        nodes: [usize; 2],
        reference: [&BeamNodeState; 2],
        section: CrossSection,
    ) -> Result<Self, BeamError> {
        let r = [reference[0].position, reference[1].position];
        let t = [reference[0].tangent, reference[1].tangent];
        let length = reference_length(&r, &t);
        if !(length > 0.0) {
            return Err(BeamError::ZeroLength { element: index });
        }
        let mut e = BeamElement { nodes, length, section, gamma0: Vec::new(), k0: Vector3::zeros() };
        let l = [reference[0].triad, reference[1].triad];
        let (phi, k0) = e.curvature_f64(&l).map_err(|s| match s {
            So3Error::NearPi { angle } => BeamError::NearPi { element: index, angle },
            other => BeamError::Rotation { element: index, source: other },
        })?;
        e.k0 = k0;
        let (xg, _) = gauss_legendre(ENERGY_GAUSS_POINTS);
        e.gamma0 = xg
            .iter()
            .map(|&xi| {
                let (_, rs) = hermite_point(xi, length, &r, &t);
                let lam = crate::so3::exp_map(&(0.5 * (xi + 1.0) * phi)) * l[0];
                lam.transpose() * rs
            })
            .collect();
        Ok(e)
    }

    fn curvature_f64(&self, l: &[Triad; 2]) -> Result<(Vector3<f64>, Vector3<f64>), So3Error> {
        let phi = crate::so3::relative_rotation(&l[0], &l[1])?;
        if phi.norm() >= std::f64::consts::PI - GEODESIC_PI_MARGIN {
            return Err(So3Error::NearPi { angle: phi.norm() });
        }
        Ok((phi, l[0].transpose() * phi / self.length))
    }

    /// Reference material curvature.
    pub fn reference_curvature(&self) -> Vector3<f64> {
        self.k0
    }

    /// Centreline position at `xi`.
    pub fn position(&self, xi: f64, s: [&BeamNodeState; 2]) -> Vector3<f64> {
        hermite_point(xi, self.length, &[s[0].position, s[1].position], &[s[0].tangent, s[1].tangent]).0
    }

    /// Triad at `xi` by geodesic interpolation of the nodal triads.
    pub fn triad(&self, xi: f64, s: [&BeamNodeState; 2]) -> Result<Triad, So3Error> {
        crate::so3::geodesic_interpolate(&s[0].triad, &s[1].triad, 0.5 * (xi + 1.0))
    }

    /// Strain measures `(Gamma at Gauss points, Omega)` for a state.
    pub fn strains(&self, s: [&BeamNodeState; 2]) -> Result<(Vec<Vector3<f64>>, Vector3<f64>), So3Error> {
        let l = [s[0].triad, s[1].triad];
        let (phi, k) = self.curvature_f64(&l)?;
        let (xg, _) = gauss_legendre(ENERGY_GAUSS_POINTS);
        let r = [s[0].position, s[1].position];
        let t = [s[0].tangent, s[1].tangent];
        let gam = xg
            .iter()
            .zip(&self.gamma0)
            .map(|(&xi, g0)| {
                let (_, rs) = hermite_point(xi, self.length, &r, &t);
                let lam = crate::so3::exp_map(&(0.5 * (xi + 1.0) * phi)) * l[0];
                lam.transpose() * rs - g0
            })
            .collect();
        Ok((gam, k - self.k0))
    }

    /// Element strain energy for generic scalars.
    fn energy_g<T: Scalar>(&self, r: [V3<T>; 2], t: [V3<T>; 2], l: [M3<T>; 2]) -> Result<T, So3Error> {
        let rel = l[1].mul(&l[0].transpose());
        let phi = rv_g(&rel);
        let angle = phi.norm_sq().val().sqrt();
        if angle >= std::f64::consts::PI - GEODESIC_PI_MARGIN {
            return Err(So3Error::NearPi { angle });
        }
        let cf = self.section.c_force();
        let cm = self.section.c_moment();
        let k = l[0].tr_mul_v(&phi).scale_f(1.0 / self.length);
        let omega = k.sub_f(&self.k0);
        let mut bending = T::cst(0.0);
        for i in 0..3 {
            bending += omega.0[i].clone() * omega.0[i].clone() * cm[i];
        }
        let (xg, wg) = gauss_legendre(ENERGY_GAUSS_POINTS);
        let mut axial_shear = T::cst(0.0);
        for (q, (&xi, &w)) in xg.iter().zip(&wg).enumerate() {
            let d = derivative_weights(xi, self.length);
            let rs = r[0].scale_f(d[0]).add(&t[0].scale_f(d[1])).add(&r[1].scale_f(d[2])).add(&t[1].scale_f(d[3]));
            let lam = exp_g(&phi.scale_f(0.5 * (xi + 1.0))).mul(&l[0]);
            let gam = lam.tr_mul_v(&rs).sub_f(&self.gamma0[q]);
            for i in 0..3 {
                axial_shear += gam.0[i].clone() * gam.0[i].clone() * (cf[i] * w);
            }
        }
        // 1/2 * integral over ds = L/2 dxi; bending part constant over the element
        Ok(axial_shear * (0.25 * self.length) + bending * (0.5 * self.length))
    }

    /// Strain energy of a state.
    pub fn energy(&self, s: [&BeamNodeState; 2]) -> Result<f64, So3Error> {
        self.energy_g::<f64>(
            [V3::from_f64(&s[0].position), V3::from_f64(&s[1].position)],
            [V3::from_f64(&s[0].tangent), V3::from_f64(&s[1].tangent)],
            [M3::from_f64(&s[0].triad), M3::from_f64(&s[1].triad)],
        )
    }

    /// Energy, gradient and Hessian with respect to the 18 element unknowns
    /// `(r1, t1, theta1, r2, t2, theta2)`, spins taken at zero.
    pub fn response(&self, s: [&BeamNodeState; 2]) -> Result<(f64, DVector<f64>, DMatrix<f64>), So3Error> {
        let mut vals = [0.0; 18];
        for n in 0..2 {
            for k in 0..3 {
                vals[9 * n + k] = s[n].position[k];
                vals[9 * n + 3 + k] = s[n].tangent[k];
            }
        }
        let v = Dual2::seed(&vals);
        let vec3 = |o: usize| V3::new(v[o].clone(), v[o + 1].clone(), v[o + 2].clone());
        let triad = |n: usize| exp_g(&vec3(9 * n + 6)).mul_f(&s[n].triad);
        let e = self.energy_g([vec3(0), vec3(9)], [vec3(3), vec3(12)], [triad(0), triad(1)])?;
        Ok((e.value(), e.grad(18), e.hess(18)))
    }
}

/// Consistent-linearisation correction for multiplicative spin updates:
/// the rotational diagonal block `K_theta_theta` of a node gets `-1/2 S(m)`,
/// with `m` the total spin gradient (moment residual) at that node.
pub fn spin_correction(m: &Vector3<f64>) -> Matrix3<f64> {
    -0.5 * crate::so3::skew(m)
}

/// Consistent nodal loads of a constant distributed line load `q`
/// (per unit reference length) on an element: `(f_r1, f_t1, f_r2, f_t2)`.
pub fn line_load_vector(length: f64, q: &Vector3<f64>) -> [Vector3<f64>; 4] {
    let (xg, wg) = gauss_legendre(ENERGY_GAUSS_POINTS);
    let mut out = [Vector3::zeros(); 4];
    for (&xi, &w) in xg.iter().zip(&wg) {
        let h = position_weights(xi, length);
        for k in 0..4 {
            out[k] += q * (h[k] * w * 0.5 * length);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_map, smallest_rotation_from_e1};

    fn straight(l: f64) -> [BeamNodeState; 2] {
        [
            BeamNodeState { position: Vector3::zeros(), tangent: Vector3::x(), triad: Matrix3::identity() },
            BeamNodeState { position: Vector3::new(l, 0.0, 0.0), tangent: Vector3::x(), triad: Matrix3::identity() },
        ]
    }

    fn section() -> CrossSection {
        CrossSection { radius: 0.05, youngs_modulus: 100.0, poisson_ratio: 0.3 }
    }

    fn perturbed(s: &[BeamNodeState; 2], dofs: &[f64]) -> [BeamNodeState; 2] {
        let mut out = s.clone();
        for n in 0..2 {
            let o = 9 * n;
            out[n].position += Vector3::new(dofs[o], dofs[o + 1], dofs[o + 2]);
            out[n].tangent += Vector3::new(dofs[o + 3], dofs[o + 4], dofs[o + 5]);
            out[n].triad = exp_map(&Vector3::new(dofs[o + 6], dofs[o + 7], dofs[o + 8])) * out[n].triad;
        }
        out
    }

    #[test]
    fn reference_state_is_stress_free_for_curved_element() {
        let t1 = Vector3::new(1.0, 0.3, 0.1).normalize();
        let t2 = Vector3::new(0.8, -0.2, 0.5).normalize();
        let s = [
            BeamNodeState { position: Vector3::zeros(), tangent: t1, triad: smallest_rotation_from_e1(&t1) },
            BeamNodeState { position: Vector3::new(1.0, 0.1, 0.2), tangent: t2, triad: smallest_rotation_from_e1(&t2) },
        ];
        let e = BeamElement::new(0, [0, 1], [&s[0], &s[1]], section()).unwrap();
        let (en, g, _) = e.response([&s[0], &s[1]]).unwrap();
        assert!(en.abs() < 1e-20);
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn gradient_and_hessian_match_multiplicative_differences() {
        let s0 = straight(0.7);
        let e = BeamElement::new(0, [0, 1], [&s0[0], &s0[1]], section()).unwrap();
        let d: Vec<f64> = (0..18).map(|i| 0.05 * ((i as f64) * 1.37).sin()).collect();
        let s = perturbed(&s0, &d);
        let (_, g, h) = e.response([&s[0], &s[1]]).unwrap();
        let hstep = 1e-6;
        for i in 0..18 {
            let mut dp = vec![0.0; 18];
            dp[i] = hstep;
            let sp = perturbed(&s, &dp);
            dp[i] = -hstep;
            let sm = perturbed(&s, &dp);
            let ep = e.energy([&sp[0], &sp[1]]).unwrap();
            let em = e.energy([&sm[0], &sm[1]]).unwrap();
            let fd = (ep - em) / (2.0 * hstep);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g.amax()), "grad {i}: {fd} vs {}", g[i]);
        }
        // Hessian at spin zero equals second derivative of f(theta) = Pi(exp(theta) Lambda)
        for i in 0..18 {
            for j in 0..18 {
                let f = |a: f64, b: f64| {
                    let mut dp = [0.0; 18];
                    dp[i] += a;
                    dp[j] += b;
                    // exp(a e_i + b e_j) when both are spins of the same node
                    let mut st = s.clone();
                    for n in 0..2 {
                        let o = 9 * n;
                        st[n].position += Vector3::new(dp[o], dp[o + 1], dp[o + 2]);
                        st[n].tangent += Vector3::new(dp[o + 3], dp[o + 4], dp[o + 5]);
                        st[n].triad = exp_map(&Vector3::new(dp[o + 6], dp[o + 7], dp[o + 8])) * st[n].triad;
                    }
                    e.energy([&st[0], &st[1]]).unwrap()
                };
                let k = 1e-4;
                let fd = (f(k, k) - f(k, -k) - f(-k, k) + f(-k, -k)) / (4.0 * k * k);
                let scale = 1.0 + h.amax();
                assert!((fd - h[(i, j)]).abs() <= 1e-4 * scale, "hess {i},{j}: {fd} vs {}", h[(i, j)]);
            }
        }
        assert!((&h - h.transpose()).amax() < 1e-9 * h.amax());
    }

    #[test]
    fn rigid_motion_leaves_energy_and_residual_zero() {
        let s0 = straight(1.0);
        let e = BeamElement::new(0, [0, 1], [&s0[0], &s0[1]], section()).unwrap();
        let q = exp_map(&Vector3::new(0.3, 1.2, -0.8));
        let c = Vector3::new(1.0, -2.0, 0.5);
        let s: Vec<BeamNodeState> = s0
            .iter()
            .map(|n| BeamNodeState { position: q * n.position + c, tangent: q * n.tangent, triad: q * n.triad })
            .collect();
        let (en, g, _) = e.response([&s[0], &s[1]]).unwrap();
        assert!(en.abs() < 1e-22);
        assert!(g.amax() < 1e-12);
    }

    #[test]
    fn arc_curvature_equals_inverse_radius() {
        let rho = 2.0;
        let l = 0.5;
        let s0 = straight(l);
        let e = BeamElement::new(0, [0, 1], [&s0[0], &s0[1]], section()).unwrap();
        let ang = l / rho;
        let t2 = Vector3::new(ang.cos(), ang.sin(), 0.0);
        let s = [
            s0[0].clone(),
            BeamNodeState {
                position: Vector3::new(rho * ang.sin(), rho * (1.0 - ang.cos()), 0.0),
                tangent: t2,
                triad: exp_map(&Vector3::new(0.0, 0.0, ang)),
            },
        ];
        let (_, omega) = e.strains([&s[0], &s[1]]).unwrap();
        assert!((omega.norm() - 1.0 / rho).abs() < 1e-12);
        assert!((omega.z - 1.0 / rho).abs() < 1e-12);
    }

    #[test]
    fn hermite_reference_length_of_circular_arc() {
        // short circular arc by one element converges to the arc length
        let a: f64 = 0.3;
        let r = [Vector3::new(1.0, 0.0, 0.0), Vector3::new(a.cos(), a.sin(), 0.0)];
        let t = [Vector3::y(), Vector3::new(-a.sin(), a.cos(), 0.0)];
        let l = reference_length(&r, &t);
        assert!((l - a).abs() < 5e-5 * a, "{l}");
        // straight element: exact chord
        let l2 = reference_length(&[Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0)], &[Vector3::x(), Vector3::x()]);
        assert!((l2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn line_load_resultant_and_moment() {
        let q = Vector3::new(0.0, 0.0, 2.0);
        let f = line_load_vector(3.0, &q);
        assert!(((f[0] + f[2]).z - 6.0).abs() < 1e-14);
        assert!((f[1].z - 2.0 * 9.0 / 12.0).abs() < 1e-14);
        assert!((f[3].z + 2.0 * 9.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn near_pi_relative_rotation_is_rejected() {
        let s0 = straight(1.0);
        let e = BeamElement::new(0, [0, 1], [&s0[0], &s0[1]], section()).unwrap();
        let mut s = s0.clone();
        s[1].triad = exp_map(&Vector3::new(std::f64::consts::PI - 1e-9, 0.0, 0.0));
        assert!(e.response([&s[0], &s[1]]).is_err());
    }
}
