//! Rotation group utilities: exponential map, rotation-vector extraction,
//! relative rotations and geodesic interpolation of triads.
//!
//! The generic kernels ([`exp_g`], [`rv_g`]) work for any [`Scalar`] so they can
//! be differentiated with [`Dual2`](crate::autodiff::Dual2); both are smooth at
//! the identity (series branches avoid `0/0`).

use crate::autodiff::{Scalar, M3, V3};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// A rotation matrix whose columns are the base vectors of a frame.
pub type Triad = Matrix3<f64>;

/// Angle below which the exponential map switches to its Taylor series.
pub const EXP_SERIES_ANGLE: f64 = 1e-6;
/// Orthonormality tolerance accepted by [`rotation_vector`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Relative rotations closer than this to pi are rejected by interpolation.
pub const GEODESIC_PI_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("matrix is not a rotation: orthonormality defect {defect:.3e} (det {det:.6})")]
    NotOrthonormal { defect: f64, det: f64 },
    #[error("relative rotation angle {angle:.9} is too close to pi for a unique geodesic")]
    NearPi { angle: f64 },
}

/// `S(v)` with `S(v) w = v x w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// Axial vector of the skew part of `m`.
pub fn axial(m: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Exponential map for a generic scalar.
pub fn exp_g<T: Scalar>(psi: &V3<T>) -> M3<T> {
    let t2 = psi.norm_sq();
    let t2v = t2.val();
    let (a, b) = if t2v < EXP_SERIES_ANGLE * EXP_SERIES_ANGLE {
        // sin(t)/t and (1 - cos t)/t^2, four series terms each
        let t4 = t2.clone() * t2.clone();
        let t6 = t4.clone() * t2.clone();
        let a = T::cst(1.0) - t2.clone() / 6.0 + t4.clone() / 120.0 - t6.clone() / 5040.0;
        let b = T::cst(0.5) - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0;
        (a, b)
    } else {
        let t = t2.sqrt();
        let a = t.sin() / t.clone();
        let b = (T::cst(1.0) - t.cos()) / t2;
        (a, b)
    };
    let s = M3::skew(psi);
    let s2 = s.mul(&s);
    M3::<T>::identity().add(&s.scale(&a)).add(&s2.scale(&b))
}

/// Rotation vector of a rotation matrix (Spurrier's quaternion extraction),
/// generic over the scalar. The angle lies in `[0, pi]`. No orthonormality
/// check is performed here.
pub fn rv_g<T: Scalar>(r: &M3<T>) -> V3<T> {
    let m = &r.0;
    let tr = r.trace();
    let diag = [m[0][0].val(), m[1][1].val(), m[2][2].val()];
    let trv = tr.val();
    // unit quaternion (q0, q)
    let (q0, q): (T, [T; 3]) = {
        let imax = if diag[0] >= diag[1] && diag[0] >= diag[2] {
            0
        } else if diag[1] >= diag[2] {
            1
        } else {
            2
        };
        if trv >= diag[imax] {
            let q0 = (tr.clone() + 1.0).sqrt() * 0.5;
            let d = q0.clone() * 4.0;
            let q = [
                (m[2][1].clone() - m[1][2].clone()) / d.clone(),
                (m[0][2].clone() - m[2][0].clone()) / d.clone(),
                (m[1][0].clone() - m[0][1].clone()) / d,
            ];
            (q0, q)
        } else {
            let i = imax;
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            let qi = (m[i][i].clone() * 0.5 + (T::cst(1.0) - tr.clone()) * 0.25).sqrt();
            let d = qi.clone() * 4.0;
            let mut q0 = (m[k][j].clone() - m[j][k].clone()) / d.clone();
            let mut qj = (m[j][i].clone() + m[i][j].clone()) / d.clone();
            let mut qk = (m[k][i].clone() + m[i][k].clone()) / d;
            let mut qi = qi;
            if q0.val() < 0.0 {
                q0 = -q0;
                qi = -qi;
                qj = -qj;
                qk = -qk;
            }
            let mut q = [T::cst(0.0), T::cst(0.0), T::cst(0.0)];
            q[i] = qi;
            q[j] = qj;
            q[k] = qk;
            (q0, q)
        }
    };
    let qv = V3(q);
    let s2 = qv.norm_sq();
    let s2v = s2.val();
    let q0v = q0.val();
    // factor = theta / s with theta = 2 atan2(s, q0)
    let factor = if s2v < 1e-6 * q0v * q0v {
        // 2/q0 * atan(x)/x with x = s/q0, series in x^2
        let x2 = s2 / (q0.clone() * q0.clone());
        let x4 = x2.clone() * x2.clone();
        let x6 = x4.clone() * x2.clone();
        let x8 = x4.clone() * x4.clone();
        let series = T::cst(1.0) - x2 / 3.0 + x4 / 5.0 - x6 / 7.0 + x8 / 9.0;
        series * 2.0 / q0
    } else {
        let s = s2.sqrt();
        s.atan2(&q0) * 2.0 / s
    };
    qv.scale(&factor)
}

/// Exponential map `so(3) -> SO(3)` (Rodrigues' formula).
pub fn exp_map(psi: &Vector3<f64>) -> Triad {
    exp_g(&V3::<f64>::from_f64(psi)).values()
}

/// Orthonormality defect `max |R^T R - I|`.
pub fn orthonormality_defect(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Checks that `r` is a proper rotation within [`ORTHONORMAL_TOL`].
pub fn check_rotation(r: &Matrix3<f64>) -> Result<(), So3Error> {
    let defect = orthonormality_defect(r);
    let det = r.determinant();
    if defect > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL * 3.0 {
        return Err(So3Error::NotOrthonormal { defect, det });
    }
    Ok(())
}

/// Rotation vector (angle in `[0, pi]`) of a rotation matrix.
pub fn rotation_vector(r: &Matrix3<f64>) -> Result<Vector3<f64>, So3Error> {
    check_rotation(r)?;
    Ok(rv_g(&M3::<f64>::from_f64(r)).values())
}

/// Rotation vector of `l2 l1^T`.
pub fn relative_rotation(l1: &Triad, l2: &Triad) -> Result<Vector3<f64>, So3Error> {
    rotation_vector(&(l2 * l1.transpose()))
}

/// Geodesic interpolation `exp(t psi_21) l1` with `t` in `[0, 1]`.
pub fn geodesic_interpolate(l1: &Triad, l2: &Triad, t: f64) -> Result<Triad, So3Error> {
    let phi = relative_rotation(l1, l2)?;
    let angle = phi.norm();
    if angle >= std::f64::consts::PI - GEODESIC_PI_MARGIN {
        return Err(So3Error::NearPi { angle });
    }
    Ok(exp_map(&(t * phi)) * l1)
}

/// Smallest rotation mapping `e1` onto the unit vector along `t`.
pub fn smallest_rotation_from_e1(t: &Vector3<f64>) -> Triad {
    let t = t.normalize();
    let e1 = Vector3::x();
    let c = e1.dot(&t);
    let axis = e1.cross(&t);
    let s = axis.norm();
    if s < 1e-14 {
        if c > 0.0 {
            return Matrix3::identity();
        }
        // half turn about e3
        return exp_map(&Vector3::new(0.0, 0.0, std::f64::consts::PI));
    }
    let angle = s.atan2(c);
    exp_map(&(axis / s * angle))
}
