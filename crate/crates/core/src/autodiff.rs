//! Forward-mode second-order automatic differentiation.
//!
//! [`Dual2`] carries a value, its gradient and its (symmetric) Hessian with
//! respect to a dynamically sized set of independent variables. A dual with an
//! empty gradient is a constant; mixing constants and active duals never
//! allocates derivative storage for the constant side.
//!
//! [`Scalar`] abstracts over `f64` and `Dual2` so the same geometric kernels
//! (rotations, normals, triads, strain energies) serve both plain evaluation
//! and differentiation. [`V3`] and [`M3`] are small fixed-size vector/matrix
//! types over any `Scalar`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Value with gradient and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual2 {
    v: f64,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl Dual2 {
    /// A constant (no derivative information).
    pub fn constant(v: f64) -> Self {
        Dual2 { v, g: Vec::new(), h: Vec::new() }
    }

    /// The `i`-th of `n` independent variables, with value `v`.
    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        assert!(i < n, "variable index out of range");
        let mut g = vec![0.0; n];
        g[i] = 1.0;
        Dual2 { v, g, h: vec![0.0; n * n] }
    }

    /// Seeds one independent variable per entry of `values`.
    pub fn seed(values: &[f64]) -> Vec<Dual2> {
        let n = values.len();
        values.iter().enumerate().map(|(i, &v)| Dual2::variable(v, i, n)).collect()
    }

    /// Builds a dual from explicit parts. `h` is row-major `n x n`.
    pub fn from_parts(v: f64, g: Vec<f64>, h: Vec<f64>) -> Self {
        assert_eq!(g.len() * g.len(), h.len(), "hessian size mismatch");
        Dual2 { v, g, h }
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    /// Number of independent variables (0 for constants).
    pub fn nvars(&self) -> usize {
        self.g.len()
    }

    pub fn is_constant(&self) -> bool {
        self.g.is_empty()
    }

    /// Gradient as a slice; empty for constants.
    pub fn grad_slice(&self) -> &[f64] {
        &self.g
    }

    /// Row-major Hessian; empty for constants.
    pub fn hess_slice(&self) -> &[f64] {
        &self.h
    }

    /// Gradient as a vector of length `n` (zeros for constants).
    pub fn grad(&self, n: usize) -> DVector<f64> {
        if self.g.is_empty() {
            DVector::zeros(n)
        } else {
            DVector::from_column_slice(&self.g)
        }
    }

    /// Hessian as an `n x n` matrix (zeros for constants).
    pub fn hess(&self, n: usize) -> DMatrix<f64> {
        if self.h.is_empty() {
            DMatrix::zeros(n, n)
        } else {
            DMatrix::from_row_slice(n, n, &self.h)
        }
    }

    /// Re-expresses the derivatives in a larger variable space: local variable
    /// `i` becomes variable `map[i]` of `n_new`.
    pub fn embed(&self, map: &[usize], n_new: usize) -> Dual2 {
        if self.is_constant() {
            return self.clone();
        }
        let n = self.nvars();
        assert_eq!(map.len(), n);
        let mut g = vec![0.0; n_new];
        let mut h = vec![0.0; n_new * n_new];
        for i in 0..n {
            g[map[i]] += self.g[i];
            for j in 0..n {
                h[map[i] * n_new + map[j]] += self.h[i * n + j];
            }
        }
        Dual2 { v: self.v, g, h }
    }

    /// Second-order chain rule. `self` is a function of intermediate
    /// variables `y` (its derivatives are with respect to `y`), and `inner[i]`
    /// gives `y_i` as a dual in the final variable space.
    pub fn compose(&self, inner: &[Dual2]) -> Dual2 {
        if self.is_constant() {
            return self.clone();
        }
        let m = self.nvars();
        assert_eq!(inner.len(), m, "compose: inner length mismatch");
        let n = inner.iter().map(|d| d.nvars()).max().unwrap_or(0);
        if n == 0 {
            return Dual2::constant(self.v);
        }
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        // grad and first-order Hessian part
        for (i, yi) in inner.iter().enumerate() {
            if yi.is_constant() {
                continue;
            }
            let c = self.g[i];
            if c != 0.0 {
                for a in 0..n {
                    g[a] += c * yi.g[a];
                }
                for k in 0..n * n {
                    h[k] += c * yi.h[k];
                }
            }
        }
        // outer Hessian contracted with inner gradients: sum_ij H_ij g_i g_j^T
        let mut t = vec![0.0; n];
        for i in 0..m {
            if inner[i].is_constant() {
                continue;
            }
            t.iter_mut().for_each(|x| *x = 0.0);
            let mut any = false;
            for j in 0..m {
                let hij = self.h[i * m + j];
                if hij != 0.0 && !inner[j].is_constant() {
                    any = true;
                    for a in 0..n {
                        t[a] += hij * inner[j].g[a];
                    }
                }
            }
            if !any {
                continue;
            }
            let gi = &inner[i].g;
            for a in 0..n {
                let ga = gi[a];
                if ga == 0.0 {
                    continue;
                }
                let row = &mut h[a * n..(a + 1) * n];
                for b in 0..n {
                    row[b] += ga * t[b];
                }
            }
        }
        Dual2 { v: self.v, g, h }
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.value()`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Dual2 {
        if self.is_constant() {
            return Dual2::constant(f0);
        }
        let n = self.nvars();
        let g: Vec<f64> = self.g.iter().map(|x| f1 * x).collect();
        let mut h: Vec<f64> = self.h.iter().map(|x| f1 * x).collect();
        if f2 != 0.0 {
            for i in 0..n {
                let gi = f2 * self.g[i];
                if gi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    h[i * n + j] += gi * self.g[j];
                }
            }
        }
        Dual2 { v: f0, g, h }
    }

    /// Applies a binary function `f(a, b)` given its value, gradient
    /// `(fa, fb)` and Hessian `(faa, fab, fbb)`.
    #[allow(clippy::too_many_arguments)]
    pub fn chain2(a: &Dual2, b: &Dual2, f0: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Dual2 {
        match (a.is_constant(), b.is_constant()) {
            (true, true) => return Dual2::constant(f0),
            (false, true) => return a.chain(f0, fa, faa),
            (true, false) => return b.chain(f0, fb, fbb),
            _ => {}
        }
        let n = a.nvars();
        assert_eq!(n, b.nvars(), "dual variable-count mismatch");
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            g[i] = fa * a.g[i] + fb * b.g[i];
        }
        for k in 0..n * n {
            h[k] = fa * a.h[k] + fb * b.h[k];
        }
        for i in 0..n {
            let (ai, bi) = (a.g[i], b.g[i]);
            for j in 0..n {
                let (aj, bj) = (a.g[j], b.g[j]);
                h[i * n + j] += faa * ai * aj + fbb * bi * bj + fab * (ai * bj + bi * aj);
            }
        }
        Dual2 { v: f0, g, h }
    }

    fn add_impl(&self, o: &Dual2, sign: f64) -> Dual2 {
        let v = self.v + sign * o.v;
        match (self.is_constant(), o.is_constant()) {
            (true, true) => Dual2::constant(v),
            (false, true) => Dual2 { v, g: self.g.clone(), h: self.h.clone() },
            (true, false) => {
                Dual2 { v, g: o.g.iter().map(|x| sign * x).collect(), h: o.h.iter().map(|x| sign * x).collect() }
            }
            (false, false) => {
                assert_eq!(self.nvars(), o.nvars(), "dual variable-count mismatch");
                Dual2 {
                    v,
                    g: self.g.iter().zip(&o.g).map(|(a, b)| a + sign * b).collect(),
                    h: self.h.iter().zip(&o.h).map(|(a, b)| a + sign * b).collect(),
                }
            }
        }
    }

    fn mul_impl(&self, o: &Dual2) -> Dual2 {
        let v = self.v * o.v;
        match (self.is_constant(), o.is_constant()) {
            (true, true) => Dual2::constant(v),
            (false, true) => self.scale(o.v),
            (true, false) => o.scale(self.v),
            (false, false) => {
                let n = self.nvars();
                assert_eq!(n, o.nvars(), "dual variable-count mismatch");
                let (a, b) = (self.v, o.v);
                let g: Vec<f64> = (0..n).map(|i| a * o.g[i] + b * self.g[i]).collect();
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    let (ai, bi) = (self.g[i], o.g[i]);
                    for j in 0..n {
                        let k = i * n + j;
                        h[k] = a * o.h[k] + b * self.h[k] + ai * o.g[j] + bi * self.g[j];
                    }
                }
                Dual2 { v, g, h }
            }
        }
    }

    pub fn scale(&self, s: f64) -> Dual2 {
        Dual2 { v: self.v * s, g: self.g.iter().map(|x| x * s).collect(), h: self.h.iter().map(|x| x * s).collect() }
    }

    pub fn recip(&self) -> Dual2 {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        self.add_impl(&o, 1.0)
    }
}
impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        self.add_impl(&o, -1.0)
    }
}
impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        self.mul_impl(&o)
    }
}
impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, o: Dual2) -> Dual2 {
        if o.is_constant() {
            return self.scale(1.0 / o.v);
        }
        self.mul_impl(&o.recip())
    }
}
impl<'a> Add<&'a Dual2> for &'a Dual2 {
    type Output = Dual2;
    fn add(self, o: &Dual2) -> Dual2 {
        self.add_impl(o, 1.0)
    }
}
impl<'a> Sub<&'a Dual2> for &'a Dual2 {
    type Output = Dual2;
    fn sub(self, o: &Dual2) -> Dual2 {
        self.add_impl(o, -1.0)
    }
}
impl<'a> Mul<&'a Dual2> for &'a Dual2 {
    type Output = Dual2;
    fn mul(self, o: &Dual2) -> Dual2 {
        self.mul_impl(o)
    }
}
impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        self.scale(-1.0)
    }
}
impl Add<f64> for Dual2 {
    type Output = Dual2;
    fn add(mut self, o: f64) -> Dual2 {
        self.v += o;
        self
    }
}
impl Sub<f64> for Dual2 {
    type Output = Dual2;
    fn sub(mut self, o: f64) -> Dual2 {
        self.v -= o;
        self
    }
}
impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(self, o: f64) -> Dual2 {
        self.scale(o)
    }
}
impl Div<f64> for Dual2 {
    type Output = Dual2;
    fn div(self, o: f64) -> Dual2 {
        self.scale(1.0 / o)
    }
}
impl AddAssign for Dual2 {
    fn add_assign(&mut self, o: Dual2) {
        *self = self.add_impl(&o, 1.0);
    }
}

/// Scalar field usable by the geometric kernels: `f64` or [`Dual2`].
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    /// Four-quadrant arctangent of `self / x`.
    fn atan2(&self, x: &Self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
}

impl Scalar for Dual2 {
    fn cst(v: f64) -> Self {
        Dual2::constant(v)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn atan2(&self, x: &Self) -> Self {
        // f(y, x) = atan2(y, x); r2 = x^2 + y^2
        let (y0, x0) = (self.v, x.v);
        let r2 = x0 * x0 + y0 * y0;
        let fy = x0 / r2;
        let fx = -y0 / r2;
        let r4 = r2 * r2;
        let fyy = -2.0 * x0 * y0 / r4;
        let fxx = 2.0 * x0 * y0 / r4;
        let fxy = (y0 * y0 - x0 * x0) / r4;
        Dual2::chain2(self, x, y0.atan2(x0), fy, fx, fyy, fxy, fxx)
    }
}

/// 3-vector over a [`Scalar`].
#[derive(Clone, Debug)]
pub struct V3<T>(pub [T; 3]);

impl<T: Scalar> V3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        V3([x, y, z])
    }
    pub fn zeros() -> Self {
        V3([T::cst(0.0), T::cst(0.0), T::cst(0.0)])
    }
    pub fn from_f64(v: &Vector3<f64>) -> Self {
        V3([T::cst(v[0]), T::cst(v[1]), T::cst(v[2])])
    }
    pub fn values(&self) -> Vector3<f64> {
        Vector3::new(self.0[0].val(), self.0[1].val(), self.0[2].val())
    }
    pub fn dot(&self, o: &V3<T>) -> T {
        self.0[0].clone() * o.0[0].clone() + self.0[1].clone() * o.0[1].clone() + self.0[2].clone() * o.0[2].clone()
    }
    pub fn dot_f(&self, o: &Vector3<f64>) -> T {
        self.0[0].clone() * o[0] + self.0[1].clone() * o[1] + self.0[2].clone() * o[2]
    }
    pub fn cross(&self, o: &V3<T>) -> V3<T> {
        let [a0, a1, a2] = &self.0;
        let [b0, b1, b2] = &o.0;
        V3([
            a1.clone() * b2.clone() - a2.clone() * b1.clone(),
            a2.clone() * b0.clone() - a0.clone() * b2.clone(),
            a0.clone() * b1.clone() - a1.clone() * b0.clone(),
        ])
    }
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }
    pub fn normalize(&self) -> V3<T> {
        let n = self.norm();
        self.div_s(&n)
    }
    pub fn scale(&self, s: &T) -> V3<T> {
        V3([self.0[0].clone() * s.clone(), self.0[1].clone() * s.clone(), self.0[2].clone() * s.clone()])
    }
    pub fn scale_f(&self, s: f64) -> V3<T> {
        V3([self.0[0].clone() * s, self.0[1].clone() * s, self.0[2].clone() * s])
    }
    pub fn div_s(&self, s: &T) -> V3<T> {
        V3([self.0[0].clone() / s.clone(), self.0[1].clone() / s.clone(), self.0[2].clone() / s.clone()])
    }
    pub fn add(&self, o: &V3<T>) -> V3<T> {
        V3([self.0[0].clone() + o.0[0].clone(), self.0[1].clone() + o.0[1].clone(), self.0[2].clone() + o.0[2].clone()])
    }
    pub fn sub(&self, o: &V3<T>) -> V3<T> {
        V3([self.0[0].clone() - o.0[0].clone(), self.0[1].clone() - o.0[1].clone(), self.0[2].clone() - o.0[2].clone()])
    }
    pub fn add_f(&self, o: &Vector3<f64>) -> V3<T> {
        V3([self.0[0].clone() + o[0], self.0[1].clone() + o[1], self.0[2].clone() + o[2]])
    }
    pub fn sub_f(&self, o: &Vector3<f64>) -> V3<T> {
        V3([self.0[0].clone() - o[0], self.0[1].clone() - o[1], self.0[2].clone() - o[2]])
    }
    /// `self + s * o`.
    pub fn axpy(&self, s: &T, o: &V3<T>) -> V3<T> {
        self.add(&o.scale(s))
    }
}

/// 3x3 matrix over a [`Scalar`], stored row-major.
#[derive(Clone, Debug)]
pub struct M3<T>(pub [[T; 3]; 3]);

impl<T: Scalar> M3<T> {
    pub fn identity() -> Self {
        let z = || T::cst(0.0);
        let o = || T::cst(1.0);
        M3([[o(), z(), z()], [z(), o(), z()], [z(), z(), o()]])
    }
    pub fn from_f64(m: &Matrix3<f64>) -> Self {
        M3(std::array::from_fn(|i| std::array::from_fn(|j| T::cst(m[(i, j)]))))
    }
    pub fn from_cols(c0: &V3<T>, c1: &V3<T>, c2: &V3<T>) -> Self {
        M3(std::array::from_fn(|i| [c0.0[i].clone(), c1.0[i].clone(), c2.0[i].clone()]))
    }
    pub fn values(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[i][j].val())
    }
    pub fn col(&self, j: usize) -> V3<T> {
        V3([self.0[0][j].clone(), self.0[1][j].clone(), self.0[2][j].clone()])
    }
    pub fn transpose(&self) -> M3<T> {
        M3(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i].clone())))
    }
    pub fn trace(&self) -> T {
        self.0[0][0].clone() + self.0[1][1].clone() + self.0[2][2].clone()
    }
    pub fn mul(&self, o: &M3<T>) -> M3<T> {
        M3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                self.0[i][0].clone() * o.0[0][j].clone()
                    + self.0[i][1].clone() * o.0[1][j].clone()
                    + self.0[i][2].clone() * o.0[2][j].clone()
            })
        }))
    }
    /// Product with a constant matrix on the right.
    pub fn mul_f(&self, o: &Matrix3<f64>) -> M3<T> {
        M3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                self.0[i][0].clone() * o[(0, j)] + self.0[i][1].clone() * o[(1, j)] + self.0[i][2].clone() * o[(2, j)]
            })
        }))
    }
    /// Product with a constant matrix on the left.
    pub fn f_mul(o: &Matrix3<f64>, m: &M3<T>) -> M3<T> {
        M3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                m.0[0][j].clone() * o[(i, 0)] + m.0[1][j].clone() * o[(i, 1)] + m.0[2][j].clone() * o[(i, 2)]
            })
        }))
    }
    pub fn mul_v(&self, v: &V3<T>) -> V3<T> {
        V3(std::array::from_fn(|i| {
            self.0[i][0].clone() * v.0[0].clone()
                + self.0[i][1].clone() * v.0[1].clone()
                + self.0[i][2].clone() * v.0[2].clone()
        }))
    }
    /// `self^T v`.
    pub fn tr_mul_v(&self, v: &V3<T>) -> V3<T> {
        V3(std::array::from_fn(|i| {
            self.0[0][i].clone() * v.0[0].clone()
                + self.0[1][i].clone() * v.0[1].clone()
                + self.0[2][i].clone() * v.0[2].clone()
        }))
    }
    pub fn add(&self, o: &M3<T>) -> M3<T> {
        M3(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j].clone() + o.0[i][j].clone())))
    }
    pub fn scale(&self, s: &T) -> M3<T> {
        M3(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j].clone() * s.clone())))
    }
    /// Skew-symmetric matrix `S(v)` with `S(v) w = v x w`.
    pub fn skew(v: &V3<T>) -> M3<T> {
        let z = T::cst(0.0);
        let [a, b, c] = &v.0;
        M3([[z.clone(), -c.clone(), b.clone()], [c.clone(), z.clone(), -a.clone()], [-b.clone(), a.clone(), z]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sin_times_y_example() {
        let v = Dual2::seed(&[0.5, 2.0]);
        let f = v[0].sin() * v[1].clone();
        assert!((f.value() - 0.958851077208406).abs() < 1e-15);
        let g = f.grad(2);
        assert!((g[0] - 2.0 * 0.5f64.cos()).abs() < 1e-14);
        assert!((g[1] - 0.5f64.sin()).abs() < 1e-14);
        let h = f.hess(2);
        assert!((h[(0, 0)] + 2.0 * 0.5f64.sin()).abs() < 1e-14);
        assert!((h[(0, 1)] - 0.5f64.cos()).abs() < 1e-14);
        assert!((h[(1, 0)] - 0.5f64.cos()).abs() < 1e-14);
        assert_eq!(h[(1, 1)], 0.0);
    }

    #[test]
    fn seed_gives_unit_gradients() {
        let v = Dual2::seed(&[1.0, 2.0, 3.0]);
        for (i, d) in v.iter().enumerate() {
            let g = d.grad(3);
            for j in 0..3 {
                assert_eq!(g[j], if i == j { 1.0 } else { 0.0 });
            }
            assert!(d.hess(3).iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn norm_of_cross_matches_fd() {
        let f = |x: &[f64]| {
            let a = Vector3::new(x[0], x[1], x[2]);
            let b = Vector3::new(x[3], x[4], x[5]);
            a.cross(&b).norm() / (x[0] * x[0] + 1.0)
        };
        let x0 = [0.3, -1.2, 0.7, 1.1, 0.4, -0.5];
        let d = Dual2::seed(&x0);
        let a = V3::new(d[0].clone(), d[1].clone(), d[2].clone());
        let b = V3::new(d[3].clone(), d[4].clone(), d[5].clone());
        let r = a.cross(&b).norm() / (d[0].clone() * d[0].clone() + 1.0);
        let g_fd = fd_grad(&f, &x0, 1e-6);
        for i in 0..6 {
            assert!((r.grad(6)[i] - g_fd[i]).abs() < 1e-8);
        }
        let h = r.hess(6);
        for i in 0..6 {
            let gi = |x: &[f64]| fd_grad(&f, x, 1e-5)[i];
            let hfd = fd_grad(&gi, &x0, 1e-4);
            for j in 0..6 {
                assert!((h[(i, j)] - hfd[j]).abs() < 1e-4, "h[{i},{j}]");
            }
        }
    }

    #[test]
    fn atan2_derivatives_match_fd() {
        let f = |x: &[f64]| x[0].atan2(x[1]) * x[0];
        let x0 = [0.4, -0.9];
        let d = Dual2::seed(&x0);
        let r = d[0].atan2(&d[1]) * d[0].clone();
        let g_fd = fd_grad(&f, &x0, 1e-6);
        for i in 0..2 {
            assert!((r.grad(2)[i] - g_fd[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn compose_equals_direct_evaluation() {
        // outer(y) = y0 * sin(y1), inner y = (x0*x1, x0 + x2^2)
        let x0 = [0.3, 1.7, -0.4];
        let x = Dual2::seed(&x0);
        let y0 = x[0].clone() * x[1].clone();
        let y1 = x[0].clone() + x[2].clone() * x[2].clone();
        let direct = y0.clone() * y1.sin();
        let y = Dual2::seed(&[y0.value(), y1.value()]);
        let outer = y[0].clone() * y[1].sin();
        let composed = outer.compose(&[y0, y1]);
        assert!((composed.value() - direct.value()).abs() < 1e-15);
        for (a, b) in composed.grad_slice().iter().zip(direct.grad_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in composed.hess_slice().iter().zip(direct.hess_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_relocates_derivatives() {
        let x = Dual2::seed(&[2.0, 3.0]);
        let f = x[0].clone() * x[1].clone();
        let e = f.embed(&[3, 1], 4);
        assert_eq!(e.grad(4).as_slice(), &[0.0, 2.0, 0.0, 3.0]);
        let h = e.hess(4);
        assert_eq!(h[(3, 1)], 1.0);
        assert_eq!(h[(1, 3)], 1.0);
    }

    #[test]
    fn constants_mix_without_derivatives() {
        let c = Dual2::constant(2.0);
        let x = Dual2::seed(&[3.0]);
        let r = c.clone() * x[0].clone() + c.clone();
        assert_eq!(r.value(), 8.0);
        assert_eq!(r.grad(1)[0], 2.0);
        let k = c.clone() * c;
        assert!(k.is_constant());
    }
}
