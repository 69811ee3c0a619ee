//! Numerical integration rules.

use std::f64::consts::PI;

/// Gauss-Legendre points and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point required");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A quadrature rule: points in natural coordinates and weights.
#[derive(Clone, Debug)]
pub struct Rule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

/// Tensor-product Gauss rule on the cube `[-1,1]^3`.
pub fn hex_rule(n: usize) -> Rule<3> {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j], x[k]]);
                weights.push(w[i] * w[j] * w[k]);
            }
        }
    }
    Rule { points, weights }
}

/// Tensor-product Gauss rule on the square `[-1,1]^2`.
pub fn quad_rule(n: usize) -> Rule<2> {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Rule { points, weights }
}

/// Tetrahedron rules on the unit simplex (volume 1/6): 1 point (degree 1)
/// or 4 points (degree 2).
pub fn tet_rule(npts: usize) -> Rule<3> {
    match npts {
        1 => Rule { points: vec![[0.25, 0.25, 0.25]], weights: vec![1.0 / 6.0] },
        4 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            Rule { points: vec![[b, b, b], [a, b, b], [b, a, b], [b, b, a]], weights: vec![1.0 / 24.0; 4] }
        }
        _ => panic!("unsupported tetrahedron rule with {npts} points"),
    }
}

/// Triangle rules on the unit simplex (area 1/2): 3 points (degree 2) or
/// 7 points (degree 5).
pub fn tri_rule(npts: usize) -> Rule<2> {
    match npts {
        3 => Rule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
        },
        7 => {
            let s = 15f64.sqrt();
            let (a1, b1, w1) = ((9.0 - 2.0 * s) / 21.0, (6.0 + s) / 21.0, (155.0 + s) / 2400.0);
            let (a2, b2, w2) = ((9.0 + 2.0 * s) / 21.0, (6.0 - s) / 21.0, (155.0 - s) / 2400.0);
            Rule {
                points: vec![[1.0 / 3.0, 1.0 / 3.0], [a1, b1], [b1, a1], [b1, b1], [a2, b2], [b2, a2], [b2, b2]],
                weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
            }
        }
        _ => panic!("unsupported triangle rule with {npts} points"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn simplex_rules_integrate_monomials() {
        // int x^a y^b over unit triangle = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).product::<u32>().max(1) as f64;
        let r = tri_rule(7);
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 =
                    r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "a={a} b={b}");
            }
        }
        let t = tet_rule(4);
        for (a, b, c) in [(0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 1, 0), (0, 1, 1)] {
            let q: f64 =
                t.points.iter().zip(&t.weights).map(|(p, w)| w * p[0].powi(a) * p[1].powi(b) * p[2].powi(c)).sum();
            let exact = fact(a as u32) * fact(b as u32) * fact(c as u32) / fact((a + b + c) as u32 + 3);
            assert!((q - exact).abs() < 1e-15);
        }
    }
}
