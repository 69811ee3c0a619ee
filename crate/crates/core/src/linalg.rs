//! Sparse assembly and direct solution of the Newton systems.

use faer::prelude::*;
use faer::sparse::SparseColMat;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

/// Largest system for which a dense pivot diagnosis is attempted.
const DIAGNOSIS_MAX_DOFS: usize = 6000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular tangent: zero pivot at unknown {index} ({name})")]
    ZeroPivot { index: usize, name: String },
    #[error("singular tangent ({0})")]
    Singular(String),
}

/// Dense element-level contribution: gradient and optional Hessian over a
/// list of global unknowns.
#[derive(Clone, Debug)]
pub struct LocalBlock {
    pub dofs: Vec<usize>,
    pub grad: DVector<f64>,
    pub hess: Option<DMatrix<f64>>,
}

/// Global residual plus sparse tangent in coordinate form.
#[derive(Clone, Debug, Default)]
pub struct SparseSystem {
    pub n: usize,
    pub rhs: Vec<f64>,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        SparseSystem { n, rhs: vec![0.0; n], entries: Vec::new() }
    }

    /// Adds blocks in order (deterministic regardless of how they were
    /// produced).
    pub fn scatter(&mut self, blocks: &[LocalBlock]) {
        for b in blocks {
            for (a, &i) in b.dofs.iter().enumerate() {
                self.rhs[i] += b.grad[a];
            }
            if let Some(h) = &b.hess {
                for (a, &i) in b.dofs.iter().enumerate() {
                    for (c, &j) in b.dofs.iter().enumerate() {
                        let v = h[(a, c)];
                        if v != 0.0 {
                            self.entries.push((i, j, v));
                        }
                    }
                }
            }
        }
    }

    /// Sums duplicate entries; result sorted by (column, row).
    pub fn compress(&mut self) {
        let mut e = std::mem::take(&mut self.entries);
        e.par_sort_unstable_by_key(|&(i, j, _)| (j, i));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(l) if l.0 == i && l.1 == j => l.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        self.entries = out;
    }

    /// Dense copy (diagnostics and tests).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Restricts to the unknowns with `map[i] = Some(k)`.
    pub fn restrict(&self, map: &[Option<usize>], n_free: usize) -> SparseSystem {
        let mut out = SparseSystem::new(n_free);
        for (i, m) in map.iter().enumerate() {
            if let (Some(k), Some(v)) = (m, self.rhs.get(i)) {
                out.rhs[*k] = *v;
            }
        }
        out.entries = self.entries.iter().filter_map(|&(i, j, v)| Some((map[i]?, map[j]?, v))).collect();
        out
    }
}

/// Solves `A x = b` by sparse LU. On failure the dense pivot sequence is
/// inspected to name the first unknown without a usable pivot.
pub fn solve(sys: &SparseSystem, b: &[f64], name: &dyn Fn(usize) -> String) -> Result<Vec<f64>, LinalgError> {
    let n = sys.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let triplets: Vec<(usize, usize, f64)> = sys.entries.clone();
    let attempt = std::panic::catch_unwind(|| -> Option<Vec<f64>> {
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).ok()?;
        let lu = a.sp_lu().ok()?;
        let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        Some((0..n).map(|i| x.read(i, 0)).collect())
    });
    if let Ok(Some(x)) = attempt {
        if x.iter().all(|v| v.is_finite()) && residual_ok(sys, &x, b) {
            return Ok(x);
        }
    }
    Err(diagnose(sys, name))
}

fn residual_ok(sys: &SparseSystem, x: &[f64], b: &[f64]) -> bool {
    let mut r = b.to_vec();
    let mut amax: f64 = 0.0;
    for &(i, j, v) in &sys.entries {
        r[i] -= v * x[j];
        amax = amax.max(v.abs());
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    rn <= 1e-6 * (bn + amax * xn) + f64::MIN_POSITIVE
}

fn diagnose(sys: &SparseSystem, name: &dyn Fn(usize) -> String) -> LinalgError {
    if sys.n > DIAGNOSIS_MAX_DOFS {
        return LinalgError::Singular(format!("factorization failed for {} unknowns", sys.n));
    }
    let mut a = sys.to_dense();
    let n = sys.n;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (p, pv) = (k..n).map(|i| (i, a[(i, k)].abs())).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if !(pv > tol) {
            return LinalgError::ZeroPivot { index: k, name: name(k) };
        }
        if p != k {
            a.swap_rows(p, k);
            perm.swap(p, k);
        }
        let piv = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f != 0.0 {
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
    }
    LinalgError::Singular("factorization inaccurate".into())
}
