//! Load-stepped Newton-Raphson solution of the coupled problem.

use crate::linalg::{solve as linear_solve, LinalgError};
use crate::model::SolveConfig;
use crate::problem::{Evaluation, Problem, ProblemError, State};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("load step {step}: Newton did not converge in {iterations} iterations (residual norms: {}); try more load steps", fmt_trace(.trace))]
    NotConverged { step: usize, iterations: usize, trace: Vec<f64> },
    #[error("load step {step}, iteration {iteration}: {source}")]
    Linear { step: usize, iteration: usize, source: LinalgError },
    #[error("load step {step}, iteration {iteration}: {source}")]
    Evaluation { step: usize, iteration: usize, source: ProblemError },
    #[error("load step {step}: non-finite residual after iteration {iteration}")]
    NonFinite { step: usize, iteration: usize },
}

fn fmt_trace(t: &[f64]) -> String {
    t.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Convergence history of one load step.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub load_factor: f64,
    /// Free-residual norms, one per Newton iteration (the last one converged).
    pub residuals: Vec<f64>,
}

impl StepRecord {
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }
}

/// Converged solution with history.
#[derive(Clone, Debug)]
pub struct Solution {
    pub state: State,
    pub history: Vec<StepRecord>,
    pub evaluation: Evaluation,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Free part of a global vector.
fn free_part(map: &[Option<usize>], nf: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nf];
    for (i, m) in map.iter().enumerate() {
        if let Some(k) = m {
            out[*k] = v[i];
        }
    }
    out
}

/// Newton iteration at a fixed load factor starting from `state`.
pub fn newton(
    problem: &Problem,
    state: &mut State,
    load: f64,
    cfg: &SolveConfig,
    step: usize,
) -> Result<(Vec<f64>, Evaluation), SolveError> {
    let (map, nf) = problem.free_map();
    let mut trace = Vec::new();
    let mut first = None;
    for iteration in 0..=cfg.max_iterations {
        let ev =
            problem.evaluate(state, load, true).map_err(|source| SolveError::Evaluation { step, iteration, source })?;
        let r = free_part(&map, nf, &ev.residual);
        let rn = norm(&r);
        if !rn.is_finite() {
            return Err(SolveError::NonFinite { step, iteration });
        }
        trace.push(rn);
        let r0 = *first.get_or_insert(rn);
        if rn <= cfg.absolute_tolerance || rn <= cfg.tolerance * r0 {
            return Ok((trace, ev));
        }
        if iteration == cfg.max_iterations {
            break;
        }
        let k = ev.tangent.as_ref().unwrap().restrict(&map, nf);
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let name = |i: usize| {
            let g = map.iter().position(|m| *m == Some(i)).unwrap_or(0);
            problem.dof_name(g)
        };
        let dx = linear_solve(&k, &neg, &name).map_err(|source| SolveError::Linear { step, iteration, source })?;
        let mut full = vec![0.0; problem.n_dofs];
        for (i, m) in map.iter().enumerate() {
            if let Some(k) = m {
                full[i] = dx[*k];
            }
        }
        problem.apply_increment(state, &full);
    }
    Err(SolveError::NotConverged { step, iterations: cfg.max_iterations, trace })
}

/// Solves with linearly increasing load factors `k / steps`. `on_step` is
/// called after each converged step.
pub fn solve_with(
    problem: &Problem,
    cfg: &SolveConfig,
    mut on_step: impl FnMut(&StepRecord, &State, &Evaluation),
) -> Result<Solution, SolveError> {
    let mut state = problem.reference_state();
    let mut history = Vec::with_capacity(cfg.load_steps);
    let mut last = None;
    for step in 1..=cfg.load_steps {
        let load = step as f64 / cfg.load_steps as f64;
        let (residuals, ev) = newton(problem, &mut state, load, cfg, step)?;
        let rec = StepRecord { step, load_factor: load, residuals };
        on_step(&rec, &state, &ev);
        history.push(rec);
        last = Some(ev);
    }
    let evaluation = match last {
        Some(ev) => ev,
        None => problem.evaluate(&state, 0.0, false).map_err(|source| SolveError::Evaluation {
            step: 0,
            iteration: 0,
            source,
        })?,
    };
    Ok(Solution { state, history, evaluation })
}

/// Solves with the problem's own solve settings.
pub fn solve(problem: &Problem) -> Result<Solution, SolveError> {
    let cfg = problem.model.solve.clone();
    solve_with(problem, &cfg, |_, _, _| {})
}

/// Configures the global thread pool from `BEAMTIE_THREADS` (once).
pub fn init_threads() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        if let Some(n) = std::env::var("BEAMTIE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    });
}
