//! Compatibility constant over the cone `{v : ||v_{S^c}||_1 <= 3 ||v_S||_1}`.
//!
//! `phi^2(M, S) = min |S| v^T M v / ||v_S||_1^2`. The ratio is scale free, so
//! the minimum is taken over `||v_S||_1 = 1`, `||v_{S^c}||_1 <= 3`. Fixing the
//! signs of `v_S` turns the normalization into a simplex constraint and each
//! piece into a convex QP when `M` is PSD; the exact method solves all
//! `2^(|S|-1)` pieces (a pattern and its negation give the same value).

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SquareMatrix;
use crate::streams::SimRng;
use rand::SeedableRng;

pub const MAX_EXACT_SUPPORT: usize = 12;
const CONE_RADIUS: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum CompatError {
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("support of size {0} is too large for sign enumeration (max {MAX_EXACT_SUPPORT})")]
    TooLargeForExact(usize),
    #[error("invalid support: {0}")]
    InvalidSupport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompatMethod {
    ExactSignEnum,
    /// Random cone starts with local descent; an upper bound only.
    MultiStart { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct CompatQuery {
    pub matrix: SquareMatrix,
    pub support: Vec<usize>,
    pub method: CompatMethod,
    /// Iterations per sign pattern (exact) or number of starts (multi-start).
    pub budget: usize,
}

impl CompatQuery {
    pub fn exact(matrix: SquareMatrix, support: &[usize]) -> Self {
        Self { matrix, support: support.to_vec(), method: CompatMethod::ExactSignEnum, budget: 200_000 }
    }

    pub fn multi_start(matrix: SquareMatrix, support: &[usize], starts: usize, seed: u64) -> Self {
        Self { matrix, support: support.to_vec(), method: CompatMethod::MultiStart { seed }, budget: starts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatResult {
    pub phi_sq: f64,
    /// A cone vector attaining `phi_sq`, normalized to `||v_S||_1 = 1`.
    pub witness: Vec<f64>,
    /// True when the value is only an upper bound on the minimum.
    pub heuristic: bool,
}

pub fn compatibility_constant(query: &CompatQuery) -> Result<f64, CompatError> {
    compatibility_detail(query).map(|r| r.phi_sq)
}

pub fn compatibility_detail(query: &CompatQuery) -> Result<CompatResult, CompatError> {
    let d = query.matrix.dim();
    let m = &query.matrix;
    let scale = m.max_abs();
    let asym = m.max_asymmetry();
    if asym > 1e-10 * scale.max(1.0) {
        return Err(CompatError::NotSymmetric(asym));
    }
    let mut support = query.support.clone();
    support.sort_unstable();
    support.dedup();
    if support.is_empty() {
        return Err(CompatError::InvalidSupport("support is empty".into()));
    }
    if support.len() != query.support.len() {
        return Err(CompatError::InvalidSupport("support has duplicate indices".into()));
    }
    if let Some(&i) = support.iter().find(|&&i| i >= d) {
        return Err(CompatError::InvalidSupport(format!("index {i} out of range for d = {d}")));
    }
    let s = support.len();
    if matches!(query.method, CompatMethod::ExactSignEnum) && s > MAX_EXACT_SUPPORT {
        return Err(CompatError::TooLargeForExact(s));
    }

    let in_support: Vec<bool> = (0..d).map(|i| support.binary_search(&i).is_ok()).collect();
    let off: Vec<usize> = (0..d).filter(|&i| !in_support[i]).collect();

    if scale == 0.0 {
        let mut witness = vec![0.0; d];
        witness[support[0]] = 1.0;
        return Ok(CompatResult { phi_sq: 0.0, witness, heuristic: false });
    }
    // solve on M / scale, undo at the end
    let normalized = m.scaled(1.0 / scale);
    let problem = ConeQp::new(&normalized, &support, &off);

    let (best_val, best_v, heuristic) = match query.method {
        CompatMethod::ExactSignEnum => {
            let tol = 1e-7 / s as f64;
            let mut best = (f64::INFINITY, Vec::new());
            for pattern in 0..(1usize << (s - 1)) {
                let signs: Vec<f64> = (0..s).map(|i| if i > 0 && pattern >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
                let start = problem.center(&signs);
                let (val, v) = problem.minimize(&signs, start, query.budget.max(1), tol);
                if val < best.0 {
                    best = (val, v);
                }
            }
            (best.0, best.1, false)
        }
        CompatMethod::MultiStart { seed } => {
            let mut rng = SimRng::seed_from_u64(seed);
            let mut best = (f64::INFINITY, Vec::new());
            for _ in 0..query.budget.max(1) {
                let signs: Vec<f64> = (0..s).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let start = problem.random_point(&signs, &mut rng);
                let (val, v) = problem.minimize(&signs, start, 200, 1e-9);
                if val < best.0 {
                    best = (val, v);
                }
            }
            (best.0, best.1, true)
        }
    };
    // the matrix is PSD, so anything below zero is rounding
    Ok(CompatResult { phi_sq: (s as f64 * best_val * scale).max(0.0), witness: best_v, heuristic })
}

/// `min v^T M v` over `{sign(v_i) = signs_i, sum |v_S| = 1} x {||v_off||_1 <= 3}`.
struct ConeQp<'a> {
    m: &'a SquareMatrix,
    support: &'a [usize],
    off: &'a [usize],
    lipschitz: f64,
}

impl<'a> ConeQp<'a> {
    fn new(m: &'a SquareMatrix, support: &'a [usize], off: &'a [usize]) -> Self {
        let lipschitz = 2.0 * 1.05 * m.top_eigenvalue_estimate().abs().max(1e-12);
        Self { m, support, off, lipschitz }
    }

    fn center(&self, signs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m.dim()];
        let s = self.support.len() as f64;
        for (&i, &sg) in self.support.iter().zip(signs) {
            v[i] = sg / s;
        }
        v
    }

    fn random_point(&self, signs: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let mut v = vec![0.0; self.m.dim()];
        let weights: Vec<f64> = self.support.iter().map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        for ((&i, &sg), w) in self.support.iter().zip(signs).zip(&weights) {
            v[i] = sg * w / total;
        }
        if !self.off.is_empty() {
            let dir: Vec<f64> = self.off.iter().map(|_| StandardNormal.sample(rng)).collect();
            let l1: f64 = dir.iter().map(|x: &f64| x.abs()).sum();
            let radius = CONE_RADIUS * rng.random::<f64>();
            if l1 > 0.0 {
                for (&j, x) in self.off.iter().zip(&dir) {
                    v[j] = radius * x / l1;
                }
            }
        }
        v
    }

    fn project(&self, signs: &[f64], v: &mut [f64]) {
        let mut u: Vec<f64> = self.support.iter().zip(signs).map(|(&i, &sg)| sg * v[i]).collect();
        project_simplex(&mut u);
        for ((&i, &sg), ui) in self.support.iter().zip(signs).zip(&u) {
            v[i] = sg * ui;
        }
        if !self.off.is_empty() {
            let mut w: Vec<f64> = self.off.iter().map(|&j| v[j]).collect();
            project_l1_ball(&mut w, CONE_RADIUS);
            for (&j, wj) in self.off.iter().zip(&w) {
                v[j] = *wj;
            }
        }
    }

    /// Frank-Wolfe gap at `v`: an upper bound on `f(v) - f*` for convex `f`.
    fn fw_gap(&self, signs: &[f64], v: &[f64], mv: &[f64]) -> f64 {
        let grad_dot_v: f64 = 2.0 * v.iter().zip(mv).map(|(a, b)| a * b).sum::<f64>();
        let simplex_min = self
            .support
            .iter()
            .zip(signs)
            .map(|(&i, &sg)| 2.0 * sg * mv[i])
            .fold(f64::INFINITY, f64::min);
        let ball_min = -CONE_RADIUS * self.off.iter().map(|&j| (2.0 * mv[j]).abs()).fold(0.0, f64::max);
        grad_dot_v - simplex_min - ball_min
    }

    /// FISTA with function-value restarts.
    fn minimize(&self, signs: &[f64], start: Vec<f64>, max_iter: usize, tol: f64) -> (f64, Vec<f64>) {
        let d = self.m.dim();
        let mut step = 1.0 / self.lipschitz;
        let mut x = start;
        self.project(signs, &mut x);
        let mut mx = self.m.mul_vec(&x);
        let mut fx = dot(&x, &mx);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut next = vec![0.0; d];
        for k in 0..max_iter {
            let my = self.m.mul_vec(&y);
            for i in 0..d {
                next[i] = y[i] - step * 2.0 * my[i];
            }
            self.project(signs, &mut next);
            let mn = self.m.mul_vec(&next);
            let fnext = dot(&next, &mn);
            if fnext > fx + 4.0 * f64::EPSILON * fx.abs() {
                if t == 1.0 {
                    // plain projected step failed: the eigenvalue estimate was low
                    step *= 0.5;
                    if step * self.lipschitz < 1e-6 {
                        break;
                    }
                }
                // momentum overshoot: restart from the last accepted iterate
                t = 1.0;
                y.copy_from_slice(&x);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for i in 0..d {
                y[i] = next[i] + momentum * (next[i] - x[i]);
            }
            std::mem::swap(&mut x, &mut next);
            mx = mn;
            fx = fnext;
            t = t_next;
            if k % 8 == 0 && self.fw_gap(signs, &x, &mx) <= tol {
                break;
            }
        }
        (fx, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(u: &mut [f64]) {
    let mut sorted: Vec<f64> = u.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &val) in sorted.iter().enumerate() {
        cumsum += val;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if val - candidate > 0.0 {
            theta = candidate;
        }
    }
    u.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Euclidean projection onto `{w : ||w||_1 <= radius}`.
pub(crate) fn project_l1_ball(w: &mut [f64], radius: f64) {
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return;
    }
    let mut mags: Vec<f64> = w.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &val) in mags.iter().enumerate() {
        cumsum += val;
        let candidate = (cumsum - radius) / (k + 1) as f64;
        if val - candidate > 0.0 {
            theta = candidate;
        }
    }
    w.iter_mut().for_each(|x| *x = x.signum() * (x.abs() - theta).max(0.0));
}
