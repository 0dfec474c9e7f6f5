//! Weighted squared-error Lasso.
//!
//! Minimizes `sum_i w_i (x_i^T beta - r_i)^2 + lambda * ||beta||_1` by cyclic
//! coordinate descent on the weighted Gram form of the data. Losses are sums,
//! not averages; averaged losses are expressed through the weights
//! (`w_i = 1 / n`).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "coordinate descent did not converge after {} sweeps (kkt violation {:.3e})",
        .0.iterations,
        .0.kkt_violation
    )]
    NonConvergence(Box<LassoSolution>),
}

impl LassoError {
    /// The best iterate reached before giving up, if the solver got that far.
    pub fn partial_solution(&self) -> Option<&LassoSolution> {
        match self {
            LassoError::NonConvergence(sol) => Some(sol),
            _ => None,
        }
    }
}

/// One weighted observation `(w, x, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub weight: f64,
    pub x: Vec<f64>,
    pub reward: f64,
}

impl Sample {
    pub fn new(weight: f64, x: Vec<f64>, reward: f64) -> Self {
        Self { weight, x, reward }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedLassoProblem {
    dim: usize,
    lambda: f64,
    samples: Vec<Sample>,
}

impl WeightedLassoProblem {
    pub fn new(dim: usize, lambda: f64, samples: Vec<Sample>) -> Result<Self, LassoError> {
        if dim == 0 {
            return Err(LassoError::InvalidProblem("dimension must be positive".into()));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LassoError::InvalidProblem(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != dim {
                return Err(LassoError::DimensionMismatch { expected: dim, got: s.x.len() });
            }
            if !(s.weight >= 0.0) || !s.weight.is_finite() {
                return Err(LassoError::InvalidProblem(format!(
                    "sample {i} has invalid weight {}",
                    s.weight
                )));
            }
            if !s.reward.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
                return Err(LassoError::InvalidProblem(format!("sample {i} is not finite")));
            }
        }
        Ok(Self { dim, lambda, samples })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn gram_stats(&self) -> GramStats {
        let mut stats = GramStats::new(self.dim);
        for s in &self.samples {
            stats.add(s.weight, &s.x, s.reward);
        }
        stats
    }
}

/// Sufficient statistics of a weighted least-squares loss:
/// `G = sum w x x^T`, `c = sum w r x`, `rr = sum w r^2`.
///
/// The squared loss at `beta` is `beta^T G beta - 2 c^T beta + rr`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramStats {
    dim: usize,
    gram: Vec<f64>,
    xr: Vec<f64>,
    rr: f64,
    positive_weight: bool,
}

impl GramStats {
    pub fn new(dim: usize) -> Self {
        Self { dim, gram: vec![0.0; dim * dim], xr: vec![0.0; dim], rr: 0.0, positive_weight: false }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add(&mut self, weight: f64, x: &[f64], reward: f64) {
        debug_assert_eq!(x.len(), self.dim);
        if weight == 0.0 {
            return;
        }
        self.positive_weight = true;
        let d = self.dim;
        for i in 0..d {
            let wxi = weight * x[i];
            if wxi == 0.0 {
                continue;
            }
            let row = &mut self.gram[i * d..(i + 1) * d];
            for (g, &xj) in row.iter_mut().zip(x) {
                *g += wxi * xj;
            }
            self.xr[i] += wxi * reward;
        }
        self.rr += weight * reward * reward;
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GramStats, b: f64) -> GramStats {
        assert_eq!(self.dim, other.dim);
        let lin = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| a * x + b * y).collect();
        GramStats {
            dim: self.dim,
            gram: lin(&self.gram, &other.gram),
            xr: lin(&self.xr, &other.xr),
            rr: a * self.rr + b * other.rr,
            positive_weight: (self.positive_weight && a > 0.0) || (other.positive_weight && b > 0.0),
        }
    }

    pub fn scaled(&self, a: f64) -> GramStats {
        GramStats {
            dim: self.dim,
            gram: self.gram.iter().map(|g| a * g).collect(),
            xr: self.xr.iter().map(|g| a * g).collect(),
            rr: a * self.rr,
            positive_weight: self.positive_weight && a > 0.0,
        }
    }

    pub fn has_positive_weight(&self) -> bool {
        self.positive_weight
    }

    /// Row-major `d x d` Gram matrix.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.dim).map(|j| self.gram[j * self.dim + j]).fold(0.0, f64::max)
    }

    /// Gradient of the squared loss, `2 (G beta - c)`.
    pub fn loss_gradient(&self, beta: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.gram[i * d..(i + 1) * d];
                let g: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
                2.0 * (g - self.xr[i])
            })
            .collect()
    }

    pub fn objective(&self, beta: &[f64], lambda: f64) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        for i in 0..d {
            if beta[i] == 0.0 {
                continue;
            }
            let row = &self.gram[i * d..(i + 1) * d];
            quad += beta[i] * row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        }
        let lin: f64 = self.xr.iter().zip(beta).map(|(a, b)| a * b).sum();
        quad - 2.0 * lin + self.rr + lambda * l1_norm(beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute tolerance on both the coordinate updates and the KKT certificate.
    pub tol: f64,
    /// Maximum number of coordinate sweeps.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    /// Largest slack in the coordinate-wise subgradient conditions.
    pub kkt_violation: f64,
    /// Coordinate sweeps performed.
    pub iterations: usize,
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Exact objective evaluated sample by sample.
pub fn objective(problem: &WeightedLassoProblem, beta: &[f64]) -> f64 {
    assert_eq!(beta.len(), problem.dim, "beta has wrong dimension");
    let loss: f64 = problem
        .samples
        .iter()
        .map(|s| {
            let pred: f64 = s.x.iter().zip(beta).map(|(a, b)| a * b).sum();
            s.weight * (pred - s.reward).powi(2)
        })
        .sum();
    loss + problem.lambda * l1_norm(beta)
}

/// Slack of the subgradient optimality conditions given the loss gradient.
pub fn kkt_violation(loss_grad: &[f64], beta: &[f64], lambda: f64) -> f64 {
    loss_grad
        .iter()
        .zip(beta)
        .map(|(&g, &b)| {
            if b != 0.0 {
                (g + lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

pub fn solve(
    problem: &WeightedLassoProblem,
    warm_start: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<LassoSolution, LassoError> {
    if !problem.samples.iter().any(|s| s.weight > 0.0) {
        return Err(LassoError::InvalidProblem("no sample with positive weight".into()));
    }
    solve_gram(&problem.gram_stats(), problem.lambda, warm_start, opts)
}

/// Coordinate descent on precomputed sufficient statistics.
///
/// Coordinates with a zero Gram diagonal carry no information and are pinned
/// to zero.
pub fn solve_gram(
    stats: &GramStats,
    lambda: f64,
    warm_start: Option<&[f64]>,
    opts: SolverOptions,
) -> Result<LassoSolution, LassoError> {
    let d = stats.dim;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LassoError::InvalidProblem(format!("lambda must be positive, got {lambda}")));
    }
    if !(opts.tol > 0.0) {
        return Err(LassoError::InvalidProblem(format!("tol must be positive, got {}", opts.tol)));
    }
    if !stats.positive_weight {
        return Err(LassoError::InvalidProblem("no sample with positive weight".into()));
    }
    let g = &stats.gram;
    let diag: Vec<f64> = (0..d).map(|j| g[j * d + j]).collect();

    let mut beta = match warm_start {
        Some(w) => {
            if w.len() != d {
                return Err(LassoError::DimensionMismatch { expected: d, got: w.len() });
            }
            w.to_vec()
        }
        None => vec![0.0; d],
    };
    for j in 0..d {
        if diag[j] <= 0.0 || !beta[j].is_finite() {
            beta[j] = 0.0;
        }
    }

    // q = G beta, maintained incrementally and refreshed before each KKT check.
    let mut q = gram_times(g, &beta, d);
    let half_lambda = 0.5 * lambda;

    let update = |j: usize, beta: &mut [f64], q: &mut [f64]| -> f64 {
        if diag[j] <= 0.0 {
            return 0.0;
        }
        let old = beta[j];
        let z = stats.xr[j] - (q[j] - diag[j] * old);
        let new = soft_threshold(z, half_lambda) / diag[j];
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            let row = &g[j * d..(j + 1) * d];
            for (qi, gi) in q.iter_mut().zip(row) {
                *qi += gi * delta;
            }
        }
        delta.abs()
    };

    let mut iterations = 0usize;
    let mut kkt = f64::INFINITY;
    while iterations < opts.max_iter {
        // full sweep
        iterations += 1;
        let mut max_delta = 0.0f64;
        for j in 0..d {
            max_delta = max_delta.max(update(j, &mut beta, &mut q));
        }
        if max_delta < opts.tol {
            q = gram_times(g, &beta, d);
            let grad: Vec<f64> = (0..d).map(|i| 2.0 * (q[i] - stats.xr[i])).collect();
            kkt = kkt_violation(&grad, &beta, lambda);
            if kkt <= opts.tol || max_delta == 0.0 {
                break;
            }
            continue;
        }
        // sweeps restricted to the current support until it settles
        let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
        while iterations < opts.max_iter {
            iterations += 1;
            let mut max_delta = 0.0f64;
            for &j in &active {
                max_delta = max_delta.max(update(j, &mut beta, &mut q));
            }
            if max_delta < opts.tol {
                break;
            }
        }
    }
    if !kkt.is_finite() || iterations >= opts.max_iter {
        let q = gram_times(g, &beta, d);
        let grad: Vec<f64> = (0..d).map(|i| 2.0 * (q[i] - stats.xr[i])).collect();
        kkt = kkt_violation(&grad, &beta, lambda);
    }

    let solution = LassoSolution {
        objective: stats.objective(&beta, lambda),
        beta_hat: beta,
        kkt_violation: kkt,
        iterations,
    };
    if solution.kkt_violation <= opts.tol {
        Ok(solution)
    } else {
        Err(LassoError::NonConvergence(Box::new(solution)))
    }
}

fn gram_times(g: &[f64], beta: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| g[i * d..(i + 1) * d].iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}
