//! Monte-Carlo estimators for the context-distribution quantities that
//! govern Lasso bandit regret: compatibility constants of Gram matrices,
//! greedy diversity, and the margin of the instantaneous gap.
//!
//! Monte-Carlo loops are split into a fixed number of partitions, each with
//! its own derived random stream, and reduced in partition order. Results
//! therefore depend only on the seed, never on the thread count.

mod compat;

pub use compat::{
    compatibility_constant, compatibility_detail, CompatError, CompatMethod, CompatQuery, CompatResult,
    MAX_EXACT_SUPPORT,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{argmax, optimal_arm, ContextSource, SparseParameter};
use crate::streams::{self, SimRng};

const PARTITIONS: usize = 16;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = *v;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "data length must be dim^2");
        Self { dim, data }
    }

    /// `sum_i w_i x_i x_i^T`.
    pub fn from_rows(rows: &[(f64, Vec<f64>)]) -> Self {
        empirical_gram(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &SquareMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i]).abs());
            }
        }
        worst
    }

    /// l-infinity distance between entries.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.dim).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Rayleigh quotient after power iteration: close to the largest
    /// eigenvalue for PSD input, never above it.
    pub fn top_eigenvalue_estimate(&self) -> f64 {
        let d = self.dim;
        if d == 0 {
            return 0.0;
        }
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.01 * ((i * 7919) % 13) as f64).collect();
        let mut rq = 0.0;
        for _ in 0..300 {
            let w = self.mul_vec(&v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.into_iter().map(|x| x / norm).collect();
            let next = self.quad_form(&v);
            if (next - rq).abs() <= 1e-12 * next.abs() {
                return next;
            }
            rq = next;
        }
        rq
    }

    fn add_outer(&mut self, w: f64, x: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let wxi = w * x[i];
            if wxi == 0.0 {
                continue;
            }
            // upper triangle only; mirrored in `symmetrize_from_upper`
            for j in i..d {
                self.data[i * d + j] += wxi * x[j];
            }
        }
    }

    fn symmetrize_from_upper(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..i {
                self.data[i * d + j] = self.data[j * d + i];
            }
        }
    }
}

/// Exact weighted sum of outer products; symmetric by construction.
pub fn empirical_gram(rows: &[(f64, Vec<f64>)]) -> SquareMatrix {
    let d = rows.first().map_or(0, |(_, x)| x.len());
    let mut m = SquareMatrix::zeros(d);
    for (w, x) in rows {
        assert_eq!(x.len(), d, "rows must share a dimension");
        m.add_outer(*w, x);
    }
    m.symmetrize_from_upper();
    m
}

/// Runs `n` Monte-Carlo draws split over fixed partitions and returns the
/// mean of the per-draw outer products selected by `pick`.
fn mc_gram<S, F>(env: &S, n: usize, seed: u64, tag: &str, pick: F) -> SquareMatrix
where
    S: ContextSource + Sync,
    F: Fn(&crate::environment::ContextSet, &mut SimRng) -> Vec<f64> + Sync,
{
    assert!(n > 0, "need at least one Monte-Carlo draw");
    let d = env.dim();
    let partials: Vec<SquareMatrix> = (0..PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams::stream(seed, tag, p as u64, streams::DIAGNOSTICS);
            let count = n / PARTITIONS + usize::from(p < n % PARTITIONS);
            let mut m = SquareMatrix::zeros(d);
            for t in 0..count {
                let contexts = env.sample_contexts(&mut rng, t);
                let x = pick(&contexts, &mut rng);
                m.add_outer(1.0, &x);
            }
            m
        })
        .collect();
    let mut total = SquareMatrix::zeros(d);
    for part in &partials {
        for (a, b) in total.data.iter_mut().zip(&part.data) {
            *a += b;
        }
    }
    total.symmetrize_from_upper();
    total.scaled(1.0 / n as f64)
}

/// Monte-Carlo estimate of `E[x* x*^T]` for the optimal arm `x*`.
pub fn estimate_optimal_arm_gram<S: ContextSource + Sync>(
    env: &S,
    param: &SparseParameter,
    n_mc: usize,
    seed: u64,
) -> SquareMatrix {
    mc_gram(env, n_mc, seed, "optimal-arm-gram", |c, _| c.arm(optimal_arm(c, param).0).to_vec())
}

/// Monte-Carlo estimate of the averaged-arm Gram `(1/K) E[sum_k x_k x_k^T]`,
/// computed as the Gram of a uniformly drawn arm.
pub fn estimate_average_arm_gram<S: ContextSource + Sync>(env: &S, n_mc: usize, seed: u64) -> SquareMatrix {
    mc_gram(env, n_mc, seed, "average-arm-gram", |c, rng| c.arm(rng.random_range(0..c.arms())).to_vec())
}

/// Gram of the arm chosen greedily with respect to `beta` (lowest index on ties).
pub fn estimate_greedy_gram<S: ContextSource + Sync>(env: &S, beta: &[f64], n_mc: usize, seed: u64) -> SquareMatrix {
    mc_gram(env, n_mc, seed, "greedy-gram", |c, _| c.arm(argmax(&c.scores(beta))).to_vec())
}

/// Compatibility constant with the exact method when the support is small
/// enough, multi-start otherwise.
pub fn phi_sq(m: &SquareMatrix, support: &[usize]) -> Result<f64, CompatError> {
    let query = if support.len() <= MAX_EXACT_SUPPORT {
        CompatQuery::exact(m.clone(), support)
    } else {
        CompatQuery::multi_start(m.clone(), support, 200, 0)
    };
    compatibility_constant(&query)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyDiversity {
    /// `phi^2` of each probe's greedy Gram, in probe order.
    pub per_probe: Vec<f64>,
    /// Minimum over probes: an upper bound on the greedy diversity constant.
    pub phi_g_sq: f64,
    pub mc_tolerance: f64,
}

/// All probes share one Monte-Carlo seed, so adding probes can only lower
/// the reported minimum.
pub fn estimate_greedy_diversity<S: ContextSource + Sync>(
    env: &S,
    param: &SparseParameter,
    beta_probes: &[Vec<f64>],
    n_mc: usize,
    seed: u64,
) -> Result<GreedyDiversity, CompatError> {
    assert!(!beta_probes.is_empty(), "need at least one probe");
    let per_probe = beta_probes
        .iter()
        .map(|beta| phi_sq(&estimate_greedy_gram(env, beta, n_mc, seed), param.support()))
        .collect::<Result<Vec<_>, _>>()?;
    let phi_g_sq = per_probe.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GreedyDiversity { per_probe, phi_g_sq, mc_tolerance: mc_tolerance(n_mc) })
}

/// `beta*` followed by perturbations of it and random unit directions.
pub fn default_probes<R: Rng + ?Sized>(rng: &mut R, param: &SparseParameter, count: usize) -> Vec<Vec<f64>> {
    let d = param.dim();
    let mut probes = vec![param.beta_star().to_vec()];
    while probes.len() < count {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = z.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(1e-300);
        let probe = if probes.len() % 2 == 1 {
            let eps = 0.05 * probes.len() as f64 / count as f64;
            param.beta_star().iter().zip(&z).map(|(b, v)| b + eps * v / norm).collect()
        } else {
            z.iter().map(|v| v / norm).collect()
        };
        probes.push(probe);
    }
    probes.truncate(count.max(1));
    probes
}

pub fn mc_tolerance(n_mc: usize) -> f64 {
    2.0 / (n_mc as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginEstimate {
    pub h_grid: Vec<f64>,
    /// Empirical `P(gap <= h)` at each grid point.
    pub cdf: Vec<f64>,
    pub delta_star: f64,
    pub alpha: f64,
    /// Largest `cdf(h) - (h / delta_star)^alpha` over the grid at the fitted pair.
    pub max_violation: f64,
    pub tolerance: f64,
    pub n_mc: usize,
}

/// Candidate exponents for the margin fit.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=100).map(|i| i as f64 * 0.05).collect()
}

/// Empirical CDF of the instantaneous gap and the grid pair `(delta*, alpha)`
/// consistent with it.
///
/// Among pairs whose bound `(h / delta*)^alpha` dominates the empirical CDF at
/// every grid point (up to `2 / sqrt(n_mc)`), the one closest to the CDF in
/// summed absolute deviation is kept; ties go to the largest `alpha`.
pub fn estimate_margin<S: ContextSource + Sync>(
    env: &S,
    param: &SparseParameter,
    n_mc: usize,
    h_grid: &[f64],
    seed: u64,
) -> MarginEstimate {
    let gaps = sample_gaps(env, param, n_mc, seed);
    fit_margin(&gaps, h_grid, &default_alpha_grid())
}

pub fn sample_gaps<S: ContextSource + Sync>(env: &S, param: &SparseParameter, n: usize, seed: u64) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = (0..PARTITIONS)
        .into_par_iter()
        .map(|p| {
            let mut rng = streams::stream(seed, "gaps", p as u64, streams::DIAGNOSTICS);
            let count = n / PARTITIONS + usize::from(p < n % PARTITIONS);
            (0..count).map(|t| optimal_arm(&env.sample_contexts(&mut rng, t), param).1).collect()
        })
        .collect();
    chunks.concat()
}

pub fn fit_margin(gaps: &[f64], h_grid: &[f64], alpha_grid: &[f64]) -> MarginEstimate {
    assert!(!gaps.is_empty() && !h_grid.is_empty());
    let mut sorted = gaps.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let cdf: Vec<f64> = h_grid.iter().map(|&h| sorted.partition_point(|&g| g <= h) as f64 / n as f64).collect();
    let tol = mc_tolerance(n);

    let h_min = h_grid.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-12);
    let h_max = h_grid.iter().cloned().fold(0.0, f64::max).max(h_min);
    // delta* candidates: the h grid itself plus a fine log grid around it
    let mut deltas: Vec<f64> = h_grid.to_vec();
    let (lo, hi) = ((h_min / 10.0).ln(), (h_max * 10.0).ln());
    deltas.extend((0..=400).map(|i| (lo + (hi - lo) * i as f64 / 400.0).exp()));
    deltas.sort_unstable_by(f64::total_cmp);
    deltas.dedup();

    let bound = |h: f64, delta: f64, alpha: f64| (h / delta).powf(alpha).min(1.0);
    let violation = |delta: f64, alpha: f64| -> f64 {
        h_grid.iter().zip(&cdf).map(|(&h, &f)| f - bound(h, delta, alpha)).fold(f64::NEG_INFINITY, f64::max)
    };
    let residual = |delta: f64, alpha: f64| -> f64 {
        h_grid.iter().zip(&cdf).map(|(&h, &f)| (bound(h, delta, alpha) - f).abs()).sum()
    };
    // (residual, delta, alpha)
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in alpha_grid {
        for &delta in &deltas {
            if violation(delta, alpha) > tol {
                continue;
            }
            let r = residual(delta, alpha);
            let better = match best {
                None => true,
                Some((br, _, ba)) => r < br - 1e-12 || (r <= br + 1e-12 && alpha > ba),
            };
            if better {
                best = Some((r, delta, alpha));
            }
        }
    }
    let best = best.map(|(_, d, a)| (d, a));
    let (delta_star, alpha) = best.unwrap_or((0.0, 0.0));
    let max_violation = if delta_star > 0.0 { violation(delta_star, alpha) } else { f64::NAN };
    MarginEstimate { h_grid: h_grid.to_vec(), cdf, delta_star, alpha, max_violation, tolerance: tol, n_mc: n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub repetitions: usize,
    pub threshold: f64,
    /// `phi^2` of the averaged empirical Gram in each repetition.
    pub phi_sq: Vec<f64>,
    /// Fraction of repetitions with `phi^2 >= threshold`.
    pub fraction: f64,
}

/// Fraction of `repetitions` runs of `n` uniformly random arm pulls whose
/// averaged Gram has `phi^2(Sigma_n, S0) >= phi0_target / 2`.
pub fn check_gram_concentration<S: ContextSource + Sync>(
    env: &S,
    param: &SparseParameter,
    n: usize,
    repetitions: usize,
    phi0_target: f64,
    seed: u64,
) -> Result<ConcentrationReport, CompatError> {
    assert!(n > 0 && repetitions > 0);
    let threshold = phi0_target / 2.0;
    let phi: Vec<f64> = (0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = streams::stream(seed, "concentration", rep as u64, streams::DIAGNOSTICS);
            let mut m = SquareMatrix::zeros(env.dim());
            for t in 0..n {
                let contexts = env.sample_contexts(&mut rng, t);
                let arm = rng.random_range(0..contexts.arms());
                m.add_outer(1.0, contexts.arm(arm));
            }
            m.symmetrize_from_upper();
            phi_sq(&m.scaled(1.0 / n as f64), param.support())
        })
        .collect::<Result<_, _>>()?;
    let fraction = phi.iter().filter(|&&v| v >= threshold).count() as f64 / repetitions as f64;
    Ok(ConcentrationReport { n, repetitions, threshold, phi_sq: phi, fraction })
}
