//! Bandit policies behind a uniform `select` / `observe` interface.
//!
//! * [`FsWLasso`]: forced sampling for `M0` rounds, then greedy on a Lasso
//!   fit whose loss weights forced samples by `w` and greedy samples by 1.
//! * [`FsLasso`]: interleaves forced samples whenever `|T_e| <= q(|T_g|)`;
//!   otherwise plays the forced-sample estimate's choice when it wins by a
//!   margin `h`, and the greedy-sample estimate's choice when it does not.
//! * [`Estc`], [`GreedyLasso`], [`Oracle`], [`UniformRandom`]: baselines.
//!
//! All argmaxes break ties toward the lowest arm index.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{argmax, ContextSet, SparseParameter};
use crate::lasso::{self, GramStats, LassoError, SolverOptions};
use crate::streams::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

fn invalid(msg: impl Into<String>) -> PolicyError {
    PolicyError::InvalidParams(msg.into())
}

pub trait Policy: Send {
    fn select(&mut self, contexts: &ContextSet) -> usize;
    fn observe(&mut self, arm: usize, x: &[f64], reward: f64);
    /// Estimate behind the most recent selection, `None` if it was random.
    fn estimate_used(&self) -> Option<&[f64]>;
    /// Lasso solves that stopped at `max_iter` without meeting the tolerance.
    fn solver_failures(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// KKT tolerance relative to `max(1, max_j G_jj)` of the problem solved.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000 }
    }
}

/// Regularization schedule `t -> lambda_t`, where `t` counts samples in the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSchedule {
    Constant { value: f64 },
    /// `scale * sqrt(t * ln(2 d t))`.
    SqrtLog { scale: f64 },
    /// Noise-control value for the weighted forced-sampling loss; see
    /// [`fswlasso_lambda_theory`].
    Theory { delta: f64, sigma: f64, x_max: f64 },
}

impl LambdaSchedule {
    pub fn value(&self, t: usize, d: usize, m0: usize, w: f64) -> f64 {
        match *self {
            LambdaSchedule::Constant { value } => value,
            LambdaSchedule::SqrtLog { scale } => {
                let t = t.max(1) as f64;
                scale * (t * (2.0 * d as f64 * t).ln()).sqrt()
            }
            LambdaSchedule::Theory { delta, sigma, x_max } => {
                fswlasso_lambda_theory(t.max(m0), m0, w, d, delta, sigma, x_max).unwrap_or(f64::NAN)
            }
        }
    }

    fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            LambdaSchedule::Constant { value } if !(value > 0.0) => Err(invalid("constant lambda must be positive")),
            LambdaSchedule::SqrtLog { scale } if !(scale > 0.0) => Err(invalid("lambda scale must be positive")),
            LambdaSchedule::Theory { delta, sigma, x_max } => check_theory_inputs(delta, sigma, x_max),
            _ => Ok(()),
        }
    }
}

fn check_theory_inputs(delta: f64, sigma: f64, x_max: f64) -> Result<(), PolicyError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    if !(x_max > 0.0) {
        return Err(invalid(format!("x_max must be positive, got {x_max}")));
    }
    Ok(())
}

/// Problem constants assumed known when hyperparameters are set from theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryGuesses {
    pub delta: f64,
    pub sigma: f64,
    pub x_max: f64,
    pub s0: f64,
    /// Compatibility constant of the optimal-arm Gram (`phi*`, not squared).
    pub phi_star: f64,
    /// Ratio of the optimal-arm to averaged-arm compatibility constants.
    pub rho: f64,
    pub alpha: f64,
    pub delta_star: f64,
}

impl TheoryGuesses {
    fn validate(&self) -> Result<(), PolicyError> {
        check_theory_inputs(self.delta, self.sigma, self.x_max)?;
        for (name, v) in [
            ("s0", self.s0),
            ("phi_star", self.phi_star),
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("delta_star", self.delta_star),
        ] {
            if !(v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `lambda_t = 4 sigma x_max (sqrt(2 w^2 M0 ln(2d/delta))
///   + 2^(3/4) sqrt((t - M0) ln(7 d ln(2(t - M0))^2 / delta)))`,
/// with the second term equal to 0 at `t = M0`.
pub fn fswlasso_lambda_theory(
    t: usize,
    m0: usize,
    w: f64,
    d: usize,
    delta: f64,
    sigma: f64,
    x_max: f64,
) -> Result<f64, PolicyError> {
    check_theory_inputs(delta, sigma, x_max)?;
    if t < m0 {
        return Err(invalid(format!("t = {t} precedes the forced-sampling length {m0}")));
    }
    let d = d as f64;
    let forced = (2.0 * w * w * m0 as f64 * (2.0 * d / delta).ln()).sqrt();
    let greedy = if t == m0 {
        0.0
    } else {
        let n = (t - m0) as f64;
        let loglog = (2.0 * n).ln();
        2f64.powf(0.75) * (n * (7.0 * d * loglog * loglog / delta).ln()).sqrt()
    };
    Ok(4.0 * sigma * x_max * (forced + greedy))
}

/// Forced-sampling length, weight and the constant `tau` of the FS-WLasso
/// high-probability regret guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsWLassoTheory {
    pub m0: usize,
    pub w: f64,
    pub tau: f64,
    pub c2: f64,
}

pub fn fswlasso_theory_params(d: usize, g: &TheoryGuesses) -> Result<FsWLassoTheory, PolicyError> {
    g.validate()?;
    let d = d as f64;
    let (x2, phi2) = (g.x_max * g.x_max, g.phi_star * g.phi_star);
    let shape = (80.0 * x2 * g.s0 / phi2).powf(2.0 / g.alpha);
    let c2 = f64::max(2.0, (400.0 * g.sigma * x2 * g.s0 / (g.delta_star * phi2)).powi(2) * shape);
    let tau = f64::max(
        c2 * (7.0 * d / g.delta).ln() + 2.0 * c2 * (28.0 * d * c2 * c2 / g.delta).ln().ln(),
        2048.0 * x2 * x2 * g.s0 * g.s0 / (phi2 * phi2)
            * ((d * d / g.delta).ln() + 2.0 * (64.0 * x2 * g.s0 / phi2).ln()),
    );
    let m0 = f64::max(
        g.rho.powi(2)
            * (100.0 * g.sigma * x2 * g.s0 / (g.delta_star * phi2)).powi(2)
            * shape
            * (2.0 * (2.0 * tau).ln().ln() + (7.0 * d / g.delta).ln()),
        2048.0 * g.rho.powi(2) * x2 * x2 * g.s0 * g.s0 / (phi2 * phi2) * (2.0 * d * d / g.delta).ln(),
    );
    if !m0.is_finite() || !tau.is_finite() {
        return Err(invalid("theory parameters overflow"));
    }
    let m0 = m0.ceil().max(1.0);
    Ok(FsWLassoTheory { m0: m0 as usize, w: (tau / m0).sqrt(), tau, c2 })
}

/// Forced-sampling budget `q(n)` for FS-Lasso.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcedSchedule {
    /// `base + scale * ln(n + 1)`.
    Log { base: f64, scale: f64 },
    /// `coefficient * ln(2 d^2 (n + 1)^3)`.
    LogCubic { coefficient: f64 },
}

impl ForcedSchedule {
    pub fn value(&self, n: usize, d: usize) -> f64 {
        let n1 = (n + 1) as f64;
        match *self {
            ForcedSchedule::Log { base, scale } => base + scale * n1.ln(),
            ForcedSchedule::LogCubic { coefficient } => {
                coefficient * (2.0 * (d * d) as f64 * n1 * n1 * n1).ln()
            }
        }
    }

    fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            ForcedSchedule::Log { base, scale } if !(base.is_finite() && scale >= 0.0) => {
                Err(invalid("q(n) = base + scale ln(n+1) needs finite base and scale >= 0"))
            }
            ForcedSchedule::LogCubic { coefficient } if !(coefficient >= 0.0) => {
                Err(invalid("q coefficient must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// `lambda_{2,t} = scale * sqrt(2 ln(4 d (n_g + 1)^2) / t)`.
pub fn fslasso_lambda2(scale: f64, t: usize, n_greedy: usize, d: usize) -> f64 {
    let ng1 = (n_greedy + 1) as f64;
    scale * (2.0 * (4.0 * d as f64 * ng1 * ng1).ln() / t.max(1) as f64).sqrt()
}

pub fn fslasso_lambda1(phi_star: f64, h: f64, rho: f64, x_max: f64, s0: f64) -> f64 {
    phi_star * phi_star * h / (2.0 * rho * x_max * s0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsLassoTheory {
    pub q: ForcedSchedule,
    pub h: f64,
    pub lambda1: f64,
    pub lambda2_scale: f64,
}

impl FsLassoTheory {
    pub fn q(&self, n: usize, d: usize) -> f64 {
        self.q.value(n, d)
    }

    pub fn lambda2(&self, t: usize, n_greedy: usize, d: usize) -> f64 {
        fslasso_lambda2(self.lambda2_scale, t, n_greedy, d)
    }
}

pub fn fslasso_theory_params(
    sigma: f64,
    x_max: f64,
    s0: f64,
    phi_star: f64,
    rho: f64,
    alpha: f64,
    delta_star: f64,
) -> Result<FsLassoTheory, PolicyError> {
    for (name, v) in [
        ("sigma", sigma),
        ("x_max", x_max),
        ("s0", s0),
        ("phi_star", phi_star),
        ("rho", rho),
        ("alpha", alpha),
        ("delta_star", delta_star),
    ] {
        if !(v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let (x2, phi2) = (x_max * x_max, phi_star * phi_star);
    let coefficient = 512.0 * rho * rho * x2 * x2 * s0 * s0 / (phi2 * phi2)
        * f64::max(4.0, 4.0 * sigma * sigma / (delta_star * delta_star) * (128.0 * x2 * s0 / phi2).powf(2.0 / alpha));
    let h = delta_star / 2.0 * (phi2 / (128.0 * x2 * s0)).powf(1.0 / alpha);
    Ok(FsLassoTheory {
        q: ForcedSchedule::LogCubic { coefficient },
        h,
        lambda1: fslasso_lambda1(phi_star, h, rho, x_max, s0),
        lambda2_scale: 4.0 * sigma * x_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsWLassoConfig {
    pub m0: usize,
    pub w: f64,
    pub lambda: LambdaSchedule,
    #[serde(default)]
    pub theory_mode: bool,
    #[serde(default)]
    pub guesses: Option<TheoryGuesses>,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl FsWLassoConfig {
    /// Replaces `(m0, w, lambda)` by their theory values when `theory_mode` is set.
    pub fn resolve(&self, d: usize) -> Result<Self, PolicyError> {
        let mut out = self.clone();
        if self.theory_mode {
            let g = self.guesses.ok_or_else(|| invalid("theory_mode requires guesses"))?;
            let th = fswlasso_theory_params(d, &g)?;
            out.m0 = th.m0;
            out.w = th.w;
            out.lambda = LambdaSchedule::Theory { delta: g.delta, sigma: g.sigma, x_max: g.x_max };
            out.theory_mode = false;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.w > 0.0) {
            return Err(invalid(format!("w must be positive, got {}", self.w)));
        }
        self.lambda.validate()?;
        check_solver(&self.solver)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsLassoConfig {
    pub q: ForcedSchedule,
    pub h: f64,
    pub lambda1: f64,
    /// Scale of `lambda_{2,t}`; the theory value is `4 sigma x_max`.
    pub lambda2_scale: f64,
    #[serde(default)]
    pub theory_mode: bool,
    #[serde(default)]
    pub guesses: Option<TheoryGuesses>,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl FsLassoConfig {
    pub fn resolve(&self) -> Result<Self, PolicyError> {
        let mut out = self.clone();
        if self.theory_mode {
            let g = self.guesses.ok_or_else(|| invalid("theory_mode requires guesses"))?;
            let th = fslasso_theory_params(g.sigma, g.x_max, g.s0, g.phi_star, g.rho, g.alpha, g.delta_star)?;
            out.q = th.q;
            out.h = th.h;
            out.lambda1 = th.lambda1;
            out.lambda2_scale = th.lambda2_scale;
            out.theory_mode = false;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        self.q.validate()?;
        if !(self.h > 0.0) {
            return Err(invalid(format!("h must be positive, got {}", self.h)));
        }
        if !(self.lambda1 > 0.0) || !(self.lambda2_scale > 0.0) {
            return Err(invalid("lambda1 and lambda2_scale must be positive"));
        }
        check_solver(&self.solver)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstcConfig {
    pub n0: usize,
    pub lambda: LambdaSchedule,
    #[serde(default)]
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyLassoConfig {
    pub lambda: LambdaSchedule,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn check_solver(s: &SolverSettings) -> Result<(), PolicyError> {
    if !(s.tol > 0.0) || s.max_iter == 0 {
        return Err(invalid("solver needs tol > 0 and max_iter > 0"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PolicyKind {
    FsWlasso(FsWLassoConfig),
    FsLasso(FsLassoConfig),
    Estc(EstcConfig),
    GreedyLasso(GreedyLassoConfig),
    Oracle,
    Uniform,
}

impl PolicyKind {
    /// Validated copy with theory-mode parameters made explicit.
    pub fn resolve(&self, d: usize) -> Result<Self, PolicyError> {
        Ok(match self {
            PolicyKind::FsWlasso(c) => PolicyKind::FsWlasso(c.resolve(d)?),
            PolicyKind::FsLasso(c) => PolicyKind::FsLasso(c.resolve()?),
            PolicyKind::Estc(c) => {
                c.lambda.validate()?;
                check_solver(&c.solver)?;
                self.clone()
            }
            PolicyKind::GreedyLasso(c) => {
                c.lambda.validate()?;
                check_solver(&c.solver)?;
                self.clone()
            }
            PolicyKind::Oracle | PolicyKind::Uniform => self.clone(),
        })
    }

    /// Instantiates a policy; `kind` should already be resolved.
    pub fn build(&self, d: usize, param: &SparseParameter, rng: SimRng) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(match self.resolve(d)? {
            PolicyKind::FsWlasso(c) => Box::new(FsWLasso::new(c, d, rng)),
            PolicyKind::FsLasso(c) => Box::new(FsLasso::new(c, d, rng)),
            PolicyKind::Estc(c) => Box::new(Estc::new(c, d, rng)),
            PolicyKind::GreedyLasso(c) => Box::new(GreedyLasso::new(c, d)),
            PolicyKind::Oracle => Box::new(Oracle::new(param.clone())),
            PolicyKind::Uniform => Box::new(UniformRandom::new(rng)),
        })
    }
}

/// Lasso fit on `stats` with warm start; a non-converged solve is kept
/// and counted rather than discarded.
fn refit(
    stats: &GramStats,
    lambda: f64,
    warm: &[f64],
    settings: &SolverSettings,
    failures: &mut usize,
) -> Vec<f64> {
    if !stats.has_positive_weight() {
        return vec![0.0; stats.dim()];
    }
    // lambda can vanish only in degenerate theory settings (sigma = 0)
    let lambda = if lambda > 0.0 { lambda } else { 1e-12 };
    let opts = SolverOptions { tol: settings.tol * stats.max_diag().max(1.0), max_iter: settings.max_iter };
    match lasso::solve_gram(stats, lambda, Some(warm), opts) {
        Ok(sol) => sol.beta_hat,
        Err(LassoError::NonConvergence(sol)) => {
            *failures += 1;
            sol.beta_hat
        }
        Err(e) => panic!("lasso refit on validated statistics failed: {e}"),
    }
}

pub struct FsWLasso {
    config: FsWLassoConfig,
    d: usize,
    rng: SimRng,
    round: usize,
    forced: GramStats,
    greedy: GramStats,
    beta_hat: Vec<f64>,
    fitted_at: Option<usize>,
    used: bool,
    failures: usize,
}

impl FsWLasso {
    pub fn new(config: FsWLassoConfig, d: usize, rng: SimRng) -> Self {
        Self {
            config,
            d,
            rng,
            round: 0,
            forced: GramStats::new(d),
            greedy: GramStats::new(d),
            beta_hat: vec![0.0; d],
            fitted_at: None,
            used: false,
            failures: 0,
        }
    }

    pub fn lambda(&self, t: usize) -> f64 {
        self.config.lambda.value(t, self.d, self.config.m0, self.config.w)
    }

    /// Recomputes `beta_hat_{t-1}` from the `t - 1` observations so far.
    fn estimate(&mut self) -> &[f64] {
        let n = self.round;
        if self.fitted_at != Some(n) {
            let stats = self.forced.combine(self.config.w, &self.greedy, 1.0);
            self.beta_hat = refit(&stats, self.lambda(n), &self.beta_hat, &self.config.solver, &mut self.failures);
            self.fitted_at = Some(n);
        }
        &self.beta_hat
    }

    pub fn current_estimate(&self) -> &[f64] {
        &self.beta_hat
    }
}

impl Policy for FsWLasso {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        let t = self.round + 1;
        if t <= self.config.m0 {
            self.used = false;
            return self.rng.random_range(0..contexts.arms());
        }
        self.used = true;
        let beta = self.estimate().to_vec();
        argmax(&contexts.scores(&beta))
    }

    fn observe(&mut self, _arm: usize, x: &[f64], reward: f64) {
        self.round += 1;
        if self.round <= self.config.m0 {
            self.forced.add(1.0, x, reward);
        } else {
            self.greedy.add(1.0, x, reward);
        }
    }

    fn estimate_used(&self) -> Option<&[f64]> {
        self.used.then_some(&self.beta_hat[..])
    }

    fn solver_failures(&self) -> usize {
        self.failures
    }
}

/// Which estimate drove the last FS-Lasso decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsLassoBranch {
    Forced,
    Margin,
    Greedy,
}

pub struct FsLasso {
    config: FsLassoConfig,
    d: usize,
    rng: SimRng,
    round: usize,
    forced: GramStats,
    greedy: GramStats,
    n_forced: usize,
    n_greedy: usize,
    beta_tilde: Vec<f64>,
    beta_hat: Vec<f64>,
    branch: FsLassoBranch,
    failures: usize,
}

impl FsLasso {
    pub fn new(config: FsLassoConfig, d: usize, rng: SimRng) -> Self {
        Self {
            config,
            d,
            rng,
            round: 0,
            forced: GramStats::new(d),
            greedy: GramStats::new(d),
            n_forced: 0,
            n_greedy: 0,
            beta_tilde: vec![0.0; d],
            beta_hat: vec![0.0; d],
            branch: FsLassoBranch::Forced,
            failures: 0,
        }
    }

    /// `(|T_e(t)|, |T_g(t)|)` before the current round.
    pub fn counts(&self) -> (usize, usize) {
        (self.n_forced, self.n_greedy)
    }

    pub fn q(&self, n: usize) -> f64 {
        self.config.q.value(n, self.d)
    }

    pub fn last_branch(&self) -> FsLassoBranch {
        self.branch
    }

    pub fn estimates(&self) -> (&[f64], &[f64]) {
        (&self.beta_tilde, &self.beta_hat)
    }

    /// Overrides the two estimates.
    pub fn set_estimates(&mut self, beta_tilde: Vec<f64>, beta_hat: Vec<f64>) {
        assert_eq!(beta_tilde.len(), self.d);
        assert_eq!(beta_hat.len(), self.d);
        self.beta_tilde = beta_tilde;
        self.beta_hat = beta_hat;
    }
}

impl Policy for FsLasso {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        if self.n_forced as f64 <= self.q(self.n_greedy) {
            self.branch = FsLassoBranch::Forced;
            return self.rng.random_range(0..contexts.arms());
        }
        let scores = contexts.scores(&self.beta_tilde);
        let candidate = argmax(&scores);
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != candidate)
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        if scores[candidate] > runner_up + self.config.h {
            self.branch = FsLassoBranch::Margin;
            candidate
        } else {
            self.branch = FsLassoBranch::Greedy;
            argmax(&contexts.scores(&self.beta_hat))
        }
    }

    fn observe(&mut self, _arm: usize, x: &[f64], reward: f64) {
        self.round += 1;
        let t = self.round;
        if self.branch == FsLassoBranch::Forced {
            self.forced.add(1.0, x, reward);
            self.n_forced += 1;
            let stats = self.forced.scaled(1.0 / self.n_forced as f64);
            self.beta_tilde = refit(&stats, self.config.lambda1, &self.beta_tilde, &self.config.solver, &mut self.failures);
        } else {
            let lambda = fslasso_lambda2(self.config.lambda2_scale, t, self.n_greedy, self.d);
            self.greedy.add(1.0, x, reward);
            self.n_greedy += 1;
            let stats = self.greedy.scaled(1.0 / self.n_greedy as f64);
            self.beta_hat = refit(&stats, lambda, &self.beta_hat, &self.config.solver, &mut self.failures);
        }
    }

    fn estimate_used(&self) -> Option<&[f64]> {
        match self.branch {
            FsLassoBranch::Forced => None,
            FsLassoBranch::Margin => Some(&self.beta_tilde),
            FsLassoBranch::Greedy => Some(&self.beta_hat),
        }
    }

    fn solver_failures(&self) -> usize {
        self.failures
    }
}

/// Explore uniformly for `n0` rounds, fit once, then commit.
pub struct Estc {
    config: EstcConfig,
    d: usize,
    rng: SimRng,
    round: usize,
    stats: GramStats,
    beta_hat: Option<Vec<f64>>,
    used: bool,
    failures: usize,
}

impl Estc {
    pub fn new(config: EstcConfig, d: usize, rng: SimRng) -> Self {
        Self { config, d, rng, round: 0, stats: GramStats::new(d), beta_hat: None, used: false, failures: 0 }
    }

    /// The committed estimate, available after the exploration phase.
    pub fn committed(&self) -> Option<&[f64]> {
        self.beta_hat.as_deref()
    }
}

impl Policy for Estc {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        let t = self.round + 1;
        if t <= self.config.n0 {
            self.used = false;
            return self.rng.random_range(0..contexts.arms());
        }
        if self.beta_hat.is_none() {
            let lambda = self.config.lambda.value(self.config.n0, self.d, 0, 1.0);
            let zero = vec![0.0; self.d];
            self.beta_hat = Some(refit(&self.stats, lambda, &zero, &self.config.solver, &mut self.failures));
        }
        self.used = true;
        argmax(&contexts.scores(self.beta_hat.as_ref().expect("fitted above")))
    }

    fn observe(&mut self, _arm: usize, x: &[f64], reward: f64) {
        self.round += 1;
        if self.round <= self.config.n0 {
            self.stats.add(1.0, x, reward);
        }
    }

    fn estimate_used(&self) -> Option<&[f64]> {
        if self.used {
            self.beta_hat.as_deref()
        } else {
            None
        }
    }

    fn solver_failures(&self) -> usize {
        self.failures
    }
}

/// Greedy on a Lasso refit every round with penalty `lambda_{t-1}`.
pub struct GreedyLasso {
    config: GreedyLassoConfig,
    d: usize,
    round: usize,
    stats: GramStats,
    beta_hat: Vec<f64>,
    failures: usize,
}

impl GreedyLasso {
    pub fn new(config: GreedyLassoConfig, d: usize) -> Self {
        Self { config, d, round: 0, stats: GramStats::new(d), beta_hat: vec![0.0; d], failures: 0 }
    }
}

impl Policy for GreedyLasso {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        if self.round > 0 {
            let lambda = self.config.lambda.value(self.round, self.d, 0, 1.0);
            self.beta_hat = refit(&self.stats, lambda, &self.beta_hat, &self.config.solver, &mut self.failures);
        }
        argmax(&contexts.scores(&self.beta_hat))
    }

    fn observe(&mut self, _arm: usize, x: &[f64], reward: f64) {
        self.round += 1;
        self.stats.add(1.0, x, reward);
    }

    fn estimate_used(&self) -> Option<&[f64]> {
        Some(&self.beta_hat)
    }

    fn solver_failures(&self) -> usize {
        self.failures
    }
}

/// Plays `argmax_k x_k^T beta*`.
pub struct Oracle {
    param: SparseParameter,
}

impl Oracle {
    pub fn new(param: SparseParameter) -> Self {
        Self { param }
    }
}

impl Policy for Oracle {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        argmax(&contexts.scores(self.param.beta_star()))
    }

    fn observe(&mut self, _: usize, _: &[f64], _: f64) {}

    fn estimate_used(&self) -> Option<&[f64]> {
        Some(self.param.beta_star())
    }
}

pub struct UniformRandom {
    rng: SimRng,
}

impl UniformRandom {
    pub fn new(rng: SimRng) -> Self {
        Self { rng }
    }
}

impl Policy for UniformRandom {
    fn select(&mut self, contexts: &ContextSet) -> usize {
        self.rng.random_range(0..contexts.arms())
    }

    fn observe(&mut self, _: usize, _: &[f64], _: f64) {}

    fn estimate_used(&self) -> Option<&[f64]> {
        None
    }
}
