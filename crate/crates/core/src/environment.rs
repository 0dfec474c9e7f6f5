//! Context and reward generation for sparse linear bandit instances.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("reward parameter has zero norm")]
    ZeroParameter,
    #[error("invalid environment: {0}")]
    Invalid(String),
}

/// The hidden reward vector `beta*` together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseParameter {
    beta_star: Vec<f64>,
    support: Vec<usize>,
    b: f64,
}

impl SparseParameter {
    /// Wraps `beta_star`; the l1 bound is taken to be `||beta_star||_1`.
    pub fn new(beta_star: Vec<f64>) -> Self {
        let support = beta_star.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
        let b = beta_star.iter().map(|v| v.abs()).sum();
        Self { beta_star, support, b }
    }

    pub fn with_bound(beta_star: Vec<f64>, b: f64) -> Result<Self, EnvError> {
        let p = Self::new(beta_star);
        if p.b > b * (1.0 + 1e-12) {
            return Err(EnvError::Invalid(format!("||beta*||_1 = {} exceeds bound {b}", p.b)));
        }
        Ok(Self { b, ..p })
    }

    /// Support drawn uniformly among size-`s0` subsets of `[d]`, values uniform
    /// on the unit sphere of that subspace.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, d: usize, s0: usize) -> Result<Self, EnvError> {
        if s0 == 0 || s0 > d {
            return Err(EnvError::Invalid(format!("need 1 <= s0 <= d, got s0={s0}, d={d}")));
        }
        let mut support = sample_indices(rng, d, s0).into_vec();
        support.sort_unstable();
        let mut values: Vec<f64> = loop {
            let v: Vec<f64> = (0..s0).map(|_| StandardNormal.sample(rng)).collect();
            if v.iter().any(|x: &f64| *x != 0.0) {
                break v;
            }
        };
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        let mut beta = vec![0.0; d];
        for (&i, &v) in support.iter().zip(&values) {
            beta[i] = v;
        }
        Ok(Self::new(beta))
    }

    pub fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn s0(&self) -> usize {
        self.support.len()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.beta_star.len()
    }

    pub fn expected_reward(&self, x: &[f64]) -> f64 {
        dot(x, &self.beta_star)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.beta_star.iter().map(|v| v * c).collect())
    }
}

/// The K feature vectors revealed in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    pub round: usize,
    features: Vec<Vec<f64>>,
    x_max: f64,
}

impl ContextSet {
    /// `x_max` is the realized l-infinity bound of the features.
    pub fn new(round: usize, features: Vec<Vec<f64>>) -> Self {
        let x_max = features.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        Self { round, features, x_max }
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn arm(&self, k: usize) -> &[f64] {
        &self.features[k]
    }

    pub fn arms(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Scores `x_k^T beta` for every arm.
    pub fn scores(&self, beta: &[f64]) -> Vec<f64> {
        self.features.iter().map(|x| dot(x, beta)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    CorrelatedGaussian,
    FixedSuboptimal,
    Custom,
}

fn default_optimal_range() -> [f64; 2] {
    [0.9, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub s0: usize,
    pub noise_sigma: f64,
    /// Cross-arm correlation of each coordinate (correlated Gaussian contexts).
    #[serde(default)]
    pub correlation: f64,
    /// Expected rewards of the frozen sub-optimal arms.
    #[serde(default)]
    pub fixed_rewards: Vec<f64>,
    /// Expected reward of the per-round arm is uniform on this interval.
    #[serde(default = "default_optimal_range")]
    pub optimal_reward_range: [f64; 2],
    /// Off-support coordinates pinned to `spike_value` in every arm.
    #[serde(default)]
    pub spike_count: usize,
    #[serde(default)]
    pub spike_value: f64,
    /// Clip Gaussian features to `[-clip_x_max, clip_x_max]`.
    #[serde(default)]
    pub clip_x_max: Option<f64>,
    /// Base arm vectors of a custom environment.
    #[serde(default)]
    pub custom_arms: Vec<Vec<f64>>,
    /// Standard deviation of isotropic Gaussian jitter added to custom arms.
    #[serde(default)]
    pub custom_jitter: f64,
    /// Use this reward parameter instead of sampling one.
    #[serde(default)]
    pub beta_star: Option<Vec<f64>>,
    /// Build the same instance (`beta*`, frozen arms) in every replication.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl EnvironmentSpec {
    pub fn correlated_gaussian(d: usize, k: usize, s0: usize, correlation: f64, noise_sigma: f64) -> Self {
        Self {
            kind: EnvironmentKind::CorrelatedGaussian,
            d,
            k,
            s0,
            noise_sigma,
            correlation,
            fixed_rewards: Vec::new(),
            optimal_reward_range: default_optimal_range(),
            spike_count: 0,
            spike_value: 0.0,
            clip_x_max: None,
            custom_arms: Vec::new(),
            custom_jitter: 0.0,
            beta_star: None,
            seed: None,
        }
    }

    /// Fixed sub-optimal arms with rewards `0.1, ..., 0.1 (K-1)`, five spikes at 5.
    pub fn fixed_suboptimal(d: usize, k: usize, s0: usize, noise_sigma: f64) -> Self {
        Self {
            kind: EnvironmentKind::FixedSuboptimal,
            fixed_rewards: (1..k).map(|i| i as f64 / 10.0).collect(),
            spike_count: 5,
            spike_value: 5.0,
            ..Self::correlated_gaussian(d, k, s0, 0.0, noise_sigma)
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.d == 0 || self.k == 0 {
            return Err(EnvError::Invalid("d and K must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(EnvError::Invalid("noise_sigma must be nonnegative".into()));
        }
        if let Some(beta) = &self.beta_star {
            if beta.len() != self.d {
                return Err(EnvError::ConfigMismatch(format!(
                    "beta_star has length {}, expected d = {}",
                    beta.len(),
                    self.d
                )));
            }
        } else if self.s0 == 0 || self.s0 > self.d {
            return Err(EnvError::Invalid(format!("need 1 <= s0 <= d, got s0 = {}", self.s0)));
        }
        if let Some(c) = self.clip_x_max {
            if !(c > 0.0) {
                return Err(EnvError::Invalid("clip_x_max must be positive".into()));
            }
        }
        match self.kind {
            EnvironmentKind::CorrelatedGaussian => {
                if !(0.0..1.0).contains(&self.correlation) {
                    return Err(EnvError::Invalid(format!(
                        "correlation must lie in [0, 1), got {}",
                        self.correlation
                    )));
                }
            }
            EnvironmentKind::FixedSuboptimal => {
                if self.fixed_rewards.len() + 1 != self.k {
                    return Err(EnvError::ConfigMismatch(format!(
                        "{} fixed rewards given for K = {} (need K - 1)",
                        self.fixed_rewards.len(),
                        self.k
                    )));
                }
                let [lo, hi] = self.optimal_reward_range;
                if !(lo < hi) {
                    return Err(EnvError::Invalid("optimal_reward_range must be increasing".into()));
                }
                if self.fixed_rewards.iter().any(|&r| !(r <= lo)) {
                    return Err(EnvError::Invalid(
                        "fixed rewards must lie below the optimal reward interval".into(),
                    ));
                }
                let free = self.d - self.beta_star.as_ref().map_or(self.s0, |b| b.iter().filter(|v| **v != 0.0).count());
                if self.spike_count > free {
                    return Err(EnvError::Invalid(format!(
                        "{} spike indices requested but only {free} off-support coordinates",
                        self.spike_count
                    )));
                }
            }
            EnvironmentKind::Custom => {
                if self.custom_arms.len() != self.k {
                    return Err(EnvError::ConfigMismatch(format!(
                        "{} custom arms given for K = {}",
                        self.custom_arms.len(),
                        self.k
                    )));
                }
                if self.custom_arms.iter().any(|a| a.len() != self.d) {
                    return Err(EnvError::ConfigMismatch("custom arm with wrong dimension".into()));
                }
                if !(self.custom_jitter >= 0.0) {
                    return Err(EnvError::Invalid("custom_jitter must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }
}

/// Anything that can produce i.i.d. rounds of contexts.
pub trait ContextSource {
    fn dim(&self) -> usize;
    fn arms(&self) -> usize;
    fn sample_contexts<R: Rng + ?Sized>(&self, rng: &mut R, round: usize) -> ContextSet;
}

/// Frozen state of a fixed-sub-optimal-arms environment.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSuboptimalEnv {
    fixed_arms: Vec<Vec<f64>>,
    spike_indices: Vec<usize>,
    spike_value: f64,
    optimal_range: [f64; 2],
    param: SparseParameter,
}

impl FixedSuboptimalEnv {
    pub fn fixed_arms(&self) -> &[Vec<f64>] {
        &self.fixed_arms
    }

    pub fn spike_indices(&self) -> &[usize] {
        &self.spike_indices
    }

    fn apply_spikes(&self, x: &mut [f64]) {
        for &i in &self.spike_indices {
            x[i] = self.spike_value;
        }
    }
}

impl ContextSource for FixedSuboptimalEnv {
    fn dim(&self) -> usize {
        self.param.dim()
    }

    fn arms(&self) -> usize {
        self.fixed_arms.len() + 1
    }

    /// A fresh optimal arm is pinned to a uniform reward and inserted at a
    /// uniformly random position among the frozen arms.
    fn sample_contexts<R: Rng + ?Sized>(&self, rng: &mut R, round: usize) -> ContextSet {
        let d = self.dim();
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let [lo, hi] = self.optimal_range;
        let c = rng.random_range(lo..hi);
        let mut x = pin_expected_reward(&x, &self.param, c).expect("validated nonzero parameter");
        self.apply_spikes(&mut x);
        let position = rng.random_range(0..self.arms());
        let mut features = self.fixed_arms.clone();
        features.insert(position, x);
        ContextSet::new(round, features)
    }
}

/// `x' = x + ((c - x^T beta*) / ||beta*||^2) beta*`, so that `x'^T beta* = c`.
pub fn pin_expected_reward(x: &[f64], param: &SparseParameter, c: f64) -> Result<Vec<f64>, EnvError> {
    let beta = param.beta_star();
    let sq = dot(beta, beta);
    if sq == 0.0 {
        return Err(EnvError::ZeroParameter);
    }
    let step = (c - dot(x, beta)) / sq;
    Ok(x.iter().zip(beta).map(|(xi, bi)| xi + step * bi).collect())
}

/// Draw the frozen sub-optimal arms and spike indices.
pub fn build_fixed_suboptimal_env<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &EnvironmentSpec,
    param: &SparseParameter,
) -> Result<FixedSuboptimalEnv, EnvError> {
    if spec.kind != EnvironmentKind::FixedSuboptimal {
        return Err(EnvError::ConfigMismatch("environment kind is not fixed_suboptimal".into()));
    }
    if spec.fixed_rewards.len() + 1 != spec.k {
        return Err(EnvError::ConfigMismatch(format!(
            "{} fixed rewards given for K = {}",
            spec.fixed_rewards.len(),
            spec.k
        )));
    }
    if param.dim() != spec.d {
        return Err(EnvError::ConfigMismatch("parameter dimension differs from d".into()));
    }
    if param.s0() == 0 {
        return Err(EnvError::ZeroParameter);
    }
    let off_support: Vec<usize> = (0..spec.d).filter(|i| !param.support().contains(i)).collect();
    if spec.spike_count > off_support.len() {
        return Err(EnvError::Invalid("not enough off-support coordinates for spikes".into()));
    }
    let mut spike_indices: Vec<usize> =
        sample_indices(rng, off_support.len(), spec.spike_count).into_iter().map(|i| off_support[i]).collect();
    spike_indices.sort_unstable();

    let mut env = FixedSuboptimalEnv {
        fixed_arms: Vec::with_capacity(spec.k - 1),
        spike_indices,
        spike_value: spec.spike_value,
        optimal_range: spec.optimal_reward_range,
        param: param.clone(),
    };
    for &c in &spec.fixed_rewards {
        let x: Vec<f64> = (0..spec.d).map(|_| StandardNormal.sample(rng)).collect();
        let mut x = pin_expected_reward(&x, param, c)?;
        env.apply_spikes(&mut x);
        env.fixed_arms.push(x);
    }
    Ok(env)
}

/// Each coordinate's K arm values are one draw from `N(0, V)` with unit
/// variances and constant correlation; coordinates are independent.
pub fn sample_correlated_contexts<R: Rng + ?Sized>(rng: &mut R, spec: &EnvironmentSpec, round: usize) -> ContextSet {
    debug_assert_eq!(spec.kind, EnvironmentKind::CorrelatedGaussian);
    // one-factor form of the equicorrelated covariance
    let shared = spec.correlation.sqrt();
    let own = (1.0 - spec.correlation).sqrt();
    let mut features = vec![vec![0.0; spec.d]; spec.k];
    for i in 0..spec.d {
        let z0: f64 = StandardNormal.sample(rng);
        for arm in features.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            arm[i] = shared * z0 + own * z;
        }
    }
    if let Some(c) = spec.clip_x_max {
        features.iter_mut().flatten().for_each(|v| *v = v.clamp(-c, c));
    }
    ContextSet::new(round, features)
}

pub fn draw_reward<R: Rng + ?Sized>(rng: &mut R, x: &[f64], param: &SparseParameter, noise_sigma: f64) -> f64 {
    let eta: f64 = StandardNormal.sample(rng);
    param.expected_reward(x) + noise_sigma * eta
}

/// Index of the best arm (lowest index on ties) and the instantaneous gap.
pub fn optimal_arm(contexts: &ContextSet, param: &SparseParameter) -> (usize, f64) {
    let scores = contexts.scores(param.beta_star());
    let best = argmax(&scores);
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != best)
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = if runner_up.is_finite() { (scores[best] - runner_up).max(0.0) } else { f64::INFINITY };
    (best, gap)
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A fully built instance: reward parameter plus frozen context state.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvironmentSpec,
    param: SparseParameter,
    fixed: Option<FixedSuboptimalEnv>,
}

impl Environment {
    /// Draws `beta*` (unless `beta_star` is given) and any frozen arms from `rng`.
    pub fn build<R: Rng + ?Sized>(spec: &EnvironmentSpec, rng: &mut R) -> Result<Self, EnvError> {
        spec.validate()?;
        let param = match &spec.beta_star {
            Some(beta) => SparseParameter::new(beta.clone()),
            None => SparseParameter::sample(rng, spec.d, spec.s0)?,
        };
        Self::with_parameter(spec, param, rng)
    }

    pub fn with_parameter<R: Rng + ?Sized>(
        spec: &EnvironmentSpec,
        param: SparseParameter,
        rng: &mut R,
    ) -> Result<Self, EnvError> {
        spec.validate()?;
        if param.dim() != spec.d {
            return Err(EnvError::ConfigMismatch("parameter dimension differs from d".into()));
        }
        let fixed = match spec.kind {
            EnvironmentKind::FixedSuboptimal => Some(build_fixed_suboptimal_env(rng, spec, &param)?),
            _ => None,
        };
        Ok(Self { spec: spec.clone(), param, fixed })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn param(&self) -> &SparseParameter {
        &self.param
    }

    pub fn fixed_suboptimal(&self) -> Option<&FixedSuboptimalEnv> {
        self.fixed.as_ref()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.spec.noise_sigma
    }
}

impl ContextSource for Environment {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn arms(&self) -> usize {
        self.spec.k
    }

    fn sample_contexts<R: Rng + ?Sized>(&self, rng: &mut R, round: usize) -> ContextSet {
        match self.spec.kind {
            EnvironmentKind::CorrelatedGaussian => sample_correlated_contexts(rng, &self.spec, round),
            EnvironmentKind::FixedSuboptimal => {
                self.fixed.as_ref().expect("built with frozen arms").sample_contexts(rng, round)
            }
            EnvironmentKind::Custom => {
                let jitter = self.spec.custom_jitter;
                let mut features = self.spec.custom_arms.clone();
                if jitter > 0.0 {
                    for v in features.iter_mut().flatten() {
                        let z: f64 = StandardNormal.sample(rng);
                        *v += jitter * z;
                    }
                }
                if let Some(c) = self.spec.clip_x_max {
                    features.iter_mut().flatten().for_each(|v| *v = v.clamp(-c, c));
                }
                ContextSet::new(round, features)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::SimRng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn corr(spec: &EnvironmentSpec, draws: usize) -> f64 {
        let mut r = rng(11);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for t in 0..draws {
            let c = sample_correlated_contexts(&mut r, spec, t);
            let (a, b) = (c.arm(0)[0], c.arm(1)[0]);
            sxy += a * b;
            sxx += a * a;
            syy += b * b;
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn correlated_contexts_have_requested_correlation() {
        let spec = EnvironmentSpec::correlated_gaussian(1, 3, 1, 0.0, 0.5);
        let c0 = corr(&spec, 100_000);
        assert!(c0.abs() <= 0.02, "{c0}");
        let spec = EnvironmentSpec::correlated_gaussian(1, 3, 1, 0.7, 0.5);
        let c7 = corr(&spec, 100_000);
        assert!((0.68..=0.72).contains(&c7), "{c7}");
    }

    #[test]
    fn near_unit_correlation_collapses_arms() {
        let spec = EnvironmentSpec::correlated_gaussian(10, 5, 2, 0.999, 0.5);
        let mut r = rng(3);
        let mut worst = 0.0f64;
        for t in 0..1000 {
            let c = sample_correlated_contexts(&mut r, &spec, t);
            for i in 0..10 {
                let vals: Vec<f64> = (0..5).map(|k| c.arm(k)[i]).collect();
                let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
                worst = worst.max(spread);
            }
        }
        // per-arm idiosyncratic sd is sqrt(0.001) ~ 0.032
        assert!(worst < 0.4, "{worst}");
    }

    #[test]
    fn clipping_bounds_features() {
        let mut spec = EnvironmentSpec::correlated_gaussian(20, 4, 2, 0.3, 0.5);
        spec.clip_x_max = Some(1.0);
        let mut r = rng(5);
        for t in 0..200 {
            let c = sample_correlated_contexts(&mut r, &spec, t);
            assert!(c.x_max() <= 1.0);
            assert!(c.features().iter().flatten().all(|v| v.abs() <= c.x_max()));
        }
    }

    #[test]
    fn pin_examples() {
        let p = SparseParameter::new(vec![1.0, 0.0]);
        let x = pin_expected_reward(&[0.3, 0.7], &p, 0.9).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-15 && x[1] == 0.7);
        let same = pin_expected_reward(&[0.3, 0.7], &p, 0.3).unwrap();
        assert_eq!(same, vec![0.3, 0.7]);
        let p = SparseParameter::new(vec![0.6, 0.8]);
        let x = pin_expected_reward(&[0.0, 0.0], &p, 1.0).unwrap();
        assert!((x[0] - 0.6).abs() < 1e-15 && (x[1] - 0.8).abs() < 1e-15);
        assert!((p.expected_reward(&x) - 1.0).abs() < 1e-15);
        let zero = SparseParameter::new(vec![0.0, 0.0]);
        assert_eq!(pin_expected_reward(&[1.0, 1.0], &zero, 1.0), Err(EnvError::ZeroParameter));
    }

    #[test]
    fn sampled_parameter_is_unit_sparse() {
        let mut r = rng(9);
        let p = SparseParameter::sample(&mut r, 50, 4).unwrap();
        assert_eq!(p.s0(), 4);
        let norm: f64 = p.beta_star().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(p.b() <= 2.0 + 1e-12);
        assert!(SparseParameter::with_bound(p.beta_star().to_vec(), 0.1).is_err());
    }

    #[test]
    fn fixed_suboptimal_construction() {
        let spec = EnvironmentSpec::fixed_suboptimal(30, 10, 5, 0.5);
        assert_eq!(spec.fixed_rewards.len(), 9);
        assert!((spec.fixed_rewards[8] - 0.9).abs() < 1e-15);
        let mut r = rng(21);
        let env = Environment::build(&spec, &mut r).unwrap();
        let fixed = env.fixed_suboptimal().unwrap();
        assert_eq!(fixed.spike_indices().len(), 5);
        for &i in fixed.spike_indices() {
            assert!(!env.param().support().contains(&i));
        }
        for t in 0..1000 {
            let c = env.sample_contexts(&mut r, t);
            let (best, gap) = optimal_arm(&c, env.param());
            let top = env.param().expected_reward(c.arm(best));
            assert!((0.9..=1.0).contains(&top));
            assert!(gap > 0.0 && gap <= 0.1 + 1e-12, "{gap}");
            // the maximizer is the freshly drawn arm, the others are frozen
            let frozen: Vec<&Vec<f64>> = c.features().iter().enumerate().filter(|(k, _)| *k != best).map(|(_, x)| x).collect();
            assert_eq!(frozen.len(), 9);
            for (x, y) in frozen.iter().zip(fixed.fixed_arms()) {
                assert_eq!(*x, y);
            }
            for x in c.features() {
                for &i in fixed.spike_indices() {
                    assert_eq!(x[i], 5.0);
                }
            }
        }
    }

    #[test]
    fn fixed_suboptimal_rejects_wrong_reward_count() {
        let mut spec = EnvironmentSpec::fixed_suboptimal(20, 10, 3, 0.5);
        spec.fixed_rewards.pop();
        let p = SparseParameter::sample(&mut rng(1), 20, 3).unwrap();
        assert!(matches!(build_fixed_suboptimal_env(&mut rng(1), &spec, &p), Err(EnvError::ConfigMismatch(_))));
    }

    #[test]
    fn reward_noise() {
        let p = SparseParameter::new(vec![0.5, -1.0, 0.0]);
        let x = [1.0, 0.25, 3.0];
        let mut r = rng(4);
        assert_eq!(draw_reward(&mut r, &x, &p, 0.0), 0.25);
        let n = 100_000;
        let mean = (0..n).map(|_| draw_reward(&mut r, &x, &p, 0.5)).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() <= 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn optimal_arm_examples() {
        let p = SparseParameter::new(vec![1.0, 0.0]);
        let c = ContextSet::new(1, vec![vec![1.0, 0.0], vec![0.5, 0.0]]);
        assert_eq!(optimal_arm(&c, &p), (0, 0.5));
        let c = ContextSet::new(1, vec![vec![0.2, 1.0]; 3]);
        assert_eq!(optimal_arm(&c, &p), (0, 0.0));
    }

    #[test]
    fn optimal_arm_scale_invariant() {
        let spec = EnvironmentSpec::correlated_gaussian(12, 6, 3, 0.5, 0.5);
        let mut r = rng(8);
        let env = Environment::build(&spec, &mut r).unwrap();
        for t in 0..500 {
            let c = env.sample_contexts(&mut r, t);
            let scaled = env.param().scaled(3.7);
            assert_eq!(optimal_arm(&c, env.param()).0, optimal_arm(&c, &scaled).0);
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = EnvironmentSpec::fixed_suboptimal(100, 10, 5, 0.5);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"K\":10"));
        let back: EnvironmentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
