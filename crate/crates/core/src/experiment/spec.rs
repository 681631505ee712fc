use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algo::{AlgorithmConfig, DEFAULT_PI_INNER, DEFAULT_PI_OUTER, DEFAULT_QI_ITERS};
use crate::env::cartpole::CartPoleDiscretization;
use crate::env::{CombinationLockConfig, RareTransitionConfig};
use crate::theory::SuiteConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SuccessRate,
    Cartpole,
    SafeImprove,
    VerifyTheory,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SuccessRate => "success_rate",
            ExperimentKind::Cartpole => "cartpole",
            ExperimentKind::SafeImprove => "safe_improve",
            ExperimentKind::VerifyTheory => "verify_theory",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentId {
    RareTransition,
    CombinationLock,
}

impl EnvironmentId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvironmentId::RareTransition => "rare_transition",
            EnvironmentId::CombinationLock => "combination_lock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    MbsQi,
    MbsPi,
    Fqi,
    Api,
    Bcql,
    Spibb,
    Bc,
}

impl AlgorithmId {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::MbsQi => "mbs_qi",
            AlgorithmId::MbsPi => "mbs_pi",
            AlgorithmId::Fqi => "fqi",
            AlgorithmId::Api => "api",
            AlgorithmId::Bcql => "bcql",
            AlgorithmId::Spibb => "spibb",
            AlgorithmId::Bc => "bc",
        }
    }

    fn is_policy_iteration(self) -> bool {
        matches!(self, AlgorithmId::MbsPi | AlgorithmId::Api)
    }

    fn uses_filter(self) -> bool {
        matches!(self, AlgorithmId::MbsQi | AlgorithmId::MbsPi | AlgorithmId::Spibb)
    }
}

/// How the support threshold `b` is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Threshold {
    /// A fixed `b`.
    Fixed(f64),
    /// `b = k / n`, i.e. at least `k` samples.
    PerSample(f64),
    /// `b` as a fraction of the smallest positive behavior occupancy.
    BehaviorMinFraction(f64),
}

impl Threshold {
    /// Default `b = 10 / n`.
    pub const DEFAULT: Threshold = Threshold::PerSample(10.0);

    pub fn resolve(&self, n: usize, behavior_min: Option<f64>) -> Result<f64> {
        let b = match *self {
            Threshold::Fixed(b) => b,
            Threshold::PerSample(k) => k / n as f64,
            Threshold::BehaviorMinFraction(c) => {
                c * behavior_min.ok_or_else(|| {
                    Error::Config("behavior_min_fraction needs a known behavior occupancy".into())
                })?
            }
        };
        if !(b >= 0.0) {
            return Err(Error::Config(format!("threshold resolved to invalid b = {b}")));
        }
        Ok(b)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Fixed(b) => write!(f, "b={b}"),
            Threshold::PerSample(k) => write!(f, "b={k}/n"),
            Threshold::BehaviorMinFraction(c) => write!(f, "b={c}*mu_min"),
        }
    }
}

/// One learner with its hyperparameters. Unset fields take the learner's
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub id: AlgorithmId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl AlgorithmSpec {
    pub fn new(id: AlgorithmId) -> Self {
        Self { id, iters: None, inner_iters: None, threshold: None, tau: None }
    }

    pub fn with_threshold(mut self, t: Threshold) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    /// Fills every unset field with its default.
    pub fn resolved(&self) -> Self {
        let pi = self.id.is_policy_iteration();
        Self {
            id: self.id,
            iters: Some(self.iters.unwrap_or(if pi { DEFAULT_PI_OUTER } else { DEFAULT_QI_ITERS })),
            inner_iters: if pi { Some(self.inner_iters.unwrap_or(DEFAULT_PI_INNER)) } else { None },
            threshold: if self.id.uses_filter() {
                Some(self.threshold.unwrap_or(Threshold::DEFAULT))
            } else {
                None
            },
            tau: if self.id == AlgorithmId::Bcql { Some(self.tau.unwrap_or(0.0)) } else { None },
        }
    }

    /// Stable display id, e.g. `bcql(tau=0.1)` or `mbs_qi(b=0.001)`.
    pub fn label(&self) -> String {
        let r = self.resolved();
        match (r.threshold, r.tau) {
            (_, Some(tau)) => format!("{}(tau={tau})", r.id.as_str()),
            (Some(t), None) if t != Threshold::DEFAULT => format!("{}({t})", r.id.as_str()),
            _ => r.id.as_str().to_string(),
        }
    }

    /// `key=value` pairs separated by `;`.
    pub fn hyperparameters(&self) -> String {
        let r = self.resolved();
        let mut parts = vec![format!("T={}", r.iters.unwrap_or_default())];
        if let Some(k) = r.inner_iters {
            parts.push(format!("K={k}"));
        }
        if let Some(t) = r.threshold {
            parts.push(t.to_string());
        }
        if let Some(tau) = r.tau {
            parts.push(format!("tau={tau}"));
        }
        parts.join(";")
    }

    pub fn config(&self, b: f64) -> AlgorithmConfig {
        let r = self.resolved();
        AlgorithmConfig {
            iters: r.iters.unwrap_or(DEFAULT_QI_ITERS),
            inner_iters: r.inner_iters.unwrap_or(DEFAULT_PI_INNER),
            b,
            tau: r.tau.unwrap_or(0.0),
            ..AlgorithmConfig::default()
        }
    }
}

/// The default sample-size grid `10^{2}, 10^{2.5}, …, 10^{5}`, rounded.
pub fn default_sample_sizes() -> Vec<usize> {
    (0..7).map(|i| 10f64.powf(2.0 + 0.5 * i as f64).round() as usize).collect()
}

fn default_algorithms(kind: ExperimentKind) -> Vec<AlgorithmSpec> {
    use AlgorithmId::*;
    match kind {
        ExperimentKind::SuccessRate => vec![
            AlgorithmSpec::new(MbsQi),
            AlgorithmSpec::new(MbsPi),
            AlgorithmSpec::new(Fqi),
            AlgorithmSpec::new(Api),
            AlgorithmSpec::new(Bcql).with_tau(0.0),
            AlgorithmSpec::new(Bcql).with_tau(0.1),
            AlgorithmSpec::new(Spibb),
        ],
        ExperimentKind::Cartpole => {
            let mut v = Vec::new();
            for b in CARTPOLE_B_GRID {
                v.push(AlgorithmSpec::new(MbsQi).with_threshold(Threshold::Fixed(b)));
            }
            v.push(AlgorithmSpec::new(Fqi));
            v.push(AlgorithmSpec::new(Bcql).with_tau(0.0));
            v.push(AlgorithmSpec::new(Bcql).with_tau(0.1));
            for b in CARTPOLE_B_GRID {
                v.push(AlgorithmSpec::new(Spibb).with_threshold(Threshold::Fixed(b)));
            }
            v.push(AlgorithmSpec::new(Bc));
            v
        }
        ExperimentKind::SafeImprove => {
            vec![AlgorithmSpec::new(MbsPi).with_threshold(Threshold::BehaviorMinFraction(0.5))]
        }
        ExperimentKind::VerifyTheory => Vec::new(),
    }
}

/// Threshold grid on `μ̂(s,a)` for the cart-pole learners.
pub const CARTPOLE_B_GRID: [f64; 3] = [0.005, 0.001, 0.0001];

/// Wider grid for the cart-pole threshold ablation.
pub const CARTPOLE_ABLATION_B_GRID: [f64; 7] = [0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleSpec {
    pub discretization: CartPoleDiscretization,
    /// Jittered starts per `(bin, action)` when tabularizing.
    pub jitter_samples: usize,
    pub n: usize,
    pub eval_episodes: usize,
    /// Minimum continuous return of the tabular optimum.
    pub calibration_floor: f64,
    /// Learning-curve checkpoint stride (outer iterations).
    pub curve_stride: usize,
    /// Additional MBS-QI thresholds swept for the ablation table.
    pub ablation_b: Vec<f64>,
    /// A run counts as a success when its mean return is within this many
    /// reward units of the tabular optimum's.
    pub success_tol: f64,
}

impl Default for CartPoleSpec {
    fn default() -> Self {
        Self {
            discretization: CartPoleDiscretization::default(),
            jitter_samples: 10,
            n: 10_000,
            eval_episodes: 100,
            calibration_floor: 150.0,
            curve_stride: 25,
            ablation_b: CARTPOLE_ABLATION_B_GRID.to_vec(),
            success_tol: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafeImproveSpec {
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    /// Safety slack as a fraction of `V_max`.
    pub slack_fraction: f64,
}

impl Default for SafeImproveSpec {
    fn default() -> Self {
        Self { states: 10, actions: 3, gamma: 0.9, slack_fraction: 0.05 }
    }
}

/// A complete experiment description.
///
/// Only `kind` is required; everything else falls back to the defaults of
/// that kind. [`ExperimentSpec::resolved`] makes all defaults explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub environments: Vec<EnvironmentId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rare_transition: Option<RareTransitionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination_lock: Option<CombinationLockConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cartpole: Option<CartPoleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_improve: Option<SafeImproveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<SuiteConfig>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: 0,
            repeats: None,
            sample_sizes: Vec::new(),
            epsilons: Vec::new(),
            environments: Vec::new(),
            algorithms: Vec::new(),
            output: None,
            rare_transition: None,
            combination_lock: None,
            cartpole: None,
            safe_improve: None,
            theory: None,
        }
    }

    /// Every default made explicit; sections unrelated to `kind` are dropped.
    pub fn resolved(&self) -> Self {
        use ExperimentKind::*;
        let kind = self.kind;
        let mut r = Self::new(kind);
        r.seed = self.seed;
        r.output = self.output.clone();
        let default_repeats = match kind {
            SuccessRate | SafeImprove => 100,
            Cartpole => 10,
            VerifyTheory => 1,
        };
        r.repeats = Some(self.repeats.unwrap_or(default_repeats));
        let algorithms =
            if self.algorithms.is_empty() { default_algorithms(kind) } else { self.algorithms.clone() };
        r.algorithms = algorithms.iter().map(AlgorithmSpec::resolved).collect();
        match kind {
            SuccessRate => {
                r.sample_sizes = self.sample_sizes.clone();
                if r.sample_sizes.is_empty() {
                    r.sample_sizes = default_sample_sizes();
                }
                r.environments = self.environments.clone();
                if r.environments.is_empty() {
                    r.environments = vec![EnvironmentId::RareTransition, EnvironmentId::CombinationLock];
                }
                if r.environments.contains(&EnvironmentId::RareTransition) {
                    r.rare_transition = Some(self.rare_transition.clone().unwrap_or_default());
                }
                if r.environments.contains(&EnvironmentId::CombinationLock) {
                    r.combination_lock = Some(self.combination_lock.clone().unwrap_or_default());
                }
            }
            Cartpole => {
                r.epsilons = self.epsilons.clone();
                if r.epsilons.is_empty() {
                    r.epsilons = vec![0.1, 0.3, 0.5, 0.6, 0.7, 0.9];
                }
                r.cartpole = Some(self.cartpole.clone().unwrap_or_default());
            }
            SafeImprove => {
                r.sample_sizes = self.sample_sizes.clone();
                if r.sample_sizes.is_empty() {
                    r.sample_sizes = vec![1_000, 10_000, 100_000];
                }
                r.safe_improve = Some(self.safe_improve.clone().unwrap_or_default());
            }
            VerifyTheory => {
                r.algorithms.clear();
                r.theory = Some(self.theory.clone().unwrap_or_default());
            }
        }
        r
    }

    pub fn repeats(&self) -> usize {
        self.repeats.unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.resolved();
        if r.repeats() == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        match r.kind {
            ExperimentKind::SuccessRate | ExperimentKind::SafeImprove => {
                if r.sample_sizes.contains(&0) {
                    return Err(Error::Config("sample sizes must be positive".into()));
                }
            }
            ExperimentKind::Cartpole => {
                if r.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return Err(Error::Config("epsilons must lie in [0, 1]".into()));
                }
            }
            ExperimentKind::VerifyTheory => {}
        }
        if r.kind != ExperimentKind::VerifyTheory && r.algorithms.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        for a in &r.algorithms {
            a.config(0.0).validate()?;
            if a.tau.is_some_and(|t| !(t >= 0.0)) {
                return Err(Error::Config(format!("{}: tau must be nonnegative", a.label())));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize spec: {e}")))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses and validates a TOML experiment spec. Errors report the line.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_spec(path: &Path) -> Result<ExperimentSpec> {
    parse_spec(&std::fs::read_to_string(path)?)
}
