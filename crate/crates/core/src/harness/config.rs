//! Experiment configuration.
//!
//! Configs are TOML: top-level keys plus `[problem]`, `[split]`, `[oracle]`,
//! `[schedule]`, `[sgd]` and `[restart]` sections. Unknown keys are errors.
//!
//! ```toml
//! name = "logistic-small"
//! method = ["ascn", "sgd"]
//! iterations = 100
//! seeds = [1, 2, 3]
//!
//! [problem]
//! kind = "synthetic-logistic"
//! n = 2000
//! d = 20
//! flip = 0.1
//! l2 = 0.0001
//! seed = 7
//!
//! [split]
//! train_n = 1500
//! test_n = 500
//! seed = 1
//!
//! [oracle]
//! kind = "minibatch"
//! grad_batch = 200
//! hess_batch = 20
//!
//! [schedule]
//! sigma1_over_r = 0.01
//! sigma2 = 0.05
//!
//! [sgd]
//! lr = 1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ascn::{Schedule2, TauRule};
use crate::error::{Error, Result};
use crate::restarts::{InnerMethod, RestartPlan};
use crate::subsolver::{Backend, TENSOR_MAX_ITERS};
use crate::tensor::ScheduleP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ascn,
    Tensor,
    Restarted,
    Sgd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ascn => "ascn",
            Method::Tensor => "tensor",
            Method::Restarted => "restarted",
            Method::Sgd => "sgd",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        [Method::Ascn, Method::Tensor, Method::Restarted, Method::Sgd]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Methods {
    One(Method),
    Many(Vec<Method>),
}

impl Methods {
    pub fn to_vec(&self) -> Vec<Method> {
        match self {
            Methods::One(m) => vec![*m],
            Methods::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    SyntheticLogistic {
        n: usize,
        d: usize,
        #[serde(default)]
        flip: f64,
        #[serde(default)]
        l2: f64,
        #[serde(default)]
        seed: u64,
    },
    Libsvm {
        /// Relative paths are resolved against the config file's directory.
        path: PathBuf,
        dim: Option<usize>,
        #[serde(default)]
        l2: f64,
    },
    Quadratic {
        eigenvalues: Vec<f64>,
        /// Defaults to the origin.
        minimizer: Option<Vec<f64>>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_n: usize,
    #[serde(default)]
    pub test_n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSpec {
    // A struct variant so that stray keys are rejected.
    Exact {},
    Minibatch {
        grad_batch: usize,
        hess_batch: usize,
        #[serde(default)]
        with_replacement: bool,
    },
    Noise {
        #[serde(default)]
        sigma1: f64,
        #[serde(default)]
        sigma2: f64,
        #[serde(default)]
        sigma3: f64,
    },
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec::Exact {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauKind {
    #[default]
    Constant,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendSpec {
    #[default]
    Auto,
    Secular,
    Iterative,
}

/// Fields shared by the accelerated methods. `m` defaults to `4 L₂` for the
/// second-order method and `(4/3) L₃` for the third-order one.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub m: Option<f64>,
    #[serde(default)]
    pub sigma1_over_r: f64,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub sigma3: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub tau_rule: TauKind,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "four")]
    pub eta3: f64,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default = "tensor_max_iters")]
    pub max_inner: usize,
}

fn one() -> f64 {
    1.0
}

fn four() -> f64 {
    4.0
}

fn tensor_max_iters() -> usize {
    TENSOR_MAX_ITERS
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            m: None,
            sigma1_over_r: 0.0,
            sigma2: 0.0,
            sigma3: 0.0,
            tau: 0.0,
            tau_rule: TauKind::Constant,
            radius: 1.0,
            eta3: 4.0,
            backend: BackendSpec::Auto,
            max_inner: TENSOR_MAX_ITERS,
        }
    }
}

impl ScheduleSpec {
    fn tau_rule(&self) -> TauRule {
        match self.tau_rule {
            TauKind::Constant => TauRule::Constant(self.tau),
            TauKind::Dynamic => TauRule::Dynamic(self.tau),
        }
    }

    pub fn second(&self, m: f64, iterations: usize) -> Schedule2 {
        Schedule2 {
            m,
            sigma1_over_r: self.sigma1_over_r,
            sigma2: self.sigma2,
            tau: self.tau_rule(),
            radius: self.radius,
            iterations,
            backend: match self.backend {
                BackendSpec::Auto => Backend::Auto,
                BackendSpec::Secular => Backend::Secular,
                BackendSpec::Iterative => Backend::Iterative,
            },
        }
    }

    pub fn third(&self, m: f64, iterations: usize) -> ScheduleP {
        ScheduleP {
            m,
            eta3: self.eta3,
            sigma1_over_r: self.sigma1_over_r,
            sigma2: self.sigma2,
            sigma3: self.sigma3,
            tau: self.tau_rule(),
            radius: self.radius,
            iterations,
            max_inner: self.max_inner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSpec {
    pub lr: f64,
    /// Overrides the top-level `iterations`.
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerKind {
    #[default]
    Second,
    Third,
}

/// `mu` and `smoothness` default to the problem's constants.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestartSpec {
    pub r0: f64,
    pub mu: Option<f64>,
    #[serde(default)]
    pub inner: InnerKind,
    pub c_big: Option<f64>,
    pub max_epochs: usize,
    #[serde(default)]
    pub target: f64,
    #[serde(default)]
    pub sigma1: f64,
    pub smoothness: Option<f64>,
}

impl RestartSpec {
    /// `mu` and `l_p` are the problem's constants, used when not overridden.
    pub fn plan(&self, sched: &ScheduleSpec, m: f64, mu: f64, l_p: f64) -> RestartPlan {
        let inner = match self.inner {
            InnerKind::Second => InnerMethod::Second(sched.second(m, 1)),
            InnerKind::Third => InnerMethod::Third(sched.third(m, 1)),
        };
        RestartPlan {
            mu: self.mu.unwrap_or(mu),
            r0: self.r0,
            c_big: self.c_big.unwrap_or_else(|| RestartPlan::default_c_big(inner.order())),
            inner,
            max_epochs: self.max_epochs,
            target: self.target,
            sigma1: self.sigma1,
            smoothness: self.smoothness.unwrap_or(l_p),
        }
    }
}

/// Starting point: a constant fill (default 3) or an explicit vector.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Fill(f64),
    Vector(Vec<f64>),
}

impl Default for X0Spec {
    fn default() -> Self {
        X0Spec::Fill(3.0)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub method: Methods,
    /// Iteration budget of the unrestarted methods.
    pub iterations: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub x0: X0Spec,
    /// Test loss cadence; defaults to every iteration up to 500 iterations
    /// and to about 500 evaluations per run beyond that.
    pub test_every: Option<usize>,
    pub problem: ProblemSpec,
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub sgd: Option<SgdSpec>,
    pub restart: Option<RestartSpec>,
    /// Directory used to resolve relative dataset paths; not read from the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "experiment".into()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} = {v} must be a finite nonnegative number")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} = {v} must be positive")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.to_vec()
    }

    pub fn iterations_for(&self, method: Method) -> Option<usize> {
        match method {
            Method::Sgd => self.sgd.and_then(|s| s.iterations).or(self.iterations),
            Method::Restarted => None,
            _ => self.iterations,
        }
    }

    pub fn test_every(&self) -> usize {
        self.test_every.unwrap_or_else(|| {
            let longest = self
                .methods()
                .into_iter()
                .filter_map(|m| self.iterations_for(m))
                .max()
                .unwrap_or(0);
            longest.div_ceil(500).max(1)
        })
    }

    /// Checks every field that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        let methods = self.methods();
        if methods.is_empty() {
            return Err(bad("method list is empty"));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds is empty"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("seeds contain duplicates"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(bad(format!("name {:?} is not a valid file stem", self.name)));
        }
        if self.test_every == Some(0) {
            return Err(bad("test_every must be at least 1"));
        }
        for m in &methods {
            match m {
                Method::Restarted => {
                    let r = self.restart.ok_or_else(|| bad("method restarted needs a [restart] section"))?;
                    positive("restart.r0", r.r0)?;
                    if let Some(mu) = r.mu {
                        positive("restart.mu", mu)?;
                    }
                    if let Some(c) = r.c_big {
                        if !(c >= 1.0 && c.is_finite()) {
                            return Err(bad(format!("restart.c_big = {c} must be at least 1")));
                        }
                    }
                    if r.max_epochs == 0 {
                        return Err(bad("restart.max_epochs must be at least 1"));
                    }
                    nonneg("restart.target", r.target)?;
                    nonneg("restart.sigma1", r.sigma1)?;
                    if let Some(l) = r.smoothness {
                        nonneg("restart.smoothness", l)?;
                    }
                }
                Method::Sgd => {
                    let s = self.sgd.ok_or_else(|| bad("method sgd needs an [sgd] section"))?;
                    nonneg("sgd.lr", s.lr)?;
                }
                _ => {}
            }
            match self.iterations_for(*m) {
                Some(0) => return Err(bad(format!("{} iterations must be at least 1", m.as_str()))),
                None if *m != Method::Restarted => {
                    return Err(bad(format!("method {} needs iterations", m.as_str())))
                }
                _ => {}
            }
        }

        let s = &self.schedule;
        if let Some(m) = s.m {
            positive("schedule.m", m)?;
        }
        nonneg("schedule.sigma1_over_r", s.sigma1_over_r)?;
        nonneg("schedule.sigma2", s.sigma2)?;
        nonneg("schedule.sigma3", s.sigma3)?;
        nonneg("schedule.tau", s.tau)?;
        positive("schedule.radius", s.radius)?;
        if !(s.eta3 >= 4.0 && s.eta3.is_finite()) {
            return Err(bad(format!("schedule.eta3 = {} must be at least 4", s.eta3)));
        }
        if s.max_inner == 0 {
            return Err(bad("schedule.max_inner must be at least 1"));
        }

        match &self.problem {
            ProblemSpec::SyntheticLogistic { n, d, flip, l2, .. } => {
                if *n == 0 || *d == 0 {
                    return Err(bad("problem n and d must be positive"));
                }
                if !(0.0..=1.0).contains(flip) {
                    return Err(bad(format!("problem.flip = {flip} must lie in [0, 1]")));
                }
                nonneg("problem.l2", *l2)?;
            }
            ProblemSpec::Libsvm { l2, dim, .. } => {
                nonneg("problem.l2", *l2)?;
                if *dim == Some(0) {
                    return Err(bad("problem.dim must be positive"));
                }
            }
            ProblemSpec::Quadratic {
                eigenvalues, minimizer, ..
            } => {
                if eigenvalues.is_empty() {
                    return Err(bad("problem.eigenvalues is empty"));
                }
                for &e in eigenvalues {
                    nonneg("problem eigenvalue", e)?;
                }
                if let Some(x) = minimizer {
                    if x.len() != eigenvalues.len() {
                        return Err(bad("problem.minimizer length differs from the eigenvalue count"));
                    }
                }
                if self.split.is_some() {
                    return Err(bad("quadratic problems have no samples to split"));
                }
            }
        }

        if let Some(sp) = &self.split {
            if sp.train_n == 0 {
                return Err(bad("split.train_n must be positive"));
            }
            if let ProblemSpec::SyntheticLogistic { n, .. } = &self.problem {
                if sp.train_n + sp.test_n > *n {
                    return Err(Error::SizeExceeded {
                        requested: sp.train_n + sp.test_n,
                        available: *n,
                    });
                }
            }
        }

        match self.oracle {
            OracleSpec::Exact {} => {}
            OracleSpec::Minibatch {
                grad_batch, hess_batch, ..
            } => {
                if grad_batch == 0 || hess_batch == 0 {
                    return Err(bad("oracle batch sizes must be positive"));
                }
            }
            OracleSpec::Noise { sigma1, sigma2, sigma3 } => {
                nonneg("oracle.sigma1", sigma1)?;
                nonneg("oracle.sigma2", sigma2)?;
                nonneg("oracle.sigma3", sigma3)?;
            }
        }

        if let X0Spec::Vector(v) = &self.x0 {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad("x0 has non-finite entries"));
            }
        } else if let X0Spec::Fill(v) = self.x0 {
            if !v.is_finite() {
                return Err(bad("x0 is not finite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
method = "ascn"
iterations = 10
seeds = [1]
[problem]
kind = "quadratic"
eigenvalues = [1.0, 2.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.name, "experiment");
        assert_eq!(c.x0, X0Spec::Fill(3.0));
        assert_eq!(c.oracle, OracleSpec::Exact {});
        assert_eq!(c.schedule, ScheduleSpec::default());
        assert_eq!(c.test_every(), 1);
        assert_eq!(c.methods(), vec![Method::Ascn]);
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let c = ExperimentConfig::from_toml(&doc).unwrap();
        assert_eq!(c.methods(), vec![Method::Ascn, Method::Sgd]);
        assert_eq!(
            c.oracle,
            OracleSpec::Minibatch {
                grad_batch: 200,
                hess_batch: 20,
                with_replacement: false
            }
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        for extra in [
            "bogus = 1\n",
            "[schedule]\nsigma_1 = 0.1\n",
            "[oracle]\nkind = \"exact\"\nbatch = 3\n",
            "[oracle]\nkind = \"sometimes\"\n",
        ] {
            let text = format!("{BASE}{extra}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "accepted {extra:?}");
        }
        let text = BASE.replace("[problem]", "[problem]\nwidth = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn out_of_range_values_rejected() {
        let cases = [
            BASE.replace("iterations = 10", "iterations = 0"),
            BASE.replace("seeds = [1]", "seeds = []"),
            BASE.replace("seeds = [1]", "seeds = [2, 2]"),
            BASE.replace("\"ascn\"", "\"sgd\""),
            BASE.replace("\"ascn\"", "\"restarted\""),
            format!("{BASE}[schedule]\nm = -1.0\n"),
            format!("{BASE}[schedule]\neta3 = 2.0\n"),
            format!("{BASE}[schedule]\nradius = 0.0\n"),
            format!("{BASE}[sgd]\nlr = -0.1\n").replace("\"ascn\"", "\"sgd\""),
            format!("{BASE}[split]\ntrain_n = 1\n"),
            format!("{BASE}[oracle]\nkind = \"noise\"\nsigma1 = -1.0\n"),
            BASE.replace("[1.0, 2.0]", "[1.0, -2.0]"),
        ];
        for text in &cases {
            assert!(ExperimentConfig::from_toml(text).is_err(), "accepted:\n{text}");
        }
        let text = r#"
method = "ascn"
iterations = 5
seeds = [1]
[problem]
kind = "synthetic-logistic"
n = 10
d = 2
[split]
train_n = 8
test_n = 3
"#;
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::SizeExceeded { .. })));
    }

    #[test]
    fn long_runs_thin_test_evaluations() {
        let c = ExperimentConfig::from_toml(&BASE.replace("iterations = 10", "iterations = 2000")).unwrap();
        assert_eq!(c.test_every(), 4);
    }

    #[test]
    fn schedule_conversion() {
        let text = format!("{BASE}[schedule]\ntau = 0.5\ntau_rule = \"dynamic\"\nsigma2 = 0.1\n");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let s = c.schedule.second(2.0, 7);
        assert_eq!(s.tau, TauRule::Dynamic(0.5));
        assert_eq!((s.m, s.iterations, s.sigma2), (2.0, 7, 0.1));
    }
}
