//! Cross-seed summaries, written in the same TOML grammar as configs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::record::IterationRecord;

/// One finished (or failed) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub method: String,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub error: Option<String>,
}

pub fn run_id(method: &str, seed: u64) -> String {
    format!("{method}-seed{seed}")
}

/// Inverse of [`run_id`].
pub fn parse_run_id(id: &str) -> Option<(String, u64)> {
    let (method, seed) = id.rsplit_once("-seed")?;
    Some((method.to_string(), seed.parse().ok()?))
}

/// Training loss of the last iterate whose cumulative gradient-sample count
/// is within `budget`.
pub fn loss_at_budget(records: &[IterationRecord], budget: u64) -> Option<f64> {
    records
        .iter()
        .take_while(|r| r.grad_samples_cum <= budget)
        .last()
        .map(|r| r.train_loss)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub runs: usize,
    pub failed: usize,
    pub final_train_loss_mean: Option<f64>,
    pub final_train_loss_std: Option<f64>,
    pub best_train_loss_mean: Option<f64>,
    pub final_test_loss_mean: Option<f64>,
    pub final_test_loss_std: Option<f64>,
    pub grad_samples_mean: Option<f64>,
    pub hess_samples_mean: Option<f64>,
    pub budget_train_loss_mean: Option<f64>,
    pub budget_train_loss_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    /// Gradient-sample budget used to align methods.
    pub budget: Option<u64>,
    pub methods: BTreeMap<String, MethodSummary>,
    /// Error message per failed run id.
    pub failures: BTreeMap<String, String>,
}

impl Summary {
    /// Aligns runs at `budget` gradient samples, or by default at the
    /// smallest total any successful run consumed.
    pub fn build(name: &str, runs: &[RunResult], budget: Option<u64>) -> Summary {
        let ok = || runs.iter().filter(|r| r.error.is_none() && !r.records.is_empty());
        let budget = budget.or_else(|| ok().map(|r| r.records.last().unwrap().grad_samples_cum).min());
        let mut methods = BTreeMap::new();
        let mut names: Vec<&str> = runs.iter().map(|r| r.method.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        for m in names {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.method == m).collect();
            let good: Vec<&RunResult> = mine
                .iter()
                .copied()
                .filter(|r| r.error.is_none() && !r.records.is_empty())
                .collect();
            let collect = |f: &dyn Fn(&RunResult) -> Option<f64>| -> Vec<f64> { good.iter().filter_map(|r| f(r)).collect() };
            let stat = |v: Vec<f64>| if v.is_empty() { (None, None) } else {
                let (a, b) = mean_std(&v);
                (Some(a), Some(b))
            };
            let (final_mean, final_std) = stat(collect(&|r| r.records.last().map(|x| x.train_loss)));
            let (best_mean, _) = stat(collect(&|r| r.records.iter().map(|x| x.train_loss).reduce(f64::min)));
            let (test_mean, test_std) = stat(collect(&|r| r.records.iter().rev().find_map(|x| x.test_loss)));
            let (grad, _) = stat(collect(&|r| r.records.last().map(|x| x.grad_samples_cum as f64)));
            let (hess, _) = stat(collect(&|r| r.records.last().map(|x| x.hess_samples_cum as f64)));
            let (bmean, bstd) = match budget {
                Some(b) => stat(collect(&|r| loss_at_budget(&r.records, b))),
                None => (None, None),
            };
            methods.insert(
                m.to_string(),
                MethodSummary {
                    runs: mine.len(),
                    failed: mine.len() - good.len(),
                    final_train_loss_mean: final_mean,
                    final_train_loss_std: final_std,
                    best_train_loss_mean: best_mean,
                    final_test_loss_mean: test_mean,
                    final_test_loss_std: test_std,
                    grad_samples_mean: grad,
                    hess_samples_mean: hess,
                    budget_train_loss_mean: bmean,
                    budget_train_loss_std: bstd,
                },
            );
        }
        let failures = runs
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| (r.run_id.clone(), e.clone())))
            .collect();
        Summary {
            name: name.to_string(),
            budget,
            methods,
            failures,
        }
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summaries contain only finite-keyed plain data")
    }

    pub fn from_toml(text: &str) -> crate::Result<Summary> {
        toml::from_str(text).map_err(|e| crate::Error::Config(e.to_string()))
    }
}
