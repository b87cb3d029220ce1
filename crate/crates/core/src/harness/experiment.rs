//! Seeded multi-run execution.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use super::config::{ExperimentConfig, InnerKind, Method, OracleSpec, ProblemSpec, X0Spec};
use super::csvlog::{read_run, write_run};
use super::dataset::{parse_libsvm, split_indices};
use super::summary::{parse_run_id, run_id, RunResult, Summary};
use crate::ascn::run_ascn_monitored;
use crate::baselines::{run_sgd_monitored, SgdConfig};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracles::{BatchSpec, ExactOracle, MinibatchOracle, NoiseOracle, NoiseSpec, Oracle};
use crate::problems::{LogisticProblem, Objective, QuadraticProblem};
use crate::record::{IterationRecord, Monitor};
use crate::restarts::{run_restarted_with, RestartOptions};
use crate::tensor::run_tensor_monitored;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ASCN_OUT_DIR";

pub const SUMMARY_FILE: &str = "summary.txt";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Training objective and optional held-out objective.
pub struct Problems {
    pub train: Box<dyn Objective>,
    pub test: Option<Box<dyn Objective>>,
}

fn split_logistic(p: LogisticProblem, cfg: &ExperimentConfig) -> Result<Problems> {
    let Some(sp) = cfg.split else {
        return Ok(Problems {
            train: Box::new(p),
            test: None,
        });
    };
    let (tr, te) = split_indices(p.num_samples(), sp.train_n, sp.test_n, sp.seed)?;
    let test: Option<Box<dyn Objective>> = if te.is_empty() { None } else { Some(Box::new(p.select(&te)?)) };
    Ok(Problems {
        train: Box::new(p.select(&tr)?),
        test,
    })
}

pub fn build_problems(cfg: &ExperimentConfig) -> Result<Problems> {
    match &cfg.problem {
        ProblemSpec::SyntheticLogistic { n, d, flip, l2, seed } => {
            split_logistic(LogisticProblem::synthetic(*n, *d, *flip, *l2, *seed)?, cfg)
        }
        ProblemSpec::Libsvm { path, dim, l2 } => {
            let path = if path.is_relative() { cfg.base_dir.join(path) } else { path.clone() };
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let data = parse_libsvm(BufReader::new(File::open(&path)?), &name, *dim)?;
            split_logistic(data.to_logistic(*l2)?, cfg)
        }
        ProblemSpec::Quadratic {
            eigenvalues,
            minimizer,
            seed,
        } => {
            let x_star = minimizer
                .as_ref()
                .map(|v| Vector::from_vec(v.clone()))
                .unwrap_or_else(|| Vector::zeros(eigenvalues.len()));
            Ok(Problems {
                train: Box::new(QuadraticProblem::random_with_spectrum(eigenvalues, x_star, *seed)?),
                test: None,
            })
        }
    }
}

pub fn starting_point(cfg: &ExperimentConfig, d: usize) -> Result<Vector> {
    match &cfg.x0 {
        X0Spec::Fill(v) => Ok(Vector::from_element(d, *v)),
        X0Spec::Vector(v) if v.len() == d => Ok(Vector::from_vec(v.clone())),
        X0Spec::Vector(v) => Err(Error::Config(format!("x0 has {} entries, problem has {d}", v.len()))),
    }
}

fn make_oracle<'a>(cfg: &ExperimentConfig, problem: &'a dyn Objective, seed: u64) -> Result<Box<dyn Oracle + 'a>> {
    Ok(match cfg.oracle {
        OracleSpec::Exact {} => Box::new(ExactOracle::new(problem)),
        OracleSpec::Minibatch {
            grad_batch,
            hess_batch,
            with_replacement,
        } => Box::new(MinibatchOracle::new(
            problem,
            BatchSpec {
                grad_batch,
                hess_batch,
                seed,
                with_replacement,
            },
        )?),
        OracleSpec::Noise { sigma1, sigma2, sigma3 } => Box::new(NoiseOracle::new(
            problem,
            NoiseSpec {
                sigma1,
                sigma2,
                sigma3,
                seed,
            },
        )?),
    })
}

/// The configured `M`, or the default multiple of the relevant Lipschitz constant.
fn regularization(cfg: &ExperimentConfig, problem: &dyn Objective, third: bool) -> Result<f64> {
    if let Some(m) = cfg.schedule.m {
        return Ok(m);
    }
    let c = problem.constants();
    let m = if third { 4.0 / 3.0 * c.l3 } else { 4.0 * c.l2 };
    if m > 0.0 && m.is_finite() {
        Ok(m)
    } else {
        Err(Error::Config("schedule.m must be set for a problem without a usable Lipschitz constant".into()))
    }
}

/// Runs one (method, seed) pair and returns its log.
pub fn execute(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    problems: &Problems,
) -> Result<Vec<IterationRecord>> {
    let train = problems.train.as_ref();
    let x0 = starting_point(cfg, train.dim())?;
    let mut oracle = make_oracle(cfg, train, seed)?;
    let test = problems.test.as_deref();
    let every = cfg.test_every();
    let mut monitor = match test {
        Some(t) => Monitor::with_test(t, every),
        None => Monitor::default(),
    };
    let iterations = cfg.iterations_for(method);
    let report = match method {
        Method::Ascn => {
            let sched = cfg.schedule.second(regularization(cfg, train, false)?, iterations.unwrap_or(1));
            run_ascn_monitored(train, oracle.as_mut(), &sched, &x0, &mut monitor)?
        }
        Method::Tensor => {
            let sched = cfg.schedule.third(regularization(cfg, train, true)?, iterations.unwrap_or(1));
            run_tensor_monitored(train, oracle.as_mut(), &sched, &x0, &mut monitor)?
        }
        Method::Sgd => {
            let sgd = cfg.sgd.expect("validated");
            let conf = SgdConfig {
                lr: sgd.lr,
                iterations: iterations.unwrap_or(1),
            };
            run_sgd_monitored(train, oracle.as_mut(), &conf, &x0, &mut monitor)?
        }
        Method::Restarted => {
            let spec = cfg.restart.expect("validated");
            let third = spec.inner == InnerKind::Third;
            let c = train.constants();
            let plan = spec.plan(
                &cfg.schedule,
                regularization(cfg, train, third)?,
                c.mu,
                if third { c.l3 } else { c.l2 },
            );
            let opts = RestartOptions {
                x_star: None,
                test,
                test_every: every,
            };
            let rep = run_restarted_with(train, oracle.as_mut(), &plan, &x0, &opts)?;
            return Ok(rep.records);
        }
    };
    Ok(report.records)
}

pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub runs: Vec<RunResult>,
    pub summary: Summary,
}

/// Runs every (method, seed) pair, in parallel over a pool of `threads`
/// workers (all cores when `None`), writing `<out_dir>/<name>/<run_id>.csv`
/// per successful run and a summary. Failed runs are listed in the summary.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, threads: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let problems = build_problems(cfg)?;
    starting_point(cfg, problems.train.dim())?;
    let dir = out_dir.join(&cfg.name);
    std::fs::create_dir_all(&dir)?;

    let jobs: Vec<(Method, u64)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<RunResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(method, seed)| {
                let id = run_id(method.as_str(), seed);
                let result = execute(cfg, method, seed, &problems).and_then(|records| {
                    let file = File::create(dir.join(format!("{id}.csv")))?;
                    write_run(BufWriter::new(file), &id, seed, &records)?;
                    Ok(records)
                });
                match result {
                    Ok(records) => {
                        info!("{id}: final loss {:.6e}", records.last().map_or(f64::NAN, |r| r.train_loss));
                        RunResult {
                            run_id: id,
                            method: method.as_str().into(),
                            seed,
                            records,
                            error: None,
                        }
                    }
                    Err(e) => {
                        warn!("{id} failed: {e}");
                        RunResult {
                            run_id: id,
                            method: method.as_str().into(),
                            seed,
                            records: Vec::new(),
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });
    let summary = Summary::build(&cfg.name, &runs, None);
    std::fs::write(dir.join(SUMMARY_FILE), summary.to_toml())?;
    Ok(ExperimentOutcome { dir, runs, summary })
}

/// Rebuilds a summary from the CSV logs in `dir`. Failures recorded in an
/// existing summary file are carried over.
pub fn summarize_dir(dir: &Path, budget: Option<u64>) -> Result<Summary> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut runs = Vec::new();
    for p in &paths {
        let log = read_run(BufReader::new(File::open(p)?))?;
        let (method, seed) = parse_run_id(&log.run_id).ok_or_else(|| Error::Parse {
            line: 2,
            message: format!("run id {:?} in {} is not <method>-seed<n>", log.run_id, p.display()),
        })?;
        runs.push(RunResult {
            run_id: log.run_id,
            method,
            seed,
            records: log.records,
            error: None,
        });
    }
    let previous = std::fs::read_to_string(dir.join(SUMMARY_FILE))
        .ok()
        .and_then(|t| Summary::from_toml(&t).ok());
    let name = previous
        .as_ref()
        .map(|s| s.name.clone())
        .or_else(|| dir.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    if let Some(prev) = &previous {
        for (id, err) in &prev.failures {
            if let Some((method, seed)) = parse_run_id(id) {
                runs.push(RunResult {
                    run_id: id.clone(),
                    method,
                    seed,
                    records: Vec::new(),
                    error: Some(err.clone()),
                });
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Summary::build(&name, &runs, budget))
}
