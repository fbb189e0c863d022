use std::fmt;

use gausscap::asymptotic::{max_over_env, solve_asymptotic, EnvKind};
use gausscap::kkt::solve;
use gausscap::memoryless::{optimal_env_squeezing_report, solve_one_use, OneUseSolution};
use gausscap::verify::{run_all, run_criterion, CriterionResult};
use gausscap::{ChannelParams, EnvironmentSpectrum, Error};
use rayon::prelude::*;

use crate::config::{ConfigError, Job, Point, RunConfig, Solver, SweepAxis};
use crate::output::{Cell, Table};

pub const THREADS_VAR: &str = "GAUSSCAP_THREADS";

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(String),
    Io(std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) | RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Solver(e) => write!(f, "solver failure: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

// bad inputs reach the library as domain errors; those are the caller's fault
fn solver_err(e: Error) -> RunError {
    match e {
        Error::InvalidParameter { .. } | Error::Domain { .. } | Error::InfeasibleStart { .. } => {
            RunError::Config(ConfigError(e.to_string()))
        }
        other => RunError::Solver(other.to_string()),
    }
}

/// One solved point, in the column order of [`columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub capacity: f64,
    /// Stage, distribution or stage counts.
    pub label: String,
    /// `r_opt`, `tau` or the energy multiplier, depending on the solver.
    pub shape: f64,
    pub x: f64,
    /// `None` for an infinite optimal squeezing.
    pub s: Option<f64>,
    pub n_env: f64,
    pub order: &'static str,
}

pub fn columns(solver: Solver) -> [&'static str; 7] {
    let (label, shape) = match solver {
        Solver::Memoryless => ("stage", "r_opt"),
        Solver::Memory => ("distribution", "tau"),
        Solver::Finite => ("stages", "lambda"),
    };
    ["capacity", label, shape, "x", "s", "N_env", "order"]
}

fn one_use_row(p: &Point, sol: &OneUseSolution, n_env: f64, s: Option<f64>) -> Row {
    let s_used = s.unwrap_or(p.s_max.unwrap_or(0.0));
    let e_q = (n_env + 0.5) * s_used.exp();
    let e_p = (n_env + 0.5) * (-s_used).exp();
    let a_q = p.eta * (sol.i_q + sol.c_q) + (1.0 - p.eta) * e_q;
    let a_p = p.eta * (sol.i_p + sol.c_p) + (1.0 - p.eta) * e_p;
    Row {
        capacity: sol.capacity,
        label: sol.stage.as_str().to_string(),
        shape: sol.r_opt,
        x: (a_q * a_p).sqrt(),
        s,
        n_env,
        order: sol.order.as_str(),
    }
}

fn memoryless(p: &Point) -> Result<Row, Error> {
    if let Some(m) = p.m_env {
        let best = max_over_env(p.eta, p.n_photons, m, EnvKind::Memoryless, p.order, p.quad_points)?;
        let sol = solve_one_use(p.eta, p.n_photons, best.n_env, best.s, p.order)?;
        return Ok(one_use_row(p, &sol, best.n_env, Some(best.s)));
    }
    if let Some(s_max) = p.s_max {
        let opt = optimal_env_squeezing_report(p.eta, p.n_photons, p.n_env, s_max)?;
        let sol = solve_one_use(p.eta, p.n_photons, p.n_env, opt.s_star.unwrap_or(s_max), p.order)?;
        return Ok(one_use_row(p, &sol, p.n_env, opt.s_star));
    }
    let sol = solve_one_use(p.eta, p.n_photons, p.n_env, p.s, p.order)?;
    Ok(one_use_row(p, &sol, p.n_env, Some(p.s)))
}

fn memory(p: &Point) -> Result<Row, Error> {
    let (n_env, s) = match p.m_env {
        Some(m) => {
            let best = max_over_env(p.eta, p.n_photons, m, EnvKind::NearestNeighbor, p.order, p.quad_points)?;
            (best.n_env, best.s)
        }
        None => (p.n_env, p.s),
    };
    let sol = solve_asymptotic(p.eta, p.n_photons, n_env, s, p.order, p.quad_points)?;
    Ok(Row {
        capacity: sol.capacity,
        label: sol.distribution.as_str().to_string(),
        shape: sol.tau,
        x: sol.x,
        s: Some(s),
        n_env,
        order: p.order.as_str(),
    })
}

fn finite(p: &Point) -> Result<Row, Error> {
    let params = ChannelParams::new(p.eta, p.n_photons, p.n)?;
    let env = match p.model {
        EnvKind::Memoryless => EnvironmentSpectrum::memoryless(p.n_env, p.s, p.n)?,
        EnvKind::NearestNeighbor => EnvironmentSpectrum::nearest_neighbor(p.n_env, p.s, p.n)?,
    };
    let sol = solve(&params, &env, p.order, p.algorithm)?;
    let (n1, n2, n3) = sol.stages.counts();
    Ok(Row {
        capacity: sol.capacity_per_use,
        label: format!("{n1}/{n2}/{n3}"),
        shape: sol.lagrange_lambda,
        x: sol.x,
        s: Some(p.s),
        n_env: p.n_env,
        order: p.order.as_str(),
    })
}

/// Solves a single point.
pub fn solve_point(solver: Solver, p: &Point) -> Result<Row, RunError> {
    match solver {
        Solver::Memoryless => memoryless(p),
        Solver::Memory => memory(p),
        Solver::Finite => finite(p),
    }
    .map_err(solver_err)
}

fn thread_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => builder = builder.num_threads(k),
            _ => return Err(ConfigError(format!("{THREADS_VAR} = {v}: expected a positive integer")).into()),
        }
    }
    builder.build().map_err(|e| RunError::Solver(e.to_string()))
}

/// Solves every grid point; rows come back in grid order.
pub fn sweep(solver: Solver, base: &Point, axis: &SweepAxis) -> Result<Vec<(f64, Row)>, RunError> {
    let points = axis
        .values()
        .into_iter()
        .map(|v| Ok((v, base.with(&axis.name, v)?)))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let pool = thread_pool()?;
    pool.install(|| {
        points
            .par_iter()
            .map(|(v, p)| {
                solve_point(solver, p).map(|row| (*v, row)).map_err(|e| match e {
                    RunError::Solver(m) => RunError::Solver(format!("{} = {v}: {m}", axis.name)),
                    RunError::Config(ConfigError(m)) => RunError::Config(ConfigError(format!("{} = {v}: {m}", axis.name))),
                    other => other,
                })
            })
            .collect()
    })
}

fn row_cells(row: &Row) -> Vec<Cell> {
    vec![
        Cell::Num(Some(row.capacity)),
        Cell::Text(row.label.clone()),
        Cell::Num(Some(row.shape)),
        Cell::Num(Some(row.x)),
        Cell::Num(row.s),
        Cell::Num(Some(row.n_env)),
        Cell::Text(row.order.to_string()),
    ]
}

fn verify_table(results: &[CriterionResult]) -> Table {
    let mut table = Table::new(&["id", "title", "passed", "elapsed_secs", "limit_secs", "detail"]);
    for r in results {
        table.push(vec![
            Cell::Int(r.id as i64),
            Cell::Text(r.title.clone()),
            Cell::Bool(r.passed),
            Cell::Num(Some(r.elapsed_secs)),
            Cell::Num(Some(r.limit_secs)),
            Cell::Text(r.detail.clone()),
        ]);
    }
    table
}

/// Result of a run: the table to write and whether every check passed.
pub struct Outcome {
    pub table: Table,
    pub ok: bool,
}

pub fn execute(config: &RunConfig) -> Result<Outcome, RunError> {
    match &config.job {
        Job::Point(solver, p) => {
            let mut table = Table::new(&columns(*solver));
            table.push(row_cells(&solve_point(*solver, p)?));
            Ok(Outcome { table, ok: true })
        }
        Job::Sweep(solver, p, axis) => {
            // an axis that is also an output column is reported once, up front
            let cols = columns(*solver);
            let dup = cols.iter().position(|c| *c == axis.name);
            let mut names = vec![axis.name.as_str()];
            names.extend(cols.iter().enumerate().filter(|(k, _)| Some(*k) != dup).map(|(_, c)| *c));
            let mut table = Table::new(&names);
            for (v, row) in sweep(*solver, p, axis)? {
                let mut cells = vec![if axis.name == "n" { Cell::Int(v.round() as i64) } else { Cell::Num(Some(v)) }];
                cells.extend(row_cells(&row).into_iter().enumerate().filter(|(k, _)| Some(*k) != dup).map(|(_, c)| c));
                table.push(cells);
            }
            Ok(Outcome { table, ok: true })
        }
        Job::Verify(which) => {
            let results = match which {
                Some(id) => vec![run_criterion(*id)],
                None => run_all(),
            };
            for r in &results {
                eprintln!("{}", r.line());
            }
            let ok = results.iter().all(|r| r.passed);
            Ok(Outcome { table: verify_table(&results), ok })
        }
    }
}
