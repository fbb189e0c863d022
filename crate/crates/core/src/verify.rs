//! Acceptance battery: nine end-to-end checks of the solvers against closed forms,
//! limits, each other and the brute-force oracle.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{max_over_env, solve_asymptotic, Distribution, EnvKind};
use crate::channel::{mean_env_photons_memory, ChannelParams, EnvironmentSpectrum};
use crate::entropy::{g_entropy, g_series, ApproxOrder};
use crate::error::Result;
use crate::kkt::{capacity_all_third, solve_dynamic, solve_static, Stage};
use crate::memoryless::{capacity_third_closed_form, solve_one_use};
use crate::oracle::maximize_chi_seeded;

pub const CRITERIA: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub limit_secs: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {} ({:.2}s / {:.0}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed_secs,
            self.limit_secs,
            self.detail
        )
    }
}

fn title(id: usize) -> &'static str {
    match id {
        1 => "entropy expansion error",
        2 => "all-third closed form vs oracle",
        3 => "static and dynamic algorithms agree",
        4 => "memoryless strong-squeezing limit",
        5 => "approximation fidelity",
        6 => "kink in optimal input squeezing",
        7 => "memory channel consistency",
        8 => "water filling",
        9 => "symmetry breaking over modes",
        _ => "unknown",
    }
}

fn limit(id: usize) -> Duration {
    Duration::from_secs(match id {
        1 => 1,
        2 => 120,
        3 => 60,
        4 => 1,
        5 => 10,
        6 => 5,
        7 => 300,
        8 => 30,
        9 => 600,
        _ => 0,
    })
}

/// Runs criterion `id` (1..=9).
pub fn run_criterion(id: usize) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => entropy_expansion(),
        2 => closed_form_vs_oracle(),
        3 => stage_algorithms(),
        4 => memoryless_limit(),
        5 => approximation_fidelity(),
        6 => kink(),
        7 => memory_consistency(),
        8 => water_filling(),
        9 => symmetry_breaking(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if elapsed > limit(id) {
        passed = false;
        detail.push_str("; over time limit");
    }
    CriterionResult {
        id,
        title: title(id).to_string(),
        passed,
        detail,
        elapsed_secs: elapsed.as_secs_f64(),
        limit_secs: limit(id).as_secs_f64(),
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA).map(run_criterion).collect()
}

type Outcome = Result<(bool, String)>;

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ")
}

fn entropy_expansion() -> Outcome {
    let nus = [1.0, 2.0, 5.0, 10.0, 50.0];
    let mut errs = Vec::new();
    let mut ok = true;
    for &nu in &nus {
        let err = (g_entropy(nu)? - g_series(nu, 0)?).abs();
        let r = (2.0 * nu).powi(-2);
        ok &= err <= r / (1.0 - r) / (6.0 * std::f64::consts::LN_2);
        errs.push(err);
    }
    let mut worst = 0.0f64;
    for k in 0..nus.len() - 1 {
        let ratio = errs[k] / errs[k + 1];
        let expected = (nus[k + 1] / nus[k]).powi(2);
        worst = worst.max((ratio / expected - 1.0).abs());
    }
    ok &= worst <= 0.2;
    Ok((ok, format!("errors [{}], worst ratio deviation {:.1}%", sci(&errs), 100.0 * worst)))
}

fn random_env(rng: &mut ChaCha8Rng, n: usize, n_env: f64, s: f64) -> Result<EnvironmentSpectrum> {
    if rng.gen_bool(0.5) {
        EnvironmentSpectrum::memoryless(n_env, s, n)
    } else {
        EnvironmentSpectrum::nearest_neighbor(n_env, s, n)
    }
}

fn closed_form_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap = 0.0f64;
    let mut worst_spread = 0.0f64;
    let mut found = 0;
    while found < 20 {
        let n = rng.gen_range(1..=4);
        let eta = rng.gen_range(0.2..0.9);
        let n_env = rng.gen_range(0.0..2.0);
        let s = rng.gen_range(0.0..0.8);
        let big_n = rng.gen_range(1.0..5.0);
        let params = ChannelParams::new(eta, big_n, n)?;
        let env = random_env(&mut rng, n, n_env, s)?;
        let Ok(c) = capacity_all_third(&params, &env) else { continue };
        let report = maximize_chi_seeded(&params, &env, 8, 3000, found as u64)?;
        worst_gap = worst_gap.max((report.chi_best / n as f64 - c).abs());
        worst_spread = worst_spread.max(report.spread);
        found += 1;
    }
    let ok = worst_gap < 1e-3 && worst_spread < 1e-4;
    Ok((ok, format!("max |oracle - closed form| {worst_gap:.2e} bits, max spread {worst_spread:.2e}")))
}

fn stage_algorithms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut mixed = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=16);
        let eta = rng.gen_range(0.05..0.95);
        let big_n = 10f64.powf(rng.gen_range(-2.5..0.8));
        let n_env = rng.gen_range(0.0..2.0);
        let s = rng.gen_range(0.0..2.5);
        let params = ChannelParams::new(eta, big_n, n)?;
        let env = random_env(&mut rng, n, n_env, s)?;
        let d = solve_dynamic(&params, &env, ApproxOrder::Exact)?;
        let st = solve_static(&params, &env, ApproxOrder::Exact)?;
        if d.stages != st.stages {
            mismatched += 1;
        }
        let (n1, n2, n3) = d.stages.counts();
        if [n1, n2, n3].iter().filter(|c| **c > 0).count() > 1 {
            mixed += 1;
        }
        worst = worst.max((d.capacity_per_use - st.capacity_per_use).abs());
    }
    let ok = mismatched == 0 && worst <= 1e-10;
    Ok((ok, format!("{mismatched} stage mismatches, max capacity gap {worst:.1e}, {mixed} mixed-stage instances")))
}

fn memoryless_limit() -> Outcome {
    let limit = 3f64.log2();
    let mut worst = 0.0f64;
    for eta in [0.1, 0.5, 0.9] {
        let c = solve_one_use(eta, 1.0, 1.0, 12.0, ApproxOrder::Exact)?.capacity;
        worst = worst.max((c / limit - 1.0).abs());
    }
    Ok((worst < 0.01, format!("max relative gap to log2(3): {:.3}%", 100.0 * worst)))
}

fn approximation_fidelity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for big_n in [0.01, 1.0] {
        let solve = |order| solve_asymptotic(0.95, big_n, 0.5, 2.5, order, 256);
        let exact = solve(ApproxOrder::Exact)?;
        let zeroth = solve(ApproxOrder::Zeroth)?;
        let first = solve(ApproxOrder::First)?;
        let rel = |c: f64| (exact.capacity - c).abs() / exact.capacity;
        let (rz, rf) = (rel(zeroth.capacity), rel(first.capacity));
        ok &= rz < 5e-4 && rf <= rz;
        parts.push(format!(
            "N={big_n}: zeroth {:.3}%, first {:.3}% ({} vs {})",
            100.0 * rz,
            100.0 * rf,
            exact.distribution.as_str(),
            zeroth.distribution.as_str()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn kink() -> Outcome {
    let (eta, big_n, n_env) = (0.5, 1.0, 1.0);
    let stage = |s| solve_one_use(eta, big_n, n_env, s, ApproxOrder::Exact).map(|r| r.stage);
    let r_opt = |s| solve_one_use(eta, big_n, n_env, s, ApproxOrder::Exact).map(|r| r.r_opt);
    let (mut lo, mut hi) = (0.0, 10.0);
    if stage(lo)? != Stage::Third || stage(hi)? != Stage::Second {
        return Ok((false, "no third/second transition on [0, 10]".into()));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if stage(mid)? == Stage::Third {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let jump = (r_opt(hi)? - r_opt(lo)?).abs();
    let h = 1e-4;
    let left = (r_opt(lo)? - r_opt(lo - h)?) / h;
    let right = (r_opt(hi + h)? - r_opt(hi)?) / h;
    let gap = (left - right).abs();
    let ok = jump < 1e-6 && gap > 0.01;
    Ok((ok, format!("transition at s = {lo:.6}, jump {jump:.1e}, slopes {left:.4} | {right:.4}")))
}

fn memory_consistency() -> Outcome {
    let (eta, big_n, n_env, s) = (0.5, 20.0, 1.0, 0.5);
    let third = solve_asymptotic(eta, big_n, n_env, s, ApproxOrder::Exact, 256)?;
    let closed = capacity_third_closed_form(eta, big_n, n_env, mean_env_photons_memory(n_env, s));
    let same = third.distribution == Distribution::AllThird && (third.capacity - closed).abs() <= 1e-12;
    let asym = solve_asymptotic(0.5, 1.0, 1.0, 1.0, ApproxOrder::Exact, 256)?.capacity;
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let params = ChannelParams::new(0.5, 1.0, n)?;
        let env = EnvironmentSpectrum::nearest_neighbor(1.0, 1.0, n)?;
        errs.push((solve_dynamic(&params, &env, ApproxOrder::Exact)?.capacity_per_use - asym).abs());
    }
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let ok = same && decreasing && errs[2] < 5e-3;
    Ok((ok, format!("all-third gap {:.1e}, finite-n errors [{}]", (third.capacity - closed).abs(), sci(&errs))))
}

fn water_filling() -> Outcome {
    let grid: Vec<f64> = (0..=200).map(|k| PI * k as f64 / 200.0).collect();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut worst_flat = 0.0f64;
    let mut violations = 0;
    for big_n in [0.0, 0.05, 0.67, 1.0, 2.0] {
        let sol = solve_asymptotic(0.5, big_n, 1.0, 1.0, ApproxOrder::Exact, 256)?;
        let mut nu_bar = Vec::with_capacity(grid.len());
        let mut nu = Vec::with_capacity(grid.len());
        for &xi in &grid {
            let d = sol.densities(xi)?;
            if d.c_q > 0.0 && d.c_p > 0.0 {
                worst_flat = worst_flat.max((d.nu_bar - sol.x).abs());
            }
            nu_bar.push(d.nu_bar);
            nu.push(d.nu);
        }
        if let Some((pb, pn)) = &prev {
            for k in 0..grid.len() {
                if nu_bar[k] < pb[k] - 1e-12 || nu[k] > pn[k] + 1e-12 {
                    violations += 1;
                }
            }
        }
        prev = Some((nu_bar, nu));
    }
    let ok = worst_flat < 1e-8 && violations == 0;
    Ok((ok, format!("max |nu_bar - x| on the modulated region {worst_flat:.1e}, {violations} monotonicity violations")))
}

fn symmetry_breaking() -> Outcome {
    let (eta, big_n) = (0.9, 1.0);
    let mut best = f64::NEG_INFINITY;
    let mut at = 0.0;
    for k in 1..=20 {
        let m_env = 0.25 * k as f64;
        let memory = max_over_env(eta, big_n, m_env, EnvKind::NearestNeighbor, ApproxOrder::Exact, 128)?;
        let memoryless = max_over_env(eta, big_n, m_env, EnvKind::Memoryless, ApproxOrder::Exact, 128)?;
        let gain = memory.capacity - memoryless.capacity;
        if gain > best {
            best = gain;
            at = m_env;
        }
        if gain > 1e-3 {
            return Ok((true, format!("memory exceeds memoryless by {gain:.4} bits at M_env = {m_env}")));
        }
    }
    Ok((false, format!("largest gain {best:.2e} bits at M_env = {at}")))
}
