//! Finite-`n` maximization of the Holevo-chi through the KKT conditions.
//!
//! Every mode is classified by how many of its classical-modulation eigenvalues
//! vanish. Modes that are modulated in both quadratures share the averaged-output
//! level `x`; the energy constraint fixes `x`.
//!
//! At [`ApproxOrder::Exact`] a second-stage mode is tied to the others through the
//! common multiplier, `P(nu_bar) / a_{u*} = g'(x)`. At the approximate orders
//! `P` is constant in the chain and this reduces to `a_{u*} = x`.

use serde::{Deserialize, Serialize};

use crate::channel::{
    energy_check, holevo_chi, mean_env_photons, ChannelParams, EnvironmentSpectrum, Quadrature,
    QuadratureSpectrum,
};
use crate::entropy::{g_photons, nu_dg, slope_unchecked, ApproxOrder};
use crate::error::{Error, Result};
use crate::roots::{bisect, expand_upward, try_bisect};

/// Relative tolerance on the chain variable `x`.
const LEVEL_REL_TOL: f64 = 1e-15;
/// Relative tolerance on per-mode roots.
const MODE_REL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    First,
    Second,
    Third,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::First => "first",
            Stage::Second => "second",
            Stage::Third => "third",
        }
    }
}

/// Stage of every mode, with the unmodulated quadrature of second-stage modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAssignment {
    pub stages: Vec<Stage>,
    pub zero_side: Vec<Option<Quadrature>>,
}

impl StageAssignment {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// `(n1, n2, n3)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |s| self.stages.iter().filter(|t| **t == s).count();
        (count(Stage::First), count(Stage::Second), count(Stage::Third))
    }

    fn from_states(states: &[ModeState]) -> Self {
        StageAssignment {
            stages: states.iter().map(|m| m.stage).collect(),
            zero_side: states.iter().map(|m| m.zero_side).collect(),
        }
    }
}

/// Input and classical eigenvalues of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub stage: Stage,
    pub zero_side: Option<Quadrature>,
    pub i_q: f64,
    pub i_p: f64,
    pub c_q: f64,
    pub c_p: f64,
}

impl ModeState {
    pub fn first() -> Self {
        ModeState {
            stage: Stage::First,
            zero_side: None,
            i_q: 0.5,
            i_p: 0.5,
            c_q: 0.0,
            c_p: 0.0,
        }
    }

    /// `i_q + i_p + c_q + c_p`.
    pub fn energy(&self) -> f64 {
        self.i_q + self.i_p + self.c_q + self.c_p
    }

    /// Labels the stage from the signs of `c` (zero counts as unmodulated).
    fn classified(mut self) -> Self {
        match (self.c_q > 0.0, self.c_p > 0.0) {
            (true, true) => {
                self.stage = Stage::Third;
                self.zero_side = None;
            }
            (false, false) => {
                self.stage = Stage::First;
                self.zero_side = None;
            }
            (true, false) => {
                self.stage = Stage::Second;
                self.zero_side = Some(Quadrature::P);
            }
            (false, true) => {
                self.stage = Stage::Second;
                self.zero_side = Some(Quadrature::Q);
            }
        }
        self
    }

    fn with_side(u: Quadrature, i_u: f64, c_u: f64, i_us: f64, c_us: f64) -> Self {
        let (i_q, i_p, c_q, c_p) = match u {
            Quadrature::Q => (i_u, i_us, c_u, c_us),
            Quadrature::P => (i_us, i_u, c_us, c_u),
        };
        ModeState {
            stage: Stage::Second,
            zero_side: Some(u),
            i_q,
            i_p,
            c_q,
            c_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktSolution {
    pub input: QuadratureSpectrum,
    pub classical: QuadratureSpectrum,
    pub stages: StageAssignment,
    /// Common averaged-output level of the modulated quadratures.
    pub x: f64,
    /// Multiplier of the energy constraint (bits per unit of `Tr V / 2`).
    pub lagrange_lambda: f64,
    /// `chi_n / n` in bits.
    pub capacity_per_use: f64,
    pub order: ApproxOrder,
}

impl KktSolution {
    pub fn n_modes(&self) -> usize {
        self.input.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Static,
    #[default]
    Dynamic,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Algorithm::Static),
            "dynamic" => Ok(Algorithm::Dynamic),
            other => Err(format!("unknown algorithm '{other}' (expected static or dynamic)")),
        }
    }
}

fn side(e_q: f64, e_p: f64, u: Quadrature) -> (f64, f64) {
    match u {
        Quadrature::Q => (e_q, e_p),
        Quadrature::P => (e_p, e_q),
    }
}

/// Third-stage level `x = eta (N + 1/2) + (1 - eta) Tr V_env / 2n`.
pub fn third_stage_level(params: &ChannelParams, env: &EnvironmentSpectrum) -> f64 {
    params.eta * (params.n_photons + 0.5) + (1.0 - params.eta) * (mean_env_photons(env) + 0.5)
}

/// Formal third-stage mode at level `x`: input matched to the environment
/// squeezing, `a_q = a_p = x`. The `c` may be negative.
pub fn third_stage_mode(x: f64, e_q: f64, e_p: f64, eta: f64) -> ModeState {
    let i_q = 0.5 * (e_q / e_p).sqrt();
    let i_p = 0.25 / i_q;
    ModeState {
        stage: Stage::Third,
        zero_side: None,
        i_q,
        i_p,
        c_q: (x - (1.0 - eta) * e_q) / eta - i_q,
        c_p: (x - (1.0 - eta) * e_p) / eta - i_p,
    }
}

/// Closed-form solution with every mode in the third stage. No sign check on `c`.
pub fn third_stage_closed_form(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
) -> Result<(QuadratureSpectrum, QuadratureSpectrum)> {
    check_env(params, env)?;
    let x = third_stage_level(params, env);
    let modes: Vec<ModeState> = (0..env.len())
        .map(|k| third_stage_mode(x, env.spectrum.q[k], env.spectrum.p[k], params.eta))
        .collect();
    Ok(raw_spectra(&modes))
}

/// Capacity per use when every mode is in the third stage.
pub fn capacity_all_third(params: &ChannelParams, env: &EnvironmentSpectrum) -> Result<f64> {
    let (_, classical) = third_stage_closed_form(params, env)?;
    for k in 0..classical.len() {
        let c = classical.q[k].min(classical.p[k]);
        if c < 0.0 {
            return Err(Error::StageViolation {
                mode: k,
                reason: format!("third-stage classical eigenvalue {c} < 0"),
            });
        }
    }
    Ok(capacity_third_formula(params, env))
}

pub(crate) fn capacity_third_formula(params: &ChannelParams, env: &EnvironmentSpectrum) -> f64 {
    let eta = params.eta;
    let m_env = mean_env_photons(env).max(0.0);
    let head = g_photons(eta * params.n_photons + (1.0 - eta) * m_env).unwrap_or(0.0);
    let noise: f64 = env
        .spectrum
        .q
        .iter()
        .zip(&env.spectrum.p)
        .map(|(q, p)| g_photons(((1.0 - eta) * ((q * p).sqrt() - 0.5)).max(0.0)).unwrap_or(0.0))
        .sum();
    head - noise / env.len() as f64
}

/// LHS - RHS of the second-stage stationarity equation for a mode whose `u`
/// quadrature is unmodulated, with `a_{u*} = x`.
pub fn second_stage_residual(
    i_u: f64,
    x: f64,
    e_q: f64,
    e_p: f64,
    eta: f64,
    zero_side: Quadrature,
    order: ApproxOrder,
) -> Result<f64> {
    if !(i_u > 0.0) {
        return Err(Error::Domain {
            what: "second-stage input eigenvalue",
            value: i_u,
        });
    }
    let (e_u, e_us) = side(e_q, e_p, zero_side);
    let o_u = eta * i_u + (1.0 - eta) * e_u;
    let i_us = 0.25 / i_u;
    let o_us = eta * i_us + (1.0 - eta) * e_us;
    let nu = (o_u * o_us).sqrt();
    let nu_bar = (o_u * x).sqrt();
    if !(nu > 0.5) {
        return Err(Error::Domain { what: "output symplectic eigenvalue", value: nu });
    }
    if !(nu_bar > 0.5) {
        return Err(Error::Domain { what: "averaged-output symplectic eigenvalue", value: nu_bar });
    }
    Ok((1.0 / o_u - 1.0 / x) * nu_dg(nu_bar, order)
        - (1.0 / o_u - i_us / (i_u * o_us)) * nu_dg(nu, order))
}

/// Formal second-stage root at level `x`: the zero-side input eigenvalue `i_u`
/// and the modulated-side averaged output `a_{u*}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondStageRoot {
    pub i_u: f64,
    pub a_conj: f64,
}

impl SecondStageRoot {
    /// `c_{u*} = (a_{u*} - (1 - eta) e_{u*}) / eta - 1/(4 i_u)`.
    pub fn c_conj(&self, eta: f64, e_us: f64) -> f64 {
        (self.a_conj - (1.0 - eta) * e_us) / eta - 0.25 / self.i_u
    }

    fn state(&self, u: Quadrature, eta: f64, e_us: f64) -> ModeState {
        ModeState::with_side(u, self.i_u, 0.0, 0.25 / self.i_u, self.c_conj(eta, e_us))
    }
}

/// Positive root of `4 (1 - eta) e_{u*} i^2 + eta i - x = 0`.
pub fn second_stage_zeroth(x: f64, e_us: f64, eta: f64) -> f64 {
    2.0 * x / ((eta * eta + 16.0 * (1.0 - eta) * x * e_us).sqrt() + eta)
}

/// Zeroth-order root plus the first-order correction, every ingredient of the
/// correction taken at zeroth order.
pub fn second_stage_first(x: f64, e_u: f64, e_us: f64, eta: f64) -> f64 {
    let i0 = second_stage_zeroth(x, e_us, eta);
    let o_u = eta * i0 + (1.0 - eta) * e_u;
    let o_us = eta / (4.0 * i0) + (1.0 - eta) * e_us;
    let nu2 = o_u * o_us;
    let num = (x - o_u) * (x - o_us) * o_u * i0;
    let den = (2.0 * (o_u * o_u + x * x - (o_u + o_us) * x) + (12.0 * o_u * o_u + 1.0) * nu2)
        * i0
        * eta
        - 2.0 * (1.0 + 12.0 * nu2) * o_u * o_u * x;
    i0 + num / den
}

/// Second-stage root at [`ApproxOrder::Exact`] for the multiplier `k = g'(x)`.
///
/// Parametrized by `nu_bar`: `o_u = k nu_bar / g'(nu_bar)` and `a_{u*} = nu_bar^2 / o_u`
/// satisfy the chain identically, leaving a scalar equation in `nu_bar`.
fn second_stage_exact(k: f64, e_u: f64, e_us: f64, eta: f64) -> Option<SecondStageRoot> {
    let parts = |nb: f64| {
        let o_u = k * nb / slope_unchecked(nb);
        let i = (o_u - (1.0 - eta) * e_u) / eta;
        (o_u, i)
    };
    let resid = |nb: f64| {
        let (o_u, i) = parts(nb);
        if !(i > 0.0) {
            return 1.0;
        }
        let i_us = 0.25 / i;
        let o_us = eta * i_us + (1.0 - eta) * e_us;
        let coeff = 1.0 / o_u - i_us / (i * o_us);
        let head = k * (nb * nb / (o_u * o_u) - 1.0);
        if coeff == 0.0 {
            return head;
        }
        head - coeff * nu_dg((o_u * o_us).sqrt(), ApproxOrder::Exact)
    };
    let lo = 0.5 * (1.0 + 1e-15);
    let hi = expand_upward(1.0, |nb| resid(nb) < 0.0).ok()?;
    let nb = bisect(resid, lo, hi, MODE_REL_TOL, 0.0).ok()?;
    let (o_u, i) = parts(nb);
    if !(i > 0.0) || !i.is_finite() {
        return None;
    }
    Some(SecondStageRoot { i_u: i, a_conj: nb * nb / o_u })
}

/// Formal second-stage root (the sign of `c_{u*}` is not checked).
pub fn second_stage_formal(
    x: f64,
    e_q: f64,
    e_p: f64,
    eta: f64,
    zero_side: Quadrature,
    order: ApproxOrder,
) -> Option<SecondStageRoot> {
    let (e_u, e_us) = side(e_q, e_p, zero_side);
    let root = match order {
        ApproxOrder::Exact => {
            if !(x > 0.5) {
                return None;
            }
            return second_stage_exact(slope_unchecked(x), e_u, e_us, eta);
        }
        ApproxOrder::Zeroth => second_stage_zeroth(x, e_us, eta),
        ApproxOrder::First => second_stage_first(x, e_u, e_us, eta),
    };
    if !(x > 0.0) || !(root > 0.0) || !root.is_finite() {
        return None;
    }
    Some(SecondStageRoot { i_u: root, a_conj: x })
}

/// Admissible second-stage `i_u` at level `x`, or `None` when `c_{u*}` would not be positive.
pub fn solve_second_stage_mode(
    x: f64,
    e_q: f64,
    e_p: f64,
    eta: f64,
    zero_side: Quadrature,
    order: ApproxOrder,
) -> Option<f64> {
    let (_, e_us) = side(e_q, e_p, zero_side);
    if x <= (1.0 - eta) * e_us {
        return None;
    }
    let root = second_stage_formal(x, e_q, e_p, eta, zero_side, order)?;
    (root.c_conj(eta, e_us) > 0.0).then_some(root.i_u)
}

/// Optimal state of a single mode at level `x`: third stage if both `c > 0`,
/// otherwise second stage on the non-positive side if admissible, otherwise first.
pub fn mode_at_level(x: f64, e_q: f64, e_p: f64, eta: f64, order: ApproxOrder) -> ModeState {
    let third = third_stage_mode(x, e_q, e_p, eta);
    let u = match (third.c_q > 0.0, third.c_p > 0.0) {
        (true, true) => return third,
        (false, false) => return ModeState::first(),
        (true, false) => Quadrature::P,
        (false, true) => Quadrature::Q,
    };
    let (_, e_us) = side(e_q, e_p, u);
    if x <= (1.0 - eta) * e_us {
        return ModeState::first();
    }
    match second_stage_formal(x, e_q, e_p, eta, u, order) {
        Some(root) if root.c_conj(eta, e_us) > 0.0 => root.state(u, eta, e_us),
        _ => ModeState::first(),
    }
}

/// Level at which a mode whose `u` quadrature stays unmodulated leaves the first stage.
pub fn first_second_boundary(e_u: f64, e_us: f64, eta: f64, order: ApproxOrder) -> f64 {
    let o_u = 0.5 * eta + (1.0 - eta) * e_u;
    let o_us = 0.5 * eta + (1.0 - eta) * e_us;
    match order {
        ApproxOrder::Exact => {
            let nu = (o_u * o_us).sqrt();
            if nu <= 0.5 {
                return 0.5;
            }
            crate::entropy::nu_from_slope(nu_dg(nu, ApproxOrder::Exact) / o_us)
        }
        _ => o_us,
    }
}

/// Formal state of a mode with a fixed stage at level `x`.
fn formal_state(
    k: usize,
    x: f64,
    e_q: f64,
    e_p: f64,
    eta: f64,
    stage: Stage,
    zero_side: Option<Quadrature>,
    order: ApproxOrder,
) -> Result<ModeState> {
    match stage {
        Stage::First => Ok(ModeState::first()),
        Stage::Third => Ok(third_stage_mode(x, e_q, e_p, eta)),
        Stage::Second => {
            let u = zero_side.ok_or_else(|| Error::StageViolation {
                mode: k,
                reason: "second-stage mode without a zero side".into(),
            })?;
            let (_, e_us) = side(e_q, e_p, u);
            let root = second_stage_formal(x, e_q, e_p, eta, u, order).ok_or_else(|| {
                Error::StageViolation {
                    mode: k,
                    reason: format!("no second-stage root at x = {x}"),
                }
            })?;
            Ok(root.state(u, eta, e_us))
        }
    }
}

/// Energy balance at level `x` for a fixed stage assignment:
/// `eta [n (2N + 1) - sum_k E_k(x)]`, decreasing in `x`.
///
/// With `a_{u*} = x` this is `eta [2n(N + 1/2) - n1 - sum'' i_u] + (1 - eta) Tr'' V_env - (2 n3 + n2) x`.
pub fn x_residual(
    x: f64,
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    stages: &StageAssignment,
    order: ApproxOrder,
) -> Result<f64> {
    check_env(params, env)?;
    if stages.len() != env.len() {
        return Err(Error::LengthMismatch { expected: env.len(), got: stages.len() });
    }
    let mut energy = 0.0;
    for k in 0..env.len() {
        let m = formal_state(
            k,
            x,
            env.spectrum.q[k],
            env.spectrum.p[k],
            params.eta,
            stages.stages[k],
            stages.zero_side[k],
            order,
        )?;
        energy += m.energy();
    }
    Ok(params.eta * (params.energy_budget() - energy))
}

fn check_env(params: &ChannelParams, env: &EnvironmentSpectrum) -> Result<()> {
    if env.len() != params.n_modes {
        return Err(Error::LengthMismatch { expected: params.n_modes, got: env.len() });
    }
    Ok(())
}

fn raw_spectra(modes: &[ModeState]) -> (QuadratureSpectrum, QuadratureSpectrum) {
    let pick = |f: fn(&ModeState) -> f64| modes.iter().map(f).collect::<Vec<f64>>();
    (
        QuadratureSpectrum { q: pick(|m| m.i_q), p: pick(|m| m.i_p) },
        QuadratureSpectrum { q: pick(|m| m.c_q), p: pick(|m| m.c_p) },
    )
}

fn spectra(modes: &[ModeState]) -> (QuadratureSpectrum, QuadratureSpectrum) {
    let input = QuadratureSpectrum {
        q: modes.iter().map(|m| m.i_q).collect(),
        p: modes.iter().map(|m| m.i_p).collect(),
    };
    let classical = QuadratureSpectrum {
        q: modes.iter().map(|m| m.c_q.max(0.0)).collect(),
        p: modes.iter().map(|m| m.c_p.max(0.0)).collect(),
    };
    (input, classical)
}

fn lambda_at(x: f64, eta: f64, order: ApproxOrder) -> f64 {
    0.5 * eta * nu_dg(x, order) / x
}

fn finish(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    modes: &[ModeState],
    x: f64,
    order: ApproxOrder,
) -> Result<KktSolution> {
    let (input, classical) = spectra(modes);
    if !energy_check(&input, &classical, params.n_photons) {
        let per_mode = (input.trace() + classical.trace()) / (2.0 * input.len() as f64);
        return Err(Error::NoConvergence {
            what: "energy constraint",
            detail: format!("mean energy {per_mode} vs N + 1/2 = {}", params.n_photons + 0.5),
        });
    }
    let chi = holevo_chi(&input, &classical, env, params.eta)?;
    Ok(KktSolution {
        stages: StageAssignment::from_states(modes),
        capacity_per_use: chi / params.n_modes as f64,
        lagrange_lambda: lambda_at(x, params.eta, order),
        x,
        input,
        classical,
        order,
    })
}

fn degenerate(params: &ChannelParams, env: &EnvironmentSpectrum, order: ApproxOrder) -> Option<KktSolution> {
    let n = params.n_modes;
    let big_n = params.n_photons;
    let (x, lambda, capacity) = if params.eta == 1.0 {
        let x = big_n + 0.5;
        (x, lambda_at(x, 1.0, ApproxOrder::Exact), g_photons(big_n).ok()?)
    } else if params.eta == 0.0 {
        (mean_env_photons(env) + 0.5, 0.0, 0.0)
    } else {
        return None;
    };
    let stage = if big_n > 0.0 { Stage::Third } else { Stage::First };
    Some(KktSolution {
        input: QuadratureSpectrum::vacuum(n),
        classical: QuadratureSpectrum::uniform(n, big_n, big_n),
        stages: StageAssignment { stages: vec![stage; n], zero_side: vec![None; n] },
        x,
        lagrange_lambda: lambda,
        capacity_per_use: capacity,
        order,
    })
}

/// Solution when the closed-form third stage is admissible in every mode.
fn all_third(params: &ChannelParams, env: &EnvironmentSpectrum, order: ApproxOrder) -> Result<Option<KktSolution>> {
    let x = third_stage_level(params, env);
    let modes: Vec<ModeState> = (0..env.len())
        .map(|k| third_stage_mode(x, env.spectrum.q[k], env.spectrum.p[k], params.eta).classified())
        .collect();
    if modes.iter().any(|m| m.c_q < 0.0 || m.c_p < 0.0) {
        return Ok(None);
    }
    let (input, classical) = spectra(&modes);
    Ok(Some(KktSolution {
        stages: StageAssignment::from_states(&modes),
        capacity_per_use: capacity_all_third(params, env)?,
        lagrange_lambda: lambda_at(x, params.eta, order),
        x,
        input,
        classical,
        order,
    }))
}

fn level_floor(order: ApproxOrder) -> f64 {
    match order {
        ApproxOrder::Exact => 0.5 * (1.0 + 1e-12),
        _ => 1e-12,
    }
}

/// Dynamic algorithm: every trial level `x` induces its own stage distribution.
pub fn solve_dynamic(params: &ChannelParams, env: &EnvironmentSpectrum, order: ApproxOrder) -> Result<KktSolution> {
    check_env(params, env)?;
    if let Some(sol) = degenerate(params, env, order) {
        return Ok(sol);
    }
    if let Some(sol) = all_third(params, env, order)? {
        return Ok(sol);
    }
    let eta = params.eta;
    let target = params.energy_budget();
    let modes_at = |x: f64| -> Vec<ModeState> {
        (0..env.len())
            .map(|k| mode_at_level(x, env.spectrum.q[k], env.spectrum.p[k], eta, order))
            .collect()
    };
    let balance = |x: f64| target - modes_at(x).iter().map(ModeState::energy).sum::<f64>();
    let x0 = third_stage_level(params, env);
    let lo = level_floor(order);
    let hi = expand_upward(x0.max(1.0), |x| balance(x) <= 0.0)?;
    let x = bisect(balance, lo, hi, LEVEL_REL_TOL, 0.0).map_err(|e| Error::NoConvergence {
        what: "dynamic algorithm",
        detail: format!("{e}; bracket [{lo}, {hi}], x0 = {x0}"),
    })?;
    finish(params, env, &modes_at(x), x, order)
}

/// Static algorithm: start from the signs of the closed-form third stage and
/// demote modes until every classical eigenvalue is non-negative.
pub fn solve_static(params: &ChannelParams, env: &EnvironmentSpectrum, order: ApproxOrder) -> Result<KktSolution> {
    check_env(params, env)?;
    if let Some(sol) = degenerate(params, env, order) {
        return Ok(sol);
    }
    if let Some(sol) = all_third(params, env, order)? {
        return Ok(sol);
    }
    let n = env.len();
    let eta = params.eta;
    let x0 = third_stage_level(params, env);
    let initial: Vec<ModeState> = (0..n)
        .map(|k| third_stage_mode(x0, env.spectrum.q[k], env.spectrum.p[k], eta).classified())
        .collect();
    let mut stages = StageAssignment::from_states(&initial);
    let lo = level_floor(order);
    for _ in 0..(4 * n).max(4) {
        let x = match solve_fixed(params, env, &stages, order, lo, x0) {
            Ok(x) => x,
            Err(Error::StageViolation { mode, .. }) => {
                stages.stages[mode] = Stage::First;
                stages.zero_side[mode] = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut modes = Vec::with_capacity(n);
        let mut changed = false;
        for k in 0..n {
            let (e_q, e_p) = (env.spectrum.q[k], env.spectrum.p[k]);
            let m = formal_state(k, x, e_q, e_p, eta, stages.stages[k], stages.zero_side[k], order)?;
            let demoted = match m.stage {
                Stage::First => m,
                Stage::Third => {
                    let c = m.classified();
                    match c.stage {
                        Stage::Third => c,
                        Stage::First => ModeState::first(),
                        Stage::Second => {
                            // re-solve at the same level with the zero side fixed
                            let u = c.zero_side.unwrap();
                            formal_state(k, x, e_q, e_p, eta, Stage::Second, Some(u), order)
                                .unwrap_or_else(|_| ModeState::first())
                        }
                    }
                }
                Stage::Second => {
                    if m.c_q.max(m.c_p) > 0.0 {
                        m
                    } else {
                        ModeState::first()
                    }
                }
            };
            if demoted.stage != m.stage {
                changed = true;
            }
            modes.push(demoted);
        }
        if !changed {
            return finish(params, env, &modes, x, order);
        }
        stages = StageAssignment::from_states(&modes);
    }
    Err(Error::NoConvergence {
        what: "static algorithm",
        detail: format!("stage distribution still changing after {} iterations", (4 * n).max(4)),
    })
}

fn solve_fixed(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    stages: &StageAssignment,
    order: ApproxOrder,
    lo: f64,
    x0: f64,
) -> Result<f64> {
    let f = |x: f64| x_residual(x, params, env, stages, order);
    let mut hi = x0.max(1.0);
    let mut expansions = 0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > crate::roots::MAX_EXPANSIONS {
            return Err(Error::NoConvergence {
                what: "static algorithm",
                detail: format!("energy balance still positive at x = {hi}"),
            });
        }
    }
    // walk down from `hi` so that the lower end stays where the formal roots exist
    let mut lo_b = hi;
    loop {
        lo_b = (0.5 * lo_b).max(lo);
        if f(lo_b)? > 0.0 {
            break;
        }
        if lo_b == lo {
            return Err(Error::NoConvergence {
                what: "static algorithm",
                detail: format!("energy balance not positive at the level floor {lo}"),
            });
        }
    }
    try_bisect(f, lo_b, (2.0 * lo_b).min(hi), LEVEL_REL_TOL, 0.0)
}

/// Runs the chosen algorithm.
pub fn solve(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    order: ApproxOrder,
    algorithm: Algorithm,
) -> Result<KktSolution> {
    match algorithm {
        Algorithm::Static => solve_static(params, env, order),
        Algorithm::Dynamic => solve_dynamic(params, env, order),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem(n_env: f64, s: f64, n: usize) -> EnvironmentSpectrum {
        EnvironmentSpectrum::memoryless(n_env, s, n).unwrap()
    }

    #[test]
    fn symmetric_third_stage() {
        let p = ChannelParams::new(0.4, 1.5, 3).unwrap();
        let (i, c) = third_stage_closed_form(&p, &mem(0.7, 0.0, 3)).unwrap();
        for k in 0..3 {
            assert!((i.q[k] - 0.5).abs() < 1e-15 && (i.p[k] - 0.5).abs() < 1e-15);
            assert!((c.q[k] - 1.5).abs() < 1e-12 && (c.p[k] - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn memoryless_third_stage_matches_env_squeezing() {
        let s = 0.8;
        let p = ChannelParams::new(0.5, 5.0, 2).unwrap();
        let (i, _) = third_stage_closed_form(&p, &mem(1.0, s, 2)).unwrap();
        assert!((i.q[0] - 0.5 * s.exp()).abs() < 1e-12);
        assert!((i.p[0] - 0.5 * (-s).exp()).abs() < 1e-12);
    }

    #[test]
    fn all_third_symmetric_value() {
        let p = ChannelParams::new(0.5, 1.0, 1).unwrap();
        let c = capacity_all_third(&p, &mem(1.0, 0.0, 1)).unwrap();
        assert!((c - (2.0 - 1.377444)).abs() < 1e-6, "{c}");
    }

    #[test]
    fn pure_env_capacity() {
        let p = ChannelParams::new(0.3, 4.0, 1).unwrap();
        let env = mem(0.0, 0.0, 1);
        let c = capacity_all_third(&p, &env).unwrap();
        assert!((c - g_photons(0.3 * 4.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn all_third_rejects_negative_c() {
        let p = ChannelParams::new(0.5, 0.01, 1).unwrap();
        let err = capacity_all_third(&p, &mem(1.0, 2.0, 1)).unwrap_err();
        assert!(matches!(err, Error::StageViolation { mode: 0, .. }));
    }

    #[test]
    fn zeroth_root_zeroes_residual() {
        let (eta, x, e_q, e_p) = (0.5, 2.0, 1.5, 1.5);
        let i0 = second_stage_zeroth(x, e_p, eta);
        let alt = ((eta * eta + 16.0 * (1.0 - eta) * x * e_p).sqrt() - eta) / (8.0 * (1.0 - eta) * e_p);
        assert!((i0 - alt).abs() < 1e-14);
        assert!((4.0 * (1.0 - eta) * e_p * i0 * i0 + eta * i0 - x).abs() < 1e-12);
        let r = second_stage_residual(i0, x, e_q, e_p, eta, Quadrature::Q, ApproxOrder::Zeroth).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }

    #[test]
    fn residual_changes_sign() {
        let (eta, x, e) = (0.5, 2.0, 1.5);
        let f = |i| second_stage_residual(i, x, e, e, eta, Quadrature::Q, ApproxOrder::Exact).unwrap();
        let lo = eta / (4.0 * (x - (1.0 - eta) * e));
        let hi = 3.0;
        assert!(f(lo * 1.001).signum() != f(hi).signum());
    }

    #[test]
    fn no_root_below_env_floor() {
        for order in ApproxOrder::ALL {
            assert!(solve_second_stage_mode(0.6, 1.5, 1.5, 0.5, Quadrature::Q, order).is_none());
        }
    }

    #[test]
    fn exact_root_satisfies_chain() {
        let (eta, x, e_q, e_p) = (0.5, 1.6, 4.0, 0.3);
        let root = second_stage_formal(x, e_q, e_p, eta, Quadrature::Q, ApproxOrder::Exact).unwrap();
        let o_u = eta * root.i_u + (1.0 - eta) * e_q;
        let nb = (o_u * root.a_conj).sqrt();
        let lhs = nu_dg(nb, ApproxOrder::Exact) / root.a_conj;
        assert!((lhs - slope_unchecked(x)).abs() < 1e-10);
    }

    #[test]
    fn degenerate_eta() {
        let env = mem(1.0, 1.0, 2);
        let sol = solve_dynamic(&ChannelParams::new(1.0, 2.0, 2).unwrap(), &env, ApproxOrder::Exact).unwrap();
        assert!((sol.capacity_per_use - g_photons(2.0).unwrap()).abs() < 1e-14);
        let sol = solve_dynamic(&ChannelParams::new(0.0, 2.0, 2).unwrap(), &env, ApproxOrder::Exact).unwrap();
        assert_eq!(sol.capacity_per_use, 0.0);
    }

    #[test]
    fn zero_energy_is_all_first() {
        let p = ChannelParams::new(0.5, 0.0, 3).unwrap();
        let sol = solve_dynamic(&p, &mem(1.0, 1.0, 3), ApproxOrder::Exact).unwrap();
        assert_eq!(sol.stages.counts(), (3, 0, 0));
        assert!(sol.capacity_per_use.abs() < 1e-12);
    }

    #[test]
    fn large_n_is_all_third() {
        let p = ChannelParams::new(0.5, 50.0, 4).unwrap();
        let env = EnvironmentSpectrum::nearest_neighbor(1.0, 1.0, 4).unwrap();
        let sol = solve_dynamic(&p, &env, ApproxOrder::Exact).unwrap();
        assert_eq!(sol.stages.counts(), (0, 0, 4));
        assert!((sol.capacity_per_use - capacity_all_third(&p, &env).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn second_stage_single_mode() {
        let p = ChannelParams::new(0.5, 1.0, 1).unwrap();
        let env = mem(1.0, 2.0, 1);
        for order in ApproxOrder::ALL {
            let sol = solve_dynamic(&p, &env, order).unwrap();
            assert_eq!(sol.stages.stages[0], Stage::Second, "{order}");
            let st = solve_static(&p, &env, order).unwrap();
            assert!((st.capacity_per_use - sol.capacity_per_use).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_first_and_second() {
        let p = ChannelParams::new(0.5, 0.05, 6).unwrap();
        let env = EnvironmentSpectrum::nearest_neighbor(1.0, 2.0, 6).unwrap();
        let dy = solve_dynamic(&p, &env, ApproxOrder::Exact).unwrap();
        let st = solve_static(&p, &env, ApproxOrder::Exact).unwrap();
        let (n1, n2, _) = dy.stages.counts();
        assert!(n1 > 0 && n2 > 0, "{:?}", dy.stages);
        assert_eq!(dy.stages, st.stages);
        assert!((dy.capacity_per_use - st.capacity_per_use).abs() < 1e-10);
    }

    #[test]
    fn all_third_residual_vanishes_at_level() {
        let p = ChannelParams::new(0.5, 3.0, 3).unwrap();
        let env = EnvironmentSpectrum::nearest_neighbor(1.0, 0.5, 3).unwrap();
        let stages = StageAssignment { stages: vec![Stage::Third; 3], zero_side: vec![None; 3] };
        let x = third_stage_level(&p, &env);
        let r = x_residual(x, &p, &env, &stages, ApproxOrder::Exact).unwrap();
        assert!(r.abs() < 1e-12);
    }
}
