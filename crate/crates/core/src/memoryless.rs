//! One channel use with a squeezed thermal environment (`Omega = I`).
//!
//! `s >= 0` squeezes the environment in `p`, so `e_q = (N_env + 1/2) e^s` is the
//! noisy quadrature. Negative `s` swaps the roles of `q` and `p`.

use serde::{Deserialize, Serialize};

use crate::channel::{holevo_chi, mean_env_photons_memoryless, EnvironmentSpectrum, Quadrature, QuadratureSpectrum};
use crate::entropy::{g_photons, nu_dg, ApproxOrder};
use crate::error::{ensure_finite, Error, Result};
use crate::kkt::{third_stage_mode, Stage};
use crate::roots::{bisect, golden_max};

/// Default upper end of the environment squeezing search.
pub const DEFAULT_S_MAX: f64 = 30.0;
/// Points of the coarse grid in [`optimal_env_squeezing`].
pub const S_GRID_POINTS: usize = 64;
/// Tolerance of the golden-section refinement of `s*`.
pub const S_STAR_TOL: f64 = 1e-6;
/// Tolerance of [`critical_transmissivity`].
pub const ETA_STAR_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneUseSolution {
    /// Bits per use.
    pub capacity: f64,
    pub stage: Stage,
    pub i_q: f64,
    pub i_p: f64,
    pub c_q: f64,
    pub c_p: f64,
    /// Optimal input squeezing, `ln(2 i_q)`.
    pub r_opt: f64,
    pub order: ApproxOrder,
}

/// `g[eta N + (1 - eta) M_env] - g[(1 - eta) N_env]`: capacity when every mode is in
/// the third stage and the environment has thermal photon number `N_env` per mode.
pub fn capacity_third_closed_form(eta: f64, n_photons: f64, n_env: f64, m_env: f64) -> f64 {
    let head = g_photons((eta * n_photons + (1.0 - eta) * m_env).max(0.0)).unwrap_or(0.0);
    let noise = g_photons(((1.0 - eta) * n_env).max(0.0)).unwrap_or(0.0);
    head - noise
}

fn env_pair(n_env: f64, s: f64) -> (f64, f64) {
    ((n_env + 0.5) * s.exp(), (n_env + 0.5) * (-s).exp())
}

fn validate(eta: f64, n_photons: f64, n_env: f64, s: f64) -> Result<()> {
    ensure_finite("eta", eta)?;
    ensure_finite("N", n_photons)?;
    ensure_finite("N_env", n_env)?;
    ensure_finite("s", s)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter { name: "eta", value: eta, reason: "must lie in (0, 1)" });
    }
    if n_photons < 0.0 {
        return Err(Error::InvalidParameter { name: "N", value: n_photons, reason: "must be >= 0" });
    }
    if n_env < 0.0 {
        return Err(Error::InvalidParameter { name: "N_env", value: n_env, reason: "must be >= 0" });
    }
    Ok(())
}

/// `phi = eta / ((1 - eta) e_{u*})`.
fn phi(eta: f64, e_us: f64) -> f64 {
    eta / ((1.0 - eta) * e_us)
}

/// Zeroth-order second-stage root, `(1/2)[sqrt(1 + (2N+1) phi + phi^2/4) - phi/2]`.
pub fn second_stage_zeroth(eta: f64, n_photons: f64, e_us: f64) -> f64 {
    let phi = phi(eta, e_us);
    let a = 1.0 + (2.0 * n_photons + 1.0) * phi;
    0.5 * a / ((a + 0.25 * phi * phi).sqrt() + 0.5 * phi)
}

/// First-order second-stage root for the environment `(N_env, s)`; the correction
/// is evaluated with zeroth-order eigenvalues.
pub fn second_stage_first_order(eta: f64, n_photons: f64, n_env: f64, s: f64) -> f64 {
    let (e_q, e_p) = env_pair(n_env, s);
    let (e_u, e_us) = if s >= 0.0 { (e_q, e_p) } else { (e_p, e_q) };
    first_order_root(eta, n_photons, e_u, e_us)
}

fn first_order_root(eta: f64, n_photons: f64, e_u: f64, e_us: f64) -> f64 {
    let i0 = second_stage_zeroth(eta, n_photons, e_us);
    let o = eta * i0 + (1.0 - eta) * e_u;
    let o_s = eta / (4.0 * i0) + (1.0 - eta) * e_us;
    let c = 2.0 * n_photons + 1.0 - i0 - 0.25 / i0;
    let a = eta * (c + 0.25 / i0) + (1.0 - eta) * e_us;
    let nu2 = o * o_s;
    let eps = eta * a * o * i0 * c * (a - o)
        / (2.0 * (eta * eta * (o * o + a * a - a * o) * i0 * c - a * a * o * o * (12.0 * nu2 + 1.0)));
    i0 + eps
}

/// Second-stage stationarity residual at one use, with `a_{u*}` fixed by the energy.
fn one_use_residual(i: f64, eta: f64, n_photons: f64, e_u: f64, e_us: f64, order: ApproxOrder) -> f64 {
    let o = eta * i + (1.0 - eta) * e_u;
    let i_s = 0.25 / i;
    let o_s = eta * i_s + (1.0 - eta) * e_us;
    let a = eta * (2.0 * n_photons + 1.0 - i) + (1.0 - eta) * e_us;
    let nb = (o * a).sqrt();
    let nu = (o * o_s).sqrt();
    let coeff = 1.0 / o - i_s / (i * o_s);
    let tail = if coeff == 0.0 { 0.0 } else { coeff * nu_dg(nu, order) };
    (1.0 / o - 1.0 / a) * nu_dg(nb, order) - tail
}

fn exact_root(eta: f64, n_photons: f64, e_u: f64, e_us: f64) -> Result<f64> {
    let root = (n_photons * n_photons + n_photons).sqrt();
    let lo = n_photons + 0.5 - root;
    let hi = n_photons + 0.5 + root;
    let pad = 1e-13 * (hi - lo);
    bisect(
        |i| one_use_residual(i, eta, n_photons, e_u, e_us, ApproxOrder::Exact),
        lo + pad,
        hi - pad,
        1e-15,
        0.0,
    )
}

/// Optimal single-use ensemble and its Holevo-chi.
pub fn solve_one_use(eta: f64, n_photons: f64, n_env: f64, s: f64, order: ApproxOrder) -> Result<OneUseSolution> {
    validate(eta, n_photons, n_env, s)?;
    if n_photons == 0.0 {
        return Ok(OneUseSolution {
            capacity: 0.0,
            stage: Stage::First,
            i_q: 0.5,
            i_p: 0.5,
            c_q: 0.0,
            c_p: 0.0,
            r_opt: 0.0,
            order,
        });
    }
    let (e_q, e_p) = env_pair(n_env, s);
    let x = eta * (n_photons + 0.5) + (1.0 - eta) * 0.5 * (e_q + e_p);
    let third = third_stage_mode(x, e_q, e_p, eta);
    if third.c_q > 0.0 && third.c_p > 0.0 {
        return Ok(OneUseSolution {
            capacity: capacity_third_closed_form(eta, n_photons, n_env, mean_env_photons_memoryless(n_env, s)),
            stage: Stage::Third,
            i_q: third.i_q,
            i_p: third.i_p,
            c_q: third.c_q,
            c_p: third.c_p,
            r_opt: s,
            order,
        });
    }
    // the noisier quadrature is left unmodulated
    let u = if third.c_q <= 0.0 { Quadrature::Q } else { Quadrature::P };
    let (e_u, e_us) = match u {
        Quadrature::Q => (e_q, e_p),
        Quadrature::P => (e_p, e_q),
    };
    let i_u = match order {
        ApproxOrder::Exact => exact_root(eta, n_photons, e_u, e_us)?,
        ApproxOrder::Zeroth => second_stage_zeroth(eta, n_photons, e_us),
        ApproxOrder::First => first_order_root(eta, n_photons, e_u, e_us),
    };
    let i_us = 0.25 / i_u;
    let c_us = 2.0 * n_photons + 1.0 - i_u - i_us;
    if !(i_u > 0.0) || !(c_us >= 0.0) || !c_us.is_finite() {
        return Err(Error::NoConvergence {
            what: "one-use second stage",
            detail: format!("{order} root i_u = {i_u} gives c = {c_us}"),
        });
    }
    let (i_q, i_p, c_q, c_p) = match u {
        Quadrature::Q => (i_u, i_us, 0.0, c_us),
        Quadrature::P => (i_us, i_u, c_us, 0.0),
    };
    let env = EnvironmentSpectrum::custom(QuadratureSpectrum::new(vec![e_q], vec![e_p])?)?;
    let capacity = holevo_chi(
        &QuadratureSpectrum::new(vec![i_q], vec![i_p])?,
        &QuadratureSpectrum::new(vec![c_q], vec![c_p])?,
        &env,
        eta,
    )?;
    Ok(OneUseSolution {
        capacity,
        stage: Stage::Second,
        i_q,
        i_p,
        c_q,
        c_p,
        r_opt: (2.0 * i_q).ln(),
        order,
    })
}

/// Result of the environment squeezing search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSqueezingOptimum {
    /// `None` when the maximum sits at the end of the search range (`s* = infinity`).
    pub s_star: Option<f64>,
    /// Capacity at `s*`, or at `s_max` when `s_star` is `None`.
    pub capacity: f64,
    /// The coarse grid showed more than one local maximum.
    pub multiple_maxima: bool,
}

/// Maximizes the exact one-use capacity over `s in [0, s_max]`.
pub fn optimal_env_squeezing_report(
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s_max: f64,
) -> Result<EnvSqueezingOptimum> {
    validate(eta, n_photons, n_env, 0.0)?;
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::InvalidParameter { name: "s_max", value: s_max, reason: "must be positive" });
    }
    let cap = |s: f64| solve_one_use(eta, n_photons, n_env, s, ApproxOrder::Exact).map(|r| r.capacity);
    let step = s_max / (S_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..S_GRID_POINTS).map(|k| k as f64 * step).collect();
    let values = grid.iter().map(|&s| cap(s)).collect::<Result<Vec<f64>>>()?;
    let last = S_GRID_POINTS - 1;
    let best = (0..S_GRID_POINTS).fold(0, |b, k| if values[k] > values[b] { k } else { b });
    let multiple_maxima = (1..last)
        .filter(|&k| values[k] > values[k - 1] && values[k] >= values[k + 1])
        .count()
        + usize::from(values[0] > values[1])
        > 1;
    if best == last || values[last] >= values[best] - 1e-12 {
        return Ok(EnvSqueezingOptimum { s_star: None, capacity: values[last], multiple_maxima });
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[best + 1];
    let (s_star, c_star) = golden_max(|s| cap(s).unwrap_or(f64::NEG_INFINITY), a, b, S_STAR_TOL);
    let (s_star, c_star) = if c_star >= values[best] { (s_star, c_star) } else { (grid[best], values[best]) };
    Ok(EnvSqueezingOptimum { s_star: Some(s_star), capacity: c_star, multiple_maxima })
}

/// `s*`, or `None` when the capacity keeps growing up to `s_max`.
pub fn optimal_env_squeezing(eta: f64, n_photons: f64, n_env: f64, s_max: f64) -> Result<Option<f64>> {
    Ok(optimal_env_squeezing_report(eta, n_photons, n_env, s_max)?.s_star)
}

/// Transmissivity separating finite and infinite `s*`, located by bisection
/// in `eta` with [`DEFAULT_S_MAX`] as the search cap.
///
/// The orientation of the predicate is read off the ends of `(0, 1)`. When it is
/// the same at both ends the boundary value on the side where `s*` is infinite is
/// returned: `0` if `s*` is infinite everywhere, `1` if it is finite everywhere.
pub fn critical_transmissivity(n_photons: f64, n_env: f64) -> Result<f64> {
    if !(n_photons > 0.0) {
        return Err(Error::InvalidParameter { name: "N", value: n_photons, reason: "must be > 0" });
    }
    let infinite = |eta: f64| -> Result<bool> {
        Ok(optimal_env_squeezing(eta, n_photons, n_env, DEFAULT_S_MAX)?.is_none())
    };
    let (mut lo, mut hi) = (ETA_STAR_TOL, 1.0 - ETA_STAR_TOL);
    let at_lo = infinite(lo)?;
    let at_hi = infinite(hi)?;
    if at_lo == at_hi {
        return Ok(if at_lo { 0.0 } else { 1.0 });
    }
    while hi - lo > ETA_STAR_TOL {
        let mid = 0.5 * (lo + hi);
        if infinite(mid)? == at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Optimal input squeezing along a grid of environment squeezings.
pub fn r_opt_curve(
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s_grid: &[f64],
    order: ApproxOrder,
) -> Result<Vec<(f64, f64)>> {
    s_grid
        .iter()
        .map(|&s| Ok((s, solve_one_use(eta, n_photons, n_env, s, order)?.r_opt)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::kkt::solve_dynamic;

    #[test]
    fn zero_energy() {
        let r = solve_one_use(0.5, 0.0, 1.0, 2.0, ApproxOrder::Exact).unwrap();
        assert_eq!(r.stage, Stage::First);
        assert_eq!(r.capacity, 0.0);
    }

    #[test]
    fn unsqueezed_is_third() {
        let r = solve_one_use(0.5, 1.0, 1.0, 0.0, ApproxOrder::Exact).unwrap();
        assert_eq!(r.stage, Stage::Third);
        assert!((r.capacity - 0.622556).abs() < 1e-6);
        assert_eq!(r.r_opt, 0.0);
    }

    #[test]
    fn strong_squeezing_limit() {
        let r = solve_one_use(0.5, 1.0, 1.0, 10.0, ApproxOrder::Exact).unwrap();
        assert!((r.capacity / 3f64.log2() - 1.0).abs() < 0.01, "{}", r.capacity);
    }

    #[test]
    fn zeroth_root_is_quadratic_root() {
        let (eta, n, e_us) = (0.5, 1.0, 1.5 * (-2f64).exp());
        let i0 = second_stage_zeroth(eta, n, e_us);
        let phi = phi(eta, e_us);
        assert!((4.0 * i0 * i0 + 2.0 * phi * i0 - (1.0 + 3.0 * phi)).abs() < 1e-12);
        assert!((second_stage_zeroth(1e-12, n, e_us) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn root_ordering() {
        let z = solve_one_use(0.5, 1.0, 1.0, 2.0, ApproxOrder::Zeroth).unwrap();
        let f = solve_one_use(0.5, 1.0, 1.0, 2.0, ApproxOrder::First).unwrap();
        let e = solve_one_use(0.5, 1.0, 1.0, 2.0, ApproxOrder::Exact).unwrap();
        assert_eq!(e.stage, Stage::Second);
        assert!(z.i_q < f.i_q && f.i_q < e.i_q, "{} {} {}", z.i_q, f.i_q, e.i_q);
        assert!((second_stage_first_order(0.5, 1.0, 1.0, 2.0) - f.i_q).abs() < 1e-15);
    }

    #[test]
    fn matches_general_solver() {
        let one = solve_one_use(0.5, 1.0, 1.0, 2.0, ApproxOrder::Exact).unwrap();
        let p = ChannelParams::new(0.5, 1.0, 1).unwrap();
        let env = EnvironmentSpectrum::memoryless(1.0, 2.0, 1).unwrap();
        let gen = solve_dynamic(&p, &env, ApproxOrder::Exact).unwrap();
        assert!((one.capacity - gen.capacity_per_use).abs() < 1e-9);
        assert!((one.i_q - gen.input.q[0]).abs() < 1e-6);
    }

    #[test]
    fn negative_s_mirrors() {
        for s in [0.3, 2.0, 5.0] {
            let a = solve_one_use(0.6, 1.0, 0.5, s, ApproxOrder::Exact).unwrap();
            let b = solve_one_use(0.6, 1.0, 0.5, -s, ApproxOrder::Exact).unwrap();
            assert!((a.capacity - b.capacity).abs() < 1e-12);
            assert!((a.r_opt + b.r_opt).abs() < 1e-9);
        }
    }

    #[test]
    fn r_opt_small_s_equals_s() {
        let c = r_opt_curve(0.5, 1.0, 1.0, &[0.0, 0.05, 0.1], ApproxOrder::Exact).unwrap();
        for (s, r) in c {
            assert!((r - s).abs() < 1e-12);
        }
    }
}
