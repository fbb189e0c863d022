//! Nearest-neighbor memory channel in the limit of infinitely many uses.
//!
//! The environment spectrum becomes the density `(N_env + 1/2) e^{+-2s cos xi}` over
//! `xi in [0, pi]`. By mirror symmetry everything is computed on `[0, pi/2]`, where
//! `q` is the noisier quadrature. Modes on `[0, tau]` are in the second stage with
//! `c_q = 0`; the rest of the quarter is third stage (`(2,3,2)`) or first stage
//! (`(2,1,2)`).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::bessel::bessel_i0;
use crate::channel::{mean_env_photons_memory, mean_env_photons_memoryless, Quadrature};
use crate::entropy::{g_entropy, ApproxOrder};
use crate::error::{ensure_finite, Error, Result};
use crate::kkt::{first_second_boundary, second_stage_formal, Stage};
use crate::memoryless::{capacity_third_closed_form, solve_one_use};
use crate::quadrature::Composite;
use crate::roots::{bisect, golden_max};

/// Default number of quadrature panels per integration interval.
pub const DEFAULT_QUAD_PANELS: usize = 256;
/// Required agreement between the capacity at `panels` and `2 * panels`.
pub const RICHARDSON_TOL: f64 = 1e-8;
/// `|N - N2|` below which the distribution is reported as all second stage.
pub const ALL_SECOND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Distribution {
    AllThird,
    /// Second stage at the edges, third stage in the center.
    TwoThreeTwo,
    /// Second stage at the edges, first stage in the center.
    TwoOneTwo,
    AllSecond,
}

impl Distribution {
    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::AllThird => "all-third",
            Distribution::TwoThreeTwo => "2-3-2",
            Distribution::TwoOneTwo => "2-1-2",
            Distribution::AllSecond => "all-second",
        }
    }
}

/// Environment density of quadrature `u` at angle `xi`.
pub fn env_density(xi: f64, n_env: f64, s: f64, quadrature: Quadrature) -> f64 {
    let sign = match quadrature {
        Quadrature::Q => 1.0,
        Quadrature::P => -1.0,
    };
    (n_env + 0.5) * (sign * 2.0 * s * xi.cos()).exp()
}

/// The all-third-stage criterion: every mode is modulated in both quadratures iff `w >= 1`.
pub fn w_parameter(eta: f64, n_photons: f64, n_env: f64, s: f64) -> f64 {
    let t = (1.0 - eta) * (2.0 * n_env + 1.0);
    let ratio = (eta * (2.0 * n_photons + 1.0) + t * bessel_i0(2.0 * s)) / (eta + t);
    ratio.ln() / (2.0 * s.abs())
}

/// Densities of one mode at angle `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensities {
    pub xi: f64,
    pub stage: Stage,
    pub e_q: f64,
    pub e_p: f64,
    pub i_q: f64,
    pub i_p: f64,
    pub c_q: f64,
    pub c_p: f64,
    pub o_q: f64,
    pub o_p: f64,
    pub a_q: f64,
    pub a_p: f64,
    pub nu: f64,
    pub nu_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSolution {
    pub distribution: Distribution,
    /// Transition angle in `[0, pi/2]`.
    pub tau: f64,
    /// Averaged-output level.
    pub x: f64,
    /// Bits per use.
    pub capacity: f64,
    pub n2_threshold: f64,
    pub w: f64,
    pub eta: f64,
    pub n_photons: f64,
    pub n_env: f64,
    pub s: f64,
    pub order: ApproxOrder,
}

impl SpectralSolution {
    /// Densities at `xi in [0, pi]`.
    pub fn densities(&self, xi: f64) -> Result<SpectralDensities> {
        if !(0.0..=PI).contains(&xi) {
            return Err(Error::Domain { what: "angle xi", value: xi });
        }
        // fold onto the quarter where q is the noisier quadrature
        let (xf, mirrored) = {
            let folded = if xi > FRAC_PI_2 { PI - xi } else { xi };
            let swap = (xi > FRAC_PI_2) != (self.s < 0.0);
            (folded, swap)
        };
        let prob = Problem::new(self.eta, self.n_photons, self.n_env, self.s.abs(), self.order);
        let m = match self.distribution {
            Distribution::AllThird => prob.third(xf, self.x),
            _ if xf <= self.tau => prob.second(xf, self.x)?,
            Distribution::TwoThreeTwo => prob.third(xf, self.x),
            _ => prob.first(xf),
        };
        Ok(if mirrored { m.swapped(xi) } else { SpectralDensities { xi, ..m } })
    }
}

impl SpectralDensities {
    fn swapped(self, xi: f64) -> Self {
        SpectralDensities {
            xi,
            e_q: self.e_p,
            e_p: self.e_q,
            i_q: self.i_p,
            i_p: self.i_q,
            c_q: self.c_p,
            c_p: self.c_q,
            o_q: self.o_p,
            o_p: self.o_q,
            a_q: self.a_p,
            a_p: self.a_q,
            ..self
        }
    }

    fn energy(&self) -> f64 {
        self.i_q + self.i_p + self.c_q + self.c_p
    }

    fn chi(&self) -> f64 {
        let hi = g_entropy(self.nu_bar.max(0.5)).unwrap_or(0.0);
        let lo = g_entropy(self.nu.max(0.5)).unwrap_or(0.0);
        hi - lo
    }
}

/// Problem data on the quarter `[0, pi/2]` with `s >= 0`.
#[derive(Debug, Clone, Copy)]
struct Problem {
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s: f64,
    order: ApproxOrder,
}

impl Problem {
    fn new(eta: f64, n_photons: f64, n_env: f64, s: f64, order: ApproxOrder) -> Self {
        Problem { eta, n_photons, n_env, s, order }
    }

    fn env(&self, xi: f64) -> (f64, f64) {
        (env_density(xi, self.n_env, self.s, Quadrature::Q), env_density(xi, self.n_env, self.s, Quadrature::P))
    }

    fn assemble(&self, xi: f64, stage: Stage, i_q: f64, c_q: f64, c_p: f64) -> SpectralDensities {
        let (e_q, e_p) = self.env(xi);
        let eta = self.eta;
        let i_p = 0.25 / i_q;
        let o_q = eta * i_q + (1.0 - eta) * e_q;
        let o_p = eta * i_p + (1.0 - eta) * e_p;
        let a_q = o_q + eta * c_q;
        let a_p = o_p + eta * c_p;
        SpectralDensities {
            xi,
            stage,
            e_q,
            e_p,
            i_q,
            i_p,
            c_q,
            c_p,
            o_q,
            o_p,
            a_q,
            a_p,
            nu: (o_q * o_p).sqrt(),
            nu_bar: (a_q * a_p).sqrt(),
        }
    }

    fn first(&self, xi: f64) -> SpectralDensities {
        self.assemble(xi, Stage::First, 0.5, 0.0, 0.0)
    }

    fn third(&self, xi: f64, x: f64) -> SpectralDensities {
        let (e_q, e_p) = self.env(xi);
        let i_q = 0.5 * (2.0 * self.s * xi.cos()).exp();
        let c_q = (x - (1.0 - self.eta) * e_q) / self.eta - i_q;
        let c_p = (x - (1.0 - self.eta) * e_p) / self.eta - 0.25 / i_q;
        self.assemble(xi, Stage::Third, i_q, c_q, c_p)
    }

    /// Formal second-stage mode with `c_q = 0` (the sign of `c_p` is not checked).
    fn second(&self, xi: f64, x: f64) -> Result<SpectralDensities> {
        let (e_q, e_p) = self.env(xi);
        let root = second_stage_formal(x, e_q, e_p, self.eta, Quadrature::Q, self.order).ok_or_else(|| {
            Error::NoConvergence {
                what: "second-stage density",
                detail: format!("no root at xi = {xi}, x = {x}"),
            }
        })?;
        Ok(self.assemble(xi, Stage::Second, root.i_u, 0.0, root.c_conj(self.eta, e_p)))
    }

    /// Level at which the mode at `tau` sits on the stage boundary.
    fn level(&self, dist: Distribution, tau: f64) -> f64 {
        let (e_q, e_p) = self.env(tau);
        let eta = self.eta;
        match dist {
            Distribution::TwoOneTwo => first_second_boundary(e_q, e_p, eta, self.order),
            _ => eta * 0.5 * (2.0 * self.s * tau.cos()).exp() + (1.0 - eta) * e_q,
        }
    }

    fn tail(&self, dist: Distribution, xi: f64, x: f64) -> SpectralDensities {
        match dist {
            Distribution::TwoOneTwo => self.first(xi),
            _ => self.third(xi, x),
        }
    }

    /// `(2/pi) int_0^{pi/2} f`, split at `tau`.
    fn quarter_mean<F>(&self, rule: &Composite, panels: usize, tau: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64, bool) -> Result<f64>,
    {
        let mut err = None;
        let mut wrap = |xi: f64, inner: bool| match f(xi, inner) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let head = rule.integrate(|xi| wrap(xi, true), 0.0, tau, panels);
        let tail = rule.integrate(|xi| wrap(xi, false), tau, FRAC_PI_2, panels);
        match err {
            Some(e) => Err(e),
            None => Ok((head + tail) * 2.0 / PI),
        }
    }

    /// Energy balance `(eta/2)[(2N + 1) - mean energy]` with the boundary at `tau`.
    fn residual(&self, dist: Distribution, tau: f64, rule: &Composite, panels: usize) -> Result<f64> {
        let x = self.level(dist, tau);
        let mean = self.quarter_mean(rule, panels, tau, |xi, inner| {
            Ok(if inner { self.second(xi, x)?.energy() } else { self.tail(dist, xi, x).energy() })
        })?;
        Ok(0.5 * self.eta * (2.0 * self.n_photons + 1.0 - mean))
    }

    fn capacity(&self, dist: Distribution, tau: f64, rule: &Composite, panels: usize) -> Result<f64> {
        let x = self.level(dist, tau);
        self.quarter_mean(rule, panels, tau, |xi, inner| {
            Ok(if inner { self.second(xi, x)?.chi() } else { self.tail(dist, xi, x).chi() })
        })
    }

    /// Threshold `N2` at which the whole spectrum is in the second stage.
    fn n2(&self, rule: &Composite, panels: usize) -> Result<f64> {
        let x = self.level(Distribution::TwoThreeTwo, FRAC_PI_2);
        let mean = self.quarter_mean(rule, panels, FRAC_PI_2, |xi, _| Ok(self.second(xi, x)?.energy()))?;
        Ok(0.5 * (mean - 1.0))
    }
}

fn validate(eta: f64, n_photons: f64, n_env: f64, s: f64, panels: usize) -> Result<()> {
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
    if panels == 0 {
        return Err(Error::InvalidParameter { name: "quad_points", value: 0.0, reason: "must be >= 1" });
    }
    Ok(())
}

/// `N2(eta, N_env, s)`: below it the center of the spectrum is unmodulated, above it
/// the center is modulated in both quadratures.
pub fn n2_threshold(eta: f64, n_env: f64, s: f64, order: ApproxOrder, quad_points: usize) -> Result<f64> {
    validate(eta, 0.0, n_env, s, quad_points)?;
    let rule = Composite::default();
    Problem::new(eta, 0.0, n_env, s.abs(), order).n2(&rule, quad_points)
}

/// Residual of the energy equation for the transition angle `tau` (root in `tau`).
pub fn tau_residual(
    tau: f64,
    distribution: Distribution,
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s: f64,
    order: ApproxOrder,
    quad_points: usize,
) -> Result<f64> {
    validate(eta, n_photons, n_env, s, quad_points)?;
    let prob = Problem::new(eta, n_photons, n_env, s.abs(), order);
    prob.residual(distribution, tau, &Composite::default(), quad_points)
}

/// Level `x(tau)` on the stage boundary for the given distribution.
pub fn boundary_level(distribution: Distribution, tau: f64, eta: f64, n_env: f64, s: f64, order: ApproxOrder) -> f64 {
    Problem::new(eta, 0.0, n_env, s.abs(), order).level(distribution, tau)
}

/// Capacity per use of the nearest-neighbor memory channel as `n -> infinity`.
pub fn solve_asymptotic(
    eta: f64,
    n_photons: f64,
    n_env: f64,
    s: f64,
    order: ApproxOrder,
    quad_points: usize,
) -> Result<SpectralSolution> {
    validate(eta, n_photons, n_env, s, quad_points)?;
    let sa = s.abs();
    let prob = Problem::new(eta, n_photons, n_env, sa, order);
    let rule = Composite::default();
    let make = |distribution, tau, x, capacity, n2, w| SpectralSolution {
        distribution,
        tau,
        x,
        capacity,
        n2_threshold: n2,
        w,
        eta,
        n_photons,
        n_env,
        s,
        order,
    };
    let w = if sa == 0.0 { f64::INFINITY } else { w_parameter(eta, n_photons, n_env, sa) };
    let n2 = if sa == 0.0 { f64::NAN } else { prob.n2(&rule, quad_points)? };
    if w >= 1.0 {
        let m_env = mean_env_photons_memory(n_env, sa);
        let x = eta * (n_photons + 0.5) + (1.0 - eta) * (m_env + 0.5);
        let c = capacity_third_closed_form(eta, n_photons, n_env, m_env);
        return Ok(make(Distribution::AllThird, 0.0, x, c, n2, w));
    }
    let checked_capacity = |dist, tau| -> Result<f64> {
        let c1 = prob.capacity(dist, tau, &rule, quad_points)?;
        let c2 = prob.capacity(dist, tau, &rule, 2 * quad_points)?;
        if (c1 - c2).abs() > RICHARDSON_TOL {
            return Err(Error::QuadratureFailure {
                detail: format!("capacity {c1} with {quad_points} panels vs {c2} with {}", 2 * quad_points),
            });
        }
        Ok(c2)
    };
    if (n_photons - n2).abs() < ALL_SECOND_TOL {
        let dist = Distribution::AllSecond;
        let x = prob.level(Distribution::TwoThreeTwo, FRAC_PI_2);
        return Ok(make(dist, FRAC_PI_2, x, checked_capacity(Distribution::TwoThreeTwo, FRAC_PI_2)?, n2, w));
    }
    let dist = if n_photons > n2 { Distribution::TwoThreeTwo } else { Distribution::TwoOneTwo };
    if n_photons == 0.0 {
        let x = prob.level(dist, 0.0);
        return Ok(make(dist, 0.0, x, 0.0, n2, w));
    }
    let mut failure = None;
    let f = |tau: f64| match prob.residual(dist, tau, &rule, quad_points) {
        Ok(r) => r,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let tau = bisect(f, 0.0, FRAC_PI_2, 1e-14, 0.0);
    if let Some(e) = failure {
        return Err(e);
    }
    let tau = tau?;
    let x = prob.level(dist, tau);
    Ok(make(dist, tau, x, checked_capacity(dist, tau)?, n2, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Memoryless,
    NearestNeighbor,
}

impl std::str::FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "memoryless" => Ok(EnvKind::Memoryless),
            "nearest-neighbor" | "memory" => Ok(EnvKind::NearestNeighbor),
            other => Err(format!("unknown environment model '{other}'")),
        }
    }
}

/// Maximum over the environment at fixed `M_env`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvOptimum {
    pub capacity: f64,
    pub s: f64,
    pub n_env: f64,
}

/// Coarse grid size of [`max_over_env`].
const ENV_GRID: usize = 24;

/// Largest `s` with `N_env >= 0` at the given `M_env`.
fn s_limit(m_env: f64, model: EnvKind) -> f64 {
    let target = 2.0 * m_env + 1.0;
    match model {
        EnvKind::Memoryless => target.acosh(),
        EnvKind::NearestNeighbor => {
            if m_env == 0.0 {
                return 0.0;
            }
            let hi = {
                let mut hi = 1.0;
                while bessel_i0(2.0 * hi) < target {
                    hi *= 2.0;
                }
                hi
            };
            bisect(|s| bessel_i0(2.0 * s) - target, 0.0, hi, 1e-14, 0.0).unwrap_or(0.0)
        }
    }
}

fn n_env_for(m_env: f64, s: f64, model: EnvKind) -> f64 {
    let scale = match model {
        EnvKind::Memoryless => s.cosh(),
        EnvKind::NearestNeighbor => bessel_i0(2.0 * s),
    };
    ((m_env + 0.5) / scale - 0.5).max(0.0)
}

/// Maximizes the capacity over `(N_env, s)` at fixed mean environment photon number.
pub fn max_over_env(
    eta: f64,
    n_photons: f64,
    m_env: f64,
    model: EnvKind,
    order: ApproxOrder,
    quad_points: usize,
) -> Result<EnvOptimum> {
    validate(eta, n_photons, 0.0, 0.0, quad_points)?;
    if !(m_env >= 0.0) || !m_env.is_finite() {
        return Err(Error::InvalidParameter { name: "M_env", value: m_env, reason: "must be >= 0" });
    }
    let cap = |s: f64| -> Result<f64> {
        let n_env = n_env_for(m_env, s, model);
        match model {
            EnvKind::Memoryless => Ok(solve_one_use(eta, n_photons, n_env, s, order)?.capacity),
            EnvKind::NearestNeighbor => Ok(solve_asymptotic(eta, n_photons, n_env, s, order, quad_points)?.capacity),
        }
    };
    let s_max = s_limit(m_env, model);
    if s_max == 0.0 {
        return Ok(EnvOptimum { capacity: cap(0.0)?, s: 0.0, n_env: m_env });
    }
    // keep the grid inside the feasible range so that N_env stays non-negative
    let s_hi = s_max * (1.0 - 1e-12);
    let step = s_hi / (ENV_GRID - 1) as f64;
    let grid: Vec<f64> = (0..ENV_GRID).map(|k| k as f64 * step).collect();
    let values = grid.iter().map(|&s| cap(s)).collect::<Result<Vec<f64>>>()?;
    let best = (0..ENV_GRID).fold(0, |b, k| if values[k] > values[b] { k } else { b });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(ENV_GRID - 1)];
    let (s, c) = golden_max(|s| cap(s).unwrap_or(f64::NEG_INFINITY), a, b, 1e-6);
    let (s, c) = if c >= values[best] { (s, c) } else { (grid[best], values[best]) };
    Ok(EnvOptimum { capacity: c, s, n_env: n_env_for(m_env, s, model) })
}

/// Mean environment photon number of the model.
pub fn model_env_photons(model: EnvKind, n_env: f64, s: f64) -> f64 {
    match model {
        EnvKind::Memoryless => mean_env_photons_memoryless(n_env, s),
        EnvKind::NearestNeighbor => mean_env_photons_memory(n_env, s),
    }
}
