//! Brute-force maximization of the Holevo-chi over diagonal Gaussian ensembles.
//!
//! Independent of the KKT solvers: it only evaluates chi and climbs it. Each mode is
//! parametrized by `i_q = t e^r / 2`, `i_p = t e^-r / 2` with `t >= 1` (so that
//! `i_q i_p >= 1/4` without assuming purity) and a non-negative classical weight per
//! quadrature; the weights share whatever energy the input leaves over.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, EnvironmentSpectrum, QuadratureSpectrum};
use crate::entropy::g_entropy;
use crate::error::{Error, Result};

/// Largest problem the oracle accepts.
pub const MAX_MODES: usize = 8;
/// Smallest number of random starts.
pub const MIN_STARTS: usize = 8;
pub const DEFAULT_SEED: u64 = 0x005e_ed0f_c4a1;

const FD_STEP: f64 = 1e-6;
const STEP0: f64 = 0.1;
const STEP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Best total chi over all starts (bits, not per use).
    pub chi_best: f64,
    pub input: QuadratureSpectrum,
    pub classical: QuadratureSpectrum,
    pub starts: usize,
    /// Max minus min of the converged chi across starts.
    pub spread: f64,
    /// Projected gradient norm at the best point.
    pub gradient_norm: f64,
    pub chi_per_start: Vec<f64>,
}

struct Problem<'a> {
    eta: f64,
    budget: f64,
    e_q: &'a [f64],
    e_p: &'a [f64],
}

// layout: [r_0..r_n, t_0..t_n, wq_0..wq_n, wp_0..wp_n]
impl Problem<'_> {
    fn n(&self) -> usize {
        self.e_q.len()
    }

    fn spectra(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let (r, rest) = v.split_at(n);
        let (t, w) = rest.split_at(n);
        let i_q: Vec<f64> = (0..n).map(|k| 0.5 * t[k] * r[k].exp()).collect();
        let i_p: Vec<f64> = (0..n).map(|k| 0.5 * t[k] * (-r[k]).exp()).collect();
        let left = (self.budget - i_q.iter().sum::<f64>() - i_p.iter().sum::<f64>()).max(0.0);
        let total: f64 = w.iter().sum();
        let share = |x: f64| if total > 0.0 { left * x / total } else { 0.0 };
        let c_q = w[..n].iter().map(|x| share(*x)).collect();
        let c_p = w[n..].iter().map(|x| share(*x)).collect();
        (i_q, i_p, c_q, c_p)
    }

    fn chi(&self, v: &[f64]) -> f64 {
        let (i_q, i_p, c_q, c_p) = self.spectra(v);
        let eta = self.eta;
        let mut chi = 0.0;
        for k in 0..self.n() {
            let o_q = eta * i_q[k] + (1.0 - eta) * self.e_q[k];
            let o_p = eta * i_p[k] + (1.0 - eta) * self.e_p[k];
            let a_q = o_q + eta * c_q[k];
            let a_p = o_p + eta * c_p[k];
            let nb = (a_q * a_p).sqrt().max(0.5);
            let nu = (o_q * o_p).sqrt().max(0.5);
            chi += g_entropy(nb).unwrap_or(0.0) - g_entropy(nu).unwrap_or(0.0);
        }
        chi
    }

    /// Clamps to the bounds and pulls `(r, t)` toward the vacuum until the input
    /// fits in the energy budget.
    fn project(&self, v: &mut [f64]) {
        let n = self.n();
        for k in 0..n {
            v[n + k] = v[n + k].max(1.0);
        }
        for w in &mut v[2 * n..] {
            *w = w.max(0.0);
        }
        let input = |v: &[f64], lam: f64| -> f64 {
            (0..n).map(|k| (1.0 + lam * (v[n + k] - 1.0)) * (lam * v[k]).cosh()).sum()
        };
        if input(v, 1.0) <= self.budget {
            return;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if input(v, mid) <= self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for k in 0..n {
            v[k] *= lo;
            v[n + k] = 1.0 + lo * (v[n + k] - 1.0);
        }
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut probe = v.to_vec();
        (0..v.len())
            .map(|j| {
                let x = v[j];
                probe[j] = x + FD_STEP;
                let up = self.chi(&probe);
                probe[j] = x - FD_STEP;
                let down = self.chi(&probe);
                probe[j] = x;
                (up - down) / (2.0 * FD_STEP)
            })
            .collect()
    }

    /// Gradient with the components that push against an active bound removed.
    fn projected_gradient(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut g = self.gradient(v);
        for j in n..4 * n {
            let bound = if j < 2 * n { 1.0 } else { 0.0 };
            if v[j] <= bound && g[j] < 0.0 {
                g[j] = 0.0;
            }
        }
        g
    }

    fn ascend(&self, mut v: Vec<f64>, iters: usize) -> (Vec<f64>, f64) {
        self.project(&mut v);
        let mut f = self.chi(&v);
        for _ in 0..iters {
            let g = self.projected_gradient(&v);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            let mut step = STEP0;
            let mut moved = false;
            while step >= STEP_FLOOR {
                let mut trial: Vec<f64> = v.iter().zip(&g).map(|(x, d)| x + step * d).collect();
                self.project(&mut trial);
                let ft = self.chi(&trial);
                if ft > f {
                    v = trial;
                    f = ft;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (v, f)
    }
}

/// [`maximize_chi_seeded`] with [`DEFAULT_SEED`].
pub fn maximize_chi(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    starts: usize,
    iters: usize,
) -> Result<OracleReport> {
    maximize_chi_seeded(params, env, starts, iters, DEFAULT_SEED)
}

/// Multi-start projected gradient ascent of chi under the energy constraint.
pub fn maximize_chi_seeded(
    params: &ChannelParams,
    env: &EnvironmentSpectrum,
    starts: usize,
    iters: usize,
    seed: u64,
) -> Result<OracleReport> {
    let n = params.n_modes;
    if env.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: env.len() });
    }
    if n > MAX_MODES {
        return Err(Error::InvalidParameter { name: "n", value: n as f64, reason: "oracle handles n <= 8" });
    }
    if starts < MIN_STARTS {
        return Err(Error::InvalidParameter { name: "starts", value: starts as f64, reason: "need at least 8 starts" });
    }
    if !(params.n_photons >= 0.0) {
        return Err(Error::InfeasibleStart { detail: format!("N = {} < 0", params.n_photons) });
    }
    let prob = Problem {
        eta: params.eta,
        budget: params.energy_budget(),
        e_q: &env.spectrum.q,
        e_p: &env.spectrum.p,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut per_start = Vec::with_capacity(starts);
    for _ in 0..starts {
        let mut v = vec![0.0; 4 * n];
        for k in 0..n {
            v[k] = rng.gen_range(-0.5..0.5);
            v[n + k] = 1.0 + rng.gen_range(0.0..0.2);
        }
        for w in &mut v[2 * n..] {
            *w = rng.gen_range(0.0..1.0);
        }
        let (v, f) = prob.ascend(v, iters);
        per_start.push(f);
        if best.as_ref().is_none_or(|(_, b)| f > *b) {
            best = Some((v, f));
        }
    }
    let (v, chi_best) = best.expect("at least one start");
    let (i_q, i_p, c_q, c_p) = prob.spectra(&v);
    let gradient_norm = prob.projected_gradient(&v).iter().map(|x| x * x).sum::<f64>().sqrt();
    let lo = per_start.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OracleReport {
        chi_best,
        input: QuadratureSpectrum { q: i_q, p: i_p },
        classical: QuadratureSpectrum { q: c_q, p: c_p },
        starts,
        spread: chi_best - lo,
        gradient_norm,
        chi_per_start: per_start,
    })
}
