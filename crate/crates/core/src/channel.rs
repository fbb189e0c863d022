//! Diagonal covariance spectra and the action of the lossy bosonic channel on them.
//!
//! Every covariance matrix is represented by its `q` and `p` eigenvalues in a
//! basis shared by all matrices of a problem (vacuum = 1/2 in each quadrature).

use serde::{Deserialize, Serialize};

use crate::bessel::bessel_i0;
use crate::entropy::{SymplecticEigenvalue, VACUUM_TOL};
use crate::error::{ensure_finite, Error, Result};

/// Tolerance of [`energy_check`].
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    Q,
    P,
}

impl Quadrature {
    pub fn conj(self) -> Self {
        match self {
            Quadrature::Q => Quadrature::P,
            Quadrature::P => Quadrature::Q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmissivity.
    pub eta: f64,
    /// Mean input photons per mode, `N`.
    pub n_photons: f64,
    /// Number of modes (channel uses), `n`.
    pub n_modes: usize,
}

impl ChannelParams {
    pub fn new(eta: f64, n_photons: f64, n_modes: usize) -> Result<Self> {
        ensure_finite("eta", eta)?;
        ensure_finite("N", n_photons)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "transmissivity must lie in [0, 1]",
            });
        }
        if n_photons < 0.0 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: n_photons,
                reason: "photon budget must be non-negative",
            });
        }
        if n_modes == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: 0.0,
                reason: "at least one mode is required",
            });
        }
        Ok(Self {
            eta,
            n_photons,
            n_modes,
        })
    }

    /// Total trace budget `2n(N + 1/2)` of `V_in + V_cl`.
    pub fn energy_budget(&self) -> f64 {
        self.n_modes as f64 * (2.0 * self.n_photons + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpectrum {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl QuadratureSpectrum {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::LengthMismatch {
                expected: q.len(),
                got: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn uniform(n: usize, q: f64, p: f64) -> Self {
        Self {
            q: vec![q; n],
            p: vec![p; n],
        }
    }

    pub fn vacuum(n: usize) -> Self {
        Self::uniform(n, 0.5, 0.5)
    }

    pub fn zeros(n: usize) -> Self {
        Self::uniform(n, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn get(&self, u: Quadrature, k: usize) -> f64 {
        match u {
            Quadrature::Q => self.q[k],
            Quadrature::P => self.p[k],
        }
    }

    pub fn trace(&self) -> f64 {
        self.q.iter().sum::<f64>() + self.p.iter().sum::<f64>()
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.p.len() != other.p.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }

    fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            q: self.q.iter().zip(&other.q).map(|(a, b)| f(*a, *b)).collect(),
            p: self.p.iter().zip(&other.p).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}

/// Parametric family an environment spectrum was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvModel {
    /// `Omega = I`: every mode thermal with `n_env` photons, squeezed by `s`.
    MemorylessSqueezedThermal { n_env: f64, s: f64 },
    /// Open-chain nearest-neighbor coupling, eigenvalues `2 cos(k pi / (n + 1))`.
    NearestNeighbor { n_env: f64, s: f64 },
    /// Arbitrary diagonal spectrum.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpectrum {
    pub spectrum: QuadratureSpectrum,
    pub model: EnvModel,
}

fn check_env_params(n_env: f64, s: f64) -> Result<()> {
    ensure_finite("N_env", n_env)?;
    ensure_finite("s", s)?;
    if n_env < 0.0 {
        return Err(Error::InvalidParameter {
            name: "N_env",
            value: n_env,
            reason: "thermal photon number must be non-negative",
        });
    }
    Ok(())
}

impl EnvironmentSpectrum {
    pub fn memoryless(n_env: f64, s: f64, n: usize) -> Result<Self> {
        check_env_params(n_env, s)?;
        let scale = n_env + 0.5;
        Ok(Self {
            spectrum: QuadratureSpectrum::uniform(n, scale * s.exp(), scale * (-s).exp()),
            model: EnvModel::MemorylessSqueezedThermal { n_env, s },
        })
    }

    pub fn nearest_neighbor(n_env: f64, s: f64, n: usize) -> Result<Self> {
        check_env_params(n_env, s)?;
        let scale = n_env + 0.5;
        let step = std::f64::consts::PI / (n as f64 + 1.0);
        let omega: Vec<f64> = (1..=n).map(|k| 2.0 * (k as f64 * step).cos()).collect();
        Ok(Self {
            spectrum: QuadratureSpectrum {
                q: omega.iter().map(|w| scale * (s * w).exp()).collect(),
                p: omega.iter().map(|w| scale * (-s * w).exp()).collect(),
            },
            model: EnvModel::NearestNeighbor { n_env, s },
        })
    }

    /// Any diagonal environment satisfying positivity and `e_q e_p >= 1/4`.
    pub fn custom(spectrum: QuadratureSpectrum) -> Result<Self> {
        for k in 0..spectrum.len() {
            let (eq, ep) = (spectrum.q[k], spectrum.p[k]);
            if !(eq > 0.0 && ep > 0.0) || eq * ep < 0.25 - VACUUM_TOL {
                return Err(Error::Domain {
                    what: "environment eigenvalue product",
                    value: eq * ep,
                });
            }
        }
        Ok(Self {
            spectrum,
            model: EnvModel::Custom,
        })
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }
}

/// `o_uk = eta i_uk + (1 - eta) e_uk`.
pub fn output_spectrum(
    input: &QuadratureSpectrum,
    env: &EnvironmentSpectrum,
    eta: f64,
) -> Result<QuadratureSpectrum> {
    input.check_len(&env.spectrum)?;
    Ok(input.zip_map(&env.spectrum, |i, e| eta * i + (1.0 - eta) * e))
}

/// `a_uk = eta (i_uk + c_uk) + (1 - eta) e_uk`.
pub fn averaged_output_spectrum(
    input: &QuadratureSpectrum,
    classical: &QuadratureSpectrum,
    env: &EnvironmentSpectrum,
    eta: f64,
) -> Result<QuadratureSpectrum> {
    input.check_len(classical)?;
    if let Some(c) = classical.q.iter().chain(&classical.p).find(|c| **c < 0.0) {
        return Err(Error::Domain {
            what: "classical eigenvalue",
            value: *c,
        });
    }
    let modulated = input.zip_map(classical, |i, c| i + c);
    output_spectrum(&modulated, env, eta)
}

/// `nu_k = sqrt(q_k p_k)` for a spectrum diagonal in a shared basis.
pub fn symplectic_spectrum(spectrum: &QuadratureSpectrum) -> Result<Vec<SymplecticEigenvalue>> {
    spectrum
        .q
        .iter()
        .zip(&spectrum.p)
        .map(|(q, p)| {
            if !(*q > 0.0 && *p > 0.0) {
                return Err(Error::Domain {
                    what: "covariance eigenvalue",
                    value: q.min(*p),
                });
            }
            SymplecticEigenvalue::new((q * p).sqrt())
        })
        .collect()
}

/// Holevo-chi of the Gaussian ensemble, total over all modes (bits).
pub fn holevo_chi(
    input: &QuadratureSpectrum,
    classical: &QuadratureSpectrum,
    env: &EnvironmentSpectrum,
    eta: f64,
) -> Result<f64> {
    let out = output_spectrum(input, env, eta)?;
    let avg = averaged_output_spectrum(input, classical, env, eta)?;
    let nu = symplectic_spectrum(&out)?;
    let nu_bar = symplectic_spectrum(&avg)?;
    Ok(nu_bar
        .iter()
        .zip(&nu)
        .map(|(b, v)| b.entropy() - v.entropy())
        .sum())
}

/// Mean photon number per environment mode, `Tr V_env / 2n - 1/2`.
pub fn mean_env_photons(env: &EnvironmentSpectrum) -> f64 {
    env.spectrum.trace() / (2.0 * env.len() as f64) - 0.5
}

/// `M_env` of the memoryless squeezed thermal model, `(N_env + 1/2) cosh s - 1/2`.
pub fn mean_env_photons_memoryless(n_env: f64, s: f64) -> f64 {
    (n_env + 0.5) * s.cosh() - 0.5
}

/// `M_env` of the nearest-neighbor model as `n -> infinity`, `(N_env + 1/2) I0(2s) - 1/2`.
pub fn mean_env_photons_memory(n_env: f64, s: f64) -> f64 {
    (n_env + 0.5) * bessel_i0(2.0 * s) - 0.5
}

/// Whether `(1/2n) Tr(V_in + V_cl) = N + 1/2` within [`ENERGY_TOL`].
pub fn energy_check(input: &QuadratureSpectrum, classical: &QuadratureSpectrum, n_photons: f64) -> bool {
    if input.len() != classical.len() || input.is_empty() {
        return false;
    }
    let per_mode = (input.trace() + classical.trace()) / (2.0 * input.len() as f64);
    (per_mode - (n_photons + 0.5)).abs() <= ENERGY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(q: &[f64], p: &[f64]) -> QuadratureSpectrum {
        QuadratureSpectrum::new(q.to_vec(), p.to_vec()).unwrap()
    }

    fn env(q: &[f64], p: &[f64]) -> EnvironmentSpectrum {
        EnvironmentSpectrum::custom(spec(q, p)).unwrap()
    }

    #[test]
    fn output_limits() {
        let i = spec(&[0.5], &[0.5]);
        let e = env(&[1.5], &[1.5]);
        assert_eq!(output_spectrum(&i, &e, 1.0).unwrap(), i);
        assert_eq!(output_spectrum(&i, &e, 0.0).unwrap(), e.spectrum);
        assert_eq!(output_spectrum(&i, &e, 0.5).unwrap(), spec(&[1.0], &[1.0]));
    }

    #[test]
    fn length_mismatch() {
        let i = spec(&[0.5, 0.5], &[0.5, 0.5]);
        let e = env(&[1.5], &[1.5]);
        assert!(matches!(
            output_spectrum(&i, &e, 0.5),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(QuadratureSpectrum::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn averaged_output_examples() {
        let i = spec(&[0.5], &[0.5]);
        let e = env(&[0.5], &[0.5]);
        let c = spec(&[1.0], &[0.0]);
        assert_eq!(
            averaged_output_spectrum(&i, &c, &e, 0.5).unwrap(),
            spec(&[1.0], &[0.5])
        );
        let zero = QuadratureSpectrum::zeros(1);
        assert_eq!(
            averaged_output_spectrum(&i, &zero, &e, 0.5).unwrap(),
            output_spectrum(&i, &e, 0.5).unwrap()
        );
        let neg = spec(&[-0.1], &[0.0]);
        assert!(averaged_output_spectrum(&i, &neg, &e, 0.5).is_err());
    }

    #[test]
    fn symplectic_examples() {
        let v = |q: f64, p: f64| symplectic_spectrum(&spec(&[q], &[p])).unwrap()[0].value();
        assert_eq!(v(0.5, 0.5), 0.5);
        assert_eq!(v(2.0, 0.125), 0.5);
        assert_eq!(v(1.5, 1.5), 1.5);
        assert!(symplectic_spectrum(&spec(&[0.0], &[1.0])).is_err());
        assert!(symplectic_spectrum(&spec(&[2.0], &[0.1])).is_err());
    }

    #[test]
    fn chi_examples() {
        let i = spec(&[0.5], &[0.5]);
        let e = env(&[0.5], &[0.5]);
        let zero = QuadratureSpectrum::zeros(1);
        assert_eq!(holevo_chi(&i, &zero, &e, 0.5).unwrap(), 0.0);
        let c = spec(&[2.0], &[2.0]);
        assert!((holevo_chi(&i, &c, &e, 0.5).unwrap() - 2.0).abs() < 1e-14);
        let c2 = spec(&[4.0], &[4.0]);
        assert!(holevo_chi(&i, &c2, &e, 0.5).unwrap() > 2.0);
    }

    #[test]
    fn env_photons() {
        let e = EnvironmentSpectrum::memoryless(1.0, 0.0, 3).unwrap();
        assert!((mean_env_photons(&e) - 1.0).abs() < 1e-15);
        let e = EnvironmentSpectrum::memoryless(0.7, 1.3, 2).unwrap();
        assert!((mean_env_photons(&e) - mean_env_photons_memoryless(0.7, 1.3)).abs() < 1e-13);
        // the open-chain spectrum converges as 1/n
        let e = EnvironmentSpectrum::nearest_neighbor(1.0, 1.0, 4000).unwrap();
        assert!((mean_env_photons(&e) - mean_env_photons_memory(1.0, 1.0)).abs() < 1e-3);
    }

    #[test]
    fn env_photons_even_in_s() {
        for model in [EnvironmentSpectrum::memoryless, EnvironmentSpectrum::nearest_neighbor] {
            let a = mean_env_photons(&model(0.4, 0.9, 7).unwrap());
            let b = mean_env_photons(&model(0.4, -0.9, 7).unwrap());
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn nearest_neighbor_products_are_thermal() {
        let e = EnvironmentSpectrum::nearest_neighbor(0.3, 1.7, 9).unwrap();
        for k in 0..9 {
            assert!((e.spectrum.q[k] * e.spectrum.p[k] - 0.64).abs() < 1e-12);
        }
        assert!(EnvironmentSpectrum::custom(spec(&[1.0], &[0.2])).is_err());
        assert!(EnvironmentSpectrum::memoryless(-0.1, 0.0, 1).is_err());
    }

    #[test]
    fn energy_examples() {
        let i = spec(&[0.5], &[0.5]);
        assert!(energy_check(&i, &QuadratureSpectrum::zeros(1), 0.0));
        assert!(energy_check(&i, &spec(&[1.0], &[1.0]), 1.0));
        assert!(!energy_check(&i, &QuadratureSpectrum::zeros(1), 1.0));
    }
}
