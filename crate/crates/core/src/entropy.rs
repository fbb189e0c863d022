//! Entropy of a single bosonic mode as a function of its symplectic eigenvalue.
//!
//! All entropies are in bits. With the vacuum at `nu = 1/2`, the function
//! evaluated here is `g(nu - 1/2)`, where `g(N) = (N+1) log2(N+1) - N log2 N`
//! is the entropy of a thermal state with mean photon number `N`.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Absolute slack below the vacuum value that is still accepted and clamped.
pub const VACUUM_TOL: f64 = 1e-12;

/// A symplectic eigenvalue of a covariance matrix, `nu >= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SymplecticEigenvalue(f64);

impl SymplecticEigenvalue {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu >= 0.5 - VACUUM_TOL) || !nu.is_finite() {
            return Err(Error::Domain {
                what: "symplectic eigenvalue",
                value: nu,
            });
        }
        Ok(Self(nu.max(0.5)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn entropy(self) -> f64 {
        entropy_unchecked(self.0)
    }
}

impl TryFrom<f64> for SymplecticEigenvalue {
    type Error = Error;

    fn try_from(nu: f64) -> Result<Self> {
        Self::new(nu)
    }
}

/// Which approximation of `g` the solvers use when forming their
/// stationarity equations. Capacities are always evaluated with the exact `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApproxOrder {
    #[default]
    Exact,
    Zeroth,
    First,
}

impl ApproxOrder {
    pub const ALL: [ApproxOrder; 3] = [ApproxOrder::Exact, ApproxOrder::Zeroth, ApproxOrder::First];

    pub fn as_str(self) -> &'static str {
        match self {
            ApproxOrder::Exact => "exact",
            ApproxOrder::Zeroth => "zeroth",
            ApproxOrder::First => "first",
        }
    }
}

impl fmt::Display for ApproxOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApproxOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(ApproxOrder::Exact),
            "zeroth" | "0" => Ok(ApproxOrder::Zeroth),
            "first" | "1" => Ok(ApproxOrder::First),
            other => Err(format!("unknown order '{other}' (expected exact, zeroth or first)")),
        }
    }
}

// (nu + 1/2) log(nu + 1/2) - (nu - 1/2) log(nu - 1/2), written so that the
// large-nu cancellation between the two terms does not lose digits.
fn entropy_unchecked(nu: f64) -> f64 {
    let b = nu - 0.5;
    if b <= VACUUM_TOL {
        let a = nu + 0.5;
        return a * a.log2();
    }
    ((b + 1.0).ln() + b * (1.0 / b).ln_1p()) / LN_2
}

/// `g(nu - 1/2)`: von Neumann entropy in bits of a mode with symplectic eigenvalue `nu`.
pub fn g_entropy(nu: f64) -> Result<f64> {
    Ok(SymplecticEigenvalue::new(nu)?.entropy())
}

/// `g(n)` for a mean photon number `n >= 0`.
pub fn g_photons(n: f64) -> Result<f64> {
    g_entropy(n + 0.5)
}

/// Series form of `g(nu - 1/2)` truncated after `terms` correction terms.
///
/// `terms == 0` is the zeroth-order form `log2(nu) + 1/ln 2`.
pub fn g_series(nu: f64, terms: usize) -> Result<f64> {
    if !(nu > 0.5) || !nu.is_finite() {
        return Err(Error::Domain {
            what: "series argument",
            value: nu,
        });
    }
    let r = (2.0 * nu).powi(-2);
    let mut power = 1.0;
    let mut tail = 0.0;
    for j in 1..=terms {
        power *= r;
        let j = j as f64;
        tail += power / (j * (2.0 * j + 1.0));
    }
    Ok(nu.log2() + (1.0 - 0.5 * tail) / LN_2)
}

/// `d g(nu - 1/2) / d nu = log2((nu + 1/2) / (nu - 1/2))`.
pub fn g_derivative(nu: f64) -> Result<f64> {
    if !(nu > 0.5) {
        return Err(Error::Domain {
            what: "derivative argument",
            value: nu,
        });
    }
    Ok(slope_unchecked(nu))
}

pub(crate) fn slope_unchecked(nu: f64) -> f64 {
    (1.0 / (nu - 0.5)).ln_1p() / LN_2
}

/// `nu * dg/dnu` under the given approximation. Diverges at the vacuum for `Exact`.
pub fn nu_dg(nu: f64, order: ApproxOrder) -> f64 {
    match order {
        ApproxOrder::Exact => {
            if nu <= 0.5 {
                f64::INFINITY
            } else {
                nu * slope_unchecked(nu)
            }
        }
        ApproxOrder::Zeroth => 1.0 / LN_2,
        ApproxOrder::First => (1.0 + 1.0 / (12.0 * nu * nu)) / LN_2,
    }
}

/// Inverse of [`g_derivative`]: the `nu > 1/2` at which the slope equals `slope > 0`.
pub fn nu_from_slope(slope: f64) -> f64 {
    0.5 / (0.5 * slope * LN_2).tanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_and_thermal_values() {
        assert_eq!(g_entropy(0.5).unwrap(), 0.0);
        assert!((g_entropy(1.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((g_photons(0.5).unwrap() - 1.377_443_751_081_734_4).abs() < 1e-12);
    }

    #[test]
    fn below_vacuum_is_rejected() {
        assert!(matches!(g_entropy(0.49), Err(Error::Domain { .. })));
        assert!(g_entropy(0.5 - 1e-13).is_ok());
        assert!(g_series(0.5, 3).is_err());
        assert!(g_derivative(0.5).is_err());
    }

    #[test]
    fn series_examples() {
        assert!((g_series(1.0, 0).unwrap() - 1.0 / LN_2).abs() < 1e-15);
        let want = (1.0 - 1.0 / 24.0) / LN_2;
        assert!((g_series(1.0, 1).unwrap() - want).abs() < 1e-15);
        assert!((g_series(5.0, 60).unwrap() - g_entropy(5.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn nu_ten_against_long_series() {
        let long = g_series(10.0, 50).unwrap();
        let exact = g_entropy(10.0).unwrap();
        assert!((long - exact).abs() < 1e-13);
        let zeroth = g_series(10.0, 0).unwrap();
        let r = 1.0 / 400.0;
        let diff = (exact - zeroth).abs();
        assert!((diff - r / (6.0 * LN_2)).abs() < r * r / LN_2);
        assert!(diff <= r / (1.0 - r) / (6.0 * LN_2));
    }

    #[test]
    fn derivative_examples() {
        assert!((g_derivative(1.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(g_derivative(1e6).unwrap() < 1e-5);
        assert!((100.0 * g_derivative(100.0).unwrap() - 1.0 / LN_2).abs() < 1e-4);
    }

    #[test]
    fn slope_inverse_round_trips() {
        for nu in [0.50001, 0.7, 1.0, 3.3, 250.0] {
            let back = nu_from_slope(g_derivative(nu).unwrap());
            assert!((back - nu).abs() < 1e-9 * nu, "{nu} -> {back}");
        }
    }

    #[test]
    fn order_parses() {
        assert_eq!("Zeroth".parse::<ApproxOrder>().unwrap(), ApproxOrder::Zeroth);
        assert!("second".parse::<ApproxOrder>().is_err());
    }
}
