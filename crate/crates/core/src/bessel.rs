/// Modified Bessel function of the first kind, order zero.
///
/// Power series up to `|z| = 15`, Hankel asymptotic expansion beyond.
pub fn bessel_i0(z: f64) -> f64 {
    let z = z.abs();
    if z <= 15.0 {
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                return sum;
            }
            k += 1.0;
        }
    }
    // e^z / sqrt(2 pi z) * sum_k ((2k-1)!!)^2 / (k! (8z)^k)
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    loop {
        let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * z);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum {
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    // split the exponential to stay finite slightly longer
    let half = (0.5 * z).exp();
    half * (sum / (2.0 * std::f64::consts::PI * z).sqrt()) * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite;

    fn series_oracle(z: f64, terms: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..terms {
            let k = k as f64;
            term *= (z / 2.0).powi(2) / (k * k);
            sum += term;
        }
        sum
    }

    #[test]
    fn i0_at_zero_and_two() {
        assert_eq!(bessel_i0(0.0), 1.0);
        let v = bessel_i0(2.0);
        assert!((v - series_oracle(2.0, 60)).abs() < 1e-14);
        assert!((v - 2.279_585_302_336_067).abs() < 1e-12);
    }

    #[test]
    fn i0_matches_integral_representation() {
        let z = 2.0;
        let quad = composite(|t| (z * t.cos()).exp(), 0.0, std::f64::consts::PI, 128)
            / std::f64::consts::PI;
        assert!((bessel_i0(z) - quad).abs() < 1e-9);
    }

    #[test]
    fn branches_agree_near_switch() {
        for z in [15.0_f64, 16.0, 20.0, 30.0, 60.0] {
            let s = series_oracle(z, 400);
            let a = bessel_i0(z);
            assert!(((a - s) / s).abs() < 1e-12, "z={z}: {a} vs {s}");
        }
        assert_eq!(bessel_i0(-3.0), bessel_i0(3.0));
    }
}
