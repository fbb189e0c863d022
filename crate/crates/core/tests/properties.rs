use gausscap::channel::{holevo_chi, output_spectrum, symplectic_spectrum};
use gausscap::entropy::{g_derivative, g_entropy, g_series, nu_dg};
use gausscap::kkt::{solve_dynamic, solve_static, KktSolution, Stage};
use gausscap::memoryless::solve_one_use;
use gausscap::*;
use proptest::prelude::*;

fn env_strategy() -> impl Strategy<Value = (usize, f64, f64, bool)> {
    (1usize..=8, 0.0..2.0f64, 0.0..2.5f64, any::<bool>())
}

fn make_env(n: usize, n_env: f64, s: f64, memory: bool) -> EnvironmentSpectrum {
    if memory {
        EnvironmentSpectrum::nearest_neighbor(n_env, s, n).unwrap()
    } else {
        EnvironmentSpectrum::memoryless(n_env, s, n).unwrap()
    }
}

fn chi_of(sol: &KktSolution, env: &EnvironmentSpectrum, eta: f64) -> f64 {
    holevo_chi(&sol.input, &sol.classical, env, eta).unwrap()
}

/// Norm of the numerical gradient of chi over the free variables (squeezing of
/// every mode and every positive classical eigenvalue), projected on the energy
/// constraint.
fn projected_gradient(sol: &KktSolution, env: &EnvironmentSpectrum, eta: f64) -> f64 {
    let n = sol.n_modes();
    let r0: Vec<f64> = (0..n).map(|k| (2.0 * sol.input.q[k]).ln()).collect();
    let mut vars: Vec<(usize, usize)> = (0..n).map(|k| (0, k)).collect();
    for k in 0..n {
        if sol.classical.q[k] > 1e-9 {
            vars.push((1, k));
        }
        if sol.classical.p[k] > 1e-9 {
            vars.push((2, k));
        }
    }
    let eval = |shift: &[f64]| -> (f64, f64) {
        let mut input = sol.input.clone();
        let mut classical = sol.classical.clone();
        for (j, &(kind, k)) in vars.iter().enumerate() {
            match kind {
                0 => {
                    let r = r0[k] + shift[j];
                    input.q[k] = 0.5 * r.exp();
                    input.p[k] = 0.5 * (-r).exp();
                }
                1 => classical.q[k] += shift[j],
                _ => classical.p[k] += shift[j],
            }
        }
        let energy = input.trace() + classical.trace();
        (holevo_chi(&input, &classical, env, eta).unwrap(), energy)
    };
    let h = 1e-6;
    let mut grad = Vec::new();
    let mut dir = Vec::new();
    for j in 0..vars.len() {
        let mut up = vec![0.0; vars.len()];
        up[j] = h;
        let mut down = vec![0.0; vars.len()];
        down[j] = -h;
        let (fu, eu) = eval(&up);
        let (fd, ed) = eval(&down);
        grad.push((fu - fd) / (2.0 * h));
        dir.push((eu - ed) / (2.0 * h));
    }
    let dd: f64 = dir.iter().map(|d| d * d).sum();
    let gd: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
    grad.iter()
        .zip(&dir)
        .map(|(g, d)| (g - gd / dd * d).powi(2))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entropy_increasing_and_concave(nu in 0.5..200.0f64, d in 1e-3..5.0f64) {
        let a = g_entropy(nu).unwrap();
        let b = g_entropy(nu + d).unwrap();
        let m = g_entropy(nu + 0.5 * d).unwrap();
        prop_assert!(b > a);
        prop_assert!(m >= 0.5 * (a + b) - 1e-12);
    }

    #[test]
    fn series_tail_bound(nu in 1.0..500.0f64) {
        let r = (2.0 * nu).powi(-2);
        let err = (g_entropy(nu).unwrap() - g_series(nu, 0).unwrap()).abs();
        prop_assert!(err <= r / (1.0 - r) / (6.0 * std::f64::consts::LN_2) + 1e-15);
    }

    #[test]
    fn series_partial_sums_descend(nu in 0.6..50.0f64, k in 0usize..20) {
        let exact = g_entropy(nu).unwrap();
        let a = g_series(nu, k).unwrap();
        let b = g_series(nu, k + 1).unwrap();
        prop_assert!(b <= a + 1e-15);
        prop_assert!(b >= exact - 1e-12);
    }

    #[test]
    fn derivative_matches_difference(nu in 0.6..100.0f64) {
        let h = 1e-5 * nu;
        let fd = (g_entropy(nu + h).unwrap() - g_entropy(nu - h).unwrap()) / (2.0 * h);
        prop_assert!((g_derivative(nu).unwrap() - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        prop_assert!((nu_dg(nu, ApproxOrder::Exact) - nu * fd).abs() < 1e-5 * nu);
    }

    #[test]
    fn chi_non_negative(
        (n, n_env, s, memory) in env_strategy(),
        eta in 0.01..0.99f64,
        r in -2.0..2.0f64,
        c in 0.0..3.0f64,
    ) {
        let env = make_env(n, n_env, s, memory);
        let input = QuadratureSpectrum::uniform(n, 0.5 * r.exp(), 0.5 * (-r).exp());
        let classical = QuadratureSpectrum::uniform(n, c, 0.5 * c);
        let out = output_spectrum(&input, &env, eta).unwrap();
        for nu in symplectic_spectrum(&out).unwrap() {
            prop_assert!(nu.value() >= 0.5);
        }
        prop_assert!(holevo_chi(&input, &classical, &env, eta).unwrap() >= 0.0);
    }

    #[test]
    fn kkt_solution_contract(
        (n, n_env, s, memory) in env_strategy(),
        eta in 0.05..0.95f64,
        log_n in -2.5..1.0f64,
    ) {
        let big_n = 10f64.powf(log_n);
        let params = ChannelParams::new(eta, big_n, n).unwrap();
        let env = make_env(n, n_env, s, memory);
        for order in ApproxOrder::ALL {
            let sol = solve_dynamic(&params, &env, order).unwrap();
            for k in 0..n {
                let (iq, ip) = (sol.input.q[k], sol.input.p[k]);
                let (cq, cp) = (sol.classical.q[k], sol.classical.p[k]);
                prop_assert!((iq * ip - 0.25).abs() < 1e-12);
                prop_assert!(cq >= 0.0 && cp >= 0.0);
                let (eq, ep) = (env.spectrum.q[k], env.spectrum.p[k]);
                let aq = eta * (iq + cq) + (1.0 - eta) * eq;
                let ap = eta * (ip + cp) + (1.0 - eta) * ep;
                match sol.stages.stages[k] {
                    Stage::Third => {
                        prop_assert!((aq - sol.x).abs() < 1e-9 * sol.x);
                        prop_assert!((ap - sol.x).abs() < 1e-9 * sol.x);
                    }
                    Stage::Second => {
                        let a = if cq > 0.0 { aq } else { ap };
                        if order == ApproxOrder::Exact {
                            // common multiplier: P(nu_bar) / a = g'(x)
                            let nb = (aq * ap).sqrt();
                            let lhs = nu_dg(nb, order) / a;
                            let rhs = g_derivative(sol.x).unwrap();
                            prop_assert!((lhs - rhs).abs() < 1e-8 * rhs);
                        } else {
                            prop_assert!((a - sol.x).abs() < 1e-9 * sol.x);
                        }
                    }
                    Stage::First => prop_assert!(cq == 0.0 && cp == 0.0),
                }
            }
            let energy = (sol.input.trace() + sol.classical.trace()) / (2.0 * n as f64);
            prop_assert!((energy - big_n - 0.5).abs() < 1e-9);
            let chi = chi_of(&sol, &env, eta) / n as f64;
            prop_assert!((chi - sol.capacity_per_use).abs() < 1e-9);
        }
    }

    #[test]
    fn kkt_stationary(
        (n, n_env, s, memory) in env_strategy(),
        eta in 0.05..0.95f64,
        log_n in -2.0..1.0f64,
    ) {
        let params = ChannelParams::new(eta, 10f64.powf(log_n), n).unwrap();
        let env = make_env(n, n_env, s, memory);
        let sol = solve_dynamic(&params, &env, ApproxOrder::Exact).unwrap();
        let g = projected_gradient(&sol, &env, eta);
        prop_assert!(g < 1e-5, "projected gradient {g}, stages {:?}", sol.stages);
    }

    #[test]
    fn capacity_monotone_in_energy(
        (n, n_env, s, memory) in env_strategy(),
        eta in 0.05..0.95f64,
        big_n in 0.0..3.0f64,
        dn in 0.01..1.0f64,
    ) {
        let env = make_env(n, n_env, s, memory);
        let lo = solve_dynamic(&ChannelParams::new(eta, big_n, n).unwrap(), &env, ApproxOrder::Exact).unwrap();
        let hi = solve_dynamic(&ChannelParams::new(eta, big_n + dn, n).unwrap(), &env, ApproxOrder::Exact).unwrap();
        prop_assert!(hi.capacity_per_use >= lo.capacity_per_use - 1e-12);
        let out = |sol: &KktSolution, with_c: bool| {
            let c = if with_c { sol.classical.clone() } else { QuadratureSpectrum::zeros(n) };
            let a = gausscap::channel::averaged_output_spectrum(&sol.input, &c, &env, eta).unwrap();
            symplectic_spectrum(&a).unwrap().iter().map(|v| v.value()).collect::<Vec<f64>>()
        };
        let (bar_lo, bar_hi) = (out(&lo, true), out(&hi, true));
        let (nu_lo, nu_hi) = (out(&lo, false), out(&hi, false));
        for k in 0..n {
            prop_assert!(bar_hi[k] >= bar_lo[k] - 1e-9);
            prop_assert!(nu_hi[k] <= nu_lo[k] + 1e-9);
        }
    }

    #[test]
    fn static_matches_dynamic(
        (n, n_env, s, memory) in env_strategy(),
        eta in 0.05..0.95f64,
        log_n in -2.5..1.0f64,
    ) {
        let params = ChannelParams::new(eta, 10f64.powf(log_n), n).unwrap();
        let env = make_env(n, n_env, s, memory);
        let d = solve_dynamic(&params, &env, ApproxOrder::Exact).unwrap();
        let st = solve_static(&params, &env, ApproxOrder::Exact).unwrap();
        prop_assert_eq!(&d.stages, &st.stages);
        prop_assert!((d.capacity_per_use - st.capacity_per_use).abs() < 1e-10);
    }

    #[test]
    fn one_use_symmetric_in_s(eta in 0.05..0.95f64, big_n in 0.0..3.0f64, n_env in 0.0..2.0f64, s in 0.0..6.0f64) {
        let a = solve_one_use(eta, big_n, n_env, s, ApproxOrder::Exact).unwrap();
        let b = solve_one_use(eta, big_n, n_env, -s, ApproxOrder::Exact).unwrap();
        prop_assert!((a.capacity - b.capacity).abs() < 1e-10);
        prop_assert!((a.r_opt + b.r_opt).abs() < 1e-8);
        prop_assert!((a.i_q * a.i_p - 0.25).abs() < 1e-12);
        prop_assert!((a.i_q + a.i_p + a.c_q + a.c_p - 2.0 * big_n - 1.0).abs() < 1e-9);
    }
}
