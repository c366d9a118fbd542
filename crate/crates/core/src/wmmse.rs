//! WMMSE surrogate machinery: per-UE MSE, the concave rate lower bound, the
//! convex fronthaul upper bound, and the closed-form updates that make both
//! bounds tight at the current iterate.
//!
//! The rate bound is computed in nats internally and converted to bits at the
//! boundary (`gamma` returns nats; the `1/ln 2` factor lives in the surrogate
//! objective), which keeps the inner-solver gradients free of base changes.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, hermitian_cholesky, hermitianize, log2_det_from_factor, log2_det_hermitian};
use crate::model::{effective_channel, interference_plus_noise, DigitalDesign, RfDesign, SystemConfig};
use crate::{CMat, Complex64};

/// Per-UE receive coefficients, MSE weights, per-RRH linearization points and
/// the regularization weight of the digital surrogate.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    /// Receive coefficients u_k.
    pub u: Vec<Complex64>,
    /// Positive MSE weights.
    pub w_tilde: Vec<f64>,
    /// Hermitian PD linearization points of the fronthaul bound, one per RRH.
    pub sigma: Vec<CMat>,
    /// Regularization weight; zero keeps the digital subproblem concave.
    pub rho: f64,
}

impl SurrogateState {
    /// Closed-form tight state at the given designs (receive coefficients,
    /// MSE weights and linearization points all chosen to meet the bounds
    /// with equality).
    pub fn tight(
        rf: &RfDesign,
        dig: &DigitalDesign,
        h: &ChannelRealization,
        cfg: &SystemConfig,
        rho: f64,
    ) -> Result<Self> {
        let mut u = Vec::with_capacity(cfg.n_ues);
        let mut w_tilde = Vec::with_capacity(cfg.n_ues);
        for k in 0..cfg.n_ues {
            let uk = optimal_u(k, rf, dig, h, cfg)?;
            let ek = mse(k, rf, dig, h, cfg, uk)?;
            u.push(uk);
            w_tilde.push(optimal_w(ek)?);
        }
        let sigma = (0..cfg.n_rrhs).map(|i| tight_sigma(i, dig, cfg)).collect();
        Ok(SurrogateState { u, w_tilde, sigma, rho })
    }
}

/// Signal coefficient `h_k^H V̄_R v_{D,k}` seen by UE k.
fn signal_coefficient(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Complex64 {
    effective_channel(k, rf, h, cfg).dotc(&dig.beamformers[k])
}

/// Mean squared error of UE k under receive coefficient `u_k`:
/// `|1 - u_k^* h_k^H V̄_R v_k|^2 + |u_k|^2 zeta_k`.
pub fn mse(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
    u_k: Complex64,
) -> Result<f64> {
    let s = signal_coefficient(k, rf, dig, h, cfg);
    let zeta = interference_plus_noise(k, rf, dig, h, cfg)?;
    let r = Complex64::new(1.0, 0.0) - u_k.conj() * s;
    Ok(r.norm_sqr() + u_k.norm_sqr() * zeta)
}

/// Rate lower-bound kernel in nats: `ln w̃_k - w̃_k e_k + 1`.
pub fn gamma(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
    u_k: Complex64,
    w_tilde_k: f64,
) -> Result<f64> {
    if !(w_tilde_k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "MSE weight must be positive, got {w_tilde_k}"
        )));
    }
    let e = mse(k, rf, dig, h, cfg, u_k)?;
    Ok(w_tilde_k.ln() - w_tilde_k * e + 1.0)
}

/// Receive coefficient that minimizes the MSE (and makes the rate bound
/// attainable): `u_k = (|h^H V̄ v_k|^2 + zeta_k)^{-1} h^H V̄ v_k`.
pub fn optimal_u(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<Complex64> {
    let s = signal_coefficient(k, rf, dig, h, cfg);
    let zeta = interference_plus_noise(k, rf, dig, h, cfg)?;
    Ok(s / (s.norm_sqr() + zeta))
}

/// MSE weight that makes the rate bound tight: `w̃_k = 1/e_k`.
pub fn optimal_w(e_k: f64) -> Result<f64> {
    if !(e_k > 0.0) {
        return Err(Error::InvalidParameter(format!("MSE must be positive, got {e_k}")));
    }
    Ok(1.0 / e_k)
}

/// Signal-plus-quantization load of RRH i: `sum_k E_i^H v_k v_k^H E_i + Omega_i`.
pub fn tight_sigma(i: usize, dig: &DigitalDesign, cfg: &SystemConfig) -> CMat {
    let n = cfg.n_rf_chains;
    let mut s = dig.omega[i].clone();
    for k in 0..cfg.n_ues {
        let c = dig.beamformers[k].rows(i * n, n);
        s += &c * c.adjoint();
    }
    s
}

/// Convex upper bound on the fronthaul rate of RRH i, linearized at
/// `sigma_i`: `log2 det Sigma + tr(Sigma^-1 Phi_i)/ln2 - N/ln2 - log2 det Omega_i`.
pub fn surrogate_fronthaul(i: usize, dig: &DigitalDesign, sigma_i: &CMat, cfg: &SystemConfig) -> Result<f64> {
    let n = cfg.n_rf_chains as f64;
    let ln2 = std::f64::consts::LN_2;
    let phi = tight_sigma(i, dig, cfg);
    let l = hermitian_cholesky(&hermitianize(sigma_i)).ok_or_else(|| {
        Error::Domain(format!("linearization point Sigma_{i} is not positive definite"))
    })?;
    let trace = cholesky_solve(&l, &phi).trace().re;
    let ld_sigma = log2_det_from_factor(&l);
    let ld_omega = log2_det_hermitian(&dig.omega[i])
        .map_err(|_| Error::Domain(format!("quantization covariance of RRH {i} is singular")))?;
    Ok(ld_sigma + trace / ln2 - n / ln2 - ld_omega)
}

/// Surrogate objective of the digital step: weighted rate bounds in bits
/// minus the quadratic linearization penalty.
pub fn surrogate_objective(
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    state: &SurrogateState,
    cfg: &SystemConfig,
) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    let mut acc = 0.0;
    for k in 0..cfg.n_ues {
        let g = gamma(k, rf, dig, h, cfg, state.u[k], state.w_tilde[k])?;
        acc += cfg.weights[k] / ln2 * g;
    }
    if state.rho != 0.0 {
        for i in 0..cfg.n_rrhs {
            let diff = tight_sigma(i, dig, cfg) - &state.sigma[i];
            acc -= state.rho * diff.norm_squared();
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian_vector;
    use crate::model::{fronthaul_rate, user_rate, ModulusState};
    use crate::seed::substream;
    use crate::CVec;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_instance(
        cfg: &SystemConfig,
        seed: u64,
    ) -> (RfDesign, DigitalDesign, ChannelRealization) {
        let mut rng = substream(seed, &[40]);
        let rf = RfDesign {
            beamformers: (0..cfg.n_rrhs)
                .map(|_| {
                    CMat::from_fn(cfg.m_antennas, cfg.n_rf_chains, |_, _| {
                        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                        Complex64::from_polar(1.0, phase)
                    })
                })
                .collect(),
            modulus_state: ModulusState::UnitModulus,
        };
        let dig = DigitalDesign {
            beamformers: (0..cfg.n_ues)
                .map(|_| complex_gaussian_vector(&mut rng, cfg.n_bar()) * Complex64::new(0.5, 0.0))
                .collect(),
            omega: (0..cfg.n_rrhs)
                .map(|_| {
                    let b = CMat::from_fn(cfg.n_rf_chains, cfg.n_rf_chains, |_, _| {
                        Complex64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4))
                    });
                    &b * b.adjoint() + CMat::identity(cfg.n_rf_chains, cfg.n_rf_chains) * Complex64::new(0.2, 0.0)
                })
                .collect(),
        };
        let h = ChannelRealization {
            h: (0..cfg.n_ues)
                .map(|_| {
                    (0..cfg.n_rrhs)
                        .map(|_| complex_gaussian_vector(&mut rng, cfg.m_antennas))
                        .collect()
                })
                .collect(),
        };
        (rf, dig, h)
    }

    fn paper_small() -> SystemConfig {
        SystemConfig::homogeneous(2, 3, 3, 2, 5.0, 4.0)
    }

    #[test]
    fn mse_at_zero_coefficient_is_one() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 1);
        let e = mse(0, &rf, &dig, &h, &cfg, Complex64::new(0.0, 0.0)).unwrap();
        assert_relative_eq!(e, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn mse_scalar_instance() {
        // h = 1, V̄ = 1, v = 1, zeta = 1, u = 1 -> e = 0 + 1 = 1.
        let cfg = SystemConfig::homogeneous(1, 1, 1, 1, 1.0, 1.0);
        let rf = RfDesign {
            beamformers: vec![CMat::from_element(1, 1, Complex64::new(1.0, 0.0))],
            modulus_state: ModulusState::UnitModulus,
        };
        let dig = DigitalDesign {
            beamformers: vec![CVec::from_element(1, Complex64::new(1.0, 0.0))],
            omega: vec![CMat::zeros(1, 1)],
        };
        let h = ChannelRealization {
            h: vec![vec![CVec::from_element(1, Complex64::new(1.0, 0.0))]],
        };
        let e = mse(0, &rf, &dig, &h, &cfg, Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(e, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mmse_identity_holds() {
        // At the optimal u, e = 1/(1 + SINR).
        let cfg = paper_small();
        for s in 0..20 {
            let (rf, dig, h) = random_instance(&cfg, 10 + s);
            for k in 0..cfg.n_ues {
                let u = optimal_u(k, &rf, &dig, &h, &cfg).unwrap();
                let e = mse(k, &rf, &dig, &h, &cfg, u).unwrap();
                let a = effective_channel(k, &rf, &h, &cfg);
                let sig = a.dotc(&dig.beamformers[k]).norm_sqr();
                let zeta = interference_plus_noise(k, &rf, &dig, &h, &cfg).unwrap();
                assert_relative_eq!(e, 1.0 / (1.0 + sig / zeta), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gamma_trivial_values() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 2);
        // With a zero receive coefficient e = 1, so gamma(w̃ = 1) = 0.
        let g = gamma(0, &rf, &dig, &h, &cfg, Complex64::new(0.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(g, 0.0, epsilon = 1e-14);
        assert!(gamma(0, &rf, &dig, &h, &cfg, Complex64::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn gamma_maximized_over_weight_at_inverse_mse() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 3);
        let u = optimal_u(0, &rf, &dig, &h, &cfg).unwrap();
        let e = mse(0, &rf, &dig, &h, &cfg, u).unwrap();
        let w = optimal_w(e).unwrap();
        let g_star = gamma(0, &rf, &dig, &h, &cfg, u, w).unwrap();
        assert_relative_eq!(g_star, -e.ln(), epsilon = 1e-12);
        for dw in [-0.1, -0.01, 0.01, 0.1] {
            let g = gamma(0, &rf, &dig, &h, &cfg, u, w + dw).unwrap();
            assert!(g <= g_star + 1e-12);
        }
    }

    #[test]
    fn rate_bound_holds_and_is_tight() {
        let cfg = paper_small();
        let ln2 = std::f64::consts::LN_2;
        let mut rng = substream(77, &[0]);
        for s in 0..50 {
            let (rf, dig, h) = random_instance(&cfg, 100 + s);
            for k in 0..cfg.n_ues {
                let rate = user_rate(k, &rf, &dig, &h, &cfg).unwrap();
                // Arbitrary (u, w̃): bound from below.
                for _ in 0..5 {
                    let u = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let w = rng.gen_range(0.01..5.0);
                    let g = gamma(k, &rf, &dig, &h, &cfg, u, w).unwrap();
                    assert!(g / ln2 <= rate + 1e-9);
                }
                // Closed-form (u, w̃): tight.
                let u = optimal_u(k, &rf, &dig, &h, &cfg).unwrap();
                let e = mse(k, &rf, &dig, &h, &cfg, u).unwrap();
                let w = optimal_w(e).unwrap();
                let g = gamma(k, &rf, &dig, &h, &cfg, u, w).unwrap();
                assert!((g / ln2 - rate).abs() < 1e-9, "gap {}", (g / ln2 - rate).abs());
            }
        }
    }

    #[test]
    fn optimal_u_beats_local_grid() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 4);
        let u = optimal_u(0, &rf, &dig, &h, &cfg).unwrap();
        let e_star = mse(0, &rf, &dig, &h, &cfg, u).unwrap();
        for di in -3i32..=3 {
            for dj in -3i32..=3 {
                let cand = u + Complex64::new(di as f64 * 1e-3, dj as f64 * 1e-3);
                let e = mse(0, &rf, &dig, &h, &cfg, cand).unwrap();
                assert!(e + 1e-8 >= e_star);
            }
        }
    }

    #[test]
    fn optimal_u_zero_beamformer_is_zero() {
        let cfg = paper_small();
        let (rf, mut dig, h) = random_instance(&cfg, 5);
        dig.beamformers[1].fill(Complex64::new(0.0, 0.0));
        let u = optimal_u(1, &rf, &dig, &h, &cfg).unwrap();
        assert_eq!(u, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn optimal_w_values() {
        assert_relative_eq!(optimal_w(1.0).unwrap(), 1.0);
        assert_relative_eq!(optimal_w(0.25).unwrap(), 4.0);
        assert!(optimal_w(0.0).is_err());
        assert!(optimal_w(-1.0).is_err());
    }

    #[test]
    fn gamma_stationary_at_closed_form_updates() {
        // Finite-difference gradient of gamma in (Re u, Im u, w̃) is ~0 at the
        // closed-form maximizers.
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 6);
        let k = 1;
        let u = optimal_u(k, &rf, &dig, &h, &cfg).unwrap();
        let e = mse(k, &rf, &dig, &h, &cfg, u).unwrap();
        let w = optimal_w(e).unwrap();
        let eps = 1e-6;
        let g = |uu: Complex64, ww: f64| gamma(k, &rf, &dig, &h, &cfg, uu, ww).unwrap();
        let d_re = (g(u + Complex64::new(eps, 0.0), w) - g(u - Complex64::new(eps, 0.0), w)) / (2.0 * eps);
        let d_im = (g(u + Complex64::new(0.0, eps), w) - g(u - Complex64::new(0.0, eps), w)) / (2.0 * eps);
        let d_w = (g(u, w + eps) - g(u, w - eps)) / (2.0 * eps);
        let norm = (d_re * d_re + d_im * d_im + d_w * d_w).sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn tight_sigma_trivial_cases() {
        let cfg = SystemConfig::homogeneous(1, 1, 1, 1, 1.0, 1.0);
        let dig = DigitalDesign {
            beamformers: vec![CVec::from_element(1, Complex64::new(2.0f64.sqrt(), 0.0))],
            omega: vec![CMat::from_element(1, 1, Complex64::new(1.0, 0.0))],
        };
        let s = tight_sigma(0, &dig, &cfg);
        assert_relative_eq!(s[(0, 0)].re, 3.0, epsilon = 1e-14);

        let zero = DigitalDesign {
            beamformers: vec![CVec::zeros(1)],
            omega: vec![CMat::from_element(1, 1, Complex64::new(0.7, 0.0))],
        };
        assert_eq!(tight_sigma(0, &zero, &cfg), zero.omega[0]);
    }

    #[test]
    fn tight_sigma_stays_positive_definite() {
        let cfg = paper_small();
        let (_, dig, _) = random_instance(&cfg, 7);
        for i in 0..cfg.n_rrhs {
            let s = tight_sigma(i, &dig, &cfg);
            let min_eig_s = crate::linalg::hermitian_eigenvalues(&s)[0];
            let min_eig_o = crate::linalg::hermitian_eigenvalues(&dig.omega[i])[0];
            assert!(min_eig_s >= min_eig_o - 1e-12);
        }
    }

    #[test]
    fn fronthaul_bound_tight_at_linearization_point() {
        let cfg = paper_small();
        for s in 0..50 {
            let (_, dig, _) = random_instance(&cfg, 200 + s);
            for i in 0..cfg.n_rrhs {
                let sigma = tight_sigma(i, &dig, &cfg);
                let gt = surrogate_fronthaul(i, &dig, &sigma, &cfg).unwrap();
                let g = fronthaul_rate(i, &dig, &cfg).unwrap();
                assert!((gt - g).abs() < 1e-10, "tightness gap {}", (gt - g).abs());
            }
        }
    }

    #[test]
    fn fronthaul_bound_dominates_for_random_linearizations() {
        let cfg = paper_small();
        let mut rng = substream(78, &[0]);
        let mut checked = 0;
        for s in 0..250 {
            let (_, dig, _) = random_instance(&cfg, 300 + s);
            for i in 0..cfg.n_rrhs {
                let n = cfg.n_rf_chains;
                let b = CMat::from_fn(n, n, |_, _| {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let sigma = &b * b.adjoint() + CMat::identity(n, n) * Complex64::new(rng.gen_range(0.05..2.0), 0.0);
                let gt = surrogate_fronthaul(i, &dig, &sigma, &cfg).unwrap();
                let g = fronthaul_rate(i, &dig, &cfg).unwrap();
                assert!(gt >= g - 1e-10, "bound violated: {gt} < {g}");
                checked += 1;
            }
        }
        assert!(checked >= 500);
    }

    #[test]
    fn surrogate_fronthaul_zero_design_at_omega_point() {
        let cfg = SystemConfig::homogeneous(1, 2, 2, 2, 1.0, 1.0);
        let dig = DigitalDesign {
            beamformers: vec![CVec::zeros(2); 2],
            omega: vec![CMat::identity(2, 2) * Complex64::new(0.4, 0.0)],
        };
        let gt = surrogate_fronthaul(0, &dig, &dig.omega[0].clone(), &cfg).unwrap();
        assert_relative_eq!(gt, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_objective_reduces_to_weighted_sum_rate_when_tight() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 8);
        let state = SurrogateState::tight(&rf, &dig, &h, &cfg, 0.0).unwrap();
        let obj = surrogate_objective(&rf, &dig, &h, &state, &cfg).unwrap();
        let wsr = crate::model::weighted_sum_rate(&rf, &dig, &h, &cfg).unwrap();
        assert_relative_eq!(obj, wsr, epsilon = 1e-9);
    }

    #[test]
    fn surrogate_objective_regularizer_vanishes_at_tight_sigma() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 9);
        let state = SurrogateState::tight(&rf, &dig, &h, &cfg, 1e-3).unwrap();
        let with_reg = surrogate_objective(&rf, &dig, &h, &state, &cfg).unwrap();
        let mut no_reg = state.clone();
        no_reg.rho = 0.0;
        let without = surrogate_objective(&rf, &dig, &h, &no_reg, &cfg).unwrap();
        assert_relative_eq!(with_reg, without, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_objective_matches_termwise_recomputation() {
        let cfg = paper_small();
        let (rf, dig, h) = random_instance(&cfg, 14);
        let mut state = SurrogateState::tight(&rf, &dig, &h, &cfg, 1e-3).unwrap();
        // Move sigma off the tight point so the regularizer is active.
        for s in &mut state.sigma {
            *s += CMat::identity(s.nrows(), s.ncols()) * Complex64::new(0.1, 0.0);
        }
        let obj = surrogate_objective(&rf, &dig, &h, &state, &cfg).unwrap();

        let ln2 = std::f64::consts::LN_2;
        let mut expected = 0.0;
        for k in 0..cfg.n_ues {
            expected += cfg.weights[k] / ln2
                * gamma(k, &rf, &dig, &h, &cfg, state.u[k], state.w_tilde[k]).unwrap();
        }
        for i in 0..cfg.n_rrhs {
            let diff = tight_sigma(i, &dig, &cfg) - &state.sigma[i];
            expected -= state.rho * diff.norm_squared();
        }
        assert!((obj - expected).abs() < 1e-12);
    }

    #[test]
    fn surrogate_values_are_finite_on_feasible_inputs() {
        let cfg = paper_small();
        for s in 0..30 {
            let (rf, dig, h) = random_instance(&cfg, 400 + s);
            let state = SurrogateState::tight(&rf, &dig, &h, &cfg, 0.0).unwrap();
            for k in 0..cfg.n_ues {
                assert!(mse(k, &rf, &dig, &h, &cfg, state.u[k]).unwrap().is_finite());
                assert!(gamma(k, &rf, &dig, &h, &cfg, state.u[k], state.w_tilde[k])
                    .unwrap()
                    .is_finite());
            }
            for i in 0..cfg.n_rrhs {
                assert!(surrogate_fronthaul(i, &dig, &state.sigma[i], &cfg).unwrap().is_finite());
            }
            assert!(surrogate_objective(&rf, &dig, &h, &state, &cfg).unwrap().is_finite());
        }
    }
}
