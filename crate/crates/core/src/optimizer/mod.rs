//! Block-coordinate optimization: the digital beamforming/compression step,
//! the relaxed RF beamforming step, the unit-modulus projection, feasible
//! initialization and the outer alternation between the two algorithms.

mod problems;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::model::{
    effective_channel, fronthaul_rate, per_user_rates, transmit_power, weighted_sum_rate,
    DigitalDesign, ModulusState, RfDesign, SystemConfig,
};
use crate::subsolver::{self, SolveOptions};
use crate::wmmse::{surrogate_objective, SurrogateState};
use crate::{CMat, CVec, Complex64};
use problems::{DigitalProblemData, RfProblemData};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Convergence thresholds and iteration caps of the block-coordinate loops.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Relative objective-change threshold for both inner loops and the
    /// outer alternation.
    pub conv_tol: f64,
    /// Iteration cap of each inner (digital or RF) loop.
    pub max_inner_iters: usize,
    /// Cap on outer digital/RF alternation rounds.
    pub max_outer_rounds: usize,
    /// Regularization weight of the digital surrogate.
    pub rho: f64,
    /// Inner convex-solver settings.
    pub subsolver: SolveOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            conv_tol: 1e-5,
            max_inner_iters: 100,
            max_outer_rounds: 20,
            rho: 0.0,
            subsolver: SolveOptions::default(),
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.conv_tol > 0.0) || self.max_inner_iters == 0 || self.max_outer_rounds == 0 {
            return Err(Error::InvalidParameter(
                "conv_tol, max_inner_iters and max_outer_rounds must be positive".into(),
            ));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::InvalidParameter("rho must be nonnegative".into()));
        }
        if !(self.subsolver.kkt_tol > 0.0)
            || !(self.subsolver.barrier_mu > 1.0)
            || !(self.subsolver.barrier_t0 > 0.0)
            || self.subsolver.max_newton_iters == 0
        {
            return Err(Error::InvalidParameter("subsolver options must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of one inner loop: surrogate objective, true weighted
/// sum-rate and the worst constraint excess (negative = strictly feasible).
#[derive(Debug, Clone, Default)]
pub struct IterTrace {
    pub surrogate: Vec<f64>,
    pub true_rate: Vec<f64>,
    pub max_violation: Vec<f64>,
    pub stalled: bool,
}

/// One outer round: the digital trace, the RF trace (absent in round 0) and
/// the true weighted sum-rate after the round.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub digital: IterTrace,
    pub rf: Option<IterTrace>,
    pub rate_after: f64,
}

/// Full optimization record: per-round traces, final rates and residuals.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub rounds: Vec<RoundTrace>,
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
    /// max_i (p_i - P_i); negative when strictly feasible.
    pub power_violation: f64,
    /// max_i (g_i - C_i); negative when strictly feasible.
    pub fronthaul_violation: f64,
    /// Worst modulus deviation of the returned RF design.
    pub modulus_violation: f64,
    /// Total inner iterations across all loops.
    pub iterations: usize,
    pub wall_ms: u64,
    pub converged: bool,
    pub stalled: bool,
}

impl SolveReport {
    /// Worst violation across all constraint families.
    pub fn max_violation(&self) -> f64 {
        self.power_violation.max(self.fronthaul_violation).max(self.modulus_violation)
    }
}

/// Worst constraint excess of a digital design under fixed RF.
fn design_excess(rf: &RfDesign, dig: &DigitalDesign, cfg: &SystemConfig) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..cfg.n_rrhs {
        worst = worst.max(fronthaul_rate(i, dig, cfg)? - cfg.fronthaul[i]);
        worst = worst.max(transmit_power(i, rf, dig, cfg)? - cfg.power[i]);
    }
    Ok(worst)
}

/// Random phase-shifter initialization: every entry `exp(j theta)` with
/// theta uniform on [0, 2pi).
pub fn init_rf<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> RfDesign {
    let beamformers = (0..cfg.n_rrhs)
        .map(|_| {
            CMat::from_fn(cfg.m_antennas, cfg.n_rf_chains, |_, _| {
                Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
            })
        })
        .collect();
    RfDesign { beamformers, modulus_state: ModulusState::UnitModulus }
}

/// Strictly feasible digital start for a fixed RF design: matched-filter
/// beamformers through the RF front end, isotropic quantization noise with
/// the level found by bisection on the fronthaul constraints, then one joint
/// rescale (v, Omega) -> (s v, s^2 Omega) that pins every transmit power at
/// or below 90% of its budget. The rescale leaves the fronthaul rates exactly
/// unchanged, so both constraint families end up with a 10% margin.
pub fn init_digital(rf: &RfDesign, h: &ChannelRealization, cfg: &SystemConfig) -> Result<DigitalDesign> {
    let n = cfg.n_rf_chains;
    let beamformers: Vec<CVec> = (0..cfg.n_ues).map(|k| effective_channel(k, rf, h, cfg)).collect();
    let all_zero = beamformers.iter().all(|v| v.norm() == 0.0);

    let beta = if all_zero {
        1.0
    } else {
        // Per-RRH beamformer load A_i = sum_k c_k c_k^H.
        let loads: Vec<CMat> = (0..cfg.n_rrhs)
            .map(|i| {
                let mut a = CMat::zeros(n, n);
                for v in &beamformers {
                    let c = v.rows(i * n, n);
                    a += &c * c.adjoint();
                }
                a
            })
            .collect();
        // Fronthaul rate with Omega = beta I, monotone non-increasing in beta.
        let excess = |beta: f64| -> f64 {
            let mut worst = f64::NEG_INFINITY;
            for (i, a) in loads.iter().enumerate() {
                let shifted = a + CMat::identity(n, n) * Complex64::new(beta, 0.0);
                let g = crate::linalg::log2_det_hermitian(&shifted).unwrap_or(f64::INFINITY)
                    - (n as f64) * beta.log2();
                worst = worst.max(g - 0.9 * cfg.fronthaul[i]);
            }
            worst
        };
        let floor = 1e-6;
        if excess(floor) <= 0.0 {
            floor
        } else {
            let mut hi = 1.0;
            let mut guard = 0;
            while excess(hi) > 0.0 {
                hi *= 10.0;
                guard += 1;
                if guard > 40 {
                    return Err(Error::Numerical(
                        "fronthaul bisection failed to bracket (capacity not reachable)".into(),
                    ));
                }
            }
            let mut lo = (hi / 10.0).max(floor);
            for _ in 0..80 {
                let mid = (lo * hi).sqrt();
                if excess(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi * 1.02
        }
    };

    let mut dig = DigitalDesign {
        beamformers,
        omega: vec![CMat::identity(n, n) * Complex64::new(beta, 0.0); cfg.n_rrhs],
    };

    // Joint power rescale; fronthaul rates are invariant under it.
    let mut s_sq = f64::INFINITY;
    for i in 0..cfg.n_rrhs {
        let p = transmit_power(i, rf, &dig, cfg)?;
        if p > 0.0 {
            s_sq = s_sq.min(0.9 * cfg.power[i] / p);
        }
    }
    if s_sq.is_finite() {
        let s = Complex64::new(s_sq.sqrt(), 0.0);
        for v in &mut dig.beamformers {
            *v *= s;
        }
        for o in &mut dig.omega {
            *o *= Complex64::new(s_sq, 0.0);
        }
    }

    for i in 0..cfg.n_rrhs {
        debug_assert!(transmit_power(i, rf, &dig, cfg)? <= 0.9 * cfg.power[i] + 1e-9);
        debug_assert!(fronthaul_rate(i, &dig, cfg)? <= 0.9 * cfg.fronthaul[i] + 1e-9);
    }
    Ok(dig)
}

/// Rescales (v, Omega) -> (s v, s^2 Omega) with s <= 1 so every transmit
/// power sits at or below 90% of its budget under the given RF design.
/// Fronthaul rates are unchanged by construction.
fn rescale_for_power(rf: &RfDesign, dig: &DigitalDesign, cfg: &SystemConfig) -> Result<DigitalDesign> {
    let mut s_sq: f64 = 1.0;
    for i in 0..cfg.n_rrhs {
        let p = transmit_power(i, rf, dig, cfg)?;
        if p > 0.0 {
            s_sq = s_sq.min(0.9 * cfg.power[i] / p);
        }
    }
    if s_sq >= 1.0 {
        return Ok(dig.clone());
    }
    let mut out = dig.clone();
    let s = Complex64::new(s_sq.sqrt(), 0.0);
    for v in &mut out.beamformers {
        *v *= s;
    }
    for o in &mut out.omega {
        *o *= Complex64::new(s_sq, 0.0);
    }
    Ok(out)
}

/// Algorithm for the digital variables under fixed RF: alternate the
/// closed-form surrogate updates with the inner convex solve until the
/// surrogate objective stops improving.
pub fn digital_step(
    rf: &RfDesign,
    dig0: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &OptimizerOptions,
) -> Result<(DigitalDesign, IterTrace)> {
    for i in 0..cfg.n_rrhs {
        let g = fronthaul_rate(i, dig0, cfg)
            .map_err(|e| Error::Infeasible(format!("starting point: {e}")))?;
        let p = transmit_power(i, rf, dig0, cfg)?;
        if !(g < cfg.fronthaul[i]) || !(p < cfg.power[i]) {
            return Err(Error::Infeasible(format!(
                "digital start violates RRH {i}: fronthaul {g:.6} / {:.6}, power {p:.6} / {:.6}",
                cfg.fronthaul[i], cfg.power[i]
            )));
        }
    }

    let mut dig = dig0.clone();
    let mut trace = IterTrace::default();
    let mut prev_obj: Option<f64> = None;

    for _ in 0..opts.max_inner_iters {
        let state = SurrogateState::tight(rf, &dig, h, cfg, opts.rho)?;
        let data = DigitalProblemData::new(rf, h, &state, cfg)?;
        let x0 = data.layout.pack(&dig);
        let problem = data.problem(x0);
        let (x_star, sd) = subsolver::maximize(&problem, &opts.subsolver)?;
        if sd.stalled {
            trace.stalled = true;
        }
        let candidate = data.layout.unpack(&x_star);
        // TEMP DEBUG
        {
            let me = candidate.omega.iter().map(|o| crate::linalg::hermitian_eigenvalues(o)[0]).fold(f64::INFINITY, f64::min);
            if me < 0.0 {
                eprintln!("DEBUG: candidate min eig {me:.3e}; stalled={} reverted={} stages={} kkt={:.2e}",
                    sd.stalled, sd.reverted_to_start, sd.stages, sd.kkt_residual);
                for (j, c) in problem.constraints.iter().enumerate() {
                    eprintln!("  constraint {j} at x_star: {:.6e}", (c)(&x_star, None));
                }
            }
        }

        let cur_obj = surrogate_objective(rf, &dig, h, &state, cfg)?;
        let new_obj = surrogate_objective(rf, &candidate, h, &state, cfg)?;
        let improved = new_obj >= cur_obj;
        if improved {
            dig = candidate;
        }
        let obj = if improved { new_obj } else { cur_obj };

        trace.surrogate.push(obj);
        trace.true_rate.push(weighted_sum_rate(rf, &dig, h, cfg)?);
        trace.max_violation.push(design_excess(rf, &dig, cfg)?);

        let done = match prev_obj {
            Some(p) => (obj - p).abs() < opts.conv_tol * p.abs().max(1.0),
            None => false,
        };
        prev_obj = Some(obj);
        if done || !improved {
            break;
        }
    }
    Ok((dig, trace))
}

/// Algorithm for the RF variables under fixed digital design, with the
/// modulus constraint relaxed to the unit disc. Fronthaul constraints do not
/// involve the RF matrices and are left out. The start is shrunk slightly
/// into the strict interior for the barrier solver; the ascent guard compares
/// against the unshrunk input so the step never loses objective value.
pub fn rf_step(
    dig: &DigitalDesign,
    rf0: &RfDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &OptimizerOptions,
) -> Result<(RfDesign, IterTrace)> {
    if rf0.modulus_violation() > 1e-9 {
        return Err(Error::Infeasible("RF start exceeds the unit-modulus relaxation".into()));
    }
    for i in 0..cfg.n_rrhs {
        let p = transmit_power(i, rf0, dig, cfg)?;
        if p > cfg.power[i] + 1e-9 {
            return Err(Error::Infeasible(format!(
                "RF start violates power at RRH {i}: {p:.6} / {:.6}",
                cfg.power[i]
            )));
        }
    }

    let mut rf = RfDesign { beamformers: rf0.beamformers.clone(), modulus_state: ModulusState::Relaxed };
    let mut trace = IterTrace::default();
    let mut prev_obj: Option<f64> = None;

    for _ in 0..opts.max_inner_iters {
        let mut state = SurrogateState::tight(&rf, dig, h, cfg, 0.0)?;
        state.rho = 0.0;
        let data = RfProblemData::new(dig, h, &state, cfg);

        // Shrink into the strict interior of the disc and power constraints.
        let mut shrink: f64 = 1.0;
        let max_mod = rf
            .beamformers
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if max_mod >= 1.0 - 1e-9 {
            shrink = shrink.min((1.0 - 1e-4) / max_mod);
        }
        for i in 0..cfg.n_rrhs {
            let p = transmit_power(i, &rf, dig, cfg)?;
            if p > 0.999 * cfg.power[i] {
                shrink = shrink.min((0.999 * cfg.power[i] / p).sqrt());
            }
        }
        let x0: Vec<f64> = data.layout.pack(&rf).iter().map(|v| v * shrink).collect();

        let problem = data.problem(x0);
        let (x_star, sd) = subsolver::maximize(&problem, &opts.subsolver)?;
        if sd.stalled {
            trace.stalled = true;
        }
        let candidate = data.layout.unpack(&x_star, ModulusState::Relaxed);

        let cur_obj = surrogate_objective(&rf, dig, h, &state, cfg)?;
        let new_obj = surrogate_objective(&candidate, dig, h, &state, cfg)?;
        let improved = new_obj >= cur_obj;
        if improved {
            rf = candidate;
        }
        let obj = if improved { new_obj } else { cur_obj };

        trace.surrogate.push(obj);
        trace.true_rate.push(weighted_sum_rate(&rf, dig, h, cfg)?);
        trace.max_violation.push({
            let mut worst = rf.modulus_violation() - 0.0;
            for i in 0..cfg.n_rrhs {
                worst = worst.max(transmit_power(i, &rf, dig, cfg)? - cfg.power[i]);
            }
            worst
        });

        let done = match prev_obj {
            Some(p) => (obj - p).abs() < opts.conv_tol * p.abs().max(1.0),
            None => false,
        };
        prev_obj = Some(obj);
        if done || !improved {
            break;
        }
    }
    Ok((rf, trace))
}

/// Nearest unit-modulus design: every entry keeps its phase; zero entries map
/// to 1 (any phase is distance-optimal there, so the deterministic one wins).
pub fn project_modulus(rf: &RfDesign) -> RfDesign {
    let beamformers = rf
        .beamformers
        .iter()
        .map(|m| {
            m.map(|z| {
                if z.norm() == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    z / Complex64::new(z.norm(), 0.0)
                }
            })
        })
        .collect();
    RfDesign { beamformers, modulus_state: ModulusState::UnitModulus }
}

/// Joint design: alternate the digital and RF algorithms, projecting the RF
/// design onto the unit-modulus set after each RF update and re-running the
/// digital step so power and fronthaul feasibility hold at every evaluated
/// iterate. Monitors the true weighted sum-rate across rounds.
pub fn joint_optimize<R: Rng + ?Sized>(
    h: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &OptimizerOptions,
    rng: &mut R,
) -> Result<(RfDesign, DigitalDesign, SolveReport)> {
    cfg.validate()?;
    opts.validate()?;
    let started = Instant::now();

    let mut rf = init_rf(cfg, rng);
    let mut dig = init_digital(&rf, h, cfg)?;
    let (d, trace0) = digital_step(&rf, &dig, h, cfg, opts)?;
    dig = d;
    let mut rate = weighted_sum_rate(&rf, &dig, h, cfg)?;
    let mut rounds = vec![RoundTrace { digital: trace0, rf: None, rate_after: rate }];
    let mut converged = false;

    for _ in 0..opts.max_outer_rounds {
        let (relaxed, rf_trace) = rf_step(&dig, &rf, h, cfg, opts)?;
        let projected = project_modulus(&relaxed);
        let warm = rescale_for_power(&projected, &dig, cfg)?;
        let (d, dig_trace) = digital_step(&projected, &warm, h, cfg, opts)?;
        rf = projected;
        dig = d;
        let new_rate = weighted_sum_rate(&rf, &dig, h, cfg)?;
        rounds.push(RoundTrace { digital: dig_trace, rf: Some(rf_trace), rate_after: new_rate });
        let delta = (new_rate - rate).abs();
        rate = new_rate;
        if delta < opts.conv_tol * rate.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let report = build_report(&rf, &dig, h, cfg, rounds, started, converged)?;
    Ok((rf, dig, report))
}

pub(crate) fn build_report(
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
    rounds: Vec<RoundTrace>,
    started: Instant,
    converged: bool,
) -> Result<SolveReport> {
    let rates = per_user_rates(rf, dig, h, cfg)?;
    let sum_rate = weighted_sum_rate(rf, dig, h, cfg)?;
    let mut power_violation = f64::NEG_INFINITY;
    let mut fronthaul_violation = f64::NEG_INFINITY;
    for i in 0..cfg.n_rrhs {
        power_violation = power_violation.max(transmit_power(i, rf, dig, cfg)? - cfg.power[i]);
        fronthaul_violation = fronthaul_violation.max(fronthaul_rate(i, dig, cfg)? - cfg.fronthaul[i]);
    }
    let stalled = rounds
        .iter()
        .any(|r| r.digital.stalled || r.rf.as_ref().map(|t| t.stalled).unwrap_or(false));
    let iterations = rounds
        .iter()
        .map(|r| r.digital.surrogate.len() + r.rf.as_ref().map(|t| t.surrogate.len()).unwrap_or(0))
        .sum();
    Ok(SolveReport {
        rounds,
        per_user_rates: rates,
        sum_rate,
        power_violation,
        fronthaul_violation,
        modulus_violation: rf.modulus_violation(),
        iterations,
        wall_ms: started.elapsed().as_millis() as u64,
        converged,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_realization;
    use crate::seed::substream;

    fn small_cfg() -> SystemConfig {
        SystemConfig::homogeneous(2, 3, 4, 2, 5.0, 4.0)
    }

    #[test]
    fn init_rf_has_exact_unit_modulus_and_reproduces() {
        let cfg = small_cfg();
        let rf = init_rf(&cfg, &mut substream(3, &[0]));
        for m in &rf.beamformers {
            for z in m.iter() {
                assert!((z.norm() - 1.0).abs() < 1e-15);
            }
        }
        let rf2 = init_rf(&cfg, &mut substream(3, &[0]));
        assert_eq!(rf, rf2);
    }

    #[test]
    fn init_rf_phase_distribution_is_uniform() {
        // Chi-square test on 16 bins at the 5% level (critical value for 15
        // degrees of freedom is 24.996).
        let cfg = SystemConfig::homogeneous(2, 1, 50, 50, 1.0, 1.0);
        let mut rng = substream(4, &[0]);
        let mut bins = [0usize; 16];
        let mut total = 0usize;
        for _ in 0..20 {
            let rf = init_rf(&cfg, &mut rng);
            for m in &rf.beamformers {
                for z in m.iter() {
                    let mut phase = z.arg();
                    if phase < 0.0 {
                        phase += std::f64::consts::TAU;
                    }
                    let bin = ((phase / std::f64::consts::TAU) * 16.0) as usize;
                    bins[bin.min(15)] += 1;
                    total += 1;
                }
            }
        }
        assert!(total >= 100_000);
        let expected = total as f64 / 16.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 24.996, "chi-square statistic {chi2} over {total} samples");
    }

    #[test]
    fn init_digital_respects_margins() {
        let cfg = small_cfg();
        for trial in 0..100u64 {
            let h = sample_realization(&cfg, 11, trial).unwrap();
            let rf = init_rf(&cfg, &mut substream(12, &[trial]));
            let dig = init_digital(&rf, &h, &cfg).unwrap();
            for i in 0..cfg.n_rrhs {
                let p = transmit_power(i, &rf, &dig, &cfg).unwrap();
                let g = fronthaul_rate(i, &dig, &cfg).unwrap();
                assert!(p <= 0.9 * cfg.power[i] + 1e-9, "power {p} over margin");
                assert!(g <= 0.9 * cfg.fronthaul[i] + 1e-9, "fronthaul {g} over margin");
            }
        }
    }

    #[test]
    fn init_digital_zero_channel_edge() {
        let cfg = small_cfg();
        let h = ChannelRealization {
            h: (0..cfg.n_ues)
                .map(|_| (0..cfg.n_rrhs).map(|_| CVec::zeros(cfg.m_antennas)).collect())
                .collect(),
        };
        let rf = init_rf(&cfg, &mut substream(13, &[0]));
        let dig = init_digital(&rf, &h, &cfg).unwrap();
        for v in &dig.beamformers {
            assert_eq!(v.norm(), 0.0);
        }
        for i in 0..cfg.n_rrhs {
            let g = fronthaul_rate(i, &dig, &cfg).unwrap();
            assert!(g.abs() < 1e-12);
            assert!(transmit_power(i, &rf, &dig, &cfg).unwrap() <= 0.9 * cfg.power[i] + 1e-12);
        }
    }

    #[test]
    fn project_modulus_examples() {
        let z = Complex64::new(1.0, 1.0);
        let rf = RfDesign {
            beamformers: vec![CMat::from_fn(2, 2, |a, b| {
                if (a, b) == (0, 0) {
                    z
                } else if (a, b) == (0, 1) {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, 0.4 * (a + b) as f64)
                }
            })],
            modulus_state: ModulusState::Relaxed,
        };
        let proj = project_modulus(&rf);
        let expected = z / Complex64::new(2.0f64.sqrt(), 0.0);
        assert!((proj.beamformers[0][(0, 0)] - expected).norm() < 1e-15);
        // Zero maps to 1.
        assert_eq!(proj.beamformers[0][(0, 1)], Complex64::new(1.0, 0.0));
        // Already-unit entries unchanged.
        assert!((proj.beamformers[0][(1, 1)] - rf.beamformers[0][(1, 1)]).norm() < 1e-15);
        assert_eq!(proj.modulus_state, ModulusState::UnitModulus);
    }

    #[test]
    fn projection_is_per_entry_distance_optimal() {
        let mut rng = substream(14, &[0]);
        use rand::Rng;
        for _ in 0..1000 {
            let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rf = RfDesign {
                beamformers: vec![CMat::from_element(1, 1, z)],
                modulus_state: ModulusState::Relaxed,
            };
            let proj = project_modulus(&rf).beamformers[0][(0, 0)];
            let d0 = (proj - z).norm();
            // Any random unit-modulus perturbation is no closer.
            let alt = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            assert!((alt - z).norm() + 1e-12 >= d0);
        }
    }

    #[test]
    fn digital_step_rejects_infeasible_start() {
        let cfg = small_cfg();
        let h = sample_realization(&cfg, 15, 0).unwrap();
        let rf = init_rf(&cfg, &mut substream(16, &[0]));
        let mut dig = init_digital(&rf, &h, &cfg).unwrap();
        // Blow the power budget.
        for v in &mut dig.beamformers {
            *v *= Complex64::new(100.0, 0.0);
        }
        assert!(matches!(
            digital_step(&rf, &dig, &h, &cfg, &OptimizerOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn digital_step_output_is_feasible_and_trace_monotone() {
        let cfg = small_cfg();
        let opts = OptimizerOptions::default();
        for trial in 0..5u64 {
            let h = sample_realization(&cfg, 17, trial).unwrap();
            let rf = init_rf(&cfg, &mut substream(18, &[trial]));
            let dig0 = init_digital(&rf, &h, &cfg).unwrap();
            let (dig, trace) = digital_step(&rf, &dig0, &h, &cfg, &opts).unwrap();
            for w in trace.surrogate.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "surrogate decreased: {:?}", trace.surrogate);
            }
            assert!(design_excess(&rf, &dig, &cfg).unwrap() <= 1e-9);
            // The step actually improves over the matched-filter start.
            let r0 = weighted_sum_rate(&rf, &dig0, &h, &cfg).unwrap();
            let r1 = weighted_sum_rate(&rf, &dig, &h, &cfg).unwrap();
            assert!(r1 >= r0 - 1e-9, "rate went down: {r0} -> {r1}");
        }
    }

    #[test]
    fn digital_step_is_idempotent_at_convergence() {
        let cfg = small_cfg();
        let opts = OptimizerOptions::default();
        let h = sample_realization(&cfg, 19, 0).unwrap();
        let rf = init_rf(&cfg, &mut substream(20, &[0]));
        let dig0 = init_digital(&rf, &h, &cfg).unwrap();
        let (dig1, _) = digital_step(&rf, &dig0, &h, &cfg, &opts).unwrap();
        let (dig2, trace2) = digital_step(&rf, &dig1, &h, &cfg, &opts).unwrap();
        // Second run terminates immediately (within a couple of iterations)
        // and improves the objective by less than conv_tol relative.
        assert!(trace2.surrogate.len() <= 2, "second run took {} iterations", trace2.surrogate.len());
        let o1 = weighted_sum_rate(&rf, &dig1, &h, &cfg).unwrap();
        let o2 = weighted_sum_rate(&rf, &dig2, &h, &cfg).unwrap();
        assert!((o2 - o1).abs() < 10.0 * opts.conv_tol * o1.abs().max(1.0));
    }

    #[test]
    fn rf_step_keeps_entries_in_disc_and_is_monotone() {
        let cfg = small_cfg();
        let opts = OptimizerOptions::default();
        for trial in 0..5u64 {
            let h = sample_realization(&cfg, 21, trial).unwrap();
            let rf0 = init_rf(&cfg, &mut substream(22, &[trial]));
            let dig0 = init_digital(&rf0, &h, &cfg).unwrap();
            let (dig, _) = digital_step(&rf0, &dig0, &h, &cfg, &opts).unwrap();
            let (rf, trace) = rf_step(&dig, &rf0, &h, &cfg, &opts).unwrap();
            assert_eq!(rf.modulus_state, ModulusState::Relaxed);
            assert!(rf.modulus_violation() <= 1e-9);
            for w in trace.surrogate.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "rf surrogate decreased: {:?}", trace.surrogate);
            }
            for i in 0..cfg.n_rrhs {
                assert!(transmit_power(i, &rf, &dig, &cfg).unwrap() <= cfg.power[i] + 1e-9);
            }
        }
    }

    #[test]
    fn joint_optimize_satisfies_all_constraints() {
        let cfg = small_cfg();
        let opts = OptimizerOptions::default();
        for trial in 0..5u64 {
            let h = sample_realization(&cfg, 23, trial).unwrap();
            let (rf, dig, report) = joint_optimize(&h, &cfg, &opts, &mut substream(24, &[trial])).unwrap();
            assert!(report.power_violation <= 1e-9);
            assert!(report.fronthaul_violation <= 1e-9);
            assert!(report.modulus_violation <= 1e-12);
            // Report matches a from-scratch recomputation.
            let wsr = weighted_sum_rate(&rf, &dig, &h, &cfg).unwrap();
            assert!((report.sum_rate - wsr).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_optimize_is_deterministic() {
        let cfg = small_cfg();
        let opts = OptimizerOptions::default();
        let h = sample_realization(&cfg, 25, 0).unwrap();
        let (rf1, dig1, r1) = joint_optimize(&h, &cfg, &opts, &mut substream(26, &[0])).unwrap();
        let (rf2, dig2, r2) = joint_optimize(&h, &cfg, &opts, &mut substream(26, &[0])).unwrap();
        assert_eq!(rf1, rf2);
        assert_eq!(dig1, dig2);
        assert_eq!(r1.sum_rate, r2.sum_rate);
        assert_eq!(r1.iterations, r2.iterations);
    }
}
