//! System configuration and the exact performance functionals: effective RF
//! matrix, per-UE rate, per-RRH fronthaul rate and transmit power, and the
//! weighted sum-rate objective.
//!
//! Conventions: noise at each UE has unit variance, powers are linear and
//! noise-normalized, rates and capacities are in bits/s/Hz.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::log2_det_hermitian;
use crate::{CMat, CVec, Complex64};
use serde::{Deserialize, Serialize};

/// Scenario constants: counts, per-RRH power budgets and fronthaul
/// capacities, and per-UE rate weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of RRHs (N_R).
    pub n_rrhs: usize,
    /// Number of single-antenna UEs (N_U).
    pub n_ues: usize,
    /// Transmit antennas per RRH (M).
    pub m_antennas: usize,
    /// RF chains per RRH (N); N = M only for the fully digital baseline.
    pub n_rf_chains: usize,
    /// Per-RRH transmit power budgets, linear scale.
    pub power: Vec<f64>,
    /// Per-RRH fronthaul capacities, bits/s/Hz.
    pub fronthaul: Vec<f64>,
    /// Nonnegative per-UE rate weights.
    pub weights: Vec<f64>,
}

impl SystemConfig {
    /// Equal power/capacity across RRHs and unit weights.
    pub fn homogeneous(
        n_rrhs: usize,
        n_ues: usize,
        m_antennas: usize,
        n_rf_chains: usize,
        power: f64,
        fronthaul: f64,
    ) -> Self {
        SystemConfig {
            n_rrhs,
            n_ues,
            m_antennas,
            n_rf_chains,
            power: vec![power; n_rrhs],
            fronthaul: vec![fronthaul; n_rrhs],
            weights: vec![1.0; n_ues],
        }
    }

    /// Total digital dimension N̄ = N_R * N.
    pub fn n_bar(&self) -> usize {
        self.n_rrhs * self.n_rf_chains
    }

    /// Total antenna dimension M̄ = N_R * M.
    pub fn m_bar(&self) -> usize {
        self.n_rrhs * self.m_antennas
    }

    /// Checks counts, budget positivity and weight signs.
    pub fn validate(&self) -> Result<()> {
        if self.n_rrhs == 0 || self.n_ues == 0 {
            return Err(Error::InvalidParameter("need at least one RRH and one UE".into()));
        }
        if self.n_rf_chains < 1 || self.n_rf_chains > self.m_antennas {
            return Err(Error::InvalidParameter(format!(
                "RF chain count {} must satisfy 1 <= N <= M = {}",
                self.n_rf_chains, self.m_antennas
            )));
        }
        if self.power.len() != self.n_rrhs || self.fronthaul.len() != self.n_rrhs {
            return Err(Error::Dimension("power/fronthaul lists must have one entry per RRH".into()));
        }
        if self.weights.len() != self.n_ues {
            return Err(Error::Dimension("weights must have one entry per UE".into()));
        }
        if self.power.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidParameter("per-RRH powers must be positive".into()));
        }
        if self.fronthaul.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidParameter("fronthaul capacities must be positive".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Digital beamformers (one N̄-vector per UE) and per-RRH quantization
/// covariances (N x N Hermitian PSD, strictly PD wherever a log-det is taken).
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalDesign {
    pub beamformers: Vec<CVec>,
    pub omega: Vec<CMat>,
}

impl DigitalDesign {
    /// The part of UE k's beamformer that RRH i transmits (E_i^H v_k).
    pub fn block(&self, k: usize, i: usize, n_rf: usize) -> CVec {
        self.beamformers[k].rows(i * n_rf, n_rf).into_owned()
    }
}

/// Whether an RF design is allowed inside the unit disc or pinned to the
/// unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModulusState {
    Relaxed,
    UnitModulus,
}

/// Per-RRH analog beamforming matrices (M x N) with their modulus state.
#[derive(Debug, Clone, PartialEq)]
pub struct RfDesign {
    pub beamformers: Vec<CMat>,
    pub modulus_state: ModulusState,
}

impl RfDesign {
    /// Largest deviation of any entry from the modulus constraint: for the
    /// relaxed state `max(|v| - 1, 0)`, for unit modulus `max||v| - 1|`.
    pub fn modulus_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in &self.beamformers {
            for z in m.iter() {
                let dev = match self.modulus_state {
                    ModulusState::Relaxed => (z.norm() - 1.0).max(0.0),
                    ModulusState::UnitModulus => (z.norm() - 1.0).abs(),
                };
                worst = worst.max(dev);
            }
        }
        worst
    }
}

/// Per-UE achievable rates in bits/s/Hz.
pub type RateVector = Vec<f64>;

/// Scalar rate kernel: `Phi(a, b) = log2(a + b) - log2(b)` for a >= 0, b > 0.
pub fn phi(a: f64, b: f64) -> f64 {
    (1.0 + a / b).log2()
}

fn check_dims(rf: &RfDesign, dig: &DigitalDesign, cfg: &SystemConfig) -> Result<()> {
    if rf.beamformers.len() != cfg.n_rrhs {
        return Err(Error::Dimension("one RF matrix per RRH required".into()));
    }
    for m in &rf.beamformers {
        if m.nrows() != cfg.m_antennas || m.ncols() != cfg.n_rf_chains {
            return Err(Error::Dimension(format!(
                "RF matrix is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                cfg.m_antennas,
                cfg.n_rf_chains
            )));
        }
    }
    if dig.beamformers.len() != cfg.n_ues || dig.omega.len() != cfg.n_rrhs {
        return Err(Error::Dimension("digital design sized for wrong UE/RRH counts".into()));
    }
    for v in &dig.beamformers {
        if v.len() != cfg.n_bar() {
            return Err(Error::Dimension(format!(
                "digital beamformer has length {}, expected {}",
                v.len(),
                cfg.n_bar()
            )));
        }
    }
    for o in &dig.omega {
        if o.nrows() != cfg.n_rf_chains || o.ncols() != cfg.n_rf_chains {
            return Err(Error::Dimension("quantization covariance must be N x N".into()));
        }
    }
    Ok(())
}

/// Effective RF beamforming matrix: block-diagonal stack of the per-RRH
/// matrices, M̄ x N̄, zeros outside the diagonal blocks.
pub fn effective_rf(rf: &RfDesign, cfg: &SystemConfig) -> Result<CMat> {
    if rf.beamformers.len() != cfg.n_rrhs {
        return Err(Error::Dimension("one RF matrix per RRH required".into()));
    }
    let (m, n) = (cfg.m_antennas, cfg.n_rf_chains);
    let mut out = CMat::zeros(cfg.m_bar(), cfg.n_bar());
    for (i, block) in rf.beamformers.iter().enumerate() {
        if block.nrows() != m || block.ncols() != n {
            return Err(Error::Dimension(format!(
                "RF block {i} is {}x{}, expected {m}x{n}",
                block.nrows(),
                block.ncols()
            )));
        }
        out.view_mut((i * m, i * n), (m, n)).copy_from(block);
    }
    Ok(out)
}

/// Effective receive vector of UE k through the RF front end: `V̄_R^H h_k`.
pub fn effective_channel(k: usize, rf: &RfDesign, h: &ChannelRealization, cfg: &SystemConfig) -> CVec {
    let n = cfg.n_rf_chains;
    let mut a = CVec::zeros(cfg.n_bar());
    for i in 0..cfg.n_rrhs {
        let block = rf.beamformers[i].adjoint() * &h.h[k][i];
        a.rows_mut(i * n, n).copy_from(&block);
    }
    a
}

/// Interference-plus-noise power at UE k: inter-UE interference, forwarded
/// quantization noise and unit thermal noise.
pub fn interference_plus_noise(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<f64> {
    check_dims(rf, dig, cfg)?;
    let a = effective_channel(k, rf, h, cfg);
    let mut zeta = 1.0;
    for l in 0..cfg.n_ues {
        if l != k {
            zeta += a.dotc(&dig.beamformers[l]).norm_sqr();
        }
    }
    // a^H diag(Omega_1..Omega_NR) a, blockwise.
    let n = cfg.n_rf_chains;
    for i in 0..cfg.n_rrhs {
        let ai = a.rows(i * n, n);
        zeta += (ai.adjoint() * &dig.omega[i] * ai)[(0, 0)].re;
    }
    Ok(zeta)
}

/// Achievable rate of UE k in bits/s/Hz, treating interference as noise.
pub fn user_rate(
    k: usize,
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<f64> {
    let a = effective_channel(k, rf, h, cfg);
    let signal = a.dotc(&dig.beamformers[k]).norm_sqr();
    let zeta = interference_plus_noise(k, rf, dig, h, cfg)?;
    Ok(phi(signal, zeta))
}

/// Fronthaul rate of RRH i: `log2 det(sum_k E_i^H v_k v_k^H E_i + Omega_i)
/// - log2 det(Omega_i)`. Requires Omega_i strictly positive definite.
pub fn fronthaul_rate(i: usize, dig: &DigitalDesign, cfg: &SystemConfig) -> Result<f64> {
    let n = cfg.n_rf_chains;
    let mut s = dig.omega[i].clone();
    for k in 0..cfg.n_ues {
        let c = dig.beamformers[k].rows(i * n, n);
        s += &c * c.adjoint();
    }
    let num = log2_det_hermitian(&s)?;
    let den = log2_det_hermitian(&dig.omega[i]).map_err(|_| {
        Error::Domain(format!("quantization covariance of RRH {i} is singular; keep Omega_i > 0"))
    })?;
    Ok(num - den)
}

/// Transmit power of RRH i: signal part plus forwarded quantization noise,
/// `sum_k ||V_Ri E_i^H v_k||^2 + tr(V_Ri Omega_i V_Ri^H)`.
pub fn transmit_power(i: usize, rf: &RfDesign, dig: &DigitalDesign, cfg: &SystemConfig) -> Result<f64> {
    check_dims(rf, dig, cfg)?;
    let n = cfg.n_rf_chains;
    let vri = &rf.beamformers[i];
    let mut p = 0.0;
    for k in 0..cfg.n_ues {
        let c = dig.beamformers[k].rows(i * n, n);
        p += (vri * c.into_owned()).norm_squared();
    }
    p += (vri * &dig.omega[i] * vri.adjoint()).trace().re;
    Ok(p)
}

/// All per-UE rates.
pub fn per_user_rates(
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<RateVector> {
    (0..cfg.n_ues).map(|k| user_rate(k, rf, dig, h, cfg)).collect()
}

/// Weighted sum-rate objective.
pub fn weighted_sum_rate(
    rf: &RfDesign,
    dig: &DigitalDesign,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<f64> {
    let rates = per_user_rates(rf, dig, h, cfg)?;
    Ok(rates.iter().zip(&cfg.weights).map(|(r, w)| r * w).sum())
}
