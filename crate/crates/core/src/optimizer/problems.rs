//! Packing of the complex decision variables into real coordinate vectors and
//! construction of the two inner convex subproblems.
//!
//! Complex scalars occupy two consecutive slots (re, im). Hermitian matrices
//! are stored as the real diagonal followed by (re, im) pairs of the strict
//! upper triangle. Objective/constraint gradients are Wirtinger-consistent:
//! for a real function of a complex coordinate z, the slots receive
//! `(2 Re dF/dz*, 2 Im dF/dz*)`.

use crate::channel::ChannelRealization;
use crate::linalg::hermitianize;
use crate::model::{effective_channel, DigitalDesign, ModulusState, RfDesign, SystemConfig};
use crate::subsolver::SmoothProblem;
use crate::wmmse::SurrogateState;
use crate::{CMat, CVec, Complex64};

/// Minimum eigenvalue kept between the quantization covariance and zero; the
/// fronthaul constraint reports +inf below the floor so the line search backs
/// off before the log-det degenerates.
pub(crate) const OMEGA_FLOOR: f64 = 1e-10;

const LN2: f64 = std::f64::consts::LN_2;

// ---------------------------------------------------------------------------
// real <-> complex packing

pub(crate) fn pack_cvec(v: &CVec, out: &mut Vec<f64>) {
    for z in v.iter() {
        out.push(z.re);
        out.push(z.im);
    }
}

pub(crate) fn unpack_cvec(x: &[f64], n: usize) -> CVec {
    CVec::from_fn(n, |i, _| Complex64::new(x[2 * i], x[2 * i + 1]))
}

/// Hermitian N x N: N real diagonal entries, then (re, im) per (a < b).
pub(crate) fn pack_hermitian(m: &CMat, out: &mut Vec<f64>) {
    let n = m.nrows();
    for a in 0..n {
        out.push(m[(a, a)].re);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(m[(a, b)].re);
            out.push(m[(a, b)].im);
        }
    }
}

pub(crate) fn unpack_hermitian(x: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for a in 0..n {
        m[(a, a)] = Complex64::new(x[a], 0.0);
    }
    let mut idx = n;
    for a in 0..n {
        for b in (a + 1)..n {
            let z = Complex64::new(x[idx], x[idx + 1]);
            idx += 2;
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
        }
    }
    m
}

pub(crate) fn hermitian_len(n: usize) -> usize {
    n * n
}

/// Adds the gradient of `tr(S * Omega)` (S Hermitian) with `scale` into the
/// Hermitian parameter slots starting at `base`.
fn add_hermitian_grad(grad: &mut [f64], base: usize, s: &CMat, scale: f64) {
    let n = s.nrows();
    for a in 0..n {
        grad[base + a] += scale * s[(a, a)].re;
    }
    let mut idx = base + n;
    for a in 0..n {
        for b in (a + 1)..n {
            grad[idx] += scale * 2.0 * s[(a, b)].re;
            grad[idx + 1] += scale * 2.0 * s[(a, b)].im;
            idx += 2;
        }
    }
}

/// Adds `scale * (2Re g, 2Im g)` for a complex cogradient vector into the
/// interleaved slots starting at `base`.
fn add_cvec_grad(grad: &mut [f64], base: usize, g: &CVec, scale: f64) {
    for (i, z) in g.iter().enumerate() {
        grad[base + 2 * i] += scale * 2.0 * z.re;
        grad[base + 2 * i + 1] += scale * 2.0 * z.im;
    }
}

// ---------------------------------------------------------------------------
// digital subproblem

/// Variable layout of the digital step: all beamformers, then all Hermitian
/// quantization covariances.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DigitalLayout {
    pub n_ues: usize,
    pub n_bar: usize,
    pub n_rrhs: usize,
    pub n_rf: usize,
}

impl DigitalLayout {
    pub fn of(cfg: &SystemConfig) -> Self {
        DigitalLayout {
            n_ues: cfg.n_ues,
            n_bar: cfg.n_bar(),
            n_rrhs: cfg.n_rrhs,
            n_rf: cfg.n_rf_chains,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_ues * self.n_bar + self.n_rrhs * hermitian_len(self.n_rf)
    }

    pub fn beamformer_base(&self, k: usize) -> usize {
        2 * k * self.n_bar
    }

    pub fn omega_base(&self, i: usize) -> usize {
        2 * self.n_ues * self.n_bar + i * hermitian_len(self.n_rf)
    }

    pub fn pack(&self, dig: &DigitalDesign) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for v in &dig.beamformers {
            pack_cvec(v, &mut x);
        }
        for o in &dig.omega {
            pack_hermitian(o, &mut x);
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> DigitalDesign {
        let beamformers = (0..self.n_ues)
            .map(|k| unpack_cvec(&x[self.beamformer_base(k)..], self.n_bar))
            .collect();
        let omega = (0..self.n_rrhs)
            .map(|i| unpack_hermitian(&x[self.omega_base(i)..], self.n_rf))
            .collect();
        DigitalDesign { beamformers, omega }
    }
}

/// Fixed data of one digital subproblem (Algorithm 1 step 5): effective
/// channels, surrogate coefficients and the per-RRH constraint matrices.
pub(crate) struct DigitalProblemData {
    pub layout: DigitalLayout,
    /// Effective channels a_k = V̄_R^H h_k.
    pub eff: Vec<CVec>,
    /// Receive coefficients u_k.
    pub u: Vec<Complex64>,
    /// beta_k = w_k * w̃_k / ln2 (coefficient of -e_k in bits).
    pub beta: Vec<f64>,
    /// Constant term: sum_k (w_k/ln2)(ln w̃_k + 1).
    pub constant: f64,
    /// Inverses of the linearization points Sigma_i.
    pub sigma_inv: Vec<CMat>,
    /// log2 det Sigma_i - N/ln2 - C_i, the constant part of each fronthaul
    /// surrogate constraint.
    pub fronthaul_const: Vec<f64>,
    /// Gram matrices W_i = V_Ri^H V_Ri of the fixed RF blocks.
    pub rf_gram: Vec<CMat>,
    /// Power budgets.
    pub power: Vec<f64>,
    /// Regularization weight and linearization points (only read when rho > 0).
    pub rho: f64,
    pub sigma: Vec<CMat>,
}

impl DigitalProblemData {
    pub fn new(
        rf: &RfDesign,
        h: &ChannelRealization,
        state: &SurrogateState,
        cfg: &SystemConfig,
    ) -> crate::Result<Self> {
        let layout = DigitalLayout::of(cfg);
        let eff: Vec<CVec> = (0..cfg.n_ues).map(|k| effective_channel(k, rf, h, cfg)).collect();
        let beta: Vec<f64> =
            (0..cfg.n_ues).map(|k| cfg.weights[k] * state.w_tilde[k] / LN2).collect();
        let constant: f64 = (0..cfg.n_ues)
            .map(|k| cfg.weights[k] / LN2 * (state.w_tilde[k].ln() + 1.0))
            .sum();
        let mut sigma_inv = Vec::with_capacity(cfg.n_rrhs);
        let mut fronthaul_const = Vec::with_capacity(cfg.n_rrhs);
        for i in 0..cfg.n_rrhs {
            sigma_inv.push(crate::linalg::invert_hermitian(&state.sigma[i])?);
            let ld = crate::linalg::log2_det_hermitian(&state.sigma[i])?;
            fronthaul_const.push(ld - cfg.n_rf_chains as f64 / LN2 - cfg.fronthaul[i]);
        }
        let rf_gram = rf.beamformers.iter().map(|v| v.adjoint() * v).collect();
        Ok(DigitalProblemData {
            layout,
            eff,
            u: state.u.clone(),
            beta,
            constant,
            sigma_inv,
            fronthaul_const,
            rf_gram,
            power: cfg.power.clone(),
            rho: state.rho,
            sigma: state.sigma.clone(),
        })
    }

    /// Eq. 18a objective value and gradient at the packed point.
    fn objective(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let v: Vec<CVec> =
            (0..l.n_ues).map(|k| unpack_cvec(&x[l.beamformer_base(k)..], l.n_bar)).collect();
        let omega: Vec<CMat> =
            (0..l.n_rrhs).map(|i| unpack_hermitian(&x[l.omega_base(i)..], l.n_rf)).collect();

        let mut value = self.constant;
        for k in 0..l.n_ues {
            let a = &self.eff[k];
            let u = self.u[k];
            let beta = self.beta[k];
            // Residual of the desired symbol.
            let s_kk = a.dotc(&v[k]);
            let r = Complex64::new(1.0, 0.0) - u.conj() * s_kk;
            // zeta: interference + quantization + thermal noise.
            let mut zeta = 1.0;
            for (ll, vl) in v.iter().enumerate() {
                if ll != k {
                    zeta += a.dotc(vl).norm_sqr();
                }
            }
            for i in 0..l.n_rrhs {
                let ai = a.rows(i * l.n_rf, l.n_rf);
                zeta += (ai.adjoint() * &omega[i] * ai)[(0, 0)].re;
            }
            value -= beta * (r.norm_sqr() + u.norm_sqr() * zeta);

            if let Some(g) = grad.as_deref_mut() {
                // d/dv_k* of |r|^2 is -r u a.
                add_cvec_grad(g, l.beamformer_base(k), &(a * (r * u)), beta);
                // d/dv_l* of |a^H v_l|^2 is a (a^H v_l).
                for (ll, vl) in v.iter().enumerate() {
                    if ll != k {
                        let coeff = a.dotc(vl);
                        add_cvec_grad(g, l.beamformer_base(ll), &(a * coeff), -beta * u.norm_sqr());
                    }
                }
                for i in 0..l.n_rrhs {
                    let ai = a.rows(i * l.n_rf, l.n_rf).into_owned();
                    let s = &ai * ai.adjoint();
                    add_hermitian_grad(g, l.omega_base(i), &s, -beta * u.norm_sqr());
                }
            }
        }

        if self.rho != 0.0 {
            for i in 0..l.n_rrhs {
                let mut phi = omega[i].clone();
                for vk in &v {
                    let c = vk.rows(i * l.n_rf, l.n_rf);
                    phi += &c * c.adjoint();
                }
                let d = hermitianize(&(phi - &self.sigma[i]));
                value -= self.rho * d.norm_squared();
                if let Some(g) = grad.as_deref_mut() {
                    for (k, vk) in v.iter().enumerate() {
                        let c = vk.rows(i * l.n_rf, l.n_rf).into_owned();
                        let mut cog = CVec::zeros(l.n_bar);
                        cog.rows_mut(i * l.n_rf, l.n_rf).copy_from(&(&d * &c * Complex64::new(2.0, 0.0)));
                        add_cvec_grad(g, l.beamformer_base(k), &cog, -self.rho);
                    }
                    add_hermitian_grad(g, l.omega_base(i), &(&d * Complex64::new(2.0, 0.0)), -self.rho);
                }
            }
        }
        value
    }

    /// Fronthaul surrogate constraint of RRH i: g̃_i - C_i <= 0. Returns +inf
    /// when Omega_i sits below the eigenvalue floor.
    fn fronthaul_constraint(&self, i: usize, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        let omega = unpack_hermitian(&x[l.omega_base(i)..], l.n_rf);
        let floored = &omega - CMat::identity(l.n_rf, l.n_rf) * Complex64::new(OMEGA_FLOOR, 0.0);
        if crate::linalg::hermitian_cholesky(&floored).is_none() {
            return f64::INFINITY;
        }
        let lfac = match crate::linalg::hermitian_cholesky(&omega) {
            Some(f) => f,
            None => return f64::INFINITY,
        };
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }

        let q = &self.sigma_inv[i];
        let mut value = self.fronthaul_const[i];
        // Quadratic beamformer load through Sigma^-1.
        for k in 0..l.n_ues {
            let vk = unpack_cvec(&x[l.beamformer_base(k)..], l.n_bar);
            let c = vk.rows(i * l.n_rf, l.n_rf).into_owned();
            let qc = q * &c;
            value += c.dotc(&qc).re / LN2;
            if let Some(g) = grad.as_deref_mut() {
                let mut cog = CVec::zeros(l.n_bar);
                cog.rows_mut(i * l.n_rf, l.n_rf).copy_from(&qc);
                add_cvec_grad(g, l.beamformer_base(k), &cog, 1.0 / LN2);
            }
        }
        // tr(Sigma^-1 Omega) - log2 det Omega.
        value += (q.clone() * &omega).trace().re / LN2 - crate::linalg::log2_det_from_factor(&lfac);
        if let Some(g) = grad.as_deref_mut() {
            let eye = CMat::identity(l.n_rf, l.n_rf);
            let omega_inv = crate::linalg::cholesky_solve(&lfac, &eye);
            let s = q - omega_inv;
            add_hermitian_grad(g, l.omega_base(i), &s, 1.0 / LN2);
        }
        value
    }

    /// Power constraint of RRH i: p_i - P_i <= 0.
    fn power_constraint(&self, i: usize, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let w = &self.rf_gram[i];
        let mut value = -self.power[i];
        for k in 0..l.n_ues {
            let vk = unpack_cvec(&x[l.beamformer_base(k)..], l.n_bar);
            let c = vk.rows(i * l.n_rf, l.n_rf).into_owned();
            let wc = w * &c;
            value += c.dotc(&wc).re;
            if let Some(g) = grad.as_deref_mut() {
                let mut cog = CVec::zeros(l.n_bar);
                cog.rows_mut(i * l.n_rf, l.n_rf).copy_from(&wc);
                add_cvec_grad(g, l.beamformer_base(k), &cog, 1.0);
            }
        }
        let omega = unpack_hermitian(&x[l.omega_base(i)..], l.n_rf);
        value += (w * &omega).trace().re;
        if let Some(g) = grad.as_deref_mut() {
            add_hermitian_grad(g, l.omega_base(i), w, 1.0);
        }
        value
    }

    /// Assembles the boxed problem around this data.
    pub fn problem<'a>(&'a self, x0: Vec<f64>) -> SmoothProblem<'a> {
        let mut constraints: Vec<crate::subsolver::ValueGrad<'a>> = Vec::new();
        for i in 0..self.layout.n_rrhs {
            constraints.push(Box::new(move |x: &[f64], g: Option<&mut [f64]>| {
                self.fronthaul_constraint(i, x, g)
            }));
            constraints
                .push(Box::new(move |x: &[f64], g: Option<&mut [f64]>| self.power_constraint(i, x, g)));
        }
        SmoothProblem {
            dim: self.layout.dim(),
            objective: Box::new(move |x: &[f64], g: Option<&mut [f64]>| self.objective(x, g)),
            constraints,
            x0,
        }
    }
}

// ---------------------------------------------------------------------------
// RF subproblem

/// Variable layout of the RF step: the per-RRH M x N matrices, row-major,
/// interleaved re/im.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RfLayout {
    pub n_rrhs: usize,
    pub m: usize,
    pub n: usize,
}

impl RfLayout {
    pub fn of(cfg: &SystemConfig) -> Self {
        RfLayout { n_rrhs: cfg.n_rrhs, m: cfg.m_antennas, n: cfg.n_rf_chains }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_rrhs * self.m * self.n
    }

    pub fn block_base(&self, i: usize) -> usize {
        2 * i * self.m * self.n
    }

    pub fn entry_base(&self, i: usize, a: usize, b: usize) -> usize {
        self.block_base(i) + 2 * (a * self.n + b)
    }

    pub fn pack(&self, rf: &RfDesign) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for block in &rf.beamformers {
            for a in 0..self.m {
                for b in 0..self.n {
                    x.push(block[(a, b)].re);
                    x.push(block[(a, b)].im);
                }
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64], state: ModulusState) -> RfDesign {
        let beamformers = (0..self.n_rrhs)
            .map(|i| {
                CMat::from_fn(self.m, self.n, |a, b| {
                    let base = self.entry_base(i, a, b);
                    Complex64::new(x[base], x[base + 1])
                })
            })
            .collect();
        RfDesign { beamformers, modulus_state: state }
    }
}

/// Fixed data of one RF subproblem (Algorithm 2 step 4).
pub(crate) struct RfProblemData {
    pub layout: RfLayout,
    /// Channel vectors h_{k,i}.
    pub h: Vec<Vec<CVec>>,
    /// Digital blocks c_{l,i} = E_i^H v_l.
    pub blocks: Vec<Vec<CVec>>,
    /// Quantization covariances.
    pub omega: Vec<CMat>,
    /// K_i = sum_k c_{k,i} c_{k,i}^H + Omega_i, the power-constraint kernel.
    pub power_kernel: Vec<CMat>,
    pub u: Vec<Complex64>,
    pub beta: Vec<f64>,
    pub constant: f64,
    pub power: Vec<f64>,
}

impl RfProblemData {
    pub fn new(
        dig: &DigitalDesign,
        h: &ChannelRealization,
        state: &SurrogateState,
        cfg: &SystemConfig,
    ) -> Self {
        let layout = RfLayout::of(cfg);
        let blocks: Vec<Vec<CVec>> = (0..cfg.n_ues)
            .map(|k| (0..cfg.n_rrhs).map(|i| dig.block(k, i, cfg.n_rf_chains)).collect())
            .collect();
        let power_kernel: Vec<CMat> = (0..cfg.n_rrhs)
            .map(|i| {
                let mut kmat = dig.omega[i].clone();
                for blk in blocks.iter() {
                    kmat += &blk[i] * blk[i].adjoint();
                }
                kmat
            })
            .collect();
        let beta: Vec<f64> =
            (0..cfg.n_ues).map(|k| cfg.weights[k] * state.w_tilde[k] / LN2).collect();
        let constant: f64 = (0..cfg.n_ues)
            .map(|k| cfg.weights[k] / LN2 * (state.w_tilde[k].ln() + 1.0))
            .sum();
        RfProblemData {
            layout,
            h: h.h.clone(),
            blocks,
            omega: dig.omega.clone(),
            power_kernel,
            u: state.u.clone(),
            beta,
            constant,
            power: cfg.power.clone(),
        }
    }

    fn unpack_blocks(&self, x: &[f64]) -> Vec<CMat> {
        let l = &self.layout;
        (0..l.n_rrhs)
            .map(|i| {
                CMat::from_fn(l.m, l.n, |a, b| {
                    let base = l.entry_base(i, a, b);
                    Complex64::new(x[base], x[base + 1])
                })
            })
            .collect()
    }

    /// Eq. 21a objective value and gradient.
    fn objective(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let vr = self.unpack_blocks(x);
        let n_ues = self.u.len();

        // s[k][l] = h_k^H V̄_R v_l.
        let mut value = self.constant;
        for k in 0..n_ues {
            let u = self.u[k];
            let beta = self.beta[k];
            let mut s = vec![Complex64::new(0.0, 0.0); n_ues];
            for (ll, s_l) in s.iter_mut().enumerate() {
                for i in 0..l.n_rrhs {
                    *s_l += (self.h[k][i].adjoint() * &vr[i] * &self.blocks[ll][i])[(0, 0)];
                }
            }
            let r = Complex64::new(1.0, 0.0) - u.conj() * s[k];
            let mut zeta = 1.0;
            for (ll, s_l) in s.iter().enumerate() {
                if ll != k {
                    zeta += s_l.norm_sqr();
                }
            }
            // Forwarded quantization noise: sum_i h^H V Omega V^H h.
            let mut vh: Vec<CVec> = Vec::with_capacity(l.n_rrhs);
            for i in 0..l.n_rrhs {
                vh.push(vr[i].adjoint() * &self.h[k][i]);
            }
            for i in 0..l.n_rrhs {
                zeta += (vh[i].adjoint() * &self.omega[i] * &vh[i])[(0, 0)].re;
            }
            value -= beta * (r.norm_sqr() + u.norm_sqr() * zeta);

            if let Some(g) = grad.as_deref_mut() {
                for i in 0..l.n_rrhs {
                    // |r|^2 term: cogradient -r u h c^H (for the desired UE).
                    let mut cog = &self.h[k][i] * self.blocks[k][i].adjoint() * (r * u);
                    // Interference terms.
                    for ll in 0..n_ues {
                        if ll != k {
                            cog -= &self.h[k][i]
                                * self.blocks[ll][i].adjoint()
                                * (s[ll] * u.norm_sqr());
                        }
                    }
                    // Quantization term: cogradient h (h^H V Omega).
                    cog -= &self.h[k][i]
                        * (self.omega[i].clone() * &vh[i]).adjoint()
                        * Complex64::new(u.norm_sqr(), 0.0);
                    add_matrix_grad(g, l, i, &cog, beta);
                }
            }
        }
        value
    }

    /// Power constraint of RRH i: tr(V K V^H) - P_i <= 0.
    fn power_constraint(&self, i: usize, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let l = &self.layout;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let vr = CMat::from_fn(l.m, l.n, |a, b| {
            let base = l.entry_base(i, a, b);
            Complex64::new(x[base], x[base + 1])
        });
        let vk = &vr * &self.power_kernel[i];
        let value = vk.dotc(&vr).re - self.power[i];
        if let Some(g) = grad.as_deref_mut() {
            add_matrix_grad(g, l, i, &vk, 1.0);
        }
        value
    }

    /// Relaxed modulus constraint for entry (i, a, b): |V(a,b)|^2 - 1 <= 0.
    fn modulus_constraint(&self, i: usize, a: usize, b: usize, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let base = self.layout.entry_base(i, a, b);
        let (re, im) = (x[base], x[base + 1]);
        if let Some(g) = grad {
            g.fill(0.0);
            g[base] = 2.0 * re;
            g[base + 1] = 2.0 * im;
        }
        re * re + im * im - 1.0
    }

    pub fn problem<'a>(&'a self, x0: Vec<f64>) -> SmoothProblem<'a> {
        let l = self.layout;
        let mut constraints: Vec<crate::subsolver::ValueGrad<'a>> = Vec::new();
        for i in 0..l.n_rrhs {
            constraints
                .push(Box::new(move |x: &[f64], g: Option<&mut [f64]>| self.power_constraint(i, x, g)));
        }
        for i in 0..l.n_rrhs {
            for a in 0..l.m {
                for b in 0..l.n {
                    constraints.push(Box::new(move |x: &[f64], g: Option<&mut [f64]>| {
                        self.modulus_constraint(i, a, b, x, g)
                    }));
                }
            }
        }
        SmoothProblem {
            dim: l.dim(),
            objective: Box::new(move |x: &[f64], g: Option<&mut [f64]>| self.objective(x, g)),
            constraints,
            x0,
        }
    }
}

/// Adds `scale * (2Re G, 2Im G)` of an M x N complex cogradient into the
/// slots of RF block i. `cog` accumulates d/dV* contributions; the objective
/// is maximized so callers pass the sign through `scale`.
fn add_matrix_grad(grad: &mut [f64], l: &RfLayout, i: usize, cog: &CMat, scale: f64) {
    for a in 0..l.m {
        for b in 0..l.n {
            let base = l.entry_base(i, a, b);
            grad[base] += scale * 2.0 * cog[(a, b)].re;
            grad[base + 1] += scale * 2.0 * cog[(a, b)].im;
        }
    }
}
