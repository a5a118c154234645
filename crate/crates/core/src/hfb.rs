//! Renormalized HFB dynamics for the reduced fields (φ, γ, σ).
//!
//! The total fields carry the condensate as a delta mass at p = 0,
//!
//!   Γ = (1+2f₊)γ + f₊ + N|Λ||φ|²δ,   Σ = (1+2f₊)σ + N|Λ|φ²δ,
//!
//! with δ = |Λ|δ_{p,0}. Convolutions against the delta mass are done
//! analytically: (N|Λ||φ|²δ * ĥ)(p) = N|Λ||φ|²ĥ(p).

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::dispersion;
use crate::error::{Error, Result};
use crate::lattice::{convolve_kernel, integrate, lp_norm, ComplexField, LatticeGrid, RealField};
use crate::potential::Potential;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Tolerated negative excursion of γ before a run is failed.
pub const GAMMA_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    LawsonRk4,
}

#[derive(Debug, Clone)]
pub struct HfbConfig {
    pub lambda: f64,
    pub n: f64,
    pub order: Order,
    pub f_plus: RealField,
    pub dt: f64,
    pub integrator: Integrator,
}

impl HfbConfig {
    pub fn new(lambda: f64, n: f64, order: Order, f_plus: RealField, dt: f64, integrator: Integrator) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda = {lambda}, need λ ≥ 0")));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Invalid(format!("N = {n}, need N > 0")));
        }
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::Invalid(format!("dt = {dt}, need dt ≥ 0")));
        }
        if let Some(i) = f_plus.values().iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Invalid(format!("f₊ = {} at n = {:?}, need f₊ ≥ 0", f_plus.at(i), f_plus.grid().n_slice(i))));
        }
        if !f_plus.is_even(1e-14 * (1.0 + f_plus.max_abs())) {
            return Err(Error::Invalid("f₊ must be even".into()));
        }
        Ok(Self { lambda, n, order, f_plus, dt, integrator })
    }

    pub fn grid(&self) -> &Arc<LatticeGrid> {
        self.f_plus.grid()
    }

    /// f₊ as seen by the equations: zero for the first-order system.
    pub fn effective_f_plus(&self) -> RealField {
        match self.order {
            Order::First => RealField::zeros(self.grid()),
            Order::Second => self.f_plus.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HfbState {
    pub t: f64,
    pub phi: C64,
    pub gamma: RealField,
    pub sigma: ComplexField,
}

impl HfbState {
    pub fn grid(&self) -> &Arc<LatticeGrid> {
        self.gamma.grid()
    }

    /// max_p ||σ|² − γ(1+γ)|.
    pub fn relation_error(&self) -> f64 {
        self.gamma
            .values()
            .iter()
            .zip(self.sigma.values())
            .map(|(&g, s)| (s.norm_sqr() - g * (1.0 + g)).abs())
            .fold(0.0, f64::max)
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn evenness_error(&self) -> f64 {
        self.gamma.evenness_error().max(self.sigma.evenness_error())
    }
}

/// Time derivative of an [`HfbState`].
#[derive(Debug, Clone, PartialEq)]
pub struct HfbRate {
    pub dphi: C64,
    pub dgamma: RealField,
    pub dsigma: ComplexField,
}

/// Truncated fields plus the delta-mass coefficients of the total fields.
#[derive(Debug, Clone)]
pub struct AssembledFields {
    pub gamma_t: RealField,
    pub sigma_t: ComplexField,
    /// Coefficient N|Λ||φ|² of δ in Γ.
    pub gamma_mass: f64,
    /// Coefficient N|Λ|φ² of δ in Σ.
    pub sigma_mass: C64,
}

impl AssembledFields {
    /// Γ as a lattice field, the delta realized as |Λ|δ_{p,0}.
    pub fn gamma(&self) -> RealField {
        let grid = self.gamma_t.grid();
        let mut g = self.gamma_t.clone();
        g.values_mut()[grid.origin()] += self.gamma_mass * grid.volume();
        g
    }

    pub fn sigma(&self) -> ComplexField {
        let grid = self.sigma_t.grid();
        let mut s = self.sigma_t.clone();
        s.values_mut()[grid.origin()] += self.sigma_mass * grid.volume();
        s
    }

    /// max_p (|Σᵀ|² − (Γᵀ+1)Γᵀ) and min_p Γᵀ.
    pub fn cone(&self) -> ConeReport {
        let mut min_gamma_t = f64::INFINITY;
        let mut max_excess = f64::NEG_INFINITY;
        for (&g, s) in self.gamma_t.values().iter().zip(self.sigma_t.values()) {
            min_gamma_t = min_gamma_t.min(g);
            max_excess = max_excess.max(s.norm_sqr() - (g + 1.0) * g);
        }
        ConeReport { min_gamma_t, max_excess }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeReport {
    pub min_gamma_t: f64,
    pub max_excess: f64,
}

impl ConeReport {
    pub fn holds(&self, gamma_tol: f64, excess_tol: f64) -> bool {
        self.min_gamma_t >= -gamma_tol && self.max_excess <= excess_tol
    }
}

pub fn assemble_totals(state: &HfbState, config: &HfbConfig) -> AssembledFields {
    let grid = state.grid();
    let fp = config.effective_f_plus();
    let vol = grid.volume();
    let gamma_t = RealField::from_fn(grid, |i| (1.0 + 2.0 * fp.at(i)) * state.gamma.at(i) + fp.at(i));
    let sigma_t = ComplexField::from_fn(grid, |i| state.sigma.at(i) * (1.0 + 2.0 * fp.at(i)));
    AssembledFields {
        gamma_t,
        sigma_t,
        gamma_mass: config.n * vol * state.phi.norm_sqr(),
        sigma_mass: state.phi * state.phi * (config.n * vol),
    }
}

#[derive(Clone)]
pub(crate) struct Vars {
    pub phi: C64,
    pub gamma: Vec<f64>,
    pub sigma: Vec<C64>,
}

impl Vars {
    fn from_state(s: &HfbState) -> Self {
        Self {
            phi: s.phi,
            gamma: s.gamma.values().to_vec(),
            sigma: s.sigma.values().to_vec(),
        }
    }

    fn axpy(&self, h: f64, k: &Vars) -> Vars {
        Vars {
            phi: self.phi + k.phi * h,
            gamma: self.gamma.iter().zip(&k.gamma).map(|(a, b)| a + h * b).collect(),
            sigma: self.sigma.iter().zip(&k.sigma).map(|(a, b)| a + b * h).collect(),
        }
    }

    fn rotate(&self, factors: &[C64]) -> Vars {
        Vars {
            phi: self.phi,
            gamma: self.gamma.clone(),
            sigma: self.sigma.iter().zip(factors).map(|(s, e)| s * e).collect(),
        }
    }
}

/// The equations of motion with all per-run constants precomputed.
pub(crate) struct Model<'a> {
    grid: &'a Arc<LatticeGrid>,
    lambda: f64,
    n: f64,
    vol: f64,
    v0: f64,
    kinetic: Vec<f64>,
    vhat: &'a [f64],
    w: Vec<f64>,
    fp: Vec<f64>,
    a: Vec<f64>,
}

impl<'a> Model<'a> {
    pub fn new(config: &'a HfbConfig, pot: &'a Potential) -> Result<Self> {
        let grid = config.grid();
        if !grid.same_as(pot.grid()) {
            return Err(Error::GridMismatch);
        }
        let fp = config.effective_f_plus().into_values();
        let vhat = pot.values();
        let v0 = pot.v0();
        Ok(Self {
            grid,
            lambda: config.lambda,
            n: config.n,
            vol: grid.volume(),
            v0,
            kinetic: (0..grid.len()).map(|i| grid.kinetic(i)).collect(),
            vhat,
            w: vhat.iter().map(|v| v + v0).collect(),
            a: fp.iter().map(|f| 1.0 + 2.0 * f).collect(),
            fp,
        })
    }

    pub fn kinetic(&self) -> &[f64] {
        &self.kinetic
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// (Γ*(v̂+v̂(0)))/N and (Σ*v̂)/N with the delta masses folded in analytically.
    pub fn mean(&self, phi: C64, gamma: &[f64], sigma: &[C64]) -> (Vec<f64>, Vec<C64>) {
        let gt: Vec<f64> = (0..gamma.len()).map(|i| self.a[i] * gamma[i] + self.fp[i]).collect();
        let st: Vec<C64> = (0..sigma.len()).map(|i| sigma[i] * self.a[i]).collect();
        let mut cg = convolve_kernel(self.grid, &gt, &self.w);
        let mut cs = convolve_kernel(self.grid, &st, self.vhat);
        let m = self.vol * phi.norm_sqr();
        let s = phi * phi * self.vol;
        let inv_n = 1.0 / self.n;
        for i in 0..cg.len() {
            cg[i] = cg[i] * inv_n + m * self.w[i];
            cs[i] = cs[i] * inv_n + s * self.vhat[i];
        }
        (cg, cs)
    }

    fn rate(&self, u: &Vars, linear: bool) -> Vars {
        let lam = self.lambda;
        let (cg, cs) = self.mean(u.phi, &u.gamma, &u.sigma);
        let o = self.grid.origin();
        let phi = u.phi;
        let dphi = -I * lam * (phi * cg[o] + phi.conj() * cs[o] - phi * (2.0 * self.vol * self.v0 * phi.norm_sqr()));
        let mut dgamma = Vec::with_capacity(u.gamma.len());
        let mut dsigma = Vec::with_capacity(u.sigma.len());
        for i in 0..u.gamma.len() {
            let s = u.sigma[i];
            dgamma.push(2.0 * lam * (cs[i] * s.conj()).im);
            let e = if linear { self.kinetic[i] } else { 0.0 };
            dsigma.push(-I * (s * (2.0 * (e + lam * cg[i])) + cs[i] * (lam * (1.0 + 2.0 * u.gamma[i]))));
        }
        Vars { phi: dphi, gamma: dgamma, sigma: dsigma }
    }

    fn rk4(&self, u: &Vars, h: f64) -> Vars {
        let k1 = self.rate(u, true);
        let k2 = self.rate(&u.axpy(0.5 * h, &k1), true);
        let k3 = self.rate(&u.axpy(0.5 * h, &k2), true);
        let k4 = self.rate(&u.axpy(h, &k3), true);
        let mut out = u.axpy(h / 6.0, &k1);
        out = out.axpy(h / 3.0, &k2);
        out = out.axpy(h / 3.0, &k3);
        out.axpy(h / 6.0, &k4)
    }

    /// Runge-Kutta in the frame σ̃ = e^{2iEt}σ; the free rotation is applied exactly.
    fn lawson_rk4(&self, u: &Vars, h: f64) -> Vars {
        let half: Vec<C64> = self.kinetic.iter().map(|e| C64::from_polar(1.0, -e * h)).collect();
        let full: Vec<C64> = self.kinetic.iter().map(|e| C64::from_polar(1.0, -2.0 * e * h)).collect();
        let k1 = self.rate(u, false);
        let k2 = self.rate(&u.axpy(0.5 * h, &k1).rotate(&half), false);
        let uh = u.rotate(&half);
        let k3 = self.rate(&uh.axpy(0.5 * h, &k2), false);
        let uf = u.rotate(&full);
        let k4 = self.rate(&uf.axpy(h, &k3.rotate(&half)), false);
        let mut out = uf.axpy(h / 6.0, &k1.rotate(&full));
        out = out.axpy(h / 3.0, &k2.rotate(&half));
        out = out.axpy(h / 3.0, &k3.rotate(&half));
        out.axpy(h / 6.0, &k4)
    }

    pub(crate) fn advance(&self, u: &Vars, h: f64, integrator: Integrator) -> Vars {
        match integrator {
            Integrator::Rk4 => self.rk4(u, h),
            Integrator::LawsonRk4 => self.lawson_rk4(u, h),
        }
    }
}

fn into_state(grid: &Arc<LatticeGrid>, t: f64, u: Vars) -> HfbState {
    HfbState {
        t,
        phi: u.phi,
        gamma: RealField::new(grid, u.gamma).expect("length preserved"),
        sigma: ComplexField::new(grid, u.sigma).expect("length preserved"),
    }
}

fn validate(state: &HfbState, step: usize) -> Result<()> {
    let grid = state.grid();
    let n_of = |i: usize| grid.n_slice(i).to_vec();
    if !(state.phi.re.is_finite() && state.phi.im.is_finite()) {
        return Err(Error::NonFinite { field: "phi", n: vec![0; grid.dim()], step });
    }
    if let Some(i) = state.gamma.first_non_finite() {
        return Err(Error::NonFinite { field: "gamma", n: n_of(i), step });
    }
    if let Some(i) = state.sigma.first_non_finite() {
        return Err(Error::NonFinite { field: "sigma", n: n_of(i), step });
    }
    if let Some(i) = state.gamma.values().iter().position(|&g| g < GAMMA_FLOOR) {
        return Err(Error::NegativeGamma { value: state.gamma.at(i), n: n_of(i), step });
    }
    Ok(())
}

pub fn hfb_rhs(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<HfbRate> {
    let model = Model::new(config, pot)?;
    let k = model.rate(&Vars::from_state(state), true);
    let grid = state.grid();
    Ok(HfbRate {
        dphi: k.phi,
        dgamma: RealField::new(grid, k.gamma)?,
        dsigma: ComplexField::new(grid, k.sigma)?,
    })
}

/// (Γ*(v̂+v̂(0)))/N and (Σ*v̂)/N, so that h_Γ = E + λ·first and h_Σ = λ·second.
pub fn mean_fields(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<(RealField, ComplexField)> {
    let model = Model::new(config, pot)?;
    let (cg, cs) = model.mean(state.phi, state.gamma.values(), state.sigma.values());
    let grid = state.grid();
    Ok((RealField::new(grid, cg)?, ComplexField::new(grid, cs)?))
}

pub fn step(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<HfbState> {
    let model = Model::new(config, pot)?;
    let next = model.advance(&Vars::from_state(state), config.dt, config.integrator);
    let out = into_state(state.grid(), state.t + config.dt, next);
    validate(&out, 1)?;
    Ok(out)
}

/// Stored trajectory on the uniform grid t_k = k·dt.
#[derive(Debug, Clone)]
pub struct HfbHistory {
    pub config: HfbConfig,
    pub states: Vec<HfbState>,
    /// Ω at every stored step.
    pub omegas: Vec<RealField>,
}

impl HfbHistory {
    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> &Arc<LatticeGrid> {
        self.config.grid()
    }

    pub fn last(&self) -> &HfbState {
        self.states.last().expect("history is never empty")
    }

    /// Every `stride`-th sample (always including step 0).
    pub fn subsample(&self, stride: usize) -> HfbHistory {
        let stride = stride.max(1);
        let mut config = self.config.clone();
        config.dt *= stride as f64;
        HfbHistory {
            config,
            states: self.states.iter().step_by(stride).cloned().collect(),
            omegas: self.omegas.iter().step_by(stride).cloned().collect(),
        }
    }
}

/// Number of steps covering [0, T]; T must be a multiple of dt up to rounding.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Invalid(format!("T = {t_final}, need T ≥ 0")));
    }
    if t_final == 0.0 {
        return Ok(0);
    }
    if dt <= 0.0 {
        return Err(Error::Invalid("dt must be > 0 for T > 0".into()));
    }
    let k = (t_final / dt).round();
    if ((k * dt - t_final) / t_final).abs() > 1e-9 {
        return Err(Error::Invalid(format!("T = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

pub fn evolve(
    state0: &HfbState,
    t_final: f64,
    config: &HfbConfig,
    pot: &Potential,
    observer: &mut dyn FnMut(usize, &HfbState),
) -> Result<HfbHistory> {
    let steps = step_count(t_final, config.dt)?;
    let model = Model::new(config, pot)?;
    let grid = state0.grid();
    validate(state0, 0)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut omegas = Vec::with_capacity(steps + 1);
    let mut u = Vars::from_state(state0);
    observer(0, state0);
    omegas.push(dispersion::omega_with(&model, state0)?);
    states.push(state0.clone());
    for k in 1..=steps {
        u = model.advance(&u, config.dt, config.integrator);
        let s = into_state(grid, state0.t + k as f64 * config.dt, u.clone());
        validate(&s, k)?;
        observer(k, &s);
        omegas.push(dispersion::omega_with(&model, &s)?);
        states.push(s);
    }
    Ok(HfbHistory { config: config.clone(), states, omegas })
}

/// How φ₀ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi0 {
    /// |Λ|^{−1/2}.
    Uniform,
    Value(C64),
}

/// Thermal data f₀ = 1/(e^{βE+κ₀} − 1), γ₀ = scale·f₀, σ₀ = √(γ₀(1+γ₀)).
pub fn initial_data(
    grid: &Arc<LatticeGrid>,
    beta: f64,
    kappa0: f64,
    gamma_scale: f64,
    phi0: Phi0,
) -> Result<(HfbState, RealField)> {
    if !(kappa0 > 0.0 && kappa0.is_finite()) {
        return Err(Error::Invalid(format!("kappa0 = {kappa0}, need κ₀ > 0")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("beta = {beta}, need β ≥ 0")));
    }
    if !(gamma_scale >= 0.0 && gamma_scale.is_finite()) {
        return Err(Error::Invalid(format!("gamma_scale = {gamma_scale}, need ≥ 0")));
    }
    let f0 = RealField::from_fn(grid, |i| 1.0 / (beta * grid.kinetic(i) + kappa0).exp_m1());
    let gamma = f0.map(|f| gamma_scale * f);
    let sigma = gamma.map(|g| C64::new((g * (1.0 + g)).sqrt(), 0.0));
    let phi = match phi0 {
        Phi0::Uniform => C64::new(grid.volume().powf(-0.5), 0.0),
        Phi0::Value(z) => z,
    };
    Ok((HfbState { t: 0.0, phi, gamma, sigma }, f0))
}

/// ‖Γ‖₁ = ∫Γᵀ + N|Λ||φ|².
pub fn mass(state: &HfbState, config: &HfbConfig) -> f64 {
    let a = assemble_totals(state, config);
    integrate(&a.gamma_t) + a.gamma_mass
}

/// HFB energy functional with the delta masses handled analytically.
pub fn energy(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<f64> {
    let grid = state.grid();
    let vol = grid.volume();
    let o = grid.origin();
    let lam = config.lambda;
    let n = config.n;
    let a = assemble_totals(state, config);
    let gt = a.gamma_t.values();
    let st = a.sigma_t.values();
    let vhat = pot.values();
    let v0 = pot.v0();
    let w: Vec<f64> = vhat.iter().map(|v| v + v0).collect();
    let (m, s) = (a.gamma_mass, a.sigma_mass);

    let kin: f64 = (0..gt.len()).map(|i| grid.kinetic(i) * gt[i]).sum::<f64>() / vol;

    let cgw = convolve_kernel(grid, gt, &w);
    let gg = (0..gt.len()).map(|i| cgw[i] * gt[i]).sum::<f64>() / vol + 2.0 * m * cgw[o] + m * m * w[o];

    let csv = convolve_kernel(grid, st, vhat);
    let mut ss = C64::new(0.0, 0.0);
    let mut ss_abs = 0.0;
    for i in 0..st.len() {
        let z = csv[i].conj() * st[i];
        ss += z;
        ss_abs += z.norm();
    }
    ss /= vol;
    ss_abs /= vol;
    let vs: C64 = (0..st.len()).map(|i| st[i] * vhat[i]).sum::<C64>() / vol;
    ss += s * csv[o].conj() + s.conj() * vs + s.norm_sqr() * v0;
    let scale = ss_abs + 2.0 * (s.norm() * vs.norm()) + s.norm_sqr() * v0;
    if ss.im.abs() > 1e-10 * scale.max(1e-300) {
        return Err(Error::ComplexEnergy { imag: ss.im, scale });
    }

    let quartic = n * vol * vol * lam * state.phi.norm_sqr().powi(2) * v0;
    Ok(kin + lam / (2.0 * n) * (gg + ss.re) - quartic)
}

/// r(t) = |φ_t|² − |φ₀|² − (‖Γᵀ₀‖₁ − ‖Γᵀ_t‖₁)/(N|Λ|) per stored step.
pub fn mass_transfer_check(history: &HfbHistory) -> Result<Vec<f64>> {
    let cfg = &history.config;
    let vol = history.grid().volume();
    let s0 = &history.states[0];
    let g0 = lp_norm(&assemble_totals(s0, cfg).gamma_t, 1.0, None)?;
    history
        .states
        .iter()
        .map(|s| {
            let gt = lp_norm(&assemble_totals(s, cfg).gamma_t, 1.0, None)?;
            Ok(s.phi.norm_sqr() - s0.phi.norm_sqr() - (g0 - gt) / (cfg.n * vol))
        })
        .collect()
}

/// Bound minus monitored quantity; each is ≥ 0 when the bound holds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GronwallSlack {
    pub t: f64,
    /// min_p [e^{c₂t}(Γᵀ₀+1) − Γᵀ_t].
    pub gamma_t_pointwise: f64,
    /// e^{c₁t}(‖Γᵀ₀‖₁+1) − ‖Γᵀ_t‖₁.
    pub gamma_t_l1: f64,
    /// E_HFB(0) − ∫EΓ_t.
    pub kinetic: f64,
    /// 1 + e^{c₂t}(‖Γᵀ₀‖_∞+1) − ‖u_t‖²_∞.
    pub u_sup: f64,
    /// e^{c₁t}‖Γᵀ₀‖₁ − ‖v_t‖²₂.
    pub v_l2: f64,
    /// E_HFB(0) − ‖v_t‖²_{L²_E}.
    pub v_energy: f64,
}

impl GronwallSlack {
    pub fn min(&self) -> f64 {
        [self.gamma_t_pointwise, self.gamma_t_l1, self.kinetic, self.u_sup, self.v_l2, self.v_energy]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self) -> bool {
        self.min() >= 0.0
    }
}

pub fn gronwall_monitors(history: &HfbHistory, pot: &Potential) -> Result<Vec<GronwallSlack>> {
    let cfg = &history.config;
    let grid = history.grid();
    let s0 = &history.states[0];
    let a0 = assemble_totals(s0, cfg);
    let g0_l1 = lp_norm(&a0.gamma_t, 1.0, None)?;
    let g0_sup = a0.gamma_t.max_abs();
    let e0 = energy(s0, cfg, pot)?;
    let vv = pot.weighted_norm();
    let c2 = 2.0 * cfg.lambda * vv * (g0_l1 / cfg.n + 2.0);
    let c1 = 2.0 * cfg.lambda * vv * (g0_l1 / cfg.n + 1.0);
    let vol = grid.volume();
    history
        .states
        .iter()
        .map(|s| {
            let t = s.t - s0.t;
            let a = assemble_totals(s, cfg);
            let (e2, e1) = ((c2 * t).exp(), (c1 * t).exp());
            let pointwise = (0..grid.len())
                .map(|i| e2 * (a0.gamma_t.at(i) + 1.0) - a.gamma_t.at(i))
                .fold(f64::INFINITY, f64::min);
            let gt_l1 = lp_norm(&a.gamma_t, 1.0, None)?;
            let kin: f64 = (0..grid.len()).map(|i| grid.kinetic(i) * a.gamma_t.at(i)).sum::<f64>() / vol;
            let gam = s.gamma.map(|g| g.max(0.0));
            let u_sup_sq = 1.0 + gam.max_abs();
            let v_l2 = integrate(&gam);
            let v_e: f64 = (0..grid.len()).map(|i| grid.kinetic(i) * gam.at(i)).sum::<f64>() / vol;
            Ok(GronwallSlack {
                t: s.t,
                gamma_t_pointwise: pointwise,
                gamma_t_l1: e1 * (g0_l1 + 1.0) - gt_l1,
                kinetic: e0 - kin,
                u_sup: 1.0 + e2 * (g0_sup + 1.0) - u_sup_sq,
                v_l2: e1 * g0_l1 - v_l2,
                v_energy: e0 - v_e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialKind;
    use std::f64::consts::PI;

    fn setup(m: usize, lambda: f64) -> (Arc<LatticeGrid>, Potential, HfbConfig, HfbState) {
        let g = LatticeGrid::shared(1, 2.0 * PI, m).unwrap();
        let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
        let (s, f0) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
        let cfg = HfbConfig::new(lambda, 100.0, Order::Second, f0, 1e-3, Integrator::LawsonRk4).unwrap();
        (g, pot, cfg, s)
    }

    #[test]
    fn assemble_examples() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 2).unwrap();
        let zero = RealField::zeros(&g);
        let cfg = HfbConfig::new(0.1, 7.0, Order::Second, zero.clone(), 1e-3, Integrator::Rk4).unwrap();
        let s = HfbState {
            t: 0.0,
            phi: C64::new(g.volume().powf(-0.5), 0.0),
            gamma: zero.clone(),
            sigma: ComplexField::zeros(&g),
        };
        let a = assemble_totals(&s, &cfg);
        assert!((a.gamma_mass - 7.0).abs() < 1e-14);
        assert!(a.gamma_t.values().iter().all(|&x| x == 0.0));
        assert!((mass(&s, &cfg) - 7.0).abs() < 1e-13);

        let one = RealField::constant(&g, 1.0);
        let cfg = HfbConfig::new(0.1, 7.0, Order::Second, one.clone(), 1e-3, Integrator::Rk4).unwrap();
        let s = HfbState { t: 0.0, phi: C64::new(0.0, 0.0), gamma: one.clone(), sigma: ComplexField::zeros(&g) };
        let a = assemble_totals(&s, &cfg);
        assert!(a.gamma_t.values().iter().all(|&x| x == 4.0));
        assert!(a.gamma().values().iter().all(|&x| x == 4.0));

        let first = HfbConfig { order: Order::First, ..cfg.clone() };
        let nofp = HfbConfig { f_plus: zero, ..cfg };
        assert_eq!(assemble_totals(&s, &first).gamma_t, assemble_totals(&s, &nofp).gamma_t);
    }

    #[test]
    fn free_rhs_is_rotation() {
        let (_, pot, mut cfg, s) = setup(3, 0.1);
        cfg.lambda = 0.0;
        let r = hfb_rhs(&s, &cfg, &pot).unwrap();
        assert_eq!(r.dphi, C64::new(0.0, 0.0));
        assert!(r.dgamma.values().iter().all(|&x| x == 0.0));
        for i in 0..s.gamma.values().len() {
            assert_eq!(r.dsigma.at(i), -I * 2.0 * s.grid().kinetic(i) * s.sigma.at(i));
        }
    }

    #[test]
    fn dt_zero_is_identity() {
        let (_, pot, mut cfg, s) = setup(2, 0.1);
        for integ in [Integrator::Rk4, Integrator::LawsonRk4] {
            cfg.dt = 0.0;
            cfg.integrator = integ;
            assert_eq!(step(&s, &cfg, &pot).unwrap(), s);
        }
    }

    #[test]
    fn free_lawson_step_is_exact() {
        let (g, pot, mut cfg, s) = setup(4, 0.1);
        cfg.lambda = 0.0;
        let next = step(&s, &cfg, &pot).unwrap();
        for i in 0..g.len() {
            let exact = s.sigma.at(i) * C64::from_polar(1.0, -2.0 * g.kinetic(i) * cfg.dt);
            assert!((next.sigma.at(i) - exact).norm() < 1e-15);
            assert_eq!(next.gamma.at(i), s.gamma.at(i));
        }
        assert_eq!(next.phi, s.phi);
    }

    #[test]
    fn first_order_matches_zero_background_bitwise() {
        let (g, pot, cfg, s) = setup(3, 0.2);
        let first = HfbConfig { order: Order::First, ..cfg.clone() };
        let zero = HfbConfig { f_plus: RealField::zeros(&g), ..cfg };
        assert_eq!(hfb_rhs(&s, &first, &pot).unwrap(), hfb_rhs(&s, &zero, &pot).unwrap());
    }

    #[test]
    fn nonfinite_state_names_point() {
        let (g, pot, cfg, mut s) = setup(2, 0.1);
        s.sigma.values_mut()[3] = C64::new(f64::NAN, 0.0);
        let err = evolve(&s, 0.01, &cfg, &pot, &mut |_, _| {}).unwrap_err();
        match err {
            Error::NonFinite { field, n, step } => {
                assert_eq!(field, "sigma");
                assert_eq!(n, g.n_slice(3).to_vec());
                assert_eq!(step, 0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn energy_free_and_zero() {
        let (g, pot, mut cfg, s) = setup(3, 0.1);
        cfg.lambda = 0.0;
        let e = energy(&s, &cfg, &pot).unwrap();
        let a = assemble_totals(&s, &cfg);
        let kin: f64 = (0..g.len()).map(|i| g.kinetic(i) * a.gamma_t.at(i)).sum::<f64>() / g.volume();
        assert!((e - kin).abs() < 1e-15);
        let z = HfbState {
            t: 0.0,
            phi: C64::new(0.0, 0.0),
            gamma: RealField::zeros(&g),
            sigma: ComplexField::zeros(&g),
        };
        let cfg0 = HfbConfig { f_plus: RealField::zeros(&g), lambda: 0.3, ..cfg };
        assert_eq!(energy(&z, &cfg0, &pot).unwrap(), 0.0);
    }

    #[test]
    fn initial_data_examples() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 2).unwrap();
        let (_, f0) = initial_data(&g, 0.0, 2f64.ln(), 1.0, Phi0::Uniform).unwrap();
        assert!(f0.values().iter().all(|f| (f - 1.0).abs() < 1e-14));
        let (s, _) = initial_data(&g, 1.0, 1.0, 0.0, Phi0::Uniform).unwrap();
        assert!(s.gamma.values().iter().all(|&x| x == 0.0));
        assert!(s.sigma.values().iter().all(|x| x.norm() == 0.0));
        // E(p) = 1 at n = ±√2 is not on this grid; E = 1/2 at n = ±1
        let (_, f0) = initial_data(&g, 1.0, 0.5, 1.0, Phi0::Uniform).unwrap();
        assert!((f0.at(g.index_of(&[1]).unwrap()) - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!(initial_data(&g, 1.0, 0.0, 1.0, Phi0::Uniform).is_err());
    }
}
