//! Cubic and quartic Boltzmann correction integrals over a stored HFB history.
//!
//! Every operator is a double time integral over s₁ ≥ s₂ of
//! L(s₁)·R(s₂) per momentum tuple, where L carries the s₁ kernel and phase and
//! R the conjugate s₂ kernel, phase and gain–loss bracket. The inner integral
//! is a running trapezoid sum of R, so each step costs one pass over the
//! delta-reduced tuples:
//!
//!   inner_i = dt·(Σ_{j≤i} R_j − (R_0 + R_i)/2),   X_i = L_i·inner_i,
//!
//! and the outer integral is again a trapezoid over the instantaneous X_i.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::DispersionHistory;
use crate::error::{Error, Result};
use crate::hfb::{HfbHistory, HfbState};
use crate::kernels::{bogoliubov_uv, KernelSet};
use crate::lattice::{integrate, ComplexField, LatticeGrid, RealField};
use crate::potential::Potential;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Which occupation h enters the gain–loss brackets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HMode {
    /// h ≡ f₀.
    Frozen,
    /// h_s = f₀ + (1/N)∫₀ˢQ₃, predicted one step ahead with an explicit Euler step.
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbeParams {
    pub mode: HMode,
    pub enable_q4: bool,
    /// Cap on (time steps)·(quartic tuples).
    pub q4_budget: f64,
}

impl Default for QbeParams {
    fn default() -> Self {
        Self { mode: HMode::Frozen, enable_q4: false, q4_budget: 2e9 }
    }
}

/// Either instantaneous integrands at one step or their time integrals up to it.
#[derive(Debug, Clone)]
pub struct CollisionIntegrals {
    pub t: f64,
    pub q3: RealField,
    /// Q₃ split into the p₃ = p₁+p₂ and p₁+p₂+p₃ = 0 channels.
    pub q3_channels: [RealField; 2],
    pub q3g: ComplexField,
    pub q3phi: C64,
    pub q33phi: C64,
    pub q4: Option<RealField>,
    /// B22, B13, B04 channels.
    pub q4_channels: Option<[RealField; 3]>,
}

impl CollisionIntegrals {
    pub fn zeros(grid: &Arc<LatticeGrid>, t: f64, with_q4: bool) -> Self {
        let z = RealField::zeros(grid);
        Self {
            t,
            q3: z.clone(),
            q3_channels: [z.clone(), z.clone()],
            q3g: ComplexField::zeros(grid),
            q3phi: ZERO,
            q33phi: ZERO,
            q4: with_q4.then(|| z.clone()),
            q4_channels: with_q4.then(|| [z.clone(), z.clone(), z]),
        }
    }

    /// self + (dt/2)(a + b), field by field.
    fn trapezoid(&self, a: &Self, b: &Self, dt: f64, t: f64) -> Self {
        let h = 0.5 * dt;
        let r = |x: &RealField, y: &RealField, z: &RealField| RealField::from_fn(x.grid(), |i| x.at(i) + h * (y.at(i) + z.at(i)));
        let q4 = match (&self.q4, &a.q4, &b.q4) {
            (Some(x), Some(y), Some(z)) => Some(r(x, y, z)),
            _ => None,
        };
        let q4_channels = match (&self.q4_channels, &a.q4_channels, &b.q4_channels) {
            (Some(x), Some(y), Some(z)) => Some([r(&x[0], &y[0], &z[0]), r(&x[1], &y[1], &z[1]), r(&x[2], &y[2], &z[2])]),
            _ => None,
        };
        Self {
            t,
            q3: r(&self.q3, &a.q3, &b.q3),
            q3_channels: [
                r(&self.q3_channels[0], &a.q3_channels[0], &b.q3_channels[0]),
                r(&self.q3_channels[1], &a.q3_channels[1], &b.q3_channels[1]),
            ],
            q3g: ComplexField::from_fn(self.q3g.grid(), |i| self.q3g.at(i) + (a.q3g.at(i) + b.q3g.at(i)) * h),
            q3phi: self.q3phi + (a.q3phi + b.q3phi) * h,
            q33phi: self.q33phi + (a.q33phi + b.q33phi) * h,
            q4,
            q4_channels,
        }
    }
}

/// Output of one accumulator step.
#[derive(Debug, Clone)]
pub struct QbeStep {
    pub index: usize,
    pub h: RealField,
    pub instant: CollisionIntegrals,
    pub integral: CollisionIntegrals,
}

#[derive(Debug, Clone, Copy)]
struct Prefix {
    sum: C64,
    first: C64,
}

impl Prefix {
    const EMPTY: Prefix = Prefix { sum: ZERO, first: ZERO };

    /// Adds R_i and returns the trapezoid inner integral over [0, t_i].
    #[inline]
    fn push(&mut self, r: C64, step: usize, dt: f64) -> C64 {
        if step == 0 {
            self.first = r;
            self.sum = r;
            return ZERO;
        }
        self.sum += r;
        (self.sum - (self.first + r) * 0.5) * dt
    }
}

/// Cubic tuple: p₃ = p₁+p₂ on the grid; the second channel uses −p₃.
#[derive(Debug, Clone)]
struct CubicSlot {
    i1: usize,
    i2: usize,
    i3: usize,
    a: Prefix,
    a_rev: Prefix,
    b: Prefix,
}

#[derive(Debug, Clone)]
struct QuarticSlot {
    i: [usize; 4],
    r: Prefix,
}

#[derive(Debug, Clone, Default)]
struct QuarticGroup {
    b22: Vec<QuarticSlot>,
    b13: Vec<QuarticSlot>,
    b04: Vec<QuarticSlot>,
}

struct CubicPartial {
    ch: [Vec<f64>; 2],
    g: Vec<C64>,
    phi: C64,
}

/// Operation count of the quartic sums over `steps` steps.
pub fn q4_cost_estimate(grid: &LatticeGrid, steps: usize) -> f64 {
    let n = grid.len() as f64;
    3.0 * n * n * n * (steps as f64 + 1.0)
}

/// Streaming accumulator fed one HFB step at a time.
pub struct CollisionAccumulator<'a> {
    grid: Arc<LatticeGrid>,
    pot: &'a Potential,
    lambda: f64,
    n: f64,
    dt: f64,
    f0: RealField,
    params: QbeParams,
    step: usize,
    cubic: Vec<Vec<CubicSlot>>,
    quartic: Option<Vec<QuarticGroup>>,
    last: Option<(CollisionIntegrals, CollisionIntegrals)>,
}

impl<'a> CollisionAccumulator<'a> {
    pub fn new(
        pot: &'a Potential,
        lambda: f64,
        n: f64,
        dt: f64,
        f0: &RealField,
        params: QbeParams,
        steps: usize,
    ) -> Result<Self> {
        let grid = Arc::clone(pot.grid());
        f0.check_grid(&grid)?;
        if !(dt > 0.0 || steps == 0) {
            return Err(Error::Invalid(format!("dt = {dt}, need dt > 0")));
        }
        if !(n > 0.0) {
            return Err(Error::Invalid(format!("N = {n}, need N > 0")));
        }
        let len = grid.len();
        let mut cubic = Vec::with_capacity(len);
        for i1 in 0..len {
            let mut g = Vec::new();
            for i2 in 0..len {
                if let Some(i3) = grid.add(i1, i2) {
                    g.push(CubicSlot { i1, i2, i3, a: Prefix::EMPTY, a_rev: Prefix::EMPTY, b: Prefix::EMPTY });
                }
            }
            cubic.push(g);
        }
        let quartic = if params.enable_q4 {
            let estimate = q4_cost_estimate(&grid, steps);
            if estimate > params.q4_budget {
                return Err(Error::Budget { estimate, budget: params.q4_budget });
            }
            Some(build_quartic(&grid))
        } else {
            None
        };
        Ok(Self {
            grid,
            pot,
            lambda,
            n,
            dt,
            f0: f0.clone(),
            params,
            step: 0,
            cubic,
            quartic,
            last: None,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    fn next_h(&self) -> RealField {
        match (self.params.mode, &self.last) {
            (HMode::SelfConsistent, Some((inst, int))) => {
                let dt = self.dt;
                RealField::from_fn(&self.grid, |i| self.f0.at(i) + (int.q3.at(i) + dt * inst.q3.at(i)) / self.n)
            }
            _ => self.f0.clone(),
        }
    }

    /// Feeds step `k` (state at t_k and accumulated phase Θ_k).
    pub fn push(&mut self, state: &HfbState, theta: &RealField) -> Result<QbeStep> {
        state.gamma.check_grid(&self.grid)?;
        theta.check_grid(&self.grid)?;
        let k = self.step;
        let uv = bogoliubov_uv(state).map_err(|e| match e {
            Error::NegativeGamma { value, n, .. } => Error::NegativeGamma { value, n, step: k },
            e => e,
        })?;
        let ks = KernelSet::new(&uv, self.pot)?;
        let h = self.next_h();
        let z: Vec<C64> = theta.values().iter().map(|&t| C64::from_polar(1.0, t)).collect();
        let hv = h.values();
        let len = self.grid.len();
        let vol = self.grid.volume();
        let dt = self.dt;
        let lam2 = self.lambda * self.lambda;

        let partials: Vec<CubicPartial> = self
            .cubic
            .par_iter_mut()
            .map(|group| cubic_group(group, &ks, &z, hv, &self.grid, k, dt, len))
            .collect();
        let mut ch0 = vec![0.0; len];
        let mut ch1 = vec![0.0; len];
        let mut g = vec![ZERO; len];
        let mut phi = ZERO;
        for p in &partials {
            for i in 0..len {
                ch0[i] += p.ch[0][i];
                ch1[i] += p.ch[1][i];
                g[i] += p.g[i];
            }
            phi += p.phi;
        }
        let c3 = 2.0 * lam2 / vol;
        ch0.iter_mut().for_each(|x| *x *= c3);
        ch1.iter_mut().for_each(|x| *x *= c3);
        g.iter_mut().for_each(|x| *x *= lam2 / vol);
        let o = self.grid.origin();
        let phi = phi * z[o] * (lam2 / (vol * vol));

        let q3: Vec<f64> = ch0.iter().zip(&ch1).map(|(a, b)| a + b).collect();
        let mut s33 = ZERO;
        for p in 0..len {
            s33 += ks.b12(o, p, p) * q3[p] + ks.b12(p, p, o).conj() * g[p] + ks.b03(p, p, o) * g[p].conj();
        }
        let q33 = z[o] * s33 * (self.lambda / vol);

        let (q4, q4_channels) = match &mut self.quartic {
            Some(groups) => {
                let parts: Vec<[Vec<f64>; 3]> = groups
                    .par_iter_mut()
                    .map(|grp| quartic_group(grp, &ks, &z, hv, k, dt, len))
                    .collect();
                let mut ch = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
                for p in &parts {
                    for c in 0..3 {
                        for i in 0..len {
                            ch[c][i] += p[c][i];
                        }
                    }
                }
                let c4 = 2.0 * lam2 / (vol * vol);
                for c in ch.iter_mut() {
                    c.iter_mut().for_each(|x| *x *= c4);
                }
                let total: Vec<f64> = (0..len).map(|i| ch[0][i] + ch[1][i] + ch[2][i]).collect();
                let [a, b, c] = ch;
                (
                    Some(RealField::new(&self.grid, total)?),
                    Some([RealField::new(&self.grid, a)?, RealField::new(&self.grid, b)?, RealField::new(&self.grid, c)?]),
                )
            }
            None => (None, None),
        };

        let instant = CollisionIntegrals {
            t: state.t,
            q3: RealField::new(&self.grid, q3)?,
            q3_channels: [RealField::new(&self.grid, ch0)?, RealField::new(&self.grid, ch1)?],
            q3g: ComplexField::new(&self.grid, g)?,
            q3phi: phi,
            q33phi: q33,
            q4,
            q4_channels,
        };
        let integral = match &self.last {
            None => CollisionIntegrals::zeros(&self.grid, state.t, self.quartic.is_some()),
            Some((prev_inst, prev_int)) => prev_int.trapezoid(prev_inst, &instant, dt, state.t),
        };
        self.last = Some((instant.clone(), integral.clone()));
        self.step += 1;
        Ok(QbeStep { index: k, h, instant, integral })
    }
}

fn build_quartic(grid: &LatticeGrid) -> Vec<QuarticGroup> {
    let len = grid.len();
    (0..len)
        .map(|i1| {
            let mut grp = QuarticGroup::default();
            for i2 in 0..len {
                for i3 in 0..len {
                    if let Some(i4) = grid.add3(i1, i2, grid.neg(i3)) {
                        grp.b22.push(QuarticSlot { i: [i1, i2, i3, i4], r: Prefix::EMPTY });
                    }
                    if let Some(s) = grid.add3(i1, i2, i3) {
                        grp.b13.push(QuarticSlot { i: [i1, i2, i3, s], r: Prefix::EMPTY });
                        grp.b04.push(QuarticSlot { i: [i1, i2, i3, grid.neg(s)], r: Prefix::EMPTY });
                    }
                }
            }
            grp
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cubic_group(
    group: &mut [CubicSlot],
    ks: &KernelSet<'_>,
    z: &[C64],
    h: &[f64],
    grid: &LatticeGrid,
    k: usize,
    dt: f64,
    len: usize,
) -> CubicPartial {
    let mut out = CubicPartial { ch: [vec![0.0; len], vec![0.0; len]], g: vec![ZERO; len], phi: ZERO };
    let o = grid.origin();
    for s in group.iter_mut() {
        let (i1, i2, i3) = (s.i1, s.i2, s.i3);
        let j3 = grid.neg(i3);
        let (h1, h2, h3, h4) = (h[i1], h[i2], h[i3], h[j3]);
        let b1 = (1.0 + h1) * (1.0 + h2) * h3 - h1 * h2 * (1.0 + h3);
        let b2 = (1.0 + h1) * (1.0 + h2) * (1.0 + h4) - h1 * h2 * h4;

        // p₃ = p₁ + p₂
        let ea = z[i1] * z[i2] * z[i3].conj();
        let b12 = ks.b12(i1, i2, i3);
        let b12_rev = ks.b12(i3, i2, i1);
        let ia = s.a.push(b12.conj() * ea.conj() * b1, k, dt);
        let ia_rev = s.a_rev.push(ea * b12_rev * b1, k, dt);
        // q₃ = −p₁ − p₂
        let eb = z[i1] * z[i2] * z[j3];
        let b03 = ks.b03(i1, i2, j3);
        let ib = s.b.push(b03.conj() * eb.conj() * b2, k, dt);
        if k == 0 {
            continue;
        }

        let ga = 0.5 * (b12 * ea * ia).re;
        out.ch[0][i1] += ga;
        out.ch[0][i2] += ga;
        out.ch[0][i3] -= ga;
        let gb = (b03 * eb * ib).re / 6.0;
        out.ch[1][i1] += gb;
        out.ch[1][i2] += gb;
        out.ch[1][j3] += gb;

        out.g[i3] -= z[i3] * z[i3] * ea * ks.b03(i1, i2, j3) * ia;
        out.g[i1] += z[i1].conj() * z[i1].conj() * ea.conj() * ks.b12(i1, i2, j3).conj() * ia.conj() * 2.0;
        out.g[j3] += z[j3] * z[j3] * eb.conj() * ks.b12(i1, i2, i3).conj() * ib.conj();

        out.phi += -(ea * ks.b13(o, i1, i2, i3) * ia) * 0.5;
        out.phi += ea.conj() * ks.b22(o, i3, i2, i1) * ia_rev * 0.5;
        out.phi += -(eb * ks.b04(o, i1, i2, j3) * ib) / 6.0;
        out.phi += eb.conj() * ks.b13(i1, i2, j3, o).conj() * ib.conj() / 6.0;
    }
    out
}

fn quartic_group(
    grp: &mut QuarticGroup,
    ks: &KernelSet<'_>,
    z: &[C64],
    h: &[f64],
    k: usize,
    dt: f64,
    len: usize,
) -> [Vec<f64>; 3] {
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let ht = |i: usize| 1.0 + h[i];
    for s in grp.b22.iter_mut() {
        let [a, b, c, d] = s.i;
        let e = z[a] * z[b] * (z[c] * z[d]).conj();
        let bk = ks.b22(a, b, c, d);
        let br = ht(a) * ht(b) * h[c] * h[d] - h[a] * h[b] * ht(c) * ht(d);
        let inner = s.r.push(bk.conj() * e.conj() * br, k, dt);
        if k > 0 {
            let v = 0.25 * (bk * e * inner).re;
            out[0][a] += v;
            out[0][b] += v;
            out[0][c] -= v;
            out[0][d] -= v;
        }
    }
    for s in grp.b13.iter_mut() {
        let [a, b, c, d] = s.i;
        let e = z[a] * z[b] * z[c] * z[d].conj();
        let bk = ks.b13(a, b, c, d);
        let br = ht(a) * ht(b) * ht(c) * h[d] - h[a] * h[b] * h[c] * ht(d);
        let inner = s.r.push(bk.conj() * e.conj() * br, k, dt);
        if k > 0 {
            let v = (bk * e * inner).re / 6.0;
            out[1][a] += v;
            out[1][b] += v;
            out[1][c] += v;
            out[1][d] -= v;
        }
    }
    for s in grp.b04.iter_mut() {
        let [a, b, c, d] = s.i;
        let e = z[a] * z[b] * z[c] * z[d];
        let bk = ks.b04(a, b, c, d);
        let br = ht(a) * ht(b) * ht(c) * ht(d) - h[a] * h[b] * h[c] * h[d];
        let inner = s.r.push(bk.conj() * e.conj() * br, k, dt);
        if k > 0 {
            let v = (bk * e * inner).re / 24.0;
            for &i in &s.i {
                out[2][i] += v;
            }
        }
    }
    out
}

/// Full accumulation over a history; `observer` sees every step.
pub fn accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    params: QbeParams,
    observer: &mut dyn FnMut(&QbeStep),
) -> Result<CollisionIntegrals> {
    if history.is_empty() || phases.thetas.len() != history.len() {
        return Err(Error::Invalid(format!(
            "history has {} states but {} phase samples",
            history.len(),
            phases.thetas.len()
        )));
    }
    if !history.grid().same_as(pot.grid()) {
        return Err(Error::GridMismatch);
    }
    let cfg = &history.config;
    let steps = history.len() - 1;
    let mut acc = CollisionAccumulator::new(pot, cfg.lambda, cfg.n, history.dt(), f0, params, steps)?;
    let mut last = None;
    for (state, theta) in history.states.iter().zip(&phases.thetas) {
        let s = acc.push(state, theta)?;
        observer(&s);
        last = Some(s.integral);
    }
    Ok(last.expect("nonempty history"))
}

/// Step index of time t on the history grid.
pub fn step_index(history: &HfbHistory, t: f64) -> Result<usize> {
    let t0 = history.states[0].t;
    let dt = history.dt();
    if t < t0 - 1e-12 {
        return Err(Error::Invalid(format!("t = {t} precedes the history")));
    }
    let k = if dt > 0.0 { ((t - t0) / dt).round() as usize } else { 0 };
    if k >= history.len() || (t0 + k as f64 * dt - t).abs() > 1e-9 * (1.0 + t.abs()) {
        return Err(Error::Invalid(format!("t = {t} is not on the history grid")));
    }
    Ok(k)
}

fn accumulate_to(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    params: QbeParams,
    t: f64,
) -> Result<CollisionIntegrals> {
    let k = step_index(history, t)?;
    let cut = HfbHistory {
        config: history.config.clone(),
        states: history.states[..=k].to_vec(),
        omegas: history.omegas[..=k].to_vec(),
    };
    let ph = DispersionHistory { dt: phases.dt, omegas: phases.omegas[..=k].to_vec(), thetas: phases.thetas[..=k].to_vec() };
    accumulate(&cut, &ph, pot, f0, params, &mut |_| {})
}

/// ∫₀ᵗ Q₃[h] ds.
pub fn q3_accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    mode: HMode,
    t: f64,
) -> Result<RealField> {
    let p = QbeParams { mode, ..QbeParams::default() };
    Ok(accumulate_to(history, phases, pot, f0, p, t)?.q3)
}

/// Pointwise ∫₀ᵗ Q₃^(g)[h] ds.
pub fn q3g_accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    mode: HMode,
    t: f64,
) -> Result<ComplexField> {
    let p = QbeParams { mode, ..QbeParams::default() };
    Ok(accumulate_to(history, phases, pot, f0, p, t)?.q3g)
}

pub fn q3phi_accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    mode: HMode,
    t: f64,
) -> Result<C64> {
    let p = QbeParams { mode, ..QbeParams::default() };
    Ok(accumulate_to(history, phases, pot, f0, p, t)?.q3phi)
}

pub fn q33phi_accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    mode: HMode,
    t: f64,
) -> Result<C64> {
    let p = QbeParams { mode, ..QbeParams::default() };
    Ok(accumulate_to(history, phases, pot, f0, p, t)?.q33phi)
}

/// ∫₀ᵗ Q₄[h] ds; refused when the operation estimate exceeds `budget`.
#[allow(clippy::too_many_arguments)]
pub fn q4_accumulate(
    history: &HfbHistory,
    phases: &DispersionHistory,
    pot: &Potential,
    f0: &RealField,
    mode: HMode,
    t: f64,
    budget: f64,
) -> Result<RealField> {
    let p = QbeParams { mode, enable_q4: true, q4_budget: budget };
    Ok(accumulate_to(history, phases, pot, f0, p, t)?.q4.expect("q4 enabled"))
}

/// |∫dp p_a·Q(p)| maximized over axes, and the scale ∫dp |p||Q(p)|.
pub fn momentum_moment(q: &RealField) -> (f64, f64) {
    let grid = q.grid();
    let mut worst: f64 = 0.0;
    for a in 0..grid.dim() {
        let m = integrate(&RealField::from_fn(grid, |i| grid.momentum(i)[a] * q.at(i)));
        worst = worst.max(m.abs());
    }
    let scale = integrate(&RealField::from_fn(grid, |i| {
        let p = grid.momentum(i);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() * q.at(i).abs()
    }));
    (worst, scale)
}

/// Relative moments (Φ, f, g).
#[derive(Debug, Clone)]
pub struct MomentSet {
    pub phi: C64,
    pub f: RealField,
    pub g: ComplexField,
}

/// Φ = N^{−3/2}(∫Q₃^(Φ) + ∫Q₃,₃^(Φ)), f = f₀ + ∫Q₃/N, g = ∫Q₃^(g)/N.
pub fn corrected_moments(ci: &CollisionIntegrals, f0: &RealField, n: f64) -> Result<MomentSet> {
    f0.check_grid(ci.q3.grid())?;
    Ok(MomentSet {
        phi: (ci.q3phi + ci.q33phi) * n.powf(-1.5),
        f: f0.zip_with(&ci.q3, |a, b| a + b / n)?,
        g: ci.q3g.map(|x| x / n),
    })
}

/// Total density, pair amplitude and condensate amplitude.
#[derive(Debug, Clone)]
pub struct TotalFields {
    /// f^tot with its delta mass folded into p = 0 as value·|Λ|.
    pub f: RealField,
    /// Coefficient of δ in f^tot.
    pub f_delta: f64,
    pub g: ComplexField,
    pub g_delta: C64,
    pub phi: C64,
}

pub fn reconstruct_totals(state: &HfbState, moments: &MomentSet, theta: &RealField, n: f64) -> Result<TotalFields> {
    let grid = state.grid();
    moments.f.check_grid(grid)?;
    theta.check_grid(grid)?;
    let uv = bogoliubov_uv(state)?;
    let o = grid.origin();
    let vol = grid.volume();
    let rn = (n * vol).sqrt();
    let phi = state.phi;
    let (u0, v0) = (uv.u.at(o), uv.v.at(o));
    let e0 = C64::from_polar(1.0, theta.at(o));
    let big = moments.phi;

    let f_delta = n * vol * phi.norm_sqr() + 2.0 * (e0 * (phi * u0 + phi.conj() * v0) * big.conj() * rn).re;
    let g_delta = phi * phi * (n * vol) + phi * (e0.conj() * big * u0 + e0 * big.conj() * v0) * (2.0 * rn);
    let f = RealField::from_fn(grid, |i| {
        let (gm, s) = (state.gamma.at(i), state.sigma.at(i));
        let (fp, fm) = (moments.f.at(i), moments.f.at(grid.neg(i)));
        let e2 = C64::from_polar(1.0, 2.0 * theta.at(i));
        let mut v = gm + (1.0 + gm) * fp + gm * fm + 2.0 * (e2 * s * moments.g.at(i).conj()).re;
        if i == o {
            v += f_delta * vol;
        }
        v
    });
    let g = ComplexField::from_fn(grid, |i| {
        let (gm, s) = (state.gamma.at(i), state.sigma.at(i));
        let (fp, fm) = (moments.f.at(i), moments.f.at(grid.neg(i)));
        let e2 = C64::from_polar(1.0, 2.0 * theta.at(i));
        let gi = moments.g.at(i);
        let mut v = s + s * (fp + fm) + e2 * gi * (1.0 + gm) + s * s * e2.conj() * gi.conj() / (1.0 + gm);
        if i == o {
            v += g_delta * vol;
        }
        v
    });
    Ok(TotalFields { f, f_delta, g, g_delta, phi: phi * rn + e0.conj() * big * u0 + e0 * big.conj() * v0 })
}

/// A time series sample (t, value).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub t: f64,
    pub value: T,
}

/// Mesoscopic time T = λ²t with operator values scaled by λ^{−2}.
pub fn mesoscopic_rescale<T: Clone + std::ops::Mul<f64, Output = T>>(series: &[Sample<T>], lambda: f64) -> Result<Vec<Sample<T>>> {
    if !(lambda > 0.0) {
        return Err(Error::Invalid(format!("lambda = {lambda}, need λ > 0")));
    }
    let s = 1.0 / (lambda * lambda);
    Ok(series.iter().map(|x| Sample { t: x.t * lambda * lambda, value: x.value.clone() * s }).collect())
}
