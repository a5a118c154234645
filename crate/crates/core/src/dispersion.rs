//! Renormalized Bogoliubov dispersion Ω and its accumulated phase Θ.

use crate::error::{Error, Result};
use crate::hfb::{HfbConfig, HfbHistory, HfbState, Model};
use crate::lattice::RealField;
use crate::potential::Potential;

/// Ω = E + (λ/N)Γ*(v̂+v̂(0)) + (λ/N)Re((Σ̄*v̂)σ)/(1+γ).
pub fn omega(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<RealField> {
    let model = Model::new(config, pot)?;
    omega_with(&model, state)
}

pub(crate) fn omega_with(model: &Model<'_>, state: &HfbState) -> Result<RealField> {
    let grid = state.grid();
    let (cg, cs) = model.mean(state.phi, state.gamma.values(), state.sigma.values());
    let lam = model.lambda();
    let e = model.kinetic();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let d = 1.0 + state.gamma.at(i);
        if !(d > 0.0) {
            return Err(Error::Division { value: d, n: grid.n_slice(i).to_vec() });
        }
        out.push(e[i] + lam * cg[i] + lam * (cs[i].conj() * state.sigma.at(i)).re / d);
    }
    RealField::new(grid, out)
}

/// Diagnostic √(E(E+2λv̂)); not used by the dynamics.
pub fn bogoliubov_reference(pot: &Potential, lambda: f64) -> RealField {
    let grid = pot.grid();
    RealField::from_fn(grid, |i| {
        let e = grid.kinetic(i);
        (e * (e + 2.0 * lambda * pot.vhat().at(i))).max(0.0).sqrt()
    })
}

#[derive(Debug, Clone)]
pub struct DispersionHistory {
    pub dt: f64,
    pub omegas: Vec<RealField>,
    /// Θ_k = ∫₀^{t_k} Ω, composite trapezoid.
    pub thetas: Vec<RealField>,
}

impl DispersionHistory {
    pub fn from_omegas(omegas: Vec<RealField>, dt: f64) -> Self {
        let mut thetas: Vec<RealField> = Vec::with_capacity(omegas.len());
        if let Some(first) = omegas.first() {
            thetas.push(RealField::zeros(first.grid()));
        }
        for k in 1..omegas.len() {
            let prev = &thetas[k - 1];
            let next = RealField::from_fn(prev.grid(), |i| {
                prev.at(i) + 0.5 * dt * (omegas[k - 1].at(i) + omegas[k].at(i))
            });
            thetas.push(next);
        }
        Self { dt, omegas, thetas }
    }

    /// Θ_t − Θ_s at lattice point `i`.
    pub fn phase_between(&self, s: usize, t: usize, i: usize) -> f64 {
        self.thetas[t].at(i) - self.thetas[s].at(i)
    }
}

pub fn accumulate_phase(history: &HfbHistory) -> DispersionHistory {
    DispersionHistory::from_omegas(history.omegas.clone(), history.dt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hfb::{initial_data, Integrator, Order, Phi0};
    use crate::lattice::{ComplexField, LatticeGrid};
    use crate::potential::PotentialKind;
    use num_complex::Complex64 as C64;
    use std::f64::consts::PI;

    #[test]
    fn free_and_condensate_only() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 3).unwrap();
        let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
        let (s, f0) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
        let cfg = HfbConfig::new(0.0, 100.0, Order::Second, f0, 1e-3, Integrator::LawsonRk4).unwrap();
        let w = omega(&s, &cfg, &pot).unwrap();
        for i in 0..g.len() {
            assert_eq!(w.at(i), g.kinetic(i));
        }

        let phi = C64::new(0.3, -0.2);
        let s = HfbState { t: 0.0, phi, gamma: RealField::zeros(&g), sigma: ComplexField::zeros(&g) };
        let cfg = HfbConfig::new(0.1, 100.0, Order::First, RealField::zeros(&g), 1e-3, Integrator::LawsonRk4).unwrap();
        let w = omega(&s, &cfg, &pot).unwrap();
        for i in 0..g.len() {
            let expect = g.kinetic(i) + 0.1 * g.volume() * phi.norm_sqr() * (pot.vhat().at(i) + pot.v0());
            assert!((w.at(i) - expect).abs() < 1e-15);
        }
        let o = g.origin();
        assert!((w.at(o) - 0.1 * g.volume() * phi.norm_sqr() * 2.0 * pot.v0()).abs() < 1e-16);
        assert!(w.is_even(0.0));
    }

    #[test]
    fn trapezoid_exact_on_linear() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 1).unwrap();
        let dt = 0.1;
        let om: Vec<RealField> = (0..11).map(|k| RealField::constant(&g, 2.0 + 3.0 * k as f64 * dt)).collect();
        let d = DispersionHistory::from_omegas(om, dt);
        for k in 0..11 {
            let t = k as f64 * dt;
            assert!((d.thetas[k].at(0) - (2.0 * t + 1.5 * t * t)).abs() < 1e-13);
        }
        assert_eq!(d.phase_between(3, 7, 1), -d.phase_between(7, 3, 1));
    }
}
