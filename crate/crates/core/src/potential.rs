//! Fourier coefficients v̂ of the pair interaction on the lattice.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{lp_norm, LatticeGrid, RealField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// v̂(p) = A·exp(−|p|²/(2w²)).
    Gaussian { amplitude: f64, width: f64 },
    /// v̂ ≡ A.
    Constant { amplitude: f64 },
    Zero,
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Gaussian { .. } => "gaussian",
            PotentialKind::Constant { .. } => "constant",
            PotentialKind::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    vhat: RealField,
    v0: f64,
    norm_l1: f64,
    norm_inf: f64,
    norm_l1_sqrt: f64,
}

impl Potential {
    pub fn new(grid: &Arc<LatticeGrid>, kind: PotentialKind) -> Result<Self> {
        let vhat = match kind {
            PotentialKind::Gaussian { amplitude, width } => {
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::Invalid(format!("gaussian amplitude {amplitude} must be ≥ 0")));
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::Invalid(format!("gaussian width {width} must be > 0")));
                }
                RealField::from_fn(grid, |i| {
                    amplitude * (-grid.kinetic(i) / (width * width)).exp()
                })
            }
            PotentialKind::Constant { amplitude } => {
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::Invalid(format!("constant amplitude {amplitude} must be ≥ 0")));
                }
                RealField::constant(grid, amplitude)
            }
            PotentialKind::Zero => RealField::zeros(grid),
        };
        Self::from_field(kind, vhat)
    }

    fn from_field(kind: PotentialKind, vhat: RealField) -> Result<Self> {
        if let Some(i) = vhat.values().iter().position(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Invalid(format!(
                "v̂ = {} at n = {:?}; need finite v̂ ≥ 0",
                vhat.at(i),
                vhat.grid().n_slice(i)
            )));
        }
        let grid = Arc::clone(vhat.grid());
        let sqrt_w = RealField::from_fn(&grid, |i| (1.0 + grid.kinetic(i)).sqrt());
        Ok(Self {
            kind,
            v0: vhat.at(grid.origin()),
            norm_l1: lp_norm(&vhat, 1.0, None)?,
            norm_inf: lp_norm(&vhat, f64::INFINITY, None)?,
            norm_l1_sqrt: lp_norm(&vhat, 1.0, Some(&sqrt_w))?,
            vhat,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<LatticeGrid> {
        self.vhat.grid()
    }

    pub fn vhat(&self) -> &RealField {
        &self.vhat
    }

    pub fn values(&self) -> &[f64] {
        self.vhat.values()
    }

    /// v̂(0).
    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn norm_l1(&self) -> f64 {
        self.norm_l1
    }

    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    /// ‖v̂‖ in L¹ with weight √(1+E).
    pub fn norm_l1_sqrt_energy(&self) -> f64 {
        self.norm_l1_sqrt
    }

    /// ⟨⟨v̂⟩⟩ = ‖v̂‖_{L¹_{√(1+E)}} + ‖v̂‖_∞.
    pub fn weighted_norm(&self) -> f64 {
        self.norm_l1_sqrt + self.norm_inf
    }

    pub fn is_zero(&self) -> bool {
        self.norm_inf == 0.0
    }
}

pub fn build_potential(grid: &Arc<LatticeGrid>, kind: PotentialKind) -> Result<Potential> {
    Potential::new(grid, kind)
}

pub fn weighted_v_norm(pot: &Potential) -> f64 {
    pot.weighted_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn examples() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 3).unwrap();
        let p = build_potential(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 1.0 }).unwrap();
        assert_eq!(p.v0(), 1.0);
        assert!(p.vhat().is_even(0.0));
        assert!(weighted_v_norm(&p) >= p.norm_inf());

        let z = build_potential(&g, PotentialKind::Zero).unwrap();
        assert_eq!((z.norm_l1(), z.norm_inf(), weighted_v_norm(&z)), (0.0, 0.0, 0.0));

        let g1 = LatticeGrid::shared(1, 2.0 * PI, 1).unwrap();
        let c = build_potential(&g1, PotentialKind::Constant { amplitude: 2.0 }).unwrap();
        assert!((c.norm_l1() - 6.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(c.norm_inf(), 2.0);

        let g0 = LatticeGrid::shared(1, 2.0 * PI, 0).unwrap();
        let c = build_potential(&g0, PotentialKind::Constant { amplitude: 1.0 }).unwrap();
        assert!((weighted_v_norm(&c) - (1.0 + 1.0 / (2.0 * PI))).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_amplitude() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 1).unwrap();
        assert!(build_potential(&g, PotentialKind::Constant { amplitude: -1.0 }).is_err());
        assert!(build_potential(&g, PotentialKind::Gaussian { amplitude: -1.0, width: 1.0 }).is_err());
        assert!(build_potential(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 0.0 }).is_err());
    }
}
