//! Bogoliubov coefficients and the cubic/quartic collision kernels.
//!
//! Kernels take lattice indices; v̂ evaluated at a momentum sum that leaves
//! the truncated grid is 0, consistent with the zero-padded convolutions.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hfb::{HfbState, GAMMA_FLOOR};
use crate::lattice::{ComplexField, LatticeGrid, RealField};
use crate::potential::Potential;

#[derive(Debug, Clone)]
pub struct UvFields {
    pub u: RealField,
    pub v: ComplexField,
    pub phi: C64,
}

impl UvFields {
    /// max_p |u² − |v|² − 1|.
    pub fn identity_error(&self) -> f64 {
        self.u
            .values()
            .iter()
            .zip(self.v.values())
            .map(|(u, v)| (u * u - v.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// u = √(1+γ), v = σ/√(1+γ); γ is clamped at 0 inside the root only.
pub fn bogoliubov_uv(state: &HfbState) -> Result<UvFields> {
    let grid = state.grid();
    if let Some(i) = state.gamma.values().iter().position(|&g| g < GAMMA_FLOOR) {
        return Err(Error::NegativeGamma { value: state.gamma.at(i), n: grid.n_slice(i).to_vec(), step: 0 });
    }
    let u = state.gamma.map(|g| (1.0 + g.max(0.0)).sqrt());
    let v = ComplexField::from_fn(grid, |i| state.sigma.at(i) / u.at(i));
    Ok(UvFields { u, v, phi: state.phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicKind {
    B03,
    B12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarticKind {
    B04,
    B13,
    B22,
}

/// Index-based kernel evaluation at one time.
pub struct KernelSet<'a> {
    grid: &'a LatticeGrid,
    vhat: &'a [f64],
    u: &'a [f64],
    v: &'a [C64],
    phi: C64,
    sqrt_vol: f64,
}

impl<'a> KernelSet<'a> {
    pub fn new(uv: &'a UvFields, pot: &'a Potential) -> Result<Self> {
        let grid: &Arc<LatticeGrid> = uv.u.grid();
        if !grid.same_as(pot.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            vhat: pot.values(),
            u: uv.u.values(),
            v: uv.v.values(),
            phi: uv.phi,
            sqrt_vol: grid.volume().sqrt(),
        })
    }

    #[inline]
    fn vs(&self, i: usize, j: usize) -> f64 {
        self.grid.add(i, j).map_or(0.0, |k| self.vhat[k])
    }

    #[inline]
    fn vd(&self, i: usize, j: usize) -> f64 {
        self.grid.sub(i, j).map_or(0.0, |k| self.vhat[k])
    }

    pub fn b03(&self, i: usize, j: usize, k: usize) -> C64 {
        let (u1, u2, u3) = (self.u[i], self.u[j], self.u[k]);
        let (v1, v2, v3) = (self.v[i], self.v[j], self.v[k]);
        let (f, fb) = (self.phi, self.phi.conj());
        let (w1, w2, w3) = (self.vhat[i], self.vhat[j], self.vhat[k]);
        let t1 = (v3 * f * (u1 * u2) + v1 * v2 * fb * u3) * (w1 + w2);
        let t2 = (v1 * f * (u2 * u3) + v2 * v3 * fb * u1) * (w2 + w3);
        let t3 = (v2 * f * (u1 * u3) + v1 * v3 * fb * u2) * (w1 + w3);
        (t1 + t2 + t3) * self.sqrt_vol
    }

    pub fn b12(&self, i: usize, j: usize, k: usize) -> C64 {
        let (u1, u2, u3) = (self.u[i], self.u[j], self.u[k]);
        let (v1, v2, v3c) = (self.v[i], self.v[j], self.v[k].conj());
        let (f, fb) = (self.phi, self.phi.conj());
        let (w1, w2, w3) = (self.vhat[i], self.vhat[j], self.vhat[k]);
        let t1 = (f * (u1 * u2 * u3) + v1 * v2 * v3c * fb) * (w1 + w2);
        let t2 = (v1 * v3c * f * u2 + v2 * fb * (u1 * u3)) * (w2 + w3);
        let t3 = (v2 * v3c * f * u1 + v1 * fb * (u2 * u3)) * (w1 + w3);
        (t1 + t2 + t3) * self.sqrt_vol
    }

    pub fn b04(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let (u1, u2, u3, u4) = (self.u[i], self.u[j], self.u[k], self.u[l]);
        let (v1, v2, v3, v4) = (self.v[i], self.v[j], self.v[k], self.v[l]);
        let (s12, s13, s23) = (self.vs(i, j), self.vs(i, k), self.vs(j, k));
        let t1 = (v3 * v4 * (u1 * u2) + v1 * v2 * (u3 * u4)) * (s13 + s23);
        let t2 = (v2 * v4 * (u1 * u3) + v1 * v3 * (u2 * u4)) * (s12 + s23);
        let t3 = (v2 * v3 * (u1 * u4) + v1 * v4 * (u2 * u3)) * (s12 + s13);
        t1 + t2 + t3
    }

    pub fn b13(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let (u1, u2, u3, u4) = (self.u[i], self.u[j], self.u[k], self.u[l]);
        let (v1, v2, v3, v4c) = (self.v[i], self.v[j], self.v[k], self.v[l].conj());
        let (s12, s13, s23) = (self.vs(i, j), self.vs(i, k), self.vs(j, k));
        let t1 = (v3 * (u1 * u2 * u4) + v1 * v2 * v4c * u3) * (s13 + s23);
        let t2 = (v2 * (u1 * u3 * u4) + v1 * v3 * v4c * u2) * (s12 + s23);
        let t3 = (v1 * (u2 * u3 * u4) + v2 * v3 * v4c * u1) * (s12 + s13);
        t1 + t2 + t3
    }

    /// The second v̄ in the first term is read as v̄(p₄).
    pub fn b22(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let (u1, u2, u3, u4) = (self.u[i], self.u[j], self.u[k], self.u[l]);
        let (v1, v2, v3c, v4c) = (self.v[i], self.v[j], self.v[k].conj(), self.v[l].conj());
        let s12 = self.vs(i, j);
        let (d13, d23) = (self.vd(i, k), self.vd(j, k));
        let t1 = (C64::from(u1 * u2 * u3 * u4) + v1 * v2 * v3c * v4c) * (d13 + d23);
        let t2 = (v2 * v3c * (u1 * u4) + v1 * v4c * (u2 * u3)) * (s12 + d23);
        let t3 = (v1 * v3c * (u2 * u4) + v2 * v4c * (u1 * u3)) * (s12 + d13);
        t1 + t2 + t3
    }

    pub fn cubic(&self, kind: CubicKind, i: usize, j: usize, k: usize) -> C64 {
        match kind {
            CubicKind::B03 => self.b03(i, j, k),
            CubicKind::B12 => self.b12(i, j, k),
        }
    }

    pub fn quartic(&self, kind: QuarticKind, i: usize, j: usize, k: usize, l: usize) -> C64 {
        match kind {
            QuarticKind::B04 => self.b04(i, j, k, l),
            QuarticKind::B13 => self.b13(i, j, k, l),
            QuarticKind::B22 => self.b22(i, j, k, l),
        }
    }
}

fn resolve(grid: &LatticeGrid, n: &[i32]) -> Result<usize> {
    grid.index_of(n).ok_or_else(|| Error::OffGrid(n.to_vec()))
}

/// Cubic kernel at integer momentum labels n₁, n₂, n₃ (p = 2πn/L).
pub fn eval_cubic_kernel(kind: CubicKind, uv: &UvFields, pot: &Potential, n: [&[i32]; 3]) -> Result<C64> {
    let ks = KernelSet::new(uv, pot)?;
    let g = uv.u.grid();
    let [a, b, c] = n;
    Ok(ks.cubic(kind, resolve(g, a)?, resolve(g, b)?, resolve(g, c)?))
}

pub fn eval_quartic_kernel(kind: QuarticKind, uv: &UvFields, pot: &Potential, n: [&[i32]; 4]) -> Result<C64> {
    let ks = KernelSet::new(uv, pot)?;
    let g = uv.u.grid();
    let [a, b, c, d] = n;
    Ok(ks.quartic(kind, resolve(g, a)?, resolve(g, b)?, resolve(g, c)?, resolve(g, d)?))
}

/// Largest relative deviation of each kernel under its index symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub b12: f64,
    pub b03: f64,
    pub b04: f64,
    pub b13: f64,
    pub b22: f64,
    /// max |u² − |v|² − 1|.
    pub uv_identity: f64,
    pub tuples: usize,
}

impl SymmetryReport {
    pub fn worst(&self) -> f64 {
        [self.b12, self.b03, self.b04, self.b13, self.b22].into_iter().fold(0.0, f64::max)
    }
}

const PERM3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn perms4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|k| p.contains(&k)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Random tuples on the momentum-conservation surface of each kernel,
/// compared with every permutation of its symmetry group.
pub fn kernel_symmetry(uv: &UvFields, pot: &Potential, samples: usize, seed: u64) -> Result<SymmetryReport> {
    let ks = KernelSet::new(uv, pot)?;
    let g = uv.u.grid();
    let n = g.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let pick = |rng: &mut StdRng, close: &dyn Fn(usize, usize, usize) -> Option<usize>| loop {
        let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        if let Some(d) = close(a, b, c) {
            return [a, b, c, d];
        }
    };
    let rel = |dev: f64, scale: f64| if scale > 0.0 { dev / scale } else { dev };

    let (mut d12, mut s12, mut d03, mut s03) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut d04, mut s04, mut d13, mut s13, mut d22, mut s22) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let p4 = perms4();
    for _ in 0..samples {
        let [a, b, _, k] = pick(&mut rng, &|a, b, _| g.add(a, b));
        let base = ks.b12(a, b, k);
        s12 = s12.max(base.norm());
        d12 = d12.max((ks.b12(b, a, k) - base).norm());

        let [a, b, _, k] = pick(&mut rng, &|a, b, _| g.add(a, b).map(|k| g.neg(k)));
        let t = [a, b, k];
        let base = ks.b03(a, b, k);
        s03 = s03.max(base.norm());
        for p in PERM3 {
            d03 = d03.max((ks.b03(t[p[0]], t[p[1]], t[p[2]]) - base).norm());
        }

        let t = pick(&mut rng, &|a, b, c| g.add3(a, b, c).map(|k| g.neg(k)));
        let base = ks.b04(t[0], t[1], t[2], t[3]);
        s04 = s04.max(base.norm());
        for p in &p4 {
            d04 = d04.max((ks.b04(t[p[0]], t[p[1]], t[p[2]], t[p[3]]) - base).norm());
        }

        let t = pick(&mut rng, &|a, b, c| g.add3(a, b, c));
        let base = ks.b13(t[0], t[1], t[2], t[3]);
        s13 = s13.max(base.norm());
        for p in PERM3 {
            d13 = d13.max((ks.b13(t[p[0]], t[p[1]], t[p[2]], t[3]) - base).norm());
        }

        let t = pick(&mut rng, &|a, b, c| g.add3(a, b, g.neg(c)));
        let base = ks.b22(t[0], t[1], t[2], t[3]);
        s22 = s22.max(base.norm());
        for (x, y, z, w) in [(1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2)] {
            d22 = d22.max((ks.b22(t[x], t[y], t[z], t[w]) - base).norm());
        }
    }
    Ok(SymmetryReport {
        b12: rel(d12, s12),
        b03: rel(d03, s03),
        b04: rel(d04, s04),
        b13: rel(d13, s13),
        b22: rel(d22, s22),
        uv_identity: uv.identity_error(),
        tuples: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialKind;
    use std::f64::consts::PI;

    fn state(g: &Arc<LatticeGrid>, gamma: f64, sigma: C64) -> HfbState {
        HfbState {
            t: 0.0,
            phi: C64::new(0.4, 0.1),
            gamma: RealField::constant(g, gamma),
            sigma: ComplexField::constant(g, sigma),
        }
    }

    #[test]
    fn uv_examples() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 1).unwrap();
        let uv = bogoliubov_uv(&state(&g, 0.0, C64::new(0.0, 0.0))).unwrap();
        assert!(uv.u.values().iter().all(|&u| u == 1.0));
        assert!(uv.v.values().iter().all(|v| v.norm() == 0.0));
        let uv = bogoliubov_uv(&state(&g, 3.0, C64::new(2.0 * 3f64.sqrt(), 0.0))).unwrap();
        assert_eq!(uv.u.at(0), 2.0);
        assert!((uv.v.at(0).re - 3f64.sqrt()).abs() < 1e-15);
        assert!(bogoliubov_uv(&state(&g, -1e-6, C64::new(0.0, 0.0))).is_err());
    }

    #[test]
    fn vanishing_pair_field() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 3).unwrap();
        let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.3, width: 1.5 }).unwrap();
        let uv = bogoliubov_uv(&state(&g, 0.0, C64::new(0.0, 0.0))).unwrap();
        let ks = KernelSet::new(&uv, &pot).unwrap();
        let w = pot.values();
        for (i, j, k) in [(0, 1, 2), (3, 3, 6), (5, 2, 0)] {
            let b12 = ks.b12(i, j, k);
            let want = uv.phi * g.volume().sqrt() * (w[i] + w[j]);
            assert!((b12 - want).norm() < 1e-15);
            assert_eq!(ks.b03(i, j, k), C64::new(0.0, 0.0));
        }
        let (i, j, k) = (1, 4, 2);
        let l = g.sub(g.add(i, j).unwrap(), k).unwrap();
        let want = w[g.sub(i, k).unwrap()] + w[g.sub(j, k).unwrap()];
        assert!((ks.b22(i, j, k, l).re - want).abs() < 1e-15);
        assert_eq!(ks.b04(i, j, k, l), C64::new(0.0, 0.0));
        assert_eq!(ks.b13(i, j, k, l), C64::new(0.0, 0.0));
    }

    #[test]
    fn off_grid_rejected() {
        let g = LatticeGrid::shared(1, 2.0 * PI, 2).unwrap();
        let pot = Potential::new(&g, PotentialKind::Constant { amplitude: 1.0 }).unwrap();
        let uv = bogoliubov_uv(&state(&g, 0.5, C64::new(0.75f64.sqrt(), 0.0))).unwrap();
        assert!(matches!(
            eval_cubic_kernel(CubicKind::B12, &uv, &pot, [&[0], &[1], &[3]]),
            Err(Error::OffGrid(_))
        ));
        assert!(eval_quartic_kernel(QuarticKind::B22, &uv, &pot, [&[0], &[1], &[2], &[-1]]).is_ok());
    }
}
