//! Per-mode 2×2 covariance formulation: R = [[Γᵀ, Σᵀ], [Σ̄ᵀ, 1+Γᵀ]],
//! H = [[h_Γ, h_Σ], [h̄_Σ, h_Γ]], S = diag(1, −1) and the propagator V with
//! i∂V† = S H V†, so that R_t = V†_t R₀ V_t.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hfb::{mean_fields, AssembledFields, HfbHistory};
use crate::lattice::LatticeGrid;
use crate::potential::Potential;

pub type Mat2 = [[C64; 2]; 2];

const O: C64 = C64 { re: 0.0, im: 0.0 };
const I1: C64 = C64 { re: 1.0, im: 0.0 };

pub const IDENTITY: Mat2 = [[I1, O], [O, I1]];
pub const S: Mat2 = [[I1, O], [O, C64 { re: -1.0, im: 0.0 }]];

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[O; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn lin(x: f64, a: &Mat2, y: f64, b: &Mat2) -> Mat2 {
    let mut c = [[O; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][j] * x + b[i][j] * y;
        }
    }
    c
}

fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    lin(1.0, &mul(a, b), -1.0, &mul(b, a))
}

pub fn max_entry_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// Eigenvalues of a hermitian 2×2 matrix, ascending, from trace and determinant.
pub fn hermitian_eigenvalues(m: &Mat2) -> (f64, f64) {
    let (a, d) = (m[0][0].re, m[1][1].re);
    let half = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + m[0][1].norm_sqr()).sqrt();
    (half - r, half + r)
}

/// e^M = e^{τ}(cosh δ·1 + sinh δ/δ·(M − τ)), τ = tr M/2, δ² = −det(M − τ).
pub fn expm(m: &Mat2) -> Mat2 {
    let tau = (m[0][0] + m[1][1]) * 0.5;
    let a = m[0][0] - tau;
    let delta = (a * a + m[0][1] * m[1][0]).sqrt();
    let (ch, sh) = if delta.norm() < 1e-4 {
        let d2 = delta * delta;
        (I1 + d2 * 0.5 + d2 * d2 / 24.0, I1 + d2 / 6.0 + d2 * d2 / 120.0)
    } else {
        (delta.cosh(), delta.sinh() / delta)
    };
    let e = tau.exp();
    [[e * (ch + sh * a), e * sh * m[0][1]], [e * sh * m[1][0], e * (ch - sh * a)]]
}

#[derive(Debug, Clone)]
pub struct SymplecticFrame {
    pub grid: Arc<LatticeGrid>,
    pub t: f64,
    pub r: Vec<Mat2>,
    pub v: Vec<Mat2>,
}

impl SymplecticFrame {
    pub fn min_eigenvalue(&self) -> f64 {
        self.r.iter().map(|m| hermitian_eigenvalues(m).0).fold(f64::INFINITY, f64::min)
    }
}

pub fn covariance(gamma_t: f64, sigma_t: C64) -> Mat2 {
    [[C64::from(gamma_t), sigma_t], [sigma_t.conj(), C64::from(1.0 + gamma_t)]]
}

pub fn build_frame(assembled: &AssembledFields) -> SymplecticFrame {
    let grid = assembled.gamma_t.grid().clone();
    let r = (0..grid.len()).map(|i| covariance(assembled.gamma_t.at(i), assembled.sigma_t.at(i))).collect();
    SymplecticFrame { v: vec![IDENTITY; grid.len()], grid, t: 0.0, r }
}

/// A = −i S H at every stored step and mode.
fn generators(history: &HfbHistory, pot: &Potential) -> Result<Vec<Vec<Mat2>>> {
    let cfg = &history.config;
    let grid = history.grid();
    let minus_i = C64::new(0.0, -1.0);
    history
        .states
        .iter()
        .map(|s| {
            let (cg, cs) = mean_fields(s, cfg, pot)?;
            Ok((0..grid.len())
                .map(|p| {
                    let hg = C64::from(grid.kinetic(p) + cfg.lambda * cg.at(p));
                    let hs = cs.at(p) * cfg.lambda;
                    [[minus_i * hg, minus_i * hs], [-minus_i * hs.conj(), -minus_i * hg]]
                })
                .collect())
        })
        .collect()
}

/// V at every stored step. Two-step fourth-order Magnus on the stored
/// samples; odd steps are reached by a one-step Magnus from the previous
/// even step.
pub fn propagate_v(frame: &SymplecticFrame, history: &HfbHistory, pot: &Potential) -> Result<Vec<SymplecticFrame>> {
    if !frame.grid.same_as(history.grid()) {
        return Err(Error::GridMismatch);
    }
    let a = generators(history, pot)?;
    let dt = history.dt();
    let steps = history.len() - 1;
    let n = frame.grid.len();

    let per_mode: Vec<Vec<Mat2>> = (0..n)
        .into_par_iter()
        .map(|p| {
            // U = V†.
            let mut out = Vec::with_capacity(steps + 1);
            let mut u = adjoint(&frame.v[p]);
            out.push(u);
            let mut k = 0;
            while k < steps {
                let a0 = &a[k][p];
                let a1 = &a[k + 1][p];
                let one = lin(0.5 * dt, &lin(1.0, a0, 1.0, a1), -dt * dt / 12.0, &commutator(a0, a1));
                out.push(mul(&expm(&one), &u));
                if k + 2 <= steps {
                    let a2 = &a[k + 2][p];
                    let h = 2.0 * dt;
                    let sum = lin(1.0, &lin(1.0, a0, 4.0, a1), 1.0, a2);
                    let om = lin(h / 6.0, &sum, -h * h / 12.0, &commutator(a0, a2));
                    u = mul(&expm(&om), &u);
                    out.push(u);
                }
                k += 2;
            }
            out
        })
        .collect();

    let mut frames = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mut v = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        for p in 0..n {
            let u = per_mode[p][k];
            if u.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite { field: "V", n: frame.grid.n_slice(p).to_vec(), step: k });
            }
            let vp = adjoint(&u);
            r.push(mul(&mul(&u, &frame.r[p]), &vp));
            v.push(vp);
        }
        frames.push(SymplecticFrame { grid: frame.grid.clone(), t: history.states[k].t, r, v });
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub max_reconstruction_err: f64,
    #[serde(rename = "max_S_err")]
    pub max_s_err: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    pub fn merge(self, other: InvariantReport) -> InvariantReport {
        InvariantReport {
            max_reconstruction_err: self.max_reconstruction_err.max(other.max_reconstruction_err),
            max_s_err: self.max_s_err.max(other.max_s_err),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

/// ‖R_direct − V†R₀V‖_max, ‖VSV† − S‖_max and min eig R_direct.
pub fn check_invariants(frame_t: &SymplecticFrame, frame_0: &SymplecticFrame, r_direct: &SymplecticFrame) -> InvariantReport {
    let mut rec: f64 = 0.0;
    let mut serr: f64 = 0.0;
    for p in 0..frame_t.v.len() {
        let v = &frame_t.v[p];
        let vd = adjoint(v);
        rec = rec.max(max_entry_diff(&r_direct.r[p], &mul(&mul(&vd, &frame_0.r[p]), v)));
        serr = serr.max(max_entry_diff(&mul(&mul(v, &S), &vd), &S));
    }
    InvariantReport { max_reconstruction_err: rec, max_s_err: serr, min_eigenvalue: r_direct.min_eigenvalue() }
}

/// Runs the full check over a history.
pub fn verify_history(history: &HfbHistory, pot: &Potential) -> Result<InvariantReport> {
    let cfg = &history.config;
    let frame0 = build_frame(&crate::hfb::assemble_totals(&history.states[0], cfg));
    let frames = propagate_v(&frame0, history, pot)?;
    let mut rep = InvariantReport { max_reconstruction_err: 0.0, max_s_err: 0.0, min_eigenvalue: f64::INFINITY };
    for (s, f) in history.states.iter().zip(&frames) {
        let direct = build_frame(&crate::hfb::assemble_totals(s, cfg));
        rep = rep.merge(check_invariants(f, &frame0, &direct));
    }
    Ok(rep)
}
