//! Brute-force references. Nothing here calls the optimized convolution,
//! kernel, RHS or accumulator code; momenta are matched by integer labels and
//! every delta is an explicit Kronecker test carrying its |Λ| weight.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hfb::{HfbConfig, HfbHistory, HfbState, Order};
use crate::lattice::{ComplexField, LatticeField, RealField, Scalar};
use crate::potential::Potential;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: usize,
}

impl OracleReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Relative error max|a−b| / max(max|oracle|, 1e−30).
pub fn compare<T: Scalar>(fast: &[T], oracle: &[T]) -> OracleReport {
    let mut max_abs = 0.0;
    let mut worst = 0;
    let mut scale: f64 = 0.0;
    for (i, (a, b)) in fast.iter().zip(oracle).enumerate() {
        let d = (*a - *b).modulus();
        if d > max_abs {
            max_abs = d;
            worst = i;
        }
        scale = scale.max(b.modulus());
    }
    OracleReport { max_rel_err: max_abs / scale.max(1e-30), max_abs_err: max_abs, worst_index: worst }
}

pub fn compare_scalar(fast: C64, oracle: C64) -> OracleReport {
    compare(&[fast], &[oracle])
}

/// Integer labels and lookups, rebuilt from the grid's point list.
struct Labels {
    n: Vec<Vec<i32>>,
    vol: f64,
}

impl Labels {
    fn new<T: Scalar>(f: &LatticeField<T>) -> Self {
        let g = f.grid();
        Self { n: (0..g.len()).map(|i| g.n_slice(i).to_vec()).collect(), vol: g.volume() }
    }

    fn find(&self, m: &[i32]) -> Option<usize> {
        self.n.iter().position(|x| x.as_slice() == m)
    }

    fn combo(&self, terms: &[(i32, usize)]) -> Vec<i32> {
        let d = self.n[0].len();
        let mut out = vec![0; d];
        for &(c, i) in terms {
            for a in 0..d {
                out[a] += c * self.n[i][a];
            }
        }
        out
    }

    /// δ(Σ c_k p_k) = |Λ| if the combination vanishes.
    fn delta(&self, terms: &[(i32, usize)]) -> f64 {
        if self.combo(terms).iter().all(|&x| x == 0) {
            self.vol
        } else {
            0.0
        }
    }

    fn momentum(&self, i: usize, length: f64) -> Vec<f64> {
        self.n[i].iter().map(|&k| 2.0 * std::f64::consts::PI * k as f64 / length).collect()
    }
}

/// Direct double loop for (f*g)(p) = (1/|Λ|)Σ_q f(p−q)g(q), zero outside the grid.
pub fn naive_convolve<T: Scalar>(f: &LatticeField<T>, g: &LatticeField<T>) -> Result<LatticeField<T>> {
    if !f.grid().same_as(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let lab = Labels::new(f);
    let len = f.values().len();
    let mut out = Vec::with_capacity(len);
    for p in 0..len {
        let mut acc = T::zero();
        for q in 0..len {
            if let Some(k) = lab.find(&lab.combo(&[(1, p), (-1, q)])) {
                acc += f.at(k) * g.at(q);
            }
        }
        out.push(acc * (1.0 / lab.vol));
    }
    LatticeField::new(f.grid(), out)
}

/// Independent transcription of the five collision kernels at one time.
struct NaiveKernels<'a> {
    lab: &'a Labels,
    vhat: Vec<f64>,
    u: Vec<f64>,
    v: Vec<C64>,
    phi: C64,
}

impl<'a> NaiveKernels<'a> {
    fn new(lab: &'a Labels, state: &HfbState, pot: &Potential) -> Self {
        let u: Vec<f64> = state.gamma.values().iter().map(|g| (1.0 + g.max(0.0)).sqrt()).collect();
        let v = state.sigma.values().iter().zip(&u).map(|(s, u)| s / u).collect();
        Self { lab, vhat: pot.values().to_vec(), u, v, phi: state.phi }
    }

    fn vh(&self, terms: &[(i32, usize)]) -> f64 {
        self.lab.find(&self.lab.combo(terms)).map_or(0.0, |k| self.vhat[k])
    }

    fn b03(&self, p: [usize; 3]) -> C64 {
        let (u, v, f) = (|k: usize| self.u[p[k]], |k: usize| self.v[p[k]], self.phi);
        let w = |k: usize| self.vhat[p[k]];
        let mut s = ZERO;
        s += (f * u(0) * u(1) * v(2) + f.conj() * v(0) * v(1) * u(2)) * (w(0) + w(1));
        s += (f * v(0) * u(1) * u(2) + f.conj() * u(0) * v(1) * v(2)) * (w(1) + w(2));
        s += (f * u(0) * v(1) * u(2) + f.conj() * v(0) * u(1) * v(2)) * (w(0) + w(2));
        s * self.lab.vol.sqrt()
    }

    fn b12(&self, p: [usize; 3]) -> C64 {
        let (u, v, f) = (|k: usize| self.u[p[k]], |k: usize| self.v[p[k]], self.phi);
        let w = |k: usize| self.vhat[p[k]];
        let mut s = ZERO;
        s += (f * u(0) * u(1) * u(2) + f.conj() * v(0) * v(1) * v(2).conj()) * (w(0) + w(1));
        s += (f * v(0) * u(1) * v(2).conj() + f.conj() * u(0) * v(1) * u(2)) * (w(1) + w(2));
        s += (f * u(0) * v(1) * v(2).conj() + f.conj() * v(0) * u(1) * u(2)) * (w(0) + w(2));
        s * self.lab.vol.sqrt()
    }

    fn b04(&self, p: [usize; 4]) -> C64 {
        let (u, v) = (|k: usize| self.u[p[k]], |k: usize| self.v[p[k]]);
        let vs = |a: usize, b: usize| self.vh(&[(1, p[a]), (1, p[b])]);
        (u(0) * u(1) * v(2) * v(3) + v(0) * v(1) * u(2) * u(3)) * (vs(0, 2) + vs(1, 2))
            + (u(0) * v(1) * u(2) * v(3) + v(0) * u(1) * v(2) * u(3)) * (vs(0, 1) + vs(1, 2))
            + (u(0) * v(1) * v(2) * u(3) + v(0) * u(1) * u(2) * v(3)) * (vs(0, 1) + vs(0, 2))
    }

    fn b13(&self, p: [usize; 4]) -> C64 {
        let (u, v) = (|k: usize| self.u[p[k]], |k: usize| self.v[p[k]]);
        let vs = |a: usize, b: usize| self.vh(&[(1, p[a]), (1, p[b])]);
        (u(0) * u(1) * v(2) * u(3) + v(0) * v(1) * u(2) * v(3).conj()) * (vs(0, 2) + vs(1, 2))
            + (u(0) * v(1) * u(2) * u(3) + v(0) * u(1) * v(2) * v(3).conj()) * (vs(0, 1) + vs(1, 2))
            + (v(0) * u(1) * u(2) * u(3) + u(0) * v(1) * v(2) * v(3).conj()) * (vs(0, 1) + vs(0, 2))
    }

    fn b22(&self, p: [usize; 4]) -> C64 {
        let (u, v) = (|k: usize| self.u[p[k]], |k: usize| self.v[p[k]]);
        let vs = |a: usize, b: usize| self.vh(&[(1, p[a]), (1, p[b])]);
        let vd = |a: usize, b: usize| self.vh(&[(1, p[a]), (-1, p[b])]);
        (v(0) * v(1) * v(2).conj() * v(3).conj() + u(0) * u(1) * u(2) * u(3)) * (vd(0, 2) + vd(1, 2))
            + (u(0) * v(1) * v(2).conj() * u(3) + v(0) * u(1) * u(2) * v(3).conj()) * (vs(0, 1) + vd(1, 2))
            + (v(0) * u(1) * v(2).conj() * u(3) + u(0) * v(1) * u(2) * v(3).conj()) * (vs(0, 1) + vd(0, 2))
    }
}

const MAX_STEPS: usize = 64;

fn guard(history: &HfbHistory, k: usize, max_cutoff: usize) -> Result<()> {
    let g = history.grid();
    if g.dim() != 1 || g.cutoff() > max_cutoff {
        return Err(Error::SizeGuard(format!(
            "oracle needs d = 1 and M ≤ {max_cutoff}, got d = {}, M = {}",
            g.dim(),
            g.cutoff()
        )));
    }
    if k >= history.len() || k > MAX_STEPS {
        return Err(Error::SizeGuard(format!("oracle limited to {MAX_STEPS} steps within the history, got {k}")));
    }
    Ok(())
}

/// Θ_k by its own trapezoid over the stored Ω samples.
fn phases(history: &HfbHistory) -> Vec<Vec<f64>> {
    let dt = history.dt();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(history.len());
    for (k, om) in history.omegas.iter().enumerate() {
        let row = if k == 0 {
            vec![0.0; om.values().len()]
        } else {
            let prev = &out[k - 1];
            (0..prev.len()).map(|p| prev[p] + 0.5 * dt * (history.omegas[k - 1].at(p) + om.at(p))).collect()
        };
        out.push(row);
    }
    out
}

/// Trapezoid weight of node j in ∫₀^{t_i}.
fn weight(j: usize, i: usize, dt: f64) -> f64 {
    if i == 0 {
        0.0
    } else if j == 0 || j == i {
        0.5 * dt
    } else {
        dt
    }
}

struct Setup<'a> {
    lab: Labels,
    theta: Vec<Vec<f64>>,
    history: &'a HfbHistory,
    pot: &'a Potential,
    h: &'a [RealField],
    lambda: f64,
    dt: f64,
}

impl<'a> Setup<'a> {
    fn new(history: &'a HfbHistory, pot: &'a Potential, h: &'a [RealField], k: usize) -> Result<Self> {
        if h.len() <= k {
            return Err(Error::Invalid(format!("need h for steps 0..={k}, got {}", h.len())));
        }
        Ok(Self {
            lab: Labels::new(&history.states[0].gamma),
            theta: phases(history),
            history,
            pot,
            h,
            lambda: history.config.lambda,
            dt: history.dt(),
        })
    }

    fn kern(&self, i: usize) -> NaiveKernels<'_> {
        NaiveKernels::new(&self.lab, &self.history.states[i], self.pot)
    }

    fn len(&self) -> usize {
        self.lab.n.len()
    }

    /// e^{i Σ c_k (Θ_i − Θ_j)(p_k)}.
    fn phase(&self, i: usize, j: usize, terms: &[(i32, usize)]) -> C64 {
        let x: f64 = terms.iter().map(|&(c, p)| c as f64 * (self.theta[i][p] - self.theta[j][p])).sum();
        C64::from_polar(1.0, x)
    }

    fn h(&self, j: usize, p: usize) -> f64 {
        self.h[j].at(p)
    }

    fn ht(&self, j: usize, p: usize) -> f64 {
        1.0 + self.h[j].at(p)
    }

    fn triples(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.len();
        (0..n).flat_map(move |a| (0..n).flat_map(move |b| (0..n).map(move |c| [a, b, c])))
    }

    /// Instantaneous Q₃(t_i, ·).
    fn q3_instant(&self, i: usize) -> Vec<f64> {
        let n = self.len();
        let vol = self.lab.vol;
        let meas = vol.powi(-3);
        let ki = self.kern(i);
        let mut out = vec![0.0; n];
        for j in 0..=i {
            let w = weight(j, i, self.dt);
            if w == 0.0 {
                continue;
            }
            let kj = self.kern(j);
            for p in 0..n {
                let mut acc = ZERO;
                for [a, b, c] in self.triples() {
                    let d1 = self.lab.delta(&[(1, a), (1, b), (-1, c)]);
                    if d1 != 0.0 {
                        let sc = self.lab.delta(&[(1, a), (-1, p)]) + self.lab.delta(&[(1, b), (-1, p)])
                            - self.lab.delta(&[(1, c), (-1, p)]);
                        let br = self.ht(j, a) * self.ht(j, b) * self.h(j, c) - self.h(j, a) * self.h(j, b) * self.ht(j, c);
                        acc += ki.b12([a, b, c]) * kj.b12([a, b, c]).conj()
                            * self.phase(i, j, &[(1, a), (1, b), (-1, c)])
                            * (0.5 * sc * d1 * br);
                    }
                    let d2 = self.lab.delta(&[(1, a), (1, b), (1, c)]);
                    if d2 != 0.0 {
                        let sc = self.lab.delta(&[(1, a), (-1, p)])
                            + self.lab.delta(&[(1, b), (-1, p)])
                            + self.lab.delta(&[(1, c), (-1, p)]);
                        let br = self.ht(j, a) * self.ht(j, b) * self.ht(j, c) - self.h(j, a) * self.h(j, b) * self.h(j, c);
                        acc += ki.b03([a, b, c]) * kj.b03([a, b, c]).conj()
                            * self.phase(i, j, &[(1, a), (1, b), (1, c)])
                            * (sc * d2 * br / 6.0);
                    }
                }
                out[p] += 2.0 * self.lambda * self.lambda * w * meas * acc.re;
            }
        }
        out
    }

    /// Instantaneous Q₃^(g)(t_i, ·).
    fn q3g_instant(&self, i: usize) -> Vec<C64> {
        let n = self.len();
        let meas = self.lab.vol.powi(-3);
        let ki = self.kern(i);
        let th = &self.theta[i];
        let mut out = vec![ZERO; n];
        for j in 0..=i {
            let w = weight(j, i, self.dt);
            if w == 0.0 {
                continue;
            }
            let kj = self.kern(j);
            for p in 0..n {
                let mut acc = ZERO;
                for [a, b, c] in self.triples() {
                    let cbar = self.lab.find(&self.lab.combo(&[(-1, c)])).expect("grid is symmetric");
                    let d1 = self.lab.delta(&[(1, a), (1, b), (-1, c)]);
                    if d1 != 0.0 {
                        let br = self.h(j, a) * self.h(j, b) * self.ht(j, c) - self.ht(j, a) * self.ht(j, b) * self.h(j, c);
                        let ph = self.phase(i, j, &[(1, a), (1, b), (-1, c)]);
                        let t1 = C64::from_polar(1.0, 2.0 * th[c]) * ph * ki.b03([a, b, cbar]) * kj.b12([a, b, c]).conj()
                            * self.lab.delta(&[(1, p), (-1, c)]);
                        let t2 = C64::from_polar(1.0, -2.0 * th[a]) * ph.conj() * ki.b12([a, b, cbar]).conj() * kj.b12([a, b, c])
                            * (2.0 * self.lab.delta(&[(1, p), (-1, a)]));
                        acc += (t1 - t2) * (d1 * br);
                    }
                    let d2 = self.lab.delta(&[(1, a), (1, b), (1, c)]);
                    if d2 != 0.0 {
                        let br = self.ht(j, a) * self.ht(j, b) * self.ht(j, c) - self.h(j, a) * self.h(j, b) * self.h(j, c);
                        let ph = self.phase(i, j, &[(1, a), (1, b), (1, c)]).conj();
                        acc += C64::from_polar(1.0, 2.0 * th[c]) * ph * ki.b12([a, b, cbar]).conj() * kj.b03([a, b, c])
                            * (self.lab.delta(&[(1, p), (-1, c)]) * d2 * br);
                    }
                }
                out[p] += acc * (self.lambda * self.lambda * w * meas);
            }
        }
        out
    }

    fn q3phi_instant(&self, i: usize) -> C64 {
        
        let meas = self.lab.vol.powi(-3);
        let ki = self.kern(i);
        let o = self.lab.find(&vec![0; self.lab.n[0].len()]).expect("origin");
        let mut out = ZERO;
        for j in 0..=i {
            let w = weight(j, i, self.dt);
            if w == 0.0 {
                continue;
            }
            let kj = self.kern(j);
            let mut acc = ZERO;
            for [a, b, c] in self.triples() {
                let d1 = self.lab.delta(&[(1, a), (1, b), (-1, c)]);
                if d1 != 0.0 {
                    let br = self.h(j, a) * self.h(j, b) * self.ht(j, c) - self.ht(j, a) * self.ht(j, b) * self.h(j, c);
                    let ph = self.phase(i, j, &[(1, a), (1, b), (-1, c)]);
                    let x = ph * ki.b13([o, a, b, c]) * kj.b12([a, b, c]).conj()
                        - ph.conj() * ki.b22([o, c, b, a]) * kj.b12([c, b, a]);
                    acc += x * (0.5 * d1 * br);
                }
                let d2 = self.lab.delta(&[(1, a), (1, b), (1, c)]);
                if d2 != 0.0 {
                    let br = self.h(j, a) * self.h(j, b) * self.h(j, c) - self.ht(j, a) * self.ht(j, b) * self.ht(j, c);
                    let ph = self.phase(i, j, &[(1, a), (1, b), (1, c)]);
                    let x = ki.b04([o, a, b, c]) * kj.b03([a, b, c]).conj() * ph
                        - ki.b13([a, b, c, o]).conj() * kj.b03([a, b, c]) * ph.conj();
                    acc += x * (d2 * br / 6.0);
                }
            }
            out += acc * (w * meas);
        }
        out * C64::from_polar(1.0, self.theta[i][o]) * (self.lambda * self.lambda)
        // the trailing factor is the s₁ phase e^{iΘ_{s₁}(0)}
    }

    fn q4_instant(&self, i: usize) -> Vec<f64> {
        let n = self.len();
        let meas = self.lab.vol.powi(-4);
        let ki = self.kern(i);
        let mut out = vec![0.0; n];
        for j in 0..=i {
            let w = weight(j, i, self.dt);
            if w == 0.0 {
                continue;
            }
            let kj = self.kern(j);
            let h = |p: usize| self.h(j, p);
            let ht = |p: usize| self.ht(j, p);
            for p in 0..n {
                let dp = |q: usize| self.lab.delta(&[(1, q), (-1, p)]);
                let mut acc = ZERO;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            for d in 0..n {
                                let q = [a, b, c, d];
                                let d22 = self.lab.delta(&[(1, a), (1, b), (-1, c), (-1, d)]);
                                if d22 != 0.0 {
                                    let br = ht(a) * ht(b) * h(c) * h(d) - h(a) * h(b) * ht(c) * ht(d);
                                    let sc = dp(a) + dp(b) - dp(c) - dp(d);
                                    acc += ki.b22(q) * kj.b22(q).conj()
                                        * self.phase(i, j, &[(1, a), (1, b), (-1, c), (-1, d)])
                                        * (0.25 * sc * d22 * br);
                                }
                                let d13 = self.lab.delta(&[(1, a), (1, b), (1, c), (-1, d)]);
                                if d13 != 0.0 {
                                    let br = ht(a) * ht(b) * ht(c) * h(d) - h(a) * h(b) * h(c) * ht(d);
                                    let sc = dp(a) + dp(b) + dp(c) - dp(d);
                                    acc += ki.b13(q) * kj.b13(q).conj()
                                        * self.phase(i, j, &[(1, a), (1, b), (1, c), (-1, d)])
                                        * (sc * d13 * br / 6.0);
                                }
                                let d04 = self.lab.delta(&[(1, a), (1, b), (1, c), (1, d)]);
                                if d04 != 0.0 {
                                    let br = ht(a) * ht(b) * ht(c) * ht(d) - h(a) * h(b) * h(c) * h(d);
                                    let sc = dp(a) + dp(b) + dp(c) + dp(d);
                                    acc += ki.b04(q) * kj.b04(q).conj()
                                        * self.phase(i, j, &[(1, a), (1, b), (1, c), (1, d)])
                                        * (sc * d04 * br / 24.0);
                                }
                            }
                        }
                    }
                }
                out[p] += 2.0 * self.lambda * self.lambda * w * meas * acc.re;
            }
        }
        out
    }

    fn q33phi_instant(&self, i: usize) -> C64 {
        let q3 = self.q3_instant(i);
        let g = self.q3g_instant(i);
        let ki = self.kern(i);
        let o = self.lab.find(&vec![0; self.lab.n[0].len()]).expect("origin");
        let mut acc = ZERO;
        for p in 0..self.len() {
            acc += ki.b12([o, p, p]) * q3[p] + ki.b12([p, p, o]).conj() * g[p] + ki.b03([p, p, o]) * g[p].conj();
        }
        C64::from_polar(1.0, self.theta[i][o]) * acc * (self.lambda / self.lab.vol)
    }

    fn outer<T: Scalar>(&self, k: usize, f: impl Fn(usize) -> Vec<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for i in 0..=k {
            let a = if k == 0 {
                0.0
            } else if i == 0 || i == k {
                0.5 * self.dt
            } else {
                self.dt
            };
            if a == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(f(i)) {
                *o += x * a;
            }
        }
        out
    }
}

/// ∫₀^{t_k} Q₃ with h_j = `h[j]`.
pub fn naive_q3(history: &HfbHistory, pot: &Potential, h: &[RealField], k: usize) -> Result<RealField> {
    guard(history, k, 4)?;
    let s = Setup::new(history, pot, h, k)?;
    RealField::new(history.grid(), s.outer(k, |i| s.q3_instant(i)))
}

pub fn naive_q3g(history: &HfbHistory, pot: &Potential, h: &[RealField], k: usize) -> Result<ComplexField> {
    guard(history, k, 3)?;
    let s = Setup::new(history, pot, h, k)?;
    ComplexField::new(history.grid(), s.outer(k, |i| s.q3g_instant(i)))
}

pub fn naive_q3phi(history: &HfbHistory, pot: &Potential, h: &[RealField], k: usize) -> Result<C64> {
    guard(history, k, 3)?;
    let s = Setup::new(history, pot, h, k)?;
    Ok(s.outer(k, |i| vec![s.q3phi_instant(i)])[0])
}

pub fn naive_q33phi(history: &HfbHistory, pot: &Potential, h: &[RealField], k: usize) -> Result<C64> {
    guard(history, k, 3)?;
    let s = Setup::new(history, pot, h, k)?;
    Ok(s.outer(k, |i| vec![s.q33phi_instant(i)])[0])
}

pub fn naive_q4(history: &HfbHistory, pot: &Potential, h: &[RealField], k: usize) -> Result<RealField> {
    guard(history, k, 3)?;
    let s = Setup::new(history, pot, h, k)?;
    RealField::new(history.grid(), s.outer(k, |i| s.q4_instant(i)))
}

/// Plain-variable state for the reference integrator.
#[derive(Clone)]
struct Plain {
    phi: C64,
    gamma: Vec<f64>,
    sigma: Vec<C64>,
}

struct NaiveRhs<'a> {
    lab: Labels,
    config: &'a HfbConfig,
    vhat: Vec<f64>,
    kinetic: Vec<f64>,
}

impl<'a> NaiveRhs<'a> {
    fn conv<T: Scalar>(&self, f: &[T], g: &[f64]) -> Vec<T> {
        let n = f.len();
        (0..n)
            .map(|p| {
                let mut acc = T::zero();
                for q in 0..n {
                    if let Some(k) = self.lab.find(&self.lab.combo(&[(1, p), (-1, q)])) {
                        acc += f[k] * g[q];
                    }
                }
                acc * (1.0 / self.lab.vol)
            })
            .collect()
    }

    /// Totals with the delta mass realized on the lattice.
    fn totals(&self, u: &Plain) -> (Vec<f64>, Vec<C64>) {
        let n = u.gamma.len();
        let fp: Vec<f64> = match self.config.order {
            Order::First => vec![0.0; n],
            Order::Second => self.config.f_plus.values().to_vec(),
        };
        let vol = self.lab.vol;
        let nn = self.config.n;
        let mut g = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for p in 0..n {
            let delta = self.lab.delta(&[(1, p)]);
            g.push((1.0 + 2.0 * fp[p]) * u.gamma[p] + fp[p] + nn * vol * u.phi.norm_sqr() * delta);
            s.push(u.sigma[p] * (1.0 + 2.0 * fp[p]) + u.phi * u.phi * (nn * vol * delta));
        }
        (g, s)
    }

    fn rate(&self, u: &Plain) -> Plain {
        let lam = self.config.lambda;
        let nn = self.config.n;
        let o = self.lab.find(&vec![0; self.lab.n[0].len()]).expect("origin");
        let v0 = self.vhat[o];
        let w: Vec<f64> = self.vhat.iter().map(|v| v + v0).collect();
        let (g, s) = self.totals(u);
        let gw = self.conv(&g, &w);
        let sv = self.conv(&s, &self.vhat);
        let i = C64::new(0.0, 1.0);
        let dphi = -i * ((u.phi * gw[o] + u.phi.conj() * sv[o]) * (lam / nn)
            - u.phi * (2.0 * lam * self.lab.vol * v0 * u.phi.norm_sqr()));
        let dgamma = (0..g.len()).map(|p| 2.0 * lam / nn * (sv[p] * u.sigma[p].conj()).im).collect();
        let dsigma = (0..g.len())
            .map(|p| {
                -i * (u.sigma[p] * (2.0 * (self.kinetic[p] + lam / nn * gw[p])) + sv[p] * (lam / nn * (1.0 + 2.0 * u.gamma[p])))
            })
            .collect();
        Plain { phi: dphi, gamma: dgamma, sigma: dsigma }
    }
}

fn axpy(u: &Plain, h: f64, k: &Plain) -> Plain {
    Plain {
        phi: u.phi + k.phi * h,
        gamma: u.gamma.iter().zip(&k.gamma).map(|(a, b)| a + h * b).collect(),
        sigma: u.sigma.iter().zip(&k.sigma).map(|(a, b)| a + b * h).collect(),
    }
}

/// Classical RK4 at dt/`refine` on a naive right-hand side.
pub fn fine_step_reference_with(
    state0: &HfbState,
    t_final: f64,
    config: &HfbConfig,
    pot: &Potential,
    refine: usize,
) -> Result<HfbState> {
    let g = state0.grid();
    if g.len() > 9 {
        return Err(Error::SizeGuard(format!("reference integrator limited to 9 points, got {}", g.len())));
    }
    let h = config.dt / refine.max(1) as f64;
    let steps = if t_final == 0.0 { 0 } else { (t_final / h).round() as usize };
    if steps > 5_000_000 {
        return Err(Error::SizeGuard(format!("reference integrator limited to 5e6 steps, got {steps}")));
    }
    let lab = Labels::new(&state0.gamma);
    let rhs = NaiveRhs {
        kinetic: (0..g.len())
            .map(|p| 0.5 * lab.momentum(p, g.length()).iter().map(|x| x * x).sum::<f64>())
            .collect(),
        lab,
        config,
        vhat: pot.values().to_vec(),
    };
    let mut u = Plain { phi: state0.phi, gamma: state0.gamma.values().to_vec(), sigma: state0.sigma.values().to_vec() };
    for _ in 0..steps {
        let k1 = rhs.rate(&u);
        let k2 = rhs.rate(&axpy(&u, 0.5 * h, &k1));
        let k3 = rhs.rate(&axpy(&u, 0.5 * h, &k2));
        let k4 = rhs.rate(&axpy(&u, h, &k3));
        let mut next = axpy(&u, h / 6.0, &k1);
        next = axpy(&next, h / 3.0, &k2);
        next = axpy(&next, h / 3.0, &k3);
        u = axpy(&next, h / 6.0, &k4);
    }
    Ok(HfbState {
        t: state0.t + steps as f64 * h,
        phi: u.phi,
        gamma: RealField::new(g, u.gamma)?,
        sigma: ComplexField::new(g, u.sigma)?,
    })
}

/// Reference endpoint at dt/64.
pub fn fine_step_reference(state0: &HfbState, t_final: f64, config: &HfbConfig, pot: &Potential) -> Result<HfbState> {
    fine_step_reference_with(state0, t_final, config, pot, 64)
}

/// Term-by-term HFB energy with the delta realized on the lattice.
pub fn naive_energy(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<f64> {
    let g = state.grid();
    if g.len() > 729 {
        return Err(Error::SizeGuard("naive energy limited to 729 points".into()));
    }
    let lab = Labels::new(&state.gamma);
    let rhs = NaiveRhs { kinetic: (0..g.len()).map(|p| g.kinetic(p)).collect(), lab, config, vhat: pot.values().to_vec() };
    let u = Plain { phi: state.phi, gamma: state.gamma.values().to_vec(), sigma: state.sigma.values().to_vec() };
    let (gam, sig) = rhs.totals(&u);
    let o = rhs.lab.find(&vec![0; g.dim()]).expect("origin");
    let v0 = rhs.vhat[o];
    let w: Vec<f64> = rhs.vhat.iter().map(|v| v + v0).collect();
    let gw = rhs.conv(&gam, &w);
    let sbar: Vec<C64> = sig.iter().map(|s| s.conj()).collect();
    let sv = rhs.conv(&sbar, &rhs.vhat);
    let (lam, nn, vol) = (config.lambda, config.n, rhs.lab.vol);
    let mut acc = ZERO;
    for p in 0..gam.len() {
        acc += C64::from(rhs.kinetic[p] * gam[p] + lam / (2.0 * nn) * gw[p] * gam[p]);
        acc += sv[p] * sig[p] * (lam / (2.0 * nn));
        acc -= C64::from(nn * vol * vol * lam * state.phi.norm_sqr().powi(2) * rhs.vhat[p] * rhs.lab.delta(&[(1, p)]));
    }
    Ok(acc.re / vol)
}

/// Ω term by term with explicit delta masses.
pub fn naive_omega(state: &HfbState, config: &HfbConfig, pot: &Potential) -> Result<RealField> {
    let g = state.grid();
    let lab = Labels::new(&state.gamma);
    let rhs = NaiveRhs { kinetic: (0..g.len()).map(|p| g.kinetic(p)).collect(), lab, config, vhat: pot.values().to_vec() };
    let u = Plain { phi: state.phi, gamma: state.gamma.values().to_vec(), sigma: state.sigma.values().to_vec() };
    let (gam, sig) = rhs.totals(&u);
    let o = rhs.lab.find(&vec![0; g.dim()]).expect("origin");
    let w: Vec<f64> = rhs.vhat.iter().map(|v| v + rhs.vhat[o]).collect();
    let gw = rhs.conv(&gam, &w);
    let sbar: Vec<C64> = sig.iter().map(|s| s.conj()).collect();
    let sv = rhs.conv(&sbar, &rhs.vhat);
    let (lam, nn) = (config.lambda, config.n);
    RealField::new(
        g,
        (0..gam.len())
            .map(|p| rhs.kinetic[p] + lam / nn * gw[p] + lam / nn * (sv[p] * u.sigma[p]).re / (1.0 + u.gamma[p]))
            .collect(),
    )
}
