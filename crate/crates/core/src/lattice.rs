//! Truncated reciprocal lattice of a cubic d-torus.
//!
//! Momenta are p = (2π/L)·n with n ∈ {−M,…,M}^d, enumerated lexicographically
//! in n (first axis slowest). The counting measure is normalized by the torus
//! volume |Λ| = L^d, so `∫dp f = |Λ|⁻¹ Σ_p f(p)` and the lattice delta carries
//! the value |Λ| at the origin.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Point count above which convolutions fan out over output points.
const PAR_THRESHOLD: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGrid {
    dim: usize,
    length: f64,
    cutoff: i32,
    side: usize,
    volume: f64,
    n: Vec<[i32; 3]>,
    p: Vec<[f64; 3]>,
}

impl LatticeGrid {
    pub fn new(dim: usize, length: f64, cutoff: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dim = {dim}, need dim ∈ {{1,2,3}}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("L = {length}, need L > 0")));
        }
        if cutoff > 64 {
            return Err(Error::Grid(format!("M = {cutoff} is unreasonably large")));
        }
        let m = cutoff as i32;
        let side = 2 * cutoff + 1;
        let count = side.pow(dim as u32);
        let dk = 2.0 * PI / length;
        let mut n = Vec::with_capacity(count);
        let mut p = Vec::with_capacity(count);
        for idx in 0..count {
            let mut v = [0i32; 3];
            let mut rem = idx;
            for axis in (0..dim).rev() {
                v[axis] = (rem % side) as i32 - m;
                rem /= side;
            }
            n.push(v);
            p.push([dk * v[0] as f64, dk * v[1] as f64, dk * v[2] as f64]);
        }
        Ok(Self {
            dim,
            length,
            cutoff: m,
            side,
            volume: length.powi(dim as i32),
            n,
            p,
        })
    }

    pub fn shared(dim: usize, length: f64, cutoff: usize) -> Result<Arc<Self>> {
        Self::new(dim, length, cutoff).map(Arc::new)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff as usize
    }

    /// |Λ| = L^d.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Momentum spacing 2π/L.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Index of p = 0.
    pub fn origin(&self) -> usize {
        self.len() / 2
    }

    /// Integer label n of point `i` (unused axes are 0).
    pub fn n(&self, i: usize) -> [i32; 3] {
        self.n[i]
    }

    pub fn n_slice(&self, i: usize) -> &[i32] {
        &self.n[i][..self.dim]
    }

    pub fn momentum(&self, i: usize) -> [f64; 3] {
        self.p[i]
    }

    /// Free dispersion E(p) = |p|²/2.
    pub fn kinetic(&self, i: usize) -> f64 {
        let p = self.p[i];
        0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
    }

    pub fn index_of(&self, n: &[i32]) -> Option<usize> {
        if n.len() != self.dim {
            return None;
        }
        let mut idx = 0usize;
        for &k in n {
            if k.abs() > self.cutoff {
                return None;
            }
            idx = idx * self.side + (k + self.cutoff) as usize;
        }
        Some(idx)
    }

    fn index_of3(&self, v: [i32; 3]) -> Option<usize> {
        let mut idx = 0usize;
        for &k in &v[..self.dim] {
            if k.abs() > self.cutoff {
                return None;
            }
            idx = idx * self.side + (k + self.cutoff) as usize;
        }
        Some(idx)
    }

    /// Index of −p.
    pub fn neg(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Index of p_i + p_j when it lies on the grid.
    pub fn add(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.n[i], self.n[j]);
        self.index_of3([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    }

    /// Index of p_i − p_j when it lies on the grid.
    pub fn sub(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.n[i], self.n[j]);
        self.index_of3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }

    /// Index of p_i + p_j + p_k when it lies on the grid.
    pub fn add3(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        let (a, b, c) = (self.n[i], self.n[j], self.n[k]);
        self.index_of3([a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]])
    }

    pub fn kinetic_field(self: &Arc<Self>) -> RealField {
        LatticeField::from_fn(self, |i| self.kinetic(i))
    }

    pub fn same_as(&self, other: &LatticeGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim && self.length == other.length && self.cutoff == other.cutoff)
    }
}

/// Scalars a lattice field can carry.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
{
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn from_re(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_re(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for C64 {
    const IS_COMPLEX: bool = true;
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_re(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// One scalar per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField<T> {
    grid: Arc<LatticeGrid>,
    values: Vec<T>,
}

pub type RealField = LatticeField<f64>;
pub type ComplexField = LatticeField<C64>;

impl<T: Scalar> LatticeField<T> {
    pub fn new(grid: &Arc<LatticeGrid>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Invalid(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn zeros(grid: &Arc<LatticeGrid>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<LatticeGrid>, c: T) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<LatticeGrid>, f: impl FnMut(usize) -> T) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<LatticeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_complex(&self) -> bool {
        T::IS_COMPLEX
    }

    pub fn at(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> LatticeField<U> {
        LatticeField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_with<U: Scalar, V: Scalar>(
        &self,
        other: &LatticeField<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<LatticeField<V>> {
        self.check_grid(other.grid())?;
        Ok(LatticeField {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// p ↦ f(−p).
    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    /// max_p |f(p) − f(−p)|.
    pub fn evenness_error(&self) -> f64 {
        let n = self.values.len();
        (0..n)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).modulus())
            .fold(0.0, f64::max)
    }

    pub fn is_even(&self, tol: f64) -> bool {
        self.evenness_error() <= tol
    }

    /// First lattice point carrying a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|x| !x.finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, other: &LatticeGrid) -> Result<()> {
        if self.grid.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// ∫dp f = |Λ|⁻¹ Σ_p f(p).
pub fn integrate<T: Scalar>(f: &LatticeField<T>) -> T {
    let mut s = T::zero();
    for &x in f.values() {
        s += x;
    }
    s * (1.0 / f.grid().volume())
}

/// Rescaled norm (∫dp w|f|^a)^{1/a}; `a = ∞` gives max|f| and ignores the weight.
pub fn lp_norm<T: Scalar>(f: &LatticeField<T>, a: f64, weight: Option<&RealField>) -> Result<f64> {
    if a.is_nan() || a < 1.0 {
        return Err(Error::Invalid(format!("norm exponent a = {a}, need a ≥ 1")));
    }
    if a.is_infinite() {
        return Ok(f.max_abs());
    }
    if let Some(w) = weight {
        f.check_grid(w.grid())?;
        if let Some(i) = w.values().iter().position(|&x| x < 0.0) {
            return Err(Error::Invalid(format!("norm weight negative at n = {:?}", f.grid().n_slice(i))));
        }
    }
    let mut s = 0.0;
    for (i, x) in f.values().iter().enumerate() {
        let w = weight.map_or(1.0, |w| w.at(i));
        s += w * x.modulus().powf(a);
    }
    Ok((s / f.grid().volume()).powf(1.0 / a))
}

/// Lattice delta: |Λ| at p = 0, zero elsewhere.
pub fn delta_field(grid: &Arc<LatticeGrid>) -> RealField {
    let mut d = RealField::zeros(grid);
    d.values_mut()[grid.origin()] = grid.volume();
    d
}

/// (f*g)(p) = |Λ|⁻¹ Σ_q f(p−q) g(q), zero-padded where p−q leaves the grid.
pub fn convolve<T: Scalar>(f: &LatticeField<T>, g: &LatticeField<T>) -> Result<LatticeField<T>> {
    f.check_grid(g.grid())?;
    let values = convolve_slices(f.grid(), f.values(), g.values());
    Ok(LatticeField {
        grid: Arc::clone(f.grid()),
        values,
    })
}

/// Convolution against a real kernel: (f*k)(p) = |Λ|⁻¹ Σ_q f(q) k(p−q).
pub fn convolve_real<T: Scalar>(f: &LatticeField<T>, k: &RealField) -> Result<LatticeField<T>> {
    f.check_grid(k.grid())?;
    let values = convolve_kernel(f.grid(), f.values(), k.values());
    Ok(LatticeField {
        grid: Arc::clone(f.grid()),
        values,
    })
}

fn conv_point<T: Scalar, K: Copy>(grid: &LatticeGrid, p: usize, f: &[T], g: &[K], mul: impl Fn(T, K) -> T) -> T {
    let mut s = T::zero();
    for q in 0..grid.len() {
        if let Some(r) = grid.sub(p, q) {
            s += mul(f[r], g[q]);
        }
    }
    s * (1.0 / grid.volume())
}

pub(crate) fn convolve_slices<T: Scalar>(grid: &LatticeGrid, f: &[T], g: &[T]) -> Vec<T> {
    let point = |p: usize| conv_point(grid, p, f, g, |a, b| a * b);
    if grid.len() >= PAR_THRESHOLD {
        (0..grid.len()).into_par_iter().map(point).collect()
    } else {
        (0..grid.len()).map(point).collect()
    }
}

pub(crate) fn convolve_kernel<T: Scalar>(grid: &LatticeGrid, f: &[T], k: &[f64]) -> Vec<T> {
    let point = |p: usize| {
        let mut s = T::zero();
        for q in 0..grid.len() {
            if let Some(r) = grid.sub(p, q) {
                s += f[q] * k[r];
            }
        }
        s * (1.0 / grid.volume())
    };
    if grid.len() >= PAR_THRESHOLD {
        (0..grid.len()).into_par_iter().map(point).collect()
    } else {
        (0..grid.len()).map(point).collect()
    }
}
