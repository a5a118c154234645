use std::f64::consts::PI;
use std::sync::Arc;

use hfbkin::hfb::HfbState;
use hfbkin::kernels::{bogoliubov_uv, eval_cubic_kernel, eval_quartic_kernel, kernel_symmetry, CubicKind, KernelSet, QuarticKind};
use hfbkin::lattice::{ComplexField, LatticeGrid, RealField};
use hfbkin::potential::{Potential, PotentialKind};
use hfbkin::{Error, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn grid(dim: usize, m: usize) -> Arc<LatticeGrid> {
    LatticeGrid::shared(dim, 2.0 * PI, m).unwrap()
}

fn random_state(g: &Arc<LatticeGrid>, seed: u64) -> HfbState {
    let mut rng = StdRng::seed_from_u64(seed);
    let half: Vec<(f64, f64)> = (0..g.len()).map(|_| (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI))).collect();
    let sym = |i: usize| half[i.min(g.neg(i))];
    HfbState {
        t: 0.0,
        phi: C64::new(0.4, -0.3),
        gamma: RealField::from_fn(g, |i| sym(i).0),
        sigma: ComplexField::from_fn(g, |i| {
            let (x, th) = sym(i);
            C64::from_polar((x * (1.0 + x)).sqrt(), th)
        }),
    }
}

fn quiet(g: &Arc<LatticeGrid>, phi: C64) -> HfbState {
    HfbState { t: 0.0, phi, gamma: RealField::zeros(g), sigma: ComplexField::zeros(g) }
}

#[test]
fn uv_examples() {
    let g = grid(1, 2);
    let uv = bogoliubov_uv(&quiet(&g, C64::new(1.0, 0.0))).unwrap();
    assert!(uv.u.values().iter().all(|&u| u == 1.0));
    assert!(uv.v.values().iter().all(|v| v.norm() == 0.0));

    let s = HfbState {
        t: 0.0,
        phi: C64::new(0.0, 0.0),
        gamma: RealField::constant(&g, 3.0),
        sigma: ComplexField::constant(&g, C64::new(2.0 * 3f64.sqrt(), 0.0)),
    };
    let uv = bogoliubov_uv(&s).unwrap();
    assert!(uv.u.values().iter().all(|&u| (u - 2.0).abs() < 1e-15));
    assert!(uv.v.values().iter().all(|v| (v - 3f64.sqrt()).norm() < 1e-15));

    for seed in 0..10 {
        let uv = bogoliubov_uv(&random_state(&grid(2, 4), seed)).unwrap();
        assert!(uv.identity_error() < 1e-13);
    }
}

#[test]
fn uv_rejects_negative_gamma() {
    let g = grid(1, 2);
    let mut s = quiet(&g, C64::new(1.0, 0.0));
    s.gamma.values_mut()[0] = -0.5;
    assert!(matches!(bogoliubov_uv(&s), Err(Error::NegativeGamma { .. })));
}

#[test]
fn kernels_without_pairing() {
    let g = grid(1, 4);
    let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let phi = C64::new(0.3, 0.2);
    let uv = bogoliubov_uv(&quiet(&g, phi)).unwrap();
    let sv = g.volume().sqrt();
    let vh = |n: i32| pot.values()[g.index_of(&[n]).unwrap()];
    for a in -2i32..=2 {
        for b in -2..=2 {
            let c = a + b;
            if c.abs() > 2 {
                continue;
            }
            let b12 = eval_cubic_kernel(CubicKind::B12, &uv, &pot, [&[a], &[b], &[c]]).unwrap();
            assert!((b12 - phi * sv * (vh(a) + vh(b))).norm() < 1e-14);
            let b03 = eval_cubic_kernel(CubicKind::B03, &uv, &pot, [&[a], &[b], &[-a - b]]).unwrap();
            assert_eq!(b03.norm(), 0.0);
            for d in -2..=2 {
                let e = a + b - d;
                if e.abs() > 2 {
                    continue;
                }
                let b22 = eval_quartic_kernel(QuarticKind::B22, &uv, &pot, [&[a], &[b], &[d], &[e]]).unwrap();
                let want = |x: i32| g.index_of(&[x]).map_or(0.0, |k| pot.values()[k]);
                assert!((b22 - (want(a - d) + want(b - d))).norm() < 1e-14, "{a} {b} {d} {e}: {b22} vs {}", want(a - d) + want(b - d));
                for kind in [QuarticKind::B04, QuarticKind::B13] {
                    assert_eq!(eval_quartic_kernel(kind, &uv, &pot, [&[a], &[b], &[d], &[e]]).unwrap().norm(), 0.0);
                }
            }
        }
    }
}

#[test]
fn kernels_vanish_with_zero_potential() {
    let g = grid(1, 4);
    let pot = Potential::new(&g, PotentialKind::Zero).unwrap();
    let uv = bogoliubov_uv(&random_state(&g, 5)).unwrap();
    let ks = KernelSet::new(&uv, &pot).unwrap();
    let n = g.len();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                assert_eq!(ks.b12(i, j, k).norm() + ks.b03(i, j, k).norm(), 0.0);
                for l in 0..n {
                    assert_eq!(ks.b04(i, j, k, l).norm() + ks.b13(i, j, k, l).norm() + ks.b22(i, j, k, l).norm(), 0.0);
                }
            }
        }
    }
}

#[test]
fn off_grid_labels_are_rejected() {
    let g = grid(1, 2);
    let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let uv = bogoliubov_uv(&random_state(&g, 1)).unwrap();
    let e = eval_cubic_kernel(CubicKind::B12, &uv, &pot, [&[0], &[3], &[3]]).unwrap_err();
    assert!(matches!(e, Error::OffGrid(ref n) if n == &vec![3]));
    assert!(eval_quartic_kernel(QuarticKind::B22, &uv, &pot, [&[0], &[0], &[0], &[-5]]).is_err());
}

#[test]
fn symmetry_groups() {
    for (dim, m) in [(1, 8), (2, 4), (3, 2)] {
        let g = grid(dim, m);
        let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
        let uv = bogoliubov_uv(&random_state(&g, dim as u64)).unwrap();
        let rep = kernel_symmetry(&uv, &pot, 100, 7).unwrap();
        assert!(rep.tuples >= 100);
        assert!(rep.worst() < 1e-13, "{rep:?}");
    }
}

#[test]
fn diagonal_loss_term_is_nonnegative() {
    // s₁ = s₂ diagonal of the first cubic channel, loss part h h h̃ only.
    let g = grid(1, 6);
    let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let uv = bogoliubov_uv(&random_state(&g, 9)).unwrap();
    let ks = KernelSet::new(&uv, &pot).unwrap();
    let h = RealField::from_fn(&g, |i| 0.1 + i as f64 * 0.05);
    let n = g.len();
    for p in 0..n {
        let mut sum = C64::new(0.0, 0.0);
        for i1 in 0..n {
            for i2 in 0..n {
                let Some(i3) = g.add(i1, i2) else { continue };
                let w = [i1, i2].iter().filter(|&&x| x == p).count() as f64 + if i3 == p { 1.0 } else { 0.0 };
                let b = ks.b12(i1, i2, i3);
                sum += b * b.conj() * (w * h.at(i1) * h.at(i2) * (1.0 + h.at(i3)));
            }
        }
        assert_eq!(sum.im, 0.0);
        assert!(sum.re >= 0.0);
    }
}
