use std::f64::consts::PI;

use hfbkin::hfb::{assemble_totals, evolve, initial_data, HfbConfig, HfbState, Integrator, Order, Phi0};
use hfbkin::lattice::{ComplexField, LatticeGrid, RealField};
use hfbkin::potential::{Potential, PotentialKind};
use hfbkin::symplectic::{
    adjoint, build_frame, check_invariants, covariance, hermitian_eigenvalues, max_entry_diff, propagate_v,
    verify_history, IDENTITY,
};
use hfbkin::C64;
use proptest::prelude::*;

fn reference(lambda: f64) -> (HfbState, HfbConfig, Potential) {
    let g = LatticeGrid::shared(1, 2.0 * PI, 8).unwrap();
    let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let (s, f0) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
    let cfg = HfbConfig::new(lambda, 100.0, Order::Second, f0, 1e-3, Integrator::LawsonRk4).unwrap();
    (s, cfg, pot)
}

#[test]
fn thermal_reconstruction_at_t5() {
    let (s, cfg, pot) = reference(0.1);
    let h = evolve(&s, 5.0, &cfg, &pot, &mut |_, _| {}).unwrap();
    let rep = verify_history(&h, &pot).unwrap();
    assert!(rep.max_reconstruction_err < 1e-8, "{rep:?}");
    assert!(rep.max_s_err < 1e-8, "{rep:?}");
    assert!(rep.min_eigenvalue >= -1e-10, "{rep:?}");
}

#[test]
fn initial_frame_is_exact() {
    let (s, cfg, pot) = reference(0.1);
    let h = evolve(&s, 0.0, &cfg, &pot, &mut |_, _| {}).unwrap();
    let f0 = build_frame(&assemble_totals(&s, &cfg));
    let frames = propagate_v(&f0, &h, &pot).unwrap();
    assert!(frames[0].v.iter().all(|v| *v == IDENTITY));
    let rep = check_invariants(&frames[0], &f0, &f0);
    assert_eq!(rep.max_reconstruction_err, 0.0);
    assert_eq!(rep.max_s_err, 0.0);
}

#[test]
fn free_flow_phases() {
    let (s, cfg, pot) = reference(0.0);
    let cfg = HfbConfig { dt: 1e-2, ..cfg };
    let t = 2.0;
    let h = evolve(&s, t, &cfg, &pot, &mut |_, _| {}).unwrap();
    let f0 = build_frame(&assemble_totals(&s, &cfg));
    let frames = propagate_v(&f0, &h, &pot).unwrap();
    let last = frames.last().unwrap();
    let g = s.grid();
    for p in 0..g.len() {
        let e = g.kinetic(p);
        let want = [[C64::from_polar(1.0, -e * t), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::from_polar(1.0, e * t)]];
        assert!(max_entry_diff(&adjoint(&last.v[p]), &want) < 1e-12);
    }
}

#[test]
fn diagonal_generator_closed_form() {
    // Σ ≡ 0 and φ = 0 keep h_Σ = 0 and h_Γ constant.
    let (s, cfg, pot) = reference(0.5);
    let g = s.grid().clone();
    let s = HfbState { t: 0.0, phi: C64::new(0.0, 0.0), gamma: RealField::constant(&g, 0.2), sigma: ComplexField::zeros(&g) };
    let cfg = HfbConfig { f_plus: RealField::zeros(&g), dt: 0.01, ..cfg };
    let h = evolve(&s, 1.0, &cfg, &pot, &mut |_, _| {}).unwrap();
    let (cg, _) = hfbkin::hfb::mean_fields(&s, &cfg, &pot).unwrap();
    let f0 = build_frame(&assemble_totals(&s, &cfg));
    let frames = propagate_v(&f0, &h, &pot).unwrap();
    for p in 0..g.len() {
        let hg = g.kinetic(p) + 0.5 * cg.at(p);
        let want = [[C64::from_polar(1.0, -hg), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::from_polar(1.0, hg)]];
        assert!(max_entry_diff(&adjoint(&frames.last().unwrap().v[p]), &want) < 1e-12);
    }
    let rep = verify_history(&h, &pot).unwrap();
    assert!(rep.max_reconstruction_err < 1e-14);
}

proptest! {
    #[test]
    fn cone_equivalence(g in -2.0f64..4.0, re in -4.0f64..4.0, im in -4.0f64..4.0) {
        let s = C64::new(re, im);
        let (lo, _) = hermitian_eigenvalues(&covariance(g, s));
        let cone = g >= 0.0 && s.norm_sqr() <= (g + 1.0) * g;
        let margin = (s.norm_sqr() - (g + 1.0) * g).abs().min(g.abs());
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(lo >= 0.0, cone);
    }
}
