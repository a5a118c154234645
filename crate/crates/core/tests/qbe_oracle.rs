use std::f64::consts::PI;

use hfbkin::dispersion::accumulate_phase;
use hfbkin::hfb::{evolve, initial_data, HfbConfig, HfbHistory, Integrator, Order, Phi0};
use hfbkin::lattice::{LatticeGrid, RealField};
use hfbkin::oracle::{self, compare, compare_scalar};
use hfbkin::potential::{Potential, PotentialKind};
use hfbkin::qbe::{accumulate, HMode, QbeParams};
use hfbkin::C64;

struct Run {
    history: HfbHistory,
    pot: Potential,
    f0: RealField,
}

fn run(m: usize, steps: usize, phi: C64) -> Run {
    let g = LatticeGrid::shared(1, 2.0 * PI, m).unwrap();
    let pot = Potential::new(&g, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let (s, f0) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Value(phi)).unwrap();
    let cfg = HfbConfig::new(0.3, 10.0, Order::Second, f0.clone(), 0.05, Integrator::LawsonRk4).unwrap();
    let history = evolve(&s, 0.05 * steps as f64, &cfg, &pot, &mut |_, _| {}).unwrap();
    Run { history, pot, f0 }
}

fn check(r: &Run, mode: HMode, q4: bool) {
    let ph = accumulate_phase(&r.history);
    let mut hs = Vec::new();
    let params = QbeParams { mode, enable_q4: q4, ..QbeParams::default() };
    let ci = accumulate(&r.history, &ph, &r.pot, &r.f0, params, &mut |s| hs.push(s.h.clone())).unwrap();
    let k = r.history.len() - 1;
    let tol = 1e-12;
    let rep = compare(ci.q3.values(), oracle::naive_q3(&r.history, &r.pot, &hs, k).unwrap().values());
    assert!(rep.passes(tol), "q3 {rep:?}");
    let rep = compare(ci.q3g.values(), oracle::naive_q3g(&r.history, &r.pot, &hs, k).unwrap().values());
    assert!(rep.passes(tol), "q3g {rep:?}");
    let rep = compare_scalar(ci.q3phi, oracle::naive_q3phi(&r.history, &r.pot, &hs, k).unwrap());
    assert!(rep.passes(tol), "q3phi {rep:?}");
    let rep = compare_scalar(ci.q33phi, oracle::naive_q33phi(&r.history, &r.pot, &hs, k).unwrap());
    assert!(rep.passes(tol), "q33phi {rep:?}");
    if q4 {
        let rep = compare(ci.q4.as_ref().unwrap().values(), oracle::naive_q4(&r.history, &r.pot, &hs, k).unwrap().values());
        assert!(rep.passes(tol), "q4 {rep:?}");
    }
}

#[test]
fn frozen_matches_direct_sums() {
    let r = run(2, 10, C64::new(0.35, 0.12));
    check(&r, HMode::Frozen, true);
}

#[test]
fn selfconsistent_matches_direct_sums() {
    let r = run(2, 10, C64::new(0.35, 0.12));
    check(&r, HMode::SelfConsistent, true);
}

#[test]
fn larger_cubic_grid() {
    let r = run(3, 6, C64::new(0.2, -0.3));
    check(&r, HMode::SelfConsistent, false);
}
