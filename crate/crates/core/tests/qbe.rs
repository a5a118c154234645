use std::f64::consts::PI;
use std::sync::Arc;

use hfbkin::dispersion::{accumulate_phase, omega};
use hfbkin::hfb::{evolve, initial_data, HfbConfig, HfbHistory, HfbState, Integrator, Order, Phi0};
use hfbkin::lattice::{ComplexField, LatticeGrid, RealField};
use hfbkin::potential::{Potential, PotentialKind};
use hfbkin::qbe::{
    accumulate, corrected_moments, mesoscopic_rescale, momentum_moment, q33phi_accumulate, q3_accumulate,
    q3g_accumulate, q3phi_accumulate, q4_accumulate, reconstruct_totals, CollisionIntegrals, HMode, MomentSet,
    QbeParams, Sample,
};
use hfbkin::{Error, C64};

struct Run {
    grid: Arc<LatticeGrid>,
    pot: Potential,
    f0: RealField,
    history: HfbHistory,
}

fn run(m: usize, n: f64, t: f64, dt: f64) -> Run {
    let grid = LatticeGrid::shared(1, 2.0 * PI, m).unwrap();
    let pot = Potential::new(&grid, PotentialKind::Gaussian { amplitude: 1.0, width: 2.0 }).unwrap();
    let (s0, f0) = initial_data(&grid, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
    let cfg = HfbConfig::new(0.1, n, Order::Second, f0.clone(), dt, Integrator::LawsonRk4).unwrap();
    let history = evolve(&s0, t, &cfg, &pot, &mut |_, _| {}).unwrap();
    Run { grid, pot, f0, history }
}

/// History frozen at a state with no pairing or thermal occupation.
fn static_history(grid: &Arc<LatticeGrid>, pot: &Potential, phi: C64, steps: usize) -> HfbHistory {
    let s = HfbState { t: 0.0, phi, gamma: RealField::zeros(grid), sigma: ComplexField::zeros(grid) };
    let cfg = HfbConfig::new(0.3, 100.0, Order::Second, RealField::zeros(grid), 0.01, Integrator::LawsonRk4).unwrap();
    let om = omega(&s, &cfg, pot).unwrap();
    let states: Vec<HfbState> = (0..=steps).map(|k| HfbState { t: k as f64 * 0.01, ..s.clone() }).collect();
    HfbHistory { config: cfg, omegas: vec![om; states.len()], states }
}

fn max_abs(a: &RealField, b: &RealField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn vanishing_cases() {
    let r = run(3, 100.0, 0.2, 0.01);
    let zero = Potential::new(&r.grid, PotentialKind::Zero).unwrap();
    let h = evolve(&r.history.states[0], 0.2, &r.history.config, &zero, &mut |_, _| {}).unwrap();
    let ph = accumulate_phase(&h);
    for mode in [HMode::Frozen, HMode::SelfConsistent] {
        assert!(q3_accumulate(&h, &ph, &zero, &r.f0, mode, 0.2).unwrap().values().iter().all(|&x| x == 0.0));
        assert!(q3g_accumulate(&h, &ph, &zero, &r.f0, mode, 0.2).unwrap().values().iter().all(|x| x.norm() == 0.0));
        assert_eq!(q3phi_accumulate(&h, &ph, &zero, &r.f0, mode, 0.2).unwrap().norm(), 0.0);
        assert_eq!(q33phi_accumulate(&h, &ph, &zero, &r.f0, mode, 0.2).unwrap().norm(), 0.0);
        assert!(q4_accumulate(&h, &ph, &zero, &r.f0, mode, 0.2, 1e9).unwrap().values().iter().all(|&x| x == 0.0));
    }

    // No condensate: every cubic kernel carries φ.
    let h = static_history(&r.grid, &r.pot, C64::new(0.0, 0.0), 10);
    let ph = accumulate_phase(&h);
    let ci = accumulate(&h, &ph, &r.pot, &r.f0, QbeParams::default(), &mut |_| {}).unwrap();
    assert_eq!(ci.q3phi.norm(), 0.0);

    let h = static_history(&r.grid, &r.pot, C64::new(0.3, 0.1), 10);
    let ph = accumulate_phase(&h);
    let z = RealField::zeros(&r.grid);
    let t = 0.1;
    assert!(q3g_accumulate(&h, &ph, &r.pot, &z, HMode::Frozen, t).unwrap().values().iter().all(|x| x.norm() == 0.0));
    assert_eq!(q33phi_accumulate(&h, &ph, &r.pot, &z, HMode::Frozen, t).unwrap().norm(), 0.0);
}

#[test]
fn start_of_history() {
    let r = run(3, 100.0, 0.5, 0.01);
    let ph = accumulate_phase(&r.history);
    let mut first: Option<CollisionIntegrals> = None;
    accumulate(&r.history, &ph, &r.pot, &r.f0, QbeParams { enable_q4: true, ..QbeParams::default() }, &mut |s| {
        if first.is_none() {
            first = Some(s.integral.clone());
        }
    })
    .unwrap();
    let ci = first.unwrap();
    assert_eq!(ci.t, 0.0);
    let m = corrected_moments(&ci, &r.f0, 100.0).unwrap();
    assert_eq!(m.phi.norm(), 0.0);
    assert_eq!(max_abs(&m.f, &r.f0), 0.0);
    assert!(m.g.values().iter().all(|x| x.norm() == 0.0));
    assert!(ci.q4.unwrap().values().iter().all(|&x| x == 0.0));
}

#[test]
fn prefactor_scaling() {
    let r = run(3, 100.0, 0.5, 0.01);
    let ph = accumulate_phase(&r.history);
    let ci = accumulate(&r.history, &ph, &r.pot, &r.f0, QbeParams::default(), &mut |_| {}).unwrap();
    let a = corrected_moments(&ci, &r.f0, 100.0).unwrap();
    let b = corrected_moments(&ci, &r.f0, 200.0).unwrap();
    assert!((max_abs(&a.f, &r.f0) / max_abs(&b.f, &r.f0) - 2.0).abs() < 1e-12);
    assert!((a.phi.norm() / b.phi.norm() - 2f64.powf(1.5)).abs() < 1e-12);
}

#[test]
fn time_must_lie_on_the_history_grid() {
    let r = run(2, 100.0, 0.1, 0.01);
    let ph = accumulate_phase(&r.history);
    assert!(q3_accumulate(&r.history, &ph, &r.pot, &r.f0, HMode::Frozen, 0.055).is_err());
    assert!(q3_accumulate(&r.history, &ph, &r.pot, &r.f0, HMode::Frozen, 0.2).is_err());
    let other = LatticeGrid::shared(1, 2.0 * PI, 3).unwrap();
    let pot = Potential::new(&other, PotentialKind::Zero).unwrap();
    assert!(matches!(
        accumulate(&r.history, &ph, &pot, &r.f0, QbeParams::default(), &mut |_| {}),
        Err(Error::GridMismatch)
    ));
}

#[test]
fn q4_budget_is_enforced() {
    let r = run(3, 100.0, 0.2, 0.01);
    let ph = accumulate_phase(&r.history);
    let e = q4_accumulate(&r.history, &ph, &r.pot, &r.f0, HMode::Frozen, 0.2, 10.0).unwrap_err();
    match e {
        Error::Budget { estimate, budget } => {
            assert!(estimate > budget);
            assert!(e.to_string().contains(&format!("{estimate:.3e}")));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn momentum_annihilation_per_channel() {
    let r = run(4, 100.0, 1.0, 0.01);
    let ph = accumulate_phase(&r.history);
    for mode in [HMode::Frozen, HMode::SelfConsistent] {
        let params = QbeParams { mode, enable_q4: true, ..QbeParams::default() };
        accumulate(&r.history, &ph, &r.pot, &r.f0, params, &mut |s| {
            for ci in [&s.instant, &s.integral] {
                let mut fields = vec![&ci.q3, &ci.q3_channels[0], &ci.q3_channels[1], ci.q4.as_ref().unwrap()];
                fields.extend(ci.q4_channels.as_ref().unwrap().iter());
                for q in fields {
                    let (m, scale) = momentum_moment(q);
                    assert!(m <= 1e-12 * scale.max(1e-300) || scale == 0.0, "{m} vs {scale}");
                }
            }
        })
        .unwrap();
    }
}

#[test]
fn totals_examples() {
    let g = LatticeGrid::shared(1, 2.0 * PI, 3).unwrap();
    let vol = g.volume();
    let (mut s, _) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
    s.sigma = ComplexField::zeros(&g);
    let zero = MomentSet { phi: C64::new(0.0, 0.0), f: RealField::zeros(&g), g: ComplexField::zeros(&g) };
    let theta = RealField::from_fn(&g, |i| 0.1 * i as f64);
    let n = 50.0;
    let tot = reconstruct_totals(&s, &zero, &theta, n).unwrap();
    let want_delta = n * vol * s.phi.norm_sqr();
    assert!((tot.f_delta - want_delta).abs() < 1e-12 * want_delta);
    for i in 0..g.len() {
        let extra = if i == g.origin() { want_delta * vol } else { 0.0 };
        assert!((tot.f.at(i) - s.gamma.at(i) - extra).abs() < 1e-12 * (1.0 + extra));
    }

    let quiet = HfbState {
        t: 0.0,
        phi: C64::new(vol.powf(-0.5), 0.0),
        gamma: RealField::zeros(&g),
        sigma: ComplexField::zeros(&g),
    };
    let tot = reconstruct_totals(&quiet, &zero, &theta, 400.0).unwrap();
    assert!((tot.phi - C64::new(20.0, 0.0)).norm() < 1e-12);

    // 2Re(x) evaluated as x + x̄ leaves no imaginary residue.
    let (s, f0) = initial_data(&g, 1.0, 0.5, 0.5, Phi0::Uniform).unwrap();
    let m = MomentSet {
        phi: C64::new(0.02, -0.01),
        f: f0.map(|x| 1.1 * x),
        g: ComplexField::from_fn(&g, |i| C64::new(0.01 * i as f64, -0.02)),
    };
    let tot = reconstruct_totals(&s, &m, &theta, n).unwrap();
    let e2 = |i: usize| C64::from_polar(1.0, 2.0 * theta.at(i));
    for i in 0..g.len() {
        let x = e2(i) * s.sigma.at(i) * m.g.at(i).conj();
        let z = C64::from(s.gamma.at(i) + (1.0 + s.gamma.at(i)) * m.f.at(i) + s.gamma.at(i) * m.f.at(g.neg(i))) + x + x.conj();
        assert!(z.im.abs() < 1e-13);
        if i != g.origin() {
            assert!((tot.f.at(i) - z.re).abs() < 1e-13);
        }
    }
}

#[test]
fn mesoscopic_examples() {
    let series: Vec<Sample<f64>> = (0..=200).map(|k| Sample { t: k as f64, value: (k as f64).sin() }).collect();
    let same = mesoscopic_rescale(&series, 1.0).unwrap();
    assert_eq!(same, series);
    let meso = mesoscopic_rescale(&series, 0.1).unwrap();
    assert_eq!(meso[0].t, 0.0);
    let k = meso.iter().position(|s| (s.t - 1.0).abs() < 1e-12).unwrap();
    assert_eq!(series[k].t, 100.0);
    assert!((meso[k].value - 100.0 * series[k].value).abs() < 1e-12);
    assert!(mesoscopic_rescale(&series, 0.0).is_err());
}

/// Gaps between the modes in ∫Q₃ and in f, at fixed HFB history.
fn mode_gap(history: &HfbHistory, r: &Run, n: f64) -> (f64, f64) {
    let mut h = history.clone();
    h.config.n = n;
    let ph = accumulate_phase(&h);
    let get = |mode| accumulate(&h, &ph, &r.pot, &r.f0, QbeParams { mode, ..QbeParams::default() }, &mut |_| {}).unwrap();
    let (sc, fr) = (get(HMode::SelfConsistent), get(HMode::Frozen));
    let f = |ci: &CollisionIntegrals| corrected_moments(ci, &r.f0, n).unwrap().f;
    (max_abs(&sc.q3, &fr.q3), max_abs(&f(&sc), &f(&fr)))
}

#[test]
fn self_consistent_approaches_frozen() {
    let r = run(4, 100.0, 2.0, 0.01);
    let gaps: Vec<(f64, f64)> = [1000.0, 2000.0, 4000.0].iter().map(|&n| mode_gap(&r.history, &r, n)).collect();
    assert!(gaps[0].0 > 0.0);
    for w in gaps.windows(2) {
        let q = w[0].0 / w[1].0;
        assert!((q - 2.0).abs() < 0.05, "integral ratio {q}");
        // f carries a further 1/N.
        let f = w[0].1 / w[1].1;
        assert!((f - 4.0).abs() < 0.1, "moment ratio {f}");
    }
}

/// Local log-log slopes of ‖f − f₀‖∞ and |Φ| in N at large N, with the HFB
/// trajectory recomputed for every N.
#[test]
fn asymptotic_n_scaling() {
    let sizes = [6400.0, 25600.0];
    let mut out = Vec::new();
    for &n in &sizes {
        let r = run(8, n, 10.0, 1e-3);
        let ph = accumulate_phase(&r.history);
        let ci = accumulate(&r.history, &ph, &r.pot, &r.f0, QbeParams::default(), &mut |_| {}).unwrap();
        let m = corrected_moments(&ci, &r.f0, n).unwrap();
        out.push((max_abs(&m.f, &r.f0), m.phi.norm()));
    }
    let l = (sizes[1] / sizes[0]).ln();
    let sf = (out[1].0 / out[0].0).ln() / l;
    let sp = (out[1].1 / out[0].1).ln() / l;
    assert!((sf + 1.0).abs() < 0.005, "f slope {sf}");
    assert!((sp + 1.5).abs() < 0.0075, "Φ slope {sp}");
}
