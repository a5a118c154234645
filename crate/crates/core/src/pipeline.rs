//! simulate → qbe → verify orchestration and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dispersion::{accumulate_phase, DispersionHistory};
use crate::error::{Error, Result};
use crate::hfb::{
    assemble_totals, energy, evolve, gronwall_monitors, initial_data, mass, mass_transfer_check, HfbConfig,
    HfbHistory, HfbState, GAMMA_FLOOR,
};
use crate::kernels::{bogoliubov_uv, kernel_symmetry, KernelSet, SymmetryReport};
use crate::lattice::{convolve, LatticeField, LatticeGrid, RealField, Scalar};
use crate::oracle::{self, OracleReport};
use crate::potential::Potential;
use crate::qbe::{accumulate, corrected_moments, momentum_moment, reconstruct_totals, HMode, QbeStep};
use crate::symplectic::{verify_history, InvariantReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Qbe,
    Verify,
}

impl Stage {
    fn sections(self) -> &'static [&'static str] {
        match self {
            Stage::Simulate => &["hfb"],
            Stage::Qbe => &["hfb", "qbe"],
            Stage::Verify => &["hfb", "symplectic", "kernels", "qbe"],
        }
    }
}

/// Everything a run needs before integration.
pub struct Setup {
    pub grid: Arc<LatticeGrid>,
    pub pot: Potential,
    pub state0: HfbState,
    pub f0: RealField,
    pub hfb: HfbConfig,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    cfg.validate()?;
    let grid = LatticeGrid::shared(cfg.grid.dim, cfg.grid.length, cfg.grid.cutoff)?;
    let pot = Potential::new(&grid, cfg.potential_kind()?)?;
    let i = &cfg.initial;
    let (state0, f0) = initial_data(&grid, i.beta, i.kappa0, i.gamma_scale, i.phi0)?;
    let p = &cfg.physics;
    let hfb = HfbConfig::new(p.lambda, p.n, p.order, f0.clone(), cfg.time.dt, cfg.time.integrator)?;
    Ok(Setup { grid, pot, state0, f0, hfb })
}

/// HFB history; with the corruption hook the state at that step is pushed
/// off the cone and integration continues from it.
pub fn simulate(s: &Setup, cfg: &RunConfig) -> Result<HfbHistory> {
    let t = cfg.time.t_final;
    let dt = cfg.time.dt;
    let Some(k) = cfg.corrupt_step.filter(|&k| k <= cfg.steps()) else {
        return evolve(&s.state0, t, &s.hfb, &s.pot, &mut |_, _| {});
    };
    let mut head = evolve(&s.state0, k as f64 * dt, &s.hfb, &s.pot, &mut |_, _| {})?;
    let mut bad = head.states.pop().expect("nonempty");
    head.omegas.pop();
    let o = s.grid.origin();
    let g = bad.gamma.at(o);
    bad.sigma.values_mut()[o] = C64::new(10.0 * (1.0 + g), 0.0);
    bad.t = k as f64 * dt;
    head.states.push(bad.clone());
    head.omegas.push(RealField::zeros(&s.grid));
    let rest = t - k as f64 * dt;
    if let Ok(tail) = evolve(&bad, rest, &s.hfb, &s.pot, &mut |_, _| {}) {
        let last = head.omegas.len() - 1;
        head.omegas[last] = tail.omegas[0].clone();
        head.states.extend(tail.states.into_iter().skip(1));
        head.omegas.extend(tail.omegas.into_iter().skip(1));
    }
    Ok(head)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit, detail: None }
    }

    fn above(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit, detail: None }
    }

    fn with(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HfbSection {
    pub steps: usize,
    pub t_final: f64,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub max_mass_transfer_residual: f64,
    pub min_gamma_t: f64,
    pub max_cone_excess: f64,
    pub first_cone_violation_step: Option<usize>,
    pub max_relation_err: f64,
    pub max_evenness_err: f64,
    pub gronwall_min_slack: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QbeSection {
    pub mode: HMode,
    pub enable_q4: bool,
    pub samples: usize,
    pub max_momentum_ratio: f64,
    pub q3_max_abs: f64,
    pub q4_max_abs: Option<f64>,
    pub phi_final: [f64; 2],
    pub f_minus_f0_max: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSection {
    pub t: f64,
    #[serde(flatten)]
    pub symmetry: SymmetryReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub dim: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "M")]
    pub cutoff: usize,
    pub convolution: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub meta: Meta,
    pub hfb: Option<HfbSection>,
    pub symplectic: Option<InvariantReport>,
    pub kernels: Option<KernelSection>,
    pub qbe: Option<QbeSection>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }
}

fn header_comment(grid: &LatticeGrid) -> String {
    format!(
        "# dim={} L={} M={} convolution=zero-padded\n",
        grid.dim(),
        grid.length(),
        grid.cutoff()
    )
}

fn coord_header(dim: usize) -> String {
    let n: Vec<String> = (1..=dim).map(|a| format!("n{a}")).collect();
    let p: Vec<String> = (1..=dim).map(|a| format!("p{a}")).collect();
    format!("{},{}", n.join(","), p.join(","))
}

fn coords(grid: &LatticeGrid, i: usize) -> String {
    let n: Vec<String> = grid.n_slice(i).iter().map(|x| x.to_string()).collect();
    let p: Vec<String> = grid.momentum(i)[..grid.dim()].iter().map(|x| x.to_string()).collect();
    format!("{},{}", n.join(","), p.join(","))
}

fn csv(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// One row per lattice point: `n1[,n2[,n3]],p1[,p2[,p3]],re,im`.
pub fn write_field<T: Scalar>(w: &mut impl Write, f: &LatticeField<T>) -> Result<()> {
    let g = f.grid();
    w.write_all(header_comment(g).as_bytes())?;
    writeln!(w, "{},re,im", coord_header(g.dim()))?;
    for i in 0..g.len() {
        writeln!(w, "{},{},{}", coords(g, i), f.at(i).re(), f.at(i).im())?;
    }
    Ok(())
}

pub fn dump_field<T: Scalar>(dir: &Path, name: &str, f: &LatticeField<T>) -> Result<()> {
    let mut w = csv(dir, name)?;
    write_field(&mut w, f)?;
    w.flush()?;
    Ok(())
}

fn is_sample(k: usize, last: usize, stride: usize) -> bool {
    k.is_multiple_of(stride) || k == last
}

struct HfbOutcome {
    section: HfbSection,
    checks: Vec<Check>,
}

fn hfb_stage(s: &Setup, cfg: &RunConfig, h: &HfbHistory, dir: Option<&Path>, runtime: f64) -> Result<HfbOutcome> {
    let hc = &s.hfb;
    let last = h.len() - 1;
    let stride = cfg.time.sample_stride;
    let m0 = mass(&h.states[0], hc);
    let e0 = energy(&h.states[0], hc, &s.pot)?;
    let (mut md, mut ed) = (0.0f64, 0.0f64);
    let (mut min_gt, mut max_ex, mut rel, mut even) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut first_bad = None;
    let mut obs = match dir {
        Some(d) if cfg.output.csv => {
            let mut w = csv(d, "observables.csv")?;
            w.write_all(header_comment(&s.grid).as_bytes())?;
            writeln!(w, "t,mass,energy,phi_re,phi_im,gamma_max,cone_slack_min")?;
            Some(w)
        }
        _ => None,
    };
    for (k, st) in h.states.iter().enumerate() {
        let m = mass(st, hc);
        // A corrupted state can make the energy functional complex; record NaN.
        let e = energy(st, hc, &s.pot).unwrap_or(f64::NAN);
        md = md.max(((m - m0) / m0).abs());
        ed = ed.max(if e.is_nan() { f64::INFINITY } else { ((e - e0) / e0).abs() });
        let cone = assemble_totals(st, hc).cone();
        min_gt = min_gt.min(cone.min_gamma_t);
        max_ex = max_ex.max(cone.max_excess);
        if first_bad.is_none() && !cone.holds(-GAMMA_FLOOR, cfg.verify.cone_tol) {
            first_bad = Some(k);
        }
        rel = rel.max(st.relation_error());
        even = even.max(st.evenness_error());
        if let Some(w) = obs.as_mut() {
            if is_sample(k, last, stride) {
                writeln!(w, "{},{},{},{},{},{},{}", st.t, m, e, st.phi.re, st.phi.im, st.gamma_max(), -cone.max_excess)?;
            }
        }
    }
    if let Some(mut w) = obs {
        w.flush()?;
    }
    let r = mass_transfer_check(h)?.into_iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let gron = gronwall_monitors(h, &s.pot)?.iter().map(|g| g.min()).fold(f64::INFINITY, f64::min);

    if let (Some(d), true) = (dir, cfg.output.csv) {
        let ph = accumulate_phase(h);
        let mut w = csv(d, "omega_t.csv")?;
        w.write_all(header_comment(&s.grid).as_bytes())?;
        writeln!(w, "t,{},omega,theta", coord_header(s.grid.dim()))?;
        for k in (0..=last).filter(|&k| is_sample(k, last, stride)) {
            for i in 0..s.grid.len() {
                writeln!(w, "{},{},{},{}", h.states[k].t, coords(&s.grid, i), ph.omegas[k].at(i), ph.thetas[k].at(i))?;
            }
        }
        w.flush()?;
        dump_field(d, "vhat.csv", s.pot.vhat())?;
        dump_field(d, "f0.csv", &s.f0)?;
        dump_field(d, "gamma_T.csv", &h.last().gamma)?;
        dump_field(d, "sigma_T.csv", &h.last().sigma)?;
    }

    let mut cone = Check::above("cone.gamma_t_min", min_gt, GAMMA_FLOOR);
    let mut excess = Check::below("cone.sigma_excess_max", max_ex, cfg.verify.cone_tol);
    if let Some(k) = first_bad {
        let msg = format!("cone violation at step {k} (t = {})", h.states[k].t);
        cone = cone.with(msg.clone());
        excess = excess.with(msg);
    }
    let mut checks = vec![
        cone,
        excess,
        Check::below("relation.max_err", rel, cfg.verify.relation_tol),
        Check::below("mass.relative_drift", md, 1e-8),
        Check::below("energy.relative_drift", ed, 1e-6),
        Check::below("mass_transfer.max_residual", r, 1e-9),
        Check::above("gronwall.min_slack", gron, 0.0),
        Check::below("evenness.max_err", even, 1e-12),
    ];
    if h.len() != cfg.steps() + 1 {
        checks.push(Check::below("hfb.completed_steps", (cfg.steps() + 1 - h.len()) as f64, 0.0)
            .with(format!("integration stopped after step {}", h.len() - 1)));
    }
    Ok(HfbOutcome {
        section: HfbSection {
            steps: last,
            t_final: h.last().t,
            mass_drift: md,
            energy_drift: ed,
            max_mass_transfer_residual: r,
            min_gamma_t: min_gt,
            max_cone_excess: max_ex,
            first_cone_violation_step: first_bad,
            max_relation_err: rel,
            max_evenness_err: even,
            gronwall_min_slack: gron,
            runtime_s: runtime,
        },
        checks,
    })
}

fn qbe_stage(
    s: &Setup,
    cfg: &RunConfig,
    h: &HfbHistory,
    ph: &DispersionHistory,
    dir: Option<&Path>,
) -> Result<(QbeSection, Vec<Check>)> {
    let t0 = Instant::now();
    let last = h.len() - 1;
    let stride = cfg.time.sample_stride;
    let n = cfg.physics.n;
    let grid = &s.grid;
    let write = dir.filter(|_| cfg.output.csv);
    let mut files = match write {
        Some(d) => {
            let mut q = csv(d, "q3_t.csv")?;
            let mut m = csv(d, "moments_t.csv")?;
            let mut t = csv(d, "totals_t.csv")?;
            let c = coord_header(grid.dim());
            for w in [&mut q, &mut m, &mut t] {
                w.write_all(header_comment(grid).as_bytes())?;
            }
            let q4 = if cfg.qbe.enable_q4 { ",q4,q4_22,q4_13,q4_04" } else { "" };
            writeln!(q, "t,{c},q3,q3_12,q3_03,q3g_re,q3g_im{q4}")?;
            writeln!(m, "t,{c},f,g_re,g_im,Phi_re,Phi_im")?;
            writeln!(t, "t,{c},f_tot,g_tot_re,g_tot_im,Phi_tot_re,Phi_tot_im")?;
            Some((q, m, t))
        }
        None => None,
    };
    let mut ratio = 0.0f64;
    let mut samples = 0;
    let mut err: Option<Error> = None;
    let mut observe = |st: &QbeStep| {
        if err.is_some() || !is_sample(st.index, last, stride) {
            return;
        }
        samples += 1;
        let mut fields: Vec<&RealField> = st.instant.q3_channels.iter().chain(st.integral.q3_channels.iter()).collect();
        fields.extend(st.instant.q4_channels.iter().flatten());
        fields.extend(st.integral.q4_channels.iter().flatten());
        for q in fields {
            let (m, scale) = momentum_moment(q);
            if scale > 0.0 {
                ratio = ratio.max(m / scale);
            }
        }
        let Some((qf, mf, tf)) = files.as_mut() else { return };
        let res = (|| -> Result<()> {
            let ci = &st.integral;
            let t = ci.t;
            let mom = corrected_moments(ci, &s.f0, n)?;
            let tot = reconstruct_totals(&h.states[st.index], &mom, &ph.thetas[st.index], n)?;
            for i in 0..grid.len() {
                let c = coords(grid, i);
                let g = ci.q3g.at(i);
                write!(qf, "{t},{c},{},{},{},{},{}", ci.q3.at(i), ci.q3_channels[0].at(i), ci.q3_channels[1].at(i), g.re, g.im)?;
                if let (Some(q4), Some(ch)) = (&ci.q4, &ci.q4_channels) {
                    write!(qf, ",{},{},{},{}", q4.at(i), ch[0].at(i), ch[1].at(i), ch[2].at(i))?;
                }
                writeln!(qf)?;
                let gm = mom.g.at(i);
                writeln!(mf, "{t},{c},{},{},{},{},{}", mom.f.at(i), gm.re, gm.im, mom.phi.re, mom.phi.im)?;
                let gt = tot.g.at(i);
                writeln!(tf, "{t},{c},{},{},{},{},{}", tot.f.at(i), gt.re, gt.im, tot.phi.re, tot.phi.im)?;
            }
            Ok(())
        })();
        if let Err(e) = res {
            err = Some(e);
        }
    };
    let ci = accumulate(h, ph, &s.pot, &s.f0, cfg.qbe, &mut observe)?;
    if let Some(e) = err {
        return Err(e);
    }
    if let Some((mut q, mut m, mut t)) = files {
        q.flush()?;
        m.flush()?;
        t.flush()?;
    }
    let mom = corrected_moments(&ci, &s.f0, n)?;
    let df = mom.f.values().iter().zip(s.f0.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let section = QbeSection {
        mode: cfg.qbe.mode,
        enable_q4: cfg.qbe.enable_q4,
        samples,
        max_momentum_ratio: ratio,
        q3_max_abs: ci.q3.max_abs(),
        q4_max_abs: ci.q4.as_ref().map(|q| q.max_abs()),
        phi_final: [mom.phi.re, mom.phi.im],
        f_minus_f0_max: df,
        runtime_s: t0.elapsed().as_secs_f64(),
    };
    let checks = vec![Check::below("qbe.momentum_annihilation", ratio, 1e-12)];
    Ok((section, checks))
}

fn kernel_stage(s: &Setup, h: &HfbHistory) -> Result<(KernelSection, Vec<Check>)> {
    let st = h.last();
    let uv = bogoliubov_uv(st)?;
    let sym = kernel_symmetry(&uv, &s.pot, 100, 0x5eed)?;
    let checks = vec![
        Check::below("kernels.symmetry", sym.worst(), 1e-13),
        Check::below("kernels.uv_identity", sym.uv_identity, 1e-10),
    ];
    Ok((KernelSection { t: st.t, symmetry: sym }, checks))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: VerifyReport,
    pub history_len: usize,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

/// Runs the stages of `stage`, writes outputs under `cfg.output.directory`.
pub fn run_pipeline(cfg: &RunConfig, stage: Stage) -> Result<RunOutcome> {
    let s = setup(cfg)?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.serialize())?;

    let t0 = Instant::now();
    let h = simulate(&s, cfg)?;
    let hfb_time = t0.elapsed().as_secs_f64();
    let hfb = hfb_stage(&s, cfg, &h, Some(&dir), hfb_time)?;
    let mut checks = hfb.checks;
    let mut report = VerifyReport {
        meta: Meta { dim: s.grid.dim(), length: s.grid.length(), cutoff: s.grid.cutoff(), convolution: "zero-padded" },
        hfb: Some(hfb.section),
        symplectic: None,
        kernels: None,
        qbe: None,
        checks: Vec::new(),
        pass: false,
    };
    let healthy = h.states.iter().all(|st| st.gamma.values().iter().all(|&g| g >= GAMMA_FLOOR));
    let want = stage.sections();
    if healthy && want.contains(&"symplectic") {
        let rep = verify_history(&h, &s.pot)?;
        checks.push(Check::below("symplectic.reconstruction", rep.max_reconstruction_err, 1e-8));
        checks.push(Check::below("symplectic.S", rep.max_s_err, 1e-8));
        checks.push(Check::above("symplectic.min_eigenvalue", rep.min_eigenvalue, -1e-10));
        report.symplectic = Some(rep);
    }
    if healthy && want.contains(&"kernels") {
        let (sec, c) = kernel_stage(&s, &h)?;
        checks.extend(c);
        report.kernels = Some(sec);
    }
    if healthy && want.contains(&"qbe") {
        let ph = accumulate_phase(&h);
        let (sec, c) = qbe_stage(&s, cfg, &h, &ph, Some(&dir))?;
        checks.extend(c);
        report.qbe = Some(sec);
    }
    let present = [
        ("hfb", report.hfb.is_some()),
        ("symplectic", report.symplectic.is_some()),
        ("kernels", report.kernels.is_some()),
        ("qbe", report.qbe.is_some()),
    ];
    for (name, have) in present {
        if want.contains(&name) && !have {
            checks.push(Check::below(&format!("section.{name}"), 1.0, 0.0).with(format!("section `{name}` missing")));
        }
    }
    report.pass = checks.iter().all(|c| c.pass);
    report.checks = checks;
    if cfg.output.json {
        fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(RunOutcome { report, history_len: h.len() })
}

/// B12 and B03 on every index triple at t = 0, rows `i,j,k,re,im` with
/// i, j, k the integer momentum labels.
pub fn dump_kernels(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    if s.grid.dim() != 1 || s.grid.cutoff() > 4 {
        return Err(Error::SizeGuard(format!(
            "kernel dump needs d = 1 and M ≤ 4, got d = {}, M = {}",
            s.grid.dim(),
            s.grid.cutoff()
        )));
    }
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir)?;
    let uv = bogoliubov_uv(&s.state0)?;
    let ks = KernelSet::new(&uv, &s.pot)?;
    let n = s.grid.len();
    for (name, b12) in [("kernels_B12.csv", true), ("kernels_B03.csv", false)] {
        let mut w = csv(dir, name)?;
        w.write_all(header_comment(&s.grid).as_bytes())?;
        writeln!(w, "i,j,k,re,im")?;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let z = if b12 { ks.b12(i, j, k) } else { ks.b03(i, j, k) };
                    let lab = |x: usize| s.grid.n_slice(x)[0];
                    writeln!(w, "{},{},{},{},{}", lab(i), lab(j), lab(k), z.re, z.im)?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleDiff {
    #[serde(flatten)]
    pub worst: OracleReport,
    pub operators: Vec<NamedReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedReport {
    pub name: String,
    #[serde(flatten)]
    pub report: OracleReport,
}

/// Optimized accumulators and convolution against the brute-force sums.
pub fn oracle_diff(cfg: &RunConfig) -> Result<OracleDiff> {
    let s = setup(cfg)?;
    let h = evolve(&s.state0, cfg.time.t_final, &s.hfb, &s.pot, &mut |_, _| {})?;
    let ph = accumulate_phase(&h);
    let mut hs = Vec::with_capacity(h.len());
    let ci = accumulate(&h, &ph, &s.pot, &s.f0, cfg.qbe, &mut |st| hs.push(st.h.clone()))?;
    let k = h.len() - 1;
    let mut ops: Vec<(String, OracleReport)> = Vec::new();
    let at = assemble_totals(h.last(), &s.hfb);
    let g = at.gamma();
    ops.push(("convolve".to_string(), oracle::compare(convolve(&g, s.pot.vhat())?.values(), oracle::naive_convolve(&g, s.pot.vhat())?.values())));
    ops.push(("q3".into(), oracle::compare(ci.q3.values(), oracle::naive_q3(&h, &s.pot, &hs, k)?.values())));
    ops.push(("q3g".into(), oracle::compare(ci.q3g.values(), oracle::naive_q3g(&h, &s.pot, &hs, k)?.values())));
    ops.push(("q3phi".into(), oracle::compare_scalar(ci.q3phi, oracle::naive_q3phi(&h, &s.pot, &hs, k)?)));
    ops.push(("q33phi".into(), oracle::compare_scalar(ci.q33phi, oracle::naive_q33phi(&h, &s.pot, &hs, k)?)));
    if let Some(q4) = &ci.q4 {
        ops.push(("q4".into(), oracle::compare(q4.values(), oracle::naive_q4(&h, &s.pot, &hs, k)?.values())));
    }
    let ops: Vec<NamedReport> = ops.into_iter().map(|(name, report)| NamedReport { name, report }).collect();
    let worst = ops
        .iter()
        .map(|r| r.report)
        .fold(OracleReport { max_rel_err: 0.0, max_abs_err: 0.0, worst_index: 0 }, |a, b| {
            if b.max_rel_err > a.max_rel_err { b } else { a }
        });
    Ok(OracleDiff { worst, operators: ops })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
