//! Flat `section.key = value` run configuration.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hfb::{Integrator, Order, Phi0};
use crate::potential::PotentialKind;
use crate::qbe::{HMode, QbeParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub dim: usize,
    pub length: f64,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSection {
    pub kind: String,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsSection {
    pub lambda: f64,
    pub n: f64,
    pub order: Order,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSection {
    pub beta: f64,
    pub kappa0: f64,
    pub gamma_scale: f64,
    pub phi0: Phi0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub cone_tol: f64,
    pub relation_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub potential: PotentialSection,
    pub physics: PhysicsSection,
    pub initial: InitialSection,
    pub time: TimeSection,
    pub qbe: QbeParams,
    pub output: OutputSection,
    pub verify: VerifySection,
    /// Test hook: overwrite γ at this step with a cone-violating value.
    pub corrupt_step: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSection { dim: 1, length: 2.0 * PI, cutoff: 8 },
            potential: PotentialSection { kind: "gaussian".into(), amplitude: 1.0, width: 2.0 },
            physics: PhysicsSection { lambda: 0.1, n: 100.0, order: Order::Second },
            initial: InitialSection { beta: 1.0, kappa0: 0.5, gamma_scale: 0.5, phi0: Phi0::Uniform },
            time: TimeSection { dt: 1e-3, t_final: 10.0, integrator: Integrator::LawsonRk4, sample_stride: 10 },
            qbe: QbeParams::default(),
            output: OutputSection { directory: PathBuf::from("out"), csv: true, json: true },
            verify: VerifySection { cone_tol: 1e-10, relation_tol: 1e-8 },
            corrupt_step: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "grid.dim",
    "grid.L",
    "grid.M",
    "potential.kind",
    "potential.amplitude",
    "potential.width",
    "physics.lambda",
    "physics.N",
    "physics.order",
    "initial.beta",
    "initial.kappa0",
    "initial.gamma_scale",
    "initial.phi0",
    "time.dt",
    "time.T",
    "time.integrator",
    "time.sample_stride",
    "qbe.mode",
    "qbe.enable_q4",
    "qbe.q4_budget",
    "output.directory",
    "output.formats",
    "verify.cone_tol",
    "verify.relation_tol",
    "debug.corrupt_step",
];

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.into(), msg: msg.into() }
}

fn num(key: &str, v: &str) -> Result<f64> {
    let x: f64 = match v {
        "pi" => PI,
        "2pi" => 2.0 * PI,
        _ => v.parse().map_err(|_| bad(key, format!("expected a number, got `{v}`")))?,
    };
    if !x.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(x)
}

fn int(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, format!("expected a nonnegative integer, got `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

fn parse_phi0(key: &str, v: &str) -> Result<Phi0> {
    if v == "uniform" {
        return Ok(Phi0::Uniform);
    }
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re, im] => Ok(Phi0::Value(C64::new(num(key, re)?, num(key, im)?))),
        _ => Err(bad(key, format!("expected `uniform` or `re,im`, got `{v}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Syntax { line: lineno + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(bad(key, "unknown key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(bad(key, "given more than once"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "grid.dim" => self.grid.dim = int(key, v)?,
            "grid.L" => self.grid.length = num(key, v)?,
            "grid.M" => self.grid.cutoff = int(key, v)?,
            "potential.kind" => self.potential.kind = v.to_string(),
            "potential.amplitude" => self.potential.amplitude = num(key, v)?,
            "potential.width" => self.potential.width = num(key, v)?,
            "physics.lambda" => self.physics.lambda = num(key, v)?,
            "physics.N" => self.physics.n = num(key, v)?,
            "physics.order" => {
                self.physics.order = match v {
                    "first" => Order::First,
                    "second" => Order::Second,
                    _ => return Err(bad(key, format!("order ∈ {{first, second}}, got `{v}`"))),
                }
            }
            "initial.beta" => self.initial.beta = num(key, v)?,
            "initial.kappa0" => self.initial.kappa0 = num(key, v)?,
            "initial.gamma_scale" => self.initial.gamma_scale = num(key, v)?,
            "initial.phi0" => self.initial.phi0 = parse_phi0(key, v)?,
            "time.dt" => self.time.dt = num(key, v)?,
            "time.T" => self.time.t_final = num(key, v)?,
            "time.integrator" => {
                self.time.integrator = match v {
                    "lawson_rk4" => Integrator::LawsonRk4,
                    "rk4" => Integrator::Rk4,
                    _ => return Err(bad(key, format!("integrator ∈ {{lawson_rk4, rk4}}, got `{v}`"))),
                }
            }
            "time.sample_stride" => self.time.sample_stride = int(key, v)?,
            "qbe.mode" => {
                self.qbe.mode = match v {
                    "frozen" => HMode::Frozen,
                    "selfconsistent" => HMode::SelfConsistent,
                    _ => return Err(bad(key, format!("mode ∈ {{frozen, selfconsistent}}, got `{v}`"))),
                }
            }
            "qbe.enable_q4" => self.qbe.enable_q4 = boolean(key, v)?,
            "qbe.q4_budget" => self.qbe.q4_budget = num(key, v)?,
            "output.directory" => self.output.directory = PathBuf::from(v),
            "output.formats" => {
                self.output.csv = false;
                self.output.json = false;
                for f in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match f {
                        "csv" => self.output.csv = true,
                        "json" => self.output.json = true,
                        _ => return Err(bad(key, format!("formats ⊆ {{csv, json}}, got `{f}`"))),
                    }
                }
            }
            "verify.cone_tol" => self.verify.cone_tol = num(key, v)?,
            "verify.relation_tol" => self.verify.relation_tol = num(key, v)?,
            "debug.corrupt_step" => self.corrupt_step = if v == "none" { None } else { Some(int(key, v)?) },
            _ => unreachable!("key list checked"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(bad("grid.dim", format!("dim ∈ {{1,2,3}}, got {}", g.dim)));
        }
        if !(g.length > 0.0) {
            return Err(bad("grid.L", format!("L > 0, got {}", g.length)));
        }
        if (2 * g.cutoff + 1).pow(g.dim as u32) > 1_000_000 {
            return Err(bad("grid.M", "more than 10⁶ lattice points"));
        }
        self.potential_kind()?;
        let p = &self.physics;
        if !(p.lambda >= 0.0) {
            return Err(bad("physics.lambda", "lambda ≥ 0"));
        }
        if !(p.n > 0.0) {
            return Err(bad("physics.N", "N > 0"));
        }
        let i = &self.initial;
        if !(i.beta >= 0.0) {
            return Err(bad("initial.beta", "beta ≥ 0"));
        }
        if !(i.kappa0 > 0.0) {
            return Err(bad("initial.kappa0", "kappa0 > 0"));
        }
        if !(i.gamma_scale >= 0.0) {
            return Err(bad("initial.gamma_scale", "gamma_scale ≥ 0"));
        }
        let t = &self.time;
        if !(t.dt > 0.0) {
            return Err(bad("time.dt", "dt > 0"));
        }
        if !(t.t_final >= 0.0) {
            return Err(bad("time.T", "T ≥ 0"));
        }
        let k = (t.t_final / t.dt).round();
        if (k * t.dt - t.t_final).abs() > 1e-9 * t.t_final.max(t.dt) {
            return Err(bad("time.T", format!("T = {} must be a multiple of dt = {}", t.t_final, t.dt)));
        }
        if t.sample_stride == 0 {
            return Err(bad("time.sample_stride", "sample_stride ≥ 1"));
        }
        if !(self.qbe.q4_budget > 0.0) {
            return Err(bad("qbe.q4_budget", "q4_budget > 0"));
        }
        if !self.output.csv && !self.output.json {
            return Err(bad("output.formats", "at least one of csv, json"));
        }
        if !(self.verify.cone_tol > 0.0) {
            return Err(bad("verify.cone_tol", "cone_tol > 0"));
        }
        if !(self.verify.relation_tol > 0.0) {
            return Err(bad("verify.relation_tol", "relation_tol > 0"));
        }
        Ok(())
    }

    pub fn potential_kind(&self) -> Result<PotentialKind> {
        let p = &self.potential;
        let kind = match p.kind.as_str() {
            "gaussian" => PotentialKind::Gaussian { amplitude: p.amplitude, width: p.width },
            "constant" => PotentialKind::Constant { amplitude: p.amplitude },
            "zero" => PotentialKind::Zero,
            other => return Err(bad("potential.kind", format!("kind ∈ {{gaussian, constant, zero}}, got `{other}`"))),
        };
        if !(p.amplitude >= 0.0) {
            return Err(bad("potential.amplitude", "amplitude ≥ 0"));
        }
        if !(p.width > 0.0) {
            return Err(bad("potential.width", "width > 0"));
        }
        Ok(kind)
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round() as usize
    }

    /// Every key, in canonical order; floats print in shortest round-trip form.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.dim", self.grid.dim.to_string());
        kv("grid.L", format!("{:?}", self.grid.length));
        kv("grid.M", self.grid.cutoff.to_string());
        kv("potential.kind", self.potential.kind.clone());
        kv("potential.amplitude", format!("{:?}", self.potential.amplitude));
        kv("potential.width", format!("{:?}", self.potential.width));
        kv("physics.lambda", format!("{:?}", self.physics.lambda));
        kv("physics.N", format!("{:?}", self.physics.n));
        kv("physics.order", match self.physics.order {
            Order::First => "first".into(),
            Order::Second => "second".into(),
        });
        kv("initial.beta", format!("{:?}", self.initial.beta));
        kv("initial.kappa0", format!("{:?}", self.initial.kappa0));
        kv("initial.gamma_scale", format!("{:?}", self.initial.gamma_scale));
        kv("initial.phi0", match self.initial.phi0 {
            Phi0::Uniform => "uniform".into(),
            Phi0::Value(z) => format!("{:?},{:?}", z.re, z.im),
        });
        kv("time.dt", format!("{:?}", self.time.dt));
        kv("time.T", format!("{:?}", self.time.t_final));
        kv("time.integrator", match self.time.integrator {
            Integrator::LawsonRk4 => "lawson_rk4".into(),
            Integrator::Rk4 => "rk4".into(),
        });
        kv("time.sample_stride", self.time.sample_stride.to_string());
        kv("qbe.mode", match self.qbe.mode {
            HMode::Frozen => "frozen".into(),
            HMode::SelfConsistent => "selfconsistent".into(),
        });
        kv("qbe.enable_q4", self.qbe.enable_q4.to_string());
        kv("qbe.q4_budget", format!("{:?}", self.qbe.q4_budget));
        kv("output.directory", self.output.directory.display().to_string());
        let formats: Vec<&str> = [(self.output.csv, "csv"), (self.output.json, "json")]
            .into_iter()
            .filter_map(|(on, f)| on.then_some(f))
            .collect();
        kv("output.formats", formats.join(","));
        kv("verify.cone_tol", format!("{:?}", self.verify.cone_tol));
        kv("verify.relation_tol", format!("{:?}", self.verify.relation_tol));
        kv("debug.corrupt_step", self.corrupt_step.map_or("none".into(), |k| k.to_string()));
        s
    }
}
