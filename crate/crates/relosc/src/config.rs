//! Scenario configuration: JSON schema, builtin scenarios, validation
//! with field-path errors, and builders for the solver option structs.
//!
//! A config file either stands alone or names a builtin `scenario`; in
//! the latter case the builtin supplies the base and the file's fields
//! override it. `report.json` embeds the fully resolved config under
//! `"config"`, and that file is itself accepted as a config, which is
//! what makes reruns bit-reproducible.

use serde_json::Value;

use crate::action::{FamilyKind, PerturbCoeffs, PerturbShape, SaddleProblem, TimePotential, TimeWeight};
use crate::error::{Error, Result};
use crate::hypotheses::{preset_scenario, CheckA2Options, GrowthOptions, PresetName};
use crate::minimize::{LocalMinOptions, MultiStartOptions};
use crate::potentials::KineticPotential;
use crate::report::Json;
use crate::saddle::{PenaltyOptions, PerturbFamily, SaddleOptions};
use crate::verify::StudyOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct KineticConfig {
    pub kind: String,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub n: usize,
    pub period: f64,
    pub l: f64,
    pub kinetic: KineticConfig,
    pub f_expr: String,
    pub g_expr: String,
    pub gamma_expr: Option<String>,
    pub q: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub node_count: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub margin: f64,
    pub tol_resid: f64,
    pub max_iters: usize,
    pub n_starts: usize,
    pub eps_val_scale: f64,
    pub eps_sep: Option<f64>,
    pub search_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleConfig {
    pub max_iters: usize,
    pub step_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesesConfig {
    pub radii: Vec<f64>,
    pub sphere_samples: usize,
    pub t_samples: usize,
    pub x_radius: f64,
    pub scan_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: Option<String>,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub family: FamilyKind,
    pub psi: Option<Vec<f64>>,
    pub optimizer: OptimizerConfig,
    pub saddle: SaddleConfig,
    pub hypotheses: HypothesesConfig,
    pub seed: u64,
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

struct Reader<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Reader<'a> {
    fn field(&self, name: &str) -> Result<Reader<'a>> {
        let path = format!("{}.{name}", self.path);
        match self.value.get(name) {
            Some(v) => Ok(Reader { value: v, path }),
            None => Err(cfg_err(&path, "missing field")),
        }
    }

    fn optional(&self, name: &str) -> Option<Reader<'a>> {
        self.value.get(name).filter(|v| !v.is_null()).map(|v| Reader {
            value: v,
            path: format!("{}.{name}", self.path),
        })
    }

    fn f64(&self) -> Result<f64> {
        self.value
            .as_f64()
            .ok_or_else(|| cfg_err(&self.path, "expected a number"))
    }

    fn usize(&self) -> Result<usize> {
        self.value
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| cfg_err(&self.path, "expected a nonnegative integer"))
    }

    fn u64(&self) -> Result<u64> {
        self.value
            .as_u64()
            .ok_or_else(|| cfg_err(&self.path, "expected a nonnegative integer"))
    }

    fn string(&self) -> Result<String> {
        self.value
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| cfg_err(&self.path, "expected a string"))
    }

    fn f64_array(&self) -> Result<Vec<f64>> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| cfg_err(&self.path, "expected an array of numbers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| cfg_err(&format!("{}[{i}]", self.path), "expected a number"))
            })
            .collect()
    }
}

impl Config {
    /// Parses config text, honoring an embedded `"config"` object (as
    /// written into `report.json`) and a `"scenario"` base.
    pub fn from_json_str(text: &str) -> Result<Config> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| cfg_err("", format!("invalid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(embedded) if embedded.is_object() => embedded.clone(),
            _ => value,
        };
        let merged = match value.get("scenario").and_then(|s| s.as_str()) {
            Some(name) => {
                let mut base = builtin_value(name)?;
                deep_merge(&mut base, &value);
                base
            }
            None => value,
        };
        Config::from_value(&merged)
    }

    pub fn builtin(name: &str) -> Result<Config> {
        Config::from_value(&builtin_value(name)?)
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "symmetric-double-well",
            "balanced-tilt",
            "convex-well",
            "corollary-2-1",
            "corollary-2-2",
            "corollary-2-3",
        ]
    }

    fn from_value(value: &Value) -> Result<Config> {
        let root = Reader {
            value,
            path: String::new(),
        };
        if !value.is_object() {
            return Err(cfg_err("", "top level must be an object"));
        }
        let scenario = match root.optional("scenario") {
            Some(r) => Some(r.string()?),
            None => None,
        };

        let problem = root.field("problem")?;
        let n = problem.field("n")?.usize()?;
        if n == 0 || n > 8 {
            return Err(cfg_err(".problem.n", "dimension must be between 1 and 8"));
        }
        let period = problem.field("T")?.f64()?;
        if !(period > 0.0) {
            return Err(cfg_err(".problem.T", "period must be positive"));
        }
        let l = problem.field("L")?.f64()?;
        if !(l > 0.0) {
            return Err(cfg_err(".problem.L", "slope bound must be positive"));
        }
        let kinetic = match problem.optional("kinetic") {
            Some(k) => {
                let kind = k.field("kind")?.string()?;
                let coeffs = match k.optional("coeffs") {
                    Some(c) => c.f64_array()?,
                    None => Vec::new(),
                };
                if kind != "relativistic" && kind != "user-polynomial" {
                    return Err(cfg_err(
                        &format!("{}.kind", k.path),
                        "expected \"relativistic\" or \"user-polynomial\"",
                    ));
                }
                KineticConfig { kind, coeffs }
            }
            None => KineticConfig {
                kind: "relativistic".into(),
                coeffs: Vec::new(),
            },
        };
        let f_expr = problem.field("F_expr")?.string()?;
        let g_expr = problem.field("G_expr")?.string()?;
        let gamma_expr = match problem.optional("gamma_expr") {
            Some(g) => Some(g.string()?),
            None => None,
        };
        let q = problem.field("q")?.f64()?;
        if !(q > 0.0) {
            return Err(cfg_err(".problem.q", "growth exponent must be positive"));
        }
        let r = match problem.optional("r") {
            Some(r) => r.f64()?,
            None => return Err(cfg_err(".problem.r", "missing field (presets resolve it; plain configs must set it)")),
        };

        let grid = root.field("grid")?;
        let node_count = grid.field("N")?.usize()?;
        let cells = grid.field("M")?.usize()?;
        if node_count < 2 {
            return Err(cfg_err(".grid.N", "need at least two nodes"));
        }
        if cells == 0 {
            return Err(cfg_err(".grid.M", "need at least one cell"));
        }
        if node_count % cells != 0 && cells % node_count != 0 {
            return Err(cfg_err(".grid.M", "cells must align with the node grid"));
        }

        let family = match root.optional("family") {
            Some(f) => {
                let kind = f.field("kind")?.string()?;
                match kind.as_str() {
                    "free" => FamilyKind::Free,
                    "nonnegative" => FamilyKind::Nonnegative,
                    "box" => FamilyKind::Box {
                        lo: f.field("lo")?.f64()?,
                        hi: f.field("hi")?.f64()?,
                    },
                    _ => {
                        return Err(cfg_err(
                            &format!("{}.kind", f.path),
                            "expected \"free\", \"nonnegative\" or \"box\"",
                        ))
                    }
                }
            }
            None => FamilyKind::Free,
        };

        let psi = match root.optional("psi") {
            Some(p) => {
                let values = p.f64_array()?;
                if values.len() != cells {
                    return Err(cfg_err(".psi", format!("expected {cells} cell values")));
                }
                Some(values)
            }
            None => None,
        };

        let defaults = OptimizerConfig {
            margin: 1e-3,
            tol_resid: 1e-6,
            max_iters: 4000,
            n_starts: 24,
            eps_val_scale: 1e-4,
            eps_sep: None,
            search_radius: None,
        };
        let optimizer = match root.optional("optimizer") {
            Some(o) => OptimizerConfig {
                margin: match o.optional("margin") {
                    Some(v) => v.f64()?,
                    None => defaults.margin,
                },
                tol_resid: match o.optional("tol_resid") {
                    Some(v) => v.f64()?,
                    None => defaults.tol_resid,
                },
                max_iters: match o.optional("max_iters") {
                    Some(v) => v.usize()?,
                    None => defaults.max_iters,
                },
                n_starts: match o.optional("n_starts") {
                    Some(v) => v.usize()?,
                    None => defaults.n_starts,
                },
                eps_val_scale: match o.optional("eps_val_scale") {
                    Some(v) => v.f64()?,
                    None => defaults.eps_val_scale,
                },
                eps_sep: match o.optional("eps_sep") {
                    Some(v) => Some(v.f64()?),
                    None => None,
                },
                search_radius: match o.optional("search_radius") {
                    Some(v) => Some(v.f64()?),
                    None => None,
                },
            },
            None => defaults,
        };
        if !(optimizer.margin > 0.0 && optimizer.margin < 1.0) {
            return Err(cfg_err(".optimizer.margin", "margin must lie in (0, 1)"));
        }

        let saddle = match root.optional("saddle") {
            Some(s) => SaddleConfig {
                max_iters: match s.optional("max_iters") {
                    Some(v) => v.usize()?,
                    None => 48,
                },
                step_scale: match s.optional("step_scale") {
                    Some(v) => Some(v.f64()?),
                    None => None,
                },
            },
            None => SaddleConfig {
                max_iters: 48,
                step_scale: None,
            },
        };

        let hypotheses = match root.optional("hypotheses") {
            Some(h) => HypothesesConfig {
                radii: match h.optional("radii") {
                    Some(v) => v.f64_array()?,
                    None => vec![1.0, 3.0, 10.0, 30.0, 100.0],
                },
                sphere_samples: match h.optional("sphere_samples") {
                    Some(v) => v.usize()?,
                    None => 48,
                },
                t_samples: match h.optional("t_samples") {
                    Some(v) => v.usize()?,
                    None => 64,
                },
                x_radius: match h.optional("x_radius") {
                    Some(v) => v.f64()?,
                    None => 3.0,
                },
                scan_points: match h.optional("scan_points") {
                    Some(v) => v.usize()?,
                    None => 601,
                },
            },
            None => HypothesesConfig {
                radii: vec![1.0, 3.0, 10.0, 30.0, 100.0],
                sphere_samples: 48,
                t_samples: 64,
                x_radius: 3.0,
                scan_points: 601,
            },
        };

        let seed = match root.optional("seeds") {
            Some(s) => s.field("master")?.u64()?,
            None => 42,
        };

        Ok(Config {
            scenario,
            problem: ProblemConfig {
                n,
                period,
                l,
                kinetic,
                f_expr,
                g_expr,
                gamma_expr,
                q,
                r,
            },
            grid: GridConfig { node_count, cells },
            family,
            psi,
            optimizer,
            saddle,
            hypotheses,
            seed,
        })
    }

    pub fn to_problem(&self) -> Result<SaddleProblem> {
        let kin = match self.problem.kinetic.kind.as_str() {
            "relativistic" => KineticPotential::relativistic(self.problem.l)?,
            "user-polynomial" => {
                KineticPotential::user_polynomial(self.problem.l, self.problem.kinetic.coeffs.clone())?
            }
            other => return Err(cfg_err(".problem.kinetic.kind", format!("unknown kind `{other}`"))),
        };
        let f = TimePotential::parse(&self.problem.f_expr, self.problem.n)?;
        let g = PerturbShape::parse(&self.problem.g_expr, self.problem.n)?;
        let gamma = match &self.problem.gamma_expr {
            Some(expr) => Some(TimeWeight::parse(expr)?),
            None => None,
        };
        let p = SaddleProblem::new(kin, f, g, gamma, self.problem.period, self.problem.r)?;
        p.validate_weight(self.hypotheses.t_samples)?;
        Ok(p)
    }

    pub fn to_family(&self) -> Result<PerturbFamily> {
        PerturbFamily::new(self.grid.cells, self.family)
    }

    pub fn to_psi(&self) -> Result<PerturbCoeffs> {
        match &self.psi {
            Some(values) => PerturbCoeffs::new(values.clone(), self.family),
            None => Ok(PerturbCoeffs::zeros(self.grid.cells, self.family)),
        }
    }

    pub fn local_options(&self) -> LocalMinOptions {
        LocalMinOptions {
            margin: self.optimizer.margin,
            tol_resid: self.optimizer.tol_resid,
            max_iters: self.optimizer.max_iters,
            ..LocalMinOptions::default()
        }
    }

    pub fn multi_start_options(&self, search_radius: f64) -> MultiStartOptions {
        MultiStartOptions {
            starts: self.optimizer.n_starts,
            node_count: self.grid.node_count,
            seed: self.seed,
            search_radius: self.optimizer.search_radius.unwrap_or(search_radius),
            local: self.local_options(),
            eps_val_scale: self.optimizer.eps_val_scale,
            eps_sep: self.optimizer.eps_sep,
        }
    }

    pub fn growth_options(&self) -> GrowthOptions {
        GrowthOptions {
            radii: self.hypotheses.radii.clone(),
            sphere_samples: self.hypotheses.sphere_samples,
            t_samples: self.hypotheses.t_samples,
            seed: self.seed ^ 0x47524f57,
            ..GrowthOptions::default()
        }
    }

    pub fn a2_options(&self) -> CheckA2Options {
        CheckA2Options {
            x_radius: self.hypotheses.x_radius,
            scan_points: self.hypotheses.scan_points,
            t_samples: self.hypotheses.t_samples,
            seed: self.seed ^ 0xa2,
            ..CheckA2Options::default()
        }
    }

    pub fn saddle_options(&self, search_radius: f64) -> SaddleOptions {
        SaddleOptions {
            max_evals: self.saddle.max_iters,
            step_scale: self.saddle.step_scale,
            ms: self.multi_start_options(search_radius),
            growth: None,
            bisect_min_width: 1e-8,
        }
    }

    pub fn penalty_options(&self, search_radius: f64) -> PenaltyOptions {
        PenaltyOptions {
            node_count: self.grid.node_count,
            search_radius: self.optimizer.search_radius.unwrap_or(search_radius),
            local: self.local_options(),
            seed: self.seed ^ 0x9e7a,
            ..PenaltyOptions::default()
        }
    }

    pub fn study_options(&self, search_radius: f64) -> StudyOptions {
        StudyOptions {
            ms: self.multi_start_options(search_radius),
            ..StudyOptions::default()
        }
    }

    /// Fully resolved config as ordered JSON (embedded into reports).
    pub fn to_json(&self) -> Json {
        let family = match self.family {
            FamilyKind::Free => Json::obj(vec![("kind", Json::str("free"))]),
            FamilyKind::Nonnegative => Json::obj(vec![("kind", Json::str("nonnegative"))]),
            FamilyKind::Box { lo, hi } => Json::obj(vec![
                ("kind", Json::str("box")),
                ("lo", Json::Num(lo)),
                ("hi", Json::Num(hi)),
            ]),
        };
        Json::obj(vec![
            (
                "scenario",
                match &self.scenario {
                    Some(s) => Json::str(s.clone()),
                    None => Json::Null,
                },
            ),
            (
                "problem",
                Json::obj(vec![
                    ("n", Json::Int(self.problem.n as i64)),
                    ("T", Json::Num(self.problem.period)),
                    ("L", Json::Num(self.problem.l)),
                    (
                        "kinetic",
                        Json::obj(vec![
                            ("kind", Json::str(self.problem.kinetic.kind.clone())),
                            ("coeffs", Json::num_array(&self.problem.kinetic.coeffs)),
                        ]),
                    ),
                    ("F_expr", Json::str(self.problem.f_expr.clone())),
                    ("G_expr", Json::str(self.problem.g_expr.clone())),
                    (
                        "gamma_expr",
                        match &self.problem.gamma_expr {
                            Some(g) => Json::str(g.clone()),
                            None => Json::Null,
                        },
                    ),
                    ("q", Json::Num(self.problem.q)),
                    ("r", Json::Num(self.problem.r)),
                ]),
            ),
            (
                "grid",
                Json::obj(vec![
                    ("N", Json::Int(self.grid.node_count as i64)),
                    ("M", Json::Int(self.grid.cells as i64)),
                ]),
            ),
            ("family", family),
            (
                "psi",
                match &self.psi {
                    Some(v) => Json::num_array(v),
                    None => Json::Null,
                },
            ),
            (
                "optimizer",
                Json::obj(vec![
                    ("margin", Json::Num(self.optimizer.margin)),
                    ("tol_resid", Json::Num(self.optimizer.tol_resid)),
                    ("max_iters", Json::Int(self.optimizer.max_iters as i64)),
                    ("n_starts", Json::Int(self.optimizer.n_starts as i64)),
                    ("eps_val_scale", Json::Num(self.optimizer.eps_val_scale)),
                    (
                        "eps_sep",
                        match self.optimizer.eps_sep {
                            Some(v) => Json::Num(v),
                            None => Json::Null,
                        },
                    ),
                    (
                        "search_radius",
                        match self.optimizer.search_radius {
                            Some(v) => Json::Num(v),
                            None => Json::Null,
                        },
                    ),
                ]),
            ),
            (
                "saddle",
                Json::obj(vec![
                    ("max_iters", Json::Int(self.saddle.max_iters as i64)),
                    (
                        "step_scale",
                        match self.saddle.step_scale {
                            Some(v) => Json::Num(v),
                            None => Json::Null,
                        },
                    ),
                ]),
            ),
            (
                "hypotheses",
                Json::obj(vec![
                    ("radii", Json::num_array(&self.hypotheses.radii)),
                    ("sphere_samples", Json::Int(self.hypotheses.sphere_samples as i64)),
                    ("t_samples", Json::Int(self.hypotheses.t_samples as i64)),
                    ("x_radius", Json::Num(self.hypotheses.x_radius)),
                    ("scan_points", Json::Int(self.hypotheses.scan_points as i64)),
                ]),
            ),
            (
                "seeds",
                Json::obj(vec![("master", Json::Int(self.seed as i64))]),
            ),
        ])
    }
}

fn deep_merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (key, value) in o {
                match b.get_mut(key) {
                    Some(existing) if existing.is_object() && value.is_object() => {
                        deep_merge(existing, value)
                    }
                    _ => {
                        b.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn builtin_value(name: &str) -> Result<Value> {
    use serde_json::json;
    let value = match name {
        "symmetric-double-well" => json!({
            "scenario": "symmetric-double-well",
            "problem": {
                "n": 1, "T": 1.0, "L": 1.0,
                "kinetic": {"kind": "relativistic"},
                "F_expr": "(x1^2-1)^2",
                "G_expr": "x1",
                "q": 2.0,
                "r": 0.0
            },
            "grid": {"N": 64, "M": 16},
            "family": {"kind": "free"},
            "seeds": {"master": 42}
        }),
        "balanced-tilt" => json!({
            "scenario": "balanced-tilt",
            "problem": {
                "n": 1, "T": 1.0, "L": 1.0,
                "kinetic": {"kind": "relativistic"},
                "F_expr": "(x1^2-1)^2+0.1*x1",
                "G_expr": "x1",
                "q": 2.0,
                "r": 0.0
            },
            "grid": {"N": 64, "M": 16},
            "family": {"kind": "free"},
            "optimizer": {"eps_val_scale": 4e-5},
            "seeds": {"master": 42}
        }),
        "convex-well" => json!({
            "scenario": "convex-well",
            "problem": {
                "n": 1, "T": 1.0, "L": 1.0,
                "kinetic": {"kind": "relativistic"},
                "F_expr": "x1^2",
                "G_expr": "x1",
                "q": 1.0,
                "r": 0.0
            },
            "grid": {"N": 64, "M": 16},
            "family": {"kind": "free"},
            "saddle": {"max_iters": 12},
            "seeds": {"master": 42}
        }),
        "corollary-2-1" | "corollary-2-2" | "corollary-2-3" => {
            let preset = PresetName::parse(name).expect("matched above");
            let out = preset_scenario(preset)
                .map_err(|e| cfg_err(".scenario", format!("preset failed its checks: {e}")))?;
            let p = &out.problem;
            let gamma = match name {
                "corollary-2-2" => Value::String("1.5+0.25*sin(2*pi*t)".into()),
                _ => Value::Null,
            };
            let f_expr = match name {
                "corollary-2-1" => "(2+sin(2*pi*t))*(x1^2-1)^2",
                "corollary-2-2" => "x1^4-2.2*x1^3+x1^2",
                "corollary-2-3" => "(x1^2-1)^2+0.1*x1",
                _ => unreachable!(),
            };
            let g_expr = match name {
                "corollary-2-2" => "x1^2",
                _ => "x1",
            };
            json!({
                "scenario": name,
                "problem": {
                    "n": 1, "T": 1.0, "L": 1.0,
                    "kinetic": {"kind": "relativistic"},
                    "F_expr": f_expr,
                    "G_expr": g_expr,
                    "gamma_expr": gamma,
                    "q": out.q,
                    "r": p.level
                },
                "grid": {"N": 64, "M": 16},
                "family": {"kind": "free"},
                "seeds": {"master": 42}
            })
        }
        other => {
            return Err(cfg_err(
                ".scenario",
                format!(
                    "unknown scenario `{other}`; builtins: {}",
                    Config::builtin_names().join(", ")
                ),
            ))
        }
    };
    Ok(value)
}
