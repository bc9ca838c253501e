//! Scenario files: a sectioned `key = value` format.
//!
//! ```text
//! [manifold]
//! dim = 1
//! box = 1e-3, 60
//! metric = identity
//!
//! [operator]
//! field = x
//! potential = half_div
//! eta = x^(-1/2)
//!
//! [checks]
//! test_functions = x*exp(-x), exp(-x)
//! times = 0.25, 0.5, 1
//! ```
//!
//! Lists are comma separated, expressions are DSL strings, `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use gaugeops::flow::FlowIntegrator;
use gaugeops::manifold::divergence_expr;
use gaugeops::{parse, BoxDomain, Chart, Expr, Metric, QuadratureScheme, VectorField};
use num_complex::Complex64;

pub const EXAMPLE1: &str = include_str!("../scenarios/example1.ini");
pub const EXAMPLE2: &str = include_str!("../scenarios/example2.ini");

const SECTIONS: [&str; 3] = ["manifold", "operator", "checks"];

#[derive(Debug, Clone, PartialEq)]
pub struct LoadError {
    pub section: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.section, self.line) {
            (Some(s), Some(l)) => write!(f, "[{s}] line {l}: {}", self.message),
            (Some(s), None) => write!(f, "[{s}]: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for LoadError {}

/// `auto` follows the potential: on iff it was given as `half_div`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Toggle {
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// factorization, powers, alpha gauge, shift, eigenfunction transport
    pub identity: f64,
    pub residual: f64,
    pub isometry: f64,
    pub incompressible: f64,
    pub group: f64,
    pub generator: f64,
    pub unitarity: f64,
    pub intertwine: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-9,
            residual: 1e-12,
            isometry: 1e-9,
            incompressible: 1e-12,
            group: 1e-8,
            generator: 1e-5,
            unitarity: 1e-5,
            intertwine: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub chart: Chart,
    /// quadrature box
    pub quad_box: BoxDomain,
    /// pointwise checks sample this box
    pub sample_box: BoxDomain,
    /// trajectories leaving this box are reported as escaped
    pub flow_box: BoxDomain,
    pub metric: Metric,
    pub field: VectorField,
    pub potential: Expr,
    pub half_div: bool,
    pub eta: Option<Expr>,
    pub alpha: f64,
    pub anchor: Option<f64>,
    /// `τ` with `Lτ = 1`; eigenfunctions of `L` are `exp(λτ)`
    pub clock: Option<Expr>,
    pub test_functions: Vec<Expr>,
    pub eigenvalues: Vec<Complex64>,
    pub times: Vec<f64>,
    pub tolerances: Tolerances,
    pub sample_count: usize,
    pub quad_points: usize,
    pub quad_scheme: QuadratureScheme,
    pub integrator: FlowIntegrator,
    pub generator_step: f64,
    pub unitarity: bool,
    pub incompressibility: bool,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Replaces the potential; the check toggles keep their resolved values.
    pub fn with_potential(mut self, text: &str) -> Result<Self, LoadError> {
        if text.trim() == "half_div" {
            self.potential = half_div(&self.field, &self.metric);
            self.half_div = true;
        } else {
            self.potential = parse(text, &self.chart).map_err(|e| LoadError {
                section: None,
                line: None,
                message: format!("potential override: {e}"),
            })?;
            self.half_div = false;
        }
        Ok(self)
    }

    pub fn parse_expr(&self, text: &str) -> Result<Expr, LoadError> {
        parse(text, &self.chart).map_err(|e| LoadError { section: None, line: None, message: format!("`{text}`: {e}") })
    }
}

/// `½ div L`.
pub fn half_div(field: &VectorField, metric: &Metric) -> Expr {
    0.5 * divergence_expr(field, metric)
}

/// Resolves `example1` / `example2`, otherwise reads the file at `source`.
pub fn load_scenario(source: &str) -> Result<Scenario, LoadError> {
    match source {
        "example1" => parse_scenario(EXAMPLE1, "example1"),
        "example2" => parse_scenario(EXAMPLE2, "example2"),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| LoadError {
                section: None,
                line: None,
                message: format!("cannot read {path}: {e}"),
            })?;
            let name = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or(path);
            parse_scenario(&text, name)
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Sections {
    map: BTreeMap<(&'static str, String), Entry>,
}

impl Sections {
    fn read(text: &str) -> Result<Self, LoadError> {
        let mut map = BTreeMap::new();
        let mut section: Option<&'static str> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                section = Some(SECTIONS.iter().copied().find(|s| *s == name).ok_or_else(|| LoadError {
                    section: None,
                    line: Some(line),
                    message: format!("unknown section [{name}]"),
                })?);
                continue;
            }
            let err = |message: String| LoadError { section: section.map(str::to_string), line: Some(line), message };
            let Some(sec) = section else {
                return Err(err("key outside of a section".into()));
            };
            let (key, value) =
                content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim().to_string();
            if !known_key(sec, &key) {
                return Err(err(format!("unknown key `{key}`")));
            }
            if map.insert((sec, key.clone()), Entry { value: value.trim().to_string(), line }).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Sections { map })
    }

    fn get(&self, section: &'static str, key: &str) -> Option<(&str, usize)> {
        self.map.get(&(section, key.to_string())).map(|e| (e.value.as_str(), e.line))
    }
}

fn known_key(section: &str, key: &str) -> bool {
    let keys: &[&str] = match section {
        "manifold" => &["dim", "vars", "box", "metric", "sample_box", "flow_box"],
        "operator" => &["field", "potential", "eta", "alpha", "anchor", "clock"],
        _ => &[
            "test_functions",
            "eigenvalues",
            "times",
            "tolerance",
            "tol_residual",
            "tol_isometry",
            "tol_incompressible",
            "tol_group",
            "tol_generator",
            "tol_unitarity",
            "tol_intertwine",
            "samples",
            "quad_points",
            "quad_scheme",
            "integrator",
            "steps_per_unit",
            "generator_step",
            "unitarity",
            "incompressibility",
        ],
    };
    keys.contains(&key)
}

struct Reader<'a> {
    sections: &'a Sections,
}

impl<'a> Reader<'a> {
    fn err(&self, section: &str, line: Option<usize>, message: impl Into<String>) -> LoadError {
        LoadError { section: Some(section.to_string()), line, message: message.into() }
    }

    fn raw(&self, section: &'static str, key: &str) -> Option<(&'a str, usize)> {
        self.sections.get(section, key)
    }

    fn required(&self, section: &'static str, key: &str) -> Result<(&'a str, usize), LoadError> {
        self.raw(section, key).ok_or_else(|| self.err(section, None, format!("missing key `{key}`")))
    }

    fn map<T>(
        &self,
        section: &'static str,
        key: &str,
        f: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<Option<T>, LoadError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((value, line)) => f(value).map(Some).map_err(|m| self.err(section, Some(line), format!("{key}: {m}"))),
        }
    }

    fn number(&self, section: &'static str, key: &str) -> Result<Option<f64>, LoadError> {
        self.map(section, key, parse_number)
    }

    fn positive(&self, section: &'static str, key: &str, default: f64) -> Result<f64, LoadError> {
        let v = self.number(section, key)?.unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            let line = self.raw(section, key).map(|(_, l)| l);
            Err(self.err(section, line, format!("{key} must be positive, got {v}")))
        }
    }
}

fn list(value: &str) -> Vec<&str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_numbers(s: &str) -> Result<Vec<f64>, String> {
    list(s).into_iter().map(parse_number).collect()
}

fn parse_box(s: &str, dim: usize) -> Result<BoxDomain, String> {
    let v = parse_numbers(s)?;
    if v.len() != 2 * dim {
        return Err(format!("expected {} numbers (lo, hi per axis), got {}", 2 * dim, v.len()));
    }
    BoxDomain::new(v.chunks(2).map(|c| (c[0], c[1])).collect()).map_err(|e| e.to_string())
}

fn parse_toggle(s: &str) -> Result<Toggle, String> {
    match s {
        "auto" => Ok(Toggle::Auto),
        "true" | "on" | "yes" => Ok(Toggle::On),
        "false" | "off" | "no" => Ok(Toggle::Off),
        _ => Err(format!("expected auto, true or false, got `{s}`")),
    }
}

/// `a`, `bi`, `a+bi`, `a-bi`, with `i` alone meaning `1i`.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("`{text}` is not a complex number");
    let Some(body) = s.strip_suffix('i') else {
        return parse_number(&s).map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not leading and not part of an exponent
    let bytes = body.as_bytes();
    let split =
        (1..bytes.len()).rev().find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re.is_empty() { 0.0 } else { parse_number(re).map_err(|_| bad())? };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => parse_number(other).map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario, LoadError> {
    let sections = Sections::read(text)?;
    let r = Reader { sections: &sections };

    let vars = r.map("manifold", "vars", |v| Ok(list(v).into_iter().map(str::to_string).collect::<Vec<_>>()))?;
    let dim = match (
        r.map("manifold", "dim", |v| v.parse::<usize>().map_err(|_| format!("`{v}` is not a positive integer")))?,
        &vars,
    ) {
        (Some(d), Some(v)) if d != v.len() => {
            let line = r.raw("manifold", "vars").map(|(_, l)| l);
            return Err(r.err("manifold", line, format!("dim = {d} but {} variable names", v.len())));
        }
        (Some(d), _) => d,
        (None, Some(v)) => v.len(),
        (None, None) => return Err(r.err("manifold", None, "missing key `dim`")),
    };
    if dim == 0 {
        return Err(r.err("manifold", r.raw("manifold", "dim").map(|(_, l)| l), "dim must be positive"));
    }
    let chart = match vars {
        Some(v) => Chart::new(v),
        None => Chart::with_dim(dim),
    }
    .map_err(|e| r.err("manifold", r.raw("manifold", "vars").map(|(_, l)| l), e.to_string()))?;

    let expr =
        |section: &'static str, key: &str| r.map(section, key, |v| parse(v, &chart).map_err(|e| format!("`{v}`: {e}")));
    let exprs = |section: &'static str, key: &str| {
        r.map(section, key, |v| {
            list(v)
                .into_iter()
                .map(|s| parse(s, &chart).map_err(|e| format!("`{s}`: {e}")))
                .collect::<Result<Vec<_>, _>>()
        })
    };

    let (box_text, box_line) = r.required("manifold", "box")?;
    let quad_box = parse_box(box_text, dim).map_err(|m| r.err("manifold", Some(box_line), format!("box: {m}")))?;
    let sample_box = r.map("manifold", "sample_box", |v| parse_box(v, dim))?.unwrap_or_else(|| quad_box.clone());
    let flow_box = r.map("manifold", "flow_box", |v| parse_box(v, dim))?.unwrap_or_else(|| quad_box.inflated(2.0));
    let metric_given = r.raw("manifold", "metric").is_some();
    let metric = match r.raw("manifold", "metric") {
        None => Metric::Identity,
        Some(("identity", _)) => Metric::Identity,
        Some((_, line)) => {
            let g = exprs("manifold", "metric")?.unwrap_or_default();
            if g.len() != dim {
                return Err(r.err(
                    "manifold",
                    Some(line),
                    format!("metric: expected {dim} diagonal components, got {}", g.len()),
                ));
            }
            Metric::Diagonal(g)
        }
    };

    let (_, field_line) = r.required("operator", "field")?;
    let xi = exprs("operator", "field")?.unwrap_or_default();
    if xi.len() != dim {
        return Err(r.err("operator", Some(field_line), format!("field: expected {dim} components, got {}", xi.len())));
    }
    let field = VectorField::new(xi);
    let (potential_text, potential_line) = r.required("operator", "potential")?;
    let half = potential_text == "half_div";
    let potential = if half {
        if !metric_given {
            return Err(r.err(
                "operator",
                Some(potential_line),
                "potential = half_div requires a metric in [manifold]",
            ));
        }
        half_div(&field, &metric)
    } else {
        expr("operator", "potential")?.expect("key present")
    };
    let eta = expr("operator", "eta")?;
    if eta.is_none() && dim > 1 {
        return Err(r.err("operator", None, "eta is required when dim > 1 (the gauge solver is one-dimensional)"));
    }
    let alpha = r.number("operator", "alpha")?.unwrap_or(1.0);
    let anchor = r.number("operator", "anchor")?;
    let clock = expr("operator", "clock")?;

    let test_functions = exprs("checks", "test_functions")?.unwrap_or_else(|| vec![Expr::one()]);
    if test_functions.is_empty() {
        return Err(r.err("checks", None, "test_functions is empty"));
    }
    let eigenvalues = r
        .map("checks", "eigenvalues", |v| list(v).into_iter().map(parse_complex).collect::<Result<Vec<_>, _>>())?
        .unwrap_or_default();
    let times = r.map("checks", "times", parse_numbers)?.unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    if times.is_empty() {
        return Err(r.err("checks", r.raw("checks", "times").map(|(_, l)| l), "times is empty"));
    }
    let defaults = Tolerances::default();
    let tolerances = Tolerances {
        identity: r.positive("checks", "tolerance", defaults.identity)?,
        residual: r.positive("checks", "tol_residual", defaults.residual)?,
        isometry: r.positive("checks", "tol_isometry", defaults.isometry)?,
        incompressible: r.positive("checks", "tol_incompressible", defaults.incompressible)?,
        group: r.positive("checks", "tol_group", defaults.group)?,
        generator: r.positive("checks", "tol_generator", defaults.generator)?,
        unitarity: r.positive("checks", "tol_unitarity", defaults.unitarity)?,
        intertwine: r.positive("checks", "tol_intertwine", defaults.intertwine)?,
    };
    let count = |key: &str, default: usize| -> Result<usize, LoadError> {
        Ok(r.map("checks", key, |v| v.parse::<usize>().map_err(|_| format!("`{v}` is not a non-negative integer")))?
            .unwrap_or(default))
    };
    let sample_count = count("samples", 200)?.max(1);
    let quad_points = count("quad_points", 200)?;
    let quad_scheme = r
        .map("checks", "quad_scheme", |v| match v {
            "gauss_legendre" | "gauss-legendre" => Ok(QuadratureScheme::GaussLegendre),
            "simpson" => Ok(QuadratureScheme::Simpson),
            _ => Err(format!("expected gauss_legendre or simpson, got `{v}`")),
        })?
        .unwrap_or(QuadratureScheme::GaussLegendre);
    let steps = count("steps_per_unit", 1000)?;
    let integrator = r
        .map("checks", "integrator", |v| match v {
            "rk4" => Ok(FlowIntegrator::Rk4 { steps_per_unit_time: steps as u32 }),
            "rk45" => Ok(FlowIntegrator::rk45()),
            _ => Err(format!("expected rk4 or rk45, got `{v}`")),
        })?
        .unwrap_or(FlowIntegrator::Rk4 { steps_per_unit_time: steps as u32 });
    let generator_step = r.positive("checks", "generator_step", 1e-4)?;
    let resolve = |t: Option<Toggle>| match t.unwrap_or(Toggle::Auto) {
        Toggle::Auto => half,
        Toggle::On => true,
        Toggle::Off => false,
    };
    let unitarity = resolve(r.map("checks", "unitarity", parse_toggle)?);
    let incompressibility = resolve(r.map("checks", "incompressibility", parse_toggle)?);

    Ok(Scenario {
        name: name.to_string(),
        chart,
        quad_box,
        sample_box,
        flow_box,
        metric,
        field,
        potential,
        half_div: half,
        eta,
        alpha,
        anchor,
        clock,
        test_functions,
        eigenvalues,
        times,
        tolerances,
        sample_count,
        quad_points,
        quad_scheme,
        integrator,
        generator_step,
        unitarity,
        incompressibility,
    })
}
