//! Line-oriented run configuration: `[section]` headers, `key = value`
//! lines, `#` comments. Parsing validates everything up front and reports
//! the offending line; [`Config::to_text`] writes a canonical form that
//! parses back to an equal value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use boussinesq_core::boussinesq::{Coupling, InitialTemperature, Lifting, SimParams};
use boussinesq_core::domain::Polygon;
use boussinesq_core::estimates::{SweepKind, KINETIC_RESIDUAL_CONSTANT, THERMAL_RESIDUAL_CONSTANT};
use boussinesq_core::expr::Expr;
use boussinesq_core::Point;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    UnitSquare,
    RightTriangle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Preset(Preset),
    Vertices(Vec<Point>),
}

impl DomainSpec {
    pub fn polygon(&self) -> Result<Polygon, boussinesq_core::domain::DomainError> {
        match self {
            DomainSpec::Preset(Preset::UnitSquare) => Ok(Polygon::unit_square()),
            DomainSpec::Preset(Preset::RightTriangle) => Ok(Polygon::right_triangle()),
            DomainSpec::Vertices(v) => Polygon::new(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub target_h: f64,
    /// Number of halvings applied to `target_h`.
    pub refinements: u32,
}

impl MeshConfig {
    pub fn effective_h(&self) -> f64 {
        self.target_h / 2f64.powi(self.refinements as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub kappa: f64,
    pub t_end: f64,
    /// Defaults to the effective mesh size.
    pub dt_max: Option<f64>,
    pub cfl: f64,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub omega0: Expr,
    pub theta0: InitialTemperature,
    pub lifting: Lifting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub vtk: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Transport,
    Energy,
    Thermal,
    Gronwall,
    Regularity,
    Elliptic,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Transport,
        Check::Energy,
        Check::Thermal,
        Check::Gronwall,
        Check::Regularity,
        Check::Elliptic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Transport => "transport",
            Check::Energy => "energy",
            Check::Thermal => "thermal",
            Check::Gronwall => "gronwall",
            Check::Regularity => "regularity",
            Check::Elliptic => "elliptic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub checks: Vec<Check>,
    /// Exponents for the transport bound; each of 2, 4, 8, inf.
    pub p_list: Vec<f64>,
    pub gronwall_c: f64,
    pub kinetic_constant: f64,
    pub thermal_constant: f64,
    /// Number of random fields for the elliptic invariant check.
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: Check::ALL.to_vec(),
            p_list: vec![2.0, 4.0, 8.0, f64::INFINITY],
            gronwall_c: 1.0,
            kinetic_constant: KINETIC_RESIDUAL_CONSTANT,
            thermal_constant: THERMAL_RESIDUAL_CONSTANT,
            samples: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    /// Descending ν values or perturbation sizes δ.
    pub values: Vec<f64>,
    /// Perturbation profile ρ for stability sweeps.
    pub profile: Expr,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub domain: DomainSpec,
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
    pub verify: Option<VerifyConfig>,
    pub sweep: Option<SweepConfig>,
}

impl Config {
    /// Simulation parameters with `dt_max` resolved against the mesh size.
    pub fn sim_params(&self) -> SimParams {
        SimParams {
            nu: self.physics.nu,
            kappa: self.physics.kappa,
            dt_max: self.physics.dt_max.unwrap_or_else(|| self.mesh.effective_h()),
            cfl: self.physics.cfl,
            t_end: self.physics.t_end,
            lifting: self.data.lifting.clone(),
            omega0: self.data.omega0.clone(),
            theta0: self.data.theta0.clone(),
            coupling: self.physics.coupling,
            output_times: self.output.snapshot_times.clone(),
            keep_every_step: false,
        }
    }

    /// Canonical text form; every value explicit except an unset `dt_max`.
    pub fn to_text(&self) -> String {
        let mut w = TextWriter::default();
        w.section("domain");
        match &self.domain {
            DomainSpec::Preset(Preset::UnitSquare) => w.line("preset", "unit_square"),
            DomainSpec::Preset(Preset::RightTriangle) => w.line("preset", "right_triangle"),
            DomainSpec::Vertices(v) => w.line(
                "vertices",
                v.iter().map(|p| format!("{:?}, {:?}", p[0], p[1])).collect::<Vec<_>>().join("; "),
            ),
        }
        w.section("mesh");
        w.line("target_h", format!("{:?}", self.mesh.target_h));
        w.line("refinements", self.mesh.refinements);
        w.section("physics");
        w.line("nu", format!("{:?}", self.physics.nu));
        w.line("kappa", format!("{:?}", self.physics.kappa));
        w.line("t_end", format!("{:?}", self.physics.t_end));
        if let Some(dt) = self.physics.dt_max {
            w.line("dt_max", format!("{dt:?}"));
        }
        w.line("cfl", format!("{:?}", self.physics.cfl));
        w.line(
            "coupling",
            match self.physics.coupling {
                Coupling::Full => "full",
                Coupling::TransportOnly => "transport_only",
            },
        );
        w.section("data");
        w.line("omega0", self.data.omega0.source());
        match &self.data.theta0 {
            InitialTemperature::Perturbative(e) => w.line("theta0", e.source()),
            InitialTemperature::Total(e) => w.line("T0", e.source()),
        }
        match &self.data.lifting {
            Lifting::Harmonic(e) => w.line("eta", e.source()),
            Lifting::Analytic(e) => w.line("S", e.source()),
        }
        w.section("output");
        w.line("directory", self.output.directory.display());
        w.line("snapshot_times", float_list(&self.output.snapshot_times));
        w.line("vtk", self.output.vtk);
        if let Some(v) = &self.verify {
            w.section("verify");
            w.line("checks", v.checks.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "));
            w.line("p", float_list(&v.p_list));
            w.line("gronwall_c", format!("{:?}", v.gronwall_c));
            w.line("kinetic_constant", format!("{:?}", v.kinetic_constant));
            w.line("thermal_constant", format!("{:?}", v.thermal_constant));
            w.line("samples", v.samples);
            w.line("seed", v.seed);
        }
        if let Some(s) = &self.sweep {
            w.section("sweep");
            w.line("kind", s.kind.name());
            w.line("values", float_list(&s.values));
            w.line("profile", s.profile.source());
            if let Some(j) = s.jobs {
                w.line("jobs", j);
            }
        }
        w.text
    }
}

#[derive(Default)]
struct TextWriter {
    text: String,
}

impl TextWriter {
    fn section(&mut self, name: &str) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        self.text.push_str(&format!("[{name}]\n"));
    }

    fn line(&mut self, key: &str, value: impl fmt::Display) {
        self.text.push_str(&format!("{key} = {value}\n"));
    }
}

fn float_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| if v.is_infinite() { "inf".to_string() } else { format!("{v:?}") })
        .collect::<Vec<_>>()
        .join(", ")
}

struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, (usize, BTreeMap<String, Entry>)>;

const SECTIONS: [(&str, &[&str]); 7] = [
    ("domain", &["preset", "vertices"]),
    ("mesh", &["target_h", "refinements"]),
    ("physics", &["nu", "kappa", "t_end", "dt_max", "cfl", "coupling"]),
    ("data", &["omega0", "theta0", "T0", "eta", "S"]),
    ("output", &["directory", "snapshot_times", "vtk"]),
    (
        "verify",
        &["checks", "p", "gronwall_c", "kinetic_constant", "thermal_constant", "samples", "seed"],
    ),
    ("sweep", &["kind", "values", "profile", "jobs"]),
];

fn split_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return err(n, format!("malformed section header `{line}`"));
            };
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return err(n, format!("unknown section [{name}]"));
            }
            if sections.contains_key(name) {
                return err(n, format!("duplicate section [{name}]"));
            }
            sections.insert(name.to_string(), (n, BTreeMap::new()));
            current = Some(name.to_string());
            continue;
        }
        let Some(section) = &current else {
            return err(n, "key outside of any section");
        };
        let Some((key, value)) = line.split_once('=') else {
            return err(n, format!("expected `key = value`, got `{line}`"));
        };
        let (key, value) = (key.trim(), value.trim());
        let allowed = SECTIONS.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return err(n, format!("unknown key `{key}` in [{section}]"));
        }
        let entries = &mut sections.get_mut(section).expect("section exists").1;
        if entries.contains_key(key) {
            return err(n, format!("duplicate key `{key}` in [{section}]"));
        }
        entries.insert(
            key.to_string(),
            Entry {
                line: n,
                value: value.to_string(),
            },
        );
    }
    Ok(sections)
}

/// Typed access to one section's entries (empty if the section is absent).
struct Section {
    name: &'static str,
    header_line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn is_present(&self) -> bool {
        self.header_line > 0
    }

    fn raw(&self, key: &str) -> Option<(usize, String)> {
        self.entries.get(key).map(|e| (e.line, e.value.clone()))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key).map(|(n, v)| parse_finite(n, key, &v)).transpose()
    }

    fn required_number(&self, key: &str) -> Result<f64, ConfigError> {
        match self.number(key)? {
            Some(v) => Ok(v),
            None => err(self.header_line, format!("missing required key `{key}` in [{}]", self.name)),
        }
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|(n, v)| v.parse::<T>().or_else(|_| err(n, format!("`{key}` must be a nonnegative integer, got `{v}`"))))
            .transpose()
    }

    fn expr(&self, key: &str) -> Result<Option<Expr>, ConfigError> {
        self.raw(key)
            .map(|(n, v)| Expr::parse(&v).or_else(|e| err(n, format!("`{key}`: {e}"))))
            .transpose()
    }

    fn list(&self, key: &str, allow_inf: bool) -> Result<Option<(usize, Vec<f64>)>, ConfigError> {
        let Some((n, v)) = self.raw(key) else {
            return Ok(None);
        };
        if v.is_empty() {
            return Ok(Some((n, Vec::new())));
        }
        let values = v
            .split(',')
            .map(|item| {
                let item = item.trim();
                if allow_inf && item == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    parse_finite(n, key, item)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some((n, values)))
    }
}

fn parse_finite(line: usize, key: &str, text: &str) -> Result<f64, ConfigError> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => err(line, format!("`{key}` must be finite, got `{text}`")),
        Err(_) => err(line, format!("`{key}` expects a number, got `{text}`")),
    }
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut sections = split_sections(text)?;
    let mut open = |name: &'static str| {
        let (header_line, entries) = sections.remove(name).unwrap_or_default();
        Section {
            name,
            header_line,
            entries,
        }
    };

    let domain = open("domain");
    let domain_spec = match (domain.raw("preset"), domain.raw("vertices")) {
        (Some((n, _)), Some(_)) => return err(n, "give either `preset` or `vertices`, not both"),
        (Some((n, p)), None) => DomainSpec::Preset(match p.as_str() {
            "unit_square" => Preset::UnitSquare,
            "right_triangle" => Preset::RightTriangle,
            other => return err(n, format!("unknown preset `{other}` (unit_square, right_triangle)")),
        }),
        (None, Some((n, v))) => DomainSpec::Vertices(parse_vertices(n, &v)?),
        (None, None) => DomainSpec::Preset(Preset::UnitSquare),
    };
    if let Err(e) = domain_spec.polygon() {
        return err(domain.header_line, format!("invalid domain: {e}"));
    }

    let mesh = open("mesh");
    let target_h = mesh.number("target_h")?.unwrap_or(1.0 / 32.0);
    if target_h <= 0.0 {
        return err(mesh.raw("target_h").map_or(0, |r| r.0), "`target_h` must be positive");
    }
    let refinements = mesh.integer::<u32>("refinements")?.unwrap_or(0);
    if refinements > 8 {
        return err(mesh.raw("refinements").map_or(0, |r| r.0), "`refinements` must be at most 8");
    }

    let physics = open("physics");
    let nu = physics.required_number("nu")?;
    if !(0.0..=1.0).contains(&nu) {
        return err(physics.raw("nu").map_or(0, |r| r.0), format!("`nu` must satisfy 0 <= nu <= 1, got {nu}"));
    }
    let kappa = physics.number("kappa")?.unwrap_or(1.0);
    if kappa != 1.0 {
        return err(physics.raw("kappa").map_or(0, |r| r.0), "`kappa` is fixed to 1");
    }
    let t_end = physics.required_number("t_end")?;
    if t_end < 0.0 {
        return err(physics.raw("t_end").map_or(0, |r| r.0), "`t_end` must be nonnegative");
    }
    let dt_max = physics.number("dt_max")?;
    if dt_max.is_some_and(|d| d <= 0.0) {
        return err(physics.raw("dt_max").map_or(0, |r| r.0), "`dt_max` must be positive");
    }
    let cfl = physics.number("cfl")?.unwrap_or(0.5);
    if cfl <= 0.0 {
        return err(physics.raw("cfl").map_or(0, |r| r.0), "`cfl` must be positive");
    }
    let coupling = match physics.raw("coupling") {
        None => Coupling::Full,
        Some((_, v)) if v == "full" => Coupling::Full,
        Some((_, v)) if v == "transport_only" => Coupling::TransportOnly,
        Some((n, v)) => return err(n, format!("unknown coupling `{v}` (full, transport_only)")),
    };

    let data = open("data");
    let omega0 = data.expr("omega0")?.unwrap_or_else(Expr::zero);
    let theta0 = match (data.expr("theta0")?, data.expr("T0")?) {
        (Some(_), Some(_)) => {
            return err(data.raw("T0").map_or(0, |r| r.0), "give either `theta0` or `T0`, not both")
        }
        (Some(e), None) => InitialTemperature::Perturbative(e),
        (None, Some(e)) => InitialTemperature::Total(e),
        (None, None) => InitialTemperature::Perturbative(Expr::zero()),
    };
    let lifting = match (data.expr("eta")?, data.expr("S")?) {
        (Some(_), Some(_)) => return err(data.raw("S").map_or(0, |r| r.0), "give either `eta` or `S`, not both"),
        (Some(e), None) => Lifting::Harmonic(e),
        (None, Some(e)) => Lifting::Analytic(e),
        (None, None) => Lifting::Harmonic(Expr::zero()),
    };

    let output = open("output");
    let directory = output.raw("directory").map_or_else(|| PathBuf::from("out"), |(_, v)| PathBuf::from(v));
    let snapshot_times = match output.list("snapshot_times", false)? {
        Some((n, times)) => {
            if times.iter().any(|&t| t < 0.0 || t > t_end) {
                return err(n, "snapshot times must lie in [0, t_end]");
            }
            times
        }
        None => Vec::new(),
    };
    let vtk = match output.raw("vtk") {
        None => false,
        Some((n, v)) => parse_bool(n, "vtk", &v)?,
    };

    let v = open("verify");
    let verify = if v.is_present() {
        let defaults = VerifyConfig::default();
        let checks = match v.raw("checks") {
            None => defaults.checks,
            Some((n, text)) => {
                let mut checks = Vec::new();
                for name in text.split(',').map(str::trim) {
                    match Check::parse(name) {
                        Some(c) if !checks.contains(&c) => checks.push(c),
                        Some(_) => return err(n, format!("check `{name}` listed twice")),
                        None => {
                            let known = Check::ALL.map(Check::name).join(", ");
                            return err(n, format!("unknown check `{name}` ({known})"));
                        }
                    }
                }
                checks
            }
        };
        let p_list = match v.list("p", true)? {
            None => defaults.p_list,
            Some((n, ps)) => {
                if ps.is_empty() || ps.iter().any(|p| ![2.0, 4.0, 8.0, f64::INFINITY].contains(p)) {
                    return err(n, "`p` entries must be among 2, 4, 8, inf");
                }
                ps
            }
        };
        let gronwall_c = v.number("gronwall_c")?.unwrap_or(defaults.gronwall_c);
        let kinetic_constant = v.number("kinetic_constant")?.unwrap_or(defaults.kinetic_constant);
        let thermal_constant = v.number("thermal_constant")?.unwrap_or(defaults.thermal_constant);
        for (key, val) in [
            ("gronwall_c", gronwall_c),
            ("kinetic_constant", kinetic_constant),
            ("thermal_constant", thermal_constant),
        ] {
            if val <= 0.0 {
                return err(v.raw(key).map_or(0, |r| r.0), format!("`{key}` must be positive"));
            }
        }
        Some(VerifyConfig {
            checks,
            p_list,
            gronwall_c,
            kinetic_constant,
            thermal_constant,
            samples: v.integer("samples")?.unwrap_or(defaults.samples),
            seed: v.integer("seed")?.unwrap_or(defaults.seed),
        })
    } else {
        None
    };

    let w = open("sweep");
    let sweep = if w.is_present() {
        let kind = match w.raw("kind") {
            Some((_, k)) if k == "viscosity" => SweepKind::Viscosity,
            Some((_, k)) if k == "stability" => SweepKind::Stability,
            Some((n, k)) => return err(n, format!("unknown sweep kind `{k}` (viscosity, stability)")),
            None => return err(w.header_line, "missing required key `kind` in [sweep]"),
        };
        let Some((n, values)) = w.list("values", false)? else {
            return err(w.header_line, "missing required key `values` in [sweep]");
        };
        if values.is_empty() || values.iter().any(|&v| v <= 0.0) || values.windows(2).any(|p| p[1] >= p[0]) {
            return err(n, "sweep values must be positive and strictly descending");
        }
        if kind == SweepKind::Viscosity && values.iter().any(|&v| v > 1.0) {
            return err(n, "viscosity values must satisfy 0 < nu <= 1");
        }
        let profile = w
            .expr("profile")?
            .unwrap_or_else(boussinesq_core::estimates::default_perturbation);
        let jobs = w.integer::<usize>("jobs")?;
        if jobs == Some(0) {
            return err(w.raw("jobs").map_or(0, |r| r.0), "`jobs` must be at least 1");
        }
        Some(SweepConfig {
            kind,
            values,
            profile,
            jobs,
        })
    } else {
        None
    };

    Ok(Config {
        domain: domain_spec,
        mesh: MeshConfig {
            target_h,
            refinements,
        },
        physics: PhysicsConfig {
            nu,
            kappa,
            t_end,
            dt_max,
            cfl,
            coupling,
        },
        data: DataConfig {
            omega0,
            theta0,
            lifting,
        },
        output: OutputConfig {
            directory,
            snapshot_times,
            vtk,
        },
        verify,
        sweep,
    })
}

fn parse_bool(line: usize, key: &str, text: &str) -> Result<bool, ConfigError> {
    match text {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => err(line, format!("`{key}` expects true/false, got `{text}`")),
    }
}

fn parse_vertices(line: usize, text: &str) -> Result<Vec<Point>, ConfigError> {
    text.split(';')
        .map(|pair| {
            let coords: Vec<&str> = pair.split(',').map(str::trim).collect();
            if coords.len() != 2 {
                return err(line, format!("vertex `{}` must be `x, y`", pair.trim()));
            }
            Ok([parse_finite(line, "vertices", coords[0])?, parse_finite(line, "vertices", coords[1])?])
        })
        .collect()
}
