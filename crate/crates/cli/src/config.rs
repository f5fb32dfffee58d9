//! Run configuration: a sectioned key-value text format.
//!
//! Sections come in square brackets, entries as `key = value` lines, and
//! expressions as double-quoted strings in the shared mini-language. Lists
//! are space-separated numbers. `#` starts a full-line comment. The exact
//! grammar lives in docs/config.md.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nlcontact_core::fd::Grid;
use nlcontact_core::field::{function, parse as parse_expr, FieldRef};
use nlcontact_core::geometry::{
    ContactProblem, ContactSpec, ProblemData, Rect, SideData, SplitGeometry,
};
use nlcontact_core::verify::ExactSolution;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fourier,
    Iterate,
    Verify,
    CrossValidate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fourier => "fourier",
            Mode::Iterate => "iterate",
            Mode::Verify => "verify",
            Mode::CrossValidate => "cross-validate",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "fourier" => Ok(Mode::Fourier),
            "iterate" => Ok(Mode::Iterate),
            "verify" => Ok(Mode::Verify),
            "cross-validate" => Ok(Mode::CrossValidate),
            other => Err(format!(
                "unknown mode `{}` (expected fourier, iterate, verify, or cross-validate)",
                other
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub a: f64,
    pub b: f64,
    pub xi0: f64,
    pub xi_minus: Vec<f64>,
    pub xi_plus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactConfig {
    pub beta_minus: Vec<f64>,
    pub beta_plus: Vec<f64>,
    pub phi0: String,
}

/// Coefficient and data expressions for one subdomain. File keys are
/// K11, K12, K21, K22, k, f, boundary; each defaults to the plain Laplacian
/// with zero data.
#[derive(Debug, Clone, PartialEq)]
pub struct SideConfig {
    pub k11: String,
    pub k12: String,
    pub k21: String,
    pub k22: String,
    pub reaction: String,
    pub source: String,
    pub boundary: String,
}

impl Default for SideConfig {
    fn default() -> SideConfig {
        SideConfig {
            k11: "1".into(),
            k12: "0".into(),
            k21: "0".into(),
            k22: "1".into(),
            reaction: "0".into(),
            source: "0".into(),
            boundary: "0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    pub n1: usize,
    pub n2: usize,
    pub modes: usize,
    pub panels: u32,
    pub trace_tol: f64,
    pub max_iters: usize,
    pub interpolate_traces: bool,
}

impl Default for NumericsConfig {
    fn default() -> NumericsConfig {
        NumericsConfig {
            n1: 63,
            n2: 63,
            modes: 64,
            panels: 256,
            trace_tol: 1e-12,
            max_iters: 100,
            interpolate_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactConfig {
    pub u_minus: String,
    pub u_plus: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub out_dir: String,
    pub geometry: GeometryConfig,
    pub contact: ContactConfig,
    pub minus: SideConfig,
    pub plus: SideConfig,
    pub numerics: NumericsConfig,
    pub exact: Option<ExactConfig>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: &'static str, key: &'static str },
    #[error("line {line}: expression `{key}` does not parse: {message}")]
    Expr { line: usize, key: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn syntax(line: usize, message: String) -> ConfigError {
    ConfigError::Syntax { line, message }
}

const SECTIONS: [&str; 7] = ["run", "geometry", "contact", "minus", "plus", "numerics", "exact"];

/// One parsed section: key -> (raw value, line number).
struct Section {
    name: &'static str,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &'static str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &'static str) -> Result<(String, usize), ConfigError> {
        self.take(key).ok_or(ConfigError::MissingKey { section: self.name, key })
    }

    /// Rejects whatever was not consumed, naming the first offender.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => {
                Err(syntax(line, format!("unknown key `{}` in [{}]", key, self.name)))
            }
        }
    }
}

fn raw_parse(text: &str) -> Result<BTreeMap<&'static str, Section>, ConfigError> {
    let mut sections: BTreeMap<&'static str, Section> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line_no, "unterminated section header".into()))?
                .trim();
            let name = SECTIONS
                .iter()
                .copied()
                .find(|s| *s == name)
                .ok_or_else(|| syntax(line_no, format!("unknown section [{}]", name)))?;
            if sections.contains_key(name) {
                return Err(syntax(line_no, format!("duplicate section [{}]", name)));
            }
            sections.insert(name, Section { name, entries: BTreeMap::new() });
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, "expected `key = value` or `[section]`".into()))?;
        let section = current.ok_or_else(|| syntax(line_no, "entry before any [section]".into()))?;
        let entries = &mut sections.get_mut(section).unwrap().entries;
        if entries
            .insert(key.trim().to_string(), (value.trim().to_string(), line_no))
            .is_some()
        {
            return Err(syntax(line_no, format!("duplicate key `{}`", key.trim())));
        }
    }
    Ok(sections)
}

fn number(key: &str, entry: (String, usize)) -> Result<f64, ConfigError> {
    let (v, line) = entry;
    v.parse()
        .map_err(|_| syntax(line, format!("`{}` is not a number: `{}`", key, v)))
}

fn integer<T: FromStr>(key: &str, entry: (String, usize)) -> Result<T, ConfigError> {
    let (v, line) = entry;
    v.parse()
        .map_err(|_| syntax(line, format!("`{}` is not a nonnegative integer: `{}`", key, v)))
}

fn boolean(key: &str, entry: (String, usize)) -> Result<bool, ConfigError> {
    let (v, line) = entry;
    match v.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(syntax(line, format!("`{}` must be true or false, got `{}`", key, v))),
    }
}

fn number_list(key: &str, entry: (String, usize)) -> Result<Vec<f64>, ConfigError> {
    let (v, line) = entry;
    let items: Result<Vec<f64>, _> = v.split_whitespace().map(str::parse).collect();
    let items =
        items.map_err(|_| syntax(line, format!("`{}` is not a list of numbers: `{}`", key, v)))?;
    if items.is_empty() {
        return Err(syntax(line, format!("`{}` needs at least one number", key)));
    }
    Ok(items)
}

/// Strips the required quotes and checks that the expression parses.
fn expression(key: &'static str, entry: (String, usize)) -> Result<String, ConfigError> {
    let (v, line) = entry;
    let src = v
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| {
            syntax(line, format!("expression `{}` must be double-quoted: {}", key, v))
        })?
        .to_string();
    parse_expr(&src)
        .map_err(|e| ConfigError::Expr { line, key, message: e.to_string() })?;
    Ok(src)
}

fn side_config(mut section: Section) -> Result<SideConfig, ConfigError> {
    let mut side = SideConfig::default();
    for (key, slot) in [
        ("K11", &mut side.k11),
        ("K12", &mut side.k12),
        ("K21", &mut side.k21),
        ("K22", &mut side.k22),
        ("k", &mut side.reaction),
        ("f", &mut side.source),
        ("boundary", &mut side.boundary),
    ] {
        if let Some(entry) = section.take(key) {
            *slot = expression(key, entry)?;
        }
    }
    section.finish()?;
    Ok(side)
}

/// Structural parse: sections, keys, types, and expression syntax. Value
/// level checks (geometry admissibility, mode requirements, grid fit) are
/// in [`validate`] so that flag overrides can be folded in first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut sections = raw_parse(text)?;
    let mut take = |name: &'static str| sections.remove(name);

    let mut run = take("run").ok_or(ConfigError::MissingSection("run"))?;
    let (mode_s, mode_line) = run.require("mode")?;
    let mode = mode_s.parse::<Mode>().map_err(|m| syntax(mode_line, m))?;
    let out_dir = run.take("output").map(|(v, _)| v).unwrap_or_else(|| "out".into());
    run.finish()?;

    let mut g = take("geometry").ok_or(ConfigError::MissingSection("geometry"))?;
    let a = g.take("a").map(|e| number("a", e)).transpose()?.unwrap_or(1.0);
    let b = g.take("b").map(|e| number("b", e)).transpose()?.unwrap_or(1.0);
    let xi0 = number("xi0", g.require("xi0")?)?;
    let xi_minus = number_list("xi_minus", g.require("xi_minus")?)?;
    let xi_plus = number_list("xi_plus", g.require("xi_plus")?)?;
    g.finish()?;
    let geometry = GeometryConfig { a, b, xi0, xi_minus, xi_plus };

    let mut c = take("contact").ok_or(ConfigError::MissingSection("contact"))?;
    let beta_minus = number_list("beta_minus", c.require("beta_minus")?)?;
    let beta_plus = number_list("beta_plus", c.require("beta_plus")?)?;
    let phi0 = expression("phi0", c.require("phi0")?)?;
    c.finish()?;
    let contact = ContactConfig { beta_minus, beta_plus, phi0 };

    let minus = take("minus").map(side_config).transpose()?.unwrap_or_default();
    let plus = take("plus").map(side_config).transpose()?.unwrap_or_default();

    let mut numerics = NumericsConfig::default();
    if let Some(mut n) = take("numerics") {
        if let Some(e) = n.take("n1") {
            numerics.n1 = integer("n1", e)?;
        }
        if let Some(e) = n.take("n2") {
            numerics.n2 = integer("n2", e)?;
        }
        if let Some(e) = n.take("modes") {
            numerics.modes = integer("modes", e)?;
        }
        if let Some(e) = n.take("panels") {
            numerics.panels = integer("panels", e)?;
        }
        if let Some(e) = n.take("trace_tol") {
            numerics.trace_tol = number("trace_tol", e)?;
        }
        if let Some(e) = n.take("max_iters") {
            numerics.max_iters = integer("max_iters", e)?;
        }
        if let Some(e) = n.take("interpolate_traces") {
            numerics.interpolate_traces = boolean("interpolate_traces", e)?;
        }
        n.finish()?;
    }

    let exact = take("exact")
        .map(|mut e| -> Result<ExactConfig, ConfigError> {
            let u_minus = expression("u_minus", e.require("u_minus")?)?;
            let u_plus = expression("u_plus", e.require("u_plus")?)?;
            e.finish()?;
            Ok(ExactConfig { u_minus, u_plus })
        })
        .transpose()?;

    Ok(RunConfig { mode, out_dir, geometry, contact, minus, plus, numerics, exact })
}

pub(crate) fn parse_field(src: &str) -> Result<FieldRef, ConfigError> {
    parse_expr(src).map_err(|e| ConfigError::Invalid(format!("expression `{}`: {}", src, e)))
}

impl RunConfig {
    /// The full variable-coefficient problem this config describes.
    pub fn problem(&self) -> Result<ContactProblem, ConfigError> {
        let side = |s: &SideConfig| -> Result<SideData, ConfigError> {
            Ok(SideData {
                k11: parse_field(&s.k11)?,
                k12: parse_field(&s.k12)?,
                k21: parse_field(&s.k21)?,
                k22: parse_field(&s.k22)?,
                reaction: parse_field(&s.reaction)?,
                source: parse_field(&s.source)?,
                boundary: parse_field(&s.boundary)?,
            })
        };
        Ok(ContactProblem {
            geometry: SplitGeometry {
                rect: Rect { a: self.geometry.a, b: self.geometry.b },
                xi0: self.geometry.xi0,
                xi_minus: self.geometry.xi_minus.clone(),
                xi_plus: self.geometry.xi_plus.clone(),
            },
            contact: ContactSpec {
                beta_minus: self.contact.beta_minus.clone(),
                beta_plus: self.contact.beta_plus.clone(),
                phi0: parse_field(&self.contact.phi0)?,
            },
            data: ProblemData { minus: side(&self.minus)?, plus: side(&self.plus)? },
        })
    }

    /// The exact solution named in `[exact]`, with its contact value read
    /// off `u_minus` along the interface.
    pub fn exact_solution(&self) -> Result<Option<ExactSolution>, ConfigError> {
        let Some(e) = &self.exact else { return Ok(None) };
        let u_minus = parse_field(&e.u_minus)?;
        let u_plus = parse_field(&e.u_plus)?;
        let xi0 = self.geometry.xi0;
        let on_interface = u_minus.clone();
        let u_gamma0 = function(move |_, x2| on_interface.eval(xi0, x2).unwrap_or(f64::NAN));
        ExactSolution::new(u_minus, u_plus, u_gamma0, xi0, self.geometry.b)
            .map(Some)
            .map_err(|err| ConfigError::Invalid(err.to_string()))
    }
}

fn require_laplace(mode: Mode, name: &str, side: &SideConfig) -> Result<(), ConfigError> {
    let fixed = [
        ("K11", &side.k11, "1"),
        ("K12", &side.k12, "0"),
        ("K21", &side.k21, "0"),
        ("K22", &side.k22, "1"),
        ("k", &side.reaction, "0"),
        ("boundary", &side.boundary, "0"),
    ];
    for (key, got, want) in fixed {
        if got != want {
            return Err(ConfigError::Invalid(format!(
                "{} mode solves the plain Laplacian with zero boundary data; \
                 [{}] {} must be \"{}\" or omitted, got \"{}\"",
                mode, name, key, want, got
            )));
        }
    }
    Ok(())
}

/// Value-level validation of a structurally sound config: geometry and
/// contact admissibility, mode requirements, and grid fit. Run after any
/// flag overrides.
pub fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    let problem = config.problem()?;
    let violations = problem.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(ConfigError::Invalid(list.join("; ")));
    }
    match config.mode {
        Mode::Iterate => {}
        Mode::Verify => {
            if config.exact.is_none() {
                return Err(ConfigError::Invalid(
                    "verify mode needs an [exact] section with u_minus and u_plus".into(),
                ));
            }
        }
        Mode::Fourier | Mode::CrossValidate => {
            let g = &config.geometry;
            if g.a != 1.0 || g.b != 1.0 {
                return Err(ConfigError::Invalid(format!(
                    "{} mode works on the unit square; set a = 1 and b = 1",
                    config.mode
                )));
            }
            if g.xi_minus.len() != 1 || g.xi_plus.len() != 1 {
                return Err(ConfigError::Invalid(format!(
                    "{} mode uses exactly one contact line per side, got {} and {}",
                    config.mode,
                    g.xi_minus.len(),
                    g.xi_plus.len()
                )));
            }
            require_laplace(config.mode, "minus", &config.minus)?;
            require_laplace(config.mode, "plus", &config.plus)?;
        }
    }
    config.exact_solution()?;

    let n = &config.numerics;
    if n.n1 < 3 || n.n2 < 3 {
        return Err(ConfigError::Invalid(format!(
            "the grid needs at least 3 interior nodes per direction, got {} x {}",
            n.n1, n.n2
        )));
    }
    if !(n.trace_tol > 0.0) || !n.trace_tol.is_finite() {
        return Err(ConfigError::Invalid(format!("trace_tol = {} must be positive", n.trace_tol)));
    }
    if n.max_iters == 0 {
        return Err(ConfigError::Invalid("max_iters must be at least 1".into()));
    }
    if n.panels == 0 {
        return Err(ConfigError::Invalid("panels must be at least 1".into()));
    }
    if matches!(config.mode, Mode::Fourier | Mode::CrossValidate) && n.modes == 0 {
        return Err(ConfigError::Invalid("modes must be at least 1".into()));
    }
    let rect = Rect { a: config.geometry.a, b: config.geometry.b };
    let grid = Grid::with_interface(rect, n.n1, n.n2, config.geometry.xi0)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if !n.interpolate_traces && config.mode != Mode::Fourier {
        for &x in config.geometry.xi_minus.iter().chain(&config.geometry.xi_plus) {
            if grid.column_of(x).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "contact line x1 = {} misses every grid column at n1 = {}; \
                     change the grid or set interpolate_traces = true",
                    x, n.n1
                )));
            }
        }
    }
    Ok(())
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    let config = parse_config(&text)?;
    validate(&config)?;
    Ok(config)
}

fn list_text(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|v| format!("{:?}", v)).collect();
    items.join(" ")
}

/// Canonical text for a config: every key explicit, floats printed so they
/// reparse to the same bits. `parse_config(to_config_text(c))` equals `c`.
pub fn to_config_text(c: &RunConfig) -> String {
    let mut s = String::new();
    let side_text = |s: &mut String, name: &str, side: &SideConfig| {
        writeln!(s, "[{}]", name).unwrap();
        writeln!(s, "K11 = \"{}\"", side.k11).unwrap();
        writeln!(s, "K12 = \"{}\"", side.k12).unwrap();
        writeln!(s, "K21 = \"{}\"", side.k21).unwrap();
        writeln!(s, "K22 = \"{}\"", side.k22).unwrap();
        writeln!(s, "k = \"{}\"", side.reaction).unwrap();
        writeln!(s, "f = \"{}\"", side.source).unwrap();
        writeln!(s, "boundary = \"{}\"", side.boundary).unwrap();
        writeln!(s).unwrap();
    };
    writeln!(s, "[run]").unwrap();
    writeln!(s, "mode = {}", c.mode).unwrap();
    writeln!(s, "output = {}", c.out_dir).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[geometry]").unwrap();
    writeln!(s, "a = {:?}", c.geometry.a).unwrap();
    writeln!(s, "b = {:?}", c.geometry.b).unwrap();
    writeln!(s, "xi0 = {:?}", c.geometry.xi0).unwrap();
    writeln!(s, "xi_minus = {}", list_text(&c.geometry.xi_minus)).unwrap();
    writeln!(s, "xi_plus = {}", list_text(&c.geometry.xi_plus)).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[contact]").unwrap();
    writeln!(s, "beta_minus = {}", list_text(&c.contact.beta_minus)).unwrap();
    writeln!(s, "beta_plus = {}", list_text(&c.contact.beta_plus)).unwrap();
    writeln!(s, "phi0 = \"{}\"", c.contact.phi0).unwrap();
    writeln!(s).unwrap();
    side_text(&mut s, "minus", &c.minus);
    side_text(&mut s, "plus", &c.plus);
    writeln!(s, "[numerics]").unwrap();
    writeln!(s, "n1 = {}", c.numerics.n1).unwrap();
    writeln!(s, "n2 = {}", c.numerics.n2).unwrap();
    writeln!(s, "modes = {}", c.numerics.modes).unwrap();
    writeln!(s, "panels = {}", c.numerics.panels).unwrap();
    writeln!(s, "trace_tol = {:?}", c.numerics.trace_tol).unwrap();
    writeln!(s, "max_iters = {}", c.numerics.max_iters).unwrap();
    writeln!(s, "interpolate_traces = {}", c.numerics.interpolate_traces).unwrap();
    if let Some(e) = &c.exact {
        writeln!(s).unwrap();
        writeln!(s, "[exact]").unwrap();
        writeln!(s, "u_minus = \"{}\"", e.u_minus).unwrap();
        writeln!(s, "u_plus = \"{}\"", e.u_plus).unwrap();
    }
    s
}
