//! Line-oriented `key = value` run configuration with `[section]` headers.
//!
//! Top-level keys configure the solver; `[initial]`, `[density]`, `[probe]`,
//! `[converge]` and `[verify]` configure the named profiles and the
//! sweep modes. `#` starts a comment. Every key must be known.

use crate::snapshot::read_table;
use fracpme::evolution::{SolverConfig, Tolerances, DEFAULT_EPSILON, DEFAULT_GRADE, DEFAULT_SPACING};
use fracpme::linalg::LinearBackend;
use fracpme::profiles::Samples;
use fracpme::{DensityProfile, InitialProfile};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evolve,
    AuxSolve,
    ProbeBarrier,
    Verify,
    Converge,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Evolve,
        Mode::AuxSolve,
        Mode::ProbeBarrier,
        Mode::Verify,
        Mode::Converge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Evolve => "evolve",
            Mode::AuxSolve => "aux-solve",
            Mode::ProbeBarrier => "probe-barrier",
            Mode::Verify => "verify",
            Mode::Converge => "converge",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub r0: f64,
    pub radii: Vec<f64>,
    pub ntheta: usize,
    /// Nodes of the sampled flux datum on `[-R0, R0]`.
    pub flux_nodes: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            r0: 1.0,
            radii: vec![4.0, 8.0, 16.0],
            ntheta: fracpme::uniqueness_probe::PROBE_NTHETA,
            flux_nodes: 2001,
        }
    }
}

/// Joint `(spacing, ε)` halving on the linear benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeSettings {
    pub radius: f64,
    pub t_final: f64,
    pub spacing: f64,
    pub epsilon: f64,
    pub levels: usize,
    /// Errors are measured on `|x| <= half_width`.
    pub half_width: f64,
}

impl Default for ConvergeSettings {
    fn default() -> Self {
        Self {
            radius: 50.0,
            t_final: 1.0,
            spacing: 0.1,
            epsilon: 0.05,
            levels: 3,
            half_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    /// Randomized pairs per property.
    pub trials: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self { trials: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Present when `R` is given (required by evolve and aux-solve).
    pub solver: Option<SolverConfig>,
    pub initial: InitialProfile,
    pub density: DensityProfile,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub probe: ProbeSettings,
    pub converge: ConvergeSettings,
    pub verify: VerifySettings,
}

impl RunConfig {
    /// Effective settings, one `key = value` line each, for report echoes.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v = vec![("mode".to_string(), self.mode.to_string())];
        if let Some(s) = &self.solver {
            v.push(("solver".into(), s.to_string()));
        }
        v.push(("initial".into(), self.initial.to_string()));
        v.push(("density".into(), self.density.to_string()));
        v.push(("seed".into(), self.seed.to_string()));
        match self.mode {
            Mode::ProbeBarrier => v.push(("probe".into(), format!("{:?}", self.probe))),
            Mode::Converge => v.push(("converge".into(), format!("{:?}", self.converge))),
            Mode::Verify => v.push(("verify".into(), format!("{:?}", self.verify))),
            _ => {}
        }
        v
    }
}

const TOP_KEYS: &[&str] = &[
    "mode",
    "R",
    "Y",
    "nx",
    "ny",
    "dx",
    "h0",
    "grade",
    "epsilon",
    "m",
    "T",
    "backend",
    "newton_tol",
    "max_newton",
    "linear_tol",
    "property_abs",
    "property_rel",
    "keep_fields",
    "seed",
    "output",
    "rho",
    "alpha",
    "u0",
];
const INITIAL_KEYS: &[&str] = &["profile", "amplitude", "width", "center", "scale", "value", "separation", "path"];
const DENSITY_KEYS: &[&str] = &["profile", "scale", "alpha", "path"];
const PROBE_KEYS: &[&str] = &["R0", "radii", "ntheta", "flux_nodes"];
const CONVERGE_KEYS: &[&str] = &["R", "T", "spacing", "epsilon", "levels", "half_width"];
const VERIFY_KEYS: &[&str] = &["trials"];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "" => Some(TOP_KEYS),
        "initial" => Some(INITIAL_KEYS),
        "density" => Some(DENSITY_KEYS),
        "probe" => Some(PROBE_KEYS),
        "converge" => Some(CONVERGE_KEYS),
        "verify" => Some(VERIFY_KEYS),
        _ => None,
    }
}

/// Parsed entries; `take` consumes them so that conflicting aliases can be
/// detected.
struct Entries {
    map: BTreeMap<(String, String), (String, usize)>,
    end_line: usize,
}

impl Entries {
    fn raw(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| err(line, format!("key '{key}': cannot parse '{v}' as {}", type_name::<T>()))),
        }
    }

    fn positive(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let line = self.line_of(section, key);
        match self.get::<f64>(section, key)? {
            Some(v) if !(v > 0.0) || !v.is_finite() => Err(err(line, format!("key '{key}' must be positive, got {v}"))),
            other => Ok(other),
        }
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.map
            .get(&(section.to_string(), key.to_string()))
            .map(|e| e.1)
            .unwrap_or(self.end_line)
    }
}

fn type_name<T>() -> &'static str {
    let full = std::any::type_name::<T>();
    match full {
        "f64" => "a number",
        "usize" | "u64" => "a nonnegative integer",
        "bool" => "true or false",
        _ => full,
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    let mut end_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        end_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("malformed section header '{content}'")))?
                .trim();
            if section_keys(name).is_none() || name.is_empty() {
                return Err(err(line, format!("unknown section '{name}'")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key = value, got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let allowed = section_keys(&section).expect("section validated");
        if !allowed.contains(&key) {
            let place = if section.is_empty() {
                String::new()
            } else {
                format!(" in [{section}]")
            };
            return Err(err(line, format!("unknown key '{key}'{place}")));
        }
        if value.is_empty() {
            return Err(err(line, format!("key '{key}' has no value")));
        }
        if map
            .insert((section.clone(), key.to_string()), (value.to_string(), line))
            .is_some()
        {
            return Err(err(line, format!("duplicate key '{key}'")));
        }
    }
    Ok(Entries { map, end_line })
}

/// Parses a config that names its own mode.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, None, None)
}

/// Parses a config; `mode` (from the command line) fills in or must agree
/// with the `mode` key, and relative profile paths resolve against `base`.
pub fn parse_config_with(text: &str, mode: Option<Mode>, base: Option<&Path>) -> Result<RunConfig, ConfigError> {
    let mut e = tokenize(text)?;

    let mode_line = e.line_of("", "mode");
    let mode = match (e.raw("", "mode"), mode) {
        (Some((v, line)), cli) => {
            let parsed: Mode = v.parse().map_err(|m: String| err(line, m))?;
            if let Some(c) = cli {
                if c != parsed {
                    return Err(err(line, format!("config mode '{parsed}' conflicts with requested mode '{c}'")));
                }
            }
            parsed
        }
        (None, Some(c)) => c,
        (None, None) => return Err(err(mode_line, "missing required key 'mode'")),
    };

    let density = parse_density(&mut e, base)?;
    let initial = parse_initial(&mut e, base)?;
    let solver = parse_solver(&mut e, mode, &density)?;
    let seed = e.get::<u64>("", "seed")?.unwrap_or(0);
    let output_dir = e.raw("", "output").map(|(v, _)| PathBuf::from(v));
    let probe = parse_probe(&mut e)?;
    let converge = parse_converge(&mut e)?;
    let verify = VerifySettings {
        trials: e.get("verify", "trials")?.unwrap_or(VerifySettings::default().trials),
    };
    debug_assert!(e.map.is_empty(), "all known keys consumed: {:?}", e.map);
    Ok(RunConfig {
        mode,
        solver,
        initial,
        density,
        output_dir,
        seed,
        probe,
        converge,
        verify,
    })
}

fn resolve(path: &str, base: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(path);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn load_samples(path: &str, base: Option<&Path>, line: usize) -> Result<Samples, ConfigError> {
    let p = resolve(path, base);
    let rows = read_table(&p).map_err(|e| err(line, format!("cannot read profile file {}: {e}", p.display())))?;
    Samples::new(rows).map_err(|e| err(line, format!("profile file {}: {e}", p.display())))
}

fn looks_like_path(s: &str) -> bool {
    s.contains('/') || s.contains('.')
}

fn parse_density(e: &mut Entries, base: Option<&Path>) -> Result<DensityProfile, ConfigError> {
    let top = e.raw("", "rho");
    let sec = e.raw("density", "profile");
    let (name, line) = match (top, sec) {
        (Some(_), Some((_, l))) => return Err(err(l, "density given both as 'rho' and in [density]")),
        (Some(t), None) | (None, Some(t)) => t,
        (None, None) => ("one".to_string(), 0),
    };
    let alpha = match (e.raw("", "alpha"), e.raw("density", "alpha")) {
        (Some(_), Some((_, l))) => return Err(err(l, "'alpha' given twice")),
        (Some((v, l)), None) | (None, Some((v, l))) => {
            Some(v.parse::<f64>().map_err(|_| err(l, format!("key 'alpha': cannot parse '{v}' as a number")))?)
        }
        (None, None) => None,
    };
    let scale = e.positive("density", "scale")?;
    let path = e.raw("density", "path");
    let profile = match name.as_str() {
        "one" => DensityProfile::One,
        "cauchy-decay" => DensityProfile::CauchyDecay {
            scale: scale.unwrap_or(1.0),
        },
        "power-decay" => DensityProfile::PowerDecay {
            alpha: alpha.ok_or_else(|| err(line, "power-decay density needs 'alpha'"))?,
        },
        "file" => {
            let (p, l) = path.ok_or_else(|| err(line, "file density needs 'path'"))?;
            DensityProfile::Table(load_samples(&p, base, l)?)
        }
        other if looks_like_path(other) => DensityProfile::Table(load_samples(other, base, line)?),
        other => return Err(err(line, format!("unknown density profile '{other}'"))),
    };
    if let DensityProfile::Table(s) = &profile {
        if !(s.min_value() > 0.0) {
            return Err(err(line, "density table must be strictly positive"));
        }
    }
    Ok(profile)
}

fn parse_initial(e: &mut Entries, base: Option<&Path>) -> Result<InitialProfile, ConfigError> {
    let (name, line) = match (e.raw("", "u0"), e.raw("initial", "profile")) {
        (Some(_), Some((_, l))) => return Err(err(l, "initial datum given both as 'u0' and in [initial]")),
        (Some(t), None) | (None, Some(t)) => t,
        (None, None) => ("bump".to_string(), 0),
    };
    let amplitude = e.get::<f64>("initial", "amplitude")?.unwrap_or(1.0);
    let width = e.positive("initial", "width")?.unwrap_or(1.0);
    let center = e.get::<f64>("initial", "center")?.unwrap_or(0.0);
    let scale = e.positive("initial", "scale")?.unwrap_or(1.0);
    let value = e.get::<f64>("initial", "value")?.unwrap_or(1.0);
    let separation = e.get::<f64>("initial", "separation")?.unwrap_or(3.0);
    let path = e.raw("initial", "path");
    let profile = match name.as_str() {
        "bump" => InitialProfile::Bump { amplitude, width, center },
        "cauchy" => InitialProfile::Cauchy { amplitude, scale },
        "constant" => InitialProfile::Constant { value },
        "two-bump" => InitialProfile::TwoBump {
            amplitude,
            width,
            separation,
        },
        "file" => {
            let (p, l) = path.ok_or_else(|| err(line, "file initial datum needs 'path'"))?;
            InitialProfile::Table(load_samples(&p, base, l)?)
        }
        other if looks_like_path(other) => InitialProfile::Table(load_samples(other, base, line)?),
        other => return Err(err(line, format!("unknown initial profile '{other}'"))),
    };
    let negative = match &profile {
        InitialProfile::Bump { amplitude, .. }
        | InitialProfile::Cauchy { amplitude, .. }
        | InitialProfile::TwoBump { amplitude, .. } => *amplitude < 0.0,
        InitialProfile::Constant { value } => *value < 0.0,
        InitialProfile::Table(s) => s.min_value() < 0.0,
    };
    if negative {
        return Err(err(line, "initial datum must be nonnegative"));
    }
    Ok(profile)
}

fn parse_solver(e: &mut Entries, mode: Mode, density: &DensityProfile) -> Result<Option<SolverConfig>, ConfigError> {
    let needs_radius = matches!(mode, Mode::Evolve | Mode::AuxSolve);
    let end = e.end_line;
    let radius_line = e.line_of("", "R");
    let radius = match e.positive("", "R")? {
        Some(r) => r,
        None if needs_radius => return Err(err(end, format!("missing required key 'R' for mode {mode}"))),
        None => {
            // solver keys without R would be silently ignored
            if let Some(((_, k), (_, l))) = e.map.iter().find(|((s, k), _)| s.is_empty() && is_solver_key(k)) {
                return Err(err(*l, format!("key '{k}' requires 'R'")));
            }
            return Ok(None);
        }
    };
    let m_line = e.line_of("", "m");
    let m = match e.get::<f64>("", "m")? {
        Some(m) => m,
        None => return Err(err(end, "missing required key 'm'")),
    };
    if !(m >= 1.0) {
        return Err(err(m_line, format!("exponent m must be >= 1, got {m}")));
    }
    let t_final = match e.get::<f64>("", "T")? {
        Some(t) => t,
        None if mode == Mode::Evolve => return Err(err(end, "missing required key 'T' for mode evolve")),
        None => 0.0,
    };
    let height = e.positive("", "Y")?.unwrap_or(radius);
    let grade_line = e.line_of("", "grade");
    let grade = e.get::<f64>("", "grade")?.unwrap_or(DEFAULT_GRADE);
    if !(grade >= 1.0) {
        return Err(err(grade_line, format!("grade must be >= 1, got {grade}")));
    }
    let epsilon = e.positive("", "epsilon")?.unwrap_or(DEFAULT_EPSILON);
    let dx = e.positive("", "dx")?.unwrap_or(DEFAULT_SPACING);
    let h0 = e.positive("", "h0")?.unwrap_or(dx);
    let nx_line = e.line_of("", "nx");
    let nx = e.get::<usize>("", "nx")?;
    let ny_line = e.line_of("", "ny");
    let ny = e.get::<usize>("", "ny")?;

    let mut tol = Tolerances::default();
    if let Some(v) = e.positive("", "newton_tol")? {
        tol.solve.newton_tol = v;
    }
    if let Some(v) = e.get::<usize>("", "max_newton")? {
        tol.solve.max_newton = v;
    }
    if let Some(v) = e.positive("", "linear_tol")? {
        tol.solve.linear_tol = v;
    }
    let backend_line = e.line_of("", "backend");
    if let Some(v) = e.get::<String>("", "backend")? {
        tol.solve.backend = v
            .parse::<LinearBackend>()
            .map_err(|_| err(backend_line, format!("unknown backend '{v}' (cholesky or pcg)")))?;
    }
    if let Some(v) = e.get::<f64>("", "property_abs")? {
        tol.property_abs = v;
    }
    if let Some(v) = e.get::<f64>("", "property_rel")? {
        tol.property_rel = v;
    }
    let keep_fields = e.get::<bool>("", "keep_fields")?.unwrap_or(true);

    let mut cfg = SolverConfig {
        radius,
        height,
        nx: 3,
        ny: 3,
        grade,
        epsilon,
        m,
        density: density.clone(),
        tolerances: tol,
        t_final,
        keep_fields,
    };
    cfg.set_spacing(dx, h0).map_err(|x| err(radius_line, x.to_string()))?;
    if let Some(n) = nx {
        if n < 3 {
            return Err(err(nx_line, "nx must be at least 3"));
        }
        cfg.nx = n;
    }
    if let Some(n) = ny {
        if n < 3 {
            return Err(err(ny_line, "ny must be at least 3"));
        }
        cfg.ny = n;
    }
    Ok(Some(cfg))
}

fn is_solver_key(k: &str) -> bool {
    !matches!(k, "seed" | "output" | "rho" | "alpha" | "u0" | "mode")
}

fn parse_list(v: &str, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| err(line, format!("key '{key}': cannot parse '{}' as a number", t.trim())))
        })
        .collect()
}

fn parse_probe(e: &mut Entries) -> Result<ProbeSettings, ConfigError> {
    let mut p = ProbeSettings::default();
    if let Some(v) = e.positive("probe", "R0")? {
        p.r0 = v;
    }
    if let Some((v, line)) = e.raw("probe", "radii") {
        p.radii = parse_list(&v, line, "radii")?;
        if p.radii.windows(2).any(|w| w[1] <= w[0]) || p.radii.is_empty() {
            return Err(err(line, "radii must be a nonempty increasing list"));
        }
    }
    if let Some(v) = e.get::<usize>("probe", "ntheta")? {
        p.ntheta = v;
    }
    if let Some(v) = e.get::<usize>("probe", "flux_nodes")? {
        p.flux_nodes = v;
    }
    Ok(p)
}

fn parse_converge(e: &mut Entries) -> Result<ConvergeSettings, ConfigError> {
    let mut c = ConvergeSettings::default();
    if let Some(v) = e.positive("converge", "R")? {
        c.radius = v;
    }
    if let Some(v) = e.positive("converge", "T")? {
        c.t_final = v;
    }
    if let Some(v) = e.positive("converge", "spacing")? {
        c.spacing = v;
    }
    if let Some(v) = e.positive("converge", "epsilon")? {
        c.epsilon = v;
    }
    if let Some(v) = e.get::<usize>("converge", "levels")? {
        c.levels = v;
    }
    if let Some(v) = e.positive("converge", "half_width")? {
        c.half_width = v;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("mode=evolve\nR=10\nT=1\nm=1\n").unwrap();
        assert_eq!(c.mode, Mode::Evolve);
        let s = c.solver.unwrap();
        assert_eq!(s.height, 10.0);
        assert_eq!(s.grade, 1.1);
        assert_eq!(s.epsilon, 0.01);
        assert_eq!(s.nx, 201);
        assert_eq!(s.t_final, 1.0);
        assert_eq!(c.density, DensityProfile::One);
    }

    #[test]
    fn power_decay_alias() {
        let c = parse_config("mode=evolve\nR=10\nT=1\nm=1\nrho=power-decay\nalpha=2\n").unwrap();
        assert_eq!(c.density, DensityProfile::PowerDecay { alpha: 2.0 });
        assert_eq!(c.solver.unwrap().density, DensityProfile::PowerDecay { alpha: 2.0 });
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = parse_config("mode=evolve\nR=10\nsigma=3\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("'sigma'"), "{}", e.message);
    }

    #[test]
    fn type_mismatch_and_missing_key() {
        let e = parse_config("mode=evolve\nR=ten\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("mode=evolve\nR=10\nm=1\n").unwrap_err();
        assert!(e.message.contains("'T'"));
        let e = parse_config("R=10\n").unwrap_err();
        assert!(e.message.contains("'mode'"));
    }

    #[test]
    fn sections_and_comments() {
        let text = "# run\nmode = evolve\nR = 5 # half width\nT = 0.5\nm = 2\n\n[initial]\nprofile = two-bump\nseparation = 2\n[density]\nprofile = cauchy-decay\nscale = 3\n";
        let c = parse_config(text).unwrap();
        assert_eq!(
            c.initial,
            InitialProfile::TwoBump {
                amplitude: 1.0,
                width: 1.0,
                separation: 2.0
            }
        );
        assert_eq!(c.density, DensityProfile::CauchyDecay { scale: 3.0 });
    }

    #[test]
    fn mode_conflict_and_override() {
        assert_eq!(parse_config_with("", Some(Mode::Verify), None).unwrap().mode, Mode::Verify);
        assert!(parse_config_with("mode=evolve\n", Some(Mode::Verify), None).is_err());
    }

    #[test]
    fn solver_keys_need_radius() {
        let e = parse_config("mode=verify\nepsilon=0.1\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn duplicate_and_unknown_section() {
        assert_eq!(parse_config("mode=verify\nseed=1\nseed=2\n").unwrap_err().line, 3);
        assert_eq!(parse_config("mode=verify\n[nope]\n").unwrap_err().line, 2);
        assert!(parse_config("mode=verify\n[probe]\nR=3\n").is_err());
    }

    #[test]
    fn missing_profile_file() {
        let e = parse_config("mode=verify\n[initial]\nprofile=file\npath=/nonexistent/u0.csv\n").unwrap_err();
        assert_eq!(e.line, 4);
    }
}
