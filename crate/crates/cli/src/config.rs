//! Flat, line-oriented configuration files: `[section]` headers and
//! `key = value` pairs, with expressions quoted. Parsing normalizes into
//! sorted maps so that parse → emit → parse is the identity.

use std::collections::BTreeMap;
use std::fmt;

use pxhardy::exponent::ExponentField;
use pxhardy::fieldexpr::{parse as parse_expr, ScalarField};
use pxhardy::geometry::Domain;
use pxhardy::scenario::{
    builtin_with, radial_pde_forcing, BuiltinSpec, Profile, RadialProfile, Scenario,
    ScenarioParams,
};
use pxhardy::testfn::Family;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "\"{s}\""),
            Value::Num(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Value {
    fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub sections: BTreeMap<String, BTreeMap<String, Value>>,
}

#[derive(Debug)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    Missing { section: String, key: String },
    BadValue { section: String, key: String, message: String },
    Scenario(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, message } => {
                write!(f, "config syntax error at line {line}: {message}")
            }
            ConfigError::Missing { section, key } => {
                write!(f, "missing key `{key}` in section [{section}]")
            }
            ConfigError::BadValue {
                section,
                key,
                message,
            } => write!(f, "bad value for `{key}` in [{section}]: {message}"),
            ConfigError::Scenario(m) => write!(f, "scenario construction failed: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: line_no,
                message: "expected `key = value`".into(),
            })?;
            if section.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    message: "key outside of any [section]".into(),
                });
            }
            let key = key.trim().to_string();
            let value = parse_value(value.trim(), line_no)?;
            cfg.sections
                .entry(section.clone())
                .or_default()
                .insert(key, value);
        }
        Ok(cfg)
    }

    /// Canonical text: sections and keys in sorted order.
    #[allow(dead_code)] // round-trip contract, exercised by tests
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            out.push_str(&format!("[{name}]\n"));
            for (key, value) in entries {
                out.push_str(&format!("{key} = {value}\n"));
            }
            out.push('\n');
        }
        out
    }

    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn str_of(&self, section: &str, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| bad(section, key, "expected a quoted string")),
        }
    }

    fn num_of(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .as_num()
                .map(Some)
                .ok_or_else(|| bad(section, key, "expected a number")),
        }
    }

    fn bool_of(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| bad(section, key, "expected true or false")),
        }
    }
}

fn bad(section: &str, key: &str, message: &str) -> ConfigError {
    ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        message: message.into(),
    }
}

fn parse_value(text: &str, line: usize) -> Result<Value, ConfigError> {
    if let Some(rest) = text.strip_prefix('"') {
        let inner = rest.strip_suffix('"').ok_or(ConfigError::Syntax {
            line,
            message: "unterminated string".into(),
        })?;
        if inner.contains('"') {
            return Err(ConfigError::Syntax {
                line,
                message: "embedded quotes are not supported".into(),
            });
        }
        return Ok(Value::Str(inner.to_string()));
    }
    match text {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Value::Num(v)),
        Ok(_) => Err(ConfigError::Syntax {
            line,
            message: "numeric parameters must be finite".into(),
        }),
        Err(_) => Err(ConfigError::Syntax {
            line,
            message: format!("`{text}` is not a string, bool, or number"),
        }),
    }
}

// ---------------------------------------------------------------------------
// Scenario and verification settings from a config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct VerificationSettings {
    pub family: Family,
    pub count: usize,
    pub seed: u64,
    pub resolution: usize,
    pub refinement: usize,
}

impl Default for VerificationSettings {
    fn default() -> Self {
        VerificationSettings {
            family: Family::TensorTent,
            count: 20,
            seed: 42,
            resolution: 24,
            refinement: 2,
        }
    }
}

pub fn verification_settings(cfg: &Config) -> Result<VerificationSettings, ConfigError> {
    let mut v = VerificationSettings::default();
    if let Some(name) = cfg.str_of("verification", "family")? {
        v.family = Family::from_name(name)
            .ok_or_else(|| bad("verification", "family", "unknown family name"))?;
    }
    if let Some(c) = cfg.num_of("verification", "count")? {
        v.count = c as usize;
    }
    if let Some(s) = cfg.num_of("verification", "seed")? {
        v.seed = s as u64;
    }
    if let Some(r) = cfg.num_of("verification", "resolution")? {
        v.resolution = (r as usize).max(1);
    }
    if let Some(r) = cfg.num_of("verification", "refinement")? {
        v.refinement = r as usize;
    }
    Ok(v)
}

pub fn output_csv_path(cfg: &Config) -> Result<Option<String>, ConfigError> {
    Ok(cfg.str_of("output", "csv")?.map(str::to_string))
}

/// Build the scenario described by `[scenario]`. A `builtin` key selects a
/// catalog instance with overrides; otherwise the section must describe the
/// domain, exponent, profile, weight, and forcing explicitly.
pub fn scenario_from(cfg: &Config) -> Result<Scenario, ConfigError> {
    const S: &str = "scenario";
    if !cfg.sections.contains_key(S) {
        return Err(ConfigError::Missing {
            section: S.into(),
            key: "(section)".into(),
        });
    }
    if let Some(name) = cfg.str_of(S, "builtin")? {
        let spec = BuiltinSpec {
            name: name.to_string(),
            n: cfg.num_of(S, "n")?.map(|v| v as usize),
            alpha: cfg.num_of(S, "alpha")?,
            beta: cfg.num_of(S, "beta")?,
            big_m: cfg.num_of(S, "m")?,
            c_l: cfg.num_of(S, "c_l")?,
            c_e: cfg.num_of(S, "c_e")?,
            sigma_const: cfg.num_of(S, "sigma_const")?,
            as_printed: cfg.bool_of(S, "as_printed")?.unwrap_or(false),
        };
        return builtin_with(&spec).map_err(|e| ConfigError::Scenario(e.to_string()));
    }

    let domain = domain_from(cfg)?;
    let p_text = cfg
        .str_of(S, "p")?
        .ok_or(ConfigError::Missing {
            section: S.into(),
            key: "p".into(),
        })?;
    let p_expr = parse_expr(p_text).map_err(|e| bad(S, "p", &e.to_string()))?;
    let declared_constant = cfg.bool_of(S, "p_constant")?.unwrap_or(false);
    let exponent = if declared_constant {
        ExponentField::declared_constant(ScalarField::from_expr(p_expr))
    } else {
        ExponentField::new(ScalarField::from_expr(p_expr))
    };

    let sigma_text = cfg.str_of(S, "sigma")?.ok_or(ConfigError::Missing {
        section: S.into(),
        key: "sigma".into(),
    })?;
    let sigma = ScalarField::from_expr(
        parse_expr(sigma_text).map_err(|e| bad(S, "sigma", &e.to_string()))?,
    );

    let beta = cfg.num_of(S, "beta")?.ok_or(ConfigError::Missing {
        section: S.into(),
        key: "beta".into(),
    })?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(bad(S, "beta", "must be positive and finite"));
    }

    let profile = if let Some(v_text) = cfg.str_of(S, "v")? {
        let v = parse_expr(v_text).map_err(|e| bad(S, "v", &e.to_string()))?;
        let dv = match cfg.str_of(S, "dv")? {
            Some(t) => Some(parse_expr(t).map_err(|e| bad(S, "dv", &e.to_string()))?),
            None => None,
        };
        let d2v = match cfg.str_of(S, "d2v")? {
            Some(t) => Some(parse_expr(t).map_err(|e| bad(S, "d2v", &e.to_string()))?),
            None => None,
        };
        Profile::Radial(RadialProfile::from_exprs(v, dv, d2v))
    } else if let Some(u_text) = cfg.str_of(S, "u")? {
        Profile::General(ScalarField::from_expr(
            parse_expr(u_text).map_err(|e| bad(S, "u", &e.to_string()))?,
        ))
    } else {
        return Err(ConfigError::Missing {
            section: S.into(),
            key: "v (radial profile) or u (general profile)".into(),
        });
    };

    let phi_text = cfg.str_of(S, "phi")?.unwrap_or("from_pde");
    let phi = if phi_text == "from_pde" {
        match &profile {
            Profile::Radial(rp) => radial_pde_forcing(rp, &exponent),
            Profile::General(_) => {
                return Err(bad(S, "phi", "from_pde needs a radial profile (key `v`)"))
            }
        }
    } else {
        ScalarField::from_expr(parse_expr(phi_text).map_err(|e| bad(S, "phi", &e.to_string()))?)
    };

    let family = cfg
        .str_of(S, "family")?
        .unwrap_or("custom")
        .to_string();

    let breakpoints = match cfg.str_of(S, "breakpoints")? {
        Some(text) => parse_breakpoints(text).map_err(|m| bad(S, "breakpoints", &m))?,
        None => Vec::new(),
    };

    Ok(Scenario {
        domain,
        exponent,
        profile,
        phi,
        sigma,
        beta,
        family,
        params: ScenarioParams {
            alpha: cfg.num_of(S, "alpha")?,
            c_l: cfg.num_of(S, "c_l")?,
            c_e: cfg.num_of(S, "c_e")?,
            big_m: cfg.num_of(S, "m")?,
            as_printed: cfg.bool_of(S, "as_printed")?.unwrap_or(false),
        },
        breakpoints,
    })
}

fn domain_from(cfg: &Config) -> Result<Domain, ConfigError> {
    const S: &str = "scenario";
    let kind = cfg.str_of(S, "domain")?.ok_or(ConfigError::Missing {
        section: S.into(),
        key: "domain".into(),
    })?;
    let made = match kind {
        "interval" => {
            let a = cfg.num_of(S, "a")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "a".into(),
            })?;
            let b = cfg.num_of(S, "b")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "b".into(),
            })?;
            Domain::interval(a, b)
        }
        "annulus" => {
            let n = cfg.num_of(S, "n")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "n".into(),
            })? as usize;
            let r_in = cfg.num_of(S, "r_in")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "r_in".into(),
            })?;
            let r_out = cfg.num_of(S, "r_out")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "r_out".into(),
            })?;
            Domain::annulus(n, r_in, r_out)
        }
        "box" | "orthant_box" => {
            let text = cfg.str_of(S, "bounds")?.ok_or(ConfigError::Missing {
                section: S.into(),
                key: "bounds".into(),
            })?;
            let bounds = parse_bounds(text).map_err(|m| bad(S, "bounds", &m))?;
            if kind == "box" {
                Domain::box_nd(bounds)
            } else {
                Domain::orthant_box(bounds)
            }
        }
        other => {
            return Err(bad(
                S,
                "domain",
                &format!("unknown domain `{other}` (interval, box, annulus, orthant_box)"),
            ))
        }
    };
    made.map_err(|e| ConfigError::Scenario(e.to_string()))
}

/// `"0,1;0,2"` → `[(0,1), (0,2)]`.
fn parse_bounds(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut out = Vec::new();
    for axis in text.split(';') {
        let (lo, hi) = axis
            .split_once(',')
            .ok_or_else(|| format!("axis `{axis}` must be `lo,hi`"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number `{hi}`"))?;
        out.push((lo, hi));
    }
    Ok(out)
}

/// `"0;0.5,1.5"` → axis 1 breaks at 0, axis 2 at 0.5 and 1.5.
fn parse_breakpoints(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut out = Vec::new();
    for axis in text.split(';') {
        let axis = axis.trim();
        if axis.is_empty() {
            out.push(Vec::new());
            continue;
        }
        let mut pts = Vec::new();
        for tok in axis.split(',') {
            pts.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number `{tok}`"))?,
            );
        }
        out.push(pts);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
# power-weight instance
[scenario]
builtin = "power_linear"
beta = 1

[verification]
family = "tent"
count = 20
seed = 42
resolution = 32
refinement = 2

[output]
csv = "reports.csv"
"#;

    #[test]
    fn parse_normalize_emit_round_trip() {
        let cfg = Config::parse(SAMPLE).unwrap();
        let emitted = cfg.emit();
        let reparsed = Config::parse(&emitted).unwrap();
        assert_eq!(cfg, reparsed);
        // Emitting again is stable.
        assert_eq!(emitted, reparsed.emit());
    }

    #[test]
    fn builtin_scenario_and_settings() {
        let cfg = Config::parse(SAMPLE).unwrap();
        let s = scenario_from(&cfg).unwrap();
        assert_eq!(s.family, "power_linear");
        assert_eq!(s.beta, 1.0);
        let v = verification_settings(&cfg).unwrap();
        assert_eq!(v.count, 20);
        assert_eq!(v.seed, 42);
        assert_eq!(output_csv_path(&cfg).unwrap().as_deref(), Some("reports.csv"));
    }

    #[test]
    fn custom_scenario_parses() {
        let text = r#"
[scenario]
domain = "interval"
a = 1
b = 3
p = "2"
p_constant = true
v = "r"
sigma = "1/2"
beta = 1
family = "power_linear"
"#;
        let cfg = Config::parse(text).unwrap();
        let s = scenario_from(&cfg).unwrap();
        assert_eq!(s.dim(), 1);
        assert!(s.validate(21).unwrap().pass);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("[scenario\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let err = Config::parse("[s]\nkey 1\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_keys_are_reported() {
        let cfg = Config::parse("[scenario]\ndomain = \"interval\"\na = 1\nb = 3\n").unwrap();
        let err = scenario_from(&cfg).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { .. }));
    }
}
