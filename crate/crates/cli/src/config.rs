//! JSON run configuration.
//!
//! One document drives every subcommand; blocks a subcommand does not use are
//! ignored by it. Unknown fields are rejected. Diagnostics carry the line of
//! the offending field when it can be located in the source text.

use std::fmt;
use std::path::{Path, PathBuf};

use clebsch_geodesic::model::Tolerances;
use clebsch_geodesic::ode::{StepControl, StepMode};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Clebsch,
    Both,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Clebsch => "clebsch",
            Method::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub mode: Option<Mode>,
    pub h: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    pub constraint: Option<f64>,
    pub identity: Option<f64>,
    pub eps_b: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random points per check.
    pub samples: Option<usize>,
    /// Pass threshold for every residual; defaults to the identity tolerance.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpConfig {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v0: Option<Vec<f64>>,
    pub tol_endpoint: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub count: Option<usize>,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub a: Vec<f64>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub method: Option<Method>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub t_end: Option<f64>,
    pub tau_end: Option<f64>,
    pub stride: Option<f64>,
    pub project_every: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    pub bvp: Option<BvpConfig>,
    #[serde(default)]
    pub sample: SampleConfig,
}

/// A configuration problem, located by line where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.source, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.source, self.message),
            _ => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Validated configuration with defaults applied, plus the raw text for
/// locating fields in later diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub cfg: RunConfig,
    pub source: String,
    text: String,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: source.clone(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, &source)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            source: source.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        let loaded = Self {
            cfg,
            source: source.to_string(),
            text: text.to_string(),
        };
        loaded.validate_common()?;
        Ok(loaded)
    }

    /// Error pointing at the first occurrence of `"field"` in the source.
    pub fn error_at(&self, field: &str, message: impl Into<String>) -> ConfigError {
        let key = format!("\"{field}\"");
        let line = self
            .text
            .lines()
            .position(|l| l.contains(&key))
            .map(|i| i + 1);
        ConfigError {
            source: self.source.clone(),
            line,
            column: None,
            message: message.into(),
        }
    }

    fn check_len(&self, field: &str, v: &[f64]) -> Result<(), ConfigError> {
        if v.len() != self.cfg.n {
            return Err(self.error_at(
                field,
                format!("{field} has {} entries but n = {}", v.len(), self.cfg.n),
            ));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(self.error_at(field, format!("{field}[{i}] is not finite")));
        }
        Ok(())
    }

    fn positive(&self, field: &str, v: Option<f64>) -> Result<(), ConfigError> {
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(self.error_at(
                field,
                format!("{field} must be positive and finite, got {x}"),
            )),
            _ => Ok(()),
        }
    }

    fn validate_common(&self) -> Result<(), ConfigError> {
        let c = &self.cfg;
        if c.n < 2 {
            return Err(self.error_at("n", format!("n must be at least 2, got {}", c.n)));
        }
        self.check_len("a", &c.a)?;
        if let Some(i) = c.a.iter().position(|x| x.is_nan() || *x <= 0.0) {
            return Err(self.error_at("a", format!("a[{i}] = {} must be positive", c.a[i])));
        }
        match (&c.x0, &c.y0) {
            (Some(x), Some(y)) => {
                self.check_len("x0", x)?;
                self.check_len("y0", y)?;
            }
            (None, None) => {}
            (Some(_), None) => return Err(self.error_at("x0", "x0 given without y0")),
            (None, Some(_)) => return Err(self.error_at("y0", "y0 given without x0")),
        }
        self.positive("t_end", c.t_end)?;
        self.positive("tau_end", c.tau_end)?;
        self.positive("stride", c.stride)?;
        self.positive("h", c.integrator.h)?;
        self.positive("rtol", c.integrator.rtol)?;
        self.positive("atol", c.integrator.atol)?;
        self.positive("constraint", c.tolerances.constraint)?;
        self.positive("identity", c.tolerances.identity)?;
        self.positive("eps_b", c.tolerances.eps_b)?;
        self.positive("bound", c.verify.bound)?;
        self.positive("speed", c.sample.speed)?;
        if c.project_every == Some(0) {
            return Err(self.error_at("project_every", "project_every must be at least 1"));
        }
        if c.integrator.max_steps == Some(0) {
            return Err(self.error_at("max_steps", "max_steps must be at least 1"));
        }
        if c.integrator.mode == Some(Mode::Fixed) && c.integrator.h.is_none() {
            return Err(self.error_at("mode", "fixed mode needs integrator.h"));
        }
        Ok(())
    }

    /// Checks the fields the `integrate` subcommand needs.
    pub fn validate_integrate(&self) -> Result<Method, ConfigError> {
        let c = &self.cfg;
        let method = c.method.ok_or_else(|| {
            self.error_at(
                "method",
                "integrate needs \"method\" (direct | clebsch | both)",
            )
        })?;
        match method {
            Method::Direct | Method::Both if c.t_end.is_none() => {
                Err(self.error_at("method", format!("method {} needs t_end", method.name())))
            }
            Method::Clebsch if c.tau_end.is_none() => {
                Err(self.error_at("method", "method clebsch needs tau_end"))
            }
            Method::Direct if c.tau_end.is_some() => {
                Err(self.error_at("tau_end", "tau_end applies to clebsch runs only"))
            }
            Method::Clebsch if c.t_end.is_some() => {
                Err(self.error_at("t_end", "t_end does not apply to method clebsch"))
            }
            Method::Both if c.tau_end.is_some() => {
                Err(self.error_at("tau_end", "method both runs in physical time; use t_end"))
            }
            _ => Ok(method),
        }
    }

    pub fn validate_bvp(&self) -> Result<&BvpConfig, ConfigError> {
        let b = self.cfg.bvp.as_ref().ok_or_else(|| {
            self.error_at("bvp", "bvp subcommand needs a \"bvp\" block with p and q")
        })?;
        self.check_len("p", &b.p)?;
        self.check_len("q", &b.q)?;
        if let Some(v0) = &b.v0 {
            self.check_len("v0", v0)?;
        }
        if b.p == b.q {
            return Err(self.error_at("q", "p and q must differ"));
        }
        self.positive("tol_endpoint", b.tol_endpoint)?;
        Ok(b)
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        let t = &self.cfg.tolerances;
        Tolerances {
            constraint: t.constraint.unwrap_or(d.constraint),
            identity: t.identity.unwrap_or(d.identity),
            eps_b: t.eps_b.unwrap_or(d.eps_b),
        }
    }

    /// Step control with the given adaptive defaults for unset fields.
    pub fn step_control(&self, rtol: f64, atol: f64) -> StepControl {
        let i = &self.cfg.integrator;
        let mut ctl = StepControl::adaptive(i.rtol.unwrap_or(rtol), i.atol.unwrap_or(atol));
        if i.mode == Some(Mode::Fixed) {
            ctl.mode = StepMode::Fixed;
        }
        if let Some(h) = i.h {
            ctl.h = h;
        }
        if let Some(m) = i.max_steps {
            ctl.max_steps = m;
        }
        ctl
    }
}
