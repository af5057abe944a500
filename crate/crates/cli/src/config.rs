//! Experiment configuration: schema, defaults and validation.

use serde::{Deserialize, Serialize};
use spectral_transport::brenier::MapKind;
use spectral_transport::concentration_lab::{C_GRID, DEFAULT_EXP_C, MIN_SAMPLES};
use spectral_transport::measures::{
    make_catalog_measure, GaussianMeasure, Measure, ProductMeasure, RadialMeasure, RadialProfile,
};
use spectral_transport::spd_geometry::SpdMatrix;
use spectral_transport::suites::{BankMember, SuiteOptions};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GeometrySelftest,
    Variance,
    Poincare,
    Gamma2Check,
    Sinkhorn2d,
    Concentration,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::GeometrySelftest => "geometry-selftest",
            Self::Variance => "variance",
            Self::Poincare => "poincare",
            Self::Gamma2Check => "gamma2-check",
            Self::Sinkhorn2d => "sinkhorn2d",
            Self::Concentration => "concentration",
        }
    }

    fn takes_pair(self) -> bool {
        self != Self::GeometrySelftest
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// A measure by family name. Which of the optional fields apply depends on
/// the family:
///
/// | family | fields |
/// |---|---|
/// | `gaussian`, `uniform`, `exponential`, `gamma`, `beta`, `logistic`, `laplace`, `subbotin` | `params` |
/// | `multivariate-gaussian` | `mean`, `covariance` |
/// | `product` | `factors` (1D specs) |
/// | `uniform-ball` | `dim`, `radius` |
/// | `exp-power` | `dim`, `p`, `scale` (radial density `exp(-(r/scale)^p / p)`) |
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureSpec {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<MeasureSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl MeasureSpec {
    pub fn catalog(family: &str, params: &[f64]) -> Self {
        Self {
            family: family.into(),
            params: Some(params.to_vec()),
            ..Self::default()
        }
    }

    fn present(&self) -> Vec<&'static str> {
        let mut v = vec![];
        let mut mark = |on: bool, name| {
            if on {
                v.push(name)
            }
        };
        mark(self.params.is_some(), "params");
        mark(self.mean.is_some(), "mean");
        mark(self.covariance.is_some(), "covariance");
        mark(self.factors.is_some(), "factors");
        mark(self.dim.is_some(), "dim");
        mark(self.radius.is_some(), "radius");
        mark(self.p.is_some(), "p");
        mark(self.scale.is_some(), "scale");
        v
    }

    /// Builds the measure, pushing every problem found onto `errs`.
    pub fn build(&self, path: &str, errs: &mut Vec<Violation>) -> Option<Measure> {
        let allowed: &[&str] = match self.family.as_str() {
            "multivariate-gaussian" => &["mean", "covariance"],
            "product" => &["factors"],
            "uniform-ball" => &["dim", "radius"],
            "exp-power" => &["dim", "p", "scale"],
            "" => {
                errs.push(Violation::new(
                    format!("{path}.family"),
                    "missing measure family",
                ));
                return None;
            }
            _ => &["params"],
        };
        let before = errs.len();
        for f in self.present() {
            if !allowed.contains(&f) {
                errs.push(Violation::new(
                    format!("{path}.{f}"),
                    format!("not a field of family '{}'", self.family),
                ));
            }
        }
        let required = |name: &str, errs: &mut Vec<Violation>| {
            errs.push(Violation::new(
                format!("{path}.{name}"),
                format!("required by family '{}'", self.family),
            ))
        };
        let out = match self.family.as_str() {
            "multivariate-gaussian" => {
                let (Some(mean), Some(cov)) = (&self.mean, &self.covariance) else {
                    if self.mean.is_none() {
                        required("mean", errs);
                    }
                    if self.covariance.is_none() {
                        required("covariance", errs);
                    }
                    return None;
                };
                let n = mean.len();
                if n == 0 || cov.len() != n || cov.iter().any(|r| r.len() != n) {
                    errs.push(Violation::new(
                        format!("{path}.covariance"),
                        format!("must be a {n}x{n} matrix matching the mean"),
                    ));
                    return None;
                }
                let flat: Vec<f64> = cov.iter().flatten().copied().collect();
                SpdMatrix::from_row_slice(n, &flat)
                    .and_then(|c| GaussianMeasure::new(mean.clone(), c))
                    .map(Measure::Gaussian)
                    .map_err(|e| {
                        errs.push(Violation::new(format!("{path}.covariance"), e.to_string()))
                    })
                    .ok()
            }
            "product" => {
                let Some(factors) = &self.factors else {
                    required("factors", errs);
                    return None;
                };
                if factors.is_empty() {
                    errs.push(Violation::new(
                        format!("{path}.factors"),
                        "needs at least one factor",
                    ));
                    return None;
                }
                let mut built = vec![];
                for (i, f) in factors.iter().enumerate() {
                    let fp = format!("{path}.factors[{i}]");
                    match f.build(&fp, errs) {
                        Some(Measure::OneD(m)) => built.push(m),
                        Some(_) => errs.push(Violation::new(
                            fp,
                            "product factors must be one-dimensional",
                        )),
                        None => {}
                    }
                }
                if built.len() != factors.len() {
                    return None;
                }
                ProductMeasure::new(built)
                    .map(Measure::Product)
                    .map_err(|e| {
                        errs.push(Violation::new(format!("{path}.factors"), e.to_string()))
                    })
                    .ok()
            }
            "uniform-ball" | "exp-power" => {
                let Some(dim) = self.dim else {
                    required("dim", errs);
                    return None;
                };
                let profile = if self.family == "uniform-ball" {
                    RadialProfile::UniformBall {
                        radius: self.radius.unwrap_or(1.0),
                    }
                } else {
                    RadialProfile::ExpPower {
                        p: self.p.unwrap_or(2.0),
                        scale: self.scale.unwrap_or(1.0),
                    }
                };
                RadialMeasure::new(dim, profile)
                    .map(Measure::Radial)
                    .map_err(|e| errs.push(Violation::new(path.to_string(), e.to_string())))
                    .ok()
            }
            family => {
                let Some(params) = &self.params else {
                    required("params", errs);
                    return None;
                };
                make_catalog_measure(family, params)
                    .map(Measure::OneD)
                    .map_err(|e| {
                        let at = match e {
                            spectral_transport::Error::UnknownMeasure(_) => {
                                format!("{path}.family")
                            }
                            _ => format!("{path}.params"),
                        };
                        errs.push(Violation::new(at, e.to_string()))
                    })
                    .ok()
            }
        };
        if errs.len() > before {
            None
        } else {
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    /// Report file. Relative paths resolve against the default output
    /// directory when one is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    pub format: Format,
    /// Raw `Λ(X)` sample CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    /// Include elapsed seconds in the report. Off by default so that reports
    /// from identical seeds are byte-identical.
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    /// With `target`, restricts the run to one pair; both absent runs the
    /// built-in catalog.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<MeasureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<MeasureSpec>,
    /// Expected map construction for the pair; inferred when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapKind>,
    pub samples: usize,
    pub seed: u64,
    pub quadrature_nodes: usize,
    pub geometry_pairs: usize,
    pub curve_points: usize,
    pub gamma2_points: usize,
    /// Grid side for `sinkhorn2d`.
    pub grid: usize,
    /// Half-width of the square domain for a `sinkhorn2d` pair.
    pub half_width: f64,
    pub bank: Vec<BankMember>,
    pub exp_c: f64,
    pub c_grid: Vec<f64>,
    pub sequential: bool,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let o = SuiteOptions::default();
        Self {
            kind: None,
            source: None,
            target: None,
            map: None,
            samples: o.mc_samples,
            seed: o.seed,
            quadrature_nodes: o.quad_nodes,
            geometry_pairs: o.geometry_pairs,
            curve_points: o.curve_points,
            gamma2_points: o.gamma2_points,
            grid: o.grid,
            half_width: 6.0,
            bank: o.bank,
            exp_c: DEFAULT_EXP_C,
            c_grid: C_GRID.to_vec(),
            sequential: false,
            output: OutputSpec::default(),
        }
    }
}

/// One validation failure at a field path such as `source.params`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "<root>"
        } else {
            &self.path
        };
        write!(f, "{path}: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: not valid JSON: {source}")]
    Syntax {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn range<T: PartialOrd + fmt::Display + Copy>(
    errs: &mut Vec<Violation>,
    path: &str,
    v: T,
    lo: T,
    hi: T,
) {
    if !(v >= lo && v <= hi) {
        errs.push(Violation::new(path, format!("{v} is outside [{lo}, {hi}]")));
    }
}

fn positive(errs: &mut Vec<Violation>, path: &str, v: f64, hi: f64) {
    if !(v > 0.0 && v <= hi) {
        errs.push(Violation::new(path, format!("{v} is outside (0, {hi}]")));
    }
}

/// Map construction for a validated pair.
pub fn inferred_map(source: &Measure, target: &Measure) -> Option<MapKind> {
    match (source, target) {
        (Measure::OneD(_), Measure::OneD(_)) => Some(MapKind::OneD),
        (Measure::Gaussian(_), Measure::Gaussian(_)) => Some(MapKind::GaussianLinear),
        (Measure::Product(_), Measure::Product(_)) => Some(MapKind::Product),
        (Measure::Radial(_), Measure::Radial(_)) => Some(MapKind::Radial),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        Self {
            kind: Some(kind),
            ..Self::default()
        }
    }

    /// Every violation of the documented ranges and cross-field rules.
    pub fn validate(&self) -> Vec<Violation> {
        let mut e = vec![];
        if self.kind.is_none() {
            e.push(Violation::new("kind", "missing experiment kind"));
        }
        range(&mut e, "samples", self.samples, MIN_SAMPLES, 100_000_000);
        range(
            &mut e,
            "quadrature_nodes",
            self.quadrature_nodes,
            16,
            1_000_000,
        );
        range(&mut e, "geometry_pairs", self.geometry_pairs, 1, 1_000_000);
        range(&mut e, "curve_points", self.curve_points, 2, 1_000_000);
        range(&mut e, "gamma2_points", self.gamma2_points, 1, 1_000_000);
        range(&mut e, "grid", self.grid, 8, 512);
        positive(&mut e, "half_width", self.half_width, 100.0);
        positive(&mut e, "exp_c", self.exp_c, 10.0);
        if self.bank.is_empty() {
            e.push(Violation::new("bank", "select at least one test function"));
        }
        if self.c_grid.is_empty() {
            e.push(Violation::new("c_grid", "must not be empty"));
        }
        for (i, c) in self.c_grid.iter().enumerate() {
            positive(&mut e, &format!("c_grid[{i}]"), *c, 10.0);
        }
        let _ = self.pair_into(&mut e);
        e
    }

    /// The measure pair, if one is configured and valid.
    pub fn pair(&self) -> Option<(Measure, Measure)> {
        self.pair_into(&mut vec![])
    }

    fn pair_into(&self, e: &mut Vec<Violation>) -> Option<(Measure, Measure)> {
        let kind = self.kind?;
        match (&self.source, &self.target) {
            (None, None) => {
                if self.map.is_some() {
                    e.push(Violation::new(
                        "map",
                        "only meaningful with a source and target",
                    ));
                }
                return None;
            }
            (Some(_), None) => e.push(Violation::new("target", "required when source is given")),
            (None, Some(_)) => e.push(Violation::new("source", "required when target is given")),
            _ if !kind.takes_pair() => e.push(Violation::new(
                "source",
                format!("{} does not take a measure pair", kind.name()),
            )),
            _ => {}
        }
        let (Some(s), Some(t)) = (&self.source, &self.target) else {
            return None;
        };
        if !kind.takes_pair() {
            return None;
        }
        let (src, dst) = (s.build("source", e), t.build("target", e));
        let (src, dst) = (src?, dst?);
        if src.dim() != dst.dim() {
            e.push(Violation::new(
                "target",
                format!(
                    "dimension {} does not match the source dimension {}",
                    dst.dim(),
                    src.dim()
                ),
            ));
            return None;
        }
        let inferred = inferred_map(&src, &dst);
        if kind == ExperimentKind::Sinkhorn2d {
            if src.dim() != 2 {
                e.push(Violation::new(
                    "source",
                    "sinkhorn2d needs two-dimensional measures",
                ));
            }
            if !matches!(src, Measure::Gaussian(_) | Measure::Product(_)) || inferred.is_none() {
                e.push(Violation::new(
                    "source",
                    "sinkhorn2d needs a Gaussian or product pair",
                ));
            }
            if self.map.is_some_and(|m| m != MapKind::EntropicGrid) {
                e.push(Violation::new(
                    "map",
                    "sinkhorn2d uses the entropic-grid map",
                ));
            }
        } else {
            match (inferred, self.map) {
                (None, _) => e.push(Violation::new(
                    "target",
                    "source and target must be of the same type (1D, Gaussian, product or radial)",
                )),
                (Some(m), Some(want)) if m != want => e.push(Violation::new(
                    "map",
                    format!("this pair gives a {m:?} map, not {want:?}"),
                )),
                _ => {}
            }
        }
        if e.is_empty() {
            Some((src, dst))
        } else {
            None
        }
    }

    pub fn suite_options(&self) -> SuiteOptions {
        use spectral_transport::exec::ExecMode;
        SuiteOptions {
            seed: self.seed,
            mc_samples: self.samples,
            quad_nodes: self.quadrature_nodes,
            geometry_pairs: self.geometry_pairs,
            curve_points: self.curve_points,
            gamma2_points: self.gamma2_points,
            grid: self.grid,
            bank: self.bank.clone(),
            exp_c: self.exp_c,
            c_grid: self.c_grid.clone(),
            keep_samples: self.output.samples.is_some(),
            mode: if self.sequential {
                ExecMode::Sequential
            } else {
                ExecMode::Parallel
            },
        }
    }
}

/// Parses and validates config text. Unknown keys anywhere are rejected and
/// every one is reported.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|source| ConfigError::Syntax {
            path: PathBuf::from("<input>"),
            source,
        })?;
    from_value(value)
}

fn from_value(value: serde_json::Value) -> Result<ExperimentConfig, ConfigError> {
    let mut errs = vec![];
    let mut unknown = vec![];
    let parsed: Result<ExperimentConfig, _> = {
        let mut on_unknown = |p: serde_ignored::Path| unknown.push(p.to_string());
        serde_path_to_error::deserialize(serde_ignored::Deserializer::new(value, &mut on_unknown))
    };
    for p in unknown {
        errs.push(Violation::new(p, "unknown key"));
    }
    match parsed {
        Err(e) => {
            let path = e.path().to_string();
            errs.push(Violation::new(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            ));
            Err(ConfigError::Invalid(errs))
        }
        Ok(cfg) => {
            errs.extend(cfg.validate());
            if errs.is_empty() {
                Ok(cfg)
            } else {
                Err(ConfigError::Invalid(errs))
            }
        }
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.into(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| ConfigError::Syntax {
            path: path.into(),
            source,
        })?;
    from_value(value)
}

/// Pretty JSON of the defaults for `kind`.
pub fn emit_defaults(kind: ExperimentKind) -> String {
    serde_json::to_string_pretty(&ExperimentConfig::for_kind(kind)).expect("config serializes")
}
