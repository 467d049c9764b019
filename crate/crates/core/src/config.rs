//! Flat key-value experiment configuration.
//!
//! ```toml
//! hypothesis = "superlevel_quadratic"
//! theta_star = "0.5, -0.2"
//! sigma = "diag:1,2"
//! quad_a = "1,0.3, 0,2"
//! n_reps = 10000
//! base_seed = 7
//! ```
//!
//! Vectors and matrices may be TOML arrays or comma-separated strings;
//! matrices are row-major. `sigma` also accepts `"identity"` and `"diag:..."`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::ReplicationSettings;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianExperiment, SeedSpec};
use crate::hypothesis::{BoundingBox, Hypothesis, SquaredAffineNorm};
use crate::presets::Preset;

/// A list of numbers written either as a TOML array or a comma list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumList {
    Array(Vec<f64>),
    Text(String),
}

impl NumList {
    fn parse(&self) -> std::result::Result<Vec<f64>, String> {
        match self {
            NumList::Array(v) => Ok(v.clone()),
            NumList::Text(s) => parse_comma_list(s),
        }
    }
}

impl From<Vec<f64>> for NumList {
    fn from(v: Vec<f64>) -> Self {
        NumList::Array(v)
    }
}

fn parse_comma_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    HalfSpace,
    SuperlevelQuadratic,
    BallComplement,
    HalfLineConstrained,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Svg,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
        })
    }
}

/// Seeds above `i64::MAX` do not fit a TOML integer and are written as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(u64),
    Text(String),
}

impl SeedValue {
    pub fn from_u64(seed: u64) -> Self {
        if seed > i64::MAX as u64 {
            SeedValue::Text(seed.to_string())
        } else {
            SeedValue::Int(seed)
        }
    }

    fn parse(&self) -> std::result::Result<u64, String> {
        match self {
            SeedValue::Int(v) => Ok(*v),
            SeedValue::Text(s) => s.trim().parse().map_err(|_| format!("{s:?} is not an unsigned 64-bit integer")),
        }
    }
}

pub const DEFAULT_N_REPS: usize = 10_000;
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.25, 0.35, 0.5];
pub const DEFAULT_NOLOCO_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example2_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<HypothesisKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_a: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_b: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<SeedValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_valid_im: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_lower: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_upper: Option<NumList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noloco_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

/// A validated configuration with every default made explicit.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub preset: Option<Preset>,
    pub example2_theta: Option<f64>,
    pub experiment: GaussianExperiment,
    pub hypothesis: Hypothesis,
    pub n_reps: usize,
    pub seed: SeedSpec,
    pub alpha_grid: Vec<f64>,
    pub include_valid_im: bool,
    pub output_dir: PathBuf,
    pub vartheta: Option<Vec<f64>>,
    pub region: Option<BoundingBox>,
    pub noloco_samples: usize,
    pub settings: ReplicationSettings,
    pub format: OutputFormat,
    /// The input with defaults filled in; loading it reproduces this value.
    pub echo: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(vec![e.message().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Validates every field, reporting all problems at once.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut errs = Vec::new();
        let mut echo = self.clone();

        let manual: [(&str, bool); 12] = [
            ("dim", self.dim.is_some()),
            ("theta_star", self.theta_star.is_some()),
            ("sigma", self.sigma.is_some()),
            ("hypothesis", self.hypothesis.is_some()),
            ("g", self.g.is_some()),
            ("anchor", self.anchor.is_some()),
            ("quad_a", self.quad_a.is_some()),
            ("quad_b", self.quad_b.is_some()),
            ("center", self.center.is_some()),
            ("radius", self.radius.is_some()),
            ("threshold", self.threshold.is_some()),
            ("lower_bound", self.lower_bound.is_some()),
        ];

        let model = match self.preset {
            Some(preset) => {
                for (name, set) in manual {
                    if set {
                        errs.push(format!("{name}: not allowed together with preset = \"{preset}\""));
                    }
                }
                if self.example2_theta.is_some() && preset != Preset::Example2 {
                    errs.push("example2_theta: only applies to preset = \"example2\"".to_string());
                }
                match preset.build(self.example2_theta) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        errs.push(format!("example2_theta: {e}"));
                        None
                    }
                }
            }
            None => {
                if self.example2_theta.is_some() {
                    errs.push("example2_theta: only applies to preset = \"example2\"".to_string());
                }
                self.manual_model(&mut errs)
            }
        };

        let n_reps = self.n_reps.unwrap_or(DEFAULT_N_REPS);
        if n_reps < crate::diagnostics::MIN_REPS {
            errs.push(format!("n_reps: must be at least {}, got {n_reps}", crate::diagnostics::MIN_REPS));
        }
        echo.n_reps = Some(n_reps);

        let base_seed = match self.base_seed.as_ref().map(SeedValue::parse).transpose() {
            Ok(s) => s.unwrap_or(0),
            Err(e) => {
                errs.push(format!("base_seed: {e}"));
                0
            }
        };
        echo.base_seed = Some(SeedValue::from_u64(base_seed));

        let alpha_grid = match self.alpha_grid.as_ref().map(NumList::parse).transpose() {
            Ok(v) => v.unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec()),
            Err(e) => {
                errs.push(format!("alpha_grid: {e}"));
                Vec::new()
            }
        };
        if alpha_grid.is_empty() && self.alpha_grid.is_some() {
            errs.push("alpha_grid: must not be empty".to_string());
        }
        for a in &alpha_grid {
            if !(*a > 0.0 && *a < 1.0) {
                errs.push(format!("alpha_grid: {a} is outside (0, 1)"));
            }
        }
        echo.alpha_grid = Some(NumList::Array(alpha_grid.clone()));

        let include_valid_im = self.include_valid_im.unwrap_or(true);
        echo.include_valid_im = Some(include_valid_im);
        let output_dir = self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        echo.output_dir = Some(output_dir.clone());

        let defaults = ReplicationSettings::default();
        let posterior_draws = self.posterior_draws.unwrap_or(defaults.posterior_draws);
        if posterior_draws < crate::posterior::MIN_DRAWS {
            errs.push(format!(
                "posterior_draws: must be at least {}, got {posterior_draws}",
                crate::posterior::MIN_DRAWS
            ));
        }
        let opt_budget = self.opt_budget.unwrap_or(defaults.opt_budget);
        if opt_budget == 0 {
            errs.push("opt_budget: must be positive".to_string());
        }
        echo.posterior_draws = Some(posterior_draws);
        echo.opt_budget = Some(opt_budget);

        let noloco_samples = self.noloco_samples.unwrap_or(DEFAULT_NOLOCO_SAMPLES);
        if noloco_samples == 0 {
            errs.push("noloco_samples: must be positive".to_string());
        }
        echo.noloco_samples = Some(noloco_samples);
        let format = self.format.unwrap_or_default();
        echo.format = Some(format);

        let dim = model.as_ref().map(|(e, _)| e.dim());
        let vartheta = parse_vec(&self.vartheta, "vartheta", dim, &mut errs);
        let region_lower = parse_vec(&self.region_lower, "region_lower", dim, &mut errs);
        let region_upper = parse_vec(&self.region_upper, "region_upper", dim, &mut errs);
        let region = match (region_lower, region_upper) {
            (Some(lo), Some(hi)) => match BoundingBox::new(lo, hi) {
                Ok(b) => Some(b),
                Err(e) => {
                    errs.push(format!("region_lower/region_upper: {e}"));
                    None
                }
            },
            (None, None) => None,
            _ => {
                errs.push("region_lower/region_upper: give both or neither".to_string());
                None
            }
        };

        match (model, errs.is_empty()) {
            (Some((experiment, hypothesis)), true) => Ok(ResolvedConfig {
                preset: self.preset,
                example2_theta: self.example2_theta,
                experiment,
                hypothesis,
                n_reps,
                seed: SeedSpec::new(base_seed),
                alpha_grid,
                include_valid_im,
                output_dir,
                vartheta,
                region,
                noloco_samples,
                settings: ReplicationSettings {
                    posterior_draws,
                    opt_budget,
                },
                format,
                echo,
            }),
            _ => {
                if errs.is_empty() {
                    errs.push("model: could not be constructed".to_string());
                }
                Err(Error::InvalidConfig(errs))
            }
        }
    }

    fn manual_model(&self, errs: &mut Vec<String>) -> Option<(GaussianExperiment, Hypothesis)> {
        let Some(kind) = self.hypothesis else {
            errs.push("hypothesis: required unless a preset is given".to_string());
            return None;
        };
        let theta_star = parse_vec(&self.theta_star, "theta_star", self.dim, errs);
        let dim = match (self.dim, &theta_star) {
            (Some(0), _) => {
                errs.push("dim: must be positive".to_string());
                return None;
            }
            (Some(d), _) => d,
            (None, Some(t)) => t.len(),
            (None, None) => {
                errs.push("theta_star: required unless a preset is given".to_string());
                return None;
            }
        };
        let theta_star = match theta_star {
            Some(t) => t,
            None => {
                errs.push("theta_star: required unless a preset is given".to_string());
                return None;
            }
        };
        let sigma = match parse_sigma(self.sigma.as_ref(), dim) {
            Ok(s) => Some(s),
            Err(e) => {
                errs.push(format!("sigma: {e}"));
                None
            }
        };
        let experiment = sigma.and_then(|s| match GaussianExperiment::new(theta_star.clone(), s) {
            Ok(e) => Some(e),
            Err(e) => {
                errs.push(format!("sigma: {e}"));
                None
            }
        });

        let allowed: &[&str] = match kind {
            HypothesisKind::HalfSpace => &["g", "anchor"],
            HypothesisKind::SuperlevelQuadratic => &["quad_a", "quad_b", "anchor"],
            HypothesisKind::BallComplement => &["center", "radius"],
            HypothesisKind::HalfLineConstrained => &["threshold", "lower_bound"],
        };
        let present = [
            ("g", self.g.is_some()),
            ("anchor", self.anchor.is_some()),
            ("quad_a", self.quad_a.is_some()),
            ("quad_b", self.quad_b.is_some()),
            ("center", self.center.is_some()),
            ("radius", self.radius.is_some()),
            ("threshold", self.threshold.is_some()),
            ("lower_bound", self.lower_bound.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                errs.push(format!("{name}: not used by hypothesis = \"{}\"", kind_name(kind)));
            }
        }

        let hypothesis = match kind {
            HypothesisKind::HalfSpace => {
                let g = parse_vec(&self.g, "g", Some(dim), errs);
                if g.is_none() && self.g.is_none() {
                    errs.push("g: required for half_space".to_string());
                }
                let anchor = parse_vec(&self.anchor, "anchor", Some(dim), errs).unwrap_or_else(|| theta_star.clone());
                g.and_then(|g| record(Hypothesis::half_space(g, anchor), "g", errs))
            }
            HypothesisKind::SuperlevelQuadratic => {
                let a = match self.quad_a.as_ref().map(NumList::parse).transpose() {
                    Ok(Some(v)) if v.len() == dim * dim => Some(DMatrix::from_row_slice(dim, dim, &v)),
                    Ok(Some(v)) => {
                        errs.push(format!("quad_a: expected {} entries, got {}", dim * dim, v.len()));
                        None
                    }
                    Ok(None) => Some(DMatrix::identity(dim, dim)),
                    Err(e) => {
                        errs.push(format!("quad_a: {e}"));
                        None
                    }
                };
                let b = parse_vec(&self.quad_b, "quad_b", Some(dim), errs).unwrap_or_else(|| vec![0.0; dim]);
                let anchor = parse_vec(&self.anchor, "anchor", Some(dim), errs).unwrap_or_else(|| theta_star.clone());
                a.and_then(|a| record(SquaredAffineNorm::new(a, b), "quad_a", errs))
                    .and_then(|phi| record(Hypothesis::superlevel(Arc::new(phi), anchor), "anchor", errs))
            }
            HypothesisKind::BallComplement => {
                let center = parse_vec(&self.center, "center", Some(dim), errs).unwrap_or_else(|| vec![0.0; dim]);
                match self.radius {
                    Some(r) => record(Hypothesis::ball_complement(center, r), "radius", errs),
                    None => {
                        errs.push("radius: required for ball_complement".to_string());
                        None
                    }
                }
            }
            HypothesisKind::HalfLineConstrained => {
                if dim != 1 {
                    errs.push(format!("dim: half_line_constrained is one-dimensional, got {dim}"));
                }
                let lb = self.lower_bound.unwrap_or(0.0);
                if theta_star.first().is_some_and(|t| *t < lb) {
                    errs.push(format!("theta_star: must be at least lower_bound = {lb}"));
                }
                match self.threshold {
                    Some(t) => record(Hypothesis::half_line(t, lb), "threshold", errs),
                    None => {
                        errs.push("threshold: required for half_line_constrained".to_string());
                        None
                    }
                }
            }
        };
        Some((experiment?, hypothesis?))
    }
}

fn kind_name(kind: HypothesisKind) -> &'static str {
    match kind {
        HypothesisKind::HalfSpace => "half_space",
        HypothesisKind::SuperlevelQuadratic => "superlevel_quadratic",
        HypothesisKind::BallComplement => "ball_complement",
        HypothesisKind::HalfLineConstrained => "half_line_constrained",
    }
}

fn record<T>(r: Result<T>, field: &str, errs: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| errs.push(format!("{field}: {e}"))).ok()
}

fn parse_vec(v: &Option<NumList>, field: &str, dim: Option<usize>, errs: &mut Vec<String>) -> Option<Vec<f64>> {
    let parsed = match v.as_ref()?.parse() {
        Ok(p) => p,
        Err(e) => {
            errs.push(format!("{field}: {e}"));
            return None;
        }
    };
    if let Some(d) = dim {
        if parsed.len() != d {
            errs.push(format!("{field}: expected {d} entries, got {}", parsed.len()));
            return None;
        }
    }
    if parsed.iter().any(|x| !x.is_finite()) {
        errs.push(format!("{field}: entries must be finite"));
        return None;
    }
    Some(parsed)
}

fn parse_sigma(spec: Option<&NumList>, dim: usize) -> std::result::Result<DMatrix<f64>, String> {
    let text = match spec {
        None => return Ok(DMatrix::identity(dim, dim)),
        Some(NumList::Array(v)) => return dense(v, dim),
        Some(NumList::Text(s)) => s.trim(),
    };
    if text.eq_ignore_ascii_case("identity") {
        return Ok(DMatrix::identity(dim, dim));
    }
    if let Some(rest) = text.strip_prefix("diag:") {
        let d = parse_comma_list(rest)?;
        if d.len() != dim {
            return Err(format!("diag needs {dim} entries, got {}", d.len()));
        }
        return Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
    }
    dense(&parse_comma_list(text)?, dim)
}

fn dense(v: &[f64], dim: usize) -> std::result::Result<DMatrix<f64>, String> {
    if v.len() != dim * dim {
        return Err(format!("expected {} row-major entries, got {}", dim * dim, v.len()));
    }
    Ok(DMatrix::from_row_slice(dim, dim, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_roundtrip() {
        let cfg = ExperimentConfig::from_toml_str("preset = \"example1\"\nn_reps = 200\nbase_seed = 42\n").unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.n_reps, 200);
        assert_eq!(r.seed, SeedSpec::new(42));
        let again = ExperimentConfig::from_toml_str(&r.echo.to_toml_string()).unwrap();
        assert_eq!(again, r.echo);
        assert_eq!(again.resolve().unwrap().echo, r.echo);
    }

    #[test]
    fn manual_superlevel() {
        let cfg = ExperimentConfig::from_toml_str(
            "hypothesis = \"superlevel_quadratic\"\ntheta_star = \"0.5, -0.2\"\nsigma = \"diag:1,2\"\nquad_a = [1.0, 0.3, 0.0, 2.0]\n",
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.experiment.dim(), 2);
        assert!(r.hypothesis.is_false_at(&[0.5, -0.2]).unwrap());
        assert_eq!(r.experiment.sigma()[(1, 1)], 2.0);
    }

    #[test]
    fn lists_every_problem() {
        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"example1\"\nradius = 2.0\nn_reps = 5\nalpha_grid = [0.1, 1.5]\nposterior_draws = 10\n",
        )
        .unwrap();
        let Err(Error::InvalidConfig(errs)) = cfg.resolve() else {
            panic!("expected a validation error");
        };
        for field in ["radius", "n_reps", "alpha_grid", "posterior_draws"] {
            assert!(errs.iter().any(|e| e.starts_with(field)), "{field} missing from {errs:?}");
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_sigma() {
        assert!(ExperimentConfig::from_toml_str("presets = \"example1\"").is_err());
        let cfg = ExperimentConfig::from_toml_str(
            "hypothesis = \"ball_complement\"\ntheta_star = [0.0, 0.0]\nsigma = \"1, 2, 2, 1\"\nradius = 1.0\n",
        )
        .unwrap();
        let Err(Error::InvalidConfig(errs)) = cfg.resolve() else {
            panic!("indefinite sigma accepted");
        };
        assert!(errs[0].starts_with("sigma"), "{errs:?}");
    }

    #[test]
    fn large_seeds_survive_echo() {
        let mut cfg = ExperimentConfig {
            preset: Some(Preset::Example2),
            ..Default::default()
        };
        cfg.base_seed = Some(SeedValue::from_u64(u64::MAX));
        let r = cfg.resolve().unwrap();
        let back = ExperimentConfig::from_toml_str(&r.echo.to_toml_string()).unwrap().resolve().unwrap();
        assert_eq!(back.seed, SeedSpec::new(u64::MAX));
    }
}
