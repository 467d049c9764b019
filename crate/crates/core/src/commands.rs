//! The four batch commands behind the CLI.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use crate::config::{ExperimentConfig, OutputFormat, ResolvedConfig, SeedValue};
use crate::diagnostics::{
    dominance_report, example2_theta_sweep, figure_rows, find_fc_pairs, run_replications, FcPair, Series,
    DEFAULT_THETA_SWEEP, FIGURE_GRID,
};
use crate::error::{Error, Result};
use crate::noloco::noloco_check;
use crate::output::{ensure_dir, figure_svg, num, write_atomic, write_csv, RunManifest};
use crate::presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Diagnose,
    Figure,
    Noloco,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
            Command::Figure => "figure",
            Command::Noloco => "noloco",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub n_reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if overrides.preset.is_some() {
        cfg.preset = overrides.preset;
    }
    if overrides.n_reps.is_some() {
        cfg.n_reps = overrides.n_reps;
    }
    if let Some(seed) = overrides.seed {
        cfg.base_seed = Some(SeedValue::from_u64(seed));
    }
    if overrides.out.is_some() {
        cfg.output_dir = overrides.out.clone();
    }
    if overrides.format.is_some() {
        cfg.format = overrides.format;
    }
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct CommandReport {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> Result<CommandReport> {
    let started = Instant::now();
    let resolved = cfg.resolve()?;
    if resolved.format == OutputFormat::Svg && command != Command::Figure {
        return Err(Error::InvalidConfig(vec![format!(
            "format: svg only applies to the figure command, not {}",
            command.name()
        )]));
    }
    ensure_dir(&resolved.output_dir)?;
    let (outputs, methods, summary) = match command {
        Command::Simulate => simulate(&resolved)?,
        Command::Diagnose => diagnose(&resolved)?,
        Command::Figure => figure(&resolved)?,
        Command::Noloco => noloco(&resolved)?,
    };

    let config_toml = resolved.echo.to_toml_string();
    let echo_path = resolved.output_dir.join(format!("{}_config.toml", command.name()));
    write_atomic(&echo_path, config_toml.as_bytes())?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: resolved.seed.base_seed,
        config_toml,
        config: resolved.echo.clone(),
        duration_secs: started.elapsed().as_secs_f64(),
        methods,
        outputs: outputs.iter().chain(std::iter::once(&echo_path)).cloned().collect(),
        summary,
    };
    let manifest_path = resolved.output_dir.join(format!("{}_manifest.json", command.name()));
    manifest.write(&manifest_path)?;
    Ok(CommandReport {
        outputs,
        manifest: manifest_path,
    })
}

type Emitted = (Vec<PathBuf>, Vec<String>, serde_json::Value);

fn simulate(cfg: &ResolvedConfig) -> Result<Emitted> {
    let run = run_replications(
        &cfg.experiment,
        &cfg.hypothesis,
        cfg.n_reps,
        cfg.seed,
        cfg.include_valid_im,
        cfg.settings,
    )?;
    let rows: Vec<Vec<String>> = run
        .values_precise
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let valid = run
                .values_valid
                .as_ref()
                .map(|v| num(v[i].value()))
                .unwrap_or_default();
            vec![i.to_string(), num(p.value()), valid]
        })
        .collect();
    let path = cfg.output_dir.join("replications.csv");
    write_csv(&path, &["rep_index", "pi_precise", "pi_valid_lower"], &rows)?;
    let methods = run.methods.iter().map(|m| m.to_string()).collect();
    Ok((vec![path], methods, serde_json::Value::Null))
}

fn fc_rows(pairs: &[FcPair]) -> Vec<Vec<String>> {
    pairs
        .iter()
        .map(|p| {
            vec![
                num(p.alpha),
                num(p.exceed_freq.value()),
                num(p.std_err),
                p.is_violation.to_string(),
            ]
        })
        .collect()
}

const FC_HEADER: [&str; 4] = ["alpha", "exceed_freq", "std_err", "is_violation"];

fn diagnose(cfg: &ResolvedConfig) -> Result<Emitted> {
    let run = run_replications(
        &cfg.experiment,
        &cfg.hypothesis,
        cfg.n_reps,
        cfg.seed,
        cfg.include_valid_im,
        cfg.settings,
    )?;
    let precise = dominance_report(&run.values_precise, FIGURE_GRID)?;
    let valid = run
        .values_valid
        .as_ref()
        .map(|v| dominance_report(v, FIGURE_GRID))
        .transpose()?;
    let rows: Vec<Vec<String>> = precise
        .ecdf_grid
        .iter()
        .enumerate()
        .map(|(i, &(t, f))| {
            let fv = valid.as_ref().map(|r| num(r.ecdf_grid[i].1)).unwrap_or_default();
            vec![num(t), num(f), fv]
        })
        .collect();
    let dom_path = cfg.output_dir.join("dominance.csv");
    write_csv(&dom_path, &["t", "ecdf_precise", "ecdf_valid"], &rows)?;

    let pairs = find_fc_pairs(&run, &cfg.alpha_grid, Series::Precise)?;
    let fc_path = cfg.output_dir.join("fc_pairs.csv");
    write_csv(&fc_path, &FC_HEADER, &fc_rows(&pairs))?;
    let mut outputs = vec![dom_path, fc_path];

    let mut summary = json!({
        "precise": {
            "max_cdf_excess": precise.max_cdf_excess,
            "tolerance": precise.tolerance,
            "dominates_uniform": precise.dominates_uniform,
            "min_value": precise.min_value,
            "violations": pairs.iter().filter(|p| p.is_violation).count(),
        }
    });
    if let Some(valid) = valid {
        let valid_pairs = find_fc_pairs(&run, &cfg.alpha_grid, Series::Valid)?;
        let path = cfg.output_dir.join("fc_pairs_valid.csv");
        write_csv(&path, &FC_HEADER, &fc_rows(&valid_pairs))?;
        outputs.push(path);
        summary["valid"] = json!({
            "max_cdf_excess": valid.max_cdf_excess,
            "min_value": valid.min_value,
            "violations": valid_pairs.iter().filter(|p| p.is_violation).count(),
        });
    }
    let methods = run.methods.iter().map(|m| m.to_string()).collect();
    Ok((outputs, methods, summary))
}

fn figure(cfg: &ResolvedConfig) -> Result<Emitted> {
    let preset = cfg
        .preset
        .ok_or_else(|| Error::InvalidConfig(vec!["preset: the figure command needs a preset".to_string()]))?;
    let run = run_replications(&cfg.experiment, &cfg.hypothesis, cfg.n_reps, cfg.seed, true, cfg.settings)?;
    let rows = figure_rows(&run);
    let stem = preset.figure_stem();
    let mut outputs = Vec::new();
    match cfg.format {
        OutputFormat::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![num(r.t), num(r.cdf_bayes), num(r.cdf_validim)])
                .collect();
            let path = cfg.output_dir.join(format!("{stem}.csv"));
            write_csv(&path, &["t", "cdf_bayes", "cdf_validim"], &table)?;
            outputs.push(path);
        }
        OutputFormat::Svg => {
            let title = format!("{preset}: posterior (black) and valid-IM lower (red) CDFs");
            let path = cfg.output_dir.join(format!("{stem}.svg"));
            write_atomic(&path, figure_svg(&title, &rows).as_bytes())?;
            outputs.push(path);
        }
    }
    let mut methods: Vec<String> = run.methods.iter().map(|m| m.to_string()).collect();
    if preset == Preset::Example2 {
        let sweep = example2_theta_sweep(&DEFAULT_THETA_SWEEP, cfg.n_reps, cfg.seed, cfg.settings)?;
        let table: Vec<Vec<String>> = sweep
            .iter()
            .map(|r| {
                vec![
                    num(r.theta),
                    num(r.frac_bayes_ge_099),
                    num(r.frac_bayes_eq_1),
                    num(r.mean_bayes),
                    num(r.frac_valid_eq_0),
                    num(r.mean_valid),
                ]
            })
            .collect();
        let path = cfg.output_dir.join(format!("{stem}_theta_sweep.csv"));
        write_csv(
            &path,
            &["theta", "frac_bayes_ge_099", "frac_bayes_eq_1", "mean_bayes", "frac_valid_eq_0", "mean_valid"],
            &table,
        )?;
        outputs.push(path);
        methods.sort();
        methods.dedup();
    }
    Ok((outputs, methods, serde_json::Value::Null))
}

fn noloco(cfg: &ResolvedConfig) -> Result<Emitted> {
    let vartheta = cfg
        .vartheta
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig(vec!["vartheta: required for the noloco command".to_string()]))?;
    let cert = noloco_check(&cfg.hypothesis, vartheta, cfg.region.as_ref(), cfg.noloco_samples, cfg.seed)?;
    let d = vartheta.len();
    let mut header = vec!["is_noloco".to_string()];
    header.extend((1..=d).map(|i| format!("supporting_vector_{i}")));
    header.extend(["gap_measure_estimate", "gap_std_err", "violations"].map(String::from));
    let mut row = vec![cert.is_noloco.to_string()];
    match &cert.supporting_vector {
        Some(g) => row.extend(g.iter().map(|v| num(*v))),
        None => row.extend(std::iter::repeat(String::new()).take(d)),
    }
    row.extend([num(cert.gap_measure_estimate), num(cert.gap_std_err), cert.violations.to_string()]);
    let path = cfg.output_dir.join("noloco.csv");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &header_refs, &[row])?;
    let summary = json!({ "n_samples": cert.n_samples, "lin_escapes": cert.lin_escapes });
    Ok((vec![path], vec!["noloco_sampling".to_string()], summary))
}
