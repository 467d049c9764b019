//! Replication engine and false-confidence analytics.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianExperiment, SeedSpec};
use crate::hypothesis::Hypothesis;
use crate::posterior::posterior_prob;
use crate::presets::Preset;
use crate::special::Probability;
use crate::valid_im::PossibilityContour;

pub const MIN_REPS: usize = 100;
pub const FIGURE_GRID: usize = 512;
/// Standard errors of separation required before a pair counts as a violation.
pub const FC_SEPARATION: f64 = 3.0;

/// Numerical budgets used inside each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicationSettings {
    /// Monte Carlo draws for posteriors without a closed form.
    pub posterior_draws: usize,
    /// Evaluation budget of the generic valid-IM search.
    pub opt_budget: usize,
}

impl Default for ReplicationSettings {
    fn default() -> Self {
        ReplicationSettings {
            posterior_draws: 4000,
            opt_budget: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationRun {
    pub experiment: GaussianExperiment,
    pub hypothesis: Hypothesis,
    pub n_reps: usize,
    pub seed: SeedSpec,
    pub values_precise: Vec<Probability>,
    pub values_valid: Option<Vec<Probability>>,
    /// Which numerical routes produced the values.
    pub methods: BTreeSet<&'static str>,
}

/// The contour matching the hypothesis' parameter space: half-line
/// hypotheses carry a lower bound on the mean.
pub fn contour_for(exp: &GaussianExperiment, h: &Hypothesis, x: &[f64]) -> Result<PossibilityContour> {
    let lower_bound = match h {
        Hypothesis::HalfLineConstrained(l) => Some(l.lower_bound()),
        Hypothesis::Complement(inner) => match &**inner {
            Hypothesis::HalfLineConstrained(l) => Some(l.lower_bound()),
            _ => None,
        },
        _ => None,
    };
    match lower_bound {
        Some(lb) => {
            exp.check_dim(x)?;
            PossibilityContour::halfline_constrained(exp, lb, x[0])
        }
        None => PossibilityContour::unconstrained(exp, x),
    }
}

type RepOutcome = (Probability, Option<Probability>, [Option<&'static str>; 2]);

fn one_replication(
    exp: &GaussianExperiment,
    h: &Hypothesis,
    rep: SeedSpec,
    include_valid_im: bool,
    settings: ReplicationSettings,
) -> Result<RepOutcome> {
    let x = exp.draw_around(exp.theta_star(), &mut rep.derive(0).normals());
    let post = posterior_prob(exp, &x, h, settings.posterior_draws, rep.derive(1))?;
    let (valid, valid_tag) = if include_valid_im {
        let detail = contour_for(exp, h, &x)?.lower_detail(h, settings.opt_budget, rep.derive(2))?;
        (Some(detail.value), Some(detail.method.tag()))
    } else {
        (None, None)
    };
    Ok((post.value, valid, [Some(post.method.tag()), valid_tag]))
}

/// Draws `Xᵢ ~ N(Θ, Σ)` for `i < n_reps` from index-derived seeds and
/// evaluates the posterior probability (and optionally the valid-IM lower
/// probability) of `h`. Results do not depend on the thread count.
pub fn run_replications(
    exp: &GaussianExperiment,
    h: &Hypothesis,
    n_reps: usize,
    seed: SeedSpec,
    include_valid_im: bool,
    settings: ReplicationSettings,
) -> Result<ReplicationRun> {
    if n_reps < MIN_REPS {
        return Err(Error::precondition(format!("n_reps must be at least {MIN_REPS}, got {n_reps}")));
    }
    if let Some(d) = h.dim() {
        if d != exp.dim() {
            return Err(Error::domain(format!(
                "hypothesis is {d}-dimensional, experiment is {}-dimensional",
                exp.dim()
            )));
        }
    }
    let outcomes: Vec<Result<RepOutcome>> = (0..n_reps)
        .into_par_iter()
        .map(|i| one_replication(exp, h, seed.derive(i as u64), include_valid_im, settings))
        .collect();

    let mut values_precise = Vec::with_capacity(n_reps);
    let mut values_valid = include_valid_im.then(|| Vec::with_capacity(n_reps));
    let mut methods = BTreeSet::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        let (p, v, tags) = outcome.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?;
        values_precise.push(p);
        if let (Some(list), Some(v)) = (values_valid.as_mut(), v) {
            list.push(v);
        }
        methods.extend(tags.into_iter().flatten());
    }
    Ok(ReplicationRun {
        experiment: exp.clone(),
        hypothesis: h.clone(),
        n_reps,
        seed,
        values_precise,
        values_valid,
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// `(t, F̂(t))` on a uniform grid over `[0, 1]`.
    pub ecdf_grid: Vec<(f64, f64)>,
    /// `max_t F̂(t) − t` over the grid.
    pub max_cdf_excess: f64,
    /// `min_t F̂(t) − t` over the grid; negative when the CDF dips below the
    /// identity somewhere.
    pub min_cdf_gap: f64,
    pub min_value: Probability,
    pub tolerance: f64,
    pub dominates_uniform: bool,
}

impl DominanceReport {
    /// Whether `F̂(t) < t − margin` at some grid point.
    pub fn strictly_below(&self, margin: f64) -> bool {
        self.ecdf_grid.iter().any(|&(t, f)| f < t - margin)
    }
}

/// One-sided 95% Kolmogorov band plus a small slack.
pub fn dominance_tolerance(n: usize) -> f64 {
    1.36 / (n as f64).sqrt() + 0.001
}

/// Uniform grid of `size` points from 0 to 1 inclusive.
pub fn unit_grid(size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..size).map(|i| i as f64 / (size - 1) as f64).collect(),
    }
}

fn sorted_values(values: &[Probability]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().map(|p| p.value()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Right-continuous empirical CDF `#{v ≤ t}/n` evaluated on `grid`.
pub fn ecdf_on_grid(values: &[Probability], grid: &[f64]) -> Vec<f64> {
    let sorted = sorted_values(values);
    let n = sorted.len().max(1) as f64;
    grid.iter()
        .map(|&t| sorted.partition_point(|&v| v <= t) as f64 / n)
        .collect()
}

pub fn dominance_report(values: &[Probability], grid_size: usize) -> Result<DominanceReport> {
    if values.is_empty() {
        return Err(Error::precondition("dominance report needs at least one value"));
    }
    if grid_size == 0 {
        return Err(Error::domain("grid_size must be positive"));
    }
    let grid = unit_grid(grid_size);
    let cdf = ecdf_on_grid(values, &grid);
    let ecdf_grid: Vec<(f64, f64)> = grid.into_iter().zip(cdf).collect();
    let excess = ecdf_grid.iter().map(|&(t, f)| f - t);
    let max_cdf_excess = excess.clone().fold(f64::NEG_INFINITY, f64::max);
    let min_cdf_gap = excess.fold(f64::INFINITY, f64::min);
    let min_value = values.iter().copied().fold(Probability::ONE, |a, b| if b < a { b } else { a });
    let tolerance = dominance_tolerance(values.len());
    Ok(DominanceReport {
        ecdf_grid,
        max_cdf_excess,
        min_cdf_gap,
        min_value,
        tolerance,
        dominates_uniform: max_cdf_excess <= tolerance,
    })
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical CDF and the
/// uniform CDF on `[0, 1]`, evaluated exactly at the jumps.
pub fn ks_uniform(values: &[Probability]) -> f64 {
    let sorted = sorted_values(values);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let above = (i + 1) as f64 / n - v;
            let below = v - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FcPair {
    pub alpha: f64,
    /// Estimate of `Pr{value ≥ 1 − α}`.
    pub exceed_freq: Probability,
    pub std_err: f64,
    pub is_violation: bool,
}

/// Which value series of a run to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Precise,
    Valid,
}

/// Exceedance frequencies of `values` at each `1 − α`, flagging pairs whose
/// frequency exceeds `α` by more than three binomial standard errors.
pub fn fc_pairs_from_values(values: &[Probability], alpha_grid: &[f64]) -> Result<Vec<FcPair>> {
    if values.is_empty() {
        return Err(Error::precondition("no values to analyze"));
    }
    let n = values.len() as f64;
    alpha_grid
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let cut = 1.0 - alpha;
            let hits = values.iter().filter(|p| p.value() >= cut).count();
            let freq = hits as f64 / n;
            let std_err = (freq * (1.0 - freq) / n).sqrt();
            Ok(FcPair {
                alpha,
                exceed_freq: Probability::clamped(freq),
                std_err,
                is_violation: freq - FC_SEPARATION * std_err > alpha,
            })
        })
        .collect()
}

/// False-confidence pairs of a run. Only meaningful for hypotheses that are
/// false at the true parameter.
pub fn find_fc_pairs(run: &ReplicationRun, alpha_grid: &[f64], series: Series) -> Result<Vec<FcPair>> {
    if !run.hypothesis.is_false_at(run.experiment.theta_star())? {
        return Err(Error::precondition(format!(
            "hypothesis {} is true at theta_star; false confidence concerns false hypotheses",
            run.hypothesis.name()
        )));
    }
    let values = match series {
        Series::Precise => &run.values_precise,
        Series::Valid => run
            .values_valid
            .as_ref()
            .ok_or_else(|| Error::precondition("run has no valid-IM values"))?,
    };
    fc_pairs_from_values(values, alpha_grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Figure2Row {
    pub t: f64,
    pub cdf_bayes: f64,
    pub cdf_validim: f64,
}

/// Paired empirical CDFs of posterior and valid-IM lower probabilities on a
/// 512-point grid.
pub fn figure2_data(
    preset: Preset,
    example2_theta: Option<f64>,
    n_reps: usize,
    seed: SeedSpec,
    settings: ReplicationSettings,
) -> Result<(Vec<Figure2Row>, ReplicationRun)> {
    let (exp, h) = preset.build(example2_theta)?;
    let run = run_replications(&exp, &h, n_reps, seed, true, settings)?;
    let rows = figure_rows(&run);
    Ok((rows, run))
}

pub fn figure_rows(run: &ReplicationRun) -> Vec<Figure2Row> {
    let grid = unit_grid(FIGURE_GRID);
    let bayes = ecdf_on_grid(&run.values_precise, &grid);
    let valid = run
        .values_valid
        .as_ref()
        .map(|v| ecdf_on_grid(v, &grid))
        .unwrap_or_else(|| vec![f64::NAN; grid.len()]);
    grid.iter()
        .zip(bayes.iter().zip(&valid))
        .map(|(&t, (&b, &v))| Figure2Row {
            t,
            cdf_bayes: b,
            cdf_validim: v,
        })
        .collect()
}

pub const DEFAULT_THETA_SWEEP: [f64; 8] = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0];

/// Summary of Example 2 at one true mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaSweepRow {
    pub theta: f64,
    /// Fraction of replications with posterior probability of `H` at least 0.99.
    pub frac_bayes_ge_099: f64,
    pub frac_bayes_eq_1: f64,
    pub mean_bayes: f64,
    pub frac_valid_eq_0: f64,
    pub mean_valid: f64,
}

/// Example 2 across several true means, sharing one seed.
pub fn example2_theta_sweep(
    thetas: &[f64],
    n_reps: usize,
    seed: SeedSpec,
    settings: ReplicationSettings,
) -> Result<Vec<ThetaSweepRow>> {
    thetas
        .iter()
        .map(|&theta| {
            let (exp, h) = Preset::Example2.build(Some(theta))?;
            let run = run_replications(&exp, &h, n_reps, seed, true, settings)?;
            let n = run.n_reps as f64;
            let frac = |vals: &[Probability], pred: &dyn Fn(f64) -> bool| {
                vals.iter().filter(|p| pred(p.value())).count() as f64 / n
            };
            let mean = |vals: &[Probability]| vals.iter().map(|p| p.value()).sum::<f64>() / n;
            let valid = run.values_valid.as_deref().unwrap_or(&[]);
            Ok(ThetaSweepRow {
                theta,
                frac_bayes_ge_099: frac(&run.values_precise, &|v| v >= 0.99),
                frac_bayes_eq_1: frac(&run.values_precise, &|v| v >= 1.0),
                mean_bayes: mean(&run.values_precise),
                frac_valid_eq_0: frac(valid, &|v| v <= 0.0),
                mean_valid: mean(valid),
            })
        })
        .collect()
}
