//! Precise (additive) posterior probabilities `Π_x(H)`.
//!
//! The flat-prior posterior is `N_D(x, Σ)`. Closed forms cover half-spaces,
//! isotropic ball complements and the half-line-constrained normal mean;
//! everything else is simulated.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianExperiment, SeedSpec};
use crate::hypothesis::{BallComplement, HalfLineConstrained, HalfSpace, Hypothesis};
use crate::special::{noncentral_chi2_cdf, phi, Probability, SeriesTolerance};

/// Smallest Monte Carlo sample the engine accepts.
pub const MIN_DRAWS: usize = 1_000;

/// Below this normal-CDF argument the truncated-normal ratio switches to the
/// Mills-ratio expansion.
const MILLS_SWITCH: f64 = -38.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMethod {
    ClosedFormHalfspace,
    ClosedFormBall,
    ClosedFormTrunc1d { mills_ratio: bool },
    MonteCarlo,
    ImportanceWeighted,
}

impl PosteriorMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            PosteriorMethod::ClosedFormHalfspace => "closed_form_halfspace",
            PosteriorMethod::ClosedFormBall => "closed_form_ball",
            PosteriorMethod::ClosedFormTrunc1d { mills_ratio: false } => "closed_form_trunc1d",
            PosteriorMethod::ClosedFormTrunc1d { mills_ratio: true } => "closed_form_trunc1d_mills",
            PosteriorMethod::MonteCarlo => "monte_carlo",
            PosteriorMethod::ImportanceWeighted => "importance_weighted",
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(
            self,
            PosteriorMethod::ClosedFormHalfspace
                | PosteriorMethod::ClosedFormBall
                | PosteriorMethod::ClosedFormTrunc1d { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorProbEstimate {
    pub value: Probability,
    pub method: PosteriorMethod,
    /// Zero for closed forms.
    pub std_err: f64,
    pub n_draws: usize,
}

impl PosteriorProbEstimate {
    fn exact(value: f64, method: PosteriorMethod) -> Self {
        PosteriorProbEstimate {
            value: Probability::clamped(value),
            method,
            std_err: 0.0,
            n_draws: 0,
        }
    }

    fn binomial(hits: usize, n: usize) -> Self {
        let v = hits as f64 / n as f64;
        PosteriorProbEstimate {
            value: Probability::clamped(v),
            method: PosteriorMethod::MonteCarlo,
            std_err: (v * (1.0 - v) / n as f64).sqrt(),
            n_draws: n,
        }
    }

    /// `1 − value` with the same method and error.
    pub fn complement(self) -> Self {
        PosteriorProbEstimate {
            value: self.value.complement(),
            ..self
        }
    }
}

/// `Π_x{θ : gᵀ(θ − a) > 0} = 1 − Φ(−gᵀ(x − a) / √(gᵀΣg))`.
pub fn posterior_halfspace(
    exp: &GaussianExperiment,
    x: &[f64],
    h: &HalfSpace,
) -> Result<PosteriorProbEstimate> {
    exp.check_dim(x)?;
    exp.check_dim(h.normal())?;
    let scale_sq = exp.quadratic_form(h.normal());
    if !(scale_sq > 0.0) {
        return Err(Error::Singular(format!("g'Σg = {scale_sq} is not positive")));
    }
    let z = -h.margin(x) / scale_sq.sqrt();
    Ok(PosteriorProbEstimate::exact(phi(-z), PosteriorMethod::ClosedFormHalfspace))
}

/// `Π_x{‖θ − c‖ > r}`. For `Σ = σ²I` this is
/// `1 − F_{χ²_D(‖x − c‖²/σ²)}(r²/σ²)`; otherwise it is simulated with `n`
/// draws from `seed`.
pub fn posterior_ball_complement(
    exp: &GaussianExperiment,
    x: &[f64],
    h: &BallComplement,
    n: usize,
    seed: SeedSpec,
) -> Result<PosteriorProbEstimate> {
    exp.check_dim(x)?;
    exp.check_dim(h.center())?;
    match exp.isotropic_variance() {
        Some(s2) => {
            let ncp = h.dist_sq(x) / s2;
            let cdf = noncentral_chi2_cdf(
                h.radius() * h.radius() / s2,
                exp.dim() as u32,
                ncp,
                SeriesTolerance::default(),
            )?;
            Ok(PosteriorProbEstimate::exact(1.0 - cdf.value(), PosteriorMethod::ClosedFormBall))
        }
        None => posterior_prob_mc(exp, x, &Hypothesis::BallComplement(h.clone()), n, seed),
    }
}

/// Proportion of `n` draws from `N_D(x, Σ)` that land in `h`. Two calls with
/// the same seed use the same draws.
pub fn posterior_prob_mc(
    exp: &GaussianExperiment,
    x: &[f64],
    h: &Hypothesis,
    n: usize,
    seed: SeedSpec,
) -> Result<PosteriorProbEstimate> {
    exp.check_dim(x)?;
    if let Some(d) = h.dim() {
        if d != exp.dim() {
            return Err(Error::domain("hypothesis dimension does not match experiment"));
        }
    }
    if n < MIN_DRAWS {
        return Err(Error::domain(format!("need at least {MIN_DRAWS} draws, got {n}")));
    }
    let d = exp.dim();
    let mut normals = seed.normals();
    let mut z = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let mut hits = 0usize;
    for _ in 0..n {
        normals.fill(&mut z);
        exp.affine_into(x, &z, &mut theta);
        if h.contains_unchecked(&theta) {
            hits += 1;
        }
    }
    Ok(PosteriorProbEstimate::binomial(hits, n))
}

/// Flat prior on `[lower_bound, ∞)` with unit-variance likelihood: the
/// posterior is `N(x, 1)` truncated to the parameter space and
/// `Π_x(H) = (1 − Φ(t − x)) / (1 − Φ(lb − x))`.
pub fn posterior_trunc_halfline(x: f64, h: &HalfLineConstrained) -> Result<PosteriorProbEstimate> {
    if !x.is_finite() {
        return Err(Error::domain(format!("observation must be finite, got {x}")));
    }
    let upper_arg = x - h.threshold();
    let lower_arg = x - h.lower_bound();
    if upper_arg >= MILLS_SWITCH {
        return Ok(PosteriorProbEstimate::exact(
            phi(upper_arg) / phi(lower_arg),
            PosteriorMethod::ClosedFormTrunc1d { mills_ratio: false },
        ));
    }
    let ratio = (log_phi_lower_tail(upper_arg) - log_phi_lower_tail(lower_arg)).exp();
    Ok(PosteriorProbEstimate::exact(
        ratio,
        PosteriorMethod::ClosedFormTrunc1d { mills_ratio: true },
    ))
}

/// `ln Φ(u)`, switching to the asymptotic Mills-ratio series
/// `Φ(−z) ≈ φ(z)/z · (1 − 1/z² + 3/z⁴ − 15/z⁶ + 105/z⁸)` below the switch point.
fn log_phi_lower_tail(u: f64) -> f64 {
    if u >= MILLS_SWITCH {
        return phi(u).ln();
    }
    let z = -u;
    let w = 1.0 / (z * z);
    let series = 1.0 - w * (1.0 - 3.0 * w * (1.0 - 5.0 * w * (1.0 - 7.0 * w)));
    -0.5 * z * z - (2.0 * std::f64::consts::PI).sqrt().ln() - z.ln() + series.ln()
}

/// Posterior under an arbitrary nonnegative prior weight, estimated by self-normalized importance sampling with proposal
/// `N_D(x, Σ)`:
/// `Σ w(θᵢ) 1[θᵢ ∈ H] / Σ w(θᵢ)`, standard error by the delta method.
pub fn posterior_weighted(
    exp: &GaussianExperiment,
    x: &[f64],
    h: &Hypothesis,
    prior_weight: &dyn Fn(&[f64]) -> f64,
    n: usize,
    seed: SeedSpec,
) -> Result<PosteriorProbEstimate> {
    exp.check_dim(x)?;
    if n < MIN_DRAWS {
        return Err(Error::domain(format!("need at least {MIN_DRAWS} draws, got {n}")));
    }
    let d = exp.dim();
    let mut normals = seed.normals();
    let mut z = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let mut weights = Vec::with_capacity(n);
    let mut inside = Vec::with_capacity(n);
    for _ in 0..n {
        normals.fill(&mut z);
        exp.affine_into(x, &z, &mut theta);
        let w = prior_weight(&theta);
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::domain(format!("prior weight {w} at {theta:?} is not finite and nonnegative")));
        }
        weights.push(w);
        inside.push(h.contains_unchecked(&theta));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePrior);
    }
    let hit: f64 = weights.iter().zip(&inside).filter(|(_, i)| **i).map(|(w, _)| w).sum();
    let p = hit / total;
    let var: f64 = weights
        .iter()
        .zip(&inside)
        .map(|(w, i)| {
            let r = if *i { 1.0 - p } else { -p };
            (w * r).powi(2)
        })
        .sum::<f64>()
        / (total * total);
    Ok(PosteriorProbEstimate {
        value: Probability::clamped(p),
        method: PosteriorMethod::ImportanceWeighted,
        std_err: var.sqrt(),
        n_draws: n,
    })
}

/// `Π_x(H)` by the best available route: closed forms where the hypothesis
/// and covariance allow, otherwise Monte Carlo with `n` draws.
///
/// A [`Hypothesis::HalfLineConstrained`] carries its parameter-space
/// constraint, so it is evaluated under the truncated posterior (with the
/// experiment's variance standardized away).
pub fn posterior_prob(
    exp: &GaussianExperiment,
    x: &[f64],
    h: &Hypothesis,
    n: usize,
    seed: SeedSpec,
) -> Result<PosteriorProbEstimate> {
    match h {
        Hypothesis::HalfSpace(hs) => posterior_halfspace(exp, x, hs),
        Hypothesis::BallComplement(b) => posterior_ball_complement(exp, x, b, n, seed),
        Hypothesis::HalfLineConstrained(l) => {
            if exp.dim() != 1 {
                return Err(Error::domain("half-line hypotheses need a one-dimensional experiment"));
            }
            exp.check_dim(x)?;
            let sd = exp.sigma()[(0, 0)].sqrt();
            let standardized = HalfLineConstrained::new(l.threshold() / sd, l.lower_bound() / sd)?;
            posterior_trunc_halfline(x[0] / sd, &standardized)
        }
        Hypothesis::FullSpace => {
            exp.check_dim(x)?;
            Ok(PosteriorProbEstimate::exact(1.0, PosteriorMethod::MonteCarlo))
        }
        Hypothesis::Complement(inner)
            if matches!(
                **inner,
                Hypothesis::HalfSpace(_) | Hypothesis::BallComplement(_) | Hypothesis::HalfLineConstrained(_)
            ) =>
        {
            Ok(posterior_prob(exp, x, inner, n, seed)?.complement())
        }
        _ => posterior_prob_mc(exp, x, h, n, seed),
    }
}
