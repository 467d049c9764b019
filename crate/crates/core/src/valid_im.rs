//! Possibilistic inferential model built from the relative likelihood.
//!
//! The contour is `π_x(θ) = Pr_θ{R(X, θ) ≤ R(x, θ)}` with
//! `R(x, θ) = L_x(θ) / sup_ϑ L_x(ϑ)`. Upper probabilities are suprema of the
//! contour over a set, lower probabilities are `1 − upper(Hᶜ)`.
//!
//! For the unconstrained Gaussian the contour is `1 − F_{χ²_D}` of the
//! Mahalanobis distance, so a supremum over a set is the contour at the
//! Mahalanobis-nearest point of that set. Half-spaces and balls have exact
//! projections; everything else goes through a ray search from the maximum
//! likelihood point.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianExperiment, SeedSpec};
use crate::hypothesis::Hypothesis;
use crate::optim::nelder_mead;
use crate::special::{chi2_sf, phi, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ContourKind {
    GaussianUnconstrained,
    /// One-dimensional mean with parameter space `[lower_bound, ∞)`.
    GaussianHalflineConstrained { lower_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMethod {
    Projection,
    Search,
}

impl SupMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            SupMethod::Projection => "valid_im_projection",
            SupMethod::Search => "valid_im_search",
        }
    }
}

/// A supremum of the contour over a set, with the route that produced it.
/// Search results are attained at a feasible point, hence lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupValue {
    pub value: Probability,
    pub method: SupMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerUpperPair {
    pub lower: Probability,
    pub upper: Probability,
}

#[derive(Debug, Clone)]
pub struct PossibilityContour {
    kind: ContourKind,
    experiment: GaussianExperiment,
    observed_x: Vec<f64>,
}

impl PossibilityContour {
    pub fn unconstrained(experiment: &GaussianExperiment, x: &[f64]) -> Result<Self> {
        experiment.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("observation must be finite"));
        }
        Ok(PossibilityContour {
            kind: ContourKind::GaussianUnconstrained,
            experiment: experiment.clone(),
            observed_x: x.to_vec(),
        })
    }

    pub fn halfline_constrained(experiment: &GaussianExperiment, lower_bound: f64, x: f64) -> Result<Self> {
        if experiment.dim() != 1 {
            return Err(Error::domain("the constrained contour is one-dimensional"));
        }
        if !lower_bound.is_finite() || !x.is_finite() {
            return Err(Error::domain("lower bound and observation must be finite"));
        }
        Ok(PossibilityContour {
            kind: ContourKind::GaussianHalflineConstrained { lower_bound },
            experiment: experiment.clone(),
            observed_x: vec![x],
        })
    }

    pub fn kind(&self) -> ContourKind {
        self.kind
    }

    pub fn observed_x(&self) -> &[f64] {
        &self.observed_x
    }

    pub fn experiment(&self) -> &GaussianExperiment {
        &self.experiment
    }

    fn dim(&self) -> usize {
        self.experiment.dim()
    }

    fn sd(&self) -> f64 {
        self.experiment.sigma()[(0, 0)].sqrt()
    }

    /// Maximum likelihood point, where the contour equals 1.
    pub fn mle(&self) -> Vec<f64> {
        match self.kind {
            ContourKind::GaussianUnconstrained => self.observed_x.clone(),
            ContourKind::GaussianHalflineConstrained { lower_bound } => {
                vec![self.observed_x[0].max(lower_bound)]
            }
        }
    }

    fn in_parameter_space(&self, theta: &[f64]) -> bool {
        match self.kind {
            ContourKind::GaussianUnconstrained => true,
            ContourKind::GaussianHalflineConstrained { lower_bound } => theta[0] >= lower_bound,
        }
    }

    pub fn contour(&self, theta: &[f64]) -> Result<Probability> {
        self.experiment.check_dim(theta)?;
        if theta.iter().any(|v| v.is_nan()) {
            return Err(Error::domain("contour at NaN"));
        }
        if !self.in_parameter_space(theta) {
            return Err(Error::domain(format!("{theta:?} is outside the parameter space")));
        }
        Ok(Probability::clamped(self.contour_unchecked(theta)))
    }

    fn contour_unchecked(&self, theta: &[f64]) -> f64 {
        match self.kind {
            ContourKind::GaussianUnconstrained => {
                let m = self.experiment.mahalanobis_sq_unchecked(&self.observed_x, theta);
                contour_from_mahalanobis(m, self.dim())
            }
            ContourKind::GaussianHalflineConstrained { lower_bound } => {
                let sd = self.sd();
                let y = (self.observed_x[0] - lower_bound) / sd;
                let a = (theta[0] - lower_bound) / sd;
                halfline_contour(y, a)
            }
        }
    }

    /// Monte Carlo evaluation of `Pr_θ{R(X, θ) ≤ R(x, θ)}` straight from the
    /// relative likelihood. Returns the estimate and its standard error.
    pub fn contour_mc(&self, theta: &[f64], n: usize, seed: SeedSpec) -> Result<(Probability, f64)> {
        self.contour(theta)?;
        if n == 0 {
            return Err(Error::domain("need at least one draw"));
        }
        let rel_lik = |x: &[f64]| -> f64 {
            let mle = match self.kind {
                ContourKind::GaussianUnconstrained => x.to_vec(),
                ContourKind::GaussianHalflineConstrained { lower_bound } => vec![x[0].max(lower_bound)],
            };
            let at_theta = self.experiment.log_likelihood(x, theta).unwrap_or(f64::NEG_INFINITY);
            let at_mle = self.experiment.log_likelihood(x, &mle).unwrap_or(0.0);
            (at_theta - at_mle).exp()
        };
        let observed = rel_lik(&self.observed_x);
        let mut normals = seed.normals();
        let mut hits = 0usize;
        for _ in 0..n {
            let x = self.experiment.draw_around(theta, &mut normals);
            if rel_lik(&x) <= observed {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        Ok((Probability::clamped(p), (p * (1.0 - p) / n as f64).sqrt()))
    }

    fn check_hypothesis(&self, h: &Hypothesis) -> Result<()> {
        match h.dim() {
            Some(d) if d != self.dim() => Err(Error::domain(format!(
                "hypothesis is {d}-dimensional, contour is {}-dimensional",
                self.dim()
            ))),
            _ => Ok(()),
        }
    }

    /// `sup_{θ ∈ H} π_x(θ)` with exact projections where available.
    pub fn upper_prob(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<Probability> {
        Ok(self.upper_detail(h, opt_budget, seed)?.value)
    }

    pub fn upper_detail(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<SupValue> {
        self.check_hypothesis(h)?;
        if let Hypothesis::Union(a, b) = h {
            let left = self.upper_detail(a, opt_budget, seed.derive(0))?;
            let right = self.upper_detail(b, opt_budget, seed.derive(1))?;
            let method = left.method.max(right.method);
            let value = if left.value >= right.value { left.value } else { right.value };
            return Ok(SupValue { value, method });
        }
        if let Some(v) = self.sup_exact(h) {
            return Ok(SupValue {
                value: Probability::clamped(v),
                method: SupMethod::Projection,
            });
        }
        self.upper_search(h, opt_budget, seed)
    }

    /// Forces the generic search even where a projection exists.
    pub fn upper_search(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<SupValue> {
        self.check_hypothesis(h)?;
        if opt_budget == 0 {
            return Err(Error::domain("opt_budget must be positive"));
        }
        let v = sup_search(self, h, opt_budget, seed);
        Ok(SupValue {
            value: Probability::clamped(v),
            method: SupMethod::Search,
        })
    }

    /// `1 − sup_{θ ∉ H} π_x(θ)`.
    pub fn lower_prob(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<Probability> {
        Ok(self.upper_prob(&h.complement(), opt_budget, seed)?.complement())
    }

    pub fn lower_detail(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<SupValue> {
        let up = self.upper_detail(&h.complement(), opt_budget, seed)?;
        Ok(SupValue {
            value: up.value.complement(),
            method: up.method,
        })
    }

    pub fn lower_search(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<Probability> {
        Ok(self.upper_search(&h.complement(), opt_budget, seed)?.value.complement())
    }

    pub fn lower_upper(&self, h: &Hypothesis, opt_budget: usize, seed: SeedSpec) -> Result<LowerUpperPair> {
        Ok(LowerUpperPair {
            lower: self.lower_prob(h, opt_budget, seed.derive(0))?,
            upper: self.upper_prob(h, opt_budget, seed.derive(1))?,
        })
    }

    /// Exact supremum when the set has a closed-form nearest point.
    fn sup_exact(&self, h: &Hypothesis) -> Option<f64> {
        match h {
            Hypothesis::FullSpace => return Some(1.0),
            Hypothesis::Complement(inner) if matches!(**inner, Hypothesis::FullSpace) => return Some(0.0),
            _ => {}
        }
        if self.dim() == 1 {
            let (lo, hi) = as_interval(h)?;
            let lo = match self.kind {
                ContourKind::GaussianHalflineConstrained { lower_bound } => lo.max(lower_bound),
                ContourKind::GaussianUnconstrained => lo,
            };
            if lo > hi {
                return Some(0.0);
            }
            let nearest = self.mle()[0].clamp(lo, hi);
            return Some(self.contour_unchecked(&[nearest]));
        }
        let x = &self.observed_x;
        let d = self.dim();
        let m = match h {
            Hypothesis::HalfSpace(hs) => {
                let margin = hs.margin(x);
                if margin > 0.0 {
                    0.0
                } else {
                    margin * margin / self.experiment.quadratic_form(hs.normal())
                }
            }
            Hypothesis::BallComplement(b) => {
                if b.dist_sq(x) >= b.radius() * b.radius() {
                    0.0
                } else {
                    mahalanobis_to_sphere(&self.experiment, &offset(x, b.center()), b.radius(), true)
                }
            }
            Hypothesis::Complement(inner) => match &**inner {
                Hypothesis::HalfSpace(hs) => {
                    let margin = hs.margin(x);
                    if margin <= 0.0 {
                        0.0
                    } else {
                        margin * margin / self.experiment.quadratic_form(hs.normal())
                    }
                }
                Hypothesis::BallComplement(b) => {
                    if b.dist_sq(x) <= b.radius() * b.radius() {
                        0.0
                    } else {
                        mahalanobis_to_sphere(&self.experiment, &offset(x, b.center()), b.radius(), false)
                    }
                }
                _ => return None,
            },
            _ => return None,
        };
        Some(contour_from_mahalanobis(m, d))
    }
}

fn offset(x: &[f64], c: &[f64]) -> Vec<f64> {
    x.iter().zip(c).map(|(a, b)| a - b).collect()
}

fn contour_from_mahalanobis(m: f64, dim: usize) -> f64 {
    chi2_sf(m.max(0.0), dim as u32).map(|p| p.value()).unwrap_or(0.0)
}

/// Closure of a one-dimensional set that is a single interval.
fn as_interval(h: &Hypothesis) -> Option<(f64, f64)> {
    let (inf, neg_inf) = (f64::INFINITY, f64::NEG_INFINITY);
    match h {
        Hypothesis::HalfLineConstrained(l) => Some((l.threshold(), inf)),
        Hypothesis::HalfSpace(hs) => {
            let (g, a) = (hs.normal()[0], hs.anchor()[0]);
            Some(if g > 0.0 { (a, inf) } else { (neg_inf, a) })
        }
        Hypothesis::Complement(inner) => match &**inner {
            Hypothesis::HalfLineConstrained(l) => Some((neg_inf, l.threshold())),
            Hypothesis::HalfSpace(hs) => {
                let (g, a) = (hs.normal()[0], hs.anchor()[0]);
                Some(if g > 0.0 { (neg_inf, a) } else { (a, inf) })
            }
            Hypothesis::BallComplement(b) => Some((b.center()[0] - b.radius(), b.center()[0] + b.radius())),
            _ => None,
        },
        _ => None,
    }
}

/// Contour of the half-line-constrained mean in standardized units:
/// `y = (x − lb)/σ`, `a = (θ − lb)/σ ≥ 0`.
///
/// With `T = −2 log R`, `T(y, a) = (y − a)²` for `y ≥ 0` and `a² − 2ay` for
/// `y < 0`. Under `Y ~ N(a, 1)` the event `T ≥ t` is
/// `{Y ≤ a − √t} ∪ {Y ≥ a + √t}` when `t ≤ a²` and
/// `{Y ≤ (a² − t)/(2a)} ∪ {Y ≥ a + √t}` otherwise.
pub(crate) fn halfline_contour(y: f64, a: f64) -> f64 {
    let a = a.max(0.0);
    let t = if y >= 0.0 { (y - a) * (y - a) } else { a * a - 2.0 * a * y };
    if t <= 0.0 {
        return 1.0;
    }
    let root = t.sqrt();
    if a == 0.0 {
        return phi(-root);
    }
    if t <= a * a {
        2.0 * phi(-root)
    } else {
        phi(-(a * a + t) / (2.0 * a)) + phi(-root)
    }
}

/// Smallest `(θ − x)ᵀΣ⁻¹(θ − x)` over the sphere `‖θ − c‖ = r`, given
/// `v = x − c`. `from_inside` selects the exterior problem (`‖v‖ < r`,
/// nearest point with `‖θ − c‖ ≥ r`); otherwise `‖v‖ > r` and the nearest
/// point of the closed ball is sought. Both reduce to the same secular
/// equation on the eigenbasis of Σ⁻¹.
fn mahalanobis_to_sphere(exp: &GaussianExperiment, v: &[f64], r: f64, from_inside: bool) -> f64 {
    let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if let Some(s2) = exp.isotropic_variance() {
        return (r - vnorm).powi(2) / s2;
    }
    let eig = SymmetricEigen::new(exp.sigma().clone());
    let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|s| 1.0 / s).collect();
    let vt: Vec<f64> = (0..lambdas.len())
        .map(|i| (0..v.len()).map(|k| eig.eigenvectors[(k, i)] * v[k]).sum())
        .collect();
    let norm_u = |mu: f64, skip: &dyn Fn(usize) -> bool| -> f64 {
        lambdas
            .iter()
            .zip(&vt)
            .enumerate()
            .filter(|(i, _)| !skip(*i))
            .map(|(_, (l, w))| (l * w / (l - mu)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let dist = |mu: f64, skip: &dyn Fn(usize) -> bool| -> f64 {
        lambdas
            .iter()
            .zip(&vt)
            .enumerate()
            .filter(|(i, _)| !skip(*i))
            .map(|(_, (l, w))| l * (mu * w / (l - mu)).powi(2))
            .sum()
    };
    let none = |_: usize| false;
    let bisect = |mut lo: f64, mut hi: f64, skip: &dyn Fn(usize) -> bool| -> f64 {
        // norm_u increases in mu on the bracket.
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_u(mid, skip) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    if !from_inside {
        let mut lo = -1.0;
        while norm_u(lo, &none) >= r {
            lo *= 2.0;
        }
        let mu = bisect(lo, 0.0, &none);
        return dist(mu, &none);
    }

    let lmin = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = lambdas.iter().cloned().fold(0.0, f64::max);
    let in_min_group = |i: usize| lambdas[i] - lmin <= 1e-12 * lmax;
    let min_mass: f64 = (0..lambdas.len()).filter(|&i| in_min_group(i)).map(|i| vt[i] * vt[i]).sum();
    if min_mass > 1e-28 * vnorm.max(1e-300).powi(2) {
        let mu = bisect(0.0, lmin, &none);
        return dist(mu, &none);
    }
    // The minimal-eigenvalue directions carry no component of v.
    let rest_norm = norm_u(lmin, &in_min_group);
    if rest_norm >= r {
        let mu = bisect(0.0, lmin, &in_min_group);
        return dist(mu, &in_min_group);
    }
    let tau_sq = r * r - rest_norm * rest_norm;
    dist(lmin, &in_min_group) + lmin * tau_sq
}

const MARCH_STEPS: usize = 64;
const BISECT_STEPS: usize = 60;
const CANDIDATE_RAYS: usize = 8;
const REFINED_STARTS: usize = 3;

/// Generic supremum: sample around the maximum likelihood point in whitened
/// coordinates, find where rays through feasible samples first enter the set,
/// then refine the ray direction with Nelder–Mead. Along any ray the contour
/// decreases, so the first feasible point on a ray is the best point on it.
fn sup_search(pc: &PossibilityContour, h: &Hypothesis, budget: usize, seed: SeedSpec) -> f64 {
    let center = pc.mle();
    let d = pc.dim();
    let exp = &pc.experiment;
    let feasible = |theta: &[f64]| h.contains_unchecked(theta) && pc.in_parameter_space(theta);
    if feasible(&center) {
        return 1.0;
    }

    let to_theta = |w: &[f64], out: &mut [f64]| exp.affine_into(&center, w, out);
    let mut theta = vec![0.0; d];

    // Phase 1: scale-ladder sampling.
    let n_samples = (budget / 2).max(1);
    let mut normals = seed.derive(0).normals();
    let mut z = vec![0.0; d];
    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    for i in 0..n_samples {
        normals.fill(&mut z);
        let scale = 2f64.powi((i % 8) as i32 - 2);
        let w: Vec<f64> = z.iter().map(|v| v * scale).collect();
        to_theta(&w, &mut theta);
        if feasible(&theta) {
            let radius = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            found.push((radius, w));
        }
    }
    if found.is_empty() {
        return 0.0;
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r_max = found.last().map(|f| f.0).unwrap_or(1.0);

    // First feasible radius along unit direction `u`, searching (0, limit].
    let entry = |u: &[f64], limit: f64| -> Option<f64> {
        let mut p = vec![0.0; d];
        let mut at = |r: f64| -> bool {
            let w: Vec<f64> = u.iter().map(|c| c * r).collect();
            to_theta(&w, &mut p);
            feasible(&p)
        };
        let step = limit / MARCH_STEPS as f64;
        let k = (1..=MARCH_STEPS).find(|&k| at(k as f64 * step))?;
        let (mut lo, mut hi) = ((k - 1) as f64 * step, k as f64 * step);
        for _ in 0..BISECT_STEPS {
            let mid = 0.5 * (lo + hi);
            if at(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };
    let normalize = |v: &[f64]| -> Option<Vec<f64>> {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        (n > 0.0 && n.is_finite()).then(|| v.iter().map(|c| c / n).collect())
    };
    let value_at = |u: &[f64], r: f64| -> f64 {
        let w: Vec<f64> = u.iter().map(|c| c * r).collect();
        let mut p = vec![0.0; d];
        to_theta(&w, &mut p);
        pc.contour_unchecked(&p)
    };

    let mut best = 0.0f64;
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    for (radius, w) in found.iter().take(CANDIDATE_RAYS) {
        if let Some(u) = normalize(w) {
            if let Some(r) = entry(&u, *radius) {
                best = best.max(value_at(&u, r));
                starts.push((r, u));
            }
        }
    }
    if d == 1 {
        for u in [[1.0], [-1.0]] {
            if let Some(r) = entry(&u, r_max) {
                best = best.max(value_at(&u, r));
            }
        }
        return best;
    }

    // Phase 2: direction refinement. Only meaningful when the contour is a
    // function of whitened radius, which holds for the unconstrained kind.
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let used = n_samples + CANDIDATE_RAYS;
    let remaining = budget.saturating_sub(used);
    let per_start = remaining / REFINED_STARTS;
    if per_start > d + 1 {
        for (r0, u0) in starts.iter().take(REFINED_STARTS) {
            let limit = r0.max(r_max);
            let mut objective = |v: &[f64]| -> f64 {
                normalize(v).and_then(|u| entry(&u, limit)).unwrap_or(f64::INFINITY)
            };
            let m = nelder_mead(&mut objective, u0, 0.1, per_start, 1e-15);
            if m.value.is_finite() {
                if let Some(u) = normalize(&m.point) {
                    best = best.max(value_at(&u, m.value));
                }
            }
        }
    }
    best
}
