//! Certificates that a set `G = Hᶜ` is non-linear locally convex at a boundary
//! point `ϑ`: a supporting hyperplane exists there and `H` has positive
//! measure on the side of that hyperplane containing `G`.
//!
//! With outward normal `g` of `G` at `ϑ`, the linear hypothesis
//! `H_lin = {θ : gᵀ(θ − ϑ) > 0}` is contained in `H`, and the gap
//! `H ∩ {gᵀ(θ − ϑ) ≤ 0}` is what makes the containment strict.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::SeedSpec;
use crate::hypothesis::{BoundingBox, Hypothesis};
use crate::optim::nelder_mead;

/// Absolute band within which `ϑ` counts as a boundary point.
pub const BOUNDARY_TOL: f64 = 1e-8;

const DIRECTION_CANDIDATES: usize = 1000;
const SIDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NolocoCertificate {
    pub is_noloco: bool,
    /// Unit outward normal of `G` at `ϑ`.
    pub supporting_vector: Option<Vec<f64>>,
    pub gap_measure_estimate: f64,
    pub gap_std_err: f64,
    /// Sampled points of `G` strictly outside the supporting half-space.
    pub violations: usize,
    /// Sampled points of `H_lin` that fell outside `H`.
    pub lin_escapes: usize,
    pub n_samples: usize,
}

impl NolocoCertificate {
    /// The linear hypothesis `{θ : gᵀ(θ − ϑ) > 0}` bounded by the supporting
    /// hyperplane.
    pub fn linear_hypothesis(&self, vartheta: &[f64]) -> Option<Hypothesis> {
        let g = self.supporting_vector.as_ref()?;
        Hypothesis::half_space(g.clone(), vartheta.to_vec()).ok()
    }
}

/// Region used when the caller does not provide one.
pub fn default_region(h: &Hypothesis, vartheta: &[f64]) -> Result<BoundingBox> {
    match h {
        Hypothesis::OracleSet(o) => Ok(o.bounding_box().clone()),
        Hypothesis::BallComplement(b) => BoundingBox::centered(vartheta, b.radius()),
        _ => BoundingBox::centered(vartheta, 1.0),
    }
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        Some(v.iter().map(|x| x / n).collect())
    } else {
        None
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_boundary(h: &Hypothesis, vartheta: &[f64], seed: SeedSpec) -> Result<()> {
    let fail = |what: String| Err(Error::precondition(format!("vartheta not on the boundary: {what}")));
    match h {
        Hypothesis::HalfSpace(hs) => {
            let norm = dot(hs.normal(), hs.normal()).sqrt();
            let dist = hs.margin(vartheta).abs() / norm;
            if dist > BOUNDARY_TOL {
                return fail(format!("distance {dist:e} to the half-space boundary"));
            }
        }
        Hypothesis::SuperlevelSet(s) => {
            let gap = (s.phi().eval(vartheta) - s.level()).abs();
            if gap > BOUNDARY_TOL {
                return fail(format!("|phi(vartheta) - level| = {gap:e}"));
            }
        }
        Hypothesis::BallComplement(b) => {
            let gap = (b.dist_sq(vartheta).sqrt() - b.radius()).abs();
            if gap > BOUNDARY_TOL {
                return fail(format!("| |vartheta - center| - radius | = {gap:e}"));
            }
        }
        Hypothesis::HalfLineConstrained(l) => {
            let gap = (vartheta[0] - l.threshold()).abs();
            if gap > BOUNDARY_TOL {
                return fail(format!("|vartheta - threshold| = {gap:e}"));
            }
        }
        _ => {
            // Bracket: some nearby point in H and some in G.
            let d = vartheta.len();
            let mut probes: Vec<Vec<f64>> = vec![vartheta.to_vec()];
            for i in 0..d {
                for s in [-1.0, 1.0] {
                    let mut p = vartheta.to_vec();
                    p[i] += s * BOUNDARY_TOL;
                    probes.push(p);
                }
            }
            let mut normals = seed.normals();
            let mut z = vec![0.0; d];
            for _ in 0..64 {
                normals.fill(&mut z);
                if let Some(u) = unit(&z) {
                    probes.push(vartheta.iter().zip(&u).map(|(v, u)| v + BOUNDARY_TOL * u).collect());
                }
            }
            let in_h = probes.iter().filter(|p| h.contains_unchecked(p)).count();
            if in_h == 0 || in_h == probes.len() {
                return fail(format!(
                    "no bracketing within {BOUNDARY_TOL:e} ({in_h} of {} probes in H)",
                    probes.len()
                ));
            }
        }
    }
    Ok(())
}

/// Searches for a unit `g` with `gᵀ(θ − ϑ) ≤ 0` for every sampled point of
/// `G`, maximizing the worst angular margin.
fn search_supporting_direction(
    h: &Hypothesis,
    vartheta: &[f64],
    region: &BoundingBox,
    n_samples: usize,
    seed: SeedSpec,
) -> Option<Vec<f64>> {
    let d = vartheta.len();
    let mut u = seed.derive(0).uniforms();
    let mut unit_pt = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    for _ in 0..n_samples {
        for v in unit_pt.iter_mut() {
            *v = u.next_open();
        }
        region.point_at(&unit_pt, &mut p);
        if !h.contains_unchecked(&p) {
            let off: Vec<f64> = p.iter().zip(vartheta).map(|(a, b)| a - b).collect();
            if let Some(dir) = unit(&off) {
                offsets.push(dir);
            }
        }
    }
    if offsets.is_empty() {
        return None;
    }

    let margin = |g: &[f64]| -> f64 {
        match unit(g) {
            Some(g) => offsets.iter().map(|o| -dot(&g, o)).fold(f64::INFINITY, f64::min),
            None => f64::NEG_INFINITY,
        }
    };

    let mut normals = seed.derive(1).normals();
    let mut z = vec![0.0; d];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..DIRECTION_CANDIDATES {
        normals.fill(&mut z);
        let m = margin(&z);
        if best.as_ref().map_or(true, |(_, bm)| m > *bm) {
            best = Some((z.clone(), m));
        }
    }
    let (start, _) = best?;
    let refined = nelder_mead(&mut |g: &[f64]| -margin(g), &unit(&start)?, 0.1, 400 * d, 1e-12);
    let g = unit(&refined.point)?;
    if margin(&g) >= -SIDE_TOL {
        Some(g)
    } else {
        None
    }
}

/// Certifies (or refuses to certify) that `Hᶜ` is noloco at `vartheta`.
///
/// `region` bounds the Monte Carlo estimate of the gap measure; see
/// [`default_region`] for what is used when it is `None`.
pub fn noloco_check(
    h: &Hypothesis,
    vartheta: &[f64],
    region: Option<&BoundingBox>,
    n_samples: usize,
    seed: SeedSpec,
) -> Result<NolocoCertificate> {
    h.check_dim(vartheta)?;
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be positive"));
    }
    let owned;
    let region = match region {
        Some(r) => r,
        None => {
            owned = default_region(h, vartheta)?;
            &owned
        }
    };
    if region.dim() != vartheta.len() {
        return Err(Error::domain("bounding region dimension mismatch"));
    }
    check_boundary(h, vartheta, seed.derive(0))?;

    let normal = match h {
        Hypothesis::HalfSpace(hs) => unit(hs.normal()),
        Hypothesis::SuperlevelSet(s) => unit(&s.phi().subgradient(vartheta)),
        Hypothesis::BallComplement(b) => {
            let radial: Vec<f64> = vartheta.iter().zip(b.center()).map(|(v, c)| v - c).collect();
            unit(&radial)
        }
        Hypothesis::HalfLineConstrained(_) => Some(vec![1.0]),
        _ => search_supporting_direction(h, vartheta, region, n_samples, seed.derive(1)),
    };

    let Some(g) = normal else {
        return Ok(NolocoCertificate {
            is_noloco: false,
            supporting_vector: None,
            gap_measure_estimate: 0.0,
            gap_std_err: 0.0,
            violations: 0,
            lin_escapes: 0,
            n_samples,
        });
    };

    let d = vartheta.len();
    let mut u = seed.derive(2).uniforms();
    let mut unit_pt = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut offset = vec![0.0; d];
    let (mut violations, mut lin_escapes, mut gap_hits) = (0usize, 0usize, 0usize);
    for _ in 0..n_samples {
        for v in unit_pt.iter_mut() {
            *v = u.next_open();
        }
        region.point_at(&unit_pt, &mut p);
        for i in 0..d {
            offset[i] = p[i] - vartheta[i];
        }
        let side = dot(&g, &offset);
        let in_h = h.contains_unchecked(&p);
        if !in_h && side > SIDE_TOL {
            violations += 1;
        }
        if side > 0.0 && !in_h {
            lin_escapes += 1;
        }
        if in_h && side <= 0.0 {
            gap_hits += 1;
        }
    }
    let n = n_samples as f64;
    let frac = gap_hits as f64 / n;
    let vol = region.volume();
    let gap_measure_estimate = vol * frac;
    let gap_std_err = vol * (frac * (1.0 - frac) / n).sqrt();
    let is_noloco = violations == 0 && gap_measure_estimate - 3.0 * gap_std_err > 0.0;
    Ok(NolocoCertificate {
        is_noloco,
        supporting_vector: Some(g),
        gap_measure_estimate,
        gap_std_err,
        violations,
        lin_escapes,
        n_samples,
    })
}
