//! Algebraic descriptions of hypotheses `H ⊆ ℝ^D` and their membership tests.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::SeedSpec;

/// A convex function with a subgradient oracle.
pub trait ConvexFunction: Send + Sync {
    fn eval(&self, theta: &[f64]) -> f64;
    fn subgradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// `φ(θ) = ‖Aθ − b‖²`, convex for any `A`; strictly convex when `A` has
/// full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredAffineNorm {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl SquaredAffineNorm {
    pub fn new(a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::domain(format!(
                "A has {} rows but b has length {}",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite entry in A or b"));
        }
        Ok(SquaredAffineNorm {
            a,
            b: DVector::from_vec(b),
        })
    }

    /// `‖θ‖²` in dimension `dim`.
    pub fn squared_norm(dim: usize) -> Self {
        SquaredAffineNorm {
            a: DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        self.b.as_slice()
    }

    fn residual(&self, theta: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(theta) - &self.b
    }
}

impl ConvexFunction for SquaredAffineNorm {
    fn eval(&self, theta: &[f64]) -> f64 {
        self.residual(theta).norm_squared()
    }

    fn subgradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = self.a.transpose() * self.residual(theta) * 2.0;
        g.as_slice().to_vec()
    }
}

/// Spot-checks convexity and the subgradient inequality on random pairs drawn
/// uniformly from the cube `center ± half_width`.
pub fn check_convexity(
    phi: &dyn ConvexFunction,
    center: &[f64],
    half_width: f64,
    pairs: usize,
    seed: SeedSpec,
) -> Result<()> {
    let d = center.len();
    let mut u = seed.uniforms();
    let mut draw = || -> Vec<f64> {
        center
            .iter()
            .map(|c| c + half_width * (2.0 * u.next_open() - 1.0))
            .collect()
    };
    for _ in 0..pairs {
        let p = draw();
        let q = draw();
        let (fp, fq) = (phi.eval(&p), phi.eval(&q));
        for t in [0.25, 0.5, 0.75] {
            let mid: Vec<f64> = (0..d).map(|i| t * p[i] + (1.0 - t) * q[i]).collect();
            if phi.eval(&mid) > t * fp + (1.0 - t) * fq + 1e-9 {
                return Err(Error::domain(format!("convexity violated between {p:?} and {q:?}")));
            }
        }
        let g = phi.subgradient(&p);
        let lin: f64 = fp + (0..d).map(|i| g[i] * (q[i] - p[i])).sum::<f64>();
        if fq < lin - 1e-9 {
            return Err(Error::domain(format!("subgradient inequality violated at {p:?}")));
        }
    }
    Ok(())
}

/// Axis-aligned box with `lower < upper` in every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::domain("bounding box corners must have equal, nonzero length"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::domain(format!("bounding box degenerate in coordinate {i}")));
            }
        }
        Ok(BoundingBox { lower, upper })
    }

    pub fn centered(center: &[f64], half_width: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub(crate) fn point_at(&self, unit: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = self.lower[i] + unit[i] * (self.upper[i] - self.lower[i]);
        }
    }
}

/// `{θ : gᵀ(θ − anchor) > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    g: Vec<f64>,
    anchor: Vec<f64>,
}

impl HalfSpace {
    pub fn new(g: Vec<f64>, anchor: Vec<f64>) -> Result<Self> {
        if g.len() != anchor.len() || g.is_empty() {
            return Err(Error::domain("half-space normal and anchor must have equal, nonzero length"));
        }
        if g.iter().all(|v| *v == 0.0) || g.iter().chain(&anchor).any(|v| !v.is_finite()) {
            return Err(Error::domain("half-space normal must be finite and nonzero"));
        }
        Ok(HalfSpace { g, anchor })
    }

    pub fn normal(&self) -> &[f64] {
        &self.g
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// `gᵀ(θ − anchor)`.
    pub fn margin(&self, theta: &[f64]) -> f64 {
        self.g.iter().zip(theta.iter().zip(&self.anchor)).map(|(g, (t, a))| g * (t - a)).sum()
    }
}

/// `H_φ = {θ : φ(θ) > φ(anchor)}` for convex `φ`.
#[derive(Clone)]
pub struct SuperlevelSet {
    phi: Arc<dyn ConvexFunction>,
    anchor: Vec<f64>,
    level: f64,
}

impl SuperlevelSet {
    pub fn new(phi: Arc<dyn ConvexFunction>, anchor: Vec<f64>) -> Result<Self> {
        if anchor.is_empty() || anchor.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("superlevel anchor must be finite and nonempty"));
        }
        let level = phi.eval(&anchor);
        if !level.is_finite() {
            return Err(Error::domain("phi(anchor) is not finite"));
        }
        Ok(SuperlevelSet { phi, anchor, level })
    }

    pub fn phi(&self) -> &Arc<dyn ConvexFunction> {
        &self.phi
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

impl fmt::Debug for SuperlevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuperlevelSet")
            .field("anchor", &self.anchor)
            .field("level", &self.level)
            .finish_non_exhaustive()
    }
}

/// `{θ : ‖θ − center‖² > radius²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallComplement {
    center: Vec<f64>,
    radius: f64,
}

impl BallComplement {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("ball center must be finite and nonempty"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(BallComplement { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dist_sq(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.center).map(|(t, c)| (t - c) * (t - c)).sum()
    }
}

/// `(threshold, ∞)` inside the parameter space `[lower_bound, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineConstrained {
    threshold: f64,
    lower_bound: f64,
}

impl HalfLineConstrained {
    pub fn new(threshold: f64, lower_bound: f64) -> Result<Self> {
        if !threshold.is_finite() || !lower_bound.is_finite() || threshold < lower_bound {
            return Err(Error::domain(format!(
                "need finite threshold >= lower_bound, got {threshold} < {lower_bound}"
            )));
        }
        Ok(HalfLineConstrained {
            threshold,
            lower_bound,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }
}

pub type MembershipFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A set known only through a membership predicate.
#[derive(Clone)]
pub struct OracleSet {
    member: Arc<MembershipFn>,
    bounding_box: BoundingBox,
}

impl OracleSet {
    pub fn new(member: Arc<MembershipFn>, bounding_box: BoundingBox) -> Self {
        OracleSet {
            member,
            bounding_box,
        }
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bounding_box
    }
}

impl fmt::Debug for OracleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleSet")
            .field("bounding_box", &self.bounding_box)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Hypothesis {
    HalfSpace(HalfSpace),
    SuperlevelSet(SuperlevelSet),
    BallComplement(BallComplement),
    HalfLineConstrained(HalfLineConstrained),
    OracleSet(OracleSet),
    Complement(Box<Hypothesis>),
    Union(Box<Hypothesis>, Box<Hypothesis>),
    /// The whole parameter space.
    FullSpace,
}

impl Hypothesis {
    pub fn half_space(g: Vec<f64>, anchor: Vec<f64>) -> Result<Self> {
        HalfSpace::new(g, anchor).map(Hypothesis::HalfSpace)
    }

    pub fn superlevel(phi: Arc<dyn ConvexFunction>, anchor: Vec<f64>) -> Result<Self> {
        SuperlevelSet::new(phi, anchor).map(Hypothesis::SuperlevelSet)
    }

    pub fn ball_complement(center: Vec<f64>, radius: f64) -> Result<Self> {
        BallComplement::new(center, radius).map(Hypothesis::BallComplement)
    }

    pub fn half_line(threshold: f64, lower_bound: f64) -> Result<Self> {
        HalfLineConstrained::new(threshold, lower_bound).map(Hypothesis::HalfLineConstrained)
    }

    pub fn oracle(member: Arc<MembershipFn>, bounding_box: BoundingBox) -> Self {
        Hypothesis::OracleSet(OracleSet::new(member, bounding_box))
    }

    pub fn complement(&self) -> Hypothesis {
        match self {
            Hypothesis::Complement(inner) => (**inner).clone(),
            other => Hypothesis::Complement(Box::new(other.clone())),
        }
    }

    pub fn union(self, other: Hypothesis) -> Hypothesis {
        Hypothesis::Union(Box::new(self), Box::new(other))
    }

    /// `None` when the set is meaningful in every dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Hypothesis::HalfSpace(h) => Some(h.g.len()),
            Hypothesis::SuperlevelSet(h) => Some(h.anchor.len()),
            Hypothesis::BallComplement(h) => Some(h.center.len()),
            Hypothesis::HalfLineConstrained(_) => Some(1),
            Hypothesis::OracleSet(h) => Some(h.bounding_box.dim()),
            Hypothesis::Complement(inner) => inner.dim(),
            Hypothesis::Union(a, b) => a.dim().or(b.dim()),
            Hypothesis::FullSpace => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Hypothesis::HalfSpace(_) => "half_space",
            Hypothesis::SuperlevelSet(_) => "superlevel_set",
            Hypothesis::BallComplement(_) => "ball_complement",
            Hypothesis::HalfLineConstrained(_) => "half_line_constrained",
            Hypothesis::OracleSet(_) => "oracle_set",
            Hypothesis::Complement(_) => "complement",
            Hypothesis::Union(..) => "union",
            Hypothesis::FullSpace => "full_space",
        }
    }

    pub(crate) fn check_dim(&self, theta: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != theta.len() => Err(Error::domain(format!(
                "dimension mismatch: hypothesis is {d}-dimensional, point has {}",
                theta.len()
            ))),
            _ => Ok(()),
        }
    }

    /// Exact membership; strict inequalities stay strict.
    pub fn contains(&self, theta: &[f64]) -> Result<bool> {
        self.check_dim(theta)?;
        Ok(self.contains_unchecked(theta))
    }

    pub(crate) fn contains_unchecked(&self, theta: &[f64]) -> bool {
        match self {
            Hypothesis::HalfSpace(h) => h.margin(theta) > 0.0,
            Hypothesis::SuperlevelSet(h) => h.phi.eval(theta) > h.level,
            Hypothesis::BallComplement(h) => h.dist_sq(theta) > h.radius * h.radius,
            Hypothesis::HalfLineConstrained(h) => theta[0] > h.threshold,
            Hypothesis::OracleSet(h) => (h.member)(theta),
            Hypothesis::Complement(inner) => !inner.contains_unchecked(theta),
            Hypothesis::Union(a, b) => a.contains_unchecked(theta) || b.contains_unchecked(theta),
            Hypothesis::FullSpace => true,
        }
    }

    /// True iff the hypothesis does not contain the true parameter.
    pub fn is_false_at(&self, theta_star: &[f64]) -> Result<bool> {
        Ok(!self.contains(theta_star)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let h = Hypothesis::half_space(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert!(h.contains(&[1.0, 1.0]).unwrap());
        let b = Hypothesis::ball_complement(vec![0.0, 0.0], 1.0).unwrap();
        assert!(!b.contains(&[1.0, 0.0]).unwrap());
        assert!(b.contains(&[1.0, 0.1]).unwrap());
        let phi = Arc::new(SquaredAffineNorm::squared_norm(2));
        let s = Hypothesis::superlevel(phi, vec![1.0, 0.0]).unwrap();
        assert!(!s.contains(&[0.5, 0.5]).unwrap());
        assert!(h.contains(&[1.0]).is_err());
    }

    #[test]
    fn falsity_examples() {
        let theta = vec![0.3, -1.2];
        let phi = Arc::new(SquaredAffineNorm::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]),
            vec![0.1, 0.4],
        ).unwrap());
        let s = Hypothesis::superlevel(phi, theta.clone()).unwrap();
        assert!(s.is_false_at(&theta).unwrap());
        let h = Hypothesis::half_space(vec![0.7, 1.1], theta.clone()).unwrap();
        assert!(h.is_false_at(&theta).unwrap());
        let b = Hypothesis::ball_complement(vec![0.0, 0.0], 1.0).unwrap();
        assert!(!b.is_false_at(&[2.0, 0.0]).unwrap());
    }

    #[test]
    fn constructor_invariants() {
        assert!(Hypothesis::half_space(vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Hypothesis::ball_complement(vec![0.0], 0.0).is_err());
        assert!(Hypothesis::half_line(-1.0, 0.0).is_err());
        assert!(Hypothesis::half_line(0.0, 0.0).is_ok());
        assert!(BoundingBox::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SquaredAffineNorm::new(DMatrix::identity(2, 2), vec![0.0]).is_err());
    }

    #[test]
    fn complement_and_union() {
        let b = Hypothesis::ball_complement(vec![0.0, 0.0], 1.0).unwrap();
        let g = b.complement();
        assert!(g.contains(&[1.0, 0.0]).unwrap());
        assert!(matches!(g.complement(), Hypothesis::BallComplement(_)));
        let h = Hypothesis::half_space(vec![1.0, 0.0], vec![5.0, 0.0]).unwrap();
        let u = g.union(h);
        assert!(u.contains(&[6.0, 0.0]).unwrap());
        assert!(u.contains(&[0.0, 0.0]).unwrap());
        assert!(!u.contains(&[3.0, 0.0]).unwrap());
        assert!(Hypothesis::FullSpace.contains(&[1.0, 2.0, 3.0]).unwrap());
    }

    #[test]
    fn quadratic_is_convex() {
        let phi = SquaredAffineNorm::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 0.0, 1.5]),
            vec![1.0, 0.0, -1.0],
        )
        .unwrap();
        check_convexity(&phi, &[0.0, 0.0], 3.0, 100, SeedSpec::new(11)).unwrap();
    }

    struct Concave;
    impl ConvexFunction for Concave {
        fn eval(&self, t: &[f64]) -> f64 {
            -t.iter().map(|v| v * v).sum::<f64>()
        }
        fn subgradient(&self, t: &[f64]) -> Vec<f64> {
            t.iter().map(|v| -2.0 * v).collect()
        }
    }

    #[test]
    fn convexity_check_catches_concave() {
        assert!(check_convexity(&Concave, &[0.0, 0.0], 1.0, 100, SeedSpec::new(1)).is_err());
    }
}
