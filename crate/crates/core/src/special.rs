//! Scalar distribution functions: the standard normal CDF and quantile, the
//! central chi-square CDF via the regularized incomplete gamma function, and
//! the noncentral chi-square CDF as a Poisson mixture with a certified
//! truncation bound.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// A probability in `[0, 1]`. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!("{value} is not a probability")));
        }
        Ok(Probability(value))
    }

    /// Clamps rounding overshoot into `[0, 1]`. Only for values that are
    /// probabilities up to floating point error.
    pub(crate) fn clamped(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Stopping rule for truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    abs_tol: f64,
    max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) || !abs_tol.is_finite() {
            return Err(Error::domain(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if max_terms == 0 {
            return Err(Error::domain("max_terms must be at least 1"));
        }
        Ok(SeriesTolerance { abs_tol, max_terms })
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        SeriesTolerance {
            abs_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

// Cody's rational Chebyshev approximations for the normal integral
// (W. J. Cody, "Rational Chebyshev approximations for the error function",
// Math. Comp. 1969), in the three-region arrangement used by R's pnorm.
const CODY_A: [f64; 5] = [
    2.2352520354606839287,
    161.02823106855587881,
    1067.6894854603709582,
    18154.981253343561249,
    0.065682337918207449113,
];
const CODY_B: [f64; 4] = [
    47.20258190468824187,
    976.09855173777669322,
    10260.932208618978205,
    45507.789335026729956,
];
const CODY_C: [f64; 9] = [
    0.39894151208813466764,
    8.8831497943883759412,
    93.506656132177855979,
    597.27027639480026226,
    2494.5375852903726711,
    6848.1904505362823326,
    11602.651437647350124,
    9842.7148383839780218,
    1.0765576773720192317e-8,
];
const CODY_D: [f64; 8] = [
    22.266688044328115691,
    235.38790178262499861,
    1519.377599407554805,
    6485.558298266760755,
    18615.571640885098091,
    34900.952721145977266,
    38912.003286093271411,
    19685.429676859990727,
];
const CODY_P: [f64; 6] = [
    0.21589853405795699,
    0.1274011611602473639,
    0.022235277870649807,
    0.001421619193227893466,
    2.9112874951168792e-5,
    0.02307344176494017303,
];
const CODY_Q: [f64; 5] = [
    1.28426009614491121,
    0.468238212480865118,
    0.0659881378689285515,
    0.00378239633202758244,
    7.29751555083966205e-5,
];

const SQRT_32: f64 = 5.656854249492380195206754896838;
const INV_SQRT_2PI: f64 = 0.398942280401432677939946059934;
const SQRT_2PI: f64 = 2.506628274631000502415765284811;

/// Returns `(Φ(z), 1 − Φ(z))`, each computed without cancellation.
fn normal_cdf_pair(z: f64) -> (f64, f64) {
    if z.is_infinite() {
        return if z > 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let y = z.abs();
    if y <= 0.67448975 {
        let zsq = if y > 1e-300 { z * z } else { 0.0 };
        let mut num = CODY_A[4] * zsq;
        let mut den = zsq;
        for i in 0..3 {
            num = (num + CODY_A[i]) * zsq;
            den = (den + CODY_B[i]) * zsq;
        }
        let t = z * (num + CODY_A[3]) / (den + CODY_B[3]);
        return (0.5 + t, 0.5 - t);
    }

    // Upper tail mass at |z|, i.e. Φ(−|z|).
    let tail = if y <= SQRT_32 {
        let mut num = CODY_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + CODY_C[i]) * y;
            den = (den + CODY_D[i]) * y;
        }
        let t = (num + CODY_C[7]) / (den + CODY_D[7]);
        gauss_tail_scale(y) * t
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = CODY_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + CODY_P[i]) * ysq;
            den = (den + CODY_Q[i]) * ysq;
        }
        let t = ysq * (num + CODY_P[4]) / (den + CODY_Q[4]);
        gauss_tail_scale(y) * (INV_SQRT_2PI - t) / y
    };

    if z > 0.0 {
        (1.0 - tail, tail)
    } else {
        (tail, 1.0 - tail)
    }
}

/// `exp(−y²/2)` split so the leading part is exact in binary.
fn gauss_tail_scale(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

/// Φ(z) for internal hot paths. Caller guarantees `z` is not NaN.
#[inline]
pub(crate) fn phi(z: f64) -> f64 {
    normal_cdf_pair(z).0
}

/// 1 − Φ(z), accurate in the far upper tail.
#[inline]
pub(crate) fn phi_upper(z: f64) -> f64 {
    normal_cdf_pair(z).1
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> Result<Probability> {
    if z.is_nan() {
        return Err(Error::domain("normal_cdf of NaN"));
    }
    Ok(Probability::clamped(phi(z)))
}

// Acklam's rational approximation to the normal quantile (relative error
// below 1.2e-9), followed by one Halley step against `phi`.
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

#[inline]
fn acklam(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}

/// Inverse of Φ on the open interval `(0, 1)`. Used by the sampler.
#[inline]
pub(crate) fn normal_quantile_open(p: f64) -> f64 {
    let x = acklam(p);
    let e = if x <= 0.0 { phi(x) - p } else { (1.0 - p) - phi_upper(x) };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Standard normal quantile. `p = 0` and `p = 1` map to ∓∞.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("normal_quantile outside [0,1]: {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(normal_quantile_open(p))
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(a) for a > 0 (Lanczos, g = 7).
pub(crate) fn ln_gamma(a: f64) -> f64 {
    debug_assert!(a > 0.0);
    if a < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * a).sin()).ln() - ln_gamma(1.0 - a);
    }
    let x = a - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

const GAMMA_MAX_ITER: usize = 100_000;

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, modified Lentz continued fraction otherwise, so
/// whichever of P or Q is small is computed directly.
pub(crate) fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("incomplete gamma at a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                let p = (log_prefactor.exp() * sum).min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::Convergence {
            partial: log_prefactor.exp() * sum,
            bound: term,
        })
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < f64::EPSILON {
                let q = (log_prefactor.exp() * h).min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::Convergence {
            partial: 1.0 - log_prefactor.exp() * h,
            bound: f64::NAN,
        })
    }
}

fn check_chi2_args(x: f64, df: u32) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    if df == 0 {
        return Err(Error::domain("chi-square degrees of freedom must be positive"));
    }
    Ok(())
}

/// Central chi-square CDF, `P(df/2, x/2)`.
pub fn chi2_cdf(x: f64, df: u32) -> Result<Probability> {
    check_chi2_args(x, df)?;
    let (p, _) = gamma_pq(0.5 * df as f64, 0.5 * x)?;
    Ok(Probability::clamped(p))
}

/// Central chi-square survival function, `Q(df/2, x/2)`.
pub fn chi2_sf(x: f64, df: u32) -> Result<Probability> {
    check_chi2_args(x, df)?;
    let (_, q) = gamma_pq(0.5 * df as f64, 0.5 * x)?;
    Ok(Probability::clamped(q))
}

/// Noncentral chi-square CDF as the Poisson(ncp/2) mixture of central
/// chi-square CDFs with `df + 2k` degrees of freedom.
///
/// After `k` terms the neglected mass is at most
/// `Pr{N > k} · P(df/2 + k + 1, x/2)` because `P(a, ·)` decreases in `a`;
/// the sum stops once that bound drops below `tol.abs_tol()`.
pub fn noncentral_chi2_cdf(
    x: f64,
    df: u32,
    ncp: f64,
    tol: SeriesTolerance,
) -> Result<Probability> {
    check_chi2_args(x, df)?;
    if ncp.is_nan() || ncp < 0.0 || ncp.is_infinite() {
        return Err(Error::domain(format!("noncentrality must be finite and >= 0, got {ncp}")));
    }
    if ncp == 0.0 {
        return chi2_cdf(x, df);
    }
    if x == 0.0 {
        return Ok(Probability::ZERO);
    }
    let lambda = 0.5 * ncp;
    let half_x = 0.5 * x;
    let a0 = 0.5 * df as f64;
    let ln_lambda = lambda.ln();

    let mut sum = 0.0;
    let mut bound = f64::INFINITY;
    let mut p_k = gamma_pq(a0, half_x)?.0;
    for k in 0..tol.max_terms() {
        let kf = k as f64;
        let weight = (-lambda + kf * ln_lambda - ln_gamma(kf + 1.0)).exp();
        sum += weight * p_k;
        let p_next = gamma_pq(a0 + kf + 1.0, half_x)?.0;
        // Pr{N > k} for N ~ Poisson(lambda) equals P(k + 1, lambda).
        let poisson_tail = gamma_pq(kf + 1.0, lambda)?.0;
        bound = poisson_tail * p_next;
        if bound < tol.abs_tol() {
            return Ok(Probability::clamped(sum));
        }
        p_k = p_next;
    }
    Err(Error::Convergence {
        partial: sum,
        bound,
    })
}
