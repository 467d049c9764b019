//! The Gaussian limit experiment `X ~ N_D(Θ, Σ)` with known covariance,
//! plus the seeded, splittable normal generator every simulation draws from.

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::normal_quantile_open;

/// Identifies one reproducible random stream.
///
/// Streams are ChaCha8 keyed by `base_seed` and selected by `stream_id`, so
/// each `(base_seed, stream_id)` pair yields the same sequence regardless of
/// which thread consumes it or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(base_seed: u64) -> Self {
        SeedSpec {
            base_seed,
            stream_id: 0,
        }
    }

    /// Child stream for replication or purpose `index`. Pure function of
    /// `(self, index)`.
    pub fn derive(&self, index: u64) -> SeedSpec {
        SeedSpec {
            base_seed: self.base_seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        }
    }

    pub fn normals(&self) -> NormalStream {
        NormalStream::new(*self)
    }

    pub(crate) fn uniforms(&self) -> UniformStream {
        UniformStream::new(*self)
    }
}

/// Uniform variates on the open interval (0, 1).
pub(crate) struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    fn new(seed: SeedSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.base_seed);
        rng.set_stream(seed.stream_id);
        UniformStream { rng }
    }

    #[inline]
    pub(crate) fn next_open(&mut self) -> f64 {
        // 53 random bits, offset by half an ulp so 0 and 1 never occur.
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal variates by inverse-CDF transform of a [`UniformStream`].
pub struct NormalStream {
    uniforms: UniformStream,
}

impl NormalStream {
    fn new(seed: SeedSpec) -> Self {
        NormalStream {
            uniforms: UniformStream::new(seed),
        }
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile_open(self.uniforms.next_open())
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_normal();
        }
    }
}

/// `X ~ N_D(Θ, Σ)` with Σ symmetric positive definite and fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianExperiment {
    theta_star: Vec<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const RECONSTRUCTION_TOL: f64 = 1e-10;

impl GaussianExperiment {
    pub fn new(theta_star: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let dim = theta_star.len();
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if sigma.nrows() != dim || sigma.ncols() != dim {
            return Err(Error::domain(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if theta_star.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite entry in theta_star or sigma"));
        }
        for i in 0..dim {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::domain(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        let chol = nalgebra::Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Singular("covariance is not positive definite".into()))?
            .l();
        for i in 0..dim {
            if !(chol[(i, i)] > 0.0) {
                return Err(Error::Singular(format!("zero Cholesky pivot at {i}")));
            }
        }
        let rebuilt = &chol * chol.transpose();
        if (&rebuilt - &sigma).amax() > RECONSTRUCTION_TOL {
            return Err(Error::Singular("Cholesky factor does not reproduce covariance".into()));
        }
        Ok(GaussianExperiment {
            theta_star,
            sigma,
            chol,
        })
    }

    pub fn isotropic(theta_star: Vec<f64>, variance: f64) -> Result<Self> {
        let dim = theta_star.len();
        Self::new(theta_star, DMatrix::identity(dim, dim) * variance)
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Same covariance, different true parameter.
    pub fn with_theta(&self, theta_star: Vec<f64>) -> Result<Self> {
        self.check_dim(&theta_star)?;
        Ok(GaussianExperiment {
            theta_star,
            sigma: self.sigma.clone(),
            chol: self.chol.clone(),
        })
    }

    /// `Some(σ²)` when Σ = σ²I up to relative 1e-12.
    pub fn isotropic_variance(&self) -> Option<f64> {
        let s2 = self.sigma[(0, 0)];
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { s2 } else { 0.0 };
                if (self.sigma[(i, j)] - target).abs() > 1e-12 * s2 {
                    return None;
                }
            }
        }
        Some(s2)
    }

    pub(crate) fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::domain(format!(
                "dimension mismatch: got {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Writes `center + L z` into `out`.
    #[inline]
    pub(crate) fn affine_into(&self, center: &[f64], z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = center[i];
            for j in 0..=i {
                acc += self.chol[(i, j)] * z[j];
            }
            out[i] = acc;
        }
    }

    /// Solves `L w = v` in place.
    pub(crate) fn whiten_in_place(&self, v: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * v[j];
            }
            v[i] = acc / self.chol[(i, i)];
        }
    }

    /// `n` draws of `Θ + L z`.
    pub fn sample(&self, seed: SeedSpec, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let mut stream = seed.normals();
        Ok((0..n).map(|_| self.draw_around(&self.theta_star, &mut stream)).collect())
    }

    /// One draw of `center + L z`.
    pub(crate) fn draw_around(&self, center: &[f64], stream: &mut NormalStream) -> Vec<f64> {
        let d = self.dim();
        let mut z = vec![0.0; d];
        stream.fill(&mut z);
        let mut out = vec![0.0; d];
        self.affine_into(center, &z, &mut out);
        out
    }

    /// `(x − θ)ᵀ Σ⁻¹ (x − θ)` via a triangular solve against the Cholesky factor.
    pub fn mahalanobis_sq(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(theta)?;
        Ok(self.mahalanobis_sq_unchecked(x, theta))
    }

    pub(crate) fn mahalanobis_sq_unchecked(&self, x: &[f64], theta: &[f64]) -> f64 {
        let mut w: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a - b).collect();
        self.whiten_in_place(&mut w);
        w.iter().map(|v| v * v).sum()
    }

    /// Log-likelihood in proportionality form: `−½ (x − θ)ᵀ Σ⁻¹ (x − θ)`.
    pub fn log_likelihood(&self, x: &[f64], theta: &[f64]) -> Result<f64> {
        Ok(-0.5 * self.mahalanobis_sq(x, theta)?)
    }

    /// `gᵀ Σ g`.
    pub(crate) fn quadratic_form(&self, g: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += g[i] * self.sigma[(i, j)] * g[j];
            }
        }
        acc
    }
}
