//! Quadrature reference denoisers and minimum-MSE values.
//!
//! These provide an independent route to the conditional expectation: the
//! integrals are evaluated numerically rather than through the mixture
//! denoiser's closed forms, so fitted denoisers can be checked against them.

use alloc::vec::Vec;

use crate::amp::{Denoiser, DenoiserOutput};
use crate::error::{CoreError, Result};
use crate::gm::GaussianMixture;
use crate::math;

/// Composite-Simpson integral of `f` over `[a, b]` with `n` intervals
/// (rounded up to even).
fn simpson<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Minimum MSE of estimating `X ~ prior` from `Q = X + N(0, sigma_v_sq)`,
/// by quadrature of `E[X^2] - Integral eta(q)^2 p_Q(q) dq` with the channel
/// moments written out directly. Point-mass components are handled exactly.
pub fn gm_channel_mmse(prior: &GaussianMixture, sigma_v_sq: f64) -> Result<f64> {
    if !(sigma_v_sq > 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be > 0"));
    }
    let comps = prior.components();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut narrowest = f64::INFINITY;
    for c in comps {
        let cv = c.variance + sigma_v_sq;
        let sd = math::sqrt(cv);
        lo = lo.min(c.mean - 12.0 * sd);
        hi = hi.max(c.mean + 12.0 * sd);
        narrowest = narrowest.min(sd);
    }
    let steps = (((hi - lo) / (narrowest / 16.0)) as usize).clamp(200, 2_000_000);
    let integral = simpson(lo, hi, steps, |q| {
        let mut f = 0.0;
        let mut g = 0.0;
        for c in comps {
            let cv = c.variance + sigma_v_sq;
            let p = c.weight * math::gaussian_pdf(q, c.mean, cv);
            let wiener = c.variance / cv * (q - c.mean) + c.mean;
            f += p * wiener;
            g += p;
        }
        if g <= 0.0 {
            0.0
        } else {
            f * f / g
        }
    });
    Ok((prior.second_moment() - integral).max(0.0))
}

/// Expected MSE of the mixture denoiser built from `fitted` when the data
/// actually follow `truth`, by quadrature over the observation:
/// `E[X^2] - 2 Int eta f + Int eta^2 g` with `f`, `g` the channel moments of
/// the true prior. Deterministic, so fit quality can be measured without
/// Monte-Carlo noise.
pub fn gm_mismatched_mse(
    truth: &GaussianMixture,
    fitted: &GaussianMixture,
    sigma_v_sq: f64,
) -> Result<f64> {
    if !(sigma_v_sq > 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be > 0"));
    }
    let comps = truth.components();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut narrowest = f64::INFINITY;
    for c in comps {
        let cv = c.variance + sigma_v_sq;
        let sd = math::sqrt(cv);
        lo = lo.min(c.mean - 12.0 * sd);
        hi = hi.max(c.mean + 12.0 * sd);
        narrowest = narrowest.min(sd);
    }
    let steps = (((hi - lo) / (narrowest / 16.0)) as usize).clamp(200, 2_000_000);
    let integral = simpson(lo, hi, steps, |q| {
        let mut f = 0.0;
        let mut g = 0.0;
        for c in comps {
            let cv = c.variance + sigma_v_sq;
            let p = c.weight * math::gaussian_pdf(q, c.mean, cv);
            let wiener = c.variance / cv * (q - c.mean) + c.mean;
            f += p * wiener;
            g += p;
        }
        let eta = crate::gm::eta_iid(fitted, sigma_v_sq, q);
        eta * eta * g - 2.0 * eta * f
    });
    Ok((truth.second_moment() + integral).max(0.0))
}

/// Sparse Laplace prior `nonzero_prob * Laplace(0, scale) + (1 -
/// nonzero_prob) * delta(0)` with numerically integrated channel moments.
#[derive(Debug, Clone, Copy)]
pub struct SparseLaplacePrior {
    pub nonzero_prob: f64,
    pub scale: f64,
}

/// Inner integration grid: standard-normal nodes spanning +-8 sigma.
const INNER_POINTS: usize = 512;

impl SparseLaplacePrior {
    /// Unit-variance Laplace component.
    pub fn unit_variance(nonzero_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nonzero_prob) {
            return Err(CoreError::InvalidParameter("nonzero_prob must lie in [0, 1]"));
        }
        Ok(SparseLaplacePrior {
            nonzero_prob,
            scale: core::f64::consts::FRAC_1_SQRT_2,
        })
    }

    pub fn second_moment(&self) -> f64 {
        self.nonzero_prob * 2.0 * self.scale * self.scale
    }

    fn laplace_pdf(&self, x: f64) -> f64 {
        math::exp(-math::abs(x) / self.scale) / (2.0 * self.scale)
    }

    /// Channel moments `(g, E[X|q], E[X^2|q])` at observation `q`, with the
    /// continuous part integrated on a fixed normal grid.
    pub fn conditional_moments(&self, q: f64, sigma_v_sq: f64) -> (f64, f64, f64) {
        let sd = math::sqrt(sigma_v_sq);
        let n = INNER_POINTS;
        let h = 16.0 / n as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..=n {
            let u = -8.0 + i as f64 * h;
            let simpson_w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let x = q + sd * u;
            let w = simpson_w * math::gaussian_pdf(u, 0.0, 1.0) * self.laplace_pdf(x);
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let scale = h / 3.0;
        m0 *= scale;
        m1 *= scale;
        m2 *= scale;
        let p = self.nonzero_prob;
        let g = (1.0 - p) * math::gaussian_pdf(q, 0.0, sigma_v_sq) + p * m0;
        let g_safe = g.max(crate::gm::DENSITY_FLOOR);
        (g, p * m1 / g_safe, p * m2 / g_safe)
    }

    /// Conditional expectation `E[X | Q = q]`.
    pub fn conditional_mean(&self, q: f64, sigma_v_sq: f64) -> f64 {
        self.conditional_moments(q, sigma_v_sq).1
    }

    /// Minimum MSE at the given channel noise, via an outer quadrature of
    /// `E[X^2] - Integral eta(q)^2 p_Q(q) dq`.
    pub fn channel_mmse(&self, sigma_v_sq: f64) -> Result<f64> {
        if !(sigma_v_sq > 0.0) {
            return Err(CoreError::InvalidParameter("sigma_v_sq must be > 0"));
        }
        let sd = math::sqrt(sigma_v_sq);
        let half = 25.0 * self.scale + 9.0 * sd;
        let step = (sd / 10.0).min(0.02);
        let steps = ((2.0 * half / step) as usize).clamp(400, 400_000);
        let integral = simpson(-half, half, steps, |q| {
            let (g, eta, _) = self.conditional_moments(q, sigma_v_sq);
            eta * eta * g
        });
        Ok((self.second_moment() - integral).max(0.0))
    }
}

/// Separable AMP denoiser backed by [`SparseLaplacePrior`] quadrature. The
/// derivative uses the posterior-variance identity
/// `eta'(q) = Var(X | q) / sigma_v^2`.
pub struct SparseLaplaceMmseDenoiser {
    pub prior: SparseLaplacePrior,
}

impl Denoiser for SparseLaplaceMmseDenoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput> {
        if !(sigma_sq > 0.0) {
            return Err(CoreError::InvalidParameter("sigma_sq must be > 0"));
        }
        let mut estimate = Vec::with_capacity(q.len());
        let mut derivative = Vec::with_capacity(q.len());
        for &qi in q {
            let (_, m1, m2) = self.prior.conditional_moments(qi, sigma_sq);
            estimate.push(m1);
            derivative.push((m2 - m1 * m1).max(0.0) / sigma_sq);
        }
        Ok(DenoiserOutput {
            estimate,
            derivative,
        })
    }
}
