//! Exact Bayesian sliding-window denoisers for the two reference Markov
//! sources, computed by enumerating all state paths through the window.
//!
//! These are the non-separable denoisers used to check that state evolution
//! holds beyond separable denoising. Path likelihoods accumulate in the log
//! domain; the window half-width is capped at 8 (2^17 paths).

use alloc::vec;
use alloc::vec::Vec;

use crate::amp::{Denoiser, DenoiserOutput};
use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::Stream;
use crate::source::{m4_transition_prob, MarkovSourceSpec, NonzeroDist};

pub const MAX_HALF_WINDOW: usize = 8;

fn check_window(window: &[f64]) -> Result<usize> {
    if window.len() % 2 == 0 || window.is_empty() {
        return Err(CoreError::InvalidParameter("window length must be odd"));
    }
    let k = window.len() / 2;
    if k > MAX_HALF_WINDOW {
        return Err(CoreError::WindowTooWide {
            k,
            max: MAX_HALF_WINDOW,
        });
    }
    Ok(k)
}

fn two_state_gauss_params(spec: &MarkovSourceSpec) -> Result<(f64, f64, f64, f64)> {
    match spec {
        MarkovSourceSpec::TwoState {
            p01,
            p10,
            nonzero: NonzeroDist::Gauss { mean, variance },
        } => Ok((*p01, *p10, *mean, *variance)),
        _ => Err(CoreError::InvalidParameter(
            "window denoiser needs a two-state source with Gaussian nonzeros",
        )),
    }
}

/// Conditional expectation of the center symbol of a sparse-Gaussian Markov
/// signal given a `2k+1` noisy window: the posterior probability of the
/// nonzero state times the Wiener estimate. Returns the estimate and its
/// derivative in the center observation.
pub fn eta_mgauss(
    spec: &MarkovSourceSpec,
    sigma_v_sq: f64,
    window: &[f64],
) -> Result<(f64, f64)> {
    let k = check_window(window)?;
    let (p01, p10, mu_x, var_x) = two_state_gauss_params(spec)?;
    if !(sigma_v_sq > 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be > 0"));
    }
    let len = 2 * k + 1;
    let rho = p01 / (p01 + p10);
    // Per-position log-likelihoods of the two states.
    let mut l0 = [0.0f64; 2 * MAX_HALF_WINDOW + 1];
    let mut l1 = [0.0f64; 2 * MAX_HALF_WINDOW + 1];
    for i in 0..len {
        l0[i] = math::gaussian_log_pdf(window[i], 0.0, sigma_v_sq);
        l1[i] = math::gaussian_log_pdf(window[i], mu_x, var_x + sigma_v_sq);
    }
    let ln_pi = [math::ln(1.0 - rho), math::ln(rho)];
    let ln_trans = [
        [math::ln(1.0 - p01), math::ln(p01)],
        [math::ln(p10), math::ln(1.0 - p10)],
    ];

    // Log-weights of all state paths, split by the center state.
    let paths = 1usize << len;
    let center_bit = 1usize << k;
    let mut max_lw = f64::NEG_INFINITY;
    let mut lws = vec![0.0f64; paths];
    for (mask, lw) in lws.iter_mut().enumerate() {
        let mut acc = ln_pi[mask & 1];
        let mut prev = mask & 1;
        acc += if prev == 1 { l1[0] } else { l0[0] };
        for i in 1..len {
            let cur = (mask >> i) & 1;
            acc += ln_trans[prev][cur];
            acc += if cur == 1 { l1[i] } else { l0[i] };
            prev = cur;
        }
        *lw = acc;
        if acc > max_lw {
            max_lw = acc;
        }
    }
    let mut a1 = 0.0;
    let mut a0 = 0.0;
    for (mask, &lw) in lws.iter().enumerate() {
        let w = math::exp(lw - max_lw);
        if mask & center_bit != 0 {
            a1 += w;
        } else {
            a0 += w;
        }
    }
    let ratio = a1 / (a1 + a0);

    let qc = window[k];
    let gain = var_x / (var_x + sigma_v_sq);
    let wiener = gain * (qc - mu_x) + mu_x;
    // d/dq_c of the per-path likelihood factor at the center position.
    let d1 = -(qc - mu_x) / (var_x + sigma_v_sq);
    let d0 = -qc / sigma_v_sq;
    let ratio_deriv = ratio * (1.0 - ratio) * (d1 - d0);
    Ok((ratio * wiener, ratio_deriv * wiener + ratio * gain))
}

/// Conditional expectation of the center symbol of the four-state switching
/// signal given a `2k+1` noisy window, with its derivative in the center
/// observation. The output lies in `(-1, 1)`.
pub fn eta_m4(spec: &MarkovSourceSpec, sigma_v_sq: f64, window: &[f64]) -> Result<(f64, f64)> {
    let k = check_window(window)?;
    let error_prob = match spec {
        MarkovSourceSpec::FourState { error_prob } => *error_prob,
        _ => Err(CoreError::InvalidParameter(
            "eta_m4 needs the four-state switching source",
        ))?,
    };
    if !(sigma_v_sq > 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be > 0"));
    }
    let len = 2 * k + 1;
    let mut lp = [0.0f64; 2 * MAX_HALF_WINDOW + 1];
    let mut lm = [0.0f64; 2 * MAX_HALF_WINDOW + 1];
    for i in 0..len {
        lp[i] = math::gaussian_log_pdf(window[i], 1.0, sigma_v_sq);
        lm[i] = math::gaussian_log_pdf(window[i], -1.0, sigma_v_sq);
    }
    let ln_quarter = math::ln(0.25);
    let sign = |mask: usize, i: usize| -> f64 {
        if (mask >> i) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    };

    let paths = 1usize << len;
    let center_bit = 1usize << k;
    let mut lws = vec![0.0f64; paths];
    // Separate shifts per center-state class keep the ratio stable even when
    // one class is overwhelmingly unlikely.
    let mut max_plus = f64::NEG_INFINITY;
    let mut max_minus = f64::NEG_INFINITY;
    for (mask, lw) in lws.iter_mut().enumerate() {
        let mut acc = if len == 1 {
            // Stationary single-sample marginal is uniform on {-1, +1}.
            math::ln(0.5)
        } else {
            ln_quarter
        };
        for i in 0..len {
            acc += if (mask >> i) & 1 == 1 { lp[i] } else { lm[i] };
        }
        for i in 2..len {
            let t = m4_transition_prob(sign(mask, i - 2), sign(mask, i - 1), sign(mask, i), error_prob);
            if t == 0.0 {
                acc = f64::NEG_INFINITY;
                break;
            }
            acc += math::ln(t);
        }
        *lw = acc;
        if mask & center_bit != 0 {
            max_plus = max_plus.max(acc);
        } else {
            max_minus = max_minus.max(acc);
        }
    }
    if max_plus == f64::NEG_INFINITY && max_minus == f64::NEG_INFINITY {
        return Err(CoreError::Numerical("all switching paths impossible"));
    }
    let class_log_sum = |max: f64, want_plus: bool| -> f64 {
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for (mask, &lw) in lws.iter().enumerate() {
            if (mask & center_bit != 0) == want_plus && lw > f64::NEG_INFINITY {
                acc += math::exp(lw - max);
            }
        }
        max + math::ln(acc)
    };
    let log_plus = class_log_sum(max_plus, true);
    let log_minus = class_log_sum(max_minus, false);
    // (P+ - P-)/(P+ + P-) written as tanh of the half log-ratio.
    let estimate = if log_plus == f64::NEG_INFINITY {
        -1.0
    } else if log_minus == f64::NEG_INFINITY {
        1.0
    } else {
        math::tanh(0.5 * (log_plus - log_minus))
    };
    // The quotient rule collapses: eta' = (1 - eta^2) / sigma_v^2.
    let deriv = (1.0 - estimate * estimate) / sigma_v_sq;
    Ok((estimate, deriv))
}

/// Applies the window denoiser across a whole sequence. Windows reaching
/// past either end are completed with the median of `q`, mirroring the
/// context-construction convention.
pub fn denoise_windowed(
    spec: &MarkovSourceSpec,
    k: usize,
    sigma_v_sq: f64,
    q: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if k > MAX_HALF_WINDOW {
        return Err(CoreError::WindowTooWide {
            k,
            max: MAX_HALF_WINDOW,
        });
    }
    if q.is_empty() {
        return Err(CoreError::InputTooShort { len: 0, min: 1 });
    }
    let n = q.len();
    let med = math::median(q);
    let mut padded = Vec::with_capacity(n + 2 * k);
    padded.resize(k, med);
    padded.extend_from_slice(q);
    padded.resize(n + 2 * k, med);

    let mut est = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    let is_m4 = matches!(spec, MarkovSourceSpec::FourState { .. });
    for j in 0..n {
        let window = &padded[j..j + 2 * k + 1];
        let (e, d) = if is_m4 {
            eta_m4(spec, sigma_v_sq, window)?
        } else {
            eta_mgauss(spec, sigma_v_sq, window)?
        };
        est.push(e);
        deriv.push(d);
    }
    Ok((est, deriv))
}

/// Monte-Carlo estimate of the window denoiser's MSE on its own source at
/// the given channel noise: simulates the chain, corrupts it, denoises
/// interior windows. Returns the estimate and its standard error.
pub fn window_mse(
    spec: &MarkovSourceSpec,
    k: usize,
    sigma_v_sq: f64,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(CoreError::InvalidParameter("n_mc must be >= 1"));
    }
    let stream = Stream::new(seed);
    let n = n_mc + 2 * k;
    let x = spec.generate(n, stream.derive(0).rng().next_u64())?;
    let mut rng = stream.derive(1).rng();
    let sd = math::sqrt(sigma_v_sq);
    let q: Vec<f64> = x.iter().map(|&v| v + sd * rng.normal()).collect();

    let is_m4 = matches!(spec, MarkovSourceSpec::FourState { .. });
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for j in 0..n_mc {
        let window = &q[j..j + 2 * k + 1];
        let (e, _) = if is_m4 {
            eta_m4(spec, sigma_v_sq, window)?
        } else {
            eta_mgauss(spec, sigma_v_sq, window)?
        };
        let err = e - x[j + k];
        sum += err * err;
        sum_sq += err * err * err * err;
    }
    let mse = sum / n_mc as f64;
    let var = (sum_sq / n_mc as f64 - mse * mse).max(0.0);
    Ok((mse, math::sqrt(var / n_mc as f64)))
}

/// Window denoiser adapter for the AMP loop.
pub struct WindowDenoiser {
    pub spec: MarkovSourceSpec,
    pub k: usize,
}

impl Denoiser for WindowDenoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput> {
        let (estimate, derivative) = denoise_windowed(&self.spec, self.k, sigma_sq, q)?;
        Ok(DenoiserOutput {
            estimate,
            derivative,
        })
    }
}
