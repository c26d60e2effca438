//! Signal-to-noise and signal-to-distortion ratios.

use crate::error::{CoreError, Result};
use crate::math;
use crate::sensing::MeasurementSystem;

/// Measurement SNR in dB: `10 log10( N E[x^2] / (M sigma_z^2) )` with the
/// signal energy taken empirically from `x`.
pub fn snr_db(x: &[f64], sys: &MeasurementSystem) -> Result<f64> {
    if sys.sigma_z_sq() <= 0.0 {
        return Err(CoreError::InfiniteSnr);
    }
    let num = sys.cols() as f64 * math::mean_square(x);
    let den = sys.rows() as f64 * sys.sigma_z_sq();
    Ok(10.0 * math::log10(num / den))
}

/// Reconstruction SDR in dB: `10 log10( E[x^2] / MSE )`. Exact recovery
/// returns `+inf`; a zero-energy reference is an error.
pub fn sdr_db(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(CoreError::ShapeMismatch {
            expected: x_true.len(),
            actual: x_hat.len(),
        });
    }
    let energy = math::mean_square(x_true);
    if energy == 0.0 {
        return Err(CoreError::ZeroSignalEnergy);
    }
    let err = math::mse(x_true, x_hat);
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(energy / err))
}

/// SDR from known signal energy and mean squared error.
pub fn sdr_db_from_mse(second_moment: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * math::log10(second_moment / mse)
}

/// Noise variance that realizes the requested SNR for a source with the
/// given second moment at measurement rate `R = M/N`.
pub fn sigma_z_sq_for_snr(second_moment: f64, rate: f64, snr_db: f64) -> f64 {
    second_moment / (rate * math::powf(10.0, snr_db / 10.0))
}
