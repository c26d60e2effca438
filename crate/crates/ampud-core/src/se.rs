//! State evolution: the scalar recursion predicting the per-iteration
//! effective noise of AMP, plus a harness that checks empirical AMP error
//! against the prediction.
//!
//! The recursion is `sigma_{t+1}^2 = sigma_z^2 + MSE(eta, sigma_t^2) / R`
//! with `sigma_0^2 = sigma_z^2 + E[X^2] / R`; the per-iteration MSE is
//! estimated by Monte-Carlo simulation of the source through an AWGN
//! channel at the current noise level.

use alloc::vec::Vec;

use crate::amp::{run_amp, Damping, Denoiser};
use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::Stream;
use crate::sensing::{MatrixOperator, MeasurementSystem};
use crate::source::SignalModel;

/// Predicted noise trajectory with the Monte-Carlo MSE of each step.
#[derive(Debug, Clone)]
pub struct SePrediction {
    /// `sigma_t^2` for `t = 0..=iterations`.
    pub sigma_sq: Vec<f64>,
    /// `MSE(eta, sigma_t^2)` for `t = 0..iterations`.
    pub mse: Vec<f64>,
    /// Standard error of each MSE estimate.
    pub stderr: Vec<f64>,
    /// Set when the recursion grew past ten times its starting value.
    pub diverged: bool,
}

impl SePrediction {
    /// Denoiser-output MSE the recursion predicts for iterate `t`
    /// (`R * (sigma_t^2 - sigma_z^2)`).
    pub fn predicted_signal_mse(&self, rate: f64, sigma_z_sq: f64) -> Vec<f64> {
        self.sigma_sq
            .iter()
            .map(|&s| (s - sigma_z_sq) * rate)
            .collect()
    }
}

/// Signal ensemble the per-iteration MSE is estimated on: fresh draws from
/// the source model, or a fixed pool of realizations (the latter makes the
/// prediction conditional on exactly the signals an AMP run saw, so
/// realization luck cancels out of tracking comparisons).
pub enum SePopulation<'a> {
    Model(&'a SignalModel),
    Pool(&'a [Vec<f64>]),
}

/// Runs the recursion from an explicit starting variance.
pub fn se_predict_from(
    population: &SePopulation<'_>,
    denoiser: &mut dyn Denoiser,
    rate: f64,
    sigma_z_sq: f64,
    sigma0_sq: f64,
    t_max: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SePrediction> {
    if t_max == 0 || n_mc == 0 {
        return Err(CoreError::InvalidParameter("t_max and n_mc must be >= 1"));
    }
    if !(rate > 0.0) {
        return Err(CoreError::InvalidParameter("rate must be > 0"));
    }
    if let SePopulation::Pool(pool) = population {
        if pool.is_empty() || pool.iter().any(|s| s.is_empty()) {
            return Err(CoreError::InvalidParameter("signal pool must be non-empty"));
        }
    }
    let stream = Stream::new(seed);
    let mut sigma_sq = Vec::with_capacity(t_max + 1);
    sigma_sq.push(sigma0_sq);
    let mut mse = Vec::with_capacity(t_max);
    let mut stderr = Vec::with_capacity(t_max);
    let mut diverged = false;
    let fresh;
    let signals: Vec<&[f64]> = match population {
        SePopulation::Model(model) => {
            fresh = model.generate(n_mc, stream.derive(u64::MAX).rng().next_u64())?;
            alloc::vec![fresh.as_slice()]
        }
        SePopulation::Pool(pool) => pool.iter().map(|s| s.as_slice()).collect(),
    };
    let total: usize = signals.iter().map(|s| s.len()).sum();
    for t in 0..t_max {
        let st = sigma_sq[t];
        let sd = math::sqrt(st);
        let mut rng = stream.derive2(t as u64, 1).rng();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for x in &signals {
            let q: Vec<f64> = x.iter().map(|&v| v + sd * rng.normal()).collect();
            let out = denoiser.denoise(&q, st)?;
            for (&e, &xi) in out.estimate.iter().zip(x.iter()) {
                let err = (e - xi) * (e - xi);
                sum += err;
                sum_sq += err * err;
            }
        }
        let m = sum / total as f64;
        let var = (sum_sq / total as f64 - m * m).max(0.0);
        mse.push(m);
        stderr.push(math::sqrt(var / total as f64));
        let next = sigma_z_sq + m / rate;
        sigma_sq.push(next);
        if next > 10.0 * sigma_sq[0] {
            diverged = true;
            break;
        }
    }
    Ok(SePrediction {
        sigma_sq,
        mse,
        stderr,
        diverged,
    })
}

/// Runs the recursion from the standard start `sigma_z^2 + E[X^2] / R`.
pub fn se_predict(
    model: &SignalModel,
    denoiser: &mut dyn Denoiser,
    rate: f64,
    sigma_z_sq: f64,
    t_max: usize,
    n_mc: usize,
    seed: u64,
) -> Result<SePrediction> {
    let sigma0 = sigma_z_sq + model.second_moment() / rate;
    se_predict_from(
        &SePopulation::Model(model),
        denoiser,
        rate,
        sigma_z_sq,
        sigma0,
        t_max,
        n_mc,
        seed,
    )
}

/// Prediction paired with measured AMP error.
#[derive(Debug, Clone)]
pub struct SeTrace {
    pub sigma_sq_predicted: Vec<f64>,
    /// Predicted reconstruction MSE of iterate `t`.
    pub mse_predicted: Vec<f64>,
    /// Mean over trials of the measured `||x_t - x||^2 / N`.
    pub mse_empirical_mean: Vec<f64>,
    pub mse_empirical_stderr: Vec<f64>,
    /// Largest `|10 log10(empirical / predicted)|` over compared iterations.
    pub max_deviation_db: f64,
}

/// Runs undamped AMP `n_trials` times with fresh signal, matrix, and noise
/// draws, and compares the per-iteration reconstruction error against the
/// recursion's prediction. The prediction's Monte-Carlo expectation is taken
/// over the same signal realizations the trials reconstruct, so the
/// comparison measures tracking rather than draw-to-draw signal variation.
#[allow(clippy::too_many_arguments)]
pub fn verify_tracking(
    model: &SignalModel,
    denoiser: &mut dyn Denoiser,
    sys: &MeasurementSystem,
    n_trials: usize,
    t_max: usize,
    n_mc: usize,
    matrix_budget_bytes: usize,
    seed: u64,
) -> Result<SeTrace> {
    if n_trials == 0 {
        return Err(CoreError::InvalidParameter("n_trials must be >= 1"));
    }
    let stream = Stream::new(seed);
    let n = sys.cols();
    let signals: Vec<Vec<f64>> = (0..n_trials)
        .map(|trial| {
            let trial_stream = stream.derive2(1, trial as u64);
            model.generate(n, trial_stream.derive(0).rng().next_u64())
        })
        .collect::<Result<_>>()?;

    let sigma0 = sigma_z_sq_start(sys, &signals);
    let prediction = se_predict_from(
        &SePopulation::Pool(&signals),
        denoiser,
        sys.rate(),
        sys.sigma_z_sq(),
        sigma0,
        t_max,
        n_mc.max(1),
        stream.derive(0).rng().next_u64(),
    )?;

    let mut mse_sum = alloc::vec![0.0f64; t_max + 1];
    let mut mse_sum_sq = alloc::vec![0.0f64; t_max + 1];
    for (trial, x) in signals.iter().enumerate() {
        let trial_stream = stream.derive2(1, trial as u64);
        let trial_sys = MeasurementSystem::new(
            sys.rows(),
            n,
            sys.sigma_z_sq(),
            trial_stream.derive(1).rng().next_u64(),
        )?;
        let y = trial_sys.measure(x, trial_stream.derive(2).rng().next_u64())?;
        let op = MatrixOperator::new(trial_sys, matrix_budget_bytes);
        let run = run_amp(
            &op,
            &y,
            denoiser,
            Damping::Fixed { lambda: 1.0 },
            t_max,
            Some(x),
        )
        .map_err(|f| f.error)?;
        for (t, row) in run.trace.iter().enumerate() {
            let m = row.mse.expect("truth provided");
            mse_sum[t] += m;
            mse_sum_sq[t] += m * m;
        }
    }
    let trials = n_trials as f64;
    let mse_empirical_mean: Vec<f64> = mse_sum.iter().map(|&s| s / trials).collect();
    let mse_empirical_stderr: Vec<f64> = mse_sum_sq
        .iter()
        .zip(&mse_empirical_mean)
        .map(|(&ss, &m)| {
            let var = (ss / trials - m * m).max(0.0);
            math::sqrt(var / trials)
        })
        .collect();

    let mse_predicted = prediction.predicted_signal_mse(sys.rate(), sys.sigma_z_sq());
    let compared = mse_predicted.len().min(mse_empirical_mean.len());
    let mut max_deviation_db: f64 = 0.0;
    for t in 0..compared {
        if mse_predicted[t] > 0.0 && mse_empirical_mean[t] > 0.0 {
            let dev = math::abs(10.0 * math::log10(mse_empirical_mean[t] / mse_predicted[t]));
            max_deviation_db = max_deviation_db.max(dev);
        }
    }
    Ok(SeTrace {
        sigma_sq_predicted: prediction.sigma_sq,
        mse_predicted,
        mse_empirical_mean,
        mse_empirical_stderr,
        max_deviation_db,
    })
}

/// Recursion start conditioned on the realized signals: `sigma_z^2 +
/// mean(x^2) / R` averaged over the pool, which is what the first AMP
/// residual actually carries.
fn sigma_z_sq_start(sys: &MeasurementSystem, signals: &[Vec<f64>]) -> f64 {
    let energy: f64 =
        signals.iter().map(|x| math::mean_square(x)).sum::<f64>() / signals.len() as f64;
    sys.sigma_z_sq() + energy / sys.rate()
}
