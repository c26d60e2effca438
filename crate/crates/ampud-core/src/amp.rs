//! The AMP iteration: Onsager-corrected residuals, pluggable denoisers,
//! scalar-noise estimation, and fixed or adaptive damping.
//!
//! Starting from `x_0 = 0`, `r_0 = y`, each step computes the pseudo-data
//! `q_t = A^T r_t + x_t`, denoises it, damps the update
//! `x_{t+1} = lambda * eta(q_t) + (1 - lambda) * x_t`, and forms
//! `r_{t+1} = y - A x_{t+1} + (1/R) r_t <eta'(q_t)>`. Inside the iteration
//! the pseudo-data behaves like the true signal plus AWGN whose variance is
//! estimated by `||r_t||^2 / M`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{CoreError, Result};
use crate::gm::{denoise_with_gm, GaussianMixture};
use crate::math;
use crate::metrics;
use crate::rng::Stream;
use crate::sensing::SensingOperator;
use crate::ud::{denoise_ud, UdConfig, UdVariant};

/// Per-iteration scalar-channel denoiser: estimates plus the pointwise
/// derivative needed for the Onsager term.
pub struct DenoiserOutput {
    pub estimate: Vec<f64>,
    pub derivative: Vec<f64>,
}

pub trait Denoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput>;
}

/// AMP iterate: current estimate, residual, noise estimate, iteration index.
#[derive(Debug, Clone)]
pub struct AmpState {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub sigma_hat_sq: f64,
    pub t: usize,
}

impl AmpState {
    /// `x_0 = 0`, `r_0 = y` (no Onsager history on the first step).
    pub fn init(y: &[f64], n: usize) -> AmpState {
        AmpState {
            x: vec![0.0; n],
            residual: y.to_vec(),
            sigma_hat_sq: math::mean_square(y),
            t: 0,
        }
    }
}

/// Damping policy for the estimate update.
#[derive(Debug, Clone, PartialEq)]
pub enum Damping {
    Fixed { lambda: f64 },
    Adaptive {
        lambda: f64,
        min: f64,
        max: f64,
        up: f64,
        down: f64,
    },
}

impl Damping {
    pub fn fixed(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(CoreError::InvalidParameter("lambda must lie in (0, 1]"));
        }
        Ok(Damping::Fixed { lambda })
    }

    /// Starts at 0.5 and moves within `[0.01, 0.5]`: up by 10% whenever the
    /// noise estimate improves, halved when it degrades.
    pub fn adaptive_default() -> Self {
        Damping::Adaptive {
            lambda: 0.5,
            min: 0.01,
            max: 0.5,
            up: 1.1,
            down: 0.5,
        }
    }

    pub fn current(&self) -> f64 {
        match self {
            Damping::Fixed { lambda } => *lambda,
            Damping::Adaptive { lambda, .. } => *lambda,
        }
    }

    fn update(&mut self, improved: bool) {
        if let Damping::Adaptive {
            lambda,
            min,
            max,
            up,
            down,
        } = self
        {
            let factor = if improved { *up } else { *down };
            *lambda = (*lambda * factor).clamp(*min, *max);
        }
    }
}

/// One AMP step from `state`; `lambda` is the damping weight on the fresh
/// denoiser output.
pub fn amp_step(
    state: &AmpState,
    op: &dyn SensingOperator,
    y: &[f64],
    denoiser: &mut dyn Denoiser,
    lambda: f64,
) -> Result<AmpState> {
    let n = op.cols();
    let m = op.rows();
    let rate = m as f64 / n as f64;

    let mut q = op.apply_transpose(&state.residual);
    for (qi, &xi) in q.iter_mut().zip(&state.x) {
        *qi += xi;
    }
    let out = denoiser.denoise(&q, state.sigma_hat_sq)?;
    if out.estimate.len() != n || out.derivative.len() != n {
        return Err(CoreError::ShapeMismatch {
            expected: n,
            actual: out.estimate.len(),
        });
    }

    let mut x_next = Vec::with_capacity(n);
    for (&e, &xi) in out.estimate.iter().zip(&state.x) {
        x_next.push(lambda * e + (1.0 - lambda) * xi);
    }
    let mean_deriv = out.derivative.iter().sum::<f64>() / n as f64;
    let onsager = mean_deriv / rate;

    let ax = op.apply(&x_next);
    let mut r_next = Vec::with_capacity(m);
    for ((&yi, &axi), &ri) in y.iter().zip(&ax).zip(&state.residual) {
        r_next.push(yi - axi + onsager * ri);
    }
    let sigma_hat_sq = math::mean_square(&r_next);
    if !sigma_hat_sq.is_finite() || x_next.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Divergence {
            iteration: state.t + 1,
        });
    }
    Ok(AmpState {
        x: x_next,
        residual: r_next,
        sigma_hat_sq,
        t: state.t + 1,
    })
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub t: usize,
    pub sigma_hat_sq: f64,
    pub lambda: f64,
    /// Mean squared error against the true signal, when known.
    pub mse: Option<f64>,
    pub sdr_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AmpRun {
    pub x_hat: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
}

/// Divergence report carrying the trace recorded so far.
#[derive(Debug, Clone)]
pub struct AmpFailure {
    pub error: CoreError,
    pub trace: Vec<TraceRow>,
}

impl fmt::Display for AmpFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} recorded iterations", self.error, self.trace.len())
    }
}

impl core::error::Error for AmpFailure {}

fn trace_row(state: &AmpState, lambda: f64, truth: Option<&[f64]>) -> TraceRow {
    let mse = truth.map(|x| math::mse(x, &state.x));
    let sdr_db = truth.and_then(|x| metrics::sdr_db(x, &state.x).ok());
    TraceRow {
        t: state.t,
        sigma_hat_sq: state.sigma_hat_sq,
        lambda,
        mse,
        sdr_db,
    }
}

/// Runs `t_max` AMP iterations. When `truth` is provided each trace row also
/// carries the reconstruction error at that iteration.
pub fn run_amp(
    op: &dyn SensingOperator,
    y: &[f64],
    denoiser: &mut dyn Denoiser,
    mut damping: Damping,
    t_max: usize,
    truth: Option<&[f64]>,
) -> core::result::Result<AmpRun, AmpFailure> {
    let mut state = AmpState::init(y, op.cols());
    let mut trace = Vec::with_capacity(t_max + 1);
    trace.push(trace_row(&state, damping.current(), truth));
    for _ in 0..t_max {
        let lambda = damping.current();
        let prev_sigma = state.sigma_hat_sq;
        state = match amp_step(&state, op, y, denoiser, lambda) {
            Ok(s) => s,
            Err(error) => return Err(AmpFailure { error, trace }),
        };
        damping.update(state.sigma_hat_sq < prev_sigma);
        trace.push(trace_row(&state, lambda, truth));
    }
    Ok(AmpRun {
        iterations: state.t,
        x_hat: state.x,
        trace,
    })
}

/// Assembled AMP-UD configuration.
#[derive(Debug, Clone)]
pub struct UdAmpConfig {
    pub ud: UdConfig,
    pub damping: Damping,
    pub t_max: usize,
}

impl UdAmpConfig {
    /// Member-borrowing variant: fixed damping 0.1, 100 iterations.
    pub fn ud1() -> Self {
        UdAmpConfig {
            ud: UdConfig::ud1(),
            damping: Damping::Fixed { lambda: 0.1 },
            t_max: 100,
        }
    }

    /// Merging variant: adaptive damping in `[0.01, 0.5]`, 30 iterations.
    pub fn ud2() -> Self {
        UdAmpConfig {
            ud: UdConfig::ud2(),
            damping: Damping::adaptive_default(),
            t_max: 30,
        }
    }

    pub fn for_variant(variant: UdVariant) -> Self {
        match variant {
            UdVariant::Ud1 => Self::ud1(),
            UdVariant::Ud2 => Self::ud2(),
        }
    }
}

/// Universal denoiser adapter: each call re-clusters the pseudo-data and
/// refits per-cluster mixtures, with per-iteration seeds derived from the
/// base stream.
pub struct UdDenoiser {
    cfg: UdConfig,
    stream: Stream,
    calls: u64,
}

impl UdDenoiser {
    pub fn new(cfg: UdConfig, stream: Stream) -> Self {
        UdDenoiser {
            cfg,
            stream,
            calls: 0,
        }
    }
}

impl Denoiser for UdDenoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput> {
        let stream = self.stream.derive(self.calls);
        self.calls += 1;
        let out = denoise_ud(q, sigma_sq, &self.cfg, &stream)?;
        Ok(DenoiserOutput {
            estimate: out.estimate,
            derivative: out.derivative,
        })
    }
}

/// Reconstructs with the universal denoiser plugged into AMP.
pub fn run_amp_ud(
    op: &dyn SensingOperator,
    y: &[f64],
    cfg: &UdAmpConfig,
    seed: u64,
    truth: Option<&[f64]>,
) -> core::result::Result<AmpRun, AmpFailure> {
    if cfg.t_max == 0 {
        return Err(AmpFailure {
            error: CoreError::InvalidParameter("t_max must be >= 1"),
            trace: Vec::new(),
        });
    }
    let mut denoiser = UdDenoiser::new(cfg.ud.clone(), Stream::new(seed));
    run_amp(op, y, &mut denoiser, cfg.damping.clone(), cfg.t_max, truth)
}

/// Separable denoiser with a fixed, known mixture prior.
pub struct GmPriorDenoiser {
    pub gm: GaussianMixture,
}

impl Denoiser for GmPriorDenoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput> {
        let (estimate, derivative) = denoise_with_gm(&self.gm, sigma_sq, q);
        Ok(DenoiserOutput {
            estimate,
            derivative,
        })
    }
}

/// Mismatched i.i.d. baseline: fits one mixture to the whole sequence each
/// iteration and denoises separably, ignoring any memory in the signal.
pub struct FittedIidDenoiser {
    pub em: crate::gm::EmConfig,
    stream: Stream,
    calls: u64,
}

impl FittedIidDenoiser {
    pub fn new(em: crate::gm::EmConfig, stream: Stream) -> Self {
        FittedIidDenoiser {
            em,
            stream,
            calls: 0,
        }
    }
}

impl Denoiser for FittedIidDenoiser {
    fn denoise(&mut self, q: &[f64], sigma_sq: f64) -> Result<DenoiserOutput> {
        let stream = self.stream.derive(self.calls);
        self.calls += 1;
        let gm = crate::gm::fit_gm_noisy_detailed(q, sigma_sq, &self.em, &stream)
            .map(|(gm, _)| gm)
            .unwrap_or_else(|_| {
                GaussianMixture::single(
                    math::mean(q),
                    (math::variance(q) - sigma_sq).max(0.0),
                )
            });
        let (estimate, derivative) = denoise_with_gm(&gm, sigma_sq, q);
        Ok(DenoiserOutput {
            estimate,
            derivative,
        })
    }
}

/// Passes the pseudo-data through unchanged; for plumbing tests.
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&mut self, q: &[f64], _sigma_sq: f64) -> Result<DenoiserOutput> {
        Ok(DenoiserOutput {
            estimate: q.to_vec(),
            derivative: vec![1.0; q.len()],
        })
    }
}
