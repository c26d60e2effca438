//! Gaussian mixtures: representation, unsupervised learning from noisy
//! samples, and the conditional-expectation scalar denoiser.
//!
//! The learner is a component-wise EM with a minimum-message-length weight
//! update `alpha_s ∝ max{sum_i w_i^(s) - n/2, 0}`, which annihilates
//! components whose expected support falls below one data point. Two ways of
//! handling channel noise are provided:
//!
//! * [`EmApproach::NoisyFit`] fits a mixture to the noisy samples directly,
//!   removing components whose variance drops below `0.2 sigma_v^2`
//!   (spurious), pushing variances in `[0.2, 0.9] sigma_v^2` up to
//!   `0.9 sigma_v^2`, and, after convergence, flooring every variance at
//!   `sigma_v^2` before subtracting the channel noise. Components may come
//!   out with zero variance, i.e. exact point masses.
//! * [`EmApproach::LatentEm`] treats the clean samples as latent variables
//!   and maximizes the penalized complete-data objective; with
//!   `sigma_v^2 = 0` its updates coincide with clean-data EM.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::{Rng, Stream};

/// One mixture component. `variance` is the clean-signal variance; zero
/// denotes a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Ordered list of weighted Gaussian components.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GmComponent>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Density floor applied wherever a mixture density appears in a denominator
/// or a logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;

impl GaussianMixture {
    pub fn new(components: Vec<GmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(CoreError::InvalidParameter("mixture needs >= 1 component"));
        }
        let mut sum = 0.0;
        for c in &components {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(CoreError::InvalidParameter("weights must be positive"));
            }
            if !(c.variance >= 0.0) || !c.mean.is_finite() || !c.variance.is_finite() {
                return Err(CoreError::InvalidParameter("component parameters invalid"));
            }
            sum += c.weight;
        }
        if math::abs(sum - 1.0) > WEIGHT_SUM_TOL {
            return Err(CoreError::InvalidParameter("weights must sum to 1"));
        }
        Ok(GaussianMixture { components })
    }

    /// Single Gaussian (or point mass when `variance == 0`).
    pub fn single(mean: f64, variance: f64) -> Self {
        GaussianMixture {
            components: alloc::vec![GmComponent {
                weight: 1.0,
                mean,
                variance,
            }],
        }
    }

    pub fn components(&self) -> &[GmComponent] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + c.mean * c.mean))
            .sum()
    }

    /// Mixture convolved with `N(0, sigma_sq)`: the density of a sample
    /// observed through an AWGN channel.
    pub fn convolved(&self, sigma_sq: f64) -> GaussianMixture {
        GaussianMixture {
            components: self
                .components
                .iter()
                .map(|c| GmComponent {
                    weight: c.weight,
                    mean: c.mean,
                    variance: c.variance + sigma_sq,
                })
                .collect(),
        }
    }

    /// Density at `x`. Point-mass components contribute zero off their mean
    /// and make the density undefined at it; convolve first when the mixture
    /// may contain deltas.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let mut p = 0.0;
        for c in &self.components {
            if c.variance == 0.0 {
                if x == c.mean {
                    return Err(CoreError::DeltaDensity);
                }
            } else {
                p += c.weight * math::gaussian_pdf(x, c.mean, c.variance);
            }
        }
        Ok(p)
    }

    /// Log-density for strictly positive mixtures (all variances > 0),
    /// floored at [`DENSITY_FLOOR`].
    pub fn log_pdf_positive(&self, x: f64) -> f64 {
        let mut p = 0.0;
        for c in &self.components {
            debug_assert!(c.variance > 0.0);
            p += c.weight * math::gaussian_pdf(x, c.mean, c.variance);
        }
        math::ln(p.max(DENSITY_FLOOR))
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut chosen = self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = *c;
                break;
            }
        }
        if chosen.variance == 0.0 {
            chosen.mean
        } else {
            chosen.mean + math::sqrt(chosen.variance) * rng.normal()
        }
    }

    /// Plain-text form: one `weight mean variance` row per component.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.components {
            let _ = writeln!(s, "{} {} {}", c.weight, c.mean, c.variance);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut components = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next = || -> Result<f64> {
                fields
                    .next()
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or(CoreError::InvalidParameter("malformed mixture row"))
            };
            components.push(GmComponent {
                weight: next()?,
                mean: next()?,
                variance: next()?,
            });
        }
        GaussianMixture::new(components)
    }
}

/// Conditional expectation `E[X | Q = q]` for `Q = X + N(0, sigma_v_sq)`
/// under the mixture prior: a posterior-weighted sum of per-component Wiener
/// estimates. With `sigma_v_sq == 0` the channel is noiseless and the
/// denoiser is the identity.
pub fn eta_iid(gm: &GaussianMixture, sigma_v_sq: f64, q: f64) -> f64 {
    if sigma_v_sq == 0.0 {
        return q;
    }
    eta_point(gm.components(), sigma_v_sq, q).0
}

/// Derivative of [`eta_iid`] in `q`, via the exact quotient rule
/// `(f'g - fg') / g^2` with closed-form `f'` and `g'`.
pub fn eta_iid_deriv(gm: &GaussianMixture, sigma_v_sq: f64, q: f64) -> f64 {
    if sigma_v_sq == 0.0 {
        return 1.0;
    }
    eta_point(gm.components(), sigma_v_sq, q).1
}

/// The quotient `(f, f', g, g')` combination is invariant to a common scale
/// on the component densities, so the posterior weights are evaluated
/// relative to the largest log-density; far-field observations then stay
/// well-defined instead of underflowing.
#[inline]
fn eta_point(components: &[GmComponent], sigma_v_sq: f64, q: f64) -> (f64, f64) {
    let mut max_lw = f64::NEG_INFINITY;
    for c in components {
        let cv = c.variance + sigma_v_sq;
        let lw = math::ln(c.weight) + math::gaussian_log_pdf(q, c.mean, cv);
        if lw > max_lw {
            max_lw = lw;
        }
    }
    let mut f = 0.0;
    let mut g = 0.0;
    let mut fp = 0.0;
    let mut gp = 0.0;
    for c in components {
        let cv = c.variance + sigma_v_sq;
        let lw = math::ln(c.weight) + math::gaussian_log_pdf(q, c.mean, cv);
        let p = math::exp(lw - max_lw);
        let d = q - c.mean;
        let wiener = c.variance / cv * d + c.mean;
        f += p * wiener;
        g += p;
        fp += p * ((c.variance + c.mean * c.mean - q * c.mean) / cv
            - c.variance * d * d / (cv * cv));
        gp += p * (-d / cv);
    }
    (f / g, (fp * g - f * gp) / (g * g))
}

/// Estimates and derivatives for a whole slice in one pass.
pub fn denoise_with_gm(gm: &GaussianMixture, sigma_v_sq: f64, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut est = Vec::with_capacity(q.len());
    let mut deriv = Vec::with_capacity(q.len());
    if sigma_v_sq == 0.0 {
        est.extend_from_slice(q);
        deriv.resize(q.len(), 1.0);
        return (est, deriv);
    }
    for &qi in q {
        let (e, d) = eta_point(gm.components(), sigma_v_sq, qi);
        est.push(e);
        deriv.push(d);
    }
    (est, deriv)
}

/// Which noisy-data strategy the EM uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmApproach {
    /// Fit the noisy density directly, police variances against
    /// `sigma_v^2`, subtract the channel noise at the end.
    NoisyFit,
    /// Latent-variable EM estimating clean-component parameters directly.
    LatentEm,
}

/// Tuning for [`fit_gm_noisy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Components with variance below this multiple of `sigma_v^2` are
    /// spurious and removed (NoisyFit only).
    pub variance_kill_ratio: f64,
    /// Variances between the kill and floor multiples of `sigma_v^2` are
    /// pushed up to the floor multiple (NoisyFit only).
    pub variance_floor_ratio: f64,
    /// A symbol farther than this multiple of `std(q)` from every current
    /// initial mean seeds a new component.
    pub init_distance_ratio: f64,
    /// Means sampled from the data before the distance scan.
    pub init_components: usize,
    /// Hard cap on the size of the initial mixture; the distance scan stops
    /// adding once reached.
    pub init_max_components: usize,
    /// Maximum component-wise sweeps.
    pub max_sweeps: usize,
    /// Stop when the relative change of the penalized cost falls below this.
    pub rel_tol: f64,
    pub approach: EmApproach,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            variance_kill_ratio: 0.2,
            variance_floor_ratio: 0.9,
            init_distance_ratio: 0.1,
            init_components: 3,
            init_max_components: 32,
            max_sweeps: 500,
            rel_tol: 1e-5,
            approach: EmApproach::NoisyFit,
        }
    }
}

impl EmConfig {
    pub fn latent() -> Self {
        EmConfig {
            approach: EmApproach::LatentEm,
            ..EmConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.variance_kill_ratio > 0.0
            && self.variance_kill_ratio < self.variance_floor_ratio
            && self.variance_floor_ratio < 1.0)
        {
            return Err(CoreError::InvalidParameter(
                "need 0 < variance_kill_ratio < variance_floor_ratio < 1",
            ));
        }
        if self.init_components == 0 || self.init_max_components < self.init_components {
            return Err(CoreError::InvalidParameter("bad initial component counts"));
        }
        Ok(())
    }
}

/// Per-fit diagnostics.
#[derive(Debug, Clone)]
pub struct EmReport {
    /// Total component-wise sweeps across all annihilation levels.
    pub sweeps: usize,
    pub converged: bool,
    /// Penalized (MML) cost after each sweep of the first descent, before
    /// any forced annihilation.
    pub cost_trace: Vec<f64>,
    /// Converged (component count, cost) at each annihilation level.
    pub level_costs: Vec<(usize, f64)>,
}

/// Initial means: `init_components` samples from `q`, then one scan over `q`
/// adding a component at every symbol farther than
/// `init_distance_ratio * std(q)` from all current means (up to the cap).
pub fn initial_means(q: &[f64], cfg: &EmConfig, rng: &mut Rng) -> Vec<f64> {
    let sigma_q = math::sqrt(math::variance(q));
    let radius = cfg.init_distance_ratio * sigma_q;
    let mut means = Vec::with_capacity(cfg.init_components);
    for _ in 0..cfg.init_components {
        means.push(q[rng.index(q.len())]);
    }
    for &qi in q {
        if means.len() >= cfg.init_max_components {
            break;
        }
        let covered = means.iter().any(|&m| math::abs(qi - m) <= radius);
        if !covered {
            means.push(qi);
        }
    }
    means
}

/// Learns a clean-signal mixture from noisy samples `q = x + N(0,
/// sigma_v_sq)`.
pub fn fit_gm_noisy(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &EmConfig,
    seed: u64,
) -> Result<GaussianMixture> {
    fit_gm_noisy_detailed(q, sigma_v_sq, cfg, &Stream::new(seed)).map(|(gm, _)| gm)
}

/// As [`fit_gm_noisy`] but keyed by a [`Stream`] and returning diagnostics.
pub fn fit_gm_noisy_detailed(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &EmConfig,
    stream: &Stream,
) -> Result<(GaussianMixture, EmReport)> {
    check_fit_input(q, sigma_v_sq, cfg)?;
    let var_q = math::variance(q);
    if var_q < 1e-30 {
        // Constant data admits only a point mass.
        let gm = GaussianMixture::single(math::mean(q), 0.0);
        return Ok((
            gm,
            EmReport {
                sweeps: 0,
                converged: true,
                cost_trace: Vec::new(),
                level_costs: Vec::new(),
            },
        ));
    }
    let mut rng = stream.rng();
    let means = initial_means(q, cfg, &mut rng);
    let s0 = means.len();
    let init_var = match cfg.approach {
        // Channel-domain spread for the direct fit, clean-domain otherwise.
        EmApproach::NoisyFit => var_q / 10.0,
        EmApproach::LatentEm => var_q / 10.0,
    };
    let weight = 1.0 / s0 as f64;
    let comps: Vec<Comp> = means
        .into_iter()
        .map(|m| Comp {
            alpha: weight,
            mean: m,
            var: init_var,
        })
        .collect();
    run_em(q, sigma_v_sq, cfg, comps)
}

/// Runs the EM from an explicit clean-signal mixture instead of the
/// sampled-means initialization (used to warm-start refits of merged
/// subsequences).
pub fn fit_gm_noisy_from(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &EmConfig,
    init: &GaussianMixture,
) -> Result<(GaussianMixture, EmReport)> {
    check_fit_input(q, sigma_v_sq, cfg)?;
    let comps: Vec<Comp> = init
        .components()
        .iter()
        .map(|c| Comp {
            alpha: c.weight,
            mean: c.mean,
            var: match cfg.approach {
                EmApproach::NoisyFit => c.variance + sigma_v_sq,
                EmApproach::LatentEm => c.variance,
            },
        })
        .collect();
    run_em(q, sigma_v_sq, cfg, comps)
}

fn check_fit_input(q: &[f64], sigma_v_sq: f64, cfg: &EmConfig) -> Result<()> {
    cfg.validate()?;
    if q.len() < 2 {
        return Err(CoreError::InputTooShort {
            len: q.len(),
            min: 2,
        });
    }
    if !(sigma_v_sq >= 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be >= 0"));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFiniteInput("noisy samples"));
    }
    Ok(())
}

/// Internal mixture state. For NoisyFit `var` lives in the channel domain
/// (clean variance + sigma_v^2); for LatentEm it is the clean variance.
#[derive(Debug, Clone, Copy)]
struct Comp {
    alpha: f64,
    mean: f64,
    var: f64,
}

/// Parameters per component in the MML weight update (mean and variance).
const N_PAR: f64 = 2.0;

/// Density column of one component over all samples. `cv` is the
/// channel-domain variance.
fn fill_column(q: &[f64], mean: f64, cv: f64, out: &mut [f64]) {
    if cv <= 0.0 {
        // Only reachable with sigma_v_sq == 0 and a degenerated component;
        // an infinitely narrow spike that the density floor erases.
        for (o, &qi) in out.iter_mut().zip(q) {
            *o = if qi == mean { 1.0 / DENSITY_FLOOR } else { 0.0 };
        }
        return;
    }
    let inv2v = 0.5 / cv;
    let norm = 1.0 / math::sqrt(math::TAU * cv);
    for (o, &qi) in out.iter_mut().zip(q) {
        let d = qi - mean;
        let e = d * d * inv2v;
        *o = if e > 745.0 { 0.0 } else { norm * math::exp(-e) };
    }
}

struct EmState<'a> {
    q: &'a [f64],
    sigma_v_sq: f64,
    cfg: EmConfig,
    comps: Vec<Comp>,
    /// Per-sample mixture density under the current parameters.
    denom: Vec<f64>,
    /// Cached responsibility sums, refreshed whenever a component is
    /// visited.
    sum_w: Vec<f64>,
    col: Vec<f64>,
    col_new: Vec<f64>,
}

impl<'a> EmState<'a> {
    fn channel_var(&self, c: &Comp) -> f64 {
        match self.cfg.approach {
            EmApproach::NoisyFit => c.var,
            EmApproach::LatentEm => c.var + self.sigma_v_sq,
        }
    }

    fn refresh_denominator(&mut self) {
        self.denom.iter_mut().for_each(|d| *d = 0.0);
        for idx in 0..self.comps.len() {
            let c = self.comps[idx];
            let cv = self.channel_var(&c);
            fill_column(self.q, c.mean, cv, &mut self.col);
            for (d, &p) in self.denom.iter_mut().zip(&self.col) {
                *d += c.alpha * p;
            }
        }
    }

    fn refresh_sum_w(&mut self) {
        self.sum_w.clear();
        for idx in 0..self.comps.len() {
            let c = self.comps[idx];
            let cv = self.channel_var(&c);
            fill_column(self.q, c.mean, cv, &mut self.col);
            let mut sw = 0.0;
            for (&p, &d) in self.col.iter().zip(&self.denom) {
                sw += c.alpha * p / d.max(DENSITY_FLOOR);
            }
            self.sum_w.push(sw);
        }
    }

    /// Penalized cost under the current parameters: coding length of the
    /// component parameters and weights minus the data log-likelihood.
    fn cost(&self) -> f64 {
        let n = self.q.len() as f64;
        let mut c = 0.0;
        for comp in &self.comps {
            c += N_PAR / 2.0 * math::ln(n * comp.alpha);
        }
        c += self.comps.len() as f64 / 2.0 * math::ln(n);
        let mut loglik = 0.0;
        for &d in &self.denom {
            loglik += math::ln(d.max(DENSITY_FLOOR));
        }
        c - loglik
    }

    /// Removes component `s`, renormalizes the weights, and updates the
    /// cached denominators. `self.col` must hold the density column of
    /// component `s` under its current parameters.
    fn remove_component(&mut self, s: usize) {
        let alpha_old = self.comps[s].alpha;
        self.comps.remove(s);
        self.sum_w.remove(s);
        if self.comps.is_empty() {
            return;
        }
        let total: f64 = self.comps.iter().map(|c| c.alpha).sum();
        let inv = 1.0 / total;
        for c in self.comps.iter_mut() {
            c.alpha *= inv;
        }
        for (d, &p) in self.denom.iter_mut().zip(&self.col) {
            *d = (*d - alpha_old * p).max(0.0) * inv;
        }
    }

    /// One visit of component `s`. Returns `true` if the component survived
    /// (advance to the next index) or `false` if it was removed.
    fn visit(&mut self, s: usize) -> Result<bool> {
        let comp = self.comps[s];
        let cv_old = self.channel_var(&comp);
        fill_column(self.q, comp.mean, cv_old, &mut self.col);

        // E-step responsibilities for this component plus the moment sums
        // the M-step needs. LatentEm replaces the raw samples with the
        // per-component posterior means of the latent clean values.
        let (shrink, latent_var) = match self.cfg.approach {
            EmApproach::NoisyFit => (1.0, 0.0),
            EmApproach::LatentEm => {
                let cv = comp.var + self.sigma_v_sq;
                if cv > 0.0 {
                    (comp.var / cv, self.sigma_v_sq * comp.var / cv)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        let latent = self.cfg.approach == EmApproach::LatentEm;
        let mut sw = 0.0;
        let mut sw_x = 0.0;
        for ((&p, &d), &qi) in self.col.iter().zip(&self.denom).zip(self.q) {
            let w = comp.alpha * p / d.max(DENSITY_FLOOR);
            let a = if latent {
                shrink * (qi - comp.mean) + comp.mean
            } else {
                qi
            };
            sw += w;
            sw_x += w * a;
        }
        self.sum_w[s] = sw;

        // MML weight update across the cached support sizes.
        let raw = (sw - N_PAR / 2.0).max(0.0);
        let raw_total: f64 = self
            .sum_w
            .iter()
            .map(|&x| (x - N_PAR / 2.0).max(0.0))
            .sum();
        if raw <= 0.0 || raw_total <= 0.0 {
            self.remove_component(s);
            if self.comps.is_empty() {
                return Err(CoreError::DegenerateFit);
            }
            return Ok(false);
        }
        let alpha_new = raw / raw_total;

        // M-step for the mean and variance.
        let mean_new = sw_x / sw;
        let mut var_acc = 0.0;
        for ((&p, &d), &qi) in self.col.iter().zip(&self.denom).zip(self.q) {
            let w = comp.alpha * p / d.max(DENSITY_FLOOR);
            let a = if latent {
                shrink * (qi - comp.mean) + comp.mean
            } else {
                qi
            };
            let dx = a - mean_new;
            var_acc += w * (latent_var + dx * dx);
        }
        let mut var_new = var_acc / sw;

        // Variance policing against the channel noise level (NoisyFit).
        if self.cfg.approach == EmApproach::NoisyFit && self.sigma_v_sq > 0.0 {
            let kill = self.cfg.variance_kill_ratio * self.sigma_v_sq;
            let floor = self.cfg.variance_floor_ratio * self.sigma_v_sq;
            if var_new < kill {
                self.remove_component(s);
                if self.comps.is_empty() {
                    return Err(CoreError::DegenerateFit);
                }
                return Ok(false);
            }
            if var_new <= floor {
                var_new = floor;
            }
        }

        // Commit, renormalize the weights, and refresh the denominators in
        // one fused pass.
        let alpha_old = comp.alpha;
        self.comps[s] = Comp {
            alpha: alpha_new,
            mean: mean_new,
            var: var_new,
        };
        let total: f64 = self.comps.iter().map(|c| c.alpha).sum();
        let inv = 1.0 / total;
        for c in self.comps.iter_mut() {
            c.alpha *= inv;
        }
        let comp_new = self.comps[s];
        let cv_new = self.channel_var(&comp_new);
        fill_column(self.q, comp_new.mean, cv_new, &mut self.col_new);
        for ((d, &p_old), &p_new) in self.denom.iter_mut().zip(&self.col).zip(&self.col_new) {
            *d = ((*d - alpha_old * p_old).max(0.0) + alpha_new * p_new) * inv;
        }
        Ok(true)
    }
}

/// Runs the model down one annihilation ladder: component-wise EM to
/// convergence, snapshot, force out the weakest component, repeat until one
/// component remains. The best-cost model over the whole ladder wins; this
/// is what lets heavily over-seeded initializations coalesce instead of
/// freezing into a lattice of overlapping components.
fn run_em(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &EmConfig,
    comps: Vec<Comp>,
) -> Result<(GaussianMixture, EmReport)> {
    let n = q.len();
    let mut state = EmState {
        q,
        sigma_v_sq,
        cfg: *cfg,
        comps,
        denom: alloc::vec![0.0; n],
        sum_w: Vec::new(),
        col: alloc::vec![0.0; n],
        col_new: alloc::vec![0.0; n],
    };
    state.refresh_denominator();
    state.refresh_sum_w();

    let sweep_budget = cfg.max_sweeps.saturating_mul(8);
    let mut total_sweeps = 0;
    let mut cost_trace = Vec::new();
    let mut level_costs = Vec::new();
    let mut converged_any = false;
    let mut best: Option<(Vec<Comp>, f64)> = None;
    let mut first_descent = true;
    let mut degenerated = false;

    'ladder: loop {
        let mut prev_cost = f64::INFINITY;
        let mut inner_converged = false;
        for _ in 0..cfg.max_sweeps {
            let mut s = 0;
            while s < state.comps.len() {
                match state.visit(s) {
                    Ok(true) => s += 1,
                    Ok(false) => {}
                    Err(CoreError::DegenerateFit) => {
                        degenerated = true;
                        break 'ladder;
                    }
                    Err(e) => return Err(e),
                }
            }
            total_sweeps += 1;
            // Exact denominators once per sweep keep incremental drift
            // bounded and feed the cost evaluation.
            state.refresh_denominator();
            let cost = state.cost();
            if first_descent {
                cost_trace.push(cost);
            }
            debug_assert!(
                math::abs(state.comps.iter().map(|c| c.alpha).sum::<f64>() - 1.0) < 1e-10,
                "weights drifted"
            );
            if prev_cost.is_finite() {
                let scale = math::abs(prev_cost).max(1e-12);
                if math::abs(cost - prev_cost) <= cfg.rel_tol * scale {
                    inner_converged = true;
                    break;
                }
            }
            prev_cost = cost;
            if total_sweeps >= sweep_budget {
                break;
            }
        }
        first_descent = false;
        converged_any |= inner_converged;

        let cost = state.cost();
        level_costs.push((state.comps.len(), cost));
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((state.comps.clone(), cost));
        }
        if state.comps.len() <= 1 || total_sweeps >= sweep_budget {
            break;
        }
        // Force out the weakest component and re-converge.
        let weakest = state
            .comps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.alpha.partial_cmp(&b.1.alpha).expect("finite weights"))
            .map(|(i, _)| i)
            .expect("non-empty");
        let comp = state.comps[weakest];
        let cv = state.channel_var(&comp);
        fill_column(state.q, comp.mean, cv, &mut state.col);
        state.remove_component(weakest);
        state.refresh_denominator();
        state.refresh_sum_w();
    }

    let Some((best_comps, _)) = best else {
        return Err(CoreError::DegenerateFit);
    };
    let _ = degenerated;

    // Channel-noise subtraction for the direct fit: floor variances at the
    // noise level first so clean variances are never negative; exact zeros
    // become point masses.
    let total: f64 = best_comps.iter().map(|c| c.alpha).sum();
    let mut out = Vec::with_capacity(best_comps.len());
    for c in &best_comps {
        let variance = match cfg.approach {
            EmApproach::NoisyFit => (c.var.max(sigma_v_sq) - sigma_v_sq).max(0.0),
            EmApproach::LatentEm => c.var.max(0.0),
        };
        out.push(GmComponent {
            weight: c.alpha / total,
            mean: c.mean,
            variance,
        });
    }
    let gm = GaussianMixture::new(out)?;
    Ok((
        gm,
        EmReport {
            sweeps: total_sweeps,
            converged: converged_any,
            cost_trace,
            level_costs,
        },
    ))
}

/// Diagnostic hook: runs plain component-wise sweeps from the standard
/// initialization (no annihilation ladder, no channel-noise subtraction)
/// and returns the raw mixture state after each sweep. Useful for checking
/// the update equations against an independent implementation.
pub fn em_sweep_trace(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &EmConfig,
    stream: &Stream,
    n_sweeps: usize,
) -> Result<Vec<GaussianMixture>> {
    check_fit_input(q, sigma_v_sq, cfg)?;
    let mut rng = stream.rng();
    let means = initial_means(q, cfg, &mut rng);
    let weight = 1.0 / means.len() as f64;
    let init_var = math::variance(q) / 10.0;
    let comps: Vec<Comp> = means
        .into_iter()
        .map(|m| Comp {
            alpha: weight,
            mean: m,
            var: init_var,
        })
        .collect();
    let n = q.len();
    let mut state = EmState {
        q,
        sigma_v_sq,
        cfg: *cfg,
        comps,
        denom: alloc::vec![0.0; n],
        sum_w: Vec::new(),
        col: alloc::vec![0.0; n],
        col_new: alloc::vec![0.0; n],
    };
    state.refresh_denominator();
    state.refresh_sum_w();
    let mut trace = Vec::with_capacity(n_sweeps);
    for _ in 0..n_sweeps {
        let mut s = 0;
        while s < state.comps.len() {
            match state.visit(s) {
                Ok(true) => s += 1,
                Ok(false) => {}
                Err(e) => return Err(e),
            }
        }
        state.refresh_denominator();
        trace.push(GaussianMixture::new(
            state
                .comps
                .iter()
                .map(|c| GmComponent {
                    weight: c.alpha,
                    mean: c.mean,
                    variance: c.var,
                })
                .collect(),
        )?);
    }
    Ok(trace)
}
