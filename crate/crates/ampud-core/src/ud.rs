//! Universal scalar-channel denoiser via context quantization.
//!
//! Symbols whose weighted contexts cluster together are treated as one
//! i.i.d. subsequence: a Gaussian mixture is learned from each subsequence's
//! noisy values and the mixture denoiser is applied to exactly those
//! symbols. Two remedies for under-populated clusters are implemented:
//!
//! * **UD1** — clusters smaller than `min_fit` borrow the nearest outside
//!   symbols (by weighted-context distance to the centroid) for fitting
//!   only; borrowed symbols are never denoised by the borrowing cluster.
//! * **UD2** — clusters are merged greedily: the pair with the smallest
//!   symmetrized KL distance between fitted channel densities is merged
//!   whenever doing so lowers a four-part MDL cost (data log-loss, parameter
//!   penalty, component-count bits, cluster-mapping bits).

use alloc::vec;
use alloc::vec::Vec;

use crate::context::{
    build_contexts, cluster_contexts, context_weights, decay_rate, weight_contexts,
    ContextPartition,
};
use crate::error::{CoreError, Result};
use crate::gm::{
    denoise_with_gm, fit_gm_noisy_detailed, fit_gm_noisy_from, EmConfig, GaussianMixture,
    GmComponent, DENSITY_FLOOR,
};
use crate::math;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UdVariant {
    Ud1,
    Ud2,
}

/// Universal-denoiser configuration. `ud1()` and `ud2()` carry the standard
/// parameter sets (context length 12; 10 clusters with a 256-symbol fitting
/// floor, or 30 clusters with KL/MDL merging).
#[derive(Debug, Clone)]
pub struct UdConfig {
    /// Context half-width; contexts have length `2k`.
    pub k: usize,
    /// Slope of the decay rate in the log-SNR.
    pub b1: f64,
    /// Offset of the decay rate.
    pub b2: f64,
    /// Clusters requested from k-means (empty ones are dropped).
    pub l_init: usize,
    /// Minimum symbols per mixture fit; smaller clusters borrow (UD1).
    pub min_fit: usize,
    /// Merging stops once the smallest symmetrized KL distance exceeds this
    /// (UD2).
    pub kl_stop: f64,
    /// Monte-Carlo sample count per KL direction.
    pub kl_samples: usize,
    pub variant: UdVariant,
    pub em: EmConfig,
}

impl UdConfig {
    pub fn ud1() -> Self {
        UdConfig {
            k: 6,
            b1: 0.3,
            b2: 0.5,
            l_init: 10,
            min_fit: 256,
            kl_stop: 2.0,
            kl_samples: 10_000,
            variant: UdVariant::Ud1,
            em: EmConfig {
                // Per-cluster fits see at most a few thousand symbols; a
                // leaner initial mixture reaches the same converged model
                // down the annihilation ladder at half the cost.
                init_max_components: 16,
                ..EmConfig::default()
            },
        }
    }

    pub fn ud2() -> Self {
        UdConfig {
            l_init: 30,
            variant: UdVariant::Ud2,
            ..UdConfig::ud1()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CoreError::InvalidParameter("context half-width must be >= 1"));
        }
        if self.l_init == 0 || self.min_fit == 0 || self.kl_samples == 0 {
            return Err(CoreError::InvalidParameter("counts must be >= 1"));
        }
        if !(self.b1 > 0.0) {
            return Err(CoreError::InvalidParameter("b1 must be > 0"));
        }
        Ok(())
    }
}

/// Estimates, Onsager derivatives, and run diagnostics.
#[derive(Debug, Clone)]
pub struct UdOutput {
    pub estimate: Vec<f64>,
    pub derivative: Vec<f64>,
    pub diagnostics: UdDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct UdDiagnostics {
    pub beta: f64,
    pub initial_cluster_sizes: Vec<usize>,
    pub final_cluster_sizes: Vec<usize>,
    /// Accepted-model MDL costs, starting with the unmerged model (UD2).
    pub mdl_trace: Vec<f64>,
    /// Accepted merges as (id_a, id_b); initial clusters are 0..L0 and
    /// merged subsequences get fresh ids (UD2).
    pub merges: Vec<(u64, u64)>,
    /// Clean-signal mixture of each final subsequence.
    pub final_models: Vec<GaussianMixture>,
}

const TAG_KMEANS: u64 = 0;
const TAG_FIT: u64 = 1;
const TAG_KL: u64 = 2;

/// Runs the configured variant.
pub fn denoise_ud(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &UdConfig,
    stream: &Stream,
) -> Result<UdOutput> {
    match cfg.variant {
        UdVariant::Ud1 => denoise_ud1(q, sigma_v_sq, cfg, stream),
        UdVariant::Ud2 => denoise_ud2(q, sigma_v_sq, cfg, stream),
    }
}

fn check_input(q: &[f64], sigma_v_sq: f64, cfg: &UdConfig) -> Result<()> {
    cfg.validate()?;
    if q.len() <= 2 * cfg.k {
        return Err(CoreError::InputTooShort {
            len: q.len(),
            min: 2 * cfg.k + 1,
        });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFiniteInput("noisy sequence"));
    }
    if !(sigma_v_sq >= 0.0) {
        return Err(CoreError::InvalidParameter("sigma_v_sq must be >= 0"));
    }
    Ok(())
}

/// Noiseless channel: conditional expectation is the identity.
fn identity_output(q: &[f64]) -> UdOutput {
    UdOutput {
        estimate: q.to_vec(),
        derivative: vec![1.0; q.len()],
        diagnostics: UdDiagnostics::default(),
    }
}

struct Quantized {
    partition: ContextPartition,
    weighted: Vec<f64>,
    beta: f64,
}

fn quantize(q: &[f64], sigma_v_sq: f64, cfg: &UdConfig, stream: &Stream) -> Result<Quantized> {
    let mut contexts = build_contexts(q, cfg.k)?;
    let beta = decay_rate(q, sigma_v_sq, cfg.b1, cfg.b2);
    let weights = context_weights(cfg.k, beta);
    weight_contexts(&mut contexts, &weights);
    let l_init = cfg.l_init.min(q.len());
    let partition = cluster_contexts(&contexts, 2 * cfg.k, l_init, &stream.derive(TAG_KMEANS))?;
    Ok(Quantized {
        partition,
        weighted: contexts,
        beta,
    })
}

/// Moment-matched single Gaussian, used when the mixture fit degenerates.
/// The channel-domain variance is floored at the noise level.
fn moment_fallback(values: &[f64], sigma_v_sq: f64) -> GaussianMixture {
    let mean = math::mean(values);
    let var = math::variance(values).max(sigma_v_sq) - sigma_v_sq;
    GaussianMixture::single(mean, var)
}

fn fit_cluster(
    values: &[f64],
    sigma_v_sq: f64,
    em: &EmConfig,
    stream: &Stream,
) -> GaussianMixture {
    fit_gm_noisy_detailed(values, sigma_v_sq, em, stream)
        .map(|(gm, _)| gm)
        .unwrap_or_else(|_| moment_fallback(values, sigma_v_sq))
}

#[inline]
fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// UD1: fit on at least `min_fit` symbols by borrowing nearest contexts;
/// denoise only the cluster's own members.
pub fn denoise_ud1(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &UdConfig,
    stream: &Stream,
) -> Result<UdOutput> {
    check_input(q, sigma_v_sq, cfg)?;
    if sigma_v_sq == 0.0 {
        return Ok(identity_output(q));
    }
    let n = q.len();
    let quant = quantize(q, sigma_v_sq, cfg, stream)?;
    let partition = &quant.partition;
    let dim = partition.dim;

    let mut estimate = vec![0.0; n];
    let mut derivative = vec![0.0; n];
    let mut final_models = Vec::with_capacity(partition.cluster_count);
    let initial_cluster_sizes = partition.cluster_sizes();

    for l in 0..partition.cluster_count {
        let members = partition.members(l);
        let mut fit_values: Vec<f64> = members.iter().map(|&i| q[i]).collect();
        if members.len() < cfg.min_fit {
            let centroid = &partition.centroids[l * dim..(l + 1) * dim];
            let mut candidates: Vec<(f64, usize)> = (0..n)
                .filter(|&i| partition.labels[i] != l)
                .map(|i| (dist_sq(&quant.weighted[i * dim..(i + 1) * dim], centroid), i))
                .collect();
            candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            for &(_, i) in candidates.iter().take(cfg.min_fit - members.len()) {
                fit_values.push(q[i]);
            }
        }
        let gm = fit_cluster(
            &fit_values,
            sigma_v_sq,
            &cfg.em,
            &stream.derive2(TAG_FIT, l as u64),
        );
        let member_values: Vec<f64> = members.iter().map(|&i| q[i]).collect();
        let (est, der) = denoise_with_gm(&gm, sigma_v_sq, &member_values);
        for (pos, &i) in members.iter().enumerate() {
            estimate[i] = est[pos];
            derivative[i] = der[pos];
        }
        final_models.push(gm);
    }

    Ok(UdOutput {
        estimate,
        derivative,
        diagnostics: UdDiagnostics {
            beta: quant.beta,
            final_cluster_sizes: initial_cluster_sizes.clone(),
            initial_cluster_sizes,
            mdl_trace: Vec::new(),
            merges: Vec::new(),
            final_models,
        },
    })
}

/// Monte-Carlo estimate of `D(p || r)` by sampling from `p`. Both mixtures
/// must have strictly positive densities (channel-domain mixtures).
pub fn kl_distance_gm(
    p: &GaussianMixture,
    r: &GaussianMixture,
    n_samples: usize,
    stream: &Stream,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(CoreError::InvalidParameter("n_samples must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let x = p.sample(&mut rng);
        acc += p.log_pdf_positive(x) - r.log_pdf_positive(x);
    }
    let d = acc / n_samples as f64;
    if !d.is_finite() {
        return Err(CoreError::Numerical("KL estimate non-finite"));
    }
    Ok(d)
}

/// One subsequence in the MDL cost.
pub struct MdlGroup<'a> {
    pub values: &'a [f64],
    /// Channel-domain (noise-convolved) mixture fitted to `values`.
    pub channel_gm: &'a GaussianMixture,
    /// Number of initial clusters merged into this subsequence.
    pub merged_count: usize,
}

/// The four MDL terms, kept separate for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdlBreakdown {
    /// Negative log-likelihood of all symbols under their subsequence
    /// models.
    pub nll: f64,
    /// `(3 m / 2) ln |q|` per subsequence: three parameters per component.
    pub parameter_penalty: f64,
    /// Two bits per subsequence for its component count.
    pub component_bits: f64,
    /// Cost of mapping the initial clusters onto the current subsequences.
    pub mapping_cost: f64,
    /// Whether any density evaluation hit the floor.
    pub clamped: bool,
}

impl MdlBreakdown {
    pub fn total(&self) -> f64 {
        self.nll + self.parameter_penalty + self.component_bits + self.mapping_cost
    }
}

/// Four-term MDL cost of a model: `sum -ln p + sum (3m/2) ln|q| + 2 L_h +
/// L0 sum (n/L0) ln(L0/n)`.
pub fn mdl_cost(groups: &[MdlGroup<'_>], l0: usize) -> MdlBreakdown {
    let mut nll = 0.0;
    let mut parameter_penalty = 0.0;
    let mut mapping_cost = 0.0;
    let mut clamped = false;
    for g in groups {
        for &v in g.values {
            let p = g
                .channel_gm
                .pdf(v)
                .unwrap_or(0.0);
            if p < DENSITY_FLOOR {
                clamped = true;
            }
            nll -= math::ln(p.max(DENSITY_FLOOR));
        }
        parameter_penalty +=
            1.5 * g.channel_gm.component_count() as f64 * math::ln(g.values.len() as f64);
        mapping_cost += g.merged_count as f64 * math::ln(l0 as f64 / g.merged_count as f64);
    }
    MdlBreakdown {
        nll,
        parameter_penalty,
        component_bits: 2.0 * groups.len() as f64,
        mapping_cost,
        clamped,
    }
}

struct Subsequence {
    id: u64,
    indices: Vec<usize>,
    values: Vec<f64>,
    clean: GaussianMixture,
    channel: GaussianMixture,
    merged_count: usize,
    /// Cached per-subsequence MDL contribution: nll + parameter penalty +
    /// mapping bits.
    term: f64,
}

fn subsequence_term(values: &[f64], channel: &GaussianMixture, merged: usize, l0: usize) -> f64 {
    let mut nll = 0.0;
    for &v in values {
        nll -= channel.log_pdf_positive(v);
    }
    nll + 1.5 * channel.component_count() as f64 * math::ln(values.len() as f64)
        + merged as f64 * math::ln(l0 as f64 / merged as f64)
}

fn make_subsequence(
    id: u64,
    indices: Vec<usize>,
    q: &[f64],
    sigma_v_sq: f64,
    clean: GaussianMixture,
    merged_count: usize,
    l0: usize,
) -> Subsequence {
    let values: Vec<f64> = indices.iter().map(|&i| q[i]).collect();
    let channel = clean.convolved(sigma_v_sq);
    let term = subsequence_term(&values, &channel, merged_count, l0);
    Subsequence {
        id,
        indices,
        values,
        clean,
        channel,
        merged_count,
        term,
    }
}

fn sym_kl(a: &Subsequence, b: &Subsequence, cfg: &UdConfig, kl_stream: &Stream) -> Result<f64> {
    let forward = kl_distance_gm(
        &a.channel,
        &b.channel,
        cfg.kl_samples,
        &kl_stream.derive2(a.id, b.id),
    )?;
    let backward = kl_distance_gm(
        &b.channel,
        &a.channel,
        cfg.kl_samples,
        &kl_stream.derive2(b.id, a.id),
    )?;
    Ok(forward + backward)
}

/// Warm start for refitting a merged subsequence: the size-weighted union
/// of the two clean mixtures, plus fresh components seeded at any merged
/// symbol left uncovered by the union means (the same distance rule as the
/// standard initialization). Without the re-scan, rare symbols whose
/// components were annihilated in the small per-cluster fits could never be
/// recovered by a merge.
fn union_mixture(a: &Subsequence, b: &Subsequence, values: &[f64], em: &EmConfig) -> GaussianMixture {
    let wa = a.values.len() as f64 / (a.values.len() + b.values.len()) as f64;
    let mut comps: Vec<GmComponent> = Vec::with_capacity(
        a.clean.component_count() + b.clean.component_count(),
    );
    for c in a.clean.components() {
        comps.push(GmComponent {
            weight: c.weight * wa,
            ..*c
        });
    }
    for c in b.clean.components() {
        comps.push(GmComponent {
            weight: c.weight * (1.0 - wa),
            ..*c
        });
    }
    let radius = em.init_distance_ratio * math::sqrt(math::variance(values));
    let fill_var = math::variance(values) / 10.0;
    let existing = comps.len();
    for &v in values {
        if comps.len() >= em.init_max_components.max(existing) {
            break;
        }
        if comps.iter().all(|c| math::abs(v - c.mean) > radius) {
            comps.push(GmComponent {
                weight: 0.0,
                mean: v,
                variance: fill_var,
            });
        }
    }
    let added = comps.len() - existing;
    if added > 0 {
        let share = 1.0 / comps.len() as f64;
        for c in comps[existing..].iter_mut() {
            c.weight = share;
        }
        let scale = 1.0 - added as f64 * share;
        for c in comps[..existing].iter_mut() {
            c.weight *= scale;
        }
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
    GaussianMixture::new(comps).expect("union of valid mixtures is valid")
}

/// UD2: greedy KL-guided merging under the MDL criterion, then per-
/// subsequence denoising.
pub fn denoise_ud2(
    q: &[f64],
    sigma_v_sq: f64,
    cfg: &UdConfig,
    stream: &Stream,
) -> Result<UdOutput> {
    check_input(q, sigma_v_sq, cfg)?;
    if sigma_v_sq == 0.0 {
        return Ok(identity_output(q));
    }
    let n = q.len();
    let quant = quantize(q, sigma_v_sq, cfg, stream)?;
    let partition = &quant.partition;
    let l0 = partition.cluster_count;
    let kl_stream = stream.derive(TAG_KL);

    let mut subs: Vec<Subsequence> = Vec::with_capacity(l0);
    for l in 0..l0 {
        let indices = partition.members(l);
        let values: Vec<f64> = indices.iter().map(|&i| q[i]).collect();
        let clean = fit_cluster(
            &values,
            sigma_v_sq,
            &cfg.em,
            &stream.derive2(TAG_FIT, l as u64),
        );
        subs.push(make_subsequence(
            l as u64, indices, q, sigma_v_sq, clean, 1, l0,
        ));
    }
    let mut next_id = l0 as u64;

    // Symmetrized KL distance matrix; entries are reused across merges
    // because the Monte-Carlo seeds are keyed by subsequence ids.
    let mut dist = vec![vec![0.0f64; subs.len()]; subs.len()];
    for s in 0..subs.len() {
        for t in (s + 1)..subs.len() {
            let d = sym_kl(&subs[s], &subs[t], cfg, &kl_stream)?;
            dist[s][t] = d;
            dist[t][s] = d;
        }
    }

    let mut cost: f64 = subs.iter().map(|s| s.term).sum::<f64>() + 2.0 * subs.len() as f64;
    let mut mdl_trace = vec![cost];
    let mut merges = Vec::new();

    while subs.len() > 1 {
        // Candidate pairs by ascending distance; only statistically similar
        // pairs (within the KL stop threshold) are considered.
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for s in 0..subs.len() {
            for t in (s + 1)..subs.len() {
                if dist[s][t] <= cfg.kl_stop {
                    candidates.push((dist[s][t], s, t));
                }
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        if candidates.is_empty() {
            break;
        }

        let mut accepted = None;
        for &(_, s, t) in &candidates {
            let mut indices =
                Vec::with_capacity(subs[s].indices.len() + subs[t].indices.len());
            indices.extend_from_slice(&subs[s].indices);
            indices.extend_from_slice(&subs[t].indices);
            indices.sort_unstable();
            let values: Vec<f64> = indices.iter().map(|&i| q[i]).collect();
            let init = union_mixture(&subs[s], &subs[t], &values, &cfg.em);
            let clean = fit_gm_noisy_from(&values, sigma_v_sq, &cfg.em, &init)
                .map(|(gm, _)| gm)
                .unwrap_or_else(|_| moment_fallback(&values, sigma_v_sq));
            let merged = make_subsequence(
                next_id,
                indices,
                q,
                sigma_v_sq,
                clean,
                subs[s].merged_count + subs[t].merged_count,
                l0,
            );
            // Component-count bits drop by 2 when two subsequences fuse.
            let new_cost = cost - subs[s].term - subs[t].term + merged.term - 2.0;
            if new_cost < cost {
                accepted = Some((s, t, merged, new_cost));
                break;
            }
        }

        let Some((s, t, merged, new_cost)) = accepted else {
            break;
        };
        next_id += 1;
        merges.push((subs[s].id, subs[t].id));
        // Remove t first (t > s) so s stays valid.
        subs.remove(t);
        subs.remove(s);
        for row in dist.iter_mut() {
            row.remove(t);
            row.remove(s);
        }
        dist.remove(t);
        dist.remove(s);
        let mut new_row = Vec::with_capacity(subs.len() + 1);
        for other in &subs {
            new_row.push(sym_kl(&merged, other, cfg, &kl_stream)?);
        }
        for (row, &d) in dist.iter_mut().zip(&new_row) {
            row.push(d);
        }
        new_row.push(0.0);
        dist.push(new_row);
        subs.push(merged);
        cost = new_cost;
        mdl_trace.push(cost);
    }

    let mut estimate = vec![0.0; n];
    let mut derivative = vec![0.0; n];
    let mut final_models = Vec::with_capacity(subs.len());
    let mut final_cluster_sizes = Vec::with_capacity(subs.len());
    for sub in &subs {
        let (est, der) = denoise_with_gm(&sub.clean, sigma_v_sq, &sub.values);
        for (pos, &i) in sub.indices.iter().enumerate() {
            estimate[i] = est[pos];
            derivative[i] = der[pos];
        }
        final_models.push(sub.clean.clone());
        final_cluster_sizes.push(sub.indices.len());
    }

    Ok(UdOutput {
        estimate,
        derivative,
        diagnostics: UdDiagnostics {
            beta: quant.beta,
            initial_cluster_sizes: partition.cluster_sizes(),
            final_cluster_sizes,
            mdl_trace,
            merges,
            final_models,
        },
    })
}
