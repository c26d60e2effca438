//! Structural properties of the universal denoiser on realistic inputs.

use ampud_core::gm::{denoise_with_gm, fit_gm_noisy_detailed, EmConfig};
use ampud_core::math;
use ampud_core::rng::Stream;
use ampud_core::source::IidSourceSpec;
use ampud_core::ud::{denoise_ud, denoise_ud1, denoise_ud2, UdConfig};

fn iid_channel(n: usize, sigma_v_sq: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let spec = IidSourceSpec::sparse_laplace(0.05).unwrap();
    let stream = Stream::new(seed);
    let x = spec.generate(n, stream.derive(0).rng().next_u64()).unwrap();
    let mut rng = stream.derive(1).rng();
    let sd = sigma_v_sq.sqrt();
    let q = x.iter().map(|&v| v + sd * rng.normal()).collect();
    (x, q)
}

#[test]
fn subsequencing_cannot_hurt_iid_inputs_much() {
    // For an i.i.d. input every cluster sees the same distribution, so both
    // variants must stay within 5% of the MSE obtained by fitting one
    // mixture to the entire sequence.
    let n = 100_000;
    let sv: f64 = 0.01;
    let (x, q) = iid_channel(n, sv, 3);
    let stream = Stream::new(11);

    let (gm, _) = fit_gm_noisy_detailed(&q, sv, &EmConfig::default(), &stream.derive(99)).unwrap();
    let (whole, _) = denoise_with_gm(&gm, sv, &q);
    let mse_whole = math::mse(&whole, &x);

    let out1 = denoise_ud1(&q, sv, &UdConfig::ud1(), &stream.derive(1)).unwrap();
    let mse1 = math::mse(&out1.estimate, &x);
    assert!(
        mse1 <= 1.05 * mse_whole,
        "ud1 {mse1:.4e} vs whole-sequence {mse_whole:.4e}"
    );

    let out2 = denoise_ud2(&q, sv, &UdConfig::ud2(), &stream.derive(2)).unwrap();
    let mse2 = math::mse(&out2.estimate, &x);
    assert!(
        mse2 <= 1.05 * mse_whole,
        "ud2 {mse2:.4e} vs whole-sequence {mse_whole:.4e}"
    );
}

#[test]
fn ud2_subsequence_count_non_increasing_and_covering() {
    let n = 20_000;
    let sv: f64 = 0.02;
    let (_, q) = iid_channel(n, sv, 7);
    let out = denoise_ud2(&q, sv, &UdConfig::ud2(), &Stream::new(5)).unwrap();
    let d = &out.diagnostics;
    assert!(d.final_cluster_sizes.len() <= d.initial_cluster_sizes.len());
    assert_eq!(d.final_cluster_sizes.iter().sum::<usize>(), n);
    assert_eq!(d.initial_cluster_sizes.iter().sum::<usize>(), n);
    // One accepted merge per count reduction.
    assert_eq!(
        d.initial_cluster_sizes.len() - d.final_cluster_sizes.len(),
        d.merges.len()
    );
}

#[test]
fn two_regime_source_merges_down_but_not_across() {
    // Interleaved segments from two clearly different distributions: UD2
    // should collapse the 30 initial clusters toward one model per regime
    // with a strictly decreasing cost trace.
    let n = 30_000;
    let seg = 250;
    let stream = Stream::new(21);
    let mut rng = stream.derive(0).rng();
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        if (i / seg) % 2 == 0 {
            x.push(if rng.uniform() < 0.5 { -3.0 } else { 3.0 });
        } else {
            x.push(0.4 * rng.normal());
        }
    }
    let sv: f64 = 0.04;
    let mut noise = stream.derive(1).rng();
    let q: Vec<f64> = x.iter().map(|&v| v + sv.sqrt() * noise.normal()).collect();

    let out = denoise_ud2(&q, sv, &UdConfig::ud2(), &stream.derive(2)).unwrap();
    let d = &out.diagnostics;
    assert!(
        d.final_cluster_sizes.len() <= 4,
        "expected <= 4 final subsequences, got {:?}",
        d.final_cluster_sizes
    );
    for w in d.mdl_trace.windows(2) {
        assert!(w[1] < w[0], "accepted merge did not reduce the cost: {w:?}");
    }
}

#[test]
fn ud_estimates_reduce_error_on_markov_signal() {
    // Sanity: on a sparse Markov signal the universal denoiser must beat
    // the identity (no denoising) by a wide margin.
    let spec = ampud_core::source::MarkovSourceSpec::mgauss(3.0 / 970.0, 0.1, 0.0, 1.0).unwrap();
    let n = 20_000;
    let stream = Stream::new(33);
    let x = spec.generate(n, stream.derive(0).rng().next_u64()).unwrap();
    let sv: f64 = 0.01;
    let mut rng = stream.derive(1).rng();
    let q: Vec<f64> = x.iter().map(|&v| v + sv.sqrt() * rng.normal()).collect();
    for cfg in [UdConfig::ud1(), UdConfig::ud2()] {
        let out = denoise_ud(&q, sv, &cfg, &stream.derive(2)).unwrap();
        let mse = math::mse(&out.estimate, &x);
        assert!(
            mse < 0.5 * sv,
            "variant {:?}: mse {mse:.3e} vs channel {sv:.3e}",
            cfg.variant
        );
    }
}
