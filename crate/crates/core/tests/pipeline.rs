//! End-to-end paths through the public API: measured power trace → PSD →
//! jump rate → coherence curve → fitted parameters.

use std::f64::consts::PI;

use qubit_decoherence::coherence::{coherence, monte_carlo_decay, synthetic_series, t2_from_params};
use qubit_decoherence::fit::fit_coherence_decay;
use qubit_decoherence::noise::{estimate_psd, relative_variance, TimeSeries};
use qubit_decoherence::phonon::{thermal_rate, AxisNoise};
use qubit_decoherence::presets;
use qubit_decoherence::spectrum::{NoiseSpectrum, SpectrumKind};
use qubit_decoherence::trap::dls_sigma;
use qubit_decoherence::{CoherenceSeries, DecayParams, TrapConfig, TrapNoise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn white_trace(sd: f64, fs: f64, n: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(1.0, sd).unwrap();
    TimeSeries::new(fs, (0..n).map(|_| 2e-3 * d.sample(&mut rng)).collect()).unwrap()
}

#[test]
fn measured_trace_to_fitted_decay() {
    // White intensity noise at a level giving −100 dBc/Hz over a 1 MHz band.
    let fs: f64 = 1e6;
    let level = 1e-10;
    let sd = (level * fs / 2.0).sqrt();
    let trace = white_trace(sd, fs, 1 << 18, 3);
    let psd = estimate_psd(&trace, 4096, 2048).unwrap();
    let measured: f64 = psd.samples().map(|(_, v)| v).sum::<f64>() / psd.len() as f64;
    assert!((measured / level - 1.0).abs() < 0.05);

    let cfg = presets::cs133_odt();
    let axis = AxisNoise::spring_only(psd).unwrap();
    let noise = TrapNoise::new([axis.clone(), axis.clone(), axis]);
    let rate = thermal_rate(&cfg, &noise, 14e-6).unwrap().total;

    // The same rate from the flat spectrum the trace was drawn from.
    let flat = TrapNoise::flat_rin_dbc([-100.0; 3]).unwrap();
    let reference = thermal_rate(&cfg, &flat, 14e-6).unwrap().total;
    assert!((rate / reference - 1.0).abs() < 0.1, "{rate} vs {reference}");

    let sigma = dls_sigma(&cfg, [0, 0, 0]).abs() * relative_variance(&trace).unwrap() / cfg.relative_power_noise();
    let truth = DecayParams::new(sigma, rate).unwrap();
    let t2 = t2_from_params(&truth).unwrap();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 * 2.0 * t2 / 19.0).collect();
    let data = synthetic_series(&truth, &grid, 0.01, 9).unwrap();
    let fit = fit_coherence_decay(&data).unwrap();
    assert!(
        (fit.param("rate") - rate).abs() < 3.0 * fit.uncertainty("rate"),
        "{fit:?}"
    );
    assert!(
        (fit.param("sigma_dls") - sigma).abs() < 3.0 * fit.uncertainty("sigma_dls"),
        "{fit:?}"
    );
}

#[test]
fn json_documents_round_trip() {
    let cfg = presets::bbt780();
    assert_eq!(TrapConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    let noise = presets::rin_40db();
    assert_eq!(TrapNoise::from_json(&noise.to_json()).unwrap(), noise);
    let s = NoiseSpectrum::new(SpectrumKind::Position, [(1.0, 1e-20), (10.0, 2e-21)]).unwrap();
    assert_eq!(NoiseSpectrum::from_json(&s.to_json()).unwrap(), s);
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let p = DecayParams::new(3.0, 1.0).unwrap();
    let grid = [0.0, 0.1, 0.3, 0.6];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_decay(&p, 20_000, 17, &grid).unwrap())
    };
    let a: CoherenceSeries = run(1);
    let b = run(4);
    assert_eq!(a, b);
    for pt in a.points() {
        assert!((pt.c - coherence(&p, pt.t)).abs() < 4.0 / (20_000f64).sqrt());
    }
}

#[test]
fn fit_is_order_invariant() {
    let p = DecayParams::new(15.0, 5.14).unwrap();
    let grid: Vec<f64> = (0..12).map(|i| i as f64 * 0.015).collect();
    let s = synthetic_series(&p, &grid, 0.03, 4).unwrap();
    let mut shuffled = s.points().to_vec();
    shuffled.reverse();
    shuffled.swap(2, 7);
    let s2 = CoherenceSeries::from_unsorted(shuffled).unwrap();
    assert_eq!(fit_coherence_decay(&s).unwrap(), fit_coherence_decay(&s2).unwrap());
}

#[test]
fn uncertainty_scales_as_inverse_root_n() {
    // Replicating the time grid four times should halve the uncertainties.
    let p = DecayParams::new(15.0, 5.14).unwrap();
    let base: Vec<f64> = (0..12).map(|i| i as f64 * 0.015).collect();
    let mut ratio_sigma = 0.0;
    let mut ratio_rate = 0.0;
    let reps = 40;
    for seed in 0..reps {
        let one = fit_coherence_decay(&synthetic_series(&p, &base, 0.03, seed).unwrap()).unwrap();
        // Interleave four copies with tiny offsets so delays stay distinct.
        let dense: Vec<f64> = base
            .iter()
            .flat_map(|t| (0..4).map(move |k| t + k as f64 * 1e-9))
            .collect();
        let four = fit_coherence_decay(&synthetic_series(&p, &dense, 0.03, 1000 + seed).unwrap()).unwrap();
        ratio_sigma += one.uncertainty("sigma_dls") / four.uncertainty("sigma_dls");
        ratio_rate += one.uncertainty("rate") / four.uncertainty("rate");
    }
    let (rs, rr) = (ratio_sigma / reps as f64, ratio_rate / reps as f64);
    assert!((rs / 2.0 - 1.0).abs() < 0.2, "{rs}");
    assert!((rr / 2.0 - 1.0).abs() < 0.2, "{rr}");
}

#[test]
fn angular_convention_applied_once() {
    // A flat spring spectrum of 2π·X per Hz is X per rad/s.
    let s = NoiseSpectrum::flat(SpectrumKind::SpringFractional, 2.0 * PI * 3e-12).unwrap();
    assert!((s.angular_density(1e5) / 3e-12 - 1.0).abs() < 1e-14);
}
