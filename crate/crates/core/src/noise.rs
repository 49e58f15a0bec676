//! From measured trap-light data to model inputs: relative power noise,
//! Welch PSD estimates, and dBc/Hz conversion.
//!
//! For a red-detuned trap the spring constant is proportional to the trap
//! power, so the fractional power PSD is used directly as the fractional
//! spring-constant PSD.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectrum::{NoiseSpectrum, SpectrumKind};

/// Uniformly sampled power record.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::domain("sample rate must be positive"));
        }
        if samples.len() < 2 {
            return Err(Error::domain("time series needs at least two samples"));
        }
        Ok(TimeSeries { sample_rate, samples })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Acquisition length in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Reads `t_s,power_w` CSV. The sample rate comes from the time column,
    /// which must be uniformly spaced.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t_s" || &headers[1] != "power_w" {
            return Err(Error::Parse("expected header `t_s,power_w`".into()));
        }
        let mut t = Vec::new();
        let mut p = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            t.push(parse_f64(&rec[0])?);
            p.push(parse_f64(&rec[1])?);
        }
        if t.len() < 2 {
            return Err(Error::domain("time series needs at least two samples"));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
            return Err(Error::Parse("time column must be uniformly increasing".into()));
        }
        TimeSeries::new(1.0 / dt, p)
    }

    fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
}

/// σ_P/P0: population standard deviation over the mean.
pub fn relative_variance(ts: &TimeSeries) -> Result<f64> {
    let mean = ts.mean();
    if !(mean > 0.0) {
        return Err(Error::domain("series mean must be positive"));
    }
    let n = ts.samples.len() as f64;
    let var = ts.samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Welch estimate (Hann window) of the one-sided PSD of the mean-normalized
/// series `x/⟨x⟩ − 1`, in 1/Hz. `overlap` is in samples. The DC bin is
/// dropped.
pub fn estimate_psd(ts: &TimeSeries, segment_len: usize, overlap: usize) -> Result<NoiseSpectrum> {
    let n = ts.samples.len();
    if segment_len < 4 {
        return Err(Error::domain("segment length must be at least 4"));
    }
    if segment_len > n {
        return Err(Error::domain(format!(
            "series of {n} samples is shorter than the {segment_len}-sample segment"
        )));
    }
    if overlap >= segment_len {
        return Err(Error::domain("overlap must be smaller than the segment"));
    }
    let mean = ts.mean();
    if !(mean > 0.0) {
        return Err(Error::domain("series mean must be positive"));
    }

    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let step = segment_len - overlap;
    let starts: Vec<usize> = (0..=(n - segment_len)).step_by(step).collect();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);

    let periodograms: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&s| {
            let mut buf: Vec<Complex64> = ts.samples[s..s + segment_len]
                .iter()
                .zip(&window)
                .map(|(x, w)| Complex64::new((x / mean - 1.0) * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..=segment_len / 2].iter().map(|c| c.norm_sqr()).collect()
        })
        .collect();

    let bins = segment_len / 2 + 1;
    let mut avg = vec![0.0; bins];
    for p in &periodograms {
        for (a, v) in avg.iter_mut().zip(p) {
            *a += v;
        }
    }
    let fs = ts.sample_rate;
    let scale = 1.0 / (fs * window_power * periodograms.len() as f64);
    let nyquist = segment_len.is_multiple_of(2);
    let samples = (1..bins).map(|k| {
        let one_sided = if nyquist && k == bins - 1 { 1.0 } else { 2.0 };
        (k as f64 * fs / segment_len as f64, avg[k] * scale * one_sided)
    });
    NoiseSpectrum::new(SpectrumKind::SpringFractional, samples)
}

/// Integral of a sampled PSD by the rectangle rule on its (uniform) bins.
pub fn integrated_power(spec: &NoiseSpectrum) -> f64 {
    let s: Vec<(f64, f64)> = spec.samples().collect();
    if s.len() < 2 {
        return 0.0;
    }
    let df = s[1].0 - s[0].0;
    s.iter().map(|(_, v)| v * df).sum()
}

/// dBc/Hz → linear 1/Hz.
pub fn dbc_to_psd(level_dbc: f64) -> f64 {
    10f64.powf(level_dbc / 10.0)
}

/// Linear 1/Hz → dBc/Hz.
pub fn psd_to_dbc(psd: f64) -> f64 {
    10.0 * psd.log10()
}

/// Converts a one-sided density per Hz into a density per rad/s.
pub fn psd_f_to_omega(per_hz: f64) -> f64 {
    per_hz / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn white(n: usize, sd: f64, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(1.0, sd).unwrap();
        TimeSeries::new(1e4, (0..n).map(|_| d.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn relative_variance_examples() {
        let c = TimeSeries::new(1.0, vec![2.0; 10]).unwrap();
        assert_eq!(relative_variance(&c).unwrap(), 0.0);
        let alt = TimeSeries::new(1.0, [0.9, 1.1].repeat(50)).unwrap();
        assert!((relative_variance(&alt).unwrap() - 0.1).abs() < 1e-12);
        let scaled = TimeSeries::new(1.0, alt.samples().iter().map(|x| x * 7.5).collect()).unwrap();
        assert!((relative_variance(&scaled).unwrap() - 0.1).abs() < 1e-12);
        let neg = TimeSeries::new(1.0, vec![-1.0, -2.0]).unwrap();
        assert!(relative_variance(&neg).is_err());
    }

    #[test]
    fn sinusoid_power() {
        let fs = 1024.0;
        let seg = 1024;
        let f0 = 64.0; // on a bin center
        let x: Vec<f64> = (0..16 * seg)
            .map(|i| 1.0 + (2.0 * PI * f0 * i as f64 / fs).sin())
            .collect();
        let ts = TimeSeries::new(fs, x).unwrap();
        let psd = estimate_psd(&ts, seg, seg / 2).unwrap();
        let near: f64 = psd
            .samples()
            .filter(|(f, _)| (f - f0).abs() <= 4.0)
            .map(|(_, s)| s * fs / seg as f64)
            .sum();
        assert!((near - 0.5).abs() < 0.025, "{near}");
    }

    #[test]
    fn white_noise_parseval() {
        let sd = 0.01;
        let ts = white(1 << 17, sd, 42);
        let psd = estimate_psd(&ts, 1024, 512).unwrap();
        let total = integrated_power(&psd);
        assert!((total / (sd * sd) - 1.0).abs() < 0.05, "{total}");
        let rv = relative_variance(&ts).unwrap();
        assert!((total / (rv * rv) - 1.0).abs() < 0.05);
        // Flat: low and high halves carry the same power.
        let mid = psd.len() / 2;
        let vals: Vec<f64> = psd.samples().map(|(_, v)| v).collect();
        let lo: f64 = vals[..mid].iter().sum();
        let hi: f64 = vals[mid..].iter().sum();
        assert!((lo / hi - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_input_zero_psd() {
        let ts = TimeSeries::new(100.0, vec![3.0; 4096]).unwrap();
        let psd = estimate_psd(&ts, 256, 128).unwrap();
        assert!(psd.samples().all(|(_, v)| v < 1e-30));
    }

    #[test]
    fn too_short() {
        let ts = TimeSeries::new(100.0, vec![1.0; 100]).unwrap();
        assert!(matches!(estimate_psd(&ts, 256, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn scale_invariant() {
        let ts = white(1 << 14, 0.02, 5);
        let scaled = TimeSeries::new(ts.sample_rate(), ts.samples().iter().map(|x| x * 3.0).collect()).unwrap();
        let a = estimate_psd(&ts, 512, 256).unwrap();
        let b = estimate_psd(&scaled, 512, 256).unwrap();
        for ((_, x), (_, y)) in a.samples().zip(b.samples()) {
            assert!((x - y).abs() <= 1e-9 * x.max(1e-300));
        }
    }

    #[test]
    fn dbc_examples() {
        assert_eq!(dbc_to_psd(0.0), 1.0);
        assert!((dbc_to_psd(-104.0) / 3.98e-11 - 1.0).abs() < 1e-3);
        assert!((dbc_to_psd(-146.0) / 2.51e-15 - 1.0).abs() < 1e-3);
        assert!((psd_f_to_omega(2.0 * PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_input() {
        let text = "t_s,power_w\n0,1.0\n0.001,1.1\n0.002,0.9\n";
        let ts = TimeSeries::from_csv(text.as_bytes()).unwrap();
        assert!((ts.sample_rate() - 1000.0).abs() < 1e-6);
        assert!(TimeSeries::from_csv("a,b\n0,1\n1,2\n".as_bytes()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn dbc_round_trip(db in -200.0f64..50.0) {
                prop_assert!((psd_to_dbc(dbc_to_psd(db)) - db).abs() < 1e-12);
            }

            #[test]
            fn parseval_consistency(seed in 0u64..1000, sd in 0.001f64..0.05) {
                let ts = white(1 << 16, sd, seed);
                let rv = relative_variance(&ts).unwrap();
                let total = integrated_power(&estimate_psd(&ts, 1024, 512).unwrap());
                prop_assert!((total / (rv * rv) - 1.0).abs() < 0.05);
            }
        }
    }
}
