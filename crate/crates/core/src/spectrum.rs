//! One-sided noise power spectral densities.
//!
//! Spectra are always stored against ordinary frequency `f` (Hz). The rate
//! formulas are written for angular-frequency densities; the conversion
//! `S(ω) = S(f)/(2π)` happens in exactly one place,
//! [`NoiseSpectrum::angular_density`].

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// Fractional spring-constant (≡ fractional power) fluctuations, 1/Hz.
    #[serde(rename = "spring_fractional")]
    SpringFractional,
    /// Trap-center position fluctuations, m²/Hz.
    #[serde(rename = "position")]
    Position,
}

/// Sampled one-sided PSD with log-log interpolation between samples and
/// hold-nearest extrapolation outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumDoc", into = "SpectrumDoc")]
pub struct NoiseSpectrum {
    kind: SpectrumKind,
    freqs: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumDoc {
    kind: SpectrumKind,
    samples: Vec<[f64; 2]>,
}

impl TryFrom<SpectrumDoc> for NoiseSpectrum {
    type Error = Error;

    fn try_from(doc: SpectrumDoc) -> Result<Self> {
        NoiseSpectrum::new(doc.kind, doc.samples.into_iter().map(|[f, s]| (f, s)))
    }
}

impl From<NoiseSpectrum> for SpectrumDoc {
    fn from(s: NoiseSpectrum) -> Self {
        SpectrumDoc {
            kind: s.kind,
            samples: s.samples().map(|(f, v)| [f, v]).collect(),
        }
    }
}

impl NoiseSpectrum {
    pub fn new(kind: SpectrumKind, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (freqs, values): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if freqs.is_empty() {
            return Err(Error::config("noise spectrum needs at least one sample"));
        }
        if freqs.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::config("spectrum frequencies must be positive"));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("spectrum frequencies must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::config("PSD values must be non-negative"));
        }
        Ok(NoiseSpectrum { kind, freqs, values })
    }

    /// A frequency-independent spectrum.
    pub fn flat(kind: SpectrumKind, value: f64) -> Result<Self> {
        NoiseSpectrum::new(kind, [(1.0, value)])
    }

    pub fn zero(kind: SpectrumKind) -> Self {
        NoiseSpectrum::flat(kind, 0.0).expect("zero spectrum is valid")
    }

    /// Spectrum from `(f_hz, level_dbc_per_hz)` pairs.
    pub fn from_dbc(kind: SpectrumKind, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        NoiseSpectrum::new(
            kind,
            samples.into_iter().map(|(f, db)| (f, crate::noise::dbc_to_psd(db))),
        )
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    /// Every PSD value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        NoiseSpectrum::new(self.kind, self.samples().map(|(f, v)| (f, v * c)))
    }

    /// One-sided density per Hz at ordinary frequency `f_hz`.
    pub fn density(&self, f_hz: f64) -> f64 {
        let n = self.freqs.len();
        if f_hz <= self.freqs[0] {
            return self.values[0];
        }
        if f_hz >= self.freqs[n - 1] {
            return self.values[n - 1];
        }
        let hi = self.freqs.partition_point(|&f| f <= f_hz);
        let lo = hi - 1;
        let (f0, f1) = (self.freqs[lo], self.freqs[hi]);
        let (s0, s1) = (self.values[lo], self.values[hi]);
        if s0 > 0.0 && s1 > 0.0 {
            let x = (f_hz / f0).ln() / (f1 / f0).ln();
            (s0.ln() + x * (s1 / s0).ln()).exp()
        } else {
            s0 + (s1 - s0) * (f_hz - f0) / (f1 - f0)
        }
    }

    /// Density per unit angular frequency at `omega` (rad/s):
    /// `S(ω) = S(f = ω/2π) / (2π)`.
    pub fn angular_density(&self, omega: f64) -> f64 {
        crate::noise::psd_f_to_omega(self.density(omega / (2.0 * PI)))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }

    /// Writes `f_hz,psd` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["f_hz", "psd"])?;
        for (f, s) in self.samples() {
            w.write_record([f.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
