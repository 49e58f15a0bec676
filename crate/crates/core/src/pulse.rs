//! Ramsey, spin-echo and CPMG sequences and their filter functions.
//!
//! Pulses are instantaneous. A sequence is its total free-evolution time plus
//! the π-pulse times; the π/2 pulses sit implicitly at 0 and `T_tot`. Each π
//! pulse flips the sign with which the DLS accumulates phase.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::coherence::{coherence, DecayParams};
use crate::error::{Error, Result};
use crate::montecarlo::trajectory_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceDoc", into = "SequenceDoc")]
pub struct PulseSequence {
    t_total: f64,
    pi_pulses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceDoc {
    t_total_s: f64,
    pi_pulses_s: Vec<f64>,
}

impl TryFrom<SequenceDoc> for PulseSequence {
    type Error = Error;

    fn try_from(d: SequenceDoc) -> Result<Self> {
        PulseSequence::new(d.t_total_s, d.pi_pulses_s)
    }
}

impl From<PulseSequence> for SequenceDoc {
    fn from(s: PulseSequence) -> Self {
        SequenceDoc {
            t_total_s: s.t_total,
            pi_pulses_s: s.pi_pulses,
        }
    }
}

impl PulseSequence {
    pub fn new(t_total: f64, pi_pulses: Vec<f64>) -> Result<Self> {
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(Error::domain("total time must be positive"));
        }
        if pi_pulses.iter().any(|&t| !(t > 0.0 && t < t_total)) {
            return Err(Error::domain("pi pulses must lie strictly inside (0, T_tot)"));
        }
        if pi_pulses.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("pi pulse times must be strictly increasing"));
        }
        Ok(PulseSequence { t_total, pi_pulses })
    }

    pub fn ramsey(t_total: f64) -> Result<Self> {
        PulseSequence::new(t_total, Vec::new())
    }

    pub fn spin_echo(t_total: f64) -> Result<Self> {
        PulseSequence::new(t_total, vec![t_total / 2.0])
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn pi_pulses(&self) -> &[f64] {
        &self.pi_pulses
    }

    /// Free-evolution windows `(start, end, sign)`.
    pub fn windows(&self) -> Vec<(f64, f64, f64)> {
        let mut edges = Vec::with_capacity(self.pi_pulses.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(&self.pi_pulses);
        edges.push(self.t_total);
        edges
            .windows(2)
            .enumerate()
            .map(|(k, w)| (w[0], w[1], if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect()
    }

    /// The same sequence played backwards in time.
    pub fn time_reversed(&self) -> Self {
        let pulses = self.pi_pulses.iter().rev().map(|t| self.t_total - t).collect();
        PulseSequence::new(self.t_total, pulses).expect("reversal preserves validity")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }
}

/// CPMG with `n_pulses` π pulses spaced by `interval`: pulses at
/// `(j − ½)·interval`, total time `n_pulses·interval`.
pub fn make_cpmg(n_pulses: usize, interval: f64) -> Result<PulseSequence> {
    if n_pulses == 0 {
        return Err(Error::domain("CPMG needs at least one pi pulse"));
    }
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::domain("pulse interval must be positive"));
    }
    let pulses = (1..=n_pulses).map(|j| (j as f64 - 0.5) * interval).collect();
    PulseSequence::new(n_pulses as f64 * interval, pulses)
}

/// Normalized response `Σ_k s_k (e^{iωt_{k+1}} − e^{iωt_k}) / (iωT_tot)`.
///
/// Its magnitude squared is the filter function. Each window is written as
/// `e^{iω·mid}·2 sin(ωΔ/2)/ω`, which stays accurate down to `f = 0`.
pub fn filter_amplitude(seq: &PulseSequence, f_hz: f64) -> Complex64 {
    let w = 2.0 * PI * f_hz;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b, s) in seq.windows() {
        let d = b - a;
        let width = if w == 0.0 { d } else { 2.0 * (0.5 * w * d).sin() / w };
        acc += Complex64::from_polar(s * width, w * 0.5 * (a + b));
    }
    acc / seq.t_total
}

/// Filter function `F(f)`: the weight with which noise at `f` passes into the
/// accumulated phase, normalized so that `F → 1` for Ramsey at `f → 0`.
pub fn filter_function(seq: &PulseSequence, f_hz: f64) -> f64 {
    filter_amplitude(seq, f_hz).norm_sqr()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterCurve {
    pub points: Vec<(f64, f64)>,
}

impl FilterCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["f_hz", "filter"])?;
        for (f, v) in &self.points {
            w.write_record([f.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn filter_curve(seq: &PulseSequence, freqs: &[f64]) -> FilterCurve {
    FilterCurve {
        points: freqs.iter().map(|&f| (f, filter_function(seq, f))).collect(),
    }
}

/// Frequencies in `[f_lo, f_hi]` where `F` vanishes, found by scanning with
/// `step` and refining each local minimum by golden-section search.
pub fn filter_zeros(seq: &PulseSequence, f_lo: f64, f_hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(f_hi > f_lo && f_lo >= 0.0 && step > 0.0) {
        return Err(Error::domain("invalid zero-search band"));
    }
    let n = ((f_hi - f_lo) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| f_lo + i as f64 * step).collect();
    let vals: Vec<f64> = grid.iter().map(|&f| filter_function(seq, f)).collect();
    let mut zeros = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if vals[i] <= vals[i - 1] && vals[i] < vals[i + 1] {
            let (f, v) = golden_min(|f| filter_function(seq, f), grid[i - 1], grid[i + 1]);
            if v <= 1e-6 * vals[i - 1].max(vals[i + 1]) {
                zeros.push(f);
            }
        }
    }
    Ok(zeros)
}

fn golden_min(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Integration band for [`filtered_sigma`], log-spaced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
}

impl Default for Band {
    fn default() -> Self {
        Band {
            f_min: 1e-4,
            f_max: 1e3,
            points: 20_000,
        }
    }
}

impl Band {
    fn grid(&self) -> Result<Vec<f64>> {
        if !(self.f_min > 0.0 && self.f_max > self.f_min && self.f_max.is_finite() && self.points >= 2) {
            return Err(Error::domain("empty or invalid integration band"));
        }
        let (l0, l1) = (self.f_min.ln(), self.f_max.ln());
        let m = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| (l0 + (l1 - l0) * i as f64 / m).exp())
            .collect())
    }
}

/// Effective DLS spread (rad/s) seen through the sequence:
/// `σ_eff² = ∫ F(f)·S_DLS(f) df` with `S_DLS` one-sided in (rad/s)²/Hz.
pub fn filtered_sigma(seq: &PulseSequence, dls_psd: impl Fn(f64) -> f64, band: Band) -> Result<f64> {
    let grid = band.grid()?;
    let integrand: Vec<f64> = grid.iter().map(|&f| filter_function(seq, f) * dls_psd(f)).collect();
    let var: f64 = grid
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(f, v)| 0.5 * (v[0] + v[1]) * (f[1] - f[0]))
        .sum();
    Ok(var.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase: f64,
    pub successes: u64,
    pub shots: u64,
}

impl FringePoint {
    pub fn population(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }
}

/// Binomially sampled interference fringe `P(φ) = (1 + C cos φ)/2` with
/// `C` the coherence at the end of the sequence.
pub fn simulate_fringe(
    params: &DecayParams,
    seq: &PulseSequence,
    phases: &[f64],
    shots: u64,
    seed: u64,
) -> Result<Vec<FringePoint>> {
    if shots == 0 {
        return Err(Error::domain("need at least one shot per phase"));
    }
    let c = coherence(params, seq.t_total());
    phases
        .iter()
        .enumerate()
        .map(|(i, &phase)| {
            let p = (0.5 * (1.0 + c * phase.cos())).clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p).map_err(|e| Error::domain(e.to_string()))?;
            let successes = dist.sample(&mut trajectory_rng(seed, i as u64));
            Ok(FringePoint {
                phase,
                successes,
                shots,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cpmg_construction() {
        let echo = make_cpmg(1, 0.8).unwrap();
        assert_eq!(echo.pi_pulses(), &[0.4]);
        assert_eq!(echo.t_total(), 0.8);
        let c2 = make_cpmg(2, 0.8).unwrap();
        assert!((c2.pi_pulses()[0] - 0.4).abs() < 1e-15 && (c2.pi_pulses()[1] - 1.2).abs() < 1e-15);
        assert!((c2.t_total() - 1.6).abs() < 1e-15);
        let c20 = make_cpmg(20, 0.8).unwrap();
        assert!((c20.t_total() - 16.0).abs() < 1e-12);
        assert!(make_cpmg(0, 0.8).is_err());
    }

    #[test]
    fn filter_limits() {
        let ramsey = PulseSequence::ramsey(1.0).unwrap();
        assert!((filter_function(&ramsey, 0.0) - 1.0).abs() < 1e-15);
        assert!((filter_function(&ramsey, 1e-9) - 1.0).abs() < 1e-12);
        let echo = PulseSequence::spin_echo(1.0).unwrap();
        // Zero up to rounding of the window widths.
        assert!(filter_function(&echo, 0.0) < 1e-30);
        assert!(filter_function(&make_cpmg(20, 0.8).unwrap(), 0.0) < 1e-30);
    }

    #[test]
    fn cpmg_passband_at_half_inverse_interval() {
        let t = 0.8;
        for n in [2, 4, 20] {
            let seq = make_cpmg(n, t).unwrap();
            let peak = filter_function(&seq, 1.0 / (2.0 * t));
            for k in 3..20 {
                assert!(peak > filter_function(&seq, 1.0 / (k as f64 * t)), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn zeros_of_spin_echo() {
        // Echo of length T: F ∝ sin⁴(ωT/4)/(ωT)², zeros at f = 2k/T.
        let echo = PulseSequence::spin_echo(0.8).unwrap();
        let zeros = filter_zeros(&echo, 0.01, 10.2, 1e-3).unwrap();
        let expected: Vec<f64> = (1..=4).map(|k| 2.0 * k as f64 / 0.8).collect();
        assert_eq!(zeros.len(), expected.len(), "{zeros:?}");
        for (z, e) in zeros.iter().zip(expected) {
            assert!((z - e).abs() < 1e-6);
        }
    }

    #[test]
    fn filtered_sigma_white_ramsey() {
        // F ≈ 1 for f ≪ 1/T.
        let seq = PulseSequence::ramsey(1e-3).unwrap();
        let band = Band {
            f_min: 1e-3,
            f_max: 1.0,
            points: 2000,
        };
        let s = filtered_sigma(&seq, |_| 4.0, band).unwrap();
        assert!((s * s / (4.0 * (1.0 - 1e-3)) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn filtered_sigma_at_zero() {
        let echo = PulseSequence::spin_echo(0.8).unwrap();
        let f0 = 2.5;
        let narrow = move |f: f64| (-((f - f0) / 1e-4).powi(2)).exp();
        let band = Band {
            f_min: f0 - 1e-3,
            f_max: f0 + 1e-3,
            points: 4001,
        };
        let filtered = filtered_sigma(&echo, narrow, band).unwrap();
        let unfiltered = filtered_sigma(&PulseSequence::ramsey(1e-6).unwrap(), narrow, band).unwrap();
        assert!(filtered < 1e-3 * unfiltered, "{filtered} vs {unfiltered}");
    }

    #[test]
    fn empty_band_rejected() {
        let seq = PulseSequence::ramsey(1.0).unwrap();
        let band = Band {
            f_min: 1.0,
            f_max: 1.0,
            points: 10,
        };
        assert!(matches!(filtered_sigma(&seq, |_| 1.0, band), Err(Error::Domain(_))));
    }

    #[test]
    fn fringe_examples() {
        let p = DecayParams::new(0.0, 0.0).unwrap();
        let seq = PulseSequence::spin_echo(0.1).unwrap();
        let pts = simulate_fringe(&p, &seq, &[0.0], 10_000, 1).unwrap();
        assert_eq!(pts[0].successes, 10_000);

        let dead = DecayParams::new(1e4, 0.0).unwrap();
        let pts = simulate_fringe(&dead, &seq, &[0.0, 1.0, 2.0], 1_000_000, 2).unwrap();
        for pt in pts {
            assert!((pt.population() - 0.5).abs() < 4.0 * (0.25f64 / 1e6).sqrt());
        }
    }

    #[test]
    fn fringe_amplitude_for_40db_echo() {
        // C(0.08 s) for σ = 15.0, R = 5.14: exp(-0.72 - 0.4112) = 0.3226.
        let p = DecayParams::new(15.0, 5.14).unwrap();
        let seq = PulseSequence::spin_echo(0.08).unwrap();
        let c = coherence(&p, seq.t_total());
        assert!((c - 0.322646).abs() < 1e-6);
        let pts = simulate_fringe(&p, &seq, &[0.0, PI], 100_000, 3).unwrap();
        let amp = pts[0].population() - pts[1].population();
        assert!((amp - c).abs() < 4.0 * (0.5f64 / 1e5).sqrt());
    }

    #[test]
    fn json_shape() {
        let seq = make_cpmg(2, 0.8).unwrap();
        let v: serde_json::Value = serde_json::from_str(&seq.to_json()).unwrap();
        assert_eq!(v["t_total_s"], 1.6);
        assert_eq!(PulseSequence::from_json(&seq.to_json()).unwrap(), seq);
        assert!(PulseSequence::from_json(r#"{"t_total_s":1,"pi_pulses_s":[2]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn seq_strategy() -> impl Strategy<Value = PulseSequence> {
            (0.1f64..20.0, proptest::collection::vec(0.001f64..0.999, 0..12)).prop_map(|(t, mut fr)| {
                fr.sort_by(|a, b| a.partial_cmp(b).unwrap());
                fr.dedup();
                PulseSequence::new(t, fr.into_iter().map(|x| x * t).collect()).unwrap()
            })
        }

        proptest! {
            #[test]
            fn filter_nonnegative_and_reversal_invariant(seq in seq_strategy(), f in 0.0f64..20.0) {
                let a = filter_function(&seq, f);
                let b = filter_function(&seq.time_reversed(), f);
                prop_assert!(a >= 0.0);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }

            #[test]
            fn filtered_sigma_scales_as_sqrt(c in 0.01f64..100.0) {
                let seq = make_cpmg(4, 0.5).unwrap();
                let band = Band { f_min: 1e-2, f_max: 10.0, points: 500 };
                let psd = |f: f64| 1.0 / (1.0 + f * f);
                let s1 = filtered_sigma(&seq, psd, band).unwrap();
                let s2 = filtered_sigma(&seq, |f| c * psd(f), band).unwrap();
                prop_assert!((s2 / s1 - c.sqrt()).abs() < 1e-10 * c.sqrt());
            }

            #[test]
            fn fringe_means_converge(c_target in 0.0f64..1.0, phase in 0.0f64..(2.0 * PI), seed in 0u64..1000) {
                // Choose σ so that C(T) = c_target for a 1 s echo.
                let sigma = if c_target > 0.0 { (-2.0 * c_target.ln()).sqrt() } else { 1e3 };
                let p = DecayParams::new(sigma, 0.0).unwrap();
                let seq = PulseSequence::spin_echo(1.0).unwrap();
                let shots = 20_000;
                let pt = simulate_fringe(&p, &seq, &[phase], shots, seed).unwrap()[0];
                let c = coherence(&p, 1.0);
                let prob = 0.5 * (1.0 + c * phase.cos());
                let tol = 4.0 * (prob * (1.0 - prob) / shots as f64).sqrt() + 1e-12;
                prop_assert!((pt.population() - prob).abs() <= tol);
            }
        }
    }
}
