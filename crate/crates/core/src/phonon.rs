//! Phonon jumping rates driven by trap noise.
//!
//! Intensity (spring-constant) noise at `2ω` drives parametric `n → n±2`
//! jumps; pointing (position) noise at `ω` drives `n → n±1` jumps. Any jump
//! out of the prepared phonon state destroys the qubit coherence, so the
//! survival of the coherence channel is `exp(-R t)` with `R` the total rate
//! out of the current state.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::montecarlo;
use crate::spectrum::{NoiseSpectrum, SpectrumKind};
use crate::trap::{thermal_expectation, Axis, TrapConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Jump {
    Up,
    Down,
}

/// Noise spectra acting on one trap axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AxisNoiseDoc", into = "AxisNoiseDoc")]
pub struct AxisNoise {
    spring: NoiseSpectrum,
    position: NoiseSpectrum,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisNoiseDoc {
    #[serde(default)]
    spring: Option<NoiseSpectrum>,
    #[serde(default)]
    position: Option<NoiseSpectrum>,
}

impl TryFrom<AxisNoiseDoc> for AxisNoise {
    type Error = Error;

    fn try_from(d: AxisNoiseDoc) -> Result<Self> {
        AxisNoise::new(
            d.spring
                .unwrap_or_else(|| NoiseSpectrum::zero(SpectrumKind::SpringFractional)),
            d.position
                .unwrap_or_else(|| NoiseSpectrum::zero(SpectrumKind::Position)),
        )
    }
}

impl From<AxisNoise> for AxisNoiseDoc {
    fn from(a: AxisNoise) -> Self {
        AxisNoiseDoc {
            spring: Some(a.spring),
            position: Some(a.position),
        }
    }
}

impl AxisNoise {
    pub fn new(spring: NoiseSpectrum, position: NoiseSpectrum) -> Result<Self> {
        if spring.kind() != SpectrumKind::SpringFractional {
            return Err(Error::config("spring slot needs a spring_fractional spectrum"));
        }
        if position.kind() != SpectrumKind::Position {
            return Err(Error::config("position slot needs a position spectrum"));
        }
        Ok(AxisNoise { spring, position })
    }

    /// Intensity noise only.
    pub fn spring_only(spring: NoiseSpectrum) -> Result<Self> {
        AxisNoise::new(spring, NoiseSpectrum::zero(SpectrumKind::Position))
    }

    pub fn zero() -> Self {
        AxisNoise {
            spring: NoiseSpectrum::zero(SpectrumKind::SpringFractional),
            position: NoiseSpectrum::zero(SpectrumKind::Position),
        }
    }

    pub fn spring(&self) -> &NoiseSpectrum {
        &self.spring
    }

    pub fn position(&self) -> &NoiseSpectrum {
        &self.position
    }

    fn scaled(&self, c: f64) -> Result<Self> {
        AxisNoise::new(self.spring.scaled(c)?, self.position.scaled(c)?)
    }
}

/// Noise spectra for all three trap axes.
///
/// JSON: `{"x": {"spring": <spectrum>, "position": <spectrum>}, "y": ..., "z": ...}`.
/// Within an axis a missing spectrum means zero noise; a missing axis is an
/// error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Axis, AxisNoise>", into = "BTreeMap<Axis, AxisNoise>")]
pub struct TrapNoise {
    axes: [AxisNoise; 3],
}

impl TryFrom<BTreeMap<Axis, AxisNoise>> for TrapNoise {
    type Error = Error;

    fn try_from(mut map: BTreeMap<Axis, AxisNoise>) -> Result<Self> {
        TrapNoise::from_axes(Axis::ALL.map(|a| map.remove(&a)))
    }
}

impl From<TrapNoise> for BTreeMap<Axis, AxisNoise> {
    fn from(t: TrapNoise) -> Self {
        Axis::ALL.into_iter().zip(t.axes).collect()
    }
}

impl TrapNoise {
    pub fn new(axes: [AxisNoise; 3]) -> Self {
        TrapNoise { axes }
    }

    pub fn from_axes(axes: [Option<AxisNoise>; 3]) -> Result<Self> {
        let [x, y, z] = axes;
        let need = |a: Option<AxisNoise>, name| {
            a.ok_or_else(|| Error::config(format!("missing noise spectra for axis {name}")))
        };
        Ok(TrapNoise {
            axes: [need(x, "x")?, need(y, "y")?, need(z, "z")?],
        })
    }

    pub fn zero() -> Self {
        TrapNoise::new([AxisNoise::zero(), AxisNoise::zero(), AxisNoise::zero()])
    }

    /// Flat intensity noise per axis given in dBc/Hz, no pointing noise.
    pub fn flat_rin_dbc(levels: [f64; 3]) -> Result<Self> {
        let axis = |db| {
            AxisNoise::spring_only(NoiseSpectrum::flat(
                SpectrumKind::SpringFractional,
                crate::noise::dbc_to_psd(db),
            )?)
        };
        Ok(TrapNoise::new([axis(levels[0])?, axis(levels[1])?, axis(levels[2])?]))
    }

    pub fn axis(&self, axis: Axis) -> &AxisNoise {
        &self.axes[axis.index()]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(TrapNoise {
            axes: [
                self.axes[0].scaled(c)?,
                self.axes[1].scaled(c)?,
                self.axes[2].scaled(c)?,
            ],
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trap noise serializes")
    }
}

/// Per-axis and total phonon jumping rates, 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRates {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub total: f64,
}

impl AxisRates {
    pub fn from_axes(r: [f64; 3]) -> Self {
        AxisRates {
            x: r[0],
            y: r[1],
            z: r[2],
            total: r[0] + r[1] + r[2],
        }
    }

    pub fn per_axis(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Parametric transition rate `n → n±2` from spring-constant noise.
///
/// `s_k_2w` is the angular-frequency density at `2ω`.
pub fn rate_intensity_transition(omega: f64, s_k_2w: f64, n: u64, dir: Jump) -> f64 {
    let n = n as f64;
    let factor = match dir {
        Jump::Up => (n + 2.0) * (n + 1.0),
        Jump::Down => n * (n - 1.0),
    };
    PI * omega * omega / 16.0 * s_k_2w * factor
}

/// Transition rate `n → n±1` from position noise; `s_q_w` is the
/// angular-frequency density at `ω`.
pub fn rate_pointing_transition(omega: f64, mass: f64, s_q_w: f64, n: u64, dir: Jump) -> f64 {
    let n = n as f64;
    let factor = match dir {
        Jump::Up => n + 1.0,
        Jump::Down => n,
    };
    PI / (2.0 * HBAR) * mass * omega.powi(3) * s_q_w * factor
}

/// Total rate out of phonon number `n` on one axis. `n` may be fractional,
/// which evaluates the rate at a mean phonon number.
pub fn axis_rate(omega: f64, mass: f64, noise: &AxisNoise, n: f64) -> f64 {
    let s_k = noise.spring.angular_density(2.0 * omega);
    let s_q = noise.position.angular_density(omega);
    PI * omega * omega / 8.0 * s_k * ((n + 1.0).powi(2) - n)
        + PI / (2.0 * HBAR) * mass * omega.powi(3) * s_q * (2.0 * n + 1.0)
}

pub fn total_rate_from_n(cfg: &TrapConfig, noise: &TrapNoise, n: [u32; 3]) -> AxisRates {
    AxisRates::from_axes(Axis::ALL.map(|a| {
        axis_rate(
            cfg.omega[a.index()],
            cfg.species.mass,
            noise.axis(a),
            n[a.index()] as f64,
        )
    }))
}

/// Classical (equipartition) estimate of the rate of a thermal atom at
/// temperature `t_kelvin`, evaluated per axis and summed.
///
/// Per axis this is the fixed-n rate at `n = n̄` with `(n̄+½)ħω = k_B T/2`,
/// keeping only the leading powers of `k_B T`.
pub fn thermal_rate(cfg: &TrapConfig, noise: &TrapNoise, t_kelvin: f64) -> Result<AxisRates> {
    if !(t_kelvin > 0.0 && t_kelvin.is_finite()) {
        return Err(Error::domain("temperature must be positive"));
    }
    let kt = K_B * t_kelvin;
    let mass = cfg.species.mass;
    Ok(AxisRates::from_axes(Axis::ALL.map(|a| {
        let w = cfg.omega[a.index()];
        let s_k = noise.axis(a).spring.angular_density(2.0 * w);
        let s_q = noise.axis(a).position.angular_density(w);
        PI / (8.0 * HBAR * HBAR) * (kt / 2.0).powi(2) * s_k + PI / (2.0 * HBAR * HBAR) * mass * w * w * s_q * kt
    })))
}

/// Exact thermal average `Σ_n P(n) R(n)` per axis over geometric phonon
/// distributions with means `nbar`.
pub fn thermal_average_pjr(cfg: &TrapConfig, noise: &TrapNoise, nbar: [f64; 3]) -> Result<AxisRates> {
    let mut r = [0.0; 3];
    for a in Axis::ALL {
        let q = a.index();
        let (w, m) = (cfg.omega[q], cfg.species.mass);
        let noise = noise.axis(a);
        r[q] = thermal_expectation(nbar[q], |n| axis_rate(w, m, noise, n as f64))?;
    }
    Ok(AxisRates::from_axes(r))
}

/// Probability that no jump has happened by time `t`.
pub fn survival_probability(rate: f64, t: f64) -> f64 {
    (-rate * t).exp()
}

/// Empirical survival fraction on `grid` from `n_traj` exponentially
/// distributed first-jump times.
pub fn monte_carlo_first_jump(rate: f64, n_traj: usize, seed: u64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::domain("jump rate must be non-negative"));
    }
    if n_traj == 0 {
        return Err(Error::domain("need at least one trajectory"));
    }
    if rate == 0.0 {
        return Ok(vec![1.0; grid.len()]);
    }
    let exp = Exp::new(rate).expect("positive rate");
    let counts = montecarlo::accumulate(n_traj, seed, grid.len(), |rng, acc| {
        let t_jump = exp.sample(rng);
        for (a, &t) in acc.iter_mut().zip(grid) {
            if t_jump > t {
                *a += 1.0;
            }
        }
    });
    Ok(counts.into_iter().map(|c| c / n_traj as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::{AtomSpecies, PhononDistribution};

    fn cfg() -> TrapConfig {
        TrapConfig {
            species: AtomSpecies::cs133(),
            eta: 1.5e-4,
            u0: -5e-27,
            omega: [2.0 * PI * 30.3e3, 2.0 * PI * 30.3e3, 2.0 * PI * 2.7e3],
            p0: 1e-3,
            sigma_p: 1e-6,
        }
    }

    fn noisy() -> TrapNoise {
        let axis = |sk: f64, sq: f64| {
            AxisNoise::new(
                NoiseSpectrum::new(SpectrumKind::SpringFractional, [(1e3, sk), (1e5, sk / 10.0)]).unwrap(),
                NoiseSpectrum::flat(SpectrumKind::Position, sq).unwrap(),
            )
            .unwrap()
        };
        TrapNoise::new([axis(1e-11, 1e-30), axis(2e-11, 2e-30), axis(5e-11, 1e-31)])
    }

    #[test]
    fn transition_examples() {
        let (w, s) = (2.0 * PI * 1e3, 1e-10);
        let base = PI * w * w / 16.0 * s;
        assert_eq!(rate_intensity_transition(w, s, 0, Jump::Down), 0.0);
        assert!((rate_intensity_transition(w, s, 0, Jump::Up) - base * 2.0).abs() < 1e-15 * base);
        let both = rate_intensity_transition(w, s, 3, Jump::Up) + rate_intensity_transition(w, s, 3, Jump::Down);
        assert!((both - base * 26.0).abs() < 1e-13 * base);

        let m = AtomSpecies::cs133().mass;
        let pbase = PI / (2.0 * HBAR) * m * w.powi(3) * s;
        assert_eq!(rate_pointing_transition(w, m, s, 0, Jump::Down), 0.0);
        assert!((rate_pointing_transition(w, m, s, 0, Jump::Up) - pbase).abs() < 1e-14 * pbase);
        let both = rate_pointing_transition(w, m, s, 5, Jump::Up) + rate_pointing_transition(w, m, s, 5, Jump::Down);
        assert!((both - 11.0 * pbase).abs() < 1e-13 * pbase);
    }

    #[test]
    fn zero_spectra_zero_rates() {
        let r = total_rate_from_n(&cfg(), &TrapNoise::zero(), [3, 4, 5]);
        assert_eq!(r.total, 0.0);
        assert_eq!(thermal_rate(&cfg(), &TrapNoise::zero(), 1e-5).unwrap().total, 0.0);
    }

    #[test]
    fn total_equals_transition_sum() {
        let c = cfg();
        let noise = noisy();
        for a in Axis::ALL {
            let w = c.omega[a.index()];
            let sk = noise.axis(a).spring().angular_density(2.0 * w);
            let sq = noise.axis(a).position().angular_density(w);
            for n in 0..=50u32 {
                let mut occ = [0u32; 3];
                occ[a.index()] = n;
                let fixed = total_rate_from_n(&c, &noise, occ).per_axis()[a.index()];
                let n = n as u64;
                let sum = rate_intensity_transition(w, sk, n, Jump::Up)
                    + rate_intensity_transition(w, sk, n, Jump::Down)
                    + rate_pointing_transition(w, c.species.mass, sq, n, Jump::Up)
                    + rate_pointing_transition(w, c.species.mass, sq, n, Jump::Down);
                assert!((fixed - sum).abs() <= 1e-12 * sum, "axis {a:?} n {n}");
            }
        }
    }

    #[test]
    fn thermal_average_ground_state_matches_fixed() {
        let c = cfg();
        let noise = noisy();
        let fixed = total_rate_from_n(&c, &noise, [0, 0, 0]).total;
        let thermal = thermal_average_pjr(&c, &noise, [0.0; 3]).unwrap().total;
        assert!((fixed - thermal).abs() <= 1e-9 * fixed);
    }

    #[test]
    fn thermal_average_brute_force() {
        let c = cfg();
        let noise = noisy();
        let fast = thermal_average_pjr(&c, &noise, [1.0, 0.0, 0.0]).unwrap().total;
        let mut brute = 0.0;
        for n in 0..=200u32 {
            brute += crate::trap::thermal_probability(1.0, n as u64) * total_rate_from_n(&c, &noise, [n, 0, 0]).total;
        }
        // Truncation at 1e-9 tail mass, weighted by rates growing as n².
        assert!((fast - brute).abs() < 1e-6 * brute, "{fast} vs {brute}");
    }

    #[test]
    fn thermal_rate_requires_positive_temperature() {
        assert!(thermal_rate(&cfg(), &noisy(), 0.0).is_err());
    }

    #[test]
    fn classical_form_matches_rate_at_mean_phonon_number() {
        // k_B T >= 20 ħω on every axis.
        let c = cfg();
        let noise = noisy();
        let t = 20.0 * HBAR * c.omega[0] / K_B * 1.5;
        let classical = thermal_rate(&c, &noise, t).unwrap();
        if let PhononDistribution::Thermal(nbar) = PhononDistribution::thermal_from_temperature(&c, t) {
            for a in Axis::ALL {
                let q = a.index();
                let at_mean = axis_rate(c.omega[q], c.species.mass, noise.axis(a), nbar[q]);
                let rel = (classical.per_axis()[q] - at_mean).abs() / at_mean;
                assert!(rel < 0.03, "axis {a:?}: {rel}");
            }
        }
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_probability(3.0, 0.0), 1.0);
        assert!((survival_probability(1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-16);
        assert!((survival_probability(5.14, 0.075) - 0.680).abs() < 5e-4);
    }

    #[test]
    fn monte_carlo_examples() {
        let grid = [0.0, 0.5, 1.0];
        assert_eq!(monte_carlo_first_jump(0.0, 10, 1, &grid).unwrap(), vec![1.0; 3]);

        let n = 1_000_000;
        let s = monte_carlo_first_jump(2.0, n, 11, &[0.5]).unwrap()[0];
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((s - p).abs() < 3.0 * se, "{s}");

        let a = monte_carlo_first_jump(2.0, 5000, 3, &grid).unwrap();
        let b = monte_carlo_first_jump(2.0, 5000, 3, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_requires_all_axes() {
        let json = noisy().to_json();
        assert_eq!(TrapNoise::from_json(&json).unwrap(), noisy());
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v.as_object_mut().unwrap().remove("y");
        let err = serde_json::from_value::<TrapNoise>(v).unwrap_err();
        assert!(err.to_string().contains("axis y"), "{err}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn rates_linear_in_psd(c in 0.01f64..100.0, n in proptest::array::uniform3(0u32..30)) {
                let base = total_rate_from_n(&cfg(), &noisy(), n);
                let scaled = total_rate_from_n(&cfg(), &noisy().scaled(c).unwrap(), n);
                prop_assert!((scaled.total - c * base.total).abs() <= 1e-12 * c * base.total);
                let tb = thermal_rate(&cfg(), &noisy(), 1e-5).unwrap().total;
                let ts = thermal_rate(&cfg(), &noisy().scaled(c).unwrap(), 1e-5).unwrap().total;
                prop_assert!((ts - c * tb).abs() <= 1e-12 * c * tb);
            }

            #[test]
            fn grid_refinement_invariance(extra in proptest::collection::vec(0.0f64..1.0, 1..20), n in 0u32..20) {
                // PSD exactly log-log linear between 1 kHz and 1 MHz.
                let psd = |f: f64| 1e-10 * (f / 1e3).powf(-1.3);
                let coarse = NoiseSpectrum::new(SpectrumKind::SpringFractional, [(1e3, psd(1e3)), (1e6, psd(1e6))]).unwrap();
                let mut fs: Vec<f64> = extra.iter().map(|x| 1e3 * 1e3f64.powf(*x)).collect();
                fs.extend([1e3, 1e6]);
                fs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                fs.dedup();
                let fine = NoiseSpectrum::new(SpectrumKind::SpringFractional, fs.iter().map(|&f| (f, psd(f)))).unwrap();
                let mk = |s: &NoiseSpectrum| TrapNoise::new([
                    AxisNoise::spring_only(s.clone()).unwrap(),
                    AxisNoise::spring_only(s.clone()).unwrap(),
                    AxisNoise::spring_only(s.clone()).unwrap(),
                ]);
                let a = total_rate_from_n(&cfg(), &mk(&coarse), [n, n, n]).total;
                let b = total_rate_from_n(&cfg(), &mk(&fine), [n, n, n]).total;
                prop_assert!((a - b).abs() <= 1e-9 * a);
            }

            #[test]
            fn thermal_average_monotone(n1 in proptest::array::uniform3(0.0f64..50.0), dn in 0.0f64..20.0, axis in 0usize..3) {
                let mut n2 = n1;
                n2[axis] += dn;
                let r1 = thermal_average_pjr(&cfg(), &noisy(), n1).unwrap().total;
                let r2 = thermal_average_pjr(&cfg(), &noisy(), n2).unwrap().total;
                prop_assert!(r2 >= r1 * (1.0 - 1e-12));
            }
        }

        #[test]
        fn monte_carlo_matches_exponential() {
            let n = 100_000;
            let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
            for (seed, rate) in [(1u64, 0.5), (2, 2.0), (3, 7.0)] {
                let s = monte_carlo_first_jump(rate, n, seed, &grid).unwrap();
                for (t, v) in grid.iter().zip(s) {
                    assert!((v - survival_probability(rate, *t)).abs() < 4.0 / (n as f64).sqrt());
                }
            }
        }
    }
}
