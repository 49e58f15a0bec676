//! Combined Gaussian/exponential coherence decay and the quantities derived
//! from it.
//!
//! `C(t) = exp(-σ²t²/2 - R t)`: σ is the DLS spread, R the phonon jumping rate.
//! The static part of the DLS is assumed fully refocused by the echo, so only
//! its spread enters.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::montecarlo;
use crate::noise::parse_f64;

/// Prefactor relating the Ramsey 1/e time of a thermal atom to its temperature.
pub const RAMSEY_TEMPERATURE_FACTOR: f64 = 0.97;

/// Smallest |Δ|/Γ for which the far-detuned scattering formulas are trusted.
pub const FAR_DETUNED_RATIO: f64 = 10.0;

/// Accepted range of coherence values in a series.
pub const COHERENCE_RANGE: (f64, f64) = (-0.05, 1.05);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// DLS spread, 1/s.
    pub sigma_dls: f64,
    /// Phonon jumping rate, 1/s.
    pub rate: f64,
}

impl DecayParams {
    pub fn new(sigma_dls: f64, rate: f64) -> Result<Self> {
        if !(sigma_dls >= 0.0 && sigma_dls.is_finite()) {
            return Err(Error::domain("sigma_dls must be non-negative"));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::domain("jump rate must be non-negative"));
        }
        Ok(DecayParams { sigma_dls, rate })
    }
}

pub fn coherence(p: &DecayParams, t: f64) -> f64 {
    (-0.5 * p.sigma_dls.powi(2) * t * t - p.rate * t).exp()
}

/// The 1/e coherence time: positive root of `σ²t²/2 + Rt = 1`.
pub fn t2_from_params(p: &DecayParams) -> Result<f64> {
    if p.sigma_dls == 0.0 && p.rate == 0.0 {
        return Err(Error::domain("no decay: sigma_dls and rate are both zero"));
    }
    // Rationalized root, free of cancellation when R ≫ σ.
    Ok(2.0 / (p.rate + (p.rate.powi(2) + 2.0 * p.sigma_dls.powi(2)).sqrt()))
}

/// Removes the atom-loss contribution from a measured coherence time by rate
/// subtraction, `1/T2 = 1/T2,meas − 1/τ`.
pub fn lifetime_corrected_t2(t2_measured: f64, atom_lifetime: f64) -> Result<f64> {
    if !(t2_measured > 0.0) {
        return Err(Error::domain("measured T2 must be positive"));
    }
    if !(t2_measured < atom_lifetime) {
        return Err(Error::domain("measured T2 must be shorter than the atom lifetime"));
    }
    Ok(1.0 / (1.0 / t2_measured - 1.0 / atom_lifetime))
}

/// Inverse of [`lifetime_corrected_t2`].
pub fn lifetime_limited_t2(t2_intrinsic: f64, atom_lifetime: f64) -> f64 {
    1.0 / (1.0 / t2_intrinsic + 1.0 / atom_lifetime)
}

/// Atom temperature (K) from the Ramsey dephasing time, `T2* = 0.97·2ħ/(η k_B T)`.
pub fn temperature_from_t2star(t2star: f64, eta: f64) -> Result<f64> {
    if !(t2star > 0.0 && eta > 0.0) {
        return Err(Error::domain("T2* and eta must be positive"));
    }
    Ok(RAMSEY_TEMPERATURE_FACTOR * 2.0 * HBAR / (eta * K_B * t2star))
}

pub fn t2star_from_temperature(t_kelvin: f64, eta: f64) -> Result<f64> {
    if !(t_kelvin > 0.0 && eta > 0.0) {
        return Err(Error::domain("temperature and eta must be positive"));
    }
    Ok(RAMSEY_TEMPERATURE_FACTOR * 2.0 * HBAR / (eta * K_B * t_kelvin))
}

/// A coherence time that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceTime {
    Finite(f64),
    Unbounded,
}

impl CoherenceTime {
    pub fn seconds(&self) -> Option<f64> {
        match self {
            CoherenceTime::Finite(t) => Some(*t),
            CoherenceTime::Unbounded => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringParams {
    /// Light shift of the coupled ground state, rad/s.
    pub light_shift: f64,
    /// Photon scattering rate, 1/s.
    pub rate: f64,
    /// Scattering-limited coherence time.
    pub t2: CoherenceTime,
    /// False when |Δ| < 10 Γ, where the far-detuned forms are unreliable.
    pub far_detuned: bool,
}

/// Off-resonant scattering from one ground state coupled with Rabi frequency
/// `rabi` at detuning `detuning` to a level of linewidth `gamma`.
///
/// The coherence with the uncoupled state evolves as
/// `exp[(iΔ_LS − R_s/2) t]`, so its magnitude decays at `R_s/2`.
pub fn scattering_params(rabi: f64, detuning: f64, gamma: f64) -> Result<ScatteringParams> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::domain("detuning must be finite and nonzero"));
    }
    let light_shift = rabi * rabi / (4.0 * detuning);
    let rate = rabi * rabi * gamma / (4.0 * detuning * detuning);
    let t2 = if rate > 0.0 {
        CoherenceTime::Finite(2.0 / rate)
    } else {
        CoherenceTime::Unbounded
    };
    Ok(ScatteringParams {
        light_shift,
        rate,
        t2,
        far_detuned: detuning.abs() >= FAR_DETUNED_RATIO * gamma,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    #[serde(rename = "t_s")]
    pub t: f64,
    #[serde(rename = "coherence")]
    pub c: f64,
    pub sigma: f64,
}

/// Coherence samples `(t, C, σ_C)` with strictly increasing `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CoherencePoint>", into = "Vec<CoherencePoint>")]
pub struct CoherenceSeries {
    points: Vec<CoherencePoint>,
}

impl TryFrom<Vec<CoherencePoint>> for CoherenceSeries {
    type Error = Error;

    fn try_from(points: Vec<CoherencePoint>) -> Result<Self> {
        CoherenceSeries::new(points)
    }
}

impl From<CoherenceSeries> for Vec<CoherencePoint> {
    fn from(s: CoherenceSeries) -> Self {
        s.points
    }
}

impl CoherenceSeries {
    pub fn new(points: Vec<CoherencePoint>) -> Result<Self> {
        if points.iter().any(|p| !p.t.is_finite() || p.t < 0.0) {
            return Err(Error::domain("delay times must be finite and non-negative"));
        }
        if points.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::domain("delay times must be strictly increasing"));
        }
        let (lo, hi) = COHERENCE_RANGE;
        if let Some(p) = points.iter().find(|p| !(p.c >= lo && p.c <= hi)) {
            return Err(Error::domain(format!(
                "coherence {} at t = {} is outside [{lo}, {hi}]",
                p.c, p.t
            )));
        }
        if points.iter().any(|p| !(p.sigma >= 0.0 && p.sigma.is_finite())) {
            return Err(Error::domain("uncertainties must be non-negative"));
        }
        Ok(CoherenceSeries { points })
    }

    /// Builds a series from unordered points, sorting by delay.
    pub fn from_unsorted(mut points: Vec<CoherencePoint>) -> Result<Self> {
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        CoherenceSeries::new(points)
    }

    pub fn points(&self) -> &[CoherencePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "coherence", "sigma"])?;
        for p in &self.points {
            w.write_record([p.t.to_string(), p.c.to_string(), p.sigma.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `t_s,coherence,sigma` CSV; the `sigma` column is optional and
    /// defaults to zero (unknown). Rows may come in any order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let h = r.headers()?.clone();
        if h.len() < 2 || &h[0] != "t_s" || &h[1] != "coherence" || (h.len() > 2 && &h[2] != "sigma") {
            return Err(Error::Parse("expected header `t_s,coherence,sigma`".into()));
        }
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let sigma = if rec.len() > 2 { parse_f64(&rec[2])? } else { 0.0 };
            points.push(CoherencePoint {
                t: parse_f64(&rec[0])?,
                c: parse_f64(&rec[1])?,
                sigma,
            });
        }
        CoherenceSeries::from_unsorted(points)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("series serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Analytic curve on `grid`, with zero uncertainties.
pub fn analytic_series(p: &DecayParams, grid: &[f64]) -> Result<CoherenceSeries> {
    CoherenceSeries::new(
        grid.iter()
            .map(|&t| CoherencePoint {
                t,
                c: coherence(p, t),
                sigma: 0.0,
            })
            .collect(),
    )
}

/// Analytic curve plus seeded Gaussian noise of standard deviation `noise_sd`,
/// clipped into the accepted coherence range. Each point carries `noise_sd`
/// as its uncertainty.
pub fn synthetic_series(p: &DecayParams, grid: &[f64], noise_sd: f64, seed: u64) -> Result<CoherenceSeries> {
    if !(noise_sd >= 0.0) {
        return Err(Error::domain("noise sd must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = COHERENCE_RANGE;
    CoherenceSeries::new(
        grid.iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                CoherencePoint {
                    t,
                    c: (coherence(p, t) + noise_sd * z).clamp(lo, hi),
                    sigma: noise_sd,
                }
            })
            .collect(),
    )
}

fn mc_series(grid: &[f64], n_traj: usize, sums: Vec<f64>) -> Result<CoherenceSeries> {
    let n = n_traj as f64;
    let width = grid.len();
    CoherenceSeries::new(
        grid.iter()
            .enumerate()
            .map(|(i, &t)| {
                let mean = sums[i] / n;
                let var = (sums[width + i] / n - mean * mean).max(0.0);
                CoherencePoint {
                    t,
                    c: mean,
                    sigma: (var / n).sqrt(),
                }
            })
            .collect(),
    )
}

/// Gaussian DLS channel by sampling: each trajectory draws a zero-mean DLS
/// offset of width `sigma` and contributes `cos(Δ t)`.
pub fn monte_carlo_gaussian_channel(sigma: f64, n_traj: usize, seed: u64, grid: &[f64]) -> Result<CoherenceSeries> {
    monte_carlo_decay(&DecayParams::new(sigma, 0.0)?, n_traj, seed, grid)
}

/// Both channels by sampling: a Gaussian DLS offset plus an exponential first
/// jump time; after the jump the trajectory's coherence is zero.
pub fn monte_carlo_decay(p: &DecayParams, n_traj: usize, seed: u64, grid: &[f64]) -> Result<CoherenceSeries> {
    if n_traj == 0 {
        return Err(Error::domain("need at least one trajectory"));
    }
    let gauss = Normal::new(0.0, p.sigma_dls).map_err(|e| Error::domain(e.to_string()))?;
    let jump = (p.rate > 0.0).then(|| Exp::new(p.rate).expect("positive rate"));
    let width = grid.len();
    let sums = montecarlo::accumulate(n_traj, seed, 2 * width, |rng, acc| {
        let delta = gauss.sample(rng);
        let t_jump = jump.map_or(f64::INFINITY, |d| d.sample(rng));
        for (i, &t) in grid.iter().enumerate() {
            if t < t_jump {
                let v = (delta * t).cos();
                acc[i] += v;
                acc[width + i] += v * v;
            }
        }
    });
    mc_series(grid, n_traj, sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn coherence_examples() {
        let p = DecayParams::new(3.0, 2.0).unwrap();
        assert_eq!(coherence(&p, 0.0), 1.0);
        let p = DecayParams::new(2f64.sqrt(), 0.0).unwrap();
        assert!((coherence(&p, 1.0) - 1.0 / E).abs() < 1e-15);
        let p = DecayParams::new(7.54, 0.0).unwrap();
        assert!((coherence(&p, 0.188) - 1.0 / E).abs() < 0.01);
    }

    #[test]
    fn t2_examples() {
        let t2 = |s, r| t2_from_params(&DecayParams::new(s, r).unwrap()).unwrap();
        assert!((t2(7.54, 0.0) / 0.188 - 1.0).abs() < 0.03);
        assert!((t2(15.0, 5.14) / 0.075 - 1.0).abs() < 0.03);
        assert!((t2(0.51, 0.0) / 2.8 - 1.0).abs() < 0.05);
        assert!((t2(0.020, 0.058) / 16.6 - 1.0).abs() < 0.05);
        assert!((t2(0.0, 4.0) - 0.25).abs() < 1e-15);
        assert!(t2_from_params(&DecayParams::new(0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn lifetime_examples() {
        assert!((lifetime_corrected_t2(16.6, 105.5).unwrap() / 19.7 - 1.0).abs() < 0.01);
        assert!((lifetime_corrected_t2(5.0, 10.0).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(lifetime_corrected_t2(1.0, f64::INFINITY).unwrap(), 1.0);
        assert!(lifetime_corrected_t2(10.0, 10.0).is_err());
    }

    #[test]
    fn ramsey_temperature_examples() {
        let t1 = t2star_from_temperature(1e-5, 1e-4).unwrap();
        let t2 = t2star_from_temperature(1e-5, 2e-4).unwrap();
        assert!((t1 / t2 - 2.0).abs() < 1e-14);
        let eta = crate::trap::cs133_eta(1052e-9).unwrap();
        let t = temperature_from_t2star(5.49e-3, eta).unwrap();
        assert!((t / 17.6e-6 - 1.0).abs() < 0.25, "{t}");
        let eta = crate::trap::cs133_eta(780e-9).unwrap();
        let t = temperature_from_t2star(0.298, eta).unwrap();
        assert!((t / 200e-9 - 1.0).abs() < 0.25, "{t}");
    }

    #[test]
    fn scattering_examples() {
        let s = scattering_params(0.0, 1e9, 3e7).unwrap();
        assert_eq!(s.rate, 0.0);
        assert_eq!(s.t2, CoherenceTime::Unbounded);

        let a = scattering_params(1e6, 1e9, 3e7).unwrap();
        let b = scattering_params(1e6, 2e9, 3e7).unwrap();
        assert!((a.rate / b.rate - 4.0).abs() < 1e-12);
        assert!((b.t2.seconds().unwrap() / a.t2.seconds().unwrap() - 4.0).abs() < 1e-12);

        let g = 1.0;
        let s = scattering_params(g, 100.0 * g, g).unwrap();
        assert!((s.rate - g / 4.0 * 1e-4).abs() < 1e-18);
        assert!(s.far_detuned);
        assert!(!scattering_params(g, 5.0 * g, g).unwrap().far_detuned);
        assert!(scattering_params(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_channel_examples() {
        let grid = [0.0, 0.5, 1.0];
        let s = monte_carlo_gaussian_channel(0.0, 100, 1, &grid).unwrap();
        assert!(s.points().iter().all(|p| p.c == 1.0));

        let n = 1_000_000;
        let s = monte_carlo_gaussian_channel(1.0, n, 9, &[1.0]).unwrap();
        assert!((s.points()[0].c - (-0.5f64).exp()).abs() < 4.0 / (n as f64).sqrt());

        let a = monte_carlo_gaussian_channel(2.0, 1000, 4, &grid).unwrap();
        let b = monte_carlo_gaussian_channel(2.0, 1000, 4, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn series_validation() {
        let p = |t, c| CoherencePoint { t, c, sigma: 0.0 };
        assert!(CoherenceSeries::new(vec![p(0.0, 1.0), p(0.0, 0.5)]).is_err());
        assert!(CoherenceSeries::new(vec![p(0.0, 1.2)]).is_err());
        let s = CoherenceSeries::from_unsorted(vec![p(1.0, 0.5), p(0.0, 1.0)]).unwrap();
        assert_eq!(s.points()[0].t, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn series_strategy() -> impl Strategy<Value = CoherenceSeries> {
            proptest::collection::vec((1e-9f64..10.0, -0.05f64..=1.05, 0.0f64..1.0), 1..30).prop_map(|v| {
                let mut t = 0.0;
                let pts = v
                    .into_iter()
                    .map(|(dt, c, sigma)| {
                        t += dt;
                        CoherencePoint { t, c, sigma }
                    })
                    .collect();
                CoherenceSeries::new(pts).unwrap()
            })
        }

        proptest! {
            #[test]
            fn t2_hits_one_over_e(s in 0.0f64..100.0, r in 0.0f64..100.0) {
                prop_assume!(s > 1e-6 || r > 1e-6);
                let p = DecayParams::new(s, r).unwrap();
                let t2 = t2_from_params(&p).unwrap();
                prop_assert!((coherence(&p, t2) * E - 1.0).abs() < 1e-12);
            }

            #[test]
            fn lifetime_round_trip(t2 in 0.01f64..100.0, tau in 0.01f64..1000.0) {
                let measured = lifetime_limited_t2(t2, tau);
                let back = lifetime_corrected_t2(measured, tau).unwrap();
                prop_assert!((back / t2 - 1.0).abs() < 1e-12);
            }

            #[test]
            fn csv_round_trip_is_bit_exact(s in series_strategy()) {
                let mut buf = Vec::new();
                s.write_csv(&mut buf).unwrap();
                prop_assert_eq!(&CoherenceSeries::read_csv(buf.as_slice()).unwrap(), &s);
                prop_assert_eq!(&CoherenceSeries::from_json(&s.to_json()).unwrap(), &s);
            }
        }

        #[test]
        fn monte_carlo_factorizes() {
            let n = 100_000;
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
            let values = [0.0, 0.5, 5.0];
            let mut seed = 100;
            for s in values {
                for r in values {
                    let p = DecayParams::new(s, r).unwrap();
                    let mc = monte_carlo_decay(&p, n, seed, &grid).unwrap();
                    seed += 1;
                    for pt in mc.points() {
                        assert!((pt.c - coherence(&p, pt.t)).abs() < 4.0 / (n as f64).sqrt());
                    }
                }
            }
        }
    }
}
