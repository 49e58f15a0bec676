//! Atom and trap parameters, the differential light shift (DLS), and thermal
//! phonon occupation.
//!
//! `U0` keeps its physical sign: negative at the center of a red-detuned trap,
//! a small positive residual at the dark center of a blue-detuned trap. The
//! DLS spread is returned signed; consumers take its magnitude.

use serde::{Deserialize, Serialize};

use crate::constants::{C, CS133_D1_WAVELENGTH, CS133_D2_WAVELENGTH, CS133_HFS, HBAR, K_B};
use crate::error::{Error, Result};

/// Tail mass left out when truncating a thermal (geometric) phonon sum.
pub const THERMAL_TAIL_MASS: f64 = 1e-9;
/// Largest per-axis cutoff the thermal sums will attempt.
pub const MAX_THERMAL_CUTOFF: u64 = 1_000_000;

/// Maximum σ_P/P0 for which the Gaussian power model is accepted.
pub const MAX_RELATIVE_POWER_NOISE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomSpecies {
    /// Mass, kg.
    pub mass: f64,
    /// Hyperfine splitting, rad/s.
    pub omega_hfs: f64,
    /// Excited-state linewidth, rad/s. Only used by the scattering model.
    pub gamma: f64,
}

impl AtomSpecies {
    pub fn cs133() -> Self {
        AtomSpecies {
            mass: crate::constants::CS133_MASS,
            omega_hfs: CS133_HFS,
            gamma: crate::constants::CS133_GAMMA_D2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::config("atom mass must be positive"));
        }
        if !(self.omega_hfs > 0.0 && self.omega_hfs.is_finite()) {
            return Err(Error::config("hyperfine splitting must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("linewidth must be non-negative"));
        }
        Ok(())
    }
}

/// Trap geometry and intensity-noise parameters for one atom species.
///
/// Serialized as a flat JSON document; see [`TrapConfig::from_json`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrapConfigDoc", into = "TrapConfigDoc")]
pub struct TrapConfig {
    pub species: AtomSpecies,
    /// Ratio of hyperfine splitting to trap-light detuning.
    pub eta: f64,
    /// Potential at the trap center, J.
    pub u0: f64,
    /// Trap frequencies (x, y, z), rad/s.
    pub omega: [f64; 3],
    /// Mean trap power, W.
    pub p0: f64,
    /// RMS trap power fluctuation, W.
    pub sigma_p: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrapConfigDoc {
    mass_kg: f64,
    omega_hfs_rad_s: f64,
    gamma_rad_s: f64,
    eta: f64,
    u0_joule: f64,
    omega_x_rad_s: f64,
    omega_y_rad_s: f64,
    omega_z_rad_s: f64,
    p0_watt: f64,
    sigma_p_watt: f64,
}

impl TryFrom<TrapConfigDoc> for TrapConfig {
    type Error = Error;

    fn try_from(d: TrapConfigDoc) -> Result<Self> {
        let cfg = TrapConfig {
            species: AtomSpecies {
                mass: d.mass_kg,
                omega_hfs: d.omega_hfs_rad_s,
                gamma: d.gamma_rad_s,
            },
            eta: d.eta,
            u0: d.u0_joule,
            omega: [d.omega_x_rad_s, d.omega_y_rad_s, d.omega_z_rad_s],
            p0: d.p0_watt,
            sigma_p: d.sigma_p_watt,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<TrapConfig> for TrapConfigDoc {
    fn from(c: TrapConfig) -> Self {
        TrapConfigDoc {
            mass_kg: c.species.mass,
            omega_hfs_rad_s: c.species.omega_hfs,
            gamma_rad_s: c.species.gamma,
            eta: c.eta,
            u0_joule: c.u0,
            omega_x_rad_s: c.omega[0],
            omega_y_rad_s: c.omega[1],
            omega_z_rad_s: c.omega[2],
            p0_watt: c.p0,
            sigma_p_watt: c.sigma_p,
        }
    }
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        self.species.validate()?;
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta must be non-negative"));
        }
        if !self.u0.is_finite() {
            return Err(Error::config("u0 must be finite"));
        }
        if self.omega.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::config("trap frequencies must be positive"));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(Error::config("mean power p0 must be positive"));
        }
        if !(self.sigma_p >= 0.0 && self.sigma_p.is_finite()) {
            return Err(Error::config("power rms sigma_p must be non-negative"));
        }
        if self.sigma_p / self.p0 >= MAX_RELATIVE_POWER_NOISE {
            return Err(Error::config(format!(
                "sigma_p/p0 = {} is outside the Gaussian power model (< {MAX_RELATIVE_POWER_NOISE})",
                self.sigma_p / self.p0
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trap config serializes")
    }

    pub fn relative_power_noise(&self) -> f64 {
        self.sigma_p / self.p0
    }
}

/// Motional state of the atom: a definite phonon number per axis, or a thermal
/// (geometric) distribution with the given mean phonon numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhononDistribution {
    Fixed([u32; 3]),
    Thermal([f64; 3]),
}

impl PhononDistribution {
    pub const GROUND: PhononDistribution = PhononDistribution::Fixed([0, 0, 0]);

    pub fn validate(&self) -> Result<()> {
        if let PhononDistribution::Thermal(nbar) = self {
            if nbar.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
                return Err(Error::config("mean phonon numbers must be non-negative"));
            }
        }
        Ok(())
    }

    /// Thermal distribution for an atom at temperature `t_kelvin`.
    pub fn thermal_from_temperature(cfg: &TrapConfig, t_kelvin: f64) -> Self {
        PhononDistribution::Thermal(cfg.omega.map(|w| mean_phonon_from_temperature(t_kelvin, w)))
    }
}

/// η = |ω_hfs / Δ_eff|.
pub fn eta_from_detuning(omega_hfs: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::domain("detuning must be finite and nonzero"));
    }
    Ok((omega_hfs / detuning).abs())
}

/// Effective detuning (rad/s) of a trap laser from an alkali D1/D2 doublet.
///
/// The two lines are weighted 1:2 by line strength in the inverse detuning,
/// `1/Δ_eff = (1/3)/Δ_D1 + (2/3)/Δ_D2`, with `Δ = ω_laser − ω_line`.
pub fn effective_detuning(laser_wavelength: f64, d1_wavelength: f64, d2_wavelength: f64) -> f64 {
    let omega = |lambda: f64| 2.0 * std::f64::consts::PI * C / lambda;
    let wl = omega(laser_wavelength);
    let d1 = wl - omega(d1_wavelength);
    let d2 = wl - omega(d2_wavelength);
    1.0 / (1.0 / (3.0 * d1) + 2.0 / (3.0 * d2))
}

/// η for a cesium atom in a trap at the given laser wavelength (m).
pub fn cs133_eta(laser_wavelength: f64) -> Result<f64> {
    let delta = effective_detuning(laser_wavelength, CS133_D1_WAVELENGTH, CS133_D2_WAVELENGTH);
    eta_from_detuning(CS133_HFS, delta)
}

fn zero_point_sum(cfg: &TrapConfig, n: [f64; 3]) -> f64 {
    cfg.omega.iter().zip(n).map(|(w, n)| (n + 0.5) * w).sum()
}

/// Mean differential light shift (rad/s) for a definite phonon state.
pub fn dls_mean(cfg: &TrapConfig, n: [u32; 3]) -> f64 {
    -cfg.eta * cfg.u0 / HBAR + 0.5 * cfg.eta * zero_point_sum(cfg, n.map(f64::from))
}

/// Signed DLS spread (rad/s) caused by trap power noise, for a definite
/// phonon state. Use the magnitude as the Gaussian width.
pub fn dls_sigma(cfg: &TrapConfig, n: [u32; 3]) -> f64 {
    dls_sigma_real(cfg, n.map(f64::from))
}

fn dls_sigma_real(cfg: &TrapConfig, n: [f64; 3]) -> f64 {
    let r = cfg.relative_power_noise();
    -cfg.eta * (cfg.u0 / HBAR) * r + 0.25 * cfg.eta * zero_point_sum(cfg, n) * r
}

/// Probability of phonon number `n` in a thermal state with mean `nbar`.
pub fn thermal_probability(nbar: f64, n: u64) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n = n as f64;
    (n * (nbar / (nbar + 1.0)).ln() - (nbar + 1.0).ln()).exp()
}

/// Mean phonon number from equipartition, `(n̄ + ½)ħω = k_B T / 2`.
///
/// Clamped at zero when `k_B T < ħω`, where the classical relation no longer
/// applies.
pub fn mean_phonon_from_temperature(t_kelvin: f64, omega: f64) -> f64 {
    (K_B * t_kelvin / (2.0 * HBAR * omega) - 0.5).max(0.0)
}

/// Number of terms `N` such that the thermal tail mass `P(n ≥ N)` is below
/// [`THERMAL_TAIL_MASS`].
pub fn thermal_cutoff(nbar: f64) -> Result<u64> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::domain("mean phonon number must be non-negative"));
    }
    if nbar == 0.0 {
        return Ok(1);
    }
    // P(n >= N) = (n̄/(n̄+1))^N
    let ratio_ln = (nbar / (nbar + 1.0)).ln();
    let n = (THERMAL_TAIL_MASS.ln() / ratio_ln).floor() + 1.0;
    if n > MAX_THERMAL_CUTOFF as f64 {
        return Err(Error::Unsupported(format!(
            "thermal sum for n̄ = {nbar} needs {n} terms (limit {MAX_THERMAL_CUTOFF})"
        )));
    }
    Ok(n as u64)
}

/// Truncated thermal expectation `Σ_{n<N} P(n) f(n)` with the tail-mass cutoff.
pub fn thermal_expectation(nbar: f64, mut f: impl FnMut(u64) -> f64) -> Result<f64> {
    let cutoff = thermal_cutoff(nbar)?;
    let ratio = nbar / (nbar + 1.0);
    let mut p = 1.0 / (nbar + 1.0);
    let mut acc = 0.0;
    for n in 0..cutoff {
        acc += p * f(n);
        p *= ratio;
    }
    Ok(acc)
}

/// Thermally averaged DLS spread, `sqrt(Σ P(n) σ²(n))` over the product of
/// the three per-axis thermal distributions.
pub fn thermal_average_dls_sigma(cfg: &TrapConfig, nbar: [f64; 3]) -> Result<f64> {
    // σ(n) = a + Σ b_q n_q is affine, so the triple sum factorizes into
    // per-axis truncated moments m0, m1, m2.
    let r = cfg.relative_power_noise();
    let a = dls_sigma_real(cfg, [0.0; 3]);
    let b = cfg.omega.map(|w| 0.25 * cfg.eta * w * r);
    let mut m = [[0.0; 3]; 3];
    for q in 0..3 {
        m[q][0] = thermal_expectation(nbar[q], |_| 1.0)?;
        m[q][1] = thermal_expectation(nbar[q], |n| n as f64)?;
        m[q][2] = thermal_expectation(nbar[q], |n| (n as f64).powi(2))?;
    }
    let mass: f64 = (0..3).map(|q| m[q][0]).product();
    let others = |q: usize| mass / m[q][0];
    let mut second = a * a * mass;
    for q in 0..3 {
        second += 2.0 * a * b[q] * m[q][1] * others(q);
        second += b[q] * b[q] * m[q][2] * others(q);
        for s in 0..3 {
            if s != q {
                let third = 3 - q - s;
                second += b[q] * b[s] * m[q][1] * m[s][1] * m[third][0];
            }
        }
    }
    Ok(second.max(0.0).sqrt())
}
