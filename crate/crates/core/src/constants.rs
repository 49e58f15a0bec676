//! Physical constants (CODATA 2018) and cesium-133 atomic data.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817_65e-34;
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s (exact).
pub const C: f64 = 299_792_458.0;
/// Unified atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Cesium-133 atomic mass, kg.
pub const CS133_MASS: f64 = 132.905_451_961 * AMU;
/// Cesium-133 ground-state hyperfine splitting, rad/s (SI second definition).
pub const CS133_HFS: f64 = 2.0 * PI * 9_192_631_770.0;
/// Cesium D2 natural linewidth, rad/s.
pub const CS133_GAMMA_D2: f64 = 3.2889e7;
/// Cesium D1 vacuum wavelength, m.
pub const CS133_D1_WAVELENGTH: f64 = 894.592_959_86e-9;
/// Cesium D2 vacuum wavelength, m.
pub const CS133_D2_WAVELENGTH: f64 = 852.347_275_82e-9;
