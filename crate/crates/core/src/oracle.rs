//! Independent reference computations used to validate the closed forms:
//! direct integration of the driven two-level amplitudes, time-domain phase
//! accumulation under a pulse sequence, and explicit thermal sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phonon::{rate_intensity_transition, rate_pointing_transition, AxisNoise, Jump};
use crate::pulse::PulseSequence;
use crate::trap::{thermal_cutoff, thermal_probability};

/// Population loss rate of a ground state driven off resonance, from fixed-step
/// RK4 integration of
///
/// ```text
/// ċ_g = −i(Ω/2) c_e
/// ċ_e = −i(Ω/2) c_g − (iΔ + Γ/2) c_e
/// ```
///
/// The slope of `ln|c_g|` is regressed over a window of many scattering-free
/// oscillation periods; the population rate is twice its magnitude.
pub fn scattering_rate_ode(rabi: f64, detuning: f64, gamma: f64) -> Result<f64> {
    if !(rabi > 0.0 && gamma > 0.0 && detuning != 0.0 && detuning.is_finite()) {
        return Err(Error::domain(
            "need positive Rabi frequency and linewidth and nonzero detuning",
        ));
    }
    let fast = detuning.abs().max(rabi).max(gamma);
    let h = 0.05 / fast;
    // Long enough that fast micromotion of |c_g| averages out of the slope.
    let window = 2000.0 / gamma;
    let settle = 20.0 / gamma;
    let steps = ((settle + window) / h).ceil() as usize;
    let stride = (steps / 4000).max(1);

    let half = Complex64::new(0.0, -0.5 * rabi);
    let damp = Complex64::new(-0.5 * gamma, -detuning);
    let deriv = |g: Complex64, e: Complex64| (half * e, half * g + damp * e);

    let (mut g, mut e) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let (mut n, mut st, mut sl, mut stt, mut stl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..=steps {
        let (k1g, k1e) = deriv(g, e);
        let (k2g, k2e) = deriv(g + k1g * (h / 2.0), e + k1e * (h / 2.0));
        let (k3g, k3e) = deriv(g + k2g * (h / 2.0), e + k2e * (h / 2.0));
        let (k4g, k4e) = deriv(g + k3g * h, e + k3e * h);
        g += (k1g + k2g * 2.0 + k3g * 2.0 + k4g) * (h / 6.0);
        e += (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (h / 6.0);
        let t = k as f64 * h;
        if t >= settle && k % stride == 0 {
            let l = g.norm().ln();
            n += 1.0;
            st += t;
            sl += l;
            stt += t * t;
            stl += t * l;
        }
    }
    let slope = (n * stl - st * sl) / (n * stt - st * st);
    Ok(-2.0 * slope)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(a) + inner + f(b))
}

/// Phase picked up under `seq` from a unit sinusoid at `f_hz`, in both
/// quadratures about the sequence midpoint: `∫ s(t) (cos, sin)(2πf(t − T/2)) dt`,
/// integrated numerically window by window.
pub fn accumulated_phase(seq: &PulseSequence, f_hz: f64) -> (f64, f64) {
    let w = 2.0 * PI * f_hz;
    let mid = 0.5 * seq.t_total();
    let mut acc = (0.0, 0.0);
    for (a, b, s) in seq.windows() {
        let cycles = f_hz * (b - a);
        let m = 2 * ((16.0 * cycles).ceil() as usize).max(8); // 32 intervals per cycle
        acc.0 += s * simpson(|t| (w * (t - mid)).cos(), a, b, m);
        acc.1 += s * simpson(|t| (w * (t - mid)).sin(), a, b, m);
    }
    acc
}

/// Magnitude of the net phase from a unit sinusoid of the worst-case phase.
pub fn phase_magnitude(seq: &PulseSequence, f_hz: f64) -> f64 {
    let (c, s) = accumulated_phase(seq, f_hz);
    c.hypot(s)
}

/// Frequencies in `[f_lo, f_hi]` at which a sinusoid of any phase leaves no
/// net phase.
///
/// Zeros may be simple (the response changes sign) or double (it touches
/// zero, as for the spin echo), so they are located as minima of the phase
/// magnitude: grid minima at spacing `step` are refined by bisection on the
/// sign of the local slope and kept if the magnitude there is negligible.
pub fn zero_phase_frequencies(seq: &PulseSequence, f_lo: f64, f_hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(f_hi > f_lo && f_lo > 0.0 && step > 0.0) {
        return Err(Error::domain("invalid zero-search band"));
    }
    let n = ((f_hi - f_lo) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| f_lo + i as f64 * step).collect();
    let mag = |f: f64| phase_magnitude(seq, f);
    let vals: Vec<f64> = grid.par_iter().map(|&f| mag(f)).collect();
    let tol = ZERO_PHASE_TOLERANCE * seq.t_total();
    let mut zeros = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(vals[i] <= vals[i - 1] && vals[i] < vals[i + 1]) {
            continue;
        }
        let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
        let h = 1e-3 * step;
        while b - a > 1e-9 * step {
            let m = 0.5 * (a + b);
            if mag(m + h) - mag(m - h) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let f = 0.5 * (a + b);
        if mag(f) <= tol {
            zeros.push(f);
        }
    }
    Ok(zeros)
}

/// Net phase, relative to the sequence duration, below which the quadrature
/// result counts as zero; well above the Simpson error at 32 intervals per
/// cycle.
const ZERO_PHASE_TOLERANCE: f64 = 1e-4;

/// `Σ_n P(n) [Γ(n→n+2) + Γ(n→n−2) + Γ(n→n+1) + Γ(n→n−1)]` for one axis,
/// summed term by term from the individual transition rates, truncated where
/// [`crate::trap::thermal_expectation`] truncates.
pub fn thermal_transition_sum(omega: f64, mass: f64, noise: &AxisNoise, nbar: f64) -> Result<f64> {
    let s_k = noise.spring().angular_density(2.0 * omega);
    let s_q = noise.position().angular_density(omega);
    let cutoff = thermal_cutoff(nbar)?;
    let mut total = 0.0;
    for n in 0..cutoff {
        let p = thermal_probability(nbar, n);
        let mut r = 0.0;
        for dir in [Jump::Up, Jump::Down] {
            r += rate_intensity_transition(omega, s_k, n, dir);
            r += rate_pointing_transition(omega, mass, s_q, n, dir);
        }
        total += p * r;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::scattering_params;
    use crate::pulse::{filter_zeros, make_cpmg};

    #[test]
    fn scattering_matches_closed_form_far_detuned() {
        let gamma = 1.0;
        let ode = scattering_rate_ode(gamma, 100.0 * gamma, gamma).unwrap();
        let closed = scattering_params(gamma, 100.0 * gamma, gamma).unwrap().rate;
        assert!((ode / closed - 1.0).abs() < 0.01, "{ode} vs {closed}");
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn echo_phase_zeros_match_filter() {
        let seq = make_cpmg(1, 0.8).unwrap();
        let oracle = zero_phase_frequencies(&seq, 0.05, 10.2, 1e-3).unwrap();
        let analytic = filter_zeros(&seq, 0.05, 10.2, 1e-3).unwrap();
        assert_eq!(oracle.len(), analytic.len(), "{oracle:?} vs {analytic:?}");
        for (a, b) in oracle.iter().zip(&analytic) {
            assert!((a - b).abs() < 1e-3);
        }
        // Echo zeros at f = 2k/T.
        for (k, z) in oracle.iter().enumerate() {
            assert!((z - 2.5 * (k + 1) as f64).abs() < 1e-6, "{z}");
        }
    }

    #[test]
    fn ramsey_has_no_phase_at_multiples_of_inverse_duration() {
        let seq = PulseSequence::ramsey(0.5).unwrap();
        let z = zero_phase_frequencies(&seq, 0.5, 6.5, 1e-3).unwrap();
        assert_eq!(z.len(), 3);
        for (k, f) in z.iter().enumerate() {
            assert!((f - 2.0 * (k + 1) as f64).abs() < 1e-6);
        }
    }
}
