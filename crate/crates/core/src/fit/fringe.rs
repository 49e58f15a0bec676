use std::f64::consts::PI;

use super::{covariance, lm, named, sd, Curve, Data, FitResult};
use crate::error::{Error, Result};

/// Fits `p(φ) = b + (A/2)cos(φ − φ₀)`.
///
/// Internally linear in `(b, c, s)` with `p = b + c cos φ + s sin φ`, so the
/// optimizer cannot stall on the phase. The amplitude is clipped to
/// `[0, 1 + 3σ_A]`.
pub fn fit_fringe(phase: &[f64], population: &[f64], sigma: Option<&[f64]>) -> Result<FitResult> {
    let data = Data::new(phase, population, sigma)?;
    if data.len() < 4 {
        return Err(Error::domain("fringe fit needs at least 4 points"));
    }
    if data.x[data.len() - 1] - data.x[0] <= PI {
        return Err(Error::domain("phases must span more than half a fringe period"));
    }
    let curve = Curve {
        data: &data,
        n_params: 3,
        f: |phi: f64, p: &[f64], g: &mut [f64]| {
            let (c, s) = (phi.cos(), phi.sin());
            g[0] = 1.0;
            g[1] = c;
            g[2] = s;
            p[0] + p[1] * c + p[2] * s
        },
    };
    let mean = data.y.iter().sum::<f64>() / data.len() as f64;
    let out = lm::minimize(&curve, &[mean, 0.0, 0.0], lm::Options::default());
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
        });
    }
    let [b, c, s] = [out.params[0], out.params[1], out.params[2]];
    let (residuals, rss) = curve.residual_table(&out.params);
    let cov = covariance(&curve.weighted_jacobian(&out.params), rss, data.weighted)
        .ok_or_else(|| Error::Unidentifiable("fringe phases do not constrain a sinusoid".into()))?;

    let r = c.hypot(s);
    let amplitude = 2.0 * r;
    let (sd_amp, sd_phase) = if r > 0.0 {
        let var = (c * c * cov[(1, 1)] + s * s * cov[(2, 2)] + 2.0 * c * s * cov[(1, 2)]) / (r * r);
        let var_phi = (s * s * cov[(1, 1)] + c * c * cov[(2, 2)] - 2.0 * c * s * cov[(1, 2)]) / r.powi(4);
        (2.0 * var.max(0.0).sqrt(), var_phi.max(0.0).sqrt().min(PI))
    } else {
        (2.0 * (0.5 * (cov[(1, 1)] + cov[(2, 2)])).max(0.0).sqrt(), PI)
    };
    let amplitude = amplitude.clamp(0.0, 1.0 + 3.0 * sd_amp);

    Ok(FitResult {
        model: "fringe".into(),
        params: named(&[("amplitude", amplitude), ("phase_offset", s.atan2(c)), ("baseline", b)]),
        uncertainties: named(&[
            ("amplitude", sd_amp),
            ("phase_offset", sd_phase),
            ("baseline", sd(&cov, 0)),
        ]),
        rss,
        converged: true,
        iterations: out.iterations,
        residuals,
        cost_history: out.cost_history,
    })
}
