use super::{covariance, lm, named, sd, Curve, Data, FitResult};
use crate::coherence::{temperature_from_t2star, CoherenceSeries};
use crate::error::{Error, Result};

/// Points with `|C − 1|` (or `|C|`) below this everywhere after `t = 0`
/// carry no information about the decay shape.
const FLAT_TOLERANCE: f64 = 0.02;

fn columns(series: &CoherenceSeries) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = series.points();
    (
        p.iter().map(|q| q.t).collect(),
        p.iter().map(|q| q.c).collect(),
        p.iter().map(|q| q.sigma).collect(),
    )
}

fn check_shape(data: &Data) -> Result<()> {
    if data.len() < 4 {
        return Err(Error::domain("decay fit needs at least 4 points"));
    }
    let later: Vec<f64> = data
        .x
        .iter()
        .zip(&data.y)
        .filter(|(t, _)| **t > 0.0)
        .map(|(_, c)| *c)
        .collect();
    if later.is_empty() || later.iter().all(|c| (c - 1.0).abs() < FLAT_TOLERANCE) {
        return Err(Error::Unidentifiable(
            "coherence never decays; the decay is unresolved".into(),
        ));
    }
    if later.iter().all(|c| c.abs() < FLAT_TOLERANCE) {
        return Err(Error::Unidentifiable("coherence is lost before the first delay".into()));
    }
    Ok(())
}

/// Least squares through the origin of `y = a·x` over the given pairs.
fn slope_through_origin(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (sxy, sxx) = pairs.fold((0.0, 0.0), |(sxy, sxx), (x, y)| (sxy + x * y, sxx + x * x));
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Starting points `(σ, R)`: the combined estimate, the two single-channel
/// corners, and a point halfway between the combined estimate and the origin.
fn starts(data: &Data) -> Vec<[f64; 2]> {
    let usable = |c: f64| c > 0.05 && c < 1.0;
    let pts: Vec<(f64, f64)> = data
        .x
        .iter()
        .zip(&data.y)
        .filter(|(t, c)| **t > 0.0 && usable(**c))
        .map(|(t, c)| (*t, *c))
        .collect();
    let half = data.len().div_ceil(2);
    let t_split = data.x[half.min(data.len() - 1)];

    // −2 ln C = σ² t² for a pure Gaussian.
    let gauss = |it: &mut dyn Iterator<Item = &(f64, f64)>| {
        slope_through_origin(it.map(|(t, c)| (t * t, -2.0 * c.ln())))
            .map(|s2| s2.max(0.0).sqrt())
            .unwrap_or(0.0)
    };
    let sigma_head = gauss(&mut pts.iter().filter(|(t, _)| *t < t_split));
    let sigma_all = gauss(&mut pts.iter());

    // ln C = a − R t on the tail.
    let tail: Vec<(f64, f64)> = pts.iter().filter(|(t, _)| *t >= t_split).copied().collect();
    let tail = if tail.len() >= 2 { tail } else { pts.clone() };
    let rate_tail = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let ml = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|(t, c)| (t - mt) * (c.ln() - ml)).sum();
        let sxx: f64 = tail.iter().map(|(t, _)| (t - mt).powi(2)).sum();
        if sxx > 0.0 {
            (-sxy / sxx).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let rate_all = slope_through_origin(pts.iter().map(|(t, c)| (*t, -c.ln())))
        .unwrap_or(0.0)
        .max(0.0);

    // Fall back to the scale of the time axis when the data give nothing.
    let scale = 1.0 / data.x[data.len() - 1].max(f64::MIN_POSITIVE);
    let or = |v: f64| if v > 0.0 && v.is_finite() { v } else { scale };
    vec![
        [sigma_head, rate_tail],
        [or(sigma_all), 0.0],
        [0.0, or(rate_all)],
        [0.5 * or(sigma_head), 0.5 * or(rate_tail)],
    ]
}

/// Fits `C(t) = exp(−σ²t²/2 − R t)` with `σ, R ≥ 0`.
///
/// The optimizer works in `(√σ, √R)`; uncertainties come from the
/// covariance in `(σ², R)`, where the model is regular even at σ = 0. The σ²
/// uncertainty `δ` is carried to σ through the ±2δ interval: half the wider
/// side of `[√(σ² − 2δ), √(σ² + 2δ)]` around σ (lower end clamped at zero).
/// Far from the boundary this is the delta method `δ/2σ`; near it, σ is
/// consistent with zero at 2 standard errors exactly when σ² is.
pub fn fit_coherence_decay(series: &CoherenceSeries) -> Result<FitResult> {
    let (t, c, s) = columns(series);
    let data = Data::new(&t, &c, Some(&s))?;
    check_shape(&data)?;
    let curve = Curve {
        data: &data,
        n_params: 2,
        f: |t: f64, p: &[f64], g: &mut [f64]| {
            let (u, v) = (p[0], p[1]);
            let c = (-(u.powi(4) * t * t) / 2.0 - v * v * t).exp();
            g[0] = -2.0 * u.powi(3) * t * t * c;
            g[1] = -2.0 * v * t * c;
            c
        },
    };

    let mut best: Option<lm::Outcome> = None;
    let mut max_iter = 0;
    for [sigma0, rate0] in starts(&data) {
        let out = lm::minimize(&curve, &[sigma0.sqrt(), rate0.sqrt()], lm::Options::default());
        max_iter = max_iter.max(out.iterations);
        if out.converged && out.cost.is_finite() && best.as_ref().is_none_or(|b| out.cost < b.cost) {
            best = Some(out);
        }
    }
    let out = best.ok_or(Error::NotConverged { iterations: max_iter })?;
    let sigma = out.params[0].powi(2);
    let rate = out.params[1].powi(2);
    let (residuals, rss) = curve.residual_table(&out.params);

    let natural = Curve {
        data: &data,
        n_params: 2,
        f: |t: f64, p: &[f64], g: &mut [f64]| {
            let c = (-p[0] * t * t / 2.0 - p[1] * t).exp();
            g[0] = -t * t / 2.0 * c;
            g[1] = -t * c;
            c
        },
    };
    let cov = covariance(&natural.weighted_jacobian(&[sigma * sigma, rate]), rss, data.weighted)
        .ok_or_else(|| Error::Unidentifiable("σ and R cannot be separated on this time grid".into()))?;
    let sd_s2 = sd(&cov, 0);
    let s2 = sigma * sigma;
    let lower = sigma - (s2 - 2.0 * sd_s2).max(0.0).sqrt();
    let upper = (s2 + 2.0 * sd_s2).sqrt() - sigma;
    let sd_sigma = 0.5 * lower.max(upper);

    Ok(FitResult {
        model: "coherence_decay".into(),
        params: named(&[("sigma_dls", sigma), ("rate", rate)]),
        uncertainties: named(&[("sigma_dls", sd_sigma), ("rate", sd(&cov, 1))]),
        rss,
        converged: true,
        iterations: out.iterations,
        residuals,
        cost_history: out.cost_history,
    })
}

/// Ramsey envelope of a thermal atom, `(1 + 0.95 (t/T₂*)²)^{-3/2}`; its
/// value at `t = T₂*` is `1.95^{-3/2} ≈ e⁻¹`.
pub fn ramsey_envelope(t: f64, t2star: f64) -> f64 {
    (1.0 + 0.95 * (t / t2star).powi(2)).powf(-1.5)
}

/// Fits the Ramsey envelope's 1/e time and converts it to an atom
/// temperature for DLS coefficient `eta`.
pub fn fit_ramsey_decay(series: &CoherenceSeries, eta: f64) -> Result<FitResult> {
    let (t, c, s) = columns(series);
    let data = Data::new(&t, &c, Some(&s))?;
    check_shape(&data)?;
    // Parameter is ln T₂*, keeping T₂* positive.
    let curve = Curve {
        data: &data,
        n_params: 1,
        f: |t: f64, p: &[f64], g: &mut [f64]| {
            let x2 = (t * (-p[0]).exp()).powi(2);
            let base = 1.0 + 0.95 * x2;
            g[0] = 2.85 * x2 * base.powf(-2.5);
            base.powf(-1.5)
        },
    };
    let t_last = data.x[data.len() - 1];
    let first_below = data
        .x
        .iter()
        .zip(&data.y)
        .find(|(t, c)| **t > 0.0 && **c < (-1f64).exp())
        .map(|(t, _)| *t);
    let init = first_below.unwrap_or(2.0 * t_last).ln();

    let out = lm::minimize(&curve, &[init], lm::Options::default());
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
        });
    }
    let t2star = out.params[0].exp();
    let (residuals, rss) = curve.residual_table(&out.params);
    let cov = covariance(&curve.weighted_jacobian(&out.params), rss, data.weighted)
        .ok_or_else(|| Error::Unidentifiable("Ramsey envelope unconstrained by the data".into()))?;
    let rel = sd(&cov, 0);
    let temperature = temperature_from_t2star(t2star, eta)?;

    Ok(FitResult {
        model: "ramsey".into(),
        params: named(&[("t2star", t2star), ("temperature", temperature)]),
        uncertainties: named(&[("t2star", t2star * rel), ("temperature", temperature * rel)]),
        rss,
        converged: true,
        iterations: out.iterations,
        residuals,
        cost_history: out.cost_history,
    })
}
