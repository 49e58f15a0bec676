use super::{covariance, lm, named, sd, Curve, Data, FitResult};
use crate::error::{Error, Result};

/// Fits `p(t) = p₀ e^{−t/τ}` to survival data.
///
/// Internally `(p₀, k = 1/τ)`; `σ_τ = σ_k/k²`.
pub fn fit_exponential(t: &[f64], survival: &[f64], sigma: Option<&[f64]>) -> Result<FitResult> {
    let data = Data::new(t, survival, sigma)?;
    if data.len() < 3 {
        return Err(Error::domain("exponential fit needs at least 3 points"));
    }
    let positive: Vec<(f64, f64)> = data
        .x
        .iter()
        .zip(&data.y)
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    if positive.len() < 2 {
        return Err(Error::Unidentifiable("fewer than two positive survival values".into()));
    }
    let n = positive.len() as f64;
    let mt = positive.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = positive.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = positive.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    let sxy: f64 = positive.iter().map(|(t, l)| (t - mt) * (l - ml)).sum();
    if !(sxx > 0.0) || sxy >= 0.0 {
        return Err(Error::Unidentifiable("survival does not decay".into()));
    }
    let k0 = -sxy / sxx;
    let p00 = (ml + k0 * mt).exp();

    let curve = Curve {
        data: &data,
        n_params: 2,
        f: |t: f64, p: &[f64], g: &mut [f64]| {
            let e = (-p[1] * t).exp();
            g[0] = e;
            g[1] = -t * p[0] * e;
            p[0] * e
        },
    };
    let out = lm::minimize(&curve, &[p00, k0], lm::Options::default());
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
        });
    }
    let (p0, k) = (out.params[0], out.params[1]);
    if !(k > 0.0) {
        return Err(Error::Unidentifiable("fitted decay rate is not positive".into()));
    }
    let (residuals, rss) = curve.residual_table(&out.params);
    let cov = covariance(&curve.weighted_jacobian(&out.params), rss, data.weighted)
        .ok_or_else(|| Error::Unidentifiable("lifetime unconstrained by the data".into()))?;

    Ok(FitResult {
        model: "exponential".into(),
        params: named(&[("lifetime", 1.0 / k), ("amplitude", p0)]),
        uncertainties: named(&[("lifetime", sd(&cov, 1) / (k * k)), ("amplitude", sd(&cov, 0))]),
        rss,
        converged: true,
        iterations: out.iterations,
        residuals,
        cost_history: out.cost_history,
    })
}
