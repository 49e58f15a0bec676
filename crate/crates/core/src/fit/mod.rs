//! Least-squares parameter extraction: fringe amplitudes, combined
//! Gaussian/exponential coherence decays, exponential lifetimes and Ramsey
//! envelopes.
//!
//! Every fitter sorts its input first, so results do not depend on the order
//! in which points are supplied. Points are weighted by `1/σ²` when every
//! point carries a positive uncertainty and uniformly otherwise; in the
//! uniform case the covariance is scaled by the reduced residual variance.

mod decay;
mod fringe;
mod lifetime;
pub(crate) mod lm;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decay::{fit_coherence_decay, fit_ramsey_decay, ramsey_envelope};
pub use fringe::fit_fringe;
pub use lifetime::fit_exponential;

/// Converged least-squares estimate with 1σ uncertainties from the
/// Jacobian covariance at the optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub uncertainties: BTreeMap<String, f64>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `(x, data − model)` per input point, in sorted order.
    #[serde(skip)]
    pub residuals: Vec<[f64; 2]>,
    /// Weighted objective after each accepted optimizer step.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

impl FitResult {
    /// Estimate of `name`; panics on an unknown parameter name.
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn uncertainty(&self, name: &str) -> f64 {
        self.uncertainties[name]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }

    /// Writes `x,residual` CSV.
    pub fn write_residuals_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "residual"])?;
        for [x, r] in &self.residuals {
            w.write_record([x.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sorted observations with square-root weights.
pub(crate) struct Data {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sw: Vec<f64>,
    pub weighted: bool,
}

impl Data {
    pub fn new(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<Data> {
        if x.len() != y.len() || sigma.is_some_and(|s| s.len() != x.len()) {
            return Err(Error::domain("input columns differ in length"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::domain("inputs must be finite"));
        }
        let weighted = sigma.is_some_and(|s| !s.is_empty() && s.iter().all(|v| *v > 0.0 && v.is_finite()));
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
        let sw = idx
            .iter()
            .map(|&i| match sigma {
                Some(s) if weighted => 1.0 / s[i],
                _ => 1.0,
            })
            .collect();
        Ok(Data {
            x: idx.iter().map(|&i| x[i]).collect(),
            y: idx.iter().map(|&i| y[i]).collect(),
            sw,
            weighted,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }
}

/// A model `f(x; p)` whose gradient with respect to `p` is written into the
/// slice argument.
pub(crate) struct Curve<'a, F> {
    pub data: &'a Data,
    pub n_params: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64]) -> f64> lm::Problem for Curve<'_, F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn n_residuals(&self) -> usize {
        self.data.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.n_params];
        for (i, r) in out.iter_mut().enumerate() {
            *r = self.data.sw[i] * ((self.f)(self.data.x[i], p, &mut g) - self.data.y[i]);
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let mut g = vec![0.0; self.n_params];
        for i in 0..self.data.len() {
            (self.f)(self.data.x[i], p, &mut g);
            for (j, gj) in g.iter().enumerate() {
                out[(i, j)] = self.data.sw[i] * gj;
            }
        }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64]) -> f64> Curve<'_, F> {
    /// Weighted Jacobian at `p`.
    pub fn weighted_jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.data.len(), self.n_params);
        lm::Problem::jacobian(self, p, &mut j);
        j
    }

    /// Unweighted residuals `y − f(x)` and their weighted sum of squares.
    pub fn residual_table(&self, p: &[f64]) -> (Vec<[f64; 2]>, f64) {
        let mut g = vec![0.0; self.n_params];
        let mut rss = 0.0;
        let table = (0..self.data.len())
            .map(|i| {
                let r = self.data.y[i] - (self.f)(self.data.x[i], p, &mut g);
                rss += (self.data.sw[i] * r).powi(2);
                [self.data.x[i], r]
            })
            .collect();
        (table, rss)
    }
}

/// Parameter covariance from a weighted Jacobian in natural parameters.
pub(crate) fn covariance(jac: &DMatrix<f64>, rss: f64, weighted: bool) -> Option<DMatrix<f64>> {
    let (m, n) = jac.shape();
    let inv = lm::normal_inverse(jac)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let scale = if weighted { 1.0 } else { rss / (m - n).max(1) as f64 };
    Some(inv * scale)
}

/// `(x, y, sigma)` columns read from a CSV file.
pub type Columns = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

/// Columns of a CSV with header `x_name,y_name[,sigma]`. A missing `sigma`
/// column yields `None` (uniform weights).
pub fn read_xy_csv<R: std::io::Read>(input: R, x_name: &str, y_name: &str) -> Result<Columns> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let h = r.headers()?.clone();
    let with_sigma = h.len() > 2;
    if h.len() < 2 || &h[0] != x_name || &h[1] != y_name || (with_sigma && &h[2] != "sigma") {
        return Err(Error::Parse(format!("expected header `{x_name},{y_name}[,sigma]`")));
    }
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        x.push(crate::noise::parse_f64(&rec[0])?);
        y.push(crate::noise::parse_f64(&rec[1])?);
        if with_sigma {
            s.push(crate::noise::parse_f64(rec.get(2).unwrap_or(""))?);
        }
    }
    Ok((x, y, with_sigma.then_some(s)))
}

pub(crate) fn sd(cov: &DMatrix<f64>, i: usize) -> f64 {
    cov[(i, i)].max(0.0).sqrt()
}

pub(crate) fn named(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
