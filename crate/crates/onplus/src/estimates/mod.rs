//! Experiment harness: decay fits, empirical constants and the key estimate.

pub mod invariants;
pub mod key;
pub mod lemmas;
pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::linalg::ls_slope;

/// Relative tolerance for fitted decay rates against `log q`.
pub const RATE_TOL: f64 = 0.15;

/// One named pass/fail assertion with a human-readable detail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, detail }
    }
}

/// Grid values with a fitted exponential decay rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `(decaying parameter, |value|)` pairs in grid order.
    pub points: Vec<(f64, f64)>,
    /// Slope of `log |value|` against the parameter.
    pub fitted_rate: Option<f64>,
    /// `max |value| q^{-x}`.
    pub empirical_constant: f64,
    /// Fit residuals of `log |value|`, for the points that entered the fit.
    pub residuals: Vec<f64>,
}

/// Points with `|value| <= 10 eps` (parity zeros) are excluded from the fit.
pub fn fit_decay(points: &[(f64, f64)], q: f64) -> DecayReport {
    let floor = 10.0 * f64::EPSILON;
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > floor).collect();
    let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let fit = ls_slope(&xs, &ys);
    let residuals = match fit {
        Some((s, c)) => xs.iter().zip(&ys).map(|(x, y)| y - (c + s * x)).collect(),
        None => vec![],
    };
    let empirical_constant = points.iter().fold(0.0f64, |a, p| a.max(p.1 * q.powf(-p.0)));
    DecayReport { points: points.to_vec(), fitted_rate: fit.map(|f| f.0), empirical_constant, residuals }
}

/// `|rate / target - 1| <= rel`.
pub fn rate_within(rate: Option<f64>, target: f64, rel: f64) -> bool {
    rate.is_some_and(|r| (r / target - 1.0).abs() <= rel)
}

/// Spearman rank correlation of `ys` against its index.
pub fn spearman_trend(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for t in i..=j {
                r[idx[t]] = avg;
            }
            i = j + 1;
        }
        r
    };
    let rx: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ry = rank(ys);
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_rate() {
        let q: f64 = 0.38;
        let pts: Vec<(f64, f64)> = (0..6).map(|b| (b as f64, 2.0 * q.powi(b))).collect();
        let r = fit_decay(&pts, q);
        assert!((r.fitted_rate.unwrap() - q.ln()).abs() < 1e-12);
        assert!((r.empirical_constant - 2.0).abs() < 1e-12);
        assert!(rate_within(r.fitted_rate, q.ln(), 0.15));
    }

    #[test]
    fn fit_skips_zeros() {
        let pts = vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.01), (3.0, 0.0)];
        let r = fit_decay(&pts, 0.5);
        assert_eq!(r.residuals.len(), 2);
        assert!((r.fitted_rate.unwrap() - 0.01f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn spearman() {
        assert!((spearman_trend(&[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman_trend(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
        assert_eq!(spearman_trend(&[1.0, 1.0]), 0.0);
    }
}
