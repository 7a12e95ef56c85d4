//! Log–log least squares.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Result of a straight-line fit of `log y` against `log x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub n_points: usize,
}

impl ExponentFit {
    /// Fitted value `exp(intercept) * x^slope`.
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fits `y ≈ C x^slope` on samples whose `x` lies in the closed `window`.
pub fn fit_power_law(samples: &[(f64, f64)], window: (f64, f64)) -> Result<ExponentFit> {
    if !(window.0 < window.1) {
        return Err(invalid(format!("degenerate fit window {window:?}")));
    }
    let mut pts = Vec::new();
    for &(x, y) in samples {
        if x < window.0 || x > window.1 {
            continue;
        }
        if !(x > 0.0) {
            return Err(invalid(format!("nonpositive abscissa {x} in fit")));
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(invalid(format!("nonpositive ordinate {y} at x = {x}")));
        }
        pts.push((x.ln(), y.ln()));
    }
    if pts.len() < 3 {
        return Err(invalid(format!(
            "power-law fit needs at least 3 samples in window, got {}",
            pts.len()
        )));
    }
    let (slope, intercept, residual_rms) = line_fit(&pts)?;
    Ok(ExponentFit {
        slope,
        intercept,
        window,
        residual_rms,
        n_points: pts.len(),
    })
}

/// Ordinary least squares line through `(u, v)` pairs; returns slope, intercept, rms residual.
pub fn line_fit(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let suu: f64 = pts.iter().map(|p| (p.0 - mu).powi(2)).sum();
    let suv: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    if !(suu > 0.0) {
        return Err(invalid("all abscissae coincide; slope undefined"));
    }
    let slope = suv / suu;
    let intercept = mv - slope * mu;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok((slope, intercept, (rss / n).sqrt()))
}

/// Least squares for `y ≈ X β` with a handful of columns, via normal equations.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.len() < k + 1 || k == 0 {
        return Err(invalid("too few rows for least squares"));
    }
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            aty[i] += r[i] * yi;
            for j in 0..k {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting
    let mut m: Vec<Vec<f64>> = ata
        .into_iter()
        .zip(aty)
        .map(|(mut row, b)| {
            row.push(b);
            row
        })
        .collect();
    for c in 0..k {
        let p = (c..k)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c].abs() < 1e-300 {
            return Err(invalid("singular least-squares design"));
        }
        m.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                for j in c..=k {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|i| m[i][k] / m[i][i]).collect();
    let rss: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, &yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    Ok((beta, (rss / rows.len() as f64).sqrt()))
}
