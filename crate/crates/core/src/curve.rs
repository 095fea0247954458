use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sampled `(x, y)` series with labels and free-form annotations.
///
/// `half_width`, when present, holds a 95% confidence half-width per point.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub half_width: Option<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

impl Curve {
    pub fn new(x_label: impl Into<String>, y_label: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        let c = Self {
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
            half_width: None,
            meta: BTreeMap::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_half_width(mut self, hw: Vec<f64>) -> Result<Self> {
        if hw.len() != self.points.len() {
            return Err(Error::config("half-width length differs from point count"));
        }
        self.half_width = Some(hw);
        Ok(self)
    }

    pub fn annotate(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::config("curve x values must be strictly increasing"));
        }
        if self.points.iter().any(|p| !p.1.is_finite() || !p.0.is_finite()) {
            return Err(Error::config("curve values must be finite"));
        }
        Ok(())
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    /// Largest pointwise gap between two curves sampled on the same grid.
    pub fn max_abs_diff(&self, other: &Curve) -> Result<f64> {
        if self.points.len() != other.points.len()
            || self.xs().zip(other.xs()).any(|(a, b)| a != b)
        {
            return Err(Error::config("curves are sampled on different grids"));
        }
        Ok(self
            .ys()
            .zip(other.ys())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// `n` points evenly spaced from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `n` points log-spaced from `lo` to `hi` inclusive. Both must be positive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(lo.log10(), hi.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect();
    // pin the endpoints exactly
    if let Some(first) = v.first_mut() {
        *first = lo;
    }
    if n > 1 {
        v[n - 1] = hi;
    }
    v
}

/// Default SIR threshold grid: -20 dB to +30 dB in 101 steps.
pub fn default_threshold_grid_db() -> Vec<f64> {
    linspace(-20.0, 30.0, 101)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
