use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// One-dimensional Gaussian kernel density estimate with a fixed bandwidth.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

/// Grid spacing relative to the bandwidth; keeps trapezoidal error far below
/// the kernel tails cut at four bandwidths.
const STEPS_PER_BANDWIDTH: f64 = 8.0;
const MAX_GRID_POINTS: usize = 200_000;

impl GaussianKde {
    pub fn new(samples: &[f64], bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("kde needs at least one sample".into()));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kde bandwidth must be positive, got {bandwidth}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite kde sample".into()));
        }
        Ok(GaussianKde {
            samples: samples.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.samples.len() as f64 * h * (2.0 * PI).sqrt());
        self.samples
            .iter()
            .map(|&xi| {
                let u = (x - xi) / h;
                (-0.5 * u * u).exp()
            })
            .sum::<f64>()
            * norm
    }

    /// Support covered by exported grids: four bandwidths beyond the extreme
    /// samples.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 4.0 * self.bandwidth, hi + 4.0 * self.bandwidth)
    }

    /// Density evaluated on an evenly spaced grid over [`Self::support`].
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        let n = (((hi - lo) / self.bandwidth) * STEPS_PER_BANDWIDTH).ceil() as usize + 1;
        self.grid_with(n.clamp(64, MAX_GRID_POINTS))
    }

    pub fn grid_with(&self, points: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        let points = points.max(2);
        let step = (hi - lo) / (points - 1) as f64;
        (0..points)
            .map(|i| {
                let x = lo + step * i as f64;
                (x, self.density(x))
            })
            .collect()
    }
}

/// Trapezoidal integral of sampled `(x, y)` points.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Writes `(x, y)` pairs as a two-column CSV with the given header.
pub fn write_xy_csv(path: &Path, header: (&str, &str), points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([header.0, header.1]).map_err(|e| csv_error(path, e))?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}
