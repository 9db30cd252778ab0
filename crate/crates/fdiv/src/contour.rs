//! Divergence surfaces over generator parameters (mu, sigma), with
//! trajectory overlays for comparing training runs against the landscape
//! they are supposed to descend.

use crate::dist::{divergence_quadrature, Density};
use crate::divergence::Divergence;
use crate::trainer::TrainTrace;
use crate::util::linspace;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFailure {
    pub i: usize,
    pub j: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSurface {
    pub divergence_name: String,
    pub mu_axis: Vec<f64>,
    pub sigma_axis: Vec<f64>,
    /// values[i][j] = D(p, N(mu_i, sigma_j^2)); NaN where quadrature failed.
    pub values: Vec<Vec<f64>>,
    /// (mu, sigma, value) at the grid minimum.
    pub argmin: (f64, f64, f64),
    pub failures: Vec<GridFailure>,
}

/// Evaluate the divergence on a (mu, sigma) grid. Cells run in parallel;
/// assembly order is fixed by cell index, so results are reproducible.
/// Per-cell quadrature failures are recorded, not fatal.
pub fn contour_grid(
    div: &Divergence,
    p: &Density,
    mu_range: (f64, f64),
    sigma_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<GridSurface> {
    if p.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: p.dim(),
        });
    }
    if !(sigma_range.0 > 0.0) {
        return Err(Error::DomainError {
            what: "sigma range lower bound",
            value: sigma_range.0,
        });
    }
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::InvalidConfig {
            reason: format!("resolution must be at least 2x2, got {resolution:?}"),
        });
    }
    let mu_axis = linspace(mu_range.0, mu_range.1, resolution.0);
    let sigma_axis = linspace(sigma_range.0, sigma_range.1, resolution.1);

    let rows: Vec<(Vec<f64>, Vec<GridFailure>)> = mu_axis
        .par_iter()
        .enumerate()
        .map(|(i, &mu)| {
            let mut row = Vec::with_capacity(sigma_axis.len());
            let mut failures = Vec::new();
            for (j, &sigma) in sigma_axis.iter().enumerate() {
                let cell = Density::gaussian_1d(mu, sigma * sigma)
                    .and_then(|q| divergence_quadrature(div, p, &q));
                match cell {
                    Ok(v) => row.push(v),
                    Err(e) => {
                        row.push(f64::NAN);
                        failures.push(GridFailure {
                            i,
                            j,
                            message: e.to_string(),
                        });
                    }
                }
            }
            (row, failures)
        })
        .collect();

    let mut values = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (row, mut fails) in rows {
        values.push(row);
        failures.append(&mut fails);
    }

    let mut argmin = (f64::NAN, f64::NAN, f64::INFINITY);
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v.is_finite() && v < argmin.2 {
                argmin = (mu_axis[i], sigma_axis[j], v);
            }
        }
    }

    Ok(GridSurface {
        divergence_name: div.name().to_string(),
        mu_axis,
        sigma_axis,
        values,
        argmin,
        failures,
    })
}

/// A surface joined with the (step, mu, sigma) path of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Overlay {
    pub surface: GridSurface,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub mu: f64,
    pub sigma: f64,
}

pub fn overlay_trajectory(surface: &GridSurface, trace: &TrainTrace) -> Overlay {
    Overlay {
        surface: surface.clone(),
        trajectory: trace
            .steps
            .iter()
            .map(|s| TrajectoryPoint {
                step: s.step,
                mu: s.mu,
                sigma: s.sigma,
            })
            .collect(),
    }
}
