//! Fuzzy C-Means refinement.
//!
//! Memberships follow the standard inverse-distance rule with exponent
//! `2/(m-1)`; centroids are the `u^m`-weighted means of the positions. The
//! two updates alternate until no centroid moves by `tolerance` or more.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcmError {
    #[error("no positions to cluster")]
    EmptyInput,
    #[error("at least one centroid is required")]
    NoCentroids,
    #[error("invalid FCM config field {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

/// Row-major `n x k` matrix of membership degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl MembershipMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == cols),
            "ragged membership rows"
        );
        Self {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        }
    }

    /// Crisp 0/1 memberships from a label per point.
    pub fn crisp(labels: &[usize], clusters: usize) -> Self {
        let mut values = vec![0.0; labels.len() * clusters];
        for (i, &j) in labels.iter().enumerate() {
            values[i * clusters + j] = 1.0;
        }
        Self {
            rows: labels.len(),
            cols: clusters,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn clusters(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Index of the largest membership in row `i`; ties go to the lower index.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0;
        for (j, &u) in row.iter().enumerate().skip(1) {
            if u > row[best] {
                best = j;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcmConfig {
    pub fuzzifier: f64,
    /// Stop once the largest centroid displacement is below this (m).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            fuzzifier: 2.0,
            tolerance: 1e-4,
            max_iterations: 100,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<(), FcmError> {
        if !(self.fuzzifier > 1.0 && self.fuzzifier.is_finite()) {
            return Err(FcmError::InvalidConfig {
                field: "fuzzifier",
                reason: format!("must be > 1, got {}", self.fuzzifier),
            });
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(FcmError::InvalidConfig {
                field: "tolerance",
                reason: format!("must be > 0, got {}", self.tolerance),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    pub centroids: Vec<Point>,
    pub memberships: MembershipMatrix,
    /// Objective after each centroid update.
    pub objective_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

/// Membership degrees of every position in every cluster.
///
/// A position sitting exactly on one or more centroids splits its membership
/// evenly among those centroids.
pub fn update_memberships(positions: &[Point], centroids: &[Point], m: f64) -> MembershipMatrix {
    let k = centroids.len();
    assert!(k >= 1, "at least one centroid is required");
    // u_ij ∝ (d_ij²)^(-1/(m-1))
    let power = -1.0 / (m - 1.0);
    let mut values = Vec::with_capacity(positions.len() * k);
    let mut weights = vec![0.0; k];
    for &x in positions {
        let mut coincident = 0usize;
        for (w, &c) in weights.iter_mut().zip(centroids) {
            let d2 = x.distance_sq(c);
            *w = d2;
            if d2 == 0.0 {
                coincident += 1;
            }
        }
        if coincident > 0 {
            let share = 1.0 / coincident as f64;
            values.extend(
                weights
                    .iter()
                    .map(|&d2| if d2 == 0.0 { share } else { 0.0 }),
            );
            continue;
        }
        // Scale by the nearest distance so the weights stay near 1.
        let nearest = weights.iter().copied().fold(f64::INFINITY, f64::min);
        for w in weights.iter_mut() {
            let ratio = *w / nearest;
            *w = if m == 2.0 {
                1.0 / ratio
            } else {
                ratio.powf(power)
            };
        }
        let total: f64 = weights.iter().sum();
        values.extend(weights.iter().map(|w| w / total));
    }
    MembershipMatrix {
        rows: positions.len(),
        cols: k,
        values,
    }
}

fn weight(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

/// `u^m`-weighted mean of the positions for every cluster. A cluster whose
/// weights are all zero keeps its entry from `previous`.
pub fn update_centroids(
    positions: &[Point],
    memberships: &MembershipMatrix,
    m: f64,
    previous: &[Point],
) -> Vec<Point> {
    let k = memberships.clusters();
    assert_eq!(memberships.rows(), positions.len());
    assert_eq!(previous.len(), k);
    let mut sums = vec![Point::ORIGIN; k];
    let mut mass = vec![0.0; k];
    for (i, &x) in positions.iter().enumerate() {
        for (j, &u) in memberships.row(i).iter().enumerate() {
            let w = weight(u, m);
            sums[j] = sums[j] + x * w;
            mass[j] += w;
        }
    }
    sums.into_iter()
        .zip(mass)
        .zip(previous)
        .map(|((s, w), &prev)| if w > 0.0 { s * (1.0 / w) } else { prev })
        .collect()
}

/// Σᵢ Σⱼ u_ij^m ‖xᵢ − cⱼ‖².
pub fn fcm_objective(
    positions: &[Point],
    centroids: &[Point],
    memberships: &MembershipMatrix,
    m: f64,
) -> f64 {
    positions
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            memberships
                .row(i)
                .iter()
                .zip(centroids)
                .map(|(&u, &c)| weight(u, m) * x.distance_sq(c))
                .sum::<f64>()
        })
        .sum()
}

pub fn run_fcm(
    positions: &[Point],
    init_centroids: &[Point],
    config: &FcmConfig,
) -> Result<FcmResult, FcmError> {
    if positions.is_empty() {
        return Err(FcmError::EmptyInput);
    }
    if init_centroids.is_empty() {
        return Err(FcmError::NoCentroids);
    }
    config.validate()?;
    let m = config.fuzzifier;

    let mut centroids = init_centroids.to_vec();
    let mut memberships = update_memberships(positions, &centroids, m);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let next = update_centroids(positions, &memberships, m, &centroids);
        history.push(fcm_objective(positions, &next, &memberships, m));
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| a.distance(*b))
            .fold(0.0, f64::max);
        centroids = next;
        memberships = update_memberships(positions, &centroids, m);
        iterations += 1;
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(FcmResult {
        centroids,
        memberships,
        objective_history: history,
        iterations_run: iterations,
        converged,
    })
}
