//! Loss metrics, design conditioning, the qubit pure-state distinguishability
//! bound, and postselection on the particle filter's effective sample size.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{fidelity, trace_distance, DensityMatrix, HermitianBasis, ThetaVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Sgqt,
    Lsf,
    Wlsf,
    Bme,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Sgqt, Estimator::Lsf, Estimator::Wlsf, Estimator::Bme];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Sgqt => "sgqt",
            Estimator::Lsf => "lsf",
            Estimator::Wlsf => "wlsf",
            Estimator::Bme => "bme",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown estimator '{s}'")))
    }
}

/// Losses of one estimate against the hidden truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub estimator: Estimator,
    pub iteration: u64,
    pub shots: u64,
    pub infidelity: f64,
    pub quadratic_loss: f64,
    pub trace_distance: f64,
}

impl LossReport {
    pub fn evaluate(
        estimator: Estimator,
        iteration: u64,
        shots: u64,
        truth: &DensityMatrix,
        estimate: &DensityMatrix,
        basis: &HermitianBasis,
    ) -> Result<Self> {
        let infidelity = 1.0 - fidelity(truth, estimate)?;
        let quadratic_loss = quadratic_loss(&basis.to_theta(truth)?, &basis.to_theta(estimate)?)?;
        Ok(Self {
            estimator,
            iteration,
            shots,
            infidelity,
            quadratic_loss,
            trace_distance: trace_distance(truth, estimate)?,
        })
    }
}

/// `(theta - theta_hat)^T (theta - theta_hat)`.
pub fn quadratic_loss(theta: &ThetaVector, theta_hat: &ThetaVector) -> Result<f64> {
    if theta.len() != theta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: theta_hat.len(),
        });
    }
    Ok((theta - theta_hat).norm_squared())
}

/// Ratio of the largest to the smallest of the `ncols` singular values;
/// infinite when the smallest is below `1e-14` of the largest.
pub fn condition_number(x: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() < x.ncols() || x.ncols() == 0 {
        return Err(Error::NotInformationallyComplete {
            rank: x.nrows(),
            required: x.ncols(),
        });
    }
    let sv = x.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min < 1e-14 * max {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// Smallest trace distance from a qubit state to any pure state.
///
/// The minimizer is the pure state along the Bloch direction of `rho`
/// (any direction for the maximally mixed state); the distance is then
/// `(1 - r)/2` for Bloch radius `r`.
pub fn closest_pure_distance(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::UnsupportedDimension(rho.dim()));
    }
    let basis = HermitianBasis::new(2)?;
    let theta = basis.to_theta(rho)?;
    let norm = theta.norm();
    let direction = if norm > 1e-15 {
        theta / norm
    } else {
        ThetaVector::from_vec(vec![0.0, 0.0, 1.0])
    };
    // a pure qubit state has |theta| = 1/sqrt(2)
    let pure = basis.from_theta(&(direction * std::f64::consts::FRAC_1_SQRT_2))?;
    trace_distance(rho, &pure)
}

/// Anything carrying the minimum effective sample size seen during a run.
pub trait EssFloor {
    fn ess_floor(&self) -> Option<f64>;
}

#[derive(Debug)]
pub struct Postselection<'a, T> {
    pub accepted: Vec<&'a T>,
    pub acceptance_probability: f64,
}

/// Keeps trials whose ESS never dropped below `threshold`. Trials without a
/// particle filter count as having an ESS floor of zero.
pub fn postselect<T: EssFloor>(trials: &[T], threshold: f64) -> Postselection<'_, T> {
    let accepted: Vec<&T> = trials
        .iter()
        .filter(|t| t.ess_floor().unwrap_or(0.0) >= threshold)
        .collect();
    let acceptance_probability = if trials.is_empty() {
        0.0
    } else {
        accepted.len() as f64 / trials.len() as f64
    };
    Postselection {
        accepted,
        acceptance_probability,
    }
}

/// One threshold of a postselection sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub accepted: usize,
    pub acceptance_probability: f64,
    /// Mean of `value` over accepted trials; NaN when none are accepted.
    pub mean: f64,
    pub median: f64,
}

pub fn postselection_sweep<T, F>(trials: &[T], thresholds: &[f64], value: F) -> Vec<SweepPoint>
where
    T: EssFloor,
    F: Fn(&T) -> Option<f64>,
{
    thresholds
        .iter()
        .map(|&threshold| {
            let sel = postselect(trials, threshold);
            let mut vals: Vec<f64> = sel.accepted.iter().filter_map(|t| value(t)).collect();
            let mean = if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            vals.sort_by(f64::total_cmp);
            SweepPoint {
                threshold,
                accepted: sel.accepted.len(),
                acceptance_probability: sel.acceptance_probability,
                mean,
                median: crate::harness::aggregate::quantile_sorted(&vals, 0.5),
            }
        })
        .collect()
}
