use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::diagnostics::{Estimator, EssFloor};
use crate::error::{Error, Result};

use super::output::RawRow;

/// Quantile of ascending `sorted` data with linear interpolation between
/// order statistics (position `q (n - 1)`). NaN for empty input.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            if frac == 0.0 || sorted[lo] == sorted[hi] {
                sorted[lo]
            } else {
                sorted[lo] + frac * (sorted[hi] - sorted[lo])
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Infidelity,
    QuadraticLoss,
    TraceDistance,
    Ess,
    CondNumber,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Infidelity,
        Metric::QuadraticLoss,
        Metric::TraceDistance,
        Metric::Ess,
        Metric::CondNumber,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Infidelity => "infidelity",
            Metric::QuadraticLoss => "quadratic_loss",
            Metric::TraceDistance => "trace_distance",
            Metric::Ess => "ess",
            Metric::CondNumber => "cond_number",
        }
    }

    pub fn of(self, row: &RawRow) -> Option<f64> {
        match self {
            Metric::Infidelity => row.infidelity,
            Metric::QuadraticLoss => row.quadratic_loss,
            Metric::TraceDistance => row.trace_distance,
            Metric::Ess => row.ess,
            Metric::CondNumber => row.cond_number,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown metric '{s}'")))
    }
}

/// Summary of one metric across trials. Statistics are `None` when no
/// trial had a value.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub k: u64,
    pub shots: u64,
    pub estimator: Estimator,
    pub metric: Metric,
    pub n: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q16: Option<f64>,
    pub q84: Option<f64>,
}

/// Checks that every trial of each configuration reports the same
/// checkpoints and estimators.
fn check_alignment(rows: &[RawRow]) -> Result<()> {
    type Key = (u64, u64, Estimator);
    let mut per_trial: BTreeMap<(&str, usize), BTreeSet<Key>> = BTreeMap::new();
    for r in rows {
        let keys = per_trial.entry((r.config_hash.as_str(), r.trial)).or_default();
        if !keys.insert((r.shots, r.k, r.estimator)) {
            return Err(Error::Parse(format!(
                "duplicate row for trial {} at k = {} ({})",
                r.trial, r.k, r.estimator
            )));
        }
    }
    let mut reference: BTreeMap<&str, &BTreeSet<Key>> = BTreeMap::new();
    for ((hash, trial), keys) in &per_trial {
        match reference.get(hash) {
            None => {
                reference.insert(hash, keys);
            }
            Some(first) if *first != keys => {
                return Err(Error::Parse(format!(
                    "trial {trial} of {hash} has checkpoints misaligned with other trials"
                )));
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Mean, median and 16th/84th percentiles per checkpoint, estimator and
/// metric. Missing values are skipped; infinities are kept.
pub fn aggregate(rows: &[RawRow]) -> Result<Vec<AggregateRow>> {
    check_alignment(rows)?;
    let mut groups: BTreeMap<(u64, u64, Estimator), Vec<&RawRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.shots, r.k, r.estimator)).or_default().push(r);
    }
    let mut out = Vec::with_capacity(groups.len() * Metric::ALL.len());
    for ((shots, k, estimator), members) in groups {
        for metric in Metric::ALL {
            let mut vals: Vec<f64> = members
                .iter()
                .filter_map(|r| metric.of(r))
                .filter(|v| !v.is_nan())
                .collect();
            vals.sort_by(f64::total_cmp);
            let stat = |v: f64| (!vals.is_empty()).then_some(v);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            out.push(AggregateRow {
                k,
                shots,
                estimator,
                metric,
                n: vals.len(),
                mean: stat(mean),
                median: stat(quantile_sorted(&vals, 0.5)),
                q16: stat(quantile_sorted(&vals, 0.16)),
                q84: stat(quantile_sorted(&vals, 0.84)),
            });
        }
    }
    Ok(out)
}

/// One trial reduced to its ESS floor and one final-checkpoint value, the
/// input to postselection.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSummary {
    pub config_hash: String,
    pub trial: usize,
    pub ess_floor: Option<f64>,
    pub value: Option<f64>,
}

impl EssFloor for TrialSummary {
    fn ess_floor(&self) -> Option<f64> {
        self.ess_floor
    }
}

/// Final-checkpoint `metric` of `estimator` for every trial in a raw table.
/// The ESS column holds a running minimum, so its last value is the
/// trial's floor.
pub fn trial_summaries(rows: &[RawRow], estimator: Estimator, metric: Metric) -> Result<Vec<TrialSummary>> {
    check_alignment(rows)?;
    let mut last: BTreeMap<(&str, usize), &RawRow> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.estimator == estimator) {
        let slot = last.entry((r.config_hash.as_str(), r.trial)).or_insert(r);
        if r.k > slot.k {
            *slot = r;
        }
    }
    if last.is_empty() && !rows.is_empty() {
        return Err(Error::Parse(format!("no rows for estimator {estimator}")));
    }
    Ok(last
        .into_values()
        .map(|r| TrialSummary {
            config_hash: r.config_hash.clone(),
            trial: r.trial,
            ess_floor: r.ess,
            value: metric.of(r),
        })
        .collect())
}
