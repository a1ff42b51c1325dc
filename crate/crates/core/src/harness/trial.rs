use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{condition_number, Estimator, EssFloor, LossReport};
use crate::ensembles::{sample_hilbert_schmidt, sample_state};
use crate::error::{Error, Result};
use crate::estimators::{build_design, lsf_estimate, wlsf_estimate, ParticleCloud};
use crate::quantum::{DensityMatrix, HermitianBasis, MeasurementRecord};
use crate::quantum::ThetaVector;
use crate::sgqt::{Outcome, OutcomeSource, SgqtState, SimulatedOutcomes};

use super::config::RunConfig;

/// Independent random streams inside one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamRole {
    Truth = 0,
    Designer = 1,
    Outcomes = 2,
    Filter = 3,
}

/// Generator for one role of one trial. Streams never overlap, so adding
/// trials or roles does not perturb the others.
pub fn stream_rng(seed: u64, trial: usize, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * 4 + role as u64);
    rng
}

/// Shot sampling on its own stream, so that the designer's direction draws
/// and the binomial outcomes never share a generator.
struct StreamedOutcomes {
    inner: SimulatedOutcomes,
    rng: ChaCha8Rng,
}

impl OutcomeSource for StreamedOutcomes {
    fn measure<R: Rng + ?Sized>(&mut self, p: &ThetaVector, shots: u64, _rng: &mut R) -> Result<Outcome> {
        self.inner.measure(p, shots, &mut self.rng)
    }
}

/// Estimator losses at one checkpoint. `None` marks an estimator that could
/// not produce an estimate there.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub k: u64,
    pub shots: u64,
    pub losses: Vec<(Estimator, Option<LossReport>)>,
    /// Smallest ESS seen so far; `None` without a particle filter.
    pub ess: Option<f64>,
    pub cond_number: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub trial: usize,
    pub rows: Vec<CheckpointRow>,
    pub ess_floor_seen: Option<f64>,
    /// Set when the particle filter collapsed; the estimate is missing from
    /// that checkpoint on and the ESS floor is recorded as zero.
    pub filter_collapsed: bool,
}

impl TrialLog {
    /// Loss report of `estimator` at the last checkpoint.
    pub fn final_loss(&self, estimator: Estimator) -> Option<LossReport> {
        self.rows.last().and_then(|row| {
            row.losses
                .iter()
                .find(|(e, _)| *e == estimator)
                .and_then(|(_, l)| *l)
        })
    }
}

impl EssFloor for TrialLog {
    fn ess_floor(&self) -> Option<f64> {
        self.ess_floor_seen
    }
}

/// Hidden true state of a trial, drawn from its own stream.
pub fn trial_truth(config: &RunConfig, trial: usize) -> Result<DensityMatrix> {
    let mut rng = stream_rng(config.seed, trial, StreamRole::Truth);
    Ok(sample_state(&config.ensemble_spec(), &mut rng)?.state)
}

pub fn run_trial(config: &RunConfig, trial: usize) -> Result<TrialLog> {
    config.validate()?;
    let d = config.dimension;
    let basis = HermitianBasis::new(d)?;
    let mut design_rng = stream_rng(config.seed, trial, StreamRole::Designer);
    let mut filter_rng = stream_rng(config.seed, trial, StreamRole::Filter);

    let truth = trial_truth(config, trial)?;
    let mut source = StreamedOutcomes {
        inner: SimulatedOutcomes::new(&truth, &basis)?,
        rng: stream_rng(config.seed, trial, StreamRole::Outcomes),
    };
    let mut sgqt = SgqtState::new(
        d,
        config.design_mode()?,
        config.schedule(),
        config.shots,
        &mut design_rng,
    )?;

    let mut cloud = if config.uses(Estimator::Bme) {
        let prior_basis = basis.clone();
        Some(ParticleCloud::from_prior(
            basis.clone(),
            config.particles(),
            config.resample_a(),
            config.resample_threshold(),
            &mut filter_rng,
            |rng| prior_basis.to_theta(sample_hilbert_schmidt(d, rng)?.matrix()),
        )?)
    } else {
        None
    };

    let mut estimators = config.estimators.clone();
    estimators.sort();
    estimators.dedup();

    let mut records: Vec<MeasurementRecord> = Vec::with_capacity(2 * config.iterations as usize);
    let mut collapsed = false;
    let mut rows = Vec::new();
    let mut checkpoints = config.checkpoints().into_iter().peekable();

    for k in 1..=config.iterations {
        let pair = sgqt.step(&mut source, &mut design_rng)?;
        if let Some(c) = cloud.as_mut() {
            if !collapsed {
                for record in &pair {
                    match c.update(record, &mut filter_rng) {
                        Ok(_) => {}
                        Err(Error::FilterCollapse) => {
                            collapsed = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        records.extend(pair);

        if checkpoints.peek() != Some(&k) {
            continue;
        }
        checkpoints.next();
        let design = build_design(&records, d)?;
        let mut losses = Vec::with_capacity(estimators.len());
        for &est in &estimators {
            let estimate: Option<DensityMatrix> = match est {
                Estimator::Sgqt => Some(sgqt.estimate()),
                Estimator::Lsf => lsf_estimate(&design, &basis).ok(),
                Estimator::Wlsf => wlsf_estimate(&design, &basis, config.hedge_y).ok(),
                Estimator::Bme => match (&cloud, collapsed) {
                    (Some(c), false) => c.bme().ok(),
                    _ => None,
                },
            };
            let report = match estimate {
                Some(rho) => Some(LossReport::evaluate(est, k, config.shots, &truth, &rho, &basis)?),
                None => None,
            };
            losses.push((est, report));
        }
        rows.push(CheckpointRow {
            k,
            shots: config.shots,
            losses,
            ess: cloud.as_ref().map(|c| if collapsed { 0.0 } else { c.ess_floor_seen() }),
            cond_number: condition_number(&design.x).ok(),
        });
    }

    Ok(TrialLog {
        trial,
        ess_floor_seen: cloud.as_ref().map(|c| if collapsed { 0.0 } else { c.ess_floor_seen() }),
        filter_collapsed: collapsed,
        rows,
    })
}

/// Runs every trial of `config` on a pool of `workers` threads. The result
/// is ordered by trial index and independent of the worker count.
pub fn run_trials(config: &RunConfig, workers: usize) -> Result<Vec<TrialLog>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut logs = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect::<Result<Vec<_>>>()
    })?;
    logs.sort_by_key(|l| l.trial);
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleKind;

    fn small() -> RunConfig {
        let mut c = RunConfig::new(2, EnsembleKind::HilbertSchmidt, 20, 50, 2);
        c.particles = Some(200);
        c.checkpoint_stride = Some(5);
        c.seed = 11;
        c
    }

    #[test]
    fn trial_rows_follow_checkpoints() {
        let log = run_trial(&small(), 0).unwrap();
        assert_eq!(log.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![5, 10, 15, 20]);
        for row in &log.rows {
            assert_eq!(row.losses.len(), 4);
            assert!(row.ess.unwrap() <= 200.0 + 1e-9);
            let sgqt = row.losses[0].1.unwrap();
            assert!((0.0..=1.0).contains(&sgqt.infidelity));
        }
        // two tests per iteration: 10 rows at k = 5 make a full-rank design
        assert!(log.rows[0].cond_number.unwrap().is_finite());
        let floors: Vec<f64> = log.rows.iter().map(|r| r.ess.unwrap()).collect();
        assert!(floors.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(log.ess_floor_seen, Some(*floors.last().unwrap()));
    }

    #[test]
    fn early_checkpoints_mark_lsf_missing() {
        let mut c = small();
        c.checkpoint_stride = Some(1);
        c.iterations = 3;
        let log = run_trial(&c, 0).unwrap();
        let lsf = |row: &CheckpointRow| row.losses.iter().find(|(e, _)| *e == Estimator::Lsf).unwrap().1;
        assert!(lsf(&log.rows[0]).is_none());
        assert!(log.rows[0].cond_number.is_none());
        assert!(lsf(&log.rows[2]).is_some());
    }

    #[test]
    fn trials_are_reproducible_and_worker_independent() {
        let c = small();
        let one = run_trials(&c, 1).unwrap();
        let two = run_trials(&c, 2).unwrap();
        assert_eq!(one, two);
        assert_ne!(one[0].rows, one[1].rows);
    }

    #[test]
    fn no_filter_means_no_floor() {
        let mut c = small();
        c.estimators = vec![Estimator::Sgqt];
        let log = run_trial(&c, 0).unwrap();
        assert_eq!(log.ess_floor_seen, None);
        assert!(log.rows.iter().all(|r| r.ess.is_none()));
    }
}
