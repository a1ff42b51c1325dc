//! Self-guided measurement design driven by SPSA.
//!
//! Each iteration perturbs the current pure-state iterate along a random
//! `+-1` direction, measures the two perturbed projectors, estimates the
//! gradient of the overlap with the hidden state from the two frequencies
//! and takes an ascent step. The iterate is also the next measurement
//! setting, so every step yields two [`MeasurementRecord`]s that downstream
//! estimators consume.
//!
//! A complex amplitude vector of length `d` is perturbed through its real
//! parameterization of length `2d`: entries `0..d` are the real parts and
//! entries `d..2d` the imaginary parts.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::sample_haar_pure;
use crate::error::{Error, Result};
use crate::quantum::{
    born_probability, sample_shots, CVector, DensityMatrix, HermitianBasis, MeasurementRecord,
    PureState, ThetaVector,
};

/// Redraws of the perturbation direction before a step gives up.
pub const MAX_DIRECTION_REDRAWS: usize = 10;

/// Gain sequences `eps_k = eps_scale / k^eps_exponent` and
/// `alpha_k = alpha_scale / k^alpha_exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaSchedule {
    pub eps_scale: f64,
    pub eps_exponent: f64,
    pub alpha_scale: f64,
    pub alpha_exponent: f64,
}

impl SpsaSchedule {
    /// `eps_k = 0.1 / k^0.101`, `alpha_k = 10 / k^0.602`.
    pub const STANDARD: SpsaSchedule = SpsaSchedule {
        eps_scale: 0.1,
        eps_exponent: 0.101,
        alpha_scale: 10.0,
        alpha_exponent: 0.602,
    };

    /// Product-measurement gain: `alpha_k = 31 / k^0.602`.
    pub const PRODUCT: SpsaSchedule = SpsaSchedule {
        alpha_scale: 31.0,
        ..Self::STANDARD
    };

    /// `eps_k = 1 / k^(1/3)`, `alpha_k = 1 / k`, for which convergence is proven.
    pub const GUARANTEED: SpsaSchedule = SpsaSchedule {
        eps_scale: 1.0,
        eps_exponent: 1.0 / 3.0,
        alpha_scale: 1.0,
        alpha_exponent: 1.0,
    };

    pub fn epsilon(&self, k: u64) -> f64 {
        self.eps_scale / (k.max(1) as f64).powf(self.eps_exponent)
    }

    pub fn alpha(&self, k: u64) -> f64 {
        self.alpha_scale / (k.max(1) as f64).powf(self.alpha_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps_scale", self.eps_scale),
            ("eps_exponent", self.eps_exponent),
            ("alpha_scale", self.alpha_scale),
            ("alpha_exponent", self.alpha_exponent),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("schedule {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for SpsaSchedule {
    fn default() -> Self {
        Self::STANDARD
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    Full,
    /// Measurements restricted to `|a><a| (x) |b><b|` on `C^da (x) C^db`.
    Product { da: usize, db: usize },
}

/// Result of measuring one test: the success count that is recorded and the
/// frequency that drives the gradient estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub successes: u64,
    pub frequency: f64,
}

/// Anything that can answer "how many `1`s in `shots` runs of the test with
/// coordinates `p`".
pub trait OutcomeSource {
    fn measure<R: Rng + ?Sized>(
        &mut self,
        p: &ThetaVector,
        shots: u64,
        rng: &mut R,
    ) -> Result<Outcome>;
}

/// Binomial sampling against a hidden true state.
#[derive(Clone, Debug)]
pub struct SimulatedOutcomes {
    theta: ThetaVector,
    dim: usize,
}

impl SimulatedOutcomes {
    pub fn new(truth: &DensityMatrix, basis: &HermitianBasis) -> Result<Self> {
        Ok(Self {
            theta: basis.to_theta(truth)?,
            dim: basis.dim(),
        })
    }
}

impl OutcomeSource for SimulatedOutcomes {
    fn measure<R: Rng + ?Sized>(
        &mut self,
        p: &ThetaVector,
        shots: u64,
        rng: &mut R,
    ) -> Result<Outcome> {
        let prob = born_probability(&self.theta, p, self.dim)?;
        let successes = sample_shots(prob, shots, rng)?;
        let frequency = if shots == 0 {
            prob
        } else {
            successes as f64 / shots as f64
        };
        Ok(Outcome {
            successes,
            frequency,
        })
    }
}

/// Reports exact Born probabilities as frequencies. Useful for studying the
/// optimizer without shot noise.
#[derive(Clone, Debug)]
pub struct ExactOutcomes(SimulatedOutcomes);

impl ExactOutcomes {
    pub fn new(truth: &DensityMatrix, basis: &HermitianBasis) -> Result<Self> {
        SimulatedOutcomes::new(truth, basis).map(Self)
    }
}

impl OutcomeSource for ExactOutcomes {
    fn measure<R: Rng + ?Sized>(
        &mut self,
        p: &ThetaVector,
        shots: u64,
        _rng: &mut R,
    ) -> Result<Outcome> {
        let prob = born_probability(&self.0.theta, p, self.0.dim)?;
        Ok(Outcome {
            successes: (prob * shots as f64).round() as u64,
            frequency: prob,
        })
    }
}

/// Vector of independent fair `+-1` entries.
pub fn random_direction<R: Rng + ?Sized>(dim_real: usize, rng: &mut R) -> ThetaVector {
    ThetaVector::from_fn(dim_real, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

fn as_complex(real: &[f64]) -> CVector {
    let d = real.len() / 2;
    CVector::from_fn(d, |i, _| Complex64::new(real[i], real[d + i]))
}

/// `normalize(phi + eps*delta)` and `normalize(phi - eps*delta)`.
pub fn perturbed_states(
    phi: &PureState,
    delta: &ThetaVector,
    eps: f64,
) -> Result<(PureState, PureState)> {
    if delta.len() != 2 * phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: 2 * phi.dim(),
            found: delta.len(),
        });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation size {eps}")));
    }
    let step = as_complex(delta.as_slice()) * Complex64::from(eps);
    let plus = PureState::new(phi.amplitudes() + &step)?;
    let minus = PureState::new(phi.amplitudes() - &step)?;
    Ok((plus, minus))
}

/// Basis coordinates of the projectors onto the two perturbed states.
pub fn perturbed_projectors(
    phi: &PureState,
    delta: &ThetaVector,
    eps: f64,
    basis: &HermitianBasis,
) -> Result<(ThetaVector, ThetaVector)> {
    let (plus, minus) = perturbed_states(phi, delta, eps)?;
    Ok((basis.pure_coordinates(&plus)?, basis.pure_coordinates(&minus)?))
}

/// `(f_plus - f_minus) / (2 eps) * delta`.
pub fn gradient_estimate(
    f_plus: f64,
    f_minus: f64,
    eps: f64,
    delta: &ThetaVector,
) -> Result<ThetaVector> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gradient step eps must be positive, got {eps}"
        )));
    }
    Ok(delta * ((f_plus - f_minus) / (2.0 * eps)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Iterate {
    Full(PureState),
    Product(PureState, PureState),
}

impl Iterate {
    pub fn state(&self) -> PureState {
        match self {
            Iterate::Full(phi) => phi.clone(),
            Iterate::Product(a, b) => a.kron(b),
        }
    }
}

/// Single-owner SPSA state machine.
#[derive(Clone, Debug)]
pub struct SgqtState {
    iterate: Iterate,
    completed: u64,
    schedule: SpsaSchedule,
    shots: u64,
    basis: HermitianBasis,
}

impl SgqtState {
    /// Starts from a Haar-random iterate (per factor in product mode).
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        mode: DesignMode,
        schedule: SpsaSchedule,
        shots: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let iterate = match mode {
            DesignMode::Full => Iterate::Full(sample_haar_pure(dim, rng)?),
            DesignMode::Product { da, db } => {
                if da * db != dim {
                    return Err(Error::Config(format!(
                        "product factors {da}x{db} do not match dimension {dim}"
                    )));
                }
                Iterate::Product(sample_haar_pure(da, rng)?, sample_haar_pure(db, rng)?)
            }
        };
        Self::with_iterate(iterate, schedule, shots)
    }

    pub fn with_iterate(iterate: Iterate, schedule: SpsaSchedule, shots: u64) -> Result<Self> {
        schedule.validate()?;
        if shots == 0 {
            return Err(Error::Config("shots per measurement must be positive".into()));
        }
        let dim = match &iterate {
            Iterate::Full(phi) => phi.dim(),
            Iterate::Product(a, b) => a.dim() * b.dim(),
        };
        Ok(Self {
            iterate,
            completed: 0,
            schedule,
            shots,
            basis: HermitianBasis::new(dim)?,
        })
    }

    pub fn iterate(&self) -> &Iterate {
        &self.iterate
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> u64 {
        self.completed
    }

    pub fn schedule(&self) -> &SpsaSchedule {
        &self.schedule
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn basis(&self) -> &HermitianBasis {
        &self.basis
    }

    /// Current iterate as a density matrix; this is the SGQT estimate.
    pub fn estimate(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.iterate.state())
    }

    /// Runs one iteration in whichever mode the iterate is in.
    pub fn step<S: OutcomeSource, R: Rng + ?Sized>(
        &mut self,
        source: &mut S,
        rng: &mut R,
    ) -> Result<[MeasurementRecord; 2]> {
        match self.iterate {
            Iterate::Full(_) => self.spsa_step(source, rng),
            Iterate::Product(..) => self.product_spsa_step(source, rng),
        }
    }

    pub fn spsa_step<S: OutcomeSource, R: Rng + ?Sized>(
        &mut self,
        source: &mut S,
        rng: &mut R,
    ) -> Result<[MeasurementRecord; 2]> {
        let Iterate::Full(phi) = &self.iterate else {
            return Err(Error::InvalidParameter("spsa_step needs a full-mode iterate".into()));
        };
        let k = self.completed + 1;
        let eps = self.schedule.epsilon(k);
        let alpha = self.schedule.alpha(k);

        let mut drawn = None;
        for _ in 0..MAX_DIRECTION_REDRAWS {
            let delta = random_direction(2 * phi.dim(), rng);
            match perturbed_states(phi, &delta, eps) {
                Ok(pair) => {
                    drawn = Some((delta, pair));
                    break;
                }
                Err(Error::DegeneratePerturbation) => continue,
                Err(e) => return Err(e),
            }
        }
        let (delta, (plus, minus)) = drawn.ok_or(Error::DegeneratePerturbation)?;

        let p_plus = self.basis.pure_coordinates(&plus)?;
        let p_minus = self.basis.pure_coordinates(&minus)?;
        let (records, grad) = self.measure_pair(p_plus, p_minus, eps, &delta, source, rng)?;

        let increment = as_complex((grad * alpha).as_slice());
        self.iterate = Iterate::Full(PureState::new(phi.amplitudes() + increment)?);
        self.completed = k;
        Ok(records)
    }

    /// One iteration restricted to product measurements. A single direction
    /// spans both factors' real parameterizations; each factor is updated
    /// with its own slice of the step and renormalized.
    pub fn product_spsa_step<S: OutcomeSource, R: Rng + ?Sized>(
        &mut self,
        source: &mut S,
        rng: &mut R,
    ) -> Result<[MeasurementRecord; 2]> {
        let Iterate::Product(a, b) = &self.iterate else {
            return Err(Error::InvalidParameter(
                "product_spsa_step needs a product-mode iterate".into(),
            ));
        };
        let k = self.completed + 1;
        let eps = self.schedule.epsilon(k);
        let alpha = self.schedule.alpha(k);
        let split = 2 * a.dim();
        let total = split + 2 * b.dim();

        let mut drawn = None;
        for _ in 0..MAX_DIRECTION_REDRAWS {
            let delta = random_direction(total, rng);
            let da = ThetaVector::from_column_slice(&delta.as_slice()[..split]);
            let db = ThetaVector::from_column_slice(&delta.as_slice()[split..]);
            match (perturbed_states(a, &da, eps), perturbed_states(b, &db, eps)) {
                (Ok(pa), Ok(pb)) => {
                    drawn = Some((delta, pa, pb));
                    break;
                }
                (Err(Error::DegeneratePerturbation), _) | (_, Err(Error::DegeneratePerturbation)) => {
                    continue
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        let (delta, (a_plus, a_minus), (b_plus, b_minus)) =
            drawn.ok_or(Error::DegeneratePerturbation)?;

        let p_plus = self.basis.pure_coordinates(&a_plus.kron(&b_plus))?;
        let p_minus = self.basis.pure_coordinates(&a_minus.kron(&b_minus))?;
        let (records, grad) = self.measure_pair(p_plus, p_minus, eps, &delta, source, rng)?;

        let step = grad * alpha;
        let new_a = PureState::new(a.amplitudes() + as_complex(&step.as_slice()[..split]))?;
        let new_b = PureState::new(b.amplitudes() + as_complex(&step.as_slice()[split..]))?;
        self.iterate = Iterate::Product(new_a, new_b);
        self.completed = k;
        Ok(records)
    }

    fn measure_pair<S: OutcomeSource, R: Rng + ?Sized>(
        &self,
        p_plus: ThetaVector,
        p_minus: ThetaVector,
        eps: f64,
        delta: &ThetaVector,
        source: &mut S,
        rng: &mut R,
    ) -> Result<([MeasurementRecord; 2], ThetaVector)> {
        let plus = source.measure(&p_plus, self.shots, rng)?;
        let minus = source.measure(&p_minus, self.shots, rng)?;
        let grad = gradient_estimate(plus.frequency, minus.frequency, eps, delta)?;
        let records = [
            MeasurementRecord::new(p_plus, self.shots, plus.successes)?,
            MeasurementRecord::new(p_minus, self.shots, minus.successes)?,
        ];
        Ok((records, grad))
    }
}
