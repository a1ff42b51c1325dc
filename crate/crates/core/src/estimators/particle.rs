//! Sequential Monte Carlo approximation of the posterior over states, with
//! Liu-West resampling.
//!
//! Particles are stored column-wise: column `i` of `locations` is the
//! coordinate vector of particle `i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quantum::{
    project_to_physical, DensityMatrix, HermitianBasis, MeasurementRecord, ThetaVector, STATE_TOL,
};

/// Per-particle outcome probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// A record whose likelihood is below this for every particle (relative to
/// the best achievable likelihood for that record) collapses the filter.
pub const COLLAPSE_LIKELIHOOD: f64 = 1e-300;

/// Proposals per particle before the resampler falls back to projection.
pub const MAX_PROPOSALS: usize = 1000;

/// Qubit defaults: 4000 particles, `a = 0.98`.
pub const QUBIT_PARTICLES: usize = 4000;
pub const QUBIT_RESAMPLE_A: f64 = 0.98;
/// Qutrit and two-qubit defaults: 32000 particles, `a = 0.9`.
pub const LARGE_PARTICLES: usize = 32000;
pub const LARGE_RESAMPLE_A: f64 = 0.9;
/// Resample when ESS drops below this fraction of the particle count.
pub const DEFAULT_THRESHOLD_RATIO: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct ParticleCloud {
    basis: HermitianBasis,
    locations: DMatrix<f64>,
    weights: Vec<f64>,
    resample_a: f64,
    threshold_ratio: f64,
    ess_floor_seen: f64,
    resamples: usize,
    projection_fallbacks: usize,
}

fn check_params(n: usize, a: f64, r_th: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 particles, got {n}")));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!("resample parameter a = {a} outside [0, 1]")));
    }
    if !(r_th > 0.0 && r_th <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "resample threshold ratio {r_th} outside (0, 1]"
        )));
    }
    Ok(())
}

impl ParticleCloud {
    /// Draws `n` i.i.d. particles from `prior` with uniform weights.
    pub fn from_prior<R, F>(
        basis: HermitianBasis,
        n: usize,
        resample_a: f64,
        threshold_ratio: f64,
        rng: &mut R,
        mut prior: F,
    ) -> Result<Self>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Result<ThetaVector>,
    {
        check_params(n, resample_a, threshold_ratio)?;
        let mut locations = DMatrix::zeros(basis.len(), n);
        for i in 0..n {
            let theta = prior(rng)?;
            if theta.len() != basis.len() {
                return Err(Error::DimensionMismatch {
                    expected: basis.len(),
                    found: theta.len(),
                });
            }
            locations.set_column(i, &theta);
        }
        Self::assemble(basis, locations, vec![1.0 / n as f64; n], resample_a, threshold_ratio)
    }

    /// Builds a cloud from explicit particles and weights. Weights are
    /// normalized; every location must be physical.
    pub fn from_particles(
        basis: HermitianBasis,
        particles: &[ThetaVector],
        weights: &[f64],
        resample_a: f64,
        threshold_ratio: f64,
    ) -> Result<Self> {
        check_params(particles.len(), resample_a, threshold_ratio)?;
        if weights.len() != particles.len() {
            return Err(Error::DimensionMismatch {
                expected: particles.len(),
                found: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must be nonnegative with positive sum".into()));
        }
        let mut locations = DMatrix::zeros(basis.len(), particles.len());
        for (i, p) in particles.iter().enumerate() {
            if p.len() != basis.len() {
                return Err(Error::DimensionMismatch {
                    expected: basis.len(),
                    found: p.len(),
                });
            }
            locations.set_column(i, p);
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Self::assemble(basis, locations, weights, resample_a, threshold_ratio)
    }

    fn assemble(
        basis: HermitianBasis,
        locations: DMatrix<f64>,
        weights: Vec<f64>,
        resample_a: f64,
        threshold_ratio: f64,
    ) -> Result<Self> {
        for (i, col) in locations.column_iter().enumerate() {
            if !basis.is_physical(&col.into_owned(), STATE_TOL) {
                return Err(Error::NotPhysical(format!("particle {i} is not a state")));
            }
        }
        let mut cloud = Self {
            basis,
            locations,
            weights,
            resample_a,
            threshold_ratio,
            ess_floor_seen: f64::INFINITY,
            resamples: 0,
            projection_fallbacks: 0,
        };
        cloud.ess_floor_seen = cloud.ess();
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &DMatrix<f64> {
        &self.locations
    }

    pub fn particle(&self, i: usize) -> ThetaVector {
        self.locations.column(i).into_owned()
    }

    pub fn basis(&self) -> &HermitianBasis {
        &self.basis
    }

    pub fn resample_a(&self) -> f64 {
        self.resample_a
    }

    /// Smallest effective sample size seen so far, measured after each
    /// update and before any resampling it triggers.
    pub fn ess_floor_seen(&self) -> f64 {
        self.ess_floor_seen
    }

    pub fn resample_count(&self) -> usize {
        self.resamples
    }

    pub fn projection_fallbacks(&self) -> usize {
        self.projection_fallbacks
    }

    /// `1 / sum_i w_i^2`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Reweights by the binomial likelihood of `record` (without the
    /// binomial coefficient) and resamples when the ESS falls below the
    /// threshold. Returns whether a resample happened.
    pub fn update<R: Rng + ?Sized>(&mut self, record: &MeasurementRecord, rng: &mut R) -> Result<bool> {
        self.reweight(record)?;
        let ess = self.ess();
        self.ess_floor_seen = self.ess_floor_seen.min(ess);
        if ess < self.threshold_ratio * self.len() as f64 {
            self.liu_west_resample(rng)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Bayes update of the weights only.
    pub fn reweight(&mut self, record: &MeasurementRecord) -> Result<()> {
        if record.p.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                found: record.p.len(),
            });
        }
        if record.shots == 0 {
            return Ok(());
        }
        let hits = record.successes as f64;
        let misses = (record.shots - record.successes) as f64;
        let offset = 1.0 / self.basis.dim() as f64;
        let log_like = |prob: f64| {
            let prob = prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            hits * prob.ln() + misses * (1.0 - prob).ln()
        };

        let mut log_l = Vec::with_capacity(self.len());
        let mut best = f64::NEG_INFINITY;
        for (col, &w) in self.locations.column_iter().zip(&self.weights) {
            let ll = log_like(offset + record.p.dot(&col));
            if w > 0.0 && ll > best {
                best = ll;
            }
            log_l.push(ll);
        }
        let saturated = log_like(hits / record.shots as f64);
        if !best.is_finite() || best - saturated < COLLAPSE_LIKELIHOOD.ln() {
            return Err(Error::FilterCollapse);
        }

        let mut total = 0.0;
        for (w, ll) in self.weights.iter_mut().zip(&log_l) {
            *w *= (ll - best).exp();
            total += *w;
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::FilterCollapse);
        }
        for w in &mut self.weights {
            *w /= total;
        }
        Ok(())
    }

    /// Posterior mean `sum_i w_i theta_i`.
    pub fn mean(&self) -> ThetaVector {
        let mut mean = ThetaVector::zeros(self.basis.len());
        for (col, &w) in self.locations.column_iter().zip(&self.weights) {
            mean.axpy(w, &col, 1.0);
        }
        mean
    }

    /// `sum_i w_i (theta_i - mu)(theta_i - mu)^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let n = self.basis.len();
        let mut cov = DMatrix::zeros(n, n);
        for (col, &w) in self.locations.column_iter().zip(&self.weights) {
            let dev = col - &mean;
            cov.ger(w, &dev, &dev, 1.0);
        }
        (&cov + cov.transpose()) * 0.5
    }

    /// Bayesian mean estimate as a state.
    pub fn bme(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.basis.from_theta(&self.mean())?)
    }

    /// Liu-West resampling: systematic ancestor draws, shrinkage toward the
    /// posterior mean by `a` and Gaussian jitter with covariance
    /// `(1 - a^2) Sigma`. Unphysical proposals are redrawn, then projected.
    pub fn liu_west_resample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.len();
        let a = self.resample_a;
        let ancestors = systematic_indices(&self.weights, n, rng);
        let mut next = DMatrix::zeros(self.basis.len(), n);

        if a >= 1.0 {
            for (i, &anc) in ancestors.iter().enumerate() {
                next.set_column(i, &self.locations.column(anc));
            }
        } else {
            let mean = self.mean();
            let factor = jitter_factor(&self.covariance(), 1.0 - a * a)?;
            let dim = self.basis.len();
            for (i, &anc) in ancestors.iter().enumerate() {
                let center = self.locations.column(anc) * a + &mean * (1.0 - a);
                let mut accepted = None;
                let mut last = center.clone();
                for _ in 0..MAX_PROPOSALS {
                    let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let cand = &center + &factor * z;
                    if self.basis.is_physical(&cand, 0.0) {
                        accepted = Some(cand);
                        break;
                    }
                    last = cand;
                }
                let theta = match accepted {
                    Some(t) => t,
                    None => {
                        self.projection_fallbacks += 1;
                        let rho = project_to_physical(&self.basis.from_theta(&last)?)?;
                        self.basis.to_theta(&rho)?
                    }
                };
                next.set_column(i, &theta);
            }
        }
        self.locations = next;
        self.weights = vec![1.0 / n as f64; n];
        self.resamples += 1;
        Ok(())
    }
}

/// `L` with `L L^T = scale * cov`, built from the eigen-decomposition so that
/// semidefinite covariances are accepted.
fn jitter_factor(cov: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy("posterior covariance is not finite"));
    }
    let eig = cov.clone().symmetric_eigen();
    let largest = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let tol = 1e-10 * largest.max(1e-300);
    if eig.eigenvalues.iter().any(|&v| v < -tol.max(1e-14)) {
        return Err(Error::NumericalDegeneracy("posterior covariance is not positive semidefinite"));
    }
    let roots = eig.eigenvalues.map(|v| (v.max(0.0) * scale).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let step = 1.0 / n as f64;
    let start = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights.first().copied().unwrap_or(0.0);
    let mut j = 0;
    for i in 0..n {
        let u = start + i as f64 * step;
        while u > cumulative && j + 1 < weights.len() {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_hilbert_schmidt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit() -> HermitianBasis {
        HermitianBasis::new(2).unwrap()
    }

    fn hs_cloud(n: usize, a: f64, seed: u64) -> ParticleCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = qubit();
        let b2 = basis.clone();
        ParticleCloud::from_prior(basis, n, a, 0.5, &mut rng, |r| {
            b2.to_theta(sample_hilbert_schmidt(2, r)?.matrix())
        })
        .unwrap()
    }

    #[test]
    fn init_is_uniform() {
        let cloud = hs_cloud(100, 0.98, 1);
        assert!(cloud.weights().iter().all(|&w| (w - 0.01).abs() < 1e-15));
        assert!((cloud.ess() - 100.0).abs() < 1e-9);
        for i in 0..cloud.len() {
            assert!(cloud.basis().is_physical(&cloud.particle(i), 1e-10));
        }
    }

    #[test]
    fn init_validates_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prior = |_: &mut ChaCha8Rng| Ok(ThetaVector::zeros(3));
        assert!(ParticleCloud::from_prior(qubit(), 1, 0.9, 0.5, &mut rng, prior).is_err());
        assert!(ParticleCloud::from_prior(qubit(), 10, 1.1, 0.5, &mut rng, prior).is_err());
        assert!(ParticleCloud::from_prior(qubit(), 10, -0.1, 0.5, &mut rng, prior).is_err());
        assert!(ParticleCloud::from_prior(qubit(), 10, 0.9, 0.0, &mut rng, prior).is_err());
        let bad = |_: &mut ChaCha8Rng| Ok(ThetaVector::from_element(3, 1.0));
        assert!(ParticleCloud::from_prior(qubit(), 10, 0.9, 0.5, &mut rng, bad).is_err());
    }

    #[test]
    fn ess_examples() {
        let b = qubit();
        let z = ThetaVector::zeros(3);
        let four = vec![z.clone(), z.clone(), z.clone(), z.clone()];
        let c = ParticleCloud::from_particles(b.clone(), &four, &[0.5, 0.5, 0.0, 0.0], 0.9, 0.5).unwrap();
        assert!((c.ess() - 2.0).abs() < 1e-12);
        let c = ParticleCloud::from_particles(b, &four, &[1.0, 0.0, 0.0, 0.0], 0.9, 0.5).unwrap();
        assert!((c.ess() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_record_leaves_weights() {
        let mut cloud = hs_cloud(50, 0.9, 2);
        let before = cloud.weights().to_vec();
        let rec = MeasurementRecord::new(ThetaVector::from_vec(vec![0.0, 0.0, 0.5]), 0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(!cloud.update(&rec, &mut rng).unwrap());
        assert_eq!(before, cloud.weights());
    }

    #[test]
    fn single_bernoulli_ratio() {
        // p = e_3/sqrt(2) (projector onto |0>), particles at z = +-0.4/sqrt(2)*...
        // chosen so 1/2 + p.theta = 0.9 and 0.1.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = ThetaVector::from_vec(vec![0.0, 0.0, s]);
        let hi = ThetaVector::from_vec(vec![0.0, 0.0, 0.4 / s]);
        let lo = ThetaVector::from_vec(vec![0.0, 0.0, -0.4 / s]);
        let mut cloud =
            ParticleCloud::from_particles(qubit(), &[hi, lo], &[0.5, 0.5], 0.9, 0.01).unwrap();
        cloud.reweight(&MeasurementRecord::new(p, 1, 1).unwrap()).unwrap();
        let w = cloud.weights();
        assert!((w[0] / w[1] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn three_particle_bayes_rule_by_enumeration() {
        let basis = qubit();
        let particles = [
            ThetaVector::from_vec(vec![0.1, -0.2, 0.3]),
            ThetaVector::from_vec(vec![-0.3, 0.1, 0.0]),
            ThetaVector::from_vec(vec![0.0, 0.4, -0.5]),
        ];
        let prior = [0.2, 0.5, 0.3];
        let p = ThetaVector::from_vec(vec![0.3, 0.5, -0.2]);
        let (shots, hits) = (7u64, 4u64);
        let mut cloud =
            ParticleCloud::from_particles(basis, &particles, &prior, 0.9, 0.01).unwrap();
        cloud.reweight(&MeasurementRecord::new(p.clone(), shots, hits).unwrap()).unwrap();

        // enumerate the 2^7 outcome sequences with exactly 4 ones
        let mut joint = [0.0; 3];
        for (i, theta) in particles.iter().enumerate() {
            let q = 0.5 + p.dot(theta);
            let mut like = 0.0;
            for seq in 0u32..(1 << shots) {
                if seq.count_ones() as u64 == hits {
                    like += q.powi(hits as i32) * (1.0 - q).powi((shots - hits) as i32);
                }
            }
            joint[i] = prior[i] * like;
        }
        let z: f64 = joint.iter().sum();
        for i in 0..3 {
            assert!((cloud.weights()[i] - joint[i] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn contradictory_data_collapses() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = ThetaVector::from_vec(vec![0.0, 0.0, s]);
        let up = ThetaVector::from_vec(vec![0.0, 0.0, s]);
        let mut cloud =
            ParticleCloud::from_particles(qubit(), &[up.clone(), up], &[0.5, 0.5], 0.9, 0.5).unwrap();
        let rec = MeasurementRecord::new(p, 100, 0).unwrap();
        assert!(matches!(cloud.reweight(&rec), Err(Error::FilterCollapse)));
    }

    #[test]
    fn mean_and_covariance_examples() {
        let basis = qubit();
        let t = ThetaVector::from_vec(vec![0.1, 0.2, -0.3]);
        let same = ParticleCloud::from_particles(basis.clone(), &[t.clone(), t.clone()], &[0.3, 0.7], 0.9, 0.5).unwrap();
        assert!(same.covariance().amax() < 1e-15);
        assert!((same.bme().unwrap().matrix() - basis.from_theta(&t).unwrap()).camax() < 1e-15);

        let e1 = ThetaVector::from_vec(vec![0.5, 0.0, 0.0]);
        let pm = ParticleCloud::from_particles(basis.clone(), &[e1.clone(), -e1], &[0.5, 0.5], 0.9, 0.5).unwrap();
        assert!(pm.mean().amax() < 1e-15);
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 0)] = 0.25;
        assert!((pm.covariance() - expected).amax() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((pm.bme().unwrap().matrix() - mixed.matrix()).camax() < 1e-15);
    }

    #[test]
    fn statistics_match_brute_force() {
        let cloud = hs_cloud(10, 0.9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let particles: Vec<_> = (0..10).map(|i| cloud.particle(i)).collect();
        let c = ParticleCloud::from_particles(qubit(), &particles, &raw, 0.9, 0.5).unwrap();

        let mut mean = [0.0; 3];
        for (p, w) in particles.iter().zip(&raw) {
            for j in 0..3 {
                mean[j] += w / total * p[j];
            }
        }
        for j in 0..3 {
            assert!((c.mean()[j] - mean[j]).abs() < 1e-14);
        }
        // two-pass formula: E[x x^T] - mu mu^T
        let cov = c.covariance();
        for j in 0..3 {
            for k in 0..3 {
                let second: f64 = particles.iter().zip(&raw).map(|(p, w)| w / total * p[j] * p[k]).sum();
                assert!((cov[(j, k)] - (second - mean[j] * mean[k])).abs() < 1e-12);
            }
        }
        let eig = cov.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn resample_with_a_one_copies_ancestors() {
        let mut cloud = hs_cloud(200, 1.0, 5);
        let before: Vec<ThetaVector> = (0..cloud.len()).map(|i| cloud.particle(i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        cloud.liu_west_resample(&mut rng).unwrap();
        for i in 0..cloud.len() {
            let p = cloud.particle(i);
            assert!(before.iter().any(|b| *b == p));
        }
        assert!(cloud.weights().iter().all(|&w| w == 1.0 / 200.0));
    }

    #[test]
    fn systematic_indices_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let idx = systematic_indices(&[0.0, 1.0, 0.0], 5, &mut rng);
        assert_eq!(idx, vec![1; 5]);
        let idx = systematic_indices(&[0.5, 0.25, 0.25], 4, &mut rng);
        assert_eq!(idx, vec![0, 0, 1, 2]);
    }

    #[test]
    fn resampled_particles_stay_physical() {
        let mut cloud = hs_cloud(500, 0.5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        cloud.liu_west_resample(&mut rng).unwrap();
        for i in 0..cloud.len() {
            assert!(cloud.basis().is_physical(&cloud.particle(i), 1e-10));
        }
    }
}
