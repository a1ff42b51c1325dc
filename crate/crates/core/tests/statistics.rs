//! Monte Carlo checks against known distributions and moments.

use paqt_core::diagnostics::quadratic_loss;
use paqt_core::ensembles::{sample_haar_pure, sample_hilbert_schmidt};
use paqt_core::estimators::ParticleCloud;
use paqt_core::harness::quantile_sorted;
use paqt_core::quantum::{fidelity, HermitianBasis, ThetaVector};
use paqt_core::sgqt::{DesignMode, ExactOutcomes, SgqtState, SimulatedOutcomes, SpsaSchedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hilbert_schmidt_qubit_purity_averages_four_fifths() {
    // E[Tr rho^2] = 2d / (d^2 + 1) for the induced measure with k = d.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|_| sample_hilbert_schmidt(2, &mut rng).unwrap().purity())
        .sum::<f64>()
        / n as f64;
    assert!((mean - 0.8).abs() < 0.005, "mean purity {mean}");
}

#[test]
fn haar_overlap_follows_beta_law() {
    // |<0|psi>|^2 ~ Beta(1, d - 1), CDF 1 - (1 - x)^(d - 1).
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [2usize, 3, 5] {
        let n = 20_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sample_haar_pure(d, &mut rng).unwrap().amplitudes()[0].norm_sqr())
            .collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (1.0 - x).powi(d as i32 - 1);
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (cdf - lo).abs().max((hi - cdf).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(ks < 1.63 / (n as f64).sqrt(), "d = {d}: KS statistic {ks}");
    }
}

#[test]
fn liu_west_preserves_mean_and_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let basis = HermitianBasis::new(2).unwrap();
    let n = 20_000;
    // interior cloud, so proposals are never rejected
    let particles: Vec<ThetaVector> = (0..n)
        .map(|_| {
            let t = basis.to_theta(&sample_hilbert_schmidt(2, &mut rng).unwrap()).unwrap();
            t * 0.5
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut cloud = ParticleCloud::from_particles(basis, &particles, &weights, 0.9, 0.5).unwrap();
    let mean = cloud.mean();
    let cov = cloud.covariance();
    cloud.liu_west_resample(&mut rng).unwrap();
    let scale = cov.diagonal().max().sqrt();
    assert!((cloud.mean() - &mean).amax() < 0.03 * scale, "mean moved");
    let rel = (cloud.covariance() - &cov).amax() / cov.diagonal().max();
    assert!(rel < 0.05, "covariance changed by {rel}");
    assert_eq!(cloud.projection_fallbacks(), 0);
}

#[test]
fn noiseless_sgqt_median_infidelity_decreases() {
    let basis = HermitianBasis::new(2).unwrap();
    let checkpoints = [10u64, 100, 1000];
    let mut per_checkpoint = vec![Vec::new(); checkpoints.len()];
    for trial in 0..21 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
        let truth = paqt_core::DensityMatrix::from_pure(&sample_haar_pure(2, &mut rng).unwrap());
        let mut oracle = ExactOutcomes::new(&truth, &basis).unwrap();
        let mut sgqt = SgqtState::new(2, DesignMode::Full, SpsaSchedule::STANDARD, 100, &mut rng).unwrap();
        for k in 1..=1000u64 {
            sgqt.step(&mut oracle, &mut rng).unwrap();
            if let Some(i) = checkpoints.iter().position(|&c| c == k) {
                per_checkpoint[i].push(1.0 - fidelity(&truth, &sgqt.estimate()).unwrap());
            }
        }
    }
    let medians: Vec<f64> = per_checkpoint
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 0.5)
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

#[test]
fn bayes_mean_improves_on_the_prior() {
    let basis = HermitianBasis::new(2).unwrap();
    let mut prior_losses = Vec::new();
    let mut posterior_losses = Vec::new();
    for trial in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + trial);
        let truth = sample_hilbert_schmidt(2, &mut rng).unwrap();
        let theta = basis.to_theta(&truth).unwrap();
        let prior_basis = basis.clone();
        let mut cloud = ParticleCloud::from_prior(basis.clone(), 1000, 0.98, 0.5, &mut rng, |r| {
            prior_basis.to_theta(sample_hilbert_schmidt(2, r)?.matrix())
        })
        .unwrap();
        prior_losses.push(quadratic_loss(&theta, &cloud.mean()).unwrap());
        let mut source = SimulatedOutcomes::new(&truth, &basis).unwrap();
        let mut sgqt = SgqtState::new(2, DesignMode::Full, SpsaSchedule::STANDARD, 100, &mut rng).unwrap();
        for _ in 0..200 {
            for record in sgqt.step(&mut source, &mut rng).unwrap() {
                cloud.update(&record, &mut rng).unwrap();
            }
        }
        posterior_losses.push(quadratic_loss(&theta, &cloud.mean()).unwrap());
    }
    for v in [&mut prior_losses, &mut posterior_losses] {
        v.sort_by(f64::total_cmp);
    }
    let prior = quantile_sorted(&prior_losses, 0.5);
    let posterior = quantile_sorted(&posterior_losses, 0.5);
    assert!(posterior < 0.1 * prior, "prior {prior}, posterior {posterior}");
}
