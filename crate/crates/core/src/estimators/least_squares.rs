//! Linear-inversion estimators over the design system `Y = X theta`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantum::{project_to_physical, DensityMatrix, HermitianBasis, MeasurementRecord, ThetaVector};

/// Hedging offset added to success counts before computing variance weights.
pub const HEDGE_BETA: f64 = 0.5;

/// Rows `p_k`, targets `Y_k = n_k/N_k - 1/d`, and the raw counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSystem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub shots: Vec<u64>,
    pub successes: Vec<u64>,
    dim: usize,
}

impl DesignSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub fn build_design(records: &[MeasurementRecord], d: usize) -> Result<DesignSystem> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidParameter("no measurement records".into()))?;
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let cols = first.p.len();
    if cols != d * d - 1 {
        return Err(Error::DimensionMismatch {
            expected: d * d - 1,
            found: cols,
        });
    }
    let mut x = DMatrix::zeros(records.len(), cols);
    let mut y = DVector::zeros(records.len());
    let mut shots = Vec::with_capacity(records.len());
    let mut successes = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        if r.p.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: r.p.len(),
            });
        }
        let f = r.frequency().ok_or_else(|| {
            Error::InvalidParameter(format!("record {k} has no shots"))
        })?;
        x.row_mut(k).tr_copy_from(&r.p);
        y[k] = f - 1.0 / d as f64;
        shots.push(r.shots);
        successes.push(r.successes);
    }
    Ok(DesignSystem {
        x,
        y,
        shots,
        successes,
        dim: d,
    })
}

/// Minimum-norm least-squares solution through an SVD, rejecting
/// rank-deficient designs.
fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ThetaVector> {
    let cols = x.ncols();
    if x.nrows() < cols {
        return Err(Error::NotInformationallyComplete {
            rank: x.nrows(),
            required: cols,
        });
    }
    let svd = x.clone().svd(true, true);
    let max = svd.singular_values.max();
    let tol = f64::EPSILON * x.nrows().max(cols) as f64 * max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < cols || !(max > 0.0) {
        return Err(Error::NotInformationallyComplete {
            rank,
            required: cols,
        });
    }
    svd.solve(y, tol)
        .map_err(|_| Error::NumericalDegeneracy("least-squares solve failed"))
}

/// Unconstrained least-squares coordinates, before projection.
pub fn lsf_theta(sys: &DesignSystem) -> Result<ThetaVector> {
    solve_least_squares(&sys.x, &sys.y)
}

pub fn lsf_estimate(sys: &DesignSystem, basis: &HermitianBasis) -> Result<DensityMatrix> {
    let theta = lsf_theta(sys)?;
    project_to_physical(&basis.from_theta(&theta)?)
}

/// `(n + 1/2) / (N + 1)`.
pub fn hedged_frequency(successes: u64, shots: u64) -> f64 {
    (successes as f64 + HEDGE_BETA) / (shots as f64 + 1.0)
}

/// Row weight `sqrt(N / (f (1 - f)))` with the hedged frequency `f`.
pub fn variance_weight(successes: u64, shots: u64) -> f64 {
    let f = hedged_frequency(successes, shots);
    (shots as f64 / (f * (1.0 - f))).sqrt()
}

/// Variance-weighted coordinates. With `hedge_y` the targets also use the
/// hedged frequencies; otherwise only the weights do.
pub fn wlsf_theta(sys: &DesignSystem, hedge_y: bool) -> Result<ThetaVector> {
    let offset = 1.0 / sys.dim as f64;
    let mut x = sys.x.clone();
    let mut y = sys.y.clone();
    for k in 0..sys.len() {
        let (n, shots) = (sys.successes[k], sys.shots[k]);
        let w = variance_weight(n, shots);
        if hedge_y {
            y[k] = hedged_frequency(n, shots) - offset;
        }
        y[k] *= w;
        x.row_mut(k).scale_mut(w);
    }
    solve_least_squares(&x, &y)
}

pub fn wlsf_estimate(
    sys: &DesignSystem,
    basis: &HermitianBasis,
    hedge_y: bool,
) -> Result<DensityMatrix> {
    let theta = wlsf_theta(sys, hedge_y)?;
    project_to_physical(&basis.from_theta(&theta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_hilbert_schmidt;
    use crate::quantum::born_probability;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(p: &[f64], shots: u64, successes: u64) -> MeasurementRecord {
        MeasurementRecord::new(ThetaVector::from_column_slice(p), shots, successes).unwrap()
    }

    /// Rows proportional to the basis directions; the projectors onto the
    /// +1 eigenstates of the scaled Paulis have coordinates e_j / sqrt(2).
    fn pauli_rows() -> Vec<ThetaVector> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..3)
            .map(|j| {
                let mut v = ThetaVector::zeros(3);
                v[j] = s;
                v
            })
            .collect()
    }

    #[test]
    fn design_examples() {
        let sys = build_design(&[record(&[0., 0., 0.5], 10, 10)], 2).unwrap();
        assert!((sys.y[0] - 0.5).abs() < 1e-15);
        let sys = build_design(&[record(&[0., 0., 0.5], 10, 5)], 2).unwrap();
        assert_eq!(sys.y[0], 0.0);
        let recs: Vec<_> = (0..7).map(|_| record(&[0.1; 8], 4, 1)).collect();
        let sys = build_design(&recs, 3).unwrap();
        assert_eq!(sys.x.shape(), (7, 8));
        assert!(build_design(&[], 2).is_err());
        assert!(build_design(&[record(&[0., 0., 0.5], 0, 0)], 2).is_err());
    }

    #[test]
    fn exact_probabilities_recover_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = HermitianBasis::new(2).unwrap();
        let truth = sample_hilbert_schmidt(2, &mut rng).unwrap();
        let theta = basis.to_theta(&truth).unwrap();
        // Y = X theta exactly; encode through x, y directly
        let rows = pauli_rows();
        let mut sys = build_design(
            &rows.iter().map(|p| record(p.as_slice(), 1, 0)).collect::<Vec<_>>(),
            2,
        )
        .unwrap();
        for (k, p) in rows.iter().enumerate() {
            sys.y[k] = born_probability(&theta, p, 2).unwrap() - 0.5;
        }
        let est = lsf_theta(&sys).unwrap();
        assert!((est - &theta).amax() < 1e-10);
        let rho = lsf_estimate(&sys, &basis).unwrap();
        assert!((rho.matrix() - truth.matrix()).camax() < 1e-10);
    }

    #[test]
    fn duplicated_rows_average_their_targets() {
        // Oracle: for X = [I; e_1] with targets (y1, y2, y3, y4), the normal
        // equations give theta_1 = (y1 + y4) / 2 and theta_{2,3} = y_{2,3}.
        let mut x = DMatrix::identity(3, 3).resize_vertically(4, 0.0);
        x[(3, 0)] = 1.0;
        let y = DVector::from_vec(vec![0.2, -0.1, 0.05, 0.4]);
        let theta = solve_least_squares(&x, &y).unwrap();
        assert!((theta[0] - 0.3).abs() < 1e-12);
        assert!((theta[1] + 0.1).abs() < 1e-12);
        assert!((theta[2] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_design_is_rejected() {
        let recs: Vec<_> = pauli_rows()
            .into_iter()
            .take(2)
            .map(|p| record(p.as_slice(), 10, 5))
            .collect();
        let sys = build_design(&recs, 2).unwrap();
        assert!(matches!(
            lsf_estimate(&sys, &HermitianBasis::new(2).unwrap()),
            Err(Error::NotInformationallyComplete { .. })
        ));
        let rank_deficient: Vec<_> = (0..5).map(|_| record(&[0.0, 0.0, 0.7], 10, 5)).collect();
        let sys = build_design(&rank_deficient, 2).unwrap();
        assert!(lsf_theta(&sys).is_err());
        assert!(wlsf_theta(&sys, false).is_err());
    }

    #[test]
    fn hedging_arithmetic() {
        let f = hedged_frequency(0, 100);
        assert!((f - 0.5 / 101.0).abs() < 1e-15);
        assert!((f - 0.004950).abs() < 1e-6);
        assert!(variance_weight(0, 100).is_finite());
        assert!(variance_weight(100, 100).is_finite());
    }

    #[test]
    fn uniform_weights_match_lsf() {
        let basis = HermitianBasis::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut recs = Vec::new();
        for _ in 0..4 {
            let psi = crate::ensembles::sample_haar_pure(2, &mut rng).unwrap();
            recs.push(MeasurementRecord::new(basis.pure_coordinates(&psi).unwrap(), 20, 10).unwrap());
        }
        let sys = build_design(&recs, 2).unwrap();
        let a = lsf_theta(&sys).unwrap();
        let b = wlsf_theta(&sys, false).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn wlsf_exact_frequencies_recover_truth() {
        // Hedged weights are finite and positive, so a consistent system
        // is solved exactly regardless of the weights.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = HermitianBasis::new(3).unwrap();
        let truth = sample_hilbert_schmidt(3, &mut rng).unwrap();
        let theta = basis.to_theta(&truth).unwrap();
        let mut recs = Vec::new();
        for _ in 0..20 {
            let psi = crate::ensembles::sample_haar_pure(3, &mut rng).unwrap();
            recs.push(MeasurementRecord::new(basis.pure_coordinates(&psi).unwrap(), 1000, 300).unwrap());
        }
        let mut sys = build_design(&recs, 3).unwrap();
        for (k, r) in recs.iter().enumerate() {
            sys.y[k] = born_probability(&theta, &r.p, 3).unwrap() - 1.0 / 3.0;
        }
        let est = wlsf_theta(&sys, false).unwrap();
        assert!((&est - &theta).amax() < 1e-8);
        let rho = wlsf_estimate(&sys, &basis, false).unwrap();
        assert!((rho.matrix() - truth.matrix()).camax() < 1e-8);
    }
}
