//! Finite-dimensional state algebra: the traceless Hermitian operator basis,
//! coordinate conversions, the Born rule, distance measures, projection onto
//! the state space and binomial shot sampling.
//!
//! The basis is the generalized Gell-Mann set scaled by `1/sqrt(2)` so that
//! `Tr(B_j B_k) = delta_jk`. Element order is fixed:
//!
//! 1. symmetric pairs `(|j><k| + |k><j|)/sqrt(2)` for `j < k`, lexicographic,
//! 2. antisymmetric pairs `(-i|j><k| + i|k><j|)/sqrt(2)` for `j < k`, lexicographic,
//! 3. diagonal elements `(sum_{a<l} |a><a| - l|l><l|)/sqrt(l(l+1))` for `l = 1..d-1`.
//!
//! For `d = 2` this gives `(sigma_x, sigma_y, sigma_z)/sqrt(2)`.

use std::f64::consts::SQRT_2;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Real coordinates of a Hermitian unit-trace operator in the basis.
pub type ThetaVector = DVector<f64>;

/// Tolerance used when validating [`DensityMatrix`] invariants.
pub const STATE_TOL: f64 = 1e-10;

/// Slack allowed on Born probabilities before they are treated as inconsistent.
pub const BORN_TOL: f64 = 1e-9;

/// Eigenvalues below this are rejected by [`fidelity`].
pub const FIDELITY_PHYSICALITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Generator {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
    Diagonal(usize),
}

/// Orthonormal basis `{B_j}` of traceless Hermitian `d x d` operators.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dim: usize,
    generators: Vec<Generator>,
    elements: Vec<CMatrix>,
}

impl HermitianBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let mut generators = Vec::with_capacity(dim * dim - 1);
        for j in 0..dim {
            for k in j + 1..dim {
                generators.push(Generator::Symmetric(j, k));
            }
        }
        for j in 0..dim {
            for k in j + 1..dim {
                generators.push(Generator::Antisymmetric(j, k));
            }
        }
        for l in 1..dim {
            generators.push(Generator::Diagonal(l));
        }
        let elements = generators
            .iter()
            .map(|g| {
                let mut m = CMatrix::zeros(dim, dim);
                add_generator(&mut m, *g, 1.0);
                m
            })
            .collect();
        Ok(Self {
            dim,
            generators,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, `d^2 - 1`.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// `theta_j = Tr(m B_j)`.
    pub fn to_theta(&self, m: &CMatrix) -> Result<ThetaVector> {
        self.check_square(m)?;
        let theta = self.generators.iter().map(|g| match *g {
            Generator::Symmetric(j, k) => (m[(k, j)] + m[(j, k)]).re / SQRT_2,
            Generator::Antisymmetric(j, k) => {
                let i = Complex64::i();
                (-i * m[(k, j)] + i * m[(j, k)]).re / SQRT_2
            }
            Generator::Diagonal(l) => {
                let c = diagonal_scale(l);
                let head: f64 = (0..l).map(|a| m[(a, a)].re).sum();
                c * (head - l as f64 * m[(l, l)].re)
            }
        });
        Ok(ThetaVector::from_iterator(self.len(), theta))
    }

    /// `I/d + sum_j theta_j B_j`. Hermitian with unit trace, not necessarily positive.
    pub fn from_theta(&self, theta: &ThetaVector) -> Result<CMatrix> {
        self.check_len(theta.len())?;
        let mut m = CMatrix::identity(self.dim, self.dim) / Complex64::from(self.dim as f64);
        for (g, &t) in self.generators.iter().zip(theta.iter()) {
            add_generator(&mut m, *g, t);
        }
        Ok(m)
    }

    /// Basis coordinates of the rank-1 projector `|psi><psi|`.
    pub fn pure_coordinates(&self, psi: &PureState) -> Result<ThetaVector> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: psi.dim(),
            });
        }
        self.to_theta(&psi.projector())
    }

    /// Whether `from_theta(theta)` has minimum eigenvalue `>= -tol`.
    pub fn is_physical(&self, theta: &ThetaVector, tol: f64) -> bool {
        if theta.len() != self.len() {
            return false;
        }
        if self.dim == 2 {
            // eigenvalues are 1/2 +- |theta|/sqrt(2)
            return 0.5 - theta.norm() / SQRT_2 >= -tol;
        }
        match self.from_theta(theta) {
            Ok(m) => min_eigenvalue(&m) >= -tol,
            Err(_) => false,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }

    fn check_square(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(())
    }
}

fn diagonal_scale(l: usize) -> f64 {
    1.0 / ((l * (l + 1)) as f64).sqrt()
}

fn add_generator(m: &mut CMatrix, g: Generator, weight: f64) {
    match g {
        Generator::Symmetric(j, k) => {
            let v = Complex64::new(weight / SQRT_2, 0.0);
            m[(j, k)] += v;
            m[(k, j)] += v;
        }
        Generator::Antisymmetric(j, k) => {
            let v = Complex64::new(0.0, weight / SQRT_2);
            m[(j, k)] -= v;
            m[(k, j)] += v;
        }
        Generator::Diagonal(l) => {
            let c = weight * diagonal_scale(l);
            for a in 0..l {
                m[(a, a)] += c;
            }
            m[(l, l)] -= c * l as f64;
        }
    }
}

pub fn build_basis(d: usize) -> Result<HermitianBasis> {
    HermitianBasis::new(d)
}

pub fn to_theta(rho: &CMatrix, basis: &HermitianBasis) -> Result<ThetaVector> {
    basis.to_theta(rho)
}

pub fn from_theta(theta: &ThetaVector, basis: &HermitianBasis) -> Result<CMatrix> {
    basis.from_theta(theta)
}

/// Normalized state vector `|phi>`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState(CVector);

impl PureState {
    /// Normalizes `amplitudes`; fails when the norm vanishes.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm >= 1e-14) {
            return Err(Error::DegeneratePerturbation);
        }
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        Ok(Self(amplitudes / Complex64::from(norm)))
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::from(1.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn projector(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }

    pub fn kron(&self, other: &PureState) -> PureState {
        PureState(self.0.kronecker(&other.0))
    }

    /// `<self|m|self>`, real part.
    pub fn expectation(&self, m: &CMatrix) -> f64 {
        self.0.dotc(&(m * &self.0)).re
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotPhysical("matrix is not square".into()));
        }
        if m.nrows() < 2 {
            return Err(Error::InvalidDimension(m.nrows()));
        }
        let herm_err = (&m - m.adjoint()).camax();
        if herm_err > STATE_TOL {
            return Err(Error::NotPhysical(format!(
                "not Hermitian (residual {herm_err:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::NotPhysical(format!("trace {tr} is not 1")));
        }
        let min = min_eigenvalue(&m);
        if min < -STATE_TOL {
            return Err(Error::NotPhysical(format!("minimum eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self(psi.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self(
            CMatrix::identity(dim, dim) / Complex64::from(dim as f64),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn theta(&self, basis: &HermitianBasis) -> Result<ThetaVector> {
        basis.to_theta(&self.0)
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kronecker(&other.0))
    }
}

impl Deref for DensityMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let herm = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = herm.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::from(0.5);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `Pr(1 | theta, p) = 1/d + p . theta`.
pub fn born_probability(theta: &ThetaVector, p: &ThetaVector, d: usize) -> Result<f64> {
    if theta.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: p.len(),
        });
    }
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let prob = 1.0 / d as f64 + p.dot(theta);
    if !(-BORN_TOL..=1.0 + BORN_TOL).contains(&prob) {
        return Err(Error::InconsistentInputs(prob));
    }
    Ok(prob.clamp(0.0, 1.0))
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// When either argument is pure this is `<phi|other|phi>`, which is computed
/// directly to keep small infidelities accurate.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let (rho_vals, rho_vecs) = hermitian_eigen(rho);
    let (sigma_vals, sigma_vecs) = hermitian_eigen(sigma);
    for vals in [&rho_vals, &sigma_vals] {
        if vals[0] < -FIDELITY_PHYSICALITY_TOL {
            return Err(Error::NotPhysical(format!(
                "minimum eigenvalue {:e}",
                vals[0]
            )));
        }
    }
    let n = rho.nrows();
    let is_pure = |vals: &DVector<f64>| vals[n - 1] >= 1.0 - 1e-12;

    let f = if is_pure(&rho_vals) {
        let phi = rho_vecs.column(n - 1).into_owned();
        phi.dotc(&(sigma * &phi)).re
    } else if is_pure(&sigma_vals) {
        let phi = sigma_vecs.column(n - 1).into_owned();
        phi.dotc(&(rho * &phi)).re
    } else if n == 2 {
        let det = |v: &DVector<f64>| (v[0].max(0.0) * v[1].max(0.0)).max(0.0);
        (rho * sigma).trace().re + 2.0 * (det(&rho_vals) * det(&sigma_vals)).sqrt()
    } else {
        let sqrt_vals = rho_vals.map(|v| Complex64::from(v.max(0.0).sqrt()));
        let sqrt_rho = &rho_vecs * CMatrix::from_diagonal(&sqrt_vals) * rho_vecs.adjoint();
        let inner = &sqrt_rho * sigma * &sqrt_rho;
        let root_sum: f64 = (&inner + inner.adjoint())
            .scale(0.5)
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .sum();
        root_sum * root_sum
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `1/2 ||rho - sigma||_1`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_same_dim(rho, sigma)?;
    let diff = rho - sigma;
    let total: f64 = diff.singular_values().iter().sum();
    Ok((0.5 * total).min(1.0))
}

/// Zeroes negative eigenvalues and renormalizes the trace.
pub fn project_to_physical(h: &CMatrix) -> Result<DensityMatrix> {
    if h.nrows() != h.ncols() {
        return Err(Error::NotPhysical("matrix is not square".into()));
    }
    let (vals, vecs) = hermitian_eigen(h);
    let clipped = vals.map(|v| v.max(0.0));
    let total = clipped.sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("spectrum has no positive eigenvalue"));
    }
    let scaled = clipped.map(|v| Complex64::from(v / total));
    let m = &vecs * CMatrix::from_diagonal(&scaled) * vecs.adjoint();
    let m = (&m + m.adjoint()) * Complex64::from(0.5);
    DensityMatrix::new(m)
}

/// Number of successes in `shots` Bernoulli trials with success probability `prob`.
pub fn sample_shots<R: Rng + ?Sized>(prob: f64, shots: u64, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::InvalidProbability(prob));
    }
    let dist = Binomial::new(shots, prob).map_err(|_| Error::InvalidProbability(prob))?;
    Ok(dist.sample(rng))
}

/// One two-outcome test `{P, I - P}`: the basis coordinates of `P`, the
/// number of shots and the number of `1` outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub p: ThetaVector,
    pub shots: u64,
    pub successes: u64,
}

impl MeasurementRecord {
    pub fn new(p: ThetaVector, shots: u64, successes: u64) -> Result<Self> {
        if successes > shots {
            return Err(Error::InvalidParameter(format!(
                "{successes} successes out of {shots} shots"
            )));
        }
        Ok(Self { p, shots, successes })
    }

    /// Empirical frequency `n/N`; `None` when no shots were taken.
    pub fn frequency(&self) -> Option<f64> {
        (self.shots > 0).then(|| self.successes as f64 / self.shots as f64)
    }
}

/// Partial trace of a bipartite operator on `C^da (x) C^db`.
///
/// `keep_first = true` traces out the second factor.
pub fn partial_trace(m: &CMatrix, da: usize, db: usize, keep_first: bool) -> Result<CMatrix> {
    if m.nrows() != da * db || m.ncols() != da * db {
        return Err(Error::DimensionMismatch {
            expected: da * db,
            found: m.nrows(),
        });
    }
    let out = if keep_first {
        CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|b| m[(i * db + b, j * db + b)]).sum()
        })
    } else {
        CMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|a| m[(a * db + i, a * db + j)]).sum()
        })
    };
    Ok(out)
}
