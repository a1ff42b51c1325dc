//! Seeded random states: Haar-random pure states, the Hilbert-Schmidt
//! ensemble of mixed states, and two-factor product variants of both.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{CMatrix, CVector, DensityMatrix, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    HaarPure,
    HilbertSchmidt,
    ProductHaarPure,
    ProductHilbertSchmidt,
}

impl EnsembleKind {
    pub fn is_product(self) -> bool {
        matches!(
            self,
            EnsembleKind::ProductHaarPure | EnsembleKind::ProductHilbertSchmidt
        )
    }

    pub fn is_pure(self) -> bool {
        matches!(self, EnsembleKind::HaarPure | EnsembleKind::ProductHaarPure)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    /// Factor dimensions `(d_A, d_B)`; required for product kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<(usize, usize)>,
}

impl EnsembleSpec {
    pub fn full(kind: EnsembleKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            factors: None,
        }
    }

    pub fn product(kind: EnsembleKind, da: usize, db: usize) -> Self {
        Self {
            kind,
            dim: da * db,
            factors: Some((da, db)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        if self.kind.is_product() {
            let (da, db) = self.factors.ok_or_else(|| {
                Error::Config("product ensembles need factor dimensions".into())
            })?;
            if da < 2 || db < 2 || da * db != self.dim {
                return Err(Error::Config(format!(
                    "factors {da}x{db} do not split dimension {} into parts >= 2",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// A sampled state together with its factors when it was drawn as a product.
#[derive(Clone, Debug)]
pub struct SampledState {
    pub state: DensityMatrix,
    pub factors: Option<(DensityMatrix, DensityMatrix)>,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn sample_haar_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<PureState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    loop {
        let v = CVector::from_fn(d, |_, _| complex_normal(rng));
        // a zero draw has probability zero; redraw rather than fail
        if let Ok(psi) = PureState::new(v) {
            return Ok(psi);
        }
    }
}

/// `G G^dag / Tr(G G^dag)` for a square complex Ginibre matrix `G`.
pub fn sample_hilbert_schmidt<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let g: CMatrix = DMatrix::from_fn(d, d, |_, _| complex_normal(rng));
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    let rho = gg / Complex64::from(tr);
    let rho = (&rho + rho.adjoint()) * Complex64::from(0.5);
    DensityMatrix::new(rho)
}

pub fn sample_product<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<SampledState> {
    spec.validate()?;
    let (da, db) = match (spec.kind.is_product(), spec.factors) {
        (true, Some(f)) => f,
        _ => {
            return Err(Error::Config(format!(
                "{:?} is not a product ensemble",
                spec.kind
            )))
        }
    };
    let (a, b) = if spec.kind.is_pure() {
        (
            DensityMatrix::from_pure(&sample_haar_pure(da, rng)?),
            DensityMatrix::from_pure(&sample_haar_pure(db, rng)?),
        )
    } else {
        (
            sample_hilbert_schmidt(da, rng)?,
            sample_hilbert_schmidt(db, rng)?,
        )
    };
    Ok(SampledState {
        state: a.kron(&b),
        factors: Some((a, b)),
    })
}

/// Draws one state from any ensemble.
pub fn sample_state<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<SampledState> {
    spec.validate()?;
    match spec.kind {
        EnsembleKind::HaarPure => Ok(SampledState {
            state: DensityMatrix::from_pure(&sample_haar_pure(spec.dim, rng)?),
            factors: None,
        }),
        EnsembleKind::HilbertSchmidt => Ok(SampledState {
            state: sample_hilbert_schmidt(spec.dim, rng)?,
            factors: None,
        }),
        EnsembleKind::ProductHaarPure | EnsembleKind::ProductHilbertSchmidt => {
            sample_product(spec, rng)
        }
    }
}
