use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::Estimator;
use crate::ensembles::{EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::estimators::particle::{
    DEFAULT_THRESHOLD_RATIO, LARGE_PARTICLES, LARGE_RESAMPLE_A, QUBIT_PARTICLES, QUBIT_RESAMPLE_A,
};
use crate::sgqt::{DesignMode, SpsaSchedule};

/// Checkpoints per decade on the default logarithmic grid.
pub const DEFAULT_CHECKPOINTS_PER_DECADE: u32 = 5;

/// One batch of simulated tomography runs. Optional fields fall back to
/// dimension-dependent defaults; [`RunConfig::resolved`] fills them in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub ensemble: EnsembleKind,
    /// Factor dimensions, needed by product ensembles and product measurements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<(usize, usize)>,
    #[serde(default)]
    pub product_measurements: bool,
    pub iterations: u64,
    pub shots: u64,
    pub estimators: Vec<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resample_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<SpsaSchedule>,
    /// Use hedged frequencies in the weighted least-squares targets too.
    #[serde(default)]
    pub hedge_y: bool,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Linear checkpoint spacing; when absent a logarithmic grid is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints_per_decade: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Qubit run with the estimator defaults and no optional fields set.
    pub fn new(dimension: usize, ensemble: EnsembleKind, iterations: u64, shots: u64, trials: usize) -> Self {
        Self {
            dimension,
            ensemble,
            factors: None,
            product_measurements: false,
            iterations,
            shots,
            estimators: Estimator::ALL.to_vec(),
            particles: None,
            resample_a: None,
            resample_threshold: None,
            schedule: None,
            hedge_y: false,
            trials,
            seed: 0,
            checkpoint_stride: None,
            checkpoints_per_decade: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn particles(&self) -> usize {
        self.particles.unwrap_or(if self.dimension == 2 {
            QUBIT_PARTICLES
        } else {
            LARGE_PARTICLES
        })
    }

    pub fn resample_a(&self) -> f64 {
        self.resample_a.unwrap_or(if self.dimension == 2 {
            QUBIT_RESAMPLE_A
        } else {
            LARGE_RESAMPLE_A
        })
    }

    pub fn resample_threshold(&self) -> f64 {
        self.resample_threshold.unwrap_or(DEFAULT_THRESHOLD_RATIO)
    }

    pub fn schedule(&self) -> SpsaSchedule {
        self.schedule.unwrap_or(if self.product_measurements {
            SpsaSchedule::PRODUCT
        } else {
            SpsaSchedule::STANDARD
        })
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            kind: self.ensemble,
            dim: self.dimension,
            factors: if self.ensemble.is_product() { self.factors } else { None },
        }
    }

    pub fn design_mode(&self) -> Result<DesignMode> {
        if !self.product_measurements {
            return Ok(DesignMode::Full);
        }
        match self.factors {
            Some((da, db)) => Ok(DesignMode::Product { da, db }),
            None => Err(Error::Config("product measurements need factor dimensions".into())),
        }
    }

    pub fn uses(&self, estimator: Estimator) -> bool {
        self.estimators.contains(&estimator)
    }

    /// Copy with every default made explicit, estimators in canonical order
    /// and no output path.
    pub fn resolved(&self) -> Self {
        let mut estimators = self.estimators.clone();
        estimators.sort();
        estimators.dedup();
        Self {
            particles: Some(self.particles()),
            resample_a: Some(self.resample_a()),
            resample_threshold: Some(self.resample_threshold()),
            schedule: Some(self.schedule()),
            checkpoints_per_decade: if self.checkpoint_stride.is_some() {
                None
            } else {
                Some(self.checkpoints_per_decade.unwrap_or(DEFAULT_CHECKPOINTS_PER_DECADE))
            },
            estimators,
            output: None,
            ..self.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the resolved config as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.resolved()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dimension < 2 {
            return fail(format!("dimension must be >= 2, got {}", self.dimension));
        }
        if self.iterations == 0 {
            return fail("iterations must be positive".into());
        }
        if self.shots == 0 {
            return fail("shots must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        if self.estimators.is_empty() {
            return fail("estimator set is empty".into());
        }
        if self.particles() < 2 {
            return fail("particles must be at least 2".into());
        }
        let a = self.resample_a();
        if !(0.0..=1.0).contains(&a) {
            return fail(format!("resample_a {a} outside [0, 1]"));
        }
        let r = self.resample_threshold();
        if !(r > 0.0 && r <= 1.0) {
            return fail(format!("resample_threshold {r} outside (0, 1]"));
        }
        if self.checkpoint_stride == Some(0) {
            return fail("checkpoint_stride must be positive".into());
        }
        if self.checkpoints_per_decade == Some(0) {
            return fail("checkpoints_per_decade must be positive".into());
        }
        self.schedule().validate()?;
        self.ensemble_spec().validate()?;
        if let DesignMode::Product { da, db } = self.design_mode()? {
            if da < 2 || db < 2 || da * db != self.dimension {
                return fail(format!(
                    "factors {da}x{db} do not split dimension {}",
                    self.dimension
                ));
            }
        }
        Ok(())
    }

    /// Iterations at which estimators are evaluated, strictly increasing and
    /// always ending at `iterations`.
    pub fn checkpoints(&self) -> Vec<u64> {
        let last = self.iterations;
        let mut ks: Vec<u64> = match self.checkpoint_stride {
            Some(stride) => (1..=last / stride).map(|i| i * stride).collect(),
            None => {
                let per_decade = self
                    .checkpoints_per_decade
                    .unwrap_or(DEFAULT_CHECKPOINTS_PER_DECADE) as f64;
                let mut out = Vec::new();
                let mut j = 0u32;
                loop {
                    let k = 10f64.powf(j as f64 / per_decade).round() as u64;
                    if k > last {
                        break;
                    }
                    out.push(k);
                    j += 1;
                }
                out
            }
        };
        ks.push(last);
        ks.dedup();
        ks
    }
}
