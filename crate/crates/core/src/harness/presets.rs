//! Named run configurations reproducing each figure's protocol at desk
//! scale, or at the original scale with `full_scale`.

use crate::diagnostics::Estimator;
use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};

use super::config::RunConfig;

pub const PRESET_NAMES: [&str; 8] = ["smoke", "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

/// Desk-scale particle count for dimensions above two.
pub const DESK_LARGE_PARTICLES: usize = 8000;

/// A preset member; presets with several members write each to its own
/// subdirectory named `name`.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedConfig {
    pub name: String,
    pub config: RunConfig,
}

fn named(name: &str, config: RunConfig) -> NamedConfig {
    NamedConfig {
        name: name.to_string(),
        config,
    }
}

fn qubit(ensemble: EnsembleKind, iterations: u64, shots: u64, trials: usize) -> RunConfig {
    RunConfig::new(2, ensemble, iterations, shots, trials)
}

fn large(mut c: RunConfig, full_scale: bool) -> RunConfig {
    if !full_scale {
        c.particles = Some(DESK_LARGE_PARTICLES);
    }
    c
}

fn two_qubit(ensemble: EnsembleKind, iterations: u64, trials: usize, full_scale: bool) -> RunConfig {
    let mut c = RunConfig::new(4, ensemble, iterations, 500, trials);
    c.factors = Some((2, 2));
    c.product_measurements = true;
    large(c, full_scale)
}

pub fn preset(name: &str, full_scale: bool) -> Result<Vec<NamedConfig>> {
    let scale = |desk: u64, full: u64| if full_scale { full } else { desk };
    let trials = |desk: usize, full: usize| if full_scale { full } else { desk };
    let set = match name {
        "smoke" => {
            let mut c = qubit(EnsembleKind::HilbertSchmidt, 50, 100, 4);
            c.particles = Some(200);
            c.checkpoint_stride = Some(10);
            c.seed = 1;
            vec![named("smoke", c)]
        }
        "fig1" => [5, 50, 500]
            .into_iter()
            .map(|shots| {
                let mut c = qubit(EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), shots, 100);
                c.estimators = vec![Estimator::Sgqt];
                named(&format!("shots{shots}"), c)
            })
            .collect(),
        "fig2" => vec![
            named("pure", qubit(EnsembleKind::HaarPure, scale(1_000, 10_000), 500, trials(100, 1000))),
            named("mixed", qubit(EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), 500, trials(100, 1000))),
        ],
        "fig3" => vec![
            named("pure", qubit(EnsembleKind::HaarPure, scale(1_000, 10_000), 500, trials(1000, 10_000))),
            named("mixed", qubit(EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), 500, trials(1000, 10_000))),
        ],
        "fig4" => [("pure", EnsembleKind::HaarPure), ("mixed", EnsembleKind::HilbertSchmidt)]
            .into_iter()
            .map(|(n, kind)| {
                named(n, large(RunConfig::new(3, kind, scale(1_000, 10_000), 500, trials(100, 1000)), full_scale))
            })
            .collect(),
        "fig5" => vec![
            named("pure", two_qubit(EnsembleKind::HaarPure, scale(1_000, 10_000), trials(100, 1000), full_scale)),
            named("mixed", two_qubit(EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), trials(100, 1000), full_scale)),
        ],
        "fig6" => {
            let mut qutrit = large(
                RunConfig::new(3, EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), 500, trials(100, 1000)),
                full_scale,
            );
            qutrit.estimators = vec![Estimator::Sgqt, Estimator::Bme];
            let mut pair = two_qubit(EnsembleKind::HilbertSchmidt, scale(1_000, 10_000), trials(100, 1000), full_scale);
            pair.estimators = vec![Estimator::Sgqt, Estimator::Bme];
            vec![named("qutrit", qutrit), named("two-qubit", pair)]
        }
        "fig7" => {
            let mut q = qubit(EnsembleKind::HaarPure, 10_000, 500, 20);
            let mut t = RunConfig::new(3, EnsembleKind::HaarPure, 10_000, 500, 20);
            let mut p = two_qubit(EnsembleKind::HaarPure, 10_000, 20, full_scale);
            for c in [&mut q, &mut t, &mut p] {
                c.estimators = vec![Estimator::Sgqt];
                c.checkpoints_per_decade = Some(10);
            }
            vec![named("qubit", q), named("qutrit", t), named("two-qubit", p)]
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(set)
}
