//! Experiment pipelines. Each records its stages, outputs and checks on a
//! [`Recorder`]; the first failing stage aborts the run.

mod equivalence;
mod ground;
mod qpot;
mod sed;
mod wigner;

use crate::config::{Experiment, RunConfig};
use crate::manifest::{Recorder, StageError};

pub use ground::dense_ground_energy;
pub use sed::{simulate, SedRun};

pub fn run(cfg: &RunConfig, rec: &mut Recorder) -> Result<(), StageError> {
    match cfg.experiment {
        Experiment::SedRelax => sed::relax(cfg, rec),
        Experiment::Balance => sed::balance(cfg, rec),
        Experiment::Equivalence => equivalence::run(cfg, rec),
        Experiment::WignerContrast => wigner::run(cfg, rec),
        Experiment::GroundState => ground::run(cfg, rec),
        Experiment::Qpot => qpot::run(cfg, rec),
    }
}

/// Largest absolute value over finite entries.
fn finite_max_abs<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().filter(|x| x.is_finite()).fold(0.0f64, |a, x| a.max(x.abs()))
}
