//! End-to-end numerical studies: λ sweeps, method confirmation, width
//! comparison and the distribution study.
//!
//! Realization `r` at grid point `i` uses the seed
//! `derive_seed(master_seed, i, r)`; results are gathered in index order, so
//! output does not depend on the worker count.

mod config;
mod distributions;
mod ensemble;
pub mod output;

pub use config::{DistConfig, FitWindows, SweepConfig};
pub use distributions::{run_distributions, DistOutput, HStudy, LadderCurve, LadderPoint};
pub use ensemble::{
    ensemble_widths, fit_windows, run_compare, run_confirm, run_sweep, select_states, state_energies, ConfirmOutput,
    ConfirmRow, ConfirmSummary, EnsembleRecord, SweepOutput, WindowFit,
};
