//! Verification suites: each measures a table on a space, then evaluates fits and checks
//! from that table alone so that verdicts can be recomputed from stored reports.

pub mod heat;
pub mod local;
pub mod report;
pub mod sector;
pub mod wave;

pub use crate::fit::{fit_power_law, ExponentFit};
pub use heat::{
    suite_heat2inf, suite_ondiag, suite_rsk, suite_schrodinger, Heat2InfOptions, OndiagOptions, RskOptions,
    SchrodingerOptions,
};
pub use local::{
    envelope_peaks, pair_schedule, suite_dg_decay, suite_locality, suite_subordination, DgOptions, LocalityOptions,
    SubordinationOptions, SPEED_TAUS,
};
pub use report::{write_atomic, Check, Evaluation, Measured, SuiteReport, REPORT_VERSION};
pub use sector::{sector_shape, suite_resolvent_sector, suite_spectrum_probe, ProbeOptions, SectorOptions};
pub use wave::{suite_multiplier, suite_wave, MultiplierOptions, WaveOptions};

use crate::error::{invalid, Result};
use crate::metric_space::MetricMeasureSpace;

pub const SUITE_NAMES: [&str; 11] = [
    "rsk",
    "heat2inf",
    "ondiag",
    "wave",
    "multiplier",
    "resolvent_sector",
    "spectrum_probe",
    "schrodinger",
    "dg",
    "locality",
    "subordination",
];

/// Fit window for length-type parameters: `[h, diam/4]`, or `None` when that is empty.
pub fn length_window(space: &MetricMeasureSpace) -> Option<(f64, f64)> {
    let h = space.max_edge_length();
    let hi = space.diameter() / 4.0;
    (hi > h).then_some((h, hi))
}

/// Fit window for time-type parameters: `[h², (diam/4)²]`, or `None` when empty.
pub fn time_window(space: &MetricMeasureSpace) -> Option<(f64, f64)> {
    length_window(space).map(|(a, b)| (a * a, b * b))
}

pub(crate) fn check_grid(name: &str, grid: &[f64], decades: f64) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(invalid(format!("{name} must hold finite positive values")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("{name} must be strictly increasing")));
    }
    let span = (grid[grid.len() - 1] / grid[0]).log10();
    if span + 1e-12 < decades {
        return Err(invalid(format!("{name} must span at least {decades} decade(s), spans {span:.3}")));
    }
    Ok(())
}

/// Window to use: explicit, else the default, else the whole grid.
pub(crate) fn pick_window(explicit: Option<(f64, f64)>, default: Option<(f64, f64)>, grid: &[f64]) -> (f64, f64) {
    explicit.or(default).unwrap_or((grid[0], grid[grid.len() - 1]))
}

pub(crate) fn bool_f(b: bool) -> f64 {
    if b { 1.0 } else { 0.0 }
}
