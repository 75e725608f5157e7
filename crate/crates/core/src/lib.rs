//! Sparsity-adaptive detection of multiple mean changes in high-dimensional
//! panels of time series.
//!
//! Data enter as a [`DataMatrix`] of `p` series over `n` time points. The
//! [`esac`] recursion tests seeded intervals narrowest first with a
//! sparsity-adaptive penalized CUSUM score and locates each change with the
//! same score under an estimation penalty.

pub mod calibrate;
pub mod detect;
pub mod error;
pub mod experiment;
pub mod intervals;
pub mod rng;
pub mod score;
pub mod simulate;
pub mod stats;

pub use calibrate::{
    calibrate_gamma, estimate_sigma, mad_sigma, max_raw_scores, normalize, CalibratedGamma,
    CalibrationOptions, SigmaEstimate, SigmaMethod,
};
pub use detect::{
    esac, estimate_single, significance_rank, Changepoint, DetectionResult, EsacConfig, Variant,
};
pub use error::{Error, Result};
pub use experiment::{
    replicate_spec, run_experiment, Design, ExperimentConfig, GammaSource, MetricsReport, Regime, SparsityChoice,
};
pub use intervals::{generate as seeded_intervals, length_ladder, SeededInterval, SeededIntervalSet};
pub use score::{
    penalized_score, penalized_score_detailed, score_at, test_interval, IntervalTest, ScanMode,
    ScoreValue,
};
pub use simulate::{
    generate as simulate, hausdorff, mse, Direction, NoiseModel, SignalScale, SimulationSpec, Truth,
};
pub use stats::{
    nu_trunc, sparsity_grid, DataMatrix, NEff, PenaltyEntry, PenaltyTable, RateContext,
};
