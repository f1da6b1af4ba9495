//! Monte Carlo and exact expectation estimates, bound curves, reports and the
//! verification suites built on them.

pub mod bounds;
pub mod expectation;
pub mod norms;
pub mod report;
pub mod suites;

pub use bounds::{
    bound_curves, check_bound, check_bound_from, lower_bound_curve, rate_fit, worst_case_weight, BoundCheck,
    BoundCurve, BoundInputs, BoundReport, BoundStatus, RateFit, SpectralProfile, ECVR_CONSTANT, LOW_POWER_RUNS,
};
pub use expectation::{
    enumerate_expectation, mc_expectation, mc_runs, CurveAccumulator, Execution, ExpectationCurve, ExpectationMode,
    ENUMERATION_BUDGET,
};
pub use norms::{bound_inputs, class_norms, collective_bound_inputs};
pub use report::{write_csv, write_json, BoundSummary, RunReport, CSV_HEADER};
pub use suites::{run_suite, run_suites, CheckOutcome, SuiteOptions, SuiteReport, SUITES};
