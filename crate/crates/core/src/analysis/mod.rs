//! Estimators over time-tag streams and count tables.

mod correlation;
mod efficiency;
mod histogram;
mod montecarlo;
mod power;
mod visibility;

pub use correlation::{effective_mode_number, heralded_g2, unheralded_g2, G2Point, HeraldedG2, HeraldedPoint};
pub use efficiency::{
    collection_efficiency, infer_emission_probability, loss_budget, EfficiencyBudget, EfficiencyEstimate, EfficiencyInputs,
};
pub use histogram::{car, car_with, coincidence_histogram, histogram_from_timestamps, CarResult, CoincidenceHistogram};
pub use montecarlo::{
    monte_carlo_uncertainty, EfficiencyCounts, MonteCarloSummary, PoissonResample, PowerScan, MAX_FAILURE_FRACTION,
};
pub use power::{fit_power_quadratic, fit_power_quadratic_weighted, PowerFit};
pub use visibility::{chsh_from_visibility, fit_fringe, fit_visibility, visibility_from_extrema, BellResult, FringeFit, PhasePoint, VisibilityResult};
