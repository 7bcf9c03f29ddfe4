//! Evaluation metrics, certificates and a centralized reference solver.

mod lyapunov;
mod metrics;
mod oracle;
mod rate;

pub use lyapunov::{
    lyapunov_constants, lyapunov_descent_check, lyapunov_value, subgradient_ratios, InnerTrace,
    LyapunovConstants, DEFAULT_DELTA,
};
pub use metrics::{compute_metrics, stationarity_bound, MetricsSample};
pub(crate) use metrics::metrics_with_gradients;
pub use oracle::{centralized_oracle, Reference, ORACLE_TOLERANCE};
pub use rate::{linear_rate_fit, RateFit, MIN_RATE_POINTS, RATE_FLOOR};
