//! Statistics used to judge source-preference results: a nonparametric
//! bootstrap test for mean preference, Holm-Bonferroni step-down correction,
//! rank agreement coefficients, and STV-based ranking induction.

mod bootstrap;
mod error;
mod holm;
mod rank;
mod ranking;
mod stv;

pub use bootstrap::{bootstrap_test, BootstrapConfig, TestResult, DEFAULT_RESAMPLES, MIN_RECOMMENDED_RESAMPLES};
pub use error::StatsError;
pub use holm::{bonferroni, holm_adjusted, holm_bonferroni};
pub use rank::{kendall_tau, kendall_w, midranks, pearson, spearman_rho};
pub use ranking::{attribution_rank, AttributionRanking};
pub use stv::{droop_quota, stv_rank, Ballot};

pub type Result<T> = std::result::Result<T, StatsError>;
