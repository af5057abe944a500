//! Self-contained check suites over the whole library. Each returns a
//! [`SuiteOutcome`]; the command-line runner and the acceptance target share
//! them.

mod catalog;
mod concentration;
mod entropic;
mod gamma2;
mod geometry;
mod regularization;

pub use catalog::{catalog_experiments, gamma2_triples, Experiment};
pub use concentration::{
    concentration_for, known_variance_1d, poincare_for, variance_1d, variance_for, variance_grid_1d,
};
pub use entropic::{central_points, default_cases, entropic_pair, EntropicCase};
pub use gamma2::gamma2_triple_checks;

use crate::concentration_lab::{BankFunction, C_GRID, DEFAULT_EXP_C};
use crate::exec::ExecMode;
use crate::report::SuiteOutcome;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Metric axioms, invariances and geodesic lengths on random pairs.
    Geometry,
    /// Lipschitz bounds for the log-quadratic form and the log-spectrum, and
    /// the log-majorization chain.
    Lipschitz,
    Gamma2,
    Variance,
    Poincare,
    Concentration,
    Regularization,
    Entropic,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Geometry,
        Suite::Lipschitz,
        Suite::Gamma2,
        Suite::Variance,
        Suite::Poincare,
        Suite::Concentration,
        Suite::Regularization,
        Suite::Entropic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Lipschitz => "lipschitz",
            Suite::Gamma2 => "gamma2",
            Suite::Variance => "variance",
            Suite::Poincare => "poincare",
            Suite::Concentration => "concentration",
            Suite::Regularization => "regularization",
            Suite::Entropic => "entropic",
        }
    }
}

/// Members of the Lipschitz test-function bank, expanded per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BankMember {
    Coordinates,
    Mean,
    Max,
    LogSumExp,
    Distance,
}

impl BankMember {
    pub const ALL: [BankMember; 5] = [
        BankMember::Coordinates,
        BankMember::Mean,
        BankMember::Max,
        BankMember::LogSumExp,
        BankMember::Distance,
    ];
}

/// Expands a bank selection for dimension `n`.
pub fn bank_for(members: &[BankMember], n: usize) -> Vec<BankFunction> {
    let mut out = vec![];
    for m in members {
        match m {
            BankMember::Coordinates => out.extend((0..n).map(BankFunction::Coordinate)),
            BankMember::Mean => out.push(BankFunction::Mean),
            BankMember::Max => out.push(BankFunction::Max),
            BankMember::LogSumExp => out.push(BankFunction::LogSumExp),
            BankMember::Distance => out.push(BankFunction::DistanceTo(
                (0..n)
                    .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
                    .collect(),
            )),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Monte Carlo sample count per experiment.
    pub mc_samples: usize,
    /// 1D quadrature nodes.
    pub quad_nodes: usize,
    /// Random pairs for the geometry and Lipschitz suites.
    pub geometry_pairs: usize,
    /// Points per sampled geodesic.
    pub curve_points: usize,
    /// Points per triple in the Γ₂ suite.
    pub gamma2_points: usize,
    /// Grid side for the entropic suite.
    pub grid: usize,
    pub bank: Vec<BankMember>,
    /// Constant of the exponential concentration check.
    pub exp_c: f64,
    pub c_grid: Vec<f64>,
    /// Keep raw `Λ(X)` samples in the outcome.
    pub keep_samples: bool,
    pub mode: ExecMode,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            mc_samples: 100_000,
            quad_nodes: 2048,
            geometry_pairs: 1000,
            curve_points: 1000,
            gamma2_points: 100,
            grid: 64,
            bank: BankMember::ALL.to_vec(),
            exp_c: DEFAULT_EXP_C,
            c_grid: C_GRID.to_vec(),
            keep_samples: false,
            mode: ExecMode::Parallel,
        }
    }
}

/// Statistical allowance, in standard errors, for Monte Carlo bound checks.
pub const SE_ALLOWANCE: f64 = 3.0;

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> SuiteOutcome {
    match suite {
        Suite::Geometry => geometry::metric_suite(opts),
        Suite::Lipschitz => geometry::lipschitz_suite(opts),
        Suite::Gamma2 => gamma2::gamma2_suite(opts),
        Suite::Variance => concentration::variance_suite(opts),
        Suite::Poincare => concentration::poincare_suite(opts),
        Suite::Concentration => concentration::concentration_suite(opts),
        Suite::Regularization => regularization::regularization_suite(opts),
        Suite::Entropic => entropic::entropic_suite(opts),
    }
}
