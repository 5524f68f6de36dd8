//! Price-signal generation by minimizing tracking cost through the
//! deterministic flexibility function, hour by hour (sequential) or over
//! the whole horizon at once (simultaneous), optionally with
//! voltage-regulation terms.

mod nelder_mead;
mod scalar_min;
mod solve;

pub use solve::{evaluate_horizon, sequential_optimize, simultaneous_optimize};

use thiserror::Error;

use crate::ff::FfError;
use crate::scalar::Real;
use crate::series::{Series, SeriesError};

#[derive(Debug, Error, PartialEq)]
pub enum OptError {
    #[error("series length mismatch: {left_name} has {left}, {right_name} has {right}")]
    LengthMismatch {
        left_name: &'static str,
        left: usize,
        right_name: &'static str,
        right: usize,
    },
    #[error("series start hours differ: {left} vs {right}")]
    StartMismatch { left: i64, right: i64 },
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid ancillary map: {0}")]
    InvalidAncillary(&'static str),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Ff(#[from] FfError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Shape of the per-hour cost applied to residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    Absolute,
    Quadratic,
}

impl CostKind {
    /// Cost of a residual `e`.
    pub fn cost<T: Real>(self, e: T) -> T {
        match self {
            CostKind::Absolute => e.abs(),
            CostKind::Quadratic => e * e,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CostKind::Absolute => "absolute",
            CostKind::Quadratic => "quadratic",
        }
    }
}

/// Tracking cost of a single demand sample against its reference.
pub fn tracking_cost<T: Real>(d: T, d_ref: T, kind: CostKind) -> Result<T, OptError> {
    if !d.is_finite() {
        return Err(OptError::NonFinite("demand"));
    }
    if !d_ref.is_finite() {
        return Err(OptError::NonFinite("reference demand"));
    }
    Ok(kind.cost(d - d_ref))
}

/// A per-hour reference that is either one constant or a full trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum RefSignal<T> {
    Constant(T),
    PerHour(Vec<T>),
}

impl<T: Real> RefSignal<T> {
    pub fn at(&self, t: usize) -> T {
        match self {
            RefSignal::Constant(v) => *v,
            RefSignal::PerHour(vs) => vs[t],
        }
    }

    fn covers(&self, horizon: usize) -> bool {
        match self {
            RefSignal::Constant(_) => true,
            RefSignal::PerHour(vs) => vs.len() >= horizon,
        }
    }
}

/// Voltage-regulation terms added to the price-generation objective.
///
/// The feeder is modeled as a linear drop `v = v0 - r * demand`; the
/// objective gains `weight_v * J(v - v_ref) + weight_u * J(u - u_ref)`
/// with `J` the same cost kind as the tracking term.
#[derive(Debug, Clone, PartialEq)]
pub struct AncillaryMap<T> {
    /// No-load voltage, per unit.
    pub v0: T,
    /// Voltage droop per unit demand.
    pub droop_r: T,
    /// Reference voltage.
    pub v_ref: RefSignal<T>,
    /// Weight on the voltage term.
    pub weight_v: T,
    /// Weight on the price-deviation term.
    pub weight_u: T,
    /// Nominal price the deviation term pulls toward.
    pub u_ref: RefSignal<T>,
}

impl<T: Real> AncillaryMap<T> {
    pub fn new(
        v0: T,
        droop_r: T,
        v_ref: RefSignal<T>,
        weight_v: T,
        weight_u: T,
        u_ref: RefSignal<T>,
    ) -> Result<Self, OptError> {
        if !(v0.is_finite() && v0 > T::zero()) {
            return Err(OptError::InvalidAncillary("v0 must be > 0"));
        }
        if !(droop_r.is_finite() && droop_r >= T::zero()) {
            return Err(OptError::InvalidAncillary("droop_r must be >= 0"));
        }
        if !(weight_v.is_finite() && weight_v >= T::zero()) {
            return Err(OptError::InvalidAncillary("weight_v must be >= 0"));
        }
        if !(weight_u.is_finite() && weight_u >= T::zero()) {
            return Err(OptError::InvalidAncillary("weight_u must be >= 0"));
        }
        Ok(Self {
            v0,
            droop_r,
            v_ref,
            weight_v,
            weight_u,
            u_ref,
        })
    }
}

/// Feeder voltage at demand `y` under the linear drop model.
pub fn voltage_of_demand<T: Real>(y: T, anc: &AncillaryMap<T>) -> T {
    anc.v0 - anc.droop_r * y
}

/// Solver configuration shared by both optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig<T> {
    /// Price box bounds, `0 <= u_min < u_max <= 1`.
    pub u_min: T,
    pub u_max: T,
    /// Convergence tolerance on objective and argument.
    pub tol: T,
    /// Iteration cap: golden-section iterations per hour for the
    /// sequential solver, objective evaluations per start for the
    /// simultaneous solver.
    pub max_iters: usize,
    /// Number of multi-start initializations for the simultaneous solver.
    pub n_starts: usize,
    /// Seed for the randomized starts.
    pub seed: u64,
}

impl<T: Real> OptConfig<T> {
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.u_min >= T::zero() && self.u_min < self.u_max && self.u_max <= T::one()) {
            return Err(OptError::InvalidConfig("require 0 <= u_min < u_max <= 1"));
        }
        if !(self.tol.is_finite() && self.tol > T::zero()) {
            return Err(OptError::InvalidConfig("tol must be > 0"));
        }
        if self.max_iters < 1 {
            return Err(OptError::InvalidConfig("max_iters must be >= 1"));
        }
        if self.n_starts < 1 {
            return Err(OptError::InvalidConfig("n_starts must be >= 1"));
        }
        Ok(())
    }
}

impl<T: Real> Default for OptConfig<T> {
    fn default() -> Self {
        Self {
            u_min: T::zero(),
            u_max: T::one(),
            tol: T::of(1e-9),
            max_iters: 100_000,
            n_starts: 5,
            seed: 0,
        }
    }
}

/// Which optimizer produced a [`PriceSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptMode {
    Sequential,
    Simultaneous,
}

impl OptMode {
    pub fn name(self) -> &'static str {
        match self {
            OptMode::Sequential => "sequential",
            OptMode::Simultaneous => "simultaneous",
        }
    }
}

/// Optimizer output: the price signal plus everything needed to audit it.
#[derive(Debug, Clone)]
pub struct PriceSolution<T> {
    /// Optimal price trajectory, within the configured bounds.
    pub prices: Series<T>,
    /// Deterministic flexibility-function response to `prices`.
    pub demand: Series<T>,
    /// Full-horizon objective value (tracking plus ancillary terms).
    pub objective: T,
    /// Per-hour `|demand - demand_ref|`.
    pub residuals: Vec<T>,
    /// Per-hour inner-solver iterations (sequential) or per-start
    /// objective evaluations (simultaneous).
    pub iterations: Vec<u64>,
    /// State-clamping events in the solution rollout.
    pub clamp_events: u32,
    pub mode: OptMode,
    pub ancillary_used: bool,
}

impl<T: Real> PriceSolution<T> {
    pub fn total_iterations(&self) -> u64 {
        self.iterations.iter().sum()
    }
}

/// Comparison metrics over a solved horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    /// Sum of squared tracking errors.
    pub sse: T,
    /// Sum of the price signal.
    pub sum_penalty: T,
}

/// Compute the comparison metrics for a solution against its reference.
pub fn metrics<T: Real>(sol: &PriceSolution<T>, d_ref: &Series<T>) -> Result<Metrics<T>, OptError> {
    if sol.demand.len() != d_ref.len() {
        return Err(OptError::LengthMismatch {
            left_name: "demand",
            left: sol.demand.len(),
            right_name: "demand_ref",
            right: d_ref.len(),
        });
    }
    let mut sse = T::zero();
    for t in 0..d_ref.len() {
        let e = sol.demand.at(t) - d_ref.at(t);
        sse = sse + e * e;
    }
    let sum_penalty = sol.prices.values().iter().copied().sum();
    Ok(Metrics { sse, sum_penalty })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracking_cost_examples() {
        assert_eq!(tracking_cost(1.0, 1.0, CostKind::Absolute).unwrap(), 0.0);
        assert_eq!(tracking_cost(1.5, 1.0, CostKind::Quadratic).unwrap(), 0.25);
        assert_eq!(tracking_cost(0.5, 1.0, CostKind::Absolute).unwrap(), 0.5);
    }

    #[test]
    fn tracking_cost_rejects_non_finite() {
        assert!(tracking_cost(f64::NAN, 1.0, CostKind::Absolute).is_err());
        assert!(tracking_cost(1.0, f64::INFINITY, CostKind::Quadratic).is_err());
    }

    #[test]
    fn voltage_examples() {
        let anc = AncillaryMap::new(
            1.0,
            0.05,
            RefSignal::Constant(1.0),
            1.0,
            1.0,
            RefSignal::Constant(0.5),
        )
        .unwrap();
        assert_eq!(voltage_of_demand(0.0, &anc), 1.0);
        assert_eq!(voltage_of_demand(1.0, &anc), 0.95);
        assert_eq!(voltage_of_demand(2.0, &anc), 0.90);
    }

    #[test]
    fn opt_config_validation() {
        let mut cfg = OptConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.u_min = 0.8;
        cfg.u_max = 0.2;
        assert!(cfg.validate().is_err());
        cfg = OptConfig::default();
        cfg.n_starts = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ancillary_validation() {
        assert!(AncillaryMap::new(
            0.0,
            0.05,
            RefSignal::Constant(1.0),
            1.0,
            1.0,
            RefSignal::Constant(0.5)
        )
        .is_err());
        assert!(AncillaryMap::new(
            1.0,
            -0.05,
            RefSignal::Constant(1.0),
            1.0,
            1.0,
            RefSignal::Constant(0.5)
        )
        .is_err());
    }
}
