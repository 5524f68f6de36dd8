//! The flexibility function: a price-demand dynamical system with a
//! normalized state of flexibility.
//!
//! The state `x` lives in `[0, 1]` (0 = depleted, 1 = fully charged) and
//! integrates demand deviations from the baseline. The price response is
//!
//! ```text
//! dD(u, x) = k * (u0 - u) * s(x),   s(x) = 1 - x  if u <= u0  (charging)
//!                                   s(x) = x      if u >  u0  (discharging)
//! ```
//!
//! so a price below the nominal `u0` raises demand until the state
//! saturates at 1, a price above it lowers demand until the state drains
//! to 0, and `u = u0` is a fixed point. One hourly step is
//!
//! ```text
//! Y  = max(0, B + dD(u, x))
//! x' = clamp(x + (Y - B) * dt / C [+ sigma * sqrt(dt) * xi], 0, 1)
//! ```
//!
//! with `xi` a standard-normal draw in the stochastic variant. The noise
//! enters the state only; the demand output is computed from the pre-noise
//! state, so the zero-noise stochastic step reproduces the deterministic
//! step bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::scalar::Real;
use crate::series::{Series, SeriesError, SeriesLabel};

#[derive(Debug, Error, PartialEq)]
pub enum FfError {
    #[error("invalid parameter {name}: {value} ({requirement})")]
    InvalidParam {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("{name} = {value} is outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("series length mismatch: prices has {prices} samples, baseline has {baseline}")]
    LengthMismatch { prices: usize, baseline: usize },
    #[error("series start hours differ: prices at {prices}, baseline at {baseline}")]
    StartMismatch { prices: i64, baseline: i64 },
    #[error("rollout requires at least one sample")]
    EmptyHorizon,
    #[error("at hour offset {index}: {source}")]
    AtHour {
        index: usize,
        #[source]
        source: Box<FfError>,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Parameters of the flexibility function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexParams<T> {
    /// Energy-state capacity in unit-demand-hours: how much cumulative
    /// demand deviation moves the state across its full range.
    pub capacity: T,
    /// Demand response per unit price deviation (dimensionless gain).
    pub sensitivity: T,
    /// Nominal price in `[0, 1]`; the fixed point of the price response.
    pub ref_price: T,
    /// Diffusion magnitude on the state, per sqrt(hour).
    pub noise_sigma: T,
    /// Integration step in hours.
    pub dt_hours: T,
}

impl<T: Real> FlexParams<T> {
    pub fn new(
        capacity: T,
        sensitivity: T,
        ref_price: T,
        noise_sigma: T,
        dt_hours: T,
    ) -> Result<Self, FfError> {
        let check = |ok: bool, name: &'static str, value: T, requirement: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(FfError::InvalidParam {
                    name,
                    value: value.as_f64(),
                    requirement,
                })
            }
        };
        check(capacity > T::zero(), "capacity", capacity, "must be > 0")?;
        check(
            sensitivity >= T::zero(),
            "sensitivity",
            sensitivity,
            "must be >= 0",
        )?;
        check(
            ref_price >= T::zero() && ref_price <= T::one(),
            "ref_price",
            ref_price,
            "must lie in [0, 1]",
        )?;
        check(
            noise_sigma >= T::zero(),
            "noise_sigma",
            noise_sigma,
            "must be >= 0",
        )?;
        check(dt_hours > T::zero(), "dt_hours", dt_hours, "must be > 0")?;
        Ok(Self {
            capacity,
            sensitivity,
            ref_price,
            noise_sigma,
            dt_hours,
        })
    }

    /// Copy with the diffusion zeroed; the optimizers act on this skeleton.
    pub fn deterministic(&self) -> Self {
        Self {
            noise_sigma: T::zero(),
            ..*self
        }
    }
}

/// State of flexibility, a scalar in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexState<T> {
    x: T,
}

impl<T: Real> FlexState<T> {
    pub fn new(x: T) -> Result<Self, FfError> {
        check_unit("state x", x)?;
        Ok(Self { x })
    }

    /// Construct from a value already known to lie in `[0, 1]`.
    pub(crate) fn from_clamped(x: T) -> Self {
        debug_assert!(x >= T::zero() && x <= T::one());
        Self { x }
    }

    pub fn x(&self) -> T {
        self.x
    }
}

fn check_unit<T: Real>(name: &'static str, v: T) -> Result<(), FfError> {
    if v.is_finite() && v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(FfError::Domain {
            name,
            value: v.as_f64(),
        })
    }
}

/// Demand deviation from baseline at price `u` and state `x`.
///
/// Zero at `u = ref_price`, strictly decreasing in `u` elsewhere, and
/// saturating as the state approaches the relevant bound: charging
/// (`u < u0`) scales with the headroom `1 - x`, discharging with the
/// stored flexibility `x`.
pub fn delta_demand<T: Real>(u: T, x: T, p: &FlexParams<T>) -> Result<T, FfError> {
    check_unit("price u", u)?;
    check_unit("state x", x)?;
    let drive = p.ref_price - u;
    let scale = if drive >= T::zero() { T::one() - x } else { x };
    Ok(p.sensitivity * drive * scale)
}

#[derive(Debug, Clone, Copy)]
struct StepOutcome<T> {
    state: FlexState<T>,
    demand: T,
    state_clamped: bool,
    demand_floored: bool,
}

/// Shared kernel for both step variants; `noise` is the already-scaled
/// diffusion increment (zero for the deterministic step).
fn step_core<T: Real>(
    state: FlexState<T>,
    u: T,
    b: T,
    p: &FlexParams<T>,
    noise: T,
) -> Result<StepOutcome<T>, FfError> {
    if !b.is_finite() || b < T::zero() {
        return Err(FfError::Domain {
            name: "baseline b",
            value: b.as_f64(),
        });
    }
    let dd = delta_demand(u, state.x(), p)?;
    let raw_demand = b + dd;
    let demand_floored = raw_demand < T::zero();
    let demand = if demand_floored { T::zero() } else { raw_demand };
    let raw_next = state.x() + (demand - b) * p.dt_hours / p.capacity + noise;
    let state_clamped = raw_next < T::zero() || raw_next > T::one();
    let next = raw_next.clamp_to(T::zero(), T::one());
    Ok(StepOutcome {
        state: FlexState::from_clamped(next),
        demand,
        state_clamped,
        demand_floored,
    })
}

/// One deterministic hourly step: returns the next state and the realized
/// demand `Y = max(0, b + dD)`.
pub fn step_deterministic<T: Real>(
    state: FlexState<T>,
    u: T,
    b: T,
    p: &FlexParams<T>,
) -> Result<(FlexState<T>, T), FfError> {
    let out = step_core(state, u, b, p, T::zero())?;
    Ok((out.state, out.demand))
}

/// One Euler-Maruyama step: the state update gains `sigma * sqrt(dt) * xi`
/// with `xi` drawn from `StandardNormal` through the supplied generator.
///
/// The draw is taken unconditionally so the generator advances the same
/// way regardless of `noise_sigma`; with `noise_sigma = 0` the result
/// equals [`step_deterministic`] bit for bit.
pub fn step_stochastic<T: Real, R: Rng + ?Sized>(
    state: FlexState<T>,
    u: T,
    b: T,
    p: &FlexParams<T>,
    rng: &mut R,
) -> Result<(FlexState<T>, T), FfError> {
    let xi: f64 = rng.sample(StandardNormal);
    let noise = p.noise_sigma * p.dt_hours.sqrt() * T::of(xi);
    let out = step_core(state, u, b, p, noise)?;
    Ok((out.state, out.demand))
}

/// How a [`rollout`] advances the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Deterministic,
    /// Euler-Maruyama with a `ChaCha8Rng` seeded from `seed`.
    Stochastic { seed: u64 },
}

/// Result of folding the step map over a price/baseline horizon.
#[derive(Debug, Clone)]
pub struct Rollout<T> {
    /// Realized demand, one sample per input hour.
    pub demand: Series<T>,
    /// State trajectory including the initial state (length `N + 1`).
    pub states: Vec<FlexState<T>>,
    /// Number of steps whose state update hit a bound.
    pub state_clamps: u32,
    /// Number of steps whose demand was floored at zero.
    pub demand_floors: u32,
}

/// Simulate the flexibility function over a price and baseline horizon.
pub fn rollout<T: Real>(
    x0: FlexState<T>,
    prices: &Series<T>,
    baseline: &Series<T>,
    p: &FlexParams<T>,
    mode: RolloutMode,
) -> Result<Rollout<T>, FfError> {
    if prices.len() != baseline.len() {
        return Err(FfError::LengthMismatch {
            prices: prices.len(),
            baseline: baseline.len(),
        });
    }
    if prices.start_hour() != baseline.start_hour() {
        return Err(FfError::StartMismatch {
            prices: prices.start_hour(),
            baseline: baseline.start_hour(),
        });
    }
    if prices.is_empty() {
        return Err(FfError::EmptyHorizon);
    }

    let mut rng = match mode {
        RolloutMode::Deterministic => None,
        RolloutMode::Stochastic { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };

    let n = prices.len();
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0);
    let mut demand = Vec::with_capacity(n);
    let mut state_clamps = 0u32;
    let mut demand_floors = 0u32;
    let mut state = x0;

    for t in 0..n {
        let noise = match rng.as_mut() {
            Some(rng) => {
                let xi: f64 = rng.sample(StandardNormal);
                p.noise_sigma * p.dt_hours.sqrt() * T::of(xi)
            }
            None => T::zero(),
        };
        let out = step_core(state, prices.at(t), baseline.at(t), p, noise).map_err(|e| {
            FfError::AtHour {
                index: t,
                source: Box::new(e),
            }
        })?;
        if out.state_clamped {
            state_clamps += 1;
        }
        if out.demand_floored {
            demand_floors += 1;
        }
        state = out.state;
        states.push(state);
        demand.push(out.demand);
    }

    Ok(Rollout {
        demand: Series::new(SeriesLabel::DemandPred, prices.start_hour(), demand)?,
        states,
        state_clamps,
        demand_floors,
    })
}
