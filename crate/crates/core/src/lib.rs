//! Price-signal generation through a flexibility function, and a
//! storage-tank controller that consumes the generated penalty signal.
//!
//! The crate is organized around four pieces:
//!
//! * [`ff`] — the flexibility function: a price-demand dynamical system
//!   with a normalized state of flexibility, steppable deterministically
//!   or with Euler-Maruyama noise.
//! * [`opt`] — sequential (hour-by-hour) and simultaneous (whole-horizon)
//!   price optimizers over the deterministic flexibility function, with
//!   optional voltage-regulation terms.
//! * [`mpc`] — a two-node storage-tank model and a receding-horizon
//!   controller that shifts load toward low-penalty hours.
//! * [`series`] — uniformly sampled hourly trajectories shared by the
//!   rest.
//!
//! The numeric code is generic over [`scalar::Real`] (`f32` or `f64`);
//! the `*64` aliases below pin the common double-precision case.

pub mod ff;
pub mod mpc;
pub mod opt;
pub mod scalar;
pub mod series;

pub use scalar::Real;

pub type Series64 = series::Series<f64>;
pub type FlexParams64 = ff::FlexParams<f64>;
pub type FlexState64 = ff::FlexState<f64>;
pub type PriceSolution64 = opt::PriceSolution<f64>;
pub type OptConfig64 = opt::OptConfig<f64>;
pub type AncillaryMap64 = opt::AncillaryMap<f64>;
pub type TankModel64 = mpc::TankModel<f64>;
pub type TankState64 = mpc::TankState<f64>;
pub type MpcConfig64 = mpc::MpcConfig<f64>;
