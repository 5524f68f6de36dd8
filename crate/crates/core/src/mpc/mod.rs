//! Storage-tank model predictive control.
//!
//! A two-node (top/bottom) linear tank with a heat pump charges against a
//! time-varying penalty signal. The controller solves, at each hour, the
//! convex quadratic program
//!
//! ```text
//! minimize   sum_t penalty_t * p_t * dt
//!          + slack_weight * sum_t eps_t^2
//!          + terminal_weight * (t_top_N - t_term)^2
//! subject to tank dynamics,  0 <= p_t <= p_max,
//!            t_min - eps_t <= t_top_t <= t_max + eps_t,  eps_t >= 0
//! ```
//!
//! with the state trajectory condensed into affine functions of the power
//! schedule, and applies the first control.

mod qp;

pub use qp::KktResiduals;

use thiserror::Error;

use crate::scalar::Real;
use crate::series::{Series, SeriesError, SeriesLabel};

use qp::{qp_objective, solve_qp, Mat, QpProblem};

/// Largest KKT residual a solve may report and still be returned as Ok.
pub const KKT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MpcError<T: Real> {
    #[error("invalid tank model parameter {name}: {value} ({requirement})")]
    InvalidModel {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("invalid controller config: {0}")]
    InvalidConfig(&'static str),
    #[error("electrical power {value} outside [0, {p_max}]")]
    PowerOutOfBounds { value: f64, p_max: f64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("{name} has {len} samples but the solve needs {needed}")]
    HorizonTooShort {
        name: &'static str,
        len: usize,
        needed: usize,
    },
    #[error("series start hours differ: {left} vs {right}")]
    StartMismatch { left: i64, right: i64 },
    #[error("qp stalled after {iterations} iterations (max kkt residual {kkt_max:e}); best iterate attached")]
    Stalled {
        iterations: usize,
        kkt_max: f64,
        best: Box<MpcSolution<T>>,
    },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Two-node storage tank driven by a heat pump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankModel<T> {
    /// Thermal capacitance of the top node, kWh/degC.
    pub c_top: T,
    /// Thermal capacitance of the bottom node, kWh/degC.
    pub c_bot: T,
    /// Loss coefficient of the top node to ambient, kW/degC.
    pub ua_top: T,
    /// Loss coefficient of the bottom node to ambient, kW/degC.
    pub ua_bot: T,
    /// Inter-node exchange coefficient, kW/degC.
    pub k_mix: T,
    /// Heat-pump coefficient of performance.
    pub cop: T,
    /// Maximum electrical power, kW.
    pub p_max: T,
    /// Control interval, hours.
    pub dt_hours: T,
}

impl<T: Real> TankModel<T> {
    pub fn new(
        c_top: T,
        c_bot: T,
        ua_top: T,
        ua_bot: T,
        k_mix: T,
        cop: T,
        p_max: T,
        dt_hours: T,
    ) -> Result<Self, MpcError<T>> {
        let check = |ok: bool, name: &'static str, value: T, requirement: &'static str| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(MpcError::InvalidModel {
                    name,
                    value: value.as_f64(),
                    requirement,
                })
            }
        };
        check(c_top > T::zero(), "c_top", c_top, "must be > 0")?;
        check(c_bot > T::zero(), "c_bot", c_bot, "must be > 0")?;
        check(ua_top >= T::zero(), "ua_top", ua_top, "must be >= 0")?;
        check(ua_bot >= T::zero(), "ua_bot", ua_bot, "must be >= 0")?;
        check(k_mix >= T::zero(), "k_mix", k_mix, "must be >= 0")?;
        check(cop > T::zero(), "cop", cop, "must be > 0")?;
        check(p_max > T::zero(), "p_max", p_max, "must be > 0")?;
        check(dt_hours > T::zero(), "dt_hours", dt_hours, "must be > 0")?;
        Ok(Self {
            c_top,
            c_bot,
            ua_top,
            ua_bot,
            k_mix,
            cop,
            p_max,
            dt_hours,
        })
    }
}

/// Node temperatures, degC. Transients may invert the stratification
/// ordering; the mixing dynamics restore it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState<T> {
    pub t_top: T,
    pub t_bot: T,
}

impl<T: Real> TankState<T> {
    pub fn new(t_top: T, t_bot: T) -> Result<Self, MpcError<T>> {
        if !t_top.is_finite() || !t_bot.is_finite() {
            return Err(MpcError::NonFinite("tank state"));
        }
        Ok(Self { t_top, t_bot })
    }
}

/// Controller horizon, comfort band, and weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcConfig<T> {
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Comfort band on the top-node temperature, degC.
    pub t_min: T,
    pub t_max: T,
    /// Quadratic penalty on comfort violation, cost/degC^2.
    pub slack_weight: T,
    /// Quadratic penalty pulling the terminal top temperature to
    /// `t_term`, cost/degC^2.
    pub terminal_weight: T,
    /// Terminal setpoint, degC.
    pub t_term: T,
}

impl<T: Real> MpcConfig<T> {
    /// `t_term` defaults to the middle of the comfort band.
    pub fn new(
        horizon: usize,
        t_min: T,
        t_max: T,
        slack_weight: T,
        terminal_weight: T,
        t_term: Option<T>,
    ) -> Result<Self, MpcError<T>> {
        if horizon < 1 {
            return Err(MpcError::InvalidConfig("horizon must be >= 1"));
        }
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return Err(MpcError::InvalidConfig("require t_min < t_max"));
        }
        if !(slack_weight.is_finite() && slack_weight >= T::zero()) {
            return Err(MpcError::InvalidConfig("slack_weight must be >= 0"));
        }
        if !(terminal_weight.is_finite() && terminal_weight >= T::zero()) {
            return Err(MpcError::InvalidConfig("terminal_weight must be >= 0"));
        }
        let t_term = t_term.unwrap_or((t_min + t_max) * T::of(0.5));
        if !t_term.is_finite() {
            return Err(MpcError::InvalidConfig("t_term must be finite"));
        }
        Ok(Self {
            horizon,
            t_min,
            t_max,
            slack_weight,
            terminal_weight,
            t_term,
        })
    }
}

/// Exogenous inputs to the tank.
#[derive(Debug, Clone)]
pub struct Disturbances<T> {
    /// Ambient temperature, degC.
    pub ambient: Series<T>,
    /// Heat drawn from the top node, kW.
    pub load: Series<T>,
}

/// One explicit-Euler step of the two-node tank.
pub fn tank_step<T: Real>(
    s: TankState<T>,
    p_elec: T,
    amb: T,
    load: T,
    m: &TankModel<T>,
) -> Result<TankState<T>, MpcError<T>> {
    if !(p_elec.is_finite() && p_elec >= T::zero() && p_elec <= m.p_max) {
        return Err(MpcError::PowerOutOfBounds {
            value: p_elec.as_f64(),
            p_max: m.p_max.as_f64(),
        });
    }
    if !amb.is_finite() || !load.is_finite() {
        return Err(MpcError::NonFinite("disturbance"));
    }
    let mix = m.k_mix * (s.t_top - s.t_bot);
    let t_top = s.t_top
        + m.dt_hours / m.c_top * (m.cop * p_elec - m.ua_top * (s.t_top - amb) - load - mix);
    let t_bot = s.t_bot + m.dt_hours / m.c_bot * (mix - m.ua_bot * (s.t_bot - amb));
    Ok(TankState { t_top, t_bot })
}

/// Solution of one finite-horizon solve.
#[derive(Debug, Clone)]
pub struct MpcSolution<T> {
    /// Optimal power schedule, within `[0, p_max]`.
    pub powers: Series<T>,
    /// Predicted state trajectory including the initial state
    /// (length `horizon + 1`), obtained by rolling [`tank_step`] over the
    /// returned powers.
    pub states: Vec<TankState<T>>,
    /// Full objective value (energy, slack, and terminal terms).
    pub cost: T,
    /// Per-hour comfort slack, degC.
    pub slacks: Vec<T>,
    /// First-order optimality residuals of the underlying program.
    pub kkt: KktResiduals<T>,
    /// Interior-point iterations.
    pub iterations: usize,
}

struct Condensed<T> {
    /// Zero-input top-temperature response, hours 1..=N.
    alpha_top: Vec<T>,
    /// `imp[d]` = top-temperature response at `d + 1` steps after a unit
    /// power impulse.
    imp_top: Vec<T>,
}

fn condense<T: Real>(
    s0: TankState<T>,
    ambient: &[T],
    load: &[T],
    m: &TankModel<T>,
    n: usize,
) -> Condensed<T> {
    let dt = m.dt_hours;
    let a11 = T::one() - dt * (m.ua_top + m.k_mix) / m.c_top;
    let a12 = dt * m.k_mix / m.c_top;
    let a21 = dt * m.k_mix / m.c_bot;
    let a22 = T::one() - dt * (m.k_mix + m.ua_bot) / m.c_bot;
    let b_top = dt * m.cop / m.c_top;

    let mut alpha_top = Vec::with_capacity(n);
    let (mut x1, mut x2) = (s0.t_top, s0.t_bot);
    for t in 0..n {
        let e1 = dt / m.c_top * (m.ua_top * ambient[t] - load[t]);
        let e2 = dt / m.c_bot * (m.ua_bot * ambient[t]);
        let y1 = a11 * x1 + a12 * x2 + e1;
        let y2 = a21 * x1 + a22 * x2 + e2;
        x1 = y1;
        x2 = y2;
        alpha_top.push(x1);
    }

    let mut imp_top = Vec::with_capacity(n);
    let (mut v1, mut v2) = (b_top, T::zero());
    imp_top.push(v1);
    for _ in 1..n {
        let w1 = a11 * v1 + a12 * v2;
        let w2 = a21 * v1 + a22 * v2;
        v1 = w1;
        v2 = w2;
        imp_top.push(v1);
    }

    Condensed { alpha_top, imp_top }
}

impl<T: Real> Condensed<T> {
    /// Sensitivity of `t_top` at step `t` (1-based) to `p_j`.
    fn sens(&self, t: usize, j: usize) -> T {
        if j < t {
            self.imp_top[t - 1 - j]
        } else {
            T::zero()
        }
    }
}

/// Solve one finite-horizon problem over the first `cfg.horizon` samples
/// of the penalty and disturbance series.
pub fn mpc_solve<T: Real>(
    s0: TankState<T>,
    penalty: &Series<T>,
    dist: &Disturbances<T>,
    m: &TankModel<T>,
    cfg: &MpcConfig<T>,
) -> Result<MpcSolution<T>, MpcError<T>> {
    let n = cfg.horizon;
    if n < 1 {
        return Err(MpcError::InvalidConfig("horizon must be >= 1"));
    }
    if !s0.t_top.is_finite() || !s0.t_bot.is_finite() {
        return Err(MpcError::NonFinite("initial tank state"));
    }
    for (name, len) in [
        ("penalty", penalty.len()),
        ("ambient", dist.ambient.len()),
        ("load", dist.load.len()),
    ] {
        if len < n {
            return Err(MpcError::HorizonTooShort {
                name,
                len,
                needed: n,
            });
        }
    }

    let ambient = &dist.ambient.values()[..n];
    let load = &dist.load.values()[..n];
    let cond = condense(s0, ambient, load, m, n);

    let with_slack = cfg.slack_weight > T::zero();
    let nv = if with_slack { 2 * n } else { n };
    let nc = if with_slack { 5 * n } else { 2 * n };

    let mut q = Mat::zeros(nv, nv);
    let mut c = vec![T::zero(); nv];
    let mut g = Mat::zeros(nc, nv);
    let mut h = vec![T::zero(); nc];

    let dt = m.dt_hours;
    for j in 0..n {
        c[j] = penalty.at(j) * dt;
    }
    if with_slack {
        let two_sw = T::of(2.0) * cfg.slack_weight;
        for t in 0..n {
            *q.at_mut(n + t, n + t) = two_sw;
        }
    }
    let term_const = if cfg.terminal_weight > T::zero() {
        let gap = cond.alpha_top[n - 1] - cfg.t_term;
        let two_tw = T::of(2.0) * cfg.terminal_weight;
        for i in 0..n {
            let mi = cond.sens(n, i);
            c[i] = c[i] + two_tw * gap * mi;
            for j in 0..=i {
                let v = q.at(i, j) + two_tw * mi * cond.sens(n, j);
                *q.at_mut(i, j) = v;
                if i != j {
                    *q.at_mut(j, i) = v;
                }
            }
        }
        cfg.terminal_weight * gap * gap
    } else {
        T::zero()
    };

    // Power box.
    let mut row = 0;
    for j in 0..n {
        *g.at_mut(row, j) = T::one();
        h[row] = m.p_max;
        row += 1;
        *g.at_mut(row, j) = -T::one();
        h[row] = T::zero();
        row += 1;
    }
    if with_slack {
        for t in 1..=n {
            // eps_t >= 0
            *g.at_mut(row, n + t - 1) = -T::one();
            h[row] = T::zero();
            row += 1;
            // t_top_t - eps_t <= t_max
            for j in 0..t {
                *g.at_mut(row, j) = cond.sens(t, j);
            }
            *g.at_mut(row, n + t - 1) = -T::one();
            h[row] = cfg.t_max - cond.alpha_top[t - 1];
            row += 1;
            // -t_top_t - eps_t <= -t_min
            for j in 0..t {
                *g.at_mut(row, j) = -cond.sens(t, j);
            }
            *g.at_mut(row, n + t - 1) = -T::one();
            h[row] = cond.alpha_top[t - 1] - cfg.t_min;
            row += 1;
        }
    }
    debug_assert_eq!(row, nc);

    let problem = QpProblem { q, c, g, h };
    let sol = solve_qp(&problem, None);

    let mut powers: Vec<T> = sol.z[..n]
        .iter()
        .map(|&p| p.clamp_to(T::zero(), m.p_max))
        .collect();
    // Snap values that are within solver precision of the bounds.
    for p in powers.iter_mut() {
        if p.abs() < T::of(1e-12) {
            *p = T::zero();
        }
        if (*p - m.p_max).abs() < T::of(1e-12) {
            *p = m.p_max;
        }
    }

    let mut states = Vec::with_capacity(n + 1);
    states.push(s0);
    let mut s = s0;
    for t in 0..n {
        s = tank_step(s, powers[t], ambient[t], load[t], m)?;
        states.push(s);
    }

    let slacks: Vec<T> = if with_slack {
        sol.z[n..2 * n].iter().map(|&e| e.max(T::zero())).collect()
    } else {
        states[1..]
            .iter()
            .map(|st| {
                (cfg.t_min - st.t_top)
                    .max(st.t_top - cfg.t_max)
                    .max(T::zero())
            })
            .collect()
    };

    let cost = qp_objective(&problem, &sol.z) + term_const;
    let solution = MpcSolution {
        powers: Series::new(SeriesLabel::Power, penalty.start_hour(), powers)?,
        states,
        cost,
        slacks,
        kkt: sol.kkt,
        iterations: sol.iterations,
    };

    if sol.kkt.max().as_f64() > KKT_TOL {
        return Err(MpcError::Stalled {
            iterations: sol.iterations,
            kkt_max: sol.kkt.max().as_f64(),
            best: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Closed-loop trajectory from repeatedly solving and applying the first
/// control.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun<T> {
    pub start_hour: i64,
    /// State at the start of each simulated hour.
    pub t_top: Vec<T>,
    pub t_bot: Vec<T>,
    /// Power applied during each hour.
    pub power: Vec<T>,
    pub ambient: Vec<T>,
    pub load: Vec<T>,
    pub penalty: Vec<T>,
    pub final_state: TankState<T>,
    /// Worst KKT residual of each hourly solve.
    pub per_solve_kkt: Vec<T>,
    /// Largest comfort slack predicted by any solve.
    pub max_slack: T,
    pub iterations: u64,
    /// `sum_h penalty_h * power_h * dt`.
    pub total_penalty_cost: T,
}

impl<T: Real> ClosedLoopRun<T> {
    pub fn max_kkt(&self) -> T {
        self.per_solve_kkt
            .iter()
            .fold(T::zero(), |a, &v| a.max(v))
    }
}

/// Receding-horizon simulation for `sim_hours` hours; the penalty and
/// disturbance series must cover `sim_hours + cfg.horizon` samples.
pub fn receding_horizon_run<T: Real>(
    s0: TankState<T>,
    penalty: &Series<T>,
    dist: &Disturbances<T>,
    m: &TankModel<T>,
    cfg: &MpcConfig<T>,
    sim_hours: usize,
) -> Result<ClosedLoopRun<T>, MpcError<T>> {
    if sim_hours < 1 {
        return Err(MpcError::InvalidConfig("sim_hours must be >= 1"));
    }
    let needed = sim_hours + cfg.horizon;
    for (name, len) in [
        ("penalty", penalty.len()),
        ("ambient", dist.ambient.len()),
        ("load", dist.load.len()),
    ] {
        if len < needed {
            return Err(MpcError::HorizonTooShort { name, len, needed });
        }
    }
    if penalty.start_hour() != dist.ambient.start_hour()
        || penalty.start_hour() != dist.load.start_hour()
    {
        return Err(MpcError::StartMismatch {
            left: penalty.start_hour(),
            right: dist.ambient.start_hour(),
        });
    }

    let mut run = ClosedLoopRun {
        start_hour: penalty.start_hour(),
        t_top: Vec::with_capacity(sim_hours),
        t_bot: Vec::with_capacity(sim_hours),
        power: Vec::with_capacity(sim_hours),
        ambient: Vec::with_capacity(sim_hours),
        load: Vec::with_capacity(sim_hours),
        penalty: Vec::with_capacity(sim_hours),
        final_state: s0,
        per_solve_kkt: Vec::with_capacity(sim_hours),
        max_slack: T::zero(),
        iterations: 0,
        total_penalty_cost: T::zero(),
    };

    let mut state = s0;
    for hour in 0..sim_hours {
        let pen_win = penalty.window(hour, cfg.horizon);
        let dist_win = Disturbances {
            ambient: dist.ambient.window(hour, cfg.horizon),
            load: dist.load.window(hour, cfg.horizon),
        };
        let sol = mpc_solve(state, &pen_win, &dist_win, m, cfg)?;
        let p = sol.powers.at(0);
        let amb = dist.ambient.at(hour);
        let load = dist.load.at(hour);

        run.t_top.push(state.t_top);
        run.t_bot.push(state.t_bot);
        run.power.push(p);
        run.ambient.push(amb);
        run.load.push(load);
        run.penalty.push(penalty.at(hour));
        run.per_solve_kkt.push(sol.kkt.max());
        run.max_slack = run
            .max_slack
            .max(sol.slacks.iter().fold(T::zero(), |a, &v| a.max(v)));
        run.iterations += sol.iterations as u64;
        run.total_penalty_cost = run.total_penalty_cost + penalty.at(hour) * p * m.dt_hours;

        state = tank_step(state, p, amb, load, m)?;
    }
    run.final_state = state;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lossless_model(p_max: f64) -> TankModel<f64> {
        TankModel::new(5.0, 5.0, 0.0, 0.0, 0.0, 3.0, p_max, 1.0).unwrap()
    }

    fn default_model() -> TankModel<f64> {
        TankModel::new(5.0, 5.0, 0.05, 0.05, 0.5, 3.0, 5.0, 1.0).unwrap()
    }

    fn const_series(label: SeriesLabel, v: f64, n: usize) -> Series<f64> {
        Series::new(label, 0, vec![v; n]).unwrap()
    }

    #[test]
    fn tank_step_equilibrium_fixed_point() {
        let m = default_model();
        let s = TankState::new(20.0, 20.0).unwrap();
        let next = tank_step(s, 0.0, 20.0, 0.0, &m).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn tank_step_mixing_hand_value() {
        let m = TankModel::new(5.0, 5.0, 0.0, 0.0, 0.5, 3.0, 5.0, 1.0).unwrap();
        let s = TankState::new(60.0, 40.0).unwrap();
        let next = tank_step(s, 0.0, 20.0, 0.0, &m).unwrap();
        assert_relative_eq!(next.t_top, 58.0, epsilon = 1e-12);
        assert_relative_eq!(next.t_bot, 42.0, epsilon = 1e-12);
    }

    #[test]
    fn tank_step_superposition_in_power() {
        let m = default_model();
        let p1 = 1.0;
        let p2 = 2.5;
        let mut gaps = Vec::new();
        for (t_top, t_bot) in [(55.0, 45.0), (70.0, 30.0), (20.0, 60.0)] {
            let s = TankState::new(t_top, t_bot).unwrap();
            let a = tank_step(s, p1 + p2, 5.0, 1.0, &m).unwrap();
            let b = tank_step(s, p1, 5.0, 1.0, &m).unwrap();
            gaps.push(a.t_top - b.t_top);
        }
        assert_relative_eq!(gaps[0], gaps[1], epsilon = 1e-12);
        assert_relative_eq!(gaps[1], gaps[2], epsilon = 1e-12);
    }

    #[test]
    fn tank_step_rejects_out_of_range_power() {
        let m = default_model();
        let s = TankState::new(55.0, 45.0).unwrap();
        assert!(matches!(
            tank_step(s, 5.1, 10.0, 0.0, &m),
            Err(MpcError::PowerOutOfBounds { .. })
        ));
        assert!(matches!(
            tank_step(s, -0.1, 10.0, 0.0, &m),
            Err(MpcError::PowerOutOfBounds { .. })
        ));
    }

    #[test]
    fn idle_when_heating_only_adds_cost() {
        // Loss-free tank, comfortable start, positive penalties: stay off.
        let m = lossless_model(5.0);
        let cfg = MpcConfig::new(6, 50.0, 70.0, 1e6, 0.0, None).unwrap();
        let s0 = TankState::new(60.0, 55.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 20.0, 6),
            load: const_series(SeriesLabel::Load, 0.0, 6),
        };
        let penalty = const_series(SeriesLabel::Price, 0.5, 6);
        let sol = mpc_solve(s0, &penalty, &dist, &m, &cfg).unwrap();
        for &p in sol.powers.values() {
            assert!(p.abs() < 1e-7, "p = {p}");
        }
        for &e in &sol.slacks {
            assert!(e < 1e-7);
        }
        assert!(sol.kkt.max() < KKT_TOL);
    }

    #[test]
    fn horizon_two_bound_oracle() {
        // Comfort floor reachable only at full power in hour 1; optimum at
        // the (p_max, 0) vertex. Oracle enumerates the four bound-valued
        // schedules with slack cost charged on violations.
        let m = lossless_model(2.0);
        let cfg = MpcConfig::new(2, 51.2, 100.0, 1e6, 0.0, None).unwrap();
        let s0 = TankState::new(50.0, 50.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 20.0, 2),
            load: const_series(SeriesLabel::Load, 0.0, 2),
        };
        let penalty = const_series(SeriesLabel::Price, 1.0, 2);
        let sol = mpc_solve(s0, &penalty, &dist, &m, &cfg).unwrap();

        let mut oracle = f64::INFINITY;
        for p0 in [0.0, 2.0] {
            for p1 in [0.0, 2.0] {
                let s1 = tank_step(s0, p0, 20.0, 0.0, &m).unwrap();
                let s2 = tank_step(s1, p1, 20.0, 0.0, &m).unwrap();
                let e1 = (51.2f64 - s1.t_top).max(0.0);
                let e2 = (51.2f64 - s2.t_top).max(0.0);
                let cost = p0 + p1 + 1e6 * (e1 * e1 + e2 * e2);
                oracle = oracle.min(cost);
            }
        }
        assert!(
            sol.cost <= oracle + 1e-6,
            "qp cost {} vs oracle {}",
            sol.cost,
            oracle
        );
        assert!((sol.powers.at(0) - 2.0).abs() < 1e-4, "{:?}", sol.powers);
    }

    #[test]
    fn low_penalty_hour_takes_all_heating() {
        // A draw in hour 2 forces 5 kWh of electricity somewhere; the
        // cheap first hour should take all of it.
        let m = lossless_model(5.0);
        let cfg = MpcConfig::new(2, 60.0, 100.0, 1e6, 0.0, None).unwrap();
        let s0 = TankState::new(60.0, 50.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 20.0, 2),
            load: Series::new(SeriesLabel::Load, 0, vec![0.0, 15.0]).unwrap(),
        };
        let penalty = Series::new(SeriesLabel::Price, 0, vec![0.1, 1.0]).unwrap();
        let sol = mpc_solve(s0, &penalty, &dist, &m, &cfg).unwrap();
        assert!((sol.powers.at(0) - 5.0).abs() < 1e-4, "{:?}", sol.powers);
        assert!(sol.powers.at(1) < 1e-3, "{:?}", sol.powers);

        // Dense-grid oracle over p0 with the minimum feasible p1.
        let mut oracle = f64::INFINITY;
        for i in 0..=5000 {
            let p0 = 5.0 * i as f64 / 5000.0;
            let p1 = (5.0 - p0).max(0.0).min(5.0);
            let s1 = tank_step(s0, p0, 20.0, 0.0, &m).unwrap();
            let s2 = tank_step(s1, p1, 20.0, 15.0, &m).unwrap();
            let e1 = (60.0f64 - s1.t_top).max(0.0);
            let e2 = (60.0f64 - s2.t_top).max(0.0);
            let cost = 0.1 * p0 + 1.0 * p1 + 1e6 * (e1 * e1 + e2 * e2);
            oracle = oracle.min(cost);
        }
        assert!(sol.cost <= oracle + 1e-6, "{} vs {}", sol.cost, oracle);
    }

    #[test]
    fn penalty_scaling_leaves_schedule_unchanged() {
        // With slack and terminal terms zero-weighted the objective is
        // linear; positive scaling cannot move the argmin.
        let m = default_model();
        let cfg = MpcConfig::new(4, 50.0, 70.0, 0.0, 0.0, None).unwrap();
        let s0 = TankState::new(60.0, 55.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 10.0, 4),
            load: const_series(SeriesLabel::Load, 1.0, 4),
        };
        let base = Series::new(SeriesLabel::Price, 0, vec![0.2, 0.6, 0.4, 0.8]).unwrap();
        let scaled = Series::new(
            SeriesLabel::Price,
            0,
            base.values().iter().map(|v| v * 0.9).collect(),
        )
        .unwrap();
        let a = mpc_solve(s0, &base, &dist, &m, &cfg).unwrap();
        let b = mpc_solve(s0, &scaled, &dist, &m, &cfg).unwrap();
        for (x, y) in a.powers.values().iter().zip(b.powers.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn tight_slack_weight_keeps_comfort() {
        let m = default_model();
        let cfg = MpcConfig::new(8, 50.0, 70.0, 1e9, 0.5, None).unwrap();
        let s0 = TankState::new(52.0, 48.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 5.0, 8),
            load: const_series(SeriesLabel::Load, 2.0, 8),
        };
        let penalty = const_series(SeriesLabel::Price, 0.5, 8);
        let sol = mpc_solve(s0, &penalty, &dist, &m, &cfg).unwrap();
        let max_slack = sol.slacks.iter().cloned().fold(0.0f64, f64::max);
        assert!(max_slack <= 1e-3, "max slack {max_slack}");
        assert!(sol.kkt.max() < KKT_TOL, "kkt {:?}", sol.kkt);
    }

    #[test]
    fn dynamics_equalities_hold_exactly() {
        let m = default_model();
        let cfg = MpcConfig::new(6, 50.0, 70.0, 1e3, 1.0, None).unwrap();
        let s0 = TankState::new(58.0, 52.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 8.0, 6),
            load: const_series(SeriesLabel::Load, 2.5, 6),
        };
        let penalty = Series::new(SeriesLabel::Price, 0, vec![0.9, 0.1, 0.5, 0.7, 0.2, 0.4])
            .unwrap();
        let sol = mpc_solve(s0, &penalty, &dist, &m, &cfg).unwrap();
        let mut s = s0;
        for t in 0..6 {
            s = tank_step(s, sol.powers.at(t), 8.0, 2.5, &m).unwrap();
            assert_eq!(s, sol.states[t + 1]);
        }
    }

    #[test]
    fn receding_horizon_converges_under_constant_inputs() {
        let m = default_model();
        let cfg = MpcConfig::new(12, 50.0, 70.0, 1e3, 1.0, None).unwrap();
        let s0 = TankState::new(55.0, 50.0).unwrap();
        let n = 240 + 12;
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 10.0, n),
            load: const_series(SeriesLabel::Load, 2.0, n),
        };
        let penalty = const_series(SeriesLabel::Price, 0.4, n);
        let run = receding_horizon_run(s0, &penalty, &dist, &m, &cfg, 240).unwrap();
        for h in 228..240 {
            assert!(
                (run.power[h] - run.power[h - 1]).abs() < 1e-6,
                "hour {h}: {} vs {}",
                run.power[h],
                run.power[h - 1]
            );
        }
    }

    #[test]
    fn nominal_prediction_matches_realized_state() {
        let m = default_model();
        let cfg = MpcConfig::new(4, 50.0, 70.0, 1e3, 1.0, None).unwrap();
        let s0 = TankState::new(57.0, 51.0).unwrap();
        let n = 8;
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 12.0, n),
            load: const_series(SeriesLabel::Load, 1.5, n),
        };
        let penalty = const_series(SeriesLabel::Price, 0.3, n);
        let sol = mpc_solve(s0, &penalty.window(0, 4), &Disturbances {
            ambient: dist.ambient.window(0, 4),
            load: dist.load.window(0, 4),
        }, &m, &cfg).unwrap();
        let realized = tank_step(s0, sol.powers.at(0), 12.0, 1.5, &m).unwrap();
        assert_eq!(sol.states[1], realized);
    }

    #[test]
    fn run_rejects_short_series() {
        let m = default_model();
        let cfg = MpcConfig::new(12, 50.0, 70.0, 1e3, 1.0, None).unwrap();
        let s0 = TankState::new(55.0, 50.0).unwrap();
        let dist = Disturbances {
            ambient: const_series(SeriesLabel::Ambient, 10.0, 20),
            load: const_series(SeriesLabel::Load, 2.0, 20),
        };
        let penalty = const_series(SeriesLabel::Price, 0.4, 20);
        assert!(matches!(
            receding_horizon_run(s0, &penalty, &dist, &m, &cfg, 10),
            Err(MpcError::HorizonTooShort { .. })
        ));
    }
}
