//! The sequential and simultaneous price optimizers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ff::{self, FlexParams, FlexState, RolloutMode};
use crate::scalar::Real;
use crate::series::{Series, SeriesLabel};

use super::nelder_mead::{nelder_mead_box, upsample, NmResult};
use super::scalar_min::grid_golden_min;
use super::{AncillaryMap, CostKind, OptConfig, OptError, OptMode, PriceSolution};

/// Validated optimization horizon: profiles, model, cost shape.
///
/// The optimizers act on the deterministic skeleton of the flexibility
/// function; any configured diffusion is zeroed here.
pub(crate) struct Horizon<'a, T: Real> {
    x0: FlexState<T>,
    baseline: &'a Series<T>,
    d_ref: &'a Series<T>,
    params: FlexParams<T>,
    kind: CostKind,
    anc: Option<&'a AncillaryMap<T>>,
}

impl<'a, T: Real> Horizon<'a, T> {
    pub(crate) fn new(
        x0: FlexState<T>,
        baseline: &'a Series<T>,
        d_ref: &'a Series<T>,
        params: &FlexParams<T>,
        kind: CostKind,
        anc: Option<&'a AncillaryMap<T>>,
    ) -> Result<Self, OptError> {
        if baseline.len() != d_ref.len() {
            return Err(OptError::LengthMismatch {
                left_name: "baseline",
                left: baseline.len(),
                right_name: "demand_ref",
                right: d_ref.len(),
            });
        }
        if baseline.start_hour() != d_ref.start_hour() {
            return Err(OptError::StartMismatch {
                left: baseline.start_hour(),
                right: d_ref.start_hour(),
            });
        }
        if baseline.is_empty() {
            return Err(OptError::InvalidConfig("horizon must have at least one hour"));
        }
        if let Some(anc) = anc {
            if !anc.v_ref.covers(baseline.len()) {
                return Err(OptError::InvalidAncillary(
                    "v_ref series shorter than the horizon",
                ));
            }
            if !anc.u_ref.covers(baseline.len()) {
                return Err(OptError::InvalidAncillary(
                    "u_ref series shorter than the horizon",
                ));
            }
        }
        Ok(Self {
            x0,
            baseline,
            d_ref,
            params: params.deterministic(),
            kind,
            anc,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.baseline.len()
    }

    fn u_ref_at(&self, t: usize) -> T {
        match self.anc {
            Some(anc) => anc.u_ref.at(t),
            None => self.params.ref_price,
        }
    }

    /// Advance one hour at price `u`, returning the next state, the
    /// realized demand, and the stage cost.
    ///
    /// Inputs are validated at construction and by the box bounds, so the
    /// underlying step cannot fail here.
    fn stage(&self, t: usize, x: FlexState<T>, u: T) -> (FlexState<T>, T, T) {
        let (next, y) = ff::step_deterministic(x, u, self.baseline.at(t), &self.params)
            .expect("inputs validated");
        let mut cost = self.kind.cost(y - self.d_ref.at(t));
        if let Some(anc) = self.anc {
            let v = super::voltage_of_demand(y, anc);
            cost = cost + anc.weight_v * self.kind.cost(v - anc.v_ref.at(t));
            cost = cost + anc.weight_u * self.kind.cost(u - anc.u_ref.at(t));
        }
        (next, y, cost)
    }

    /// Full-horizon objective of a price vector.
    ///
    /// Inlined model arithmetic on the hot path; kept bit-identical to
    /// folding [`Horizon::stage`] (a unit test pins the equivalence).
    pub(crate) fn objective(&self, prices: &[T]) -> T {
        debug_assert_eq!(prices.len(), self.n());
        let b = self.baseline.values();
        let dr = self.d_ref.values();
        let p = &self.params;
        let mut x = self.x0.x();
        let mut total = T::zero();
        for t in 0..prices.len() {
            let u = prices[t];
            let drive = p.ref_price - u;
            let scale = if drive >= T::zero() { T::one() - x } else { x };
            let dd = p.sensitivity * drive * scale;
            let raw = b[t] + dd;
            let y = if raw < T::zero() { T::zero() } else { raw };
            let mut cost = self.kind.cost(y - dr[t]);
            if let Some(anc) = self.anc {
                let v = anc.v0 - anc.droop_r * y;
                cost = cost + anc.weight_v * self.kind.cost(v - anc.v_ref.at(t));
                cost = cost + anc.weight_u * self.kind.cost(u - anc.u_ref.at(t));
            }
            total = total + cost;
            x = (x + (y - b[t]) * p.dt_hours / p.capacity).clamp_to(T::zero(), T::one());
        }
        total
    }
}

/// Evaluate the simultaneous objective of an arbitrary price vector.
///
/// This is the exact function the simultaneous solver minimizes: the sum
/// over the horizon of the tracking cost (plus ancillary terms when
/// configured) along the deterministic rollout of `prices`.
pub fn evaluate_horizon<T: Real>(
    x0: FlexState<T>,
    prices: &[T],
    baseline: &Series<T>,
    d_ref: &Series<T>,
    params: &FlexParams<T>,
    kind: CostKind,
    anc: Option<&AncillaryMap<T>>,
) -> Result<T, OptError> {
    let horizon = Horizon::new(x0, baseline, d_ref, params, kind, anc)?;
    if prices.len() != horizon.n() {
        return Err(OptError::LengthMismatch {
            left_name: "prices",
            left: prices.len(),
            right_name: "baseline",
            right: horizon.n(),
        });
    }
    for &u in prices {
        if !(u.is_finite() && u >= T::zero() && u <= T::one()) {
            return Err(OptError::NonFinite("price outside [0, 1]"));
        }
    }
    Ok(horizon.objective(prices))
}

fn sequential_on<T: Real>(
    horizon: &Horizon<'_, T>,
    cfg: &OptConfig<T>,
) -> (Vec<T>, Vec<u64>) {
    let n = horizon.n();
    let mut prices = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    let mut x = horizon.x0;
    for t in 0..n {
        let r = grid_golden_min(
            |u| horizon.stage(t, x, u).2,
            cfg.u_min,
            cfg.u_max,
            cfg.tol,
            cfg.max_iters,
            horizon.u_ref_at(t).clamp_to(cfg.u_min, cfg.u_max),
        );
        let (next, _, _) = horizon.stage(t, x, r.u);
        x = next;
        prices.push(r.u);
        iterations.push(r.iterations);
    }
    (prices, iterations)
}

fn build_solution<T: Real>(
    horizon: &Horizon<'_, T>,
    prices: Vec<T>,
    iterations: Vec<u64>,
    mode: OptMode,
) -> Result<PriceSolution<T>, OptError> {
    let objective = horizon.objective(&prices);
    let price_series = Series::new(SeriesLabel::Price, horizon.baseline.start_hour(), prices)?;
    let roll = ff::rollout(
        horizon.x0,
        &price_series,
        horizon.baseline,
        &horizon.params,
        RolloutMode::Deterministic,
    )?;
    let residuals = (0..horizon.n())
        .map(|t| (roll.demand.at(t) - horizon.d_ref.at(t)).abs())
        .collect();
    Ok(PriceSolution {
        prices: price_series,
        demand: roll.demand,
        objective,
        residuals,
        iterations,
        clamp_events: roll.state_clamps,
        mode,
        ancillary_used: horizon.anc.is_some(),
    })
}

/// Hour-by-hour price generation: each hour's price minimizes that hour's
/// cost through the current state, which then advances with the chosen
/// price.
pub fn sequential_optimize<T: Real>(
    x0: FlexState<T>,
    baseline: &Series<T>,
    d_ref: &Series<T>,
    params: &FlexParams<T>,
    kind: CostKind,
    cfg: &OptConfig<T>,
    anc: Option<&AncillaryMap<T>>,
) -> Result<PriceSolution<T>, OptError> {
    cfg.validate()?;
    let horizon = Horizon::new(x0, baseline, d_ref, params, kind, anc)?;
    let (prices, iterations) = sequential_on(&horizon, cfg);
    build_solution(&horizon, prices, iterations, OptMode::Sequential)
}

/// Whole-horizon price generation: minimizes the summed cost jointly over
/// all hours with a multi-start bounded direct search.
///
/// Start 1 is always the sequential solution and start 2 the constant
/// nominal price; remaining starts are seeded uniform draws. Because the
/// search never returns a point worse than its start, the result is never
/// worse than the sequential solution on the same inputs.
pub fn simultaneous_optimize<T: Real>(
    x0: FlexState<T>,
    baseline: &Series<T>,
    d_ref: &Series<T>,
    params: &FlexParams<T>,
    kind: CostKind,
    cfg: &OptConfig<T>,
    anc: Option<&AncillaryMap<T>>,
) -> Result<PriceSolution<T>, OptError> {
    cfg.validate()?;
    let horizon = Horizon::new(x0, baseline, d_ref, params, kind, anc)?;
    let n = horizon.n();

    let (seq_prices, _) = sequential_on(&horizon, cfg);
    let mut starts: Vec<Vec<T>> = Vec::with_capacity(cfg.n_starts);
    starts.push(seq_prices);
    if cfg.n_starts >= 2 {
        starts.push(vec![params.ref_price.clamp_to(cfg.u_min, cfg.u_max); n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.n_starts {
        let draw: Vec<T> = (0..n)
            .map(|_| {
                let v: f64 = rng.gen();
                cfg.u_min + (cfg.u_max - cfg.u_min) * T::of(v)
            })
            .collect();
        starts.push(draw);
    }

    let mut iterations = Vec::with_capacity(starts.len());
    let mut results: Vec<NmResult<T>> = Vec::with_capacity(starts.len());
    for start in &starts {
        let r = multilevel_search(&horizon, start, cfg);
        iterations.push(r.evals);
        results.push(r);
    }

    // Selection: lowest objective wins; results tying it within tol are
    // eligible and the one with prices closest to the nominal signal is
    // preferred, then the lowest start index. Eligibility never extends
    // above the start-1 result, which keeps the returned objective at or
    // below the sequential solution's.
    let f_bar = results[0].f;
    let f_min = results
        .iter()
        .map(|r| r.f)
        .fold(T::infinity(), |a, b| a.min(b));
    let dist_to_ref = |x: &[T]| -> T {
        x.iter()
            .enumerate()
            .map(|(t, &u)| {
                let d = u - horizon.u_ref_at(t);
                d * d
            })
            .sum()
    };
    let mut chosen = 0;
    let mut chosen_dist = T::infinity();
    if std::env::var("FLEXPRICE_DEBUG_STARTS").is_ok() {
        for (si, r) in results.iter().enumerate() {
            eprintln!(
                "DEBUG start {si}: f = {:?} (bar {:?}, min {:?}) dist = {:?}",
                r.f,
                f_bar,
                f_min,
                dist_to_ref(&r.x)
            );
        }
    }
    for (si, r) in results.iter().enumerate() {
        if r.f <= f_min + cfg.tol && r.f <= f_bar {
            let d = dist_to_ref(&r.x);
            if d < chosen_dist {
                chosen = si;
                chosen_dist = d;
            }
        }
    }
    let prices = results.swap_remove(chosen).x;
    build_solution(&horizon, prices, iterations, OptMode::Simultaneous)
}

/// Coarse-to-fine direct search for one start.
///
/// Coarse levels run the bounded Nelder-Mead over a smooth additive
/// correction: `m` piecewise-linear control offsets, interpolated across
/// the horizon, added to the incumbent and projected onto the box. This
/// finds the coordinated many-hour moves (hold back now, respond later)
/// that axis-aligned steps cannot, while keeping the incumbent's per-hour
/// structure. A full-dimension polish runs last. The zero correction is
/// always a simplex vertex and the polish is seeded with the incumbent,
/// so the result is never worse than the start.
fn multilevel_search<T: Real>(
    horizon: &Horizon<'_, T>,
    start: &[T],
    cfg: &OptConfig<T>,
) -> NmResult<T> {
    let n = start.len();
    let budget = cfg.max_iters as u64;

    let mut best_x: Vec<T> = start
        .iter()
        .map(|&u| u.clamp_to(cfg.u_min, cfg.u_max))
        .collect();
    let mut best_f = horizon.objective(&best_x);
    let mut evals = 1u64;

    // Global levels spread m control points across the whole horizon;
    // periodic levels tile an interpolated daily pattern, which matches
    // the day-structured scenarios the signal is generated for.
    let mut levels: Vec<(usize, bool)> = Vec::new();
    if n > 8 {
        let mut m = 4;
        while m < n / 2 {
            levels.push((m, false));
            m *= 2;
        }
        if n > 30 {
            for m in [6, 12, 24] {
                levels.push((m, true));
            }
        }
    }

    let passes = 2u64;
    if !levels.is_empty() {
        let slice = (budget * 7 / 10) / (passes * levels.len() as u64);
        let range = cfg.u_max - cfg.u_min;
        let mut delta_full = vec![T::zero(); n];
        let mut trial = vec![T::zero(); n];
        let mut day_pattern = vec![T::zero(); 24.min(n)];
        for _ in 0..passes {
            for &(m, periodic) in &levels {
                if evals >= budget {
                    break;
                }
                let incumbent = best_x.clone();
                let expand = |delta: &[T], delta_full: &mut [T], day: &mut [T]| {
                    if periodic {
                        upsample(delta, day);
                        for (i, d) in delta_full.iter_mut().enumerate() {
                            *d = day[i % day.len()];
                        }
                    } else {
                        upsample(delta, delta_full);
                    }
                };
                let r = nelder_mead_box(
                    |delta: &[T]| {
                        expand(delta, &mut delta_full, &mut day_pattern);
                        for i in 0..n {
                            trial[i] =
                                (incumbent[i] + delta_full[i]).clamp_to(cfg.u_min, cfg.u_max);
                        }
                        horizon.objective(&trial)
                    },
                    &vec![T::zero(); m],
                    -range,
                    range,
                    cfg.tol,
                    slice.min(budget - evals),
                );
                evals += r.evals;
                if r.f < best_f {
                    best_f = r.f;
                    expand(&r.x, &mut delta_full, &mut day_pattern);
                    for i in 0..n {
                        best_x[i] =
                            (incumbent[i] + delta_full[i]).clamp_to(cfg.u_min, cfg.u_max);
                    }
                }
            }
        }
    }

    let remaining = budget.saturating_sub(evals).max(1);
    let r = nelder_mead_box(
        |u: &[T]| horizon.objective(u),
        &best_x,
        cfg.u_min,
        cfg.u_max,
        cfg.tol,
        remaining,
    );
    evals += r.evals;
    if r.f < best_f {
        best_f = r.f;
        best_x = r.x;
    }
    NmResult {
        x: best_x,
        f: best_f,
        evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::{metrics, RefSignal};
    use approx::assert_relative_eq;

    fn params(capacity: f64, sensitivity: f64) -> FlexParams<f64> {
        FlexParams::new(capacity, sensitivity, 0.5, 0.0, 1.0).unwrap()
    }

    fn series(label: SeriesLabel, values: Vec<f64>) -> Series<f64> {
        Series::new(label, 0, values).unwrap()
    }

    fn quick_cfg() -> OptConfig<f64> {
        OptConfig {
            tol: 1e-10,
            max_iters: 20_000,
            n_starts: 3,
            seed: 11,
            ..OptConfig::default()
        }
    }

    #[test]
    fn sequential_perfect_reference_stays_at_nominal_price() {
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.5, 0.8, 1.2]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.0, 1.5, 0.8, 1.2]);
        let sol = sequential_optimize(
            FlexState::new(0.5).unwrap(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &quick_cfg(),
            None,
        )
        .unwrap();
        for &u in sol.prices.values() {
            assert!((u - 0.5).abs() < 1e-6, "u = {u}");
        }
        assert!(sol.objective < 1e-12);
    }

    #[test]
    fn sequential_single_hour_inverts_the_response() {
        // dD = 0.25 needed; at x = 0.5 and k = 2 that means u = 0.25.
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.25]);
        let sol = sequential_optimize(
            FlexState::new(0.5).unwrap(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &quick_cfg(),
            None,
        )
        .unwrap();
        assert!((sol.prices.at(0) - 0.25).abs() < 1e-6);
        assert!(sol.objective < 1e-12);
    }

    #[test]
    fn sequential_unreachable_reference_hits_lower_bound() {
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.0 + 2.0 + 1.0]);
        let sol = sequential_optimize(
            FlexState::new(0.5).unwrap(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &quick_cfg(),
            None,
        )
        .unwrap();
        assert!(sol.prices.at(0) < 1e-6, "u = {}", sol.prices.at(0));
        assert!(sol.objective > 1.0);
    }

    #[test]
    fn sequential_agrees_with_fine_grid_oracle() {
        let p = params(6.0, 2.5);
        let baseline = series(SeriesLabel::Baseline, vec![1.1]);
        let d_ref = series(SeriesLabel::DemandRef, vec![0.7]);
        let cfg = quick_cfg();
        for kind in [CostKind::Absolute, CostKind::Quadratic] {
            let sol = sequential_optimize(
                FlexState::new(0.6).unwrap(),
                &baseline,
                &d_ref,
                &p,
                kind,
                &cfg,
                None,
            )
            .unwrap();
            // Exhaustive scan at 1e-4 resolution.
            let mut oracle = f64::INFINITY;
            for i in 0..=10_000 {
                let u = i as f64 / 10_000.0;
                let f = evaluate_horizon(
                    FlexState::new(0.6).unwrap(),
                    &[u],
                    &baseline,
                    &d_ref,
                    &p,
                    kind,
                    None,
                )
                .unwrap();
                oracle = oracle.min(f);
            }
            assert!(
                sol.objective <= oracle + 1e-6,
                "{kind:?}: {} vs oracle {}",
                sol.objective,
                oracle
            );
        }
    }

    #[test]
    fn simultaneous_perfect_reference_is_zero() {
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.5, 0.8]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.0, 1.5, 0.8]);
        let sol = simultaneous_optimize(
            FlexState::new(0.5).unwrap(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Absolute,
            &quick_cfg(),
            None,
        )
        .unwrap();
        assert!(sol.objective < 1e-9, "objective = {}", sol.objective);
    }

    #[test]
    fn simultaneous_dominates_sequential() {
        let p = params(2.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.0, 1.0, 1.8, 1.8, 0.4, 0.4]);
        let cfg = quick_cfg();
        for kind in [CostKind::Absolute, CostKind::Quadratic] {
            let seq = sequential_optimize(
                FlexState::new(0.5).unwrap(),
                &baseline,
                &d_ref,
                &p,
                kind,
                &cfg,
                None,
            )
            .unwrap();
            let sim = simultaneous_optimize(
                FlexState::new(0.5).unwrap(),
                &baseline,
                &d_ref,
                &p,
                kind,
                &cfg,
                None,
            )
            .unwrap();
            assert!(
                sim.objective <= seq.objective,
                "{kind:?}: sim {} > seq {}",
                sim.objective,
                seq.objective
            );
        }
    }

    #[test]
    fn simultaneous_beats_coarse_grid_oracle() {
        let p = params(3.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.2, 0.9]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.4, 0.8, 1.1]);
        let cfg = quick_cfg();
        let x0 = FlexState::new(0.5).unwrap();
        let sim = simultaneous_optimize(
            x0,
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &cfg,
            None,
        )
        .unwrap();
        let grid = [cfg.u_min, 0.5, cfg.u_max];
        let mut oracle = f64::INFINITY;
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    let f = evaluate_horizon(
                        x0,
                        &[a, b, c],
                        &baseline,
                        &d_ref,
                        &p,
                        CostKind::Quadratic,
                        None,
                    )
                    .unwrap();
                    oracle = oracle.min(f);
                }
            }
        }
        assert!(sim.objective <= oracle + 1e-6);
    }

    #[test]
    fn solution_is_recomputable() {
        let p = params(4.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 0.6, 1.4, 1.0]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.2, 1.2, 0.6, 1.0]);
        let x0 = FlexState::new(0.4).unwrap();
        let sol = simultaneous_optimize(
            x0,
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &quick_cfg(),
            None,
        )
        .unwrap();
        let roll = ff::rollout(
            x0,
            &sol.prices,
            &baseline,
            &p.deterministic(),
            RolloutMode::Deterministic,
        )
        .unwrap();
        assert_eq!(roll.demand.values(), sol.demand.values());
        let re = evaluate_horizon(
            x0,
            sol.prices.values(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            None,
        )
        .unwrap();
        assert!((re - sol.objective).abs() <= 1e-9);
    }

    #[test]
    fn identical_seeds_give_identical_solutions() {
        let p = params(3.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.3, 0.7, 1.1, 0.9]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.2, 0.8, 1.0, 1.4, 0.6]);
        let x0 = FlexState::new(0.5).unwrap();
        let cfg = quick_cfg();
        let a = simultaneous_optimize(x0, &baseline, &d_ref, &p, CostKind::Absolute, &cfg, None)
            .unwrap();
        let b = simultaneous_optimize(x0, &baseline, &d_ref, &p, CostKind::Absolute, &cfg, None)
            .unwrap();
        assert_eq!(a.prices.values(), b.prices.values());
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn ancillary_weight_pulls_voltage_to_reference() {
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.5]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.5]);
        let x0 = FlexState::new(0.5).unwrap();
        // v = 1.05 - 0.1 * y; v_ref = 1.0 is hit at y = 0.5, far from the
        // tracking target of 1.5.
        let mut gaps = Vec::new();
        for wv in [1.0, 10.0, 100.0] {
            let anc = AncillaryMap::new(
                1.05,
                0.1,
                RefSignal::Constant(1.0),
                wv,
                0.1,
                RefSignal::Constant(0.5),
            )
            .unwrap();
            let sol = sequential_optimize(
                x0,
                &baseline,
                &d_ref,
                &p,
                CostKind::Quadratic,
                &quick_cfg(),
                Some(&anc),
            )
            .unwrap();
            let v = super::super::voltage_of_demand(sol.demand.at(0), &anc);
            gaps.push((v - 1.0).abs());
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "gaps = {gaps:?}");
    }

    #[test]
    fn fast_objective_matches_stage_fold_bitwise() {
        let p = FlexParams::new(1.5, 4.0, 0.45, 0.0, 1.0).unwrap();
        let baseline = series(SeriesLabel::Baseline, vec![0.1, 1.9, 0.0, 1.2, 0.6, 1.4]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.5, 0.2, 1.0, 0.1, 2.0, 0.6]);
        let prices = [0.0, 1.0, 0.3, 0.8, 0.45, 0.62];
        let anc = AncillaryMap::new(
            1.05,
            0.08,
            RefSignal::Constant(1.0),
            0.7,
            0.3,
            RefSignal::Constant(0.45),
        )
        .unwrap();
        for kind in [CostKind::Absolute, CostKind::Quadratic] {
            for anc_opt in [None, Some(&anc)] {
                let h = Horizon::new(
                    FlexState::new(0.3).unwrap(),
                    &baseline,
                    &d_ref,
                    &p,
                    kind,
                    anc_opt,
                )
                .unwrap();
                let fast = h.objective(&prices);
                let mut x = FlexState::new(0.3).unwrap();
                let mut total = 0.0;
                for (t, &u) in prices.iter().enumerate() {
                    let (nx, _, c) = h.stage(t, x, u);
                    total += c;
                    x = nx;
                }
                assert_eq!(fast.to_bits(), total.to_bits());
            }
        }
    }

    #[test]
    fn metrics_match_hand_computation() {
        let p = params(10.0, 2.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0, 1.0]);
        let d_ref = series(SeriesLabel::DemandRef, vec![1.25, 1.0]);
        let sol = sequential_optimize(
            FlexState::new(0.5).unwrap(),
            &baseline,
            &d_ref,
            &p,
            CostKind::Quadratic,
            &quick_cfg(),
            None,
        )
        .unwrap();
        let m = metrics(&sol, &d_ref).unwrap();
        assert!(m.sse < 1e-10);
        assert_relative_eq!(
            m.sum_penalty,
            sol.prices.values().iter().sum::<f64>(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bound_feasibility() {
        let p = params(2.0, 4.0);
        let baseline = series(SeriesLabel::Baseline, vec![1.0; 6]);
        let d_ref = series(SeriesLabel::DemandRef, vec![2.0, 0.1, 2.0, 0.1, 2.0, 0.1]);
        let cfg = OptConfig {
            u_min: 0.2,
            u_max: 0.8,
            ..quick_cfg()
        };
        for mode_sim in [false, true] {
            let sol = if mode_sim {
                simultaneous_optimize(
                    FlexState::new(0.5).unwrap(),
                    &baseline,
                    &d_ref,
                    &p,
                    CostKind::Absolute,
                    &cfg,
                    None,
                )
                .unwrap()
            } else {
                sequential_optimize(
                    FlexState::new(0.5).unwrap(),
                    &baseline,
                    &d_ref,
                    &p,
                    CostKind::Absolute,
                    &cfg,
                    None,
                )
                .unwrap()
            };
            for &u in sol.prices.values() {
                assert!(u >= 0.2 && u <= 0.8);
            }
        }
    }
}
