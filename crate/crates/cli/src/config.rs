//! Declarative scenario configuration: TOML schema, defaults, validation,
//! and resolution into the core domain types.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flexprice_core::ff::{FlexParams, FlexState};
use flexprice_core::mpc::{Disturbances, MpcConfig, TankModel, TankState};
use flexprice_core::opt::{AncillaryMap, CostKind, OptConfig, OptMode, RefSignal};
use flexprice_core::series::{Series, SeriesLabel};

use crate::error::CliError;

fn d_ref_price() -> f64 {
    0.5
}
fn d_dt() -> f64 {
    1.0
}
fn d_x0() -> f64 {
    0.5
}
fn d_u_max() -> f64 {
    1.0
}
fn d_tol() -> f64 {
    1e-9
}
fn d_max_iters() -> usize {
    100_000
}
fn d_n_starts() -> usize {
    5
}
fn d_weight() -> f64 {
    1.0
}
fn d_c_node() -> f64 {
    5.0
}
fn d_ua() -> f64 {
    0.05
}
fn d_k_mix() -> f64 {
    0.5
}
fn d_cop() -> f64 {
    3.0
}
fn d_p_max() -> f64 {
    5.0
}
fn d_horizon() -> usize {
    24
}
fn d_t_min() -> f64 {
    50.0
}
fn d_t_max() -> f64 {
    70.0
}
fn d_slack_weight() -> f64 {
    1e3
}
fn d_t_top0() -> f64 {
    60.0
}
fn d_t_bot0() -> f64 {
    50.0
}

/// A complete declarative experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of hours the price optimizers work over.
    pub horizon_hours: usize,
    pub flex: FlexSection,
    pub profiles: ProfilesSection,
    #[serde(default)]
    pub opt: OptSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancillary: Option<AncillarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcSection>,
    /// Default output directory; the `--out` flag overrides it. Not
    /// echoed into the resolved dump so identical scenarios produce
    /// identical dumps wherever they are run.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexSection {
    pub capacity: f64,
    pub sensitivity: f64,
    #[serde(default = "d_ref_price")]
    pub ref_price: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "d_dt")]
    pub dt_hours: f64,
    #[serde(default = "d_x0")]
    pub initial_state: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSection {
    pub baseline: ProfileSpec,
    pub demand_ref: ProfileSpec,
    /// Price profile driven through `simulate-ff`; defaults to the
    /// constant nominal price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<ProfileSpec>,
}

/// Profile generators: inline samples, a constant, a daily sinusoid
/// `mean + amplitude * sin(2*pi*(h + phase_hours)/24)`, or a single-column
/// CSV file (one value per line, `#` comments allowed).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant {
        value: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        phase_hours: f64,
    },
    Csv {
        path: String,
    },
    Inline {
        values: Vec<f64>,
    },
}

impl ProfileSpec {
    /// Materialize `len` hourly samples.
    ///
    /// `exact` demands that inline/CSV sources have exactly `len`
    /// samples; otherwise they may be longer and are truncated.
    pub fn generate(
        &self,
        name: &str,
        len: usize,
        exact: bool,
        base_dir: &Path,
    ) -> Result<Vec<f64>, CliError> {
        let values = match self {
            ProfileSpec::Constant { value } => vec![*value; len],
            ProfileSpec::Sinusoid {
                mean,
                amplitude,
                phase_hours,
            } => (0..len)
                .map(|h| {
                    mean + amplitude
                        * (2.0 * std::f64::consts::PI * (h as f64 + phase_hours) / 24.0).sin()
                })
                .collect(),
            ProfileSpec::Csv { path } => {
                let full = base_dir.join(path);
                let text = fs::read_to_string(&full).map_err(|e| {
                    CliError::Io(format!("profile {name}: cannot read {}: {e}", full.display()))
                })?;
                let mut out = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let v: f64 = line.parse().map_err(|e| {
                        CliError::config(format!(
                            "profile {name}: {}:{}: {e}",
                            full.display(),
                            lineno + 1
                        ))
                    })?;
                    out.push(v);
                }
                out
            }
            ProfileSpec::Inline { values } => values.clone(),
        };
        if values.len() < len || (exact && values.len() != len) {
            return Err(CliError::config(format!(
                "profile {name}: has {} samples but the scenario needs {}{}",
                values.len(),
                if exact { "exactly " } else { "at least " },
                len
            )));
        }
        Ok(values[..len].to_vec())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeField {
    Sequential,
    Simultaneous,
}

impl ModeField {
    pub fn to_core(self) -> OptMode {
        match self {
            ModeField::Sequential => OptMode::Sequential,
            ModeField::Simultaneous => OptMode::Simultaneous,
        }
    }

    pub fn parse_flag(s: &str) -> Result<Self, CliError> {
        match s {
            "sequential" => Ok(ModeField::Sequential),
            "simultaneous" => Ok(ModeField::Simultaneous),
            other => Err(CliError::config(format!(
                "--mode must be sequential or simultaneous, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CostField {
    Absolute,
    Quadratic,
}

impl CostField {
    pub fn to_core(self) -> CostKind {
        match self {
            CostField::Absolute => CostKind::Absolute,
            CostField::Quadratic => CostKind::Quadratic,
        }
    }

    pub fn parse_flag(s: &str) -> Result<Self, CliError> {
        match s {
            "absolute" => Ok(CostField::Absolute),
            "quadratic" => Ok(CostField::Quadratic),
            other => Err(CliError::config(format!(
                "--cost must be absolute or quadratic, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptSection {
    pub mode: ModeField,
    pub cost: CostField,
    pub u_min: f64,
    pub u_max: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for OptSection {
    fn default() -> Self {
        Self {
            mode: ModeField::Sequential,
            cost: CostField::Absolute,
            u_min: 0.0,
            u_max: d_u_max(),
            tol: d_tol(),
            max_iters: d_max_iters(),
            n_starts: d_n_starts(),
            seed: 0,
        }
    }
}

/// A scalar or a full per-hour trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrSeries {
    Scalar(f64),
    Series(Vec<f64>),
}

impl ScalarOrSeries {
    fn to_ref_signal(&self) -> RefSignal<f64> {
        match self {
            ScalarOrSeries::Scalar(v) => RefSignal::Constant(*v),
            ScalarOrSeries::Series(vs) => RefSignal::PerHour(vs.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillarySection {
    /// No-load voltage, per unit.
    pub v0: f64,
    /// Voltage droop per unit demand.
    pub r: f64,
    pub v_ref: ScalarOrSeries,
    #[serde(default = "d_weight")]
    pub weight_v: f64,
    #[serde(default = "d_weight")]
    pub weight_u: f64,
    /// Defaults to the flex section's nominal price.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_ref: Option<ScalarOrSeries>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    #[serde(default = "d_c_node")]
    pub c_top: f64,
    #[serde(default = "d_c_node")]
    pub c_bot: f64,
    #[serde(default = "d_ua")]
    pub ua_top: f64,
    #[serde(default = "d_ua")]
    pub ua_bot: f64,
    #[serde(default = "d_k_mix")]
    pub k_mix: f64,
    #[serde(default = "d_cop")]
    pub cop: f64,
    #[serde(default = "d_p_max")]
    pub p_max: f64,
    #[serde(default = "d_dt")]
    pub dt_hours: f64,
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_t_min")]
    pub t_min: f64,
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_slack_weight")]
    pub slack_weight: f64,
    #[serde(default = "d_weight")]
    pub terminal_weight: f64,
    /// Defaults to the middle of the comfort band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_term: Option<f64>,
    #[serde(default = "d_t_top0")]
    pub t_top0: f64,
    #[serde(default = "d_t_bot0")]
    pub t_bot0: f64,
    pub sim_hours: usize,
    pub ambient: ProfileSpec,
    pub load: ProfileSpec,
    /// Explicit penalty profile. When absent (and `penalty_csv` too), the
    /// configured price optimizer generates the penalty signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<ProfileSpec>,
    /// Path to a `run.csv` emitted by `optimize-price` or `compare`; the
    /// `price` column becomes the penalty signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_csv: Option<String>,
}

/// Load and parse a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Command-line overrides applied before resolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<ModeField>,
    pub cost: Option<CostField>,
}

impl ScenarioConfig {
    pub fn apply_overrides(&mut self, ov: &Overrides) {
        if let Some(seed) = ov.seed {
            self.opt.seed = seed;
        }
        if let Some(mode) = ov.mode {
            self.opt.mode = mode;
        }
        if let Some(cost) = ov.cost {
            self.opt.cost = cost;
        }
    }
}

/// Everything a run needs, in core types.
#[derive(Debug)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub flex: FlexParams<f64>,
    pub x0: FlexState<f64>,
    pub baseline: Series<f64>,
    pub demand_ref: Series<f64>,
    pub price: Option<Series<f64>>,
    pub opt_cfg: OptConfig<f64>,
    pub mode: OptMode,
    pub cost: CostKind,
    pub ancillary: Option<AncillaryMap<f64>>,
    pub mpc: Option<ResolvedMpc>,
}

#[derive(Debug)]
pub struct ResolvedMpc {
    pub model: TankModel<f64>,
    pub cfg: MpcConfig<f64>,
    pub s0: TankState<f64>,
    pub dist: Disturbances<f64>,
    pub sim_hours: usize,
    /// Penalty from an explicit profile, already covering
    /// `sim_hours + horizon` samples.
    pub penalty: Option<Series<f64>>,
    pub penalty_csv: Option<PathBuf>,
}

/// Validate the parsed config and build the core types. `base_dir` is the
/// directory file-based profiles are resolved against (normally the
/// config file's directory).
pub fn resolve(config: ScenarioConfig, base_dir: &Path) -> Result<Resolved, CliError> {
    let n = config.horizon_hours;
    if n < 1 {
        return Err(CliError::config("horizon_hours must be >= 1"));
    }

    let f = &config.flex;
    let flex = FlexParams::new(
        f.capacity,
        f.sensitivity,
        f.ref_price,
        f.noise_sigma,
        f.dt_hours,
    )
    .map_err(|e| CliError::config(format!("flex: {e}")))?;
    let x0 = FlexState::new(f.initial_state)
        .map_err(|e| CliError::config(format!("flex.initial_state: {e}")))?;

    let baseline = series_from(
        &config.profiles.baseline,
        "profiles.baseline",
        SeriesLabel::Baseline,
        n,
        true,
        base_dir,
    )?;
    let demand_ref = series_from(
        &config.profiles.demand_ref,
        "profiles.demand_ref",
        SeriesLabel::DemandRef,
        n,
        true,
        base_dir,
    )?;
    let price = match &config.profiles.price {
        Some(spec) => Some(series_from(
            spec,
            "profiles.price",
            SeriesLabel::Price,
            n,
            true,
            base_dir,
        )?),
        None => None,
    };

    let o = &config.opt;
    let opt_cfg = OptConfig {
        u_min: o.u_min,
        u_max: o.u_max,
        tol: o.tol,
        max_iters: o.max_iters,
        n_starts: o.n_starts,
        seed: o.seed,
    };
    opt_cfg
        .validate()
        .map_err(|e| CliError::config(format!("opt: {e}")))?;

    let ancillary = match &config.ancillary {
        Some(a) => {
            let u_ref = a
                .u_ref
                .as_ref()
                .map(|s| s.to_ref_signal())
                .unwrap_or(RefSignal::Constant(f.ref_price));
            Some(
                AncillaryMap::new(a.v0, a.r, a.v_ref.to_ref_signal(), a.weight_v, a.weight_u, u_ref)
                    .map_err(|e| CliError::config(format!("ancillary: {e}")))?,
            )
        }
        None => None,
    };

    let mpc = match &config.mpc {
        Some(m) => Some(resolve_mpc(m, base_dir)?),
        None => None,
    };

    Ok(Resolved {
        flex,
        x0,
        baseline,
        demand_ref,
        price,
        opt_cfg,
        mode: config.opt.mode.to_core(),
        cost: config.opt.cost.to_core(),
        ancillary,
        mpc,
        config,
    })
}

fn resolve_mpc(m: &MpcSection, base_dir: &Path) -> Result<ResolvedMpc, CliError> {
    let model = TankModel::new(
        m.c_top, m.c_bot, m.ua_top, m.ua_bot, m.k_mix, m.cop, m.p_max, m.dt_hours,
    )
    .map_err(|e| CliError::config(format!("mpc: {e}")))?;
    let cfg = MpcConfig::new(
        m.horizon,
        m.t_min,
        m.t_max,
        m.slack_weight,
        m.terminal_weight,
        m.t_term,
    )
    .map_err(|e| CliError::config(format!("mpc: {e}")))?;
    let s0 = TankState::new(m.t_top0, m.t_bot0)
        .map_err(|e| CliError::config(format!("mpc: {e}")))?;
    if m.sim_hours < 1 {
        return Err(CliError::config("mpc.sim_hours must be >= 1"));
    }
    let needed = m.sim_hours + m.horizon;
    let ambient = series_from(
        &m.ambient,
        "mpc.ambient",
        SeriesLabel::Ambient,
        needed,
        false,
        base_dir,
    )?;
    let load = series_from(&m.load, "mpc.load", SeriesLabel::Load, needed, false, base_dir)?;
    if m.penalty.is_some() && m.penalty_csv.is_some() {
        return Err(CliError::config(
            "mpc: give either penalty or penalty_csv, not both",
        ));
    }
    let penalty = match &m.penalty {
        Some(spec) => Some(series_from(
            spec,
            "mpc.penalty",
            SeriesLabel::Price,
            needed,
            false,
            base_dir,
        )?),
        None => None,
    };
    Ok(ResolvedMpc {
        model,
        cfg,
        s0,
        dist: Disturbances { ambient, load },
        sim_hours: m.sim_hours,
        penalty,
        penalty_csv: m.penalty_csv.as_ref().map(|p| base_dir.join(p)),
    })
}

fn series_from(
    spec: &ProfileSpec,
    name: &str,
    label: SeriesLabel,
    len: usize,
    exact: bool,
    base_dir: &Path,
) -> Result<Series<f64>, CliError> {
    let values = spec.generate(name, len, exact, base_dir)?;
    Series::new(label, 0, values).map_err(|e| CliError::config(format!("{name}: {e}")))
}

/// Serialize the post-override config; re-ingesting this dump reproduces
/// the run.
pub fn resolved_dump(config: &ScenarioConfig) -> Result<String, CliError> {
    toml::to_string_pretty(config)
        .map_err(|e| CliError::config(format!("cannot serialize resolved config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon_hours = 4

[flex]
capacity = 5.0
sensitivity = 2.0

[profiles.baseline]
kind = "constant"
value = 1.0

[profiles.demand_ref]
kind = "constant"
value = 1.0
"#;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.flex.ref_price, 0.5);
        assert_eq!(cfg.flex.noise_sigma, 0.0);
        assert_eq!(cfg.flex.dt_hours, 1.0);
        assert_eq!(cfg.flex.initial_state, 0.5);
        assert_eq!(cfg.opt.mode, ModeField::Sequential);
        assert_eq!(cfg.opt.cost, CostField::Absolute);
        assert_eq!(cfg.opt.u_min, 0.0);
        assert_eq!(cfg.opt.u_max, 1.0);
        assert_eq!(cfg.opt.n_starts, 5);
        let resolved = resolve(cfg, Path::new(".")).unwrap();
        assert_eq!(resolved.baseline.len(), 4);
    }

    #[test]
    fn resolved_dump_reingests_identically() {
        let cfg: ScenarioConfig = toml::from_str(MINIMAL).unwrap();
        let dump = resolved_dump(&cfg).unwrap();
        let again: ScenarioConfig = toml::from_str(&dump).unwrap();
        assert_eq!(resolved_dump(&again).unwrap(), dump);
    }

    #[test]
    fn inline_length_mismatch_is_named() {
        let text = r#"
horizon_hours = 24

[flex]
capacity = 5.0
sensitivity = 2.0

[profiles.baseline]
kind = "inline"
values = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]

[profiles.demand_ref]
kind = "constant"
value = 1.0
"#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        let err = resolve(cfg, Path::new(".")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("profiles.baseline"), "{msg}");
        assert!(msg.contains("23"), "{msg}");
        assert!(msg.contains("24"), "{msg}");
    }

    #[test]
    fn sinusoid_peaks_at_documented_phase() {
        let spec = ProfileSpec::Sinusoid {
            mean: 1.0,
            amplitude: 0.5,
            phase_hours: 0.0,
        };
        let v = spec.generate("p", 24, true, Path::new(".")).unwrap();
        // sin peaks at hour 6 with zero phase.
        assert!((v[6] - 1.5).abs() < 1e-12);
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - 1.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{MINIMAL}\nnot_a_field = 3\n");
        assert!(toml::from_str::<ScenarioConfig>(&text).is_err());
    }

    #[test]
    fn bad_flex_params_are_named() {
        let text = MINIMAL.replace("capacity = 5.0", "capacity = -1.0");
        let cfg: ScenarioConfig = toml::from_str(&text).unwrap();
        let err = resolve(cfg, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("capacity"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }
}
