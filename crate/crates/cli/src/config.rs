//! Experiment configuration: parsing, schema checks and defaulting.

use clap::ValueEnum;
use metastable_core::landscape::{FamilySpec, PotentialSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_WELL_RADIUS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ek,
    Capacity,
    Trace,
    Poisson,
    Reduce,
    SdeExcursion,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ek => "ek",
            Self::Capacity => "capacity",
            Self::Trace => "trace",
            Self::Poisson => "poisson",
            Self::Reduce => "reduce",
            Self::SdeExcursion => "sde-excursion",
        }
    }

    fn needs_potential(self) -> bool {
        matches!(self, Self::Ek | Self::SdeExcursion)
    }
}

/// A scalar or a list of scalars; always echoed as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(v) => vec![*v],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChainModel {
    TwoState {
        a: f64,
        b: f64,
    },
    #[serde(rename = "symmetric-3-well")]
    SymmetricThreeWell {
        q: Grid,
    },
    /// Full rate matrix, diagonal included.
    Rates(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    /// Chain wells as lists of state indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<usize>>>,
    /// Diffusion wells as balls around minima.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balls: Option<Vec<Ball>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reduction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stability {
    pub a: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative band for Monte Carlo means against Eyring-Kramers.
    pub ek_relative: f64,
    /// Relative band for identified limit rates.
    pub rate_relative: f64,
    /// Width of statistical bands in standard errors.
    pub se_band: f64,
    /// Significance level of the exponential-law test.
    pub ks_alpha: f64,
    /// Residual and identity checks.
    pub residual: f64,
    /// Direct versus variational Poisson solutions.
    pub agreement: f64,
    /// Fewest projected jumps for limit identification.
    pub min_jumps: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ek_relative: 0.25,
            rate_relative: 0.15,
            se_band: 3.0,
            ks_alpha: 0.01,
            residual: 1e-10,
            agreement: 1e-8,
            min_jumps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Run {
    #[serde(default)]
    pub seed: u64,
    /// Replicas (batches for `trace`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Path length: model time for `trace`, units of theta for `reduce`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Horizon `theta * t` of excursion estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    /// Replicas for the short-horizon checks of `reduce` (martingale, excursion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_well: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_halving: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<Stability>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<Reduction>,
    #[serde(default)]
    pub run: Run,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(format!(
            "{name} must be a finite number > 0, got {v}"
        )))
    }
}

/// Parses `text` and fills every default for `kind`, so the result can be
/// echoed as the full record of the run.
pub fn validate_config(text: &str, kind: ExperimentKind) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(CliError::from_json)?;
    match cfg.experiment {
        Some(k) if k != kind => {
            return Err(schema(format!(
                "config is for experiment `{}` but `{}` was requested",
                k.name(),
                kind.name()
            )))
        }
        _ => cfg.experiment = Some(kind),
    }
    if kind.needs_potential() {
        resolve_diffusion(&mut cfg, kind)?;
    } else {
        resolve_chain(&mut cfg, kind)?;
    }
    check_tolerances(&cfg.run.tolerances)?;
    Ok(cfg)
}

fn check_tolerances(t: &Tolerances) -> Result<(), CliError> {
    positive("tolerances.ek_relative", t.ek_relative)?;
    positive("tolerances.rate_relative", t.rate_relative)?;
    positive("tolerances.se_band", t.se_band)?;
    positive("tolerances.residual", t.residual)?;
    positive("tolerances.agreement", t.agreement)?;
    if !(t.ks_alpha > 0.0 && t.ks_alpha < 1.0) {
        return Err(schema("tolerances.ks_alpha must lie in (0, 1)"));
    }
    Ok(())
}

fn resolve_diffusion(cfg: &mut ExperimentConfig, kind: ExperimentKind) -> Result<(), CliError> {
    if cfg.model.chain.is_some() {
        return Err(schema(format!(
            "`{}` needs model.potential, not model.chain",
            kind.name()
        )));
    }
    let family = cfg
        .model
        .potential
        .as_ref()
        .ok_or_else(|| schema("model.potential is required"))?;
    let spec = PotentialSpec::from_family(family).map_err(|e| schema(e.to_string()))?;
    let eps = cfg.model.epsilon.get_or_insert(Grid::One(0.1)).values();
    if eps.is_empty() {
        return Err(schema("model.epsilon must not be empty"));
    }
    for e in &eps {
        positive("model.epsilon", *e)?;
    }
    cfg.model.epsilon = Some(Grid::Many(eps));
    if cfg
        .reduction
        .as_ref()
        .is_some_and(|r| r.nu.is_some() || r.limit.is_some() || r.f.is_some())
    {
        return Err(schema(
            "only reduction.theta applies to diffusion experiments",
        ));
    }
    if let Some(theta) = cfg.reduction.as_ref().and_then(|r| r.theta) {
        positive("reduction.theta", theta)?;
    }
    let partition = cfg.partition.get_or_insert_with(Partition::default);
    if partition.states.is_some() {
        return Err(schema(
            "partition.states applies to chains; use partition.balls",
        ));
    }
    if partition.balls.is_none() {
        let minima = spec.minima().map_err(|e| schema(e.to_string()))?;
        partition.balls = Some(
            minima
                .into_iter()
                .map(|m| Ball {
                    center: m.location,
                    radius: DEFAULT_WELL_RADIUS,
                })
                .collect(),
        );
    }
    let n_wells = partition.balls.as_ref().map_or(0, Vec::len);
    let run = &mut cfg.run;
    let dt = *run.dt.get_or_insert(1e-3);
    positive("run.dt", dt)?;
    let n = *run.n.get_or_insert(match kind {
        ExperimentKind::Ek => 0,
        _ => 200,
    });
    if kind == ExperimentKind::SdeExcursion && n == 0 {
        return Err(schema("run.n must be >= 1"));
    }
    let start = *run.start_well.get_or_insert(0);
    if start >= n_wells {
        return Err(schema(format!(
            "run.start_well {start} out of range for {n_wells} wells"
        )));
    }
    if kind == ExperimentKind::Ek {
        run.dt_halving.get_or_insert(false);
    } else {
        positive("run.t", *run.t.get_or_insert(1.0))?;
    }
    if let Some(m) = run.max_steps {
        if m == 0 {
            return Err(schema("run.max_steps must be >= 1"));
        }
    }
    check_stability(run)?;
    for unused in [
        run.horizon.is_some(),
        run.checkpoints.is_some(),
        run.short_n.is_some(),
    ] {
        if unused {
            return Err(schema(
                "run.horizon, run.checkpoints and run.short_n apply to chain experiments",
            ));
        }
    }
    Ok(())
}

fn check_stability(run: &Run) -> Result<(), CliError> {
    if let Some(s) = &run.stability {
        if s.a.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(schema("run.stability.a must be finite and >= 0"));
        }
        if s.n < 100 {
            return Err(schema("run.stability.n must be >= 100"));
        }
    }
    Ok(())
}

fn resolve_chain(cfg: &mut ExperimentConfig, kind: ExperimentKind) -> Result<(), CliError> {
    if cfg.model.potential.is_some() || cfg.model.epsilon.is_some() {
        return Err(schema(format!(
            "`{}` needs model.chain, not model.potential / model.epsilon",
            kind.name()
        )));
    }
    let chain = cfg
        .model
        .chain
        .as_mut()
        .ok_or_else(|| schema("model.chain is required"))?;
    let default_states = match chain {
        ChainModel::TwoState { a, b } => {
            positive("model.chain.two-state.a", *a)?;
            positive("model.chain.two-state.b", *b)?;
            Some(vec![vec![0], vec![1]])
        }
        ChainModel::SymmetricThreeWell { q } => {
            let qs = q.values();
            if qs.is_empty() {
                return Err(schema("model.chain.symmetric-3-well.q must not be empty"));
            }
            for v in &qs {
                positive("model.chain.symmetric-3-well.q", *v)?;
            }
            *q = Grid::Many(qs);
            Some(vec![vec![0], vec![2]])
        }
        ChainModel::Rates(_) => None,
    };
    let three_well = matches!(chain, ChainModel::SymmetricThreeWell { .. });
    let partition = cfg.partition.get_or_insert_with(Partition::default);
    if partition.balls.is_some() {
        return Err(schema(
            "partition.balls applies to diffusions; use partition.states",
        ));
    }
    if partition.states.is_none() {
        partition.states =
            Some(default_states.ok_or_else(|| {
                schema("partition.states is required for an explicit rate matrix")
            })?);
    }

    let needs_reduction = matches!(kind, ExperimentKind::Poisson | ExperimentKind::Reduce);
    if needs_reduction {
        let r = cfg.reduction.get_or_insert_with(Reduction::default);
        if three_well {
            // theta stays unset here: it defaults to 1/q per grid point
            r.nu.get_or_insert_with(|| vec![0.5, 0.5]);
            r.limit
                .get_or_insert_with(|| vec![vec![-0.5, 0.5], vec![0.5, -0.5]]);
            r.f.get_or_insert_with(|| vec![0.0, 1.0]);
        } else if r.theta.is_none() || r.nu.is_none() || r.limit.is_none() || r.f.is_none() {
            return Err(schema(
                "reduction.theta, nu, limit and f are required outside the symmetric-3-well family",
            ));
        }
        if let Some(theta) = r.theta {
            positive("reduction.theta", theta)?;
        }
    } else if cfg.reduction.is_some() {
        return Err(schema(format!(
            "`{}` takes no reduction block",
            kind.name()
        )));
    }

    let run = &mut cfg.run;
    if run.dt.is_some() || run.dt_halving.is_some() || run.max_steps.is_some() {
        return Err(schema(
            "run.dt, run.dt_halving and run.max_steps apply to diffusions",
        ));
    }
    match kind {
        ExperimentKind::Capacity | ExperimentKind::Poisson => {
            if run.n.is_some() || run.horizon.is_some() || run.stability.is_some() {
                return Err(schema(format!(
                    "`{}` is exact; it takes no Monte Carlo settings",
                    kind.name()
                )));
            }
        }
        ExperimentKind::Trace => {
            let n = *run.n.get_or_insert(50);
            if n < 2 {
                return Err(schema("run.n must be >= 2 batches"));
            }
            positive("run.horizon", *run.horizon.get_or_insert(400.0))?;
        }
        ExperimentKind::Reduce => {
            if *run.n.get_or_insert(20) == 0 {
                return Err(schema("run.n must be >= 1"));
            }
            positive("run.horizon", *run.horizon.get_or_insert(2.5e4))?;
            positive("run.t", *run.t.get_or_insert(1.0))?;
            let cps = run.checkpoints.get_or_insert_with(|| vec![0.5, 1.0, 2.0]);
            if cps.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(schema("run.checkpoints must be finite and >= 0"));
            }
            if *run.short_n.get_or_insert(5000) < 2 {
                return Err(schema("run.short_n must be >= 2"));
            }
            check_stability(run)?;
        }
        _ => unreachable!("diffusion kinds resolved elsewhere"),
    }
    if kind != ExperimentKind::Reduce
        && (run.checkpoints.is_some() || run.short_n.is_some() || run.t.is_some())
    {
        return Err(schema(
            "run.t, run.checkpoints and run.short_n apply to `reduce`",
        ));
    }
    let n_wells = partition_len(cfg);
    let start = *cfg.run.start_well.get_or_insert(0);
    if start >= n_wells {
        return Err(schema(format!(
            "run.start_well {start} out of range for {n_wells} wells"
        )));
    }
    Ok(())
}

fn partition_len(cfg: &ExperimentConfig) -> usize {
    cfg.partition
        .as_ref()
        .and_then(|p| p.states.as_ref())
        .map_or(0, Vec::len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_state_config_is_filled_in() {
        let cfg = validate_config(
            r#"{"model": {"chain": {"two-state": {"a": 1, "b": 1}}}}"#,
            ExperimentKind::Capacity,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(ExperimentKind::Capacity));
        assert_eq!(cfg.partition.unwrap().states, Some(vec![vec![0], vec![1]]));
        assert_eq!(cfg.run.start_well, Some(0));
        assert_eq!(cfg.run.tolerances, Tolerances::default());
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = validate_config(
            r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}, "epsilonn": 0.1}}"#,
            ExperimentKind::Ek,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("epsilonn"), "{err}");
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        let err = validate_config("{\"model\": ", ExperimentKind::Ek).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn negative_dt_is_a_schema_error() {
        let err = validate_config(
            r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}}, "run": {"dt": -0.001}}"#,
            ExperimentKind::SdeExcursion,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("dt"));
    }

    #[test]
    fn diffusion_defaults() {
        let cfg = validate_config(
            r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}}}"#,
            ExperimentKind::Ek,
        )
        .unwrap();
        assert_eq!(cfg.model.epsilon, Some(Grid::Many(vec![0.1])));
        let balls = cfg.partition.unwrap().balls.unwrap();
        assert_eq!(balls.len(), 2);
        assert_eq!(balls[0].radius, DEFAULT_WELL_RADIUS);
        assert_eq!(cfg.run.n, Some(0));
    }

    #[test]
    fn mismatched_experiment_and_model() {
        let e = validate_config(
            r#"{"experiment": "trace", "model": {"chain": {"two-state": {"a": 1, "b": 1}}}}"#,
            ExperimentKind::Capacity,
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
        let e = validate_config(
            r#"{"model": {"chain": {"two-state": {"a": 1, "b": 1}}}}"#,
            ExperimentKind::Ek,
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
        let e = validate_config(
            r#"{"model": {"chain": {"rates": [[-1, 1], [1, -1]]}}}"#,
            ExperimentKind::Reduce,
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }
}
