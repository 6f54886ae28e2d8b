//! Dispatch from a resolved config to the library, collecting tables and checks.

use metastable_core::chain::{
    capacity, heuristic_mean_time, invariant_measure, is_reversible, mean_hitting_time,
    mean_jump_rate, reversible_capacity_identity, stationarity_residual, trace_generator,
    Generator, Measure, MetastablePartition,
};
use metastable_core::diffusion::{
    dt_halving_check, excursion_fraction, mc_transition_time, ExcursionEstimate, SdeConfig,
    TransitionTimeRun, WellSet,
};
use metastable_core::landscape::{eyring_kramers_mean_time, CriticalKind, PotentialSpec};
use metastable_core::poisson::{
    dirichlet_form, linear_term, solve_reduction, variational_minimize, ReductionSpec,
};
use metastable_core::verify::{
    chain_excursion_fraction, chain_short_time_stability, limit_identification,
    martingale_residual, not_above, sde_short_time_stability, trace_consistency, StabilityEstimate,
};

use crate::config::{ChainModel, ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::{Cell, Check, Report, Table};

/// Reversibility test used to decide whether the capacity identity applies.
const REVERSIBLE_TOL: f64 = 1e-12;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let kind = cfg
        .experiment
        .ok_or_else(|| CliError::Schema("experiment kind unresolved".into()))?;
    match kind {
        ExperimentKind::Ek => run_ek(cfg),
        ExperimentKind::Capacity => run_capacity(cfg),
        ExperimentKind::Trace => run_trace(cfg),
        ExperimentKind::Poisson => run_poisson(cfg),
        ExperimentKind::Reduce => run_reduce(cfg),
        ExperimentKind::SdeExcursion => run_sde_excursion(cfg),
    }
}

fn schema(e: metastable_core::Error) -> CliError {
    CliError::Schema(e.to_string())
}

fn resolved<T: Copy>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Schema(format!("{name} unresolved")))
}

/// Parameter tag of a grid point, suffixed to check names.
fn tag(name: &str, parameter: Option<f64>) -> String {
    match parameter {
        Some(p) => format!("{name}[{p}]"),
        None => name.to_owned(),
    }
}

/// `|mean| / se`, zero for an exactly zero mean.
fn z_score(mean: f64, se: f64) -> f64 {
    if mean == 0.0 {
        0.0
    } else {
        mean.abs() / se
    }
}

struct ChainInstance {
    /// `q` of the symmetric-3-well family, absent otherwise.
    parameter: Option<f64>,
    gen: Generator,
    mu: Measure,
    partition: MetastablePartition,
    reduction: Option<ReductionSpec>,
}

impl ChainInstance {
    fn start_state(&self, cfg: &ExperimentConfig) -> Result<usize, CliError> {
        let well = resolved(cfg.run.start_well, "run.start_well")?;
        self.partition
            .well(well)
            .first()
            .copied()
            .ok_or_else(|| CliError::Schema(format!("well {well} is empty")))
    }
}

fn chain_instances(cfg: &ExperimentConfig) -> Result<Vec<ChainInstance>, CliError> {
    let chain = cfg
        .model
        .chain
        .as_ref()
        .ok_or_else(|| CliError::Schema("model.chain is required".into()))?;
    let gens: Vec<(Option<f64>, Generator)> = match chain {
        ChainModel::TwoState { a, b } => {
            vec![(None, Generator::two_state(*a, *b).map_err(schema)?)]
        }
        ChainModel::SymmetricThreeWell { q } => q
            .values()
            .into_iter()
            .map(|q| Ok((Some(q), Generator::symmetric_three_well(q).map_err(schema)?)))
            .collect::<Result<_, CliError>>()?,
        ChainModel::Rates(rows) => vec![(None, Generator::from_rates(rows).map_err(schema)?)],
    };
    let states = cfg
        .partition
        .as_ref()
        .and_then(|p| p.states.clone())
        .ok_or_else(|| CliError::Schema("partition.states unresolved".into()))?;
    gens.into_iter()
        .map(|(parameter, gen)| {
            let partition =
                MetastablePartition::new(gen.n_states(), states.clone()).map_err(schema)?;
            partition.check_chain(&gen).map_err(schema)?;
            let mu = invariant_measure(&gen)?;
            let reduction = match &cfg.reduction {
                Some(r) => {
                    let theta = match (r.theta, parameter) {
                        (Some(t), _) => t,
                        (None, Some(q)) => 1.0 / q,
                        (None, None) => {
                            return Err(CliError::Schema("reduction.theta is required".into()))
                        }
                    };
                    let (Some(nu), Some(limit), Some(f)) = (&r.nu, &r.limit, &r.f) else {
                        return Err(CliError::Schema("reduction block unresolved".into()));
                    };
                    Some(
                        ReductionSpec::new(partition.clone(), theta, nu.clone(), limit, f.clone())
                            .map_err(schema)?,
                    )
                }
                None => None,
            };
            Ok(ChainInstance {
                parameter,
                gen,
                mu,
                partition,
                reduction,
            })
        })
        .collect()
}

fn reduction_of(inst: &ChainInstance) -> Result<&ReductionSpec, CliError> {
    inst.reduction
        .as_ref()
        .ok_or_else(|| CliError::Schema("reduction block unresolved".into()))
}

fn run_capacity(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let tol = cfg.run.tolerances.residual;
    let mut report = Report::default();
    let mut measure = Table::new("measure", &["q", "state", "mu"]);
    let mut pairs = Table::new(
        "pairs",
        &[
            "q",
            "i",
            "j",
            "mass_i",
            "capacity",
            "capacity_to_others",
            "heuristic_time",
            "hitting_time_from",
            "mean_hitting_time",
            "mean_jump_rate",
            "flow",
            "capacity_identity",
        ],
    );
    for inst in chain_instances(cfg)? {
        let (gen, mu, p) = (&inst.gen, &inst.mu, &inst.partition);
        for (x, w) in mu.weights().iter().enumerate() {
            measure.push(vec![inst.parameter.into(), x.into(), (*w).into()]);
        }
        report.checks.push(Check::at_most(
            tag("stationarity_residual", inst.parameter),
            stationarity_residual(gen, mu),
            tol,
        ));
        let reversible = is_reversible(gen, mu, REVERSIBLE_TOL);
        let mut identity_gap = 0.0f64;
        for i in 0..p.n_wells() {
            let others = p.others(i);
            let cap_out = capacity(gen, mu, p.well(i), &others)?;
            let heuristic = heuristic_mean_time(mu, cap_out, p.well(i))?;
            let from = p.well(i)[0];
            let exact = mean_hitting_time(gen, from, &others)?;
            for j in (0..p.n_wells()).filter(|&j| j != i) {
                let rate = mean_jump_rate(gen, mu, p, i, j)?;
                let flow = mu.mass(p.well(i)) * rate;
                let identity = if reversible {
                    let v = reversible_capacity_identity(gen, mu, p, i, j)?;
                    identity_gap = identity_gap.max((v - flow).abs());
                    Some(v)
                } else {
                    None
                };
                pairs.push(vec![
                    inst.parameter.into(),
                    i.into(),
                    j.into(),
                    mu.mass(p.well(i)).into(),
                    capacity(gen, mu, p.well(i), p.well(j))?.into(),
                    cap_out.into(),
                    heuristic.into(),
                    from.into(),
                    exact.into(),
                    rate.into(),
                    flow.into(),
                    identity.into(),
                ]);
            }
        }
        if reversible {
            report.checks.push(Check::at_most(
                tag("capacity_identity", inst.parameter),
                identity_gap,
                tol,
            ));
        } else {
            report.warnings.push(format!(
                "{}: chain is not reversible, capacity identity skipped",
                tag("chain", inst.parameter)
            ));
        }
    }
    report.tables = vec![measure, pairs];
    Ok(report)
}

fn run_trace(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let run = &cfg.run;
    let (n, horizon) = (
        resolved(run.n, "run.n")?,
        resolved(run.horizon, "run.horizon")?,
    );
    let mut report = Report::default();
    let mut generator = Table::new("trace_generator", &["q", "from", "to", "rate"]);
    let mut check = Table::new(
        "trace_check",
        &[
            "q",
            "from_well",
            "to_well",
            "exact",
            "empirical",
            "std_error",
            "jumps",
            "z",
        ],
    );
    for inst in chain_instances(cfg)? {
        let e = inst.partition.union();
        let trace = trace_generator(&inst.gen, &e)?;
        for (a, &x) in e.iter().enumerate() {
            for (b, &y) in e.iter().enumerate() {
                generator.push(vec![
                    inst.parameter.into(),
                    x.into(),
                    y.into(),
                    trace.rate(a, b).into(),
                ]);
            }
        }
        let cells = trace_consistency(
            &inst.gen,
            &inst.partition,
            n,
            horizon,
            inst.start_state(cfg)?,
            run.seed,
        )?;
        let mut worst = 0.0f64;
        let mut jumps = 0u64;
        for c in &cells {
            worst = worst.max(c.z());
            jumps += c.jumps;
            check.push(vec![
                inst.parameter.into(),
                c.from.into(),
                c.to.into(),
                c.exact.into(),
                c.empirical.into(),
                c.std_error.into(),
                c.jumps.into(),
                c.z().into(),
            ]);
        }
        report.checks.push(Check::at_most(
            tag("trace_max_z", inst.parameter),
            worst,
            run.tolerances.se_band,
        ));
        report.checks.push(Check::at_least(
            tag("projected_jumps", inst.parameter),
            jumps as f64,
            run.tolerances.min_jumps as f64,
        ));
    }
    report.tables = vec![generator, check];
    Ok(report)
}

fn run_poisson(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let tol = &cfg.run.tolerances;
    let mut report = Report::default();
    let mut states = Table::new(
        "states",
        &[
            "q",
            "state",
            "well",
            "mu",
            "rhs",
            "psi",
            "psi_variational",
            "phi",
        ],
    );
    let mut summary = Table::new(
        "poisson",
        &[
            "q",
            "theta",
            "c",
            "lambda",
            "lambda_variational",
            "theta_dirichlet",
            "linear_term",
            "residual",
            "rhs_defect",
            "invariance_defect",
            "cg_iterations",
            "max_sup_deviation",
        ],
    );
    let mut flatness = Table::new("flatness", &["q", "well", "sup", "l2"]);
    let mut trend = Vec::new();
    for inst in chain_instances(cfg)? {
        let spec = reduction_of(&inst)?;
        let (gen, mu) = (&inst.gen, &inst.mu);
        let sol = solve_reduction(gen, mu, spec)?;
        let var = variational_minimize(gen, mu, &sol.weights, spec)?;
        let energy = spec.theta() * dirichlet_form(gen, mu, &var.psi)?;
        let lin = linear_term(&sol.psi, mu, &sol.weights, spec)?;
        let lin_var = linear_term(&var.psi, mu, &sol.weights, spec)?;
        let gap = sol
            .psi
            .iter()
            .zip(&var.psi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        for x in 0..gen.n_states() {
            let well = inst.partition.project(x).map_or(Cell::Missing, Cell::from);
            states.push(vec![
                inst.parameter.into(),
                x.into(),
                well,
                mu.weights()[x].into(),
                sol.rhs.values[x].into(),
                sol.psi[x].into(),
                var.psi[x].into(),
                sol.phi[x].into(),
            ]);
        }
        summary.push(vec![
            inst.parameter.into(),
            spec.theta().into(),
            sol.c.into(),
            sol.lambda.into(),
            var.lambda.into(),
            energy.into(),
            lin.into(),
            sol.residual.into(),
            sol.rhs.defect.into(),
            spec.invariance_defect().into(),
            var.iterations.into(),
            sol.max_sup_deviation().into(),
        ]);
        for (i, w) in sol.flatness.iter().enumerate() {
            flatness.push(vec![
                inst.parameter.into(),
                i.into(),
                w.sup.into(),
                w.l2.into(),
            ]);
        }
        let p = inst.parameter;
        report.checks.push(Check::at_most(
            tag("poisson_residual", p),
            sol.residual,
            tol.residual,
        ));
        report.checks.push(Check::at_most(
            tag("energy_identity", p),
            (energy - sol.lambda).abs(),
            tol.residual,
        ));
        report.checks.push(Check::at_most(
            tag("linear_identity", p),
            (lin + sol.lambda).abs().max((lin_var + var.lambda).abs()),
            tol.residual,
        ));
        report.checks.push(Check::at_most(
            tag("direct_vs_variational", p),
            gap,
            tol.agreement,
        ));
        if let Some(q) = p {
            trend.push((q, sol.max_sup_deviation()));
        }
    }
    if trend.len() >= 2 {
        trend.sort_by(|a, b| b.0.total_cmp(&a.0));
        let decreasing = trend.windows(2).all(|w| w[1].1 < w[0].1);
        report.checks.push(Check::flag(
            "flatness_decreases_with_q",
            decreasing,
            "max sup deviation strictly decreasing as q decreases",
        ));
    }
    report.tables = vec![states, summary, flatness];
    Ok(report)
}

fn stability_rows(table: &mut Table, parameter: Option<f64>, estimates: &[StabilityEstimate]) {
    for s in estimates {
        table.push(vec![
            parameter.into(),
            s.a.into(),
            s.theta.into(),
            s.n.into(),
            s.estimate.into(),
            s.std_error.into(),
            s.worst_start.into(),
        ]);
    }
}

fn stability_monotone(estimates: &[StabilityEstimate]) -> bool {
    let mut sorted: Vec<&StabilityEstimate> = estimates.iter().collect();
    sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
    sorted.windows(2).all(|w| w[0].estimate <= w[1].estimate)
}

fn excursion_row(table: &mut Table, parameter: Option<f64>, e: &ExcursionEstimate) {
    table.push(vec![
        parameter.into(),
        e.theta.into(),
        e.t.into(),
        e.n.into(),
        e.mean.into(),
        e.std_error.into(),
    ]);
}

/// Excursion fraction falls along the grid, ordered from the largest
/// parameter to the smallest, strictly in the mean and within the SE band.
fn excursion_trend(mut points: Vec<(f64, ExcursionEstimate)>) -> Option<Check> {
    if points.len() < 2 {
        return None;
    }
    points.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pass = points
        .windows(2)
        .all(|w| w[1].1.mean < w[0].1.mean && not_above(&w[0].1, &w[1].1));
    Some(Check::flag(
        "excursion_decreases",
        pass,
        "mean strictly decreasing with the parameter and never above the previous point by 3 SE",
    ))
}

fn run_reduce(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let run = &cfg.run;
    let tol = &run.tolerances;
    let n = resolved(run.n, "run.n")?;
    let horizon = resolved(run.horizon, "run.horizon")?;
    let t = resolved(run.t, "run.t")?;
    let short_n = resolved(run.short_n, "run.short_n")?;
    let start_well = resolved(run.start_well, "run.start_well")?;
    let checkpoints = run.checkpoints.clone().unwrap_or_default();
    let mut report = Report::default();
    let mut rates = Table::new(
        "limit_rates",
        &[
            "q",
            "theta",
            "i",
            "j",
            "target",
            "empirical",
            "std_error",
            "jumps",
            "occupation_i",
        ],
    );
    let mut martingale = Table::new("martingale", &["q", "theta", "t", "mean", "std_error", "z"]);
    let mut stability = Table::new(
        "stability",
        &[
            "q",
            "a",
            "theta",
            "n",
            "estimate",
            "std_error",
            "worst_start",
        ],
    );
    let mut excursion = Table::new("excursion", &["q", "theta", "t", "n", "mean", "std_error"]);
    let mut trend = Vec::new();
    for inst in chain_instances(cfg)? {
        let spec = reduction_of(&inst)?;
        let (gen, p, param) = (&inst.gen, &inst.partition, inst.parameter);
        let theta = spec.theta();
        let start = inst.start_state(cfg)?;
        let k = p.n_wells();
        let target: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| spec.limit()[(i, j)]).collect())
            .collect();

        let point =
            limit_identification(gen, p, theta, &target, horizon * theta, n, start, run.seed)?;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                rates.push(vec![
                    param.into(),
                    theta.into(),
                    i.into(),
                    j.into(),
                    target[i][j].into(),
                    point.empirical[i][j].into(),
                    point.std_error[i][j].into(),
                    point.jumps[i][j].into(),
                    point.occupation[i].into(),
                ]);
            }
        }
        report.checks.push(Check::at_most(
            tag("limit_max_rel_error", param),
            point.max_rel_error,
            tol.rate_relative,
        ));
        report.checks.push(Check::at_least(
            tag("projected_jumps", param),
            point.total_jumps() as f64,
            tol.min_jumps as f64,
        ));
        if !point.missing.is_empty() {
            report.checks.push(Check::flag(
                tag("limit_cells_observed", param),
                false,
                "every off-diagonal cell with a nonzero target observed",
            ));
        }

        let sol = solve_reduction(gen, &inst.mu, spec)?;
        let mart = martingale_residual(
            gen,
            p,
            &sol.phi,
            &sol.rhs.values,
            theta,
            &checkpoints,
            short_n,
            start,
            run.seed,
        )?;
        let mut worst_z = 0.0f64;
        for c in &mart.checkpoints {
            let z = z_score(c.mean, c.std_error);
            worst_z = worst_z.max(z);
            martingale.push(vec![
                param.into(),
                theta.into(),
                c.t.into(),
                c.mean.into(),
                c.std_error.into(),
                z.into(),
            ]);
        }
        if !mart.checkpoints.is_empty() {
            report.checks.push(Check::at_most(
                tag("martingale_max_z", param),
                worst_z,
                tol.se_band,
            ));
        }

        if let Some(s) = &run.stability {
            let estimates = s
                .a
                .iter()
                .map(|&a| chain_short_time_stability(gen, p, start_well, a, theta, s.n, run.seed))
                .collect::<Result<Vec<_>, _>>()?;
            stability_rows(&mut stability, param, &estimates);
            report.checks.push(Check::flag(
                tag("stability_monotone", param),
                stability_monotone(&estimates),
                "estimate nondecreasing in a",
            ));
        }

        let e = chain_excursion_fraction(gen, p, start, theta, t, short_n, run.seed)?;
        excursion_row(&mut excursion, param, &e);
        if let Some(q) = param {
            trend.push((q, e));
        }
    }
    report.checks.extend(excursion_trend(trend));
    report.tables = vec![rates, martingale, excursion];
    if run.stability.is_some() {
        report.tables.push(stability);
    }
    Ok(report)
}

fn potential(cfg: &ExperimentConfig) -> Result<PotentialSpec, CliError> {
    let family = cfg
        .model
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Schema("model.potential is required".into()))?;
    PotentialSpec::from_family(family).map_err(schema)
}

fn epsilons(cfg: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    cfg.model
        .epsilon
        .as_ref()
        .map(|g| g.values())
        .ok_or_else(|| CliError::Schema("model.epsilon unresolved".into()))
}

fn sde_config(
    cfg: &ExperimentConfig,
    spec: &PotentialSpec,
    eps: f64,
) -> Result<SdeConfig, CliError> {
    let balls = cfg
        .partition
        .as_ref()
        .and_then(|p| p.balls.as_ref())
        .ok_or_else(|| CliError::Schema("partition.balls unresolved".into()))?;
    let wells = balls
        .iter()
        .map(|b| WellSet::new(spec, b.center.clone(), b.radius).map_err(schema))
        .collect::<Result<Vec<_>, _>>()?;
    let dt = resolved(cfg.run.dt, "run.dt")?;
    let mut config = SdeConfig::new(spec.clone(), eps, dt, cfg.run.seed, wells).map_err(schema)?;
    if let Some(m) = cfg.run.max_steps {
        config = config.with_max_steps(m);
    }
    Ok(config)
}

fn kind_name(kind: CriticalKind) -> &'static str {
    match kind {
        CriticalKind::Minimum => "minimum",
        CriticalKind::Saddle => "saddle",
    }
}

fn coordinate_columns(lead: &[&str], dim: usize, tail: &[&str]) -> Vec<String> {
    lead.iter()
        .map(|s| (*s).to_owned())
        .chain((0..dim).map(|k| format!("x{k}")))
        .chain(tail.iter().map(|s| (*s).to_owned()))
        .collect()
}

fn transition_rows(table: &mut Table, eps: f64, label: &str, run: &TransitionTimeRun) {
    for r in &run.records {
        table.push(vec![
            eps.into(),
            label.into(),
            r.replica.into(),
            r.hit_well.into(),
            r.tau.into(),
            r.steps.into(),
            r.excursion_time.into(),
        ]);
    }
}

fn run_ek(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let spec = potential(cfg)?;
    let run = &cfg.run;
    let tol = &run.tolerances;
    let n = resolved(run.n, "run.n")?;
    let start_well = resolved(run.start_well, "run.start_well")?;
    let halving = resolved(run.dt_halving, "run.dt_halving")?;
    let mut report = Report::default();

    let points = spec.critical_points()?;
    let mut critical = Table::with_columns(
        "critical_points",
        coordinate_columns(
            &["index", "kind"],
            spec.dim(),
            &["value", "min_eigenvalue", "hessian_determinant"],
        ),
    );
    for (k, c) in points.iter().enumerate() {
        let mut row = vec![Cell::from(k), kind_name(c.kind).into()];
        row.extend(c.location.iter().map(|v| Cell::from(*v)));
        let min_eig = c
            .hessian_eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        row.extend([
            spec.value(&c.location)?.into(),
            min_eig.into(),
            c.hessian_determinant().into(),
        ]);
        critical.push(row);
    }

    // one row per (epsilon, well, exit saddle); escape_time combines all exits
    let mut ek = Table::new(
        "eyring_kramers",
        &[
            "epsilon",
            "well",
            "saddle",
            "barrier",
            "channel_time",
            "escape_time",
        ],
    );
    let mut times = Table::new(
        "transition_times",
        &[
            "epsilon",
            "dt",
            "replica",
            "hit_well",
            "tau",
            "steps",
            "excursion_time",
        ],
    );
    let mut stats = Table::new(
        "transition_summary",
        &[
            "epsilon",
            "dt",
            "n",
            "completed",
            "timeouts",
            "mean",
            "sd",
            "std_error",
            "prediction",
            "rel_error",
            "ks_statistic",
            "ks_p",
        ],
    );
    for eps in epsilons(cfg)? {
        let config = sde_config(cfg, &spec, eps)?;
        report.warnings.extend(
            config
                .warnings()
                .into_iter()
                .map(|w| format!("epsilon {eps}: {w}")),
        );
        for (w, well) in config.wells.iter().enumerate() {
            let minimum = metastable_core::landscape::classify_critical_point(&spec, &well.center)?;
            let u_m = spec.value(&well.center)?;
            let escape = spec.escape_time_prediction(&well.center, eps)?;
            for (s, c) in points
                .iter()
                .enumerate()
                .filter(|(_, c)| c.kind == CriticalKind::Saddle)
            {
                let (l, r) = spec.saddle_endpoints(c)?;
                if !(well.contains(&l) || well.contains(&r)) {
                    continue;
                }
                let u_s = spec.value(&c.location)?;
                let channel = eyring_kramers_mean_time(&minimum, c, u_m, u_s, eps)?;
                ek.push(vec![
                    eps.into(),
                    w.into(),
                    s.into(),
                    (u_s - u_m).into(),
                    channel.into(),
                    escape.into(),
                ]);
            }
        }
        if n == 0 {
            continue;
        }
        let prediction = spec.escape_time_prediction(&config.wells[start_well].center, eps)?;
        let mut summarize = |label: &str, dt: f64, r: &TransitionTimeRun| {
            let s = &r.stats;
            let rel = (s.mean - prediction).abs() / prediction;
            stats.push(vec![
                eps.into(),
                dt.into(),
                s.n.into(),
                s.completed.into(),
                s.timeouts.into(),
                s.mean.into(),
                s.sd.into(),
                s.std_error.into(),
                prediction.into(),
                rel.into(),
                s.ks.map(|k| k.statistic).into(),
                s.ks.map(|k| k.p_value).into(),
            ]);
            transition_rows(&mut times, eps, label, r);
            rel
        };
        let coarse = if halving {
            let h = dt_halving_check(&config, start_well, n)?;
            summarize("coarse", config.dt, &h.coarse);
            summarize("fine", config.dt / 2.0, &h.fine);
            report.checks.push(Check::at_most(
                format!("dt_halving_shift_se[{eps}]"),
                h.shift.abs() / h.coarse.stats.std_error,
                1.0,
            ));
            h.coarse
        } else {
            let r = mc_transition_time(&config, start_well, n)?;
            summarize("coarse", config.dt, &r);
            r
        };
        let s = &coarse.stats;
        report.checks.push(Check::at_most(
            format!("ek_relative_error[{eps}]"),
            (s.mean - prediction).abs() / prediction,
            tol.ek_relative,
        ));
        if let Some(ks) = s.ks {
            report.checks.push(Check::above(
                format!("exp_law_ks_p[{eps}]"),
                ks.p_value,
                tol.ks_alpha,
            ));
        }
    }
    report.tables = vec![critical, ek];
    if n > 0 {
        report.tables.extend([times, stats]);
    }
    Ok(report)
}

fn run_sde_excursion(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let spec = potential(cfg)?;
    let run = &cfg.run;
    let n = resolved(run.n, "run.n")?;
    let t = resolved(run.t, "run.t")?;
    let start_well = resolved(run.start_well, "run.start_well")?;
    let mut report = Report::default();
    let mut excursion = Table::new(
        "excursion",
        &["epsilon", "theta", "t", "n", "mean", "std_error"],
    );
    let mut stability = Table::new(
        "stability",
        &[
            "epsilon",
            "a",
            "theta",
            "n",
            "estimate",
            "std_error",
            "worst_start",
        ],
    );
    let mut trend = Vec::new();
    for eps in epsilons(cfg)? {
        let config = sde_config(cfg, &spec, eps)?;
        report.warnings.extend(
            config
                .warnings()
                .into_iter()
                .map(|w| format!("epsilon {eps}: {w}")),
        );
        let theta = match cfg.reduction.as_ref().and_then(|r| r.theta) {
            Some(theta) => theta,
            None => spec.escape_time_prediction(&config.wells[start_well].center, eps)?,
        };
        let e = excursion_fraction(&config, start_well, theta, t, n)?;
        excursion_row(&mut excursion, Some(eps), &e);
        if let Some(s) = &run.stability {
            let estimates =
                s.a.iter()
                    .map(|&a| sde_short_time_stability(&config, start_well, a, theta, s.n))
                    .collect::<Result<Vec<_>, _>>()?;
            stability_rows(&mut stability, Some(eps), &estimates);
            report.checks.push(Check::flag(
                format!("stability_monotone[{eps}]"),
                stability_monotone(&estimates),
                "estimate nondecreasing in a",
            ));
        }
        trend.push((eps, e));
    }
    report.checks.extend(excursion_trend(trend));
    report.tables = vec![excursion];
    if run.stability.is_some() {
        report.tables.push(stability);
    }
    Ok(report)
}
