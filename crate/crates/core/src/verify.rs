//! Monte Carlo checks of the reduction: short-time stability of the wells,
//! negligible excursions, the martingale property of the test function and
//! identification of the limit rates from simulated paths.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::{
    excursion_time, trace_and_project, trace_path, EmpiricalRates, Generator, JumpSampler,
    MetastablePartition, Path,
};
use crate::diffusion::{run_until_hit, ExcursionEstimate, SdeConfig};
use crate::error::{Error, Result};
use crate::poisson::{poisson_residual, POISSON_TOL};
use crate::rng::{map_replicas, replica_rng};
use crate::stats::{ratio_estimate, summarize};

/// Fewest replicas per start accepted by the stability estimates.
pub const MIN_STABILITY_SAMPLES: usize = 100;
/// Start points sampled per well for diffusions.
pub const SDE_STABILITY_STARTS: usize = 32;
/// Pass bands are this many standard errors wide.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub a: f64,
    pub theta: f64,
    /// Replicas per start.
    pub n: usize,
    /// `max` over starts of the escape-frequency estimate.
    pub estimate: f64,
    /// Binomial standard error at the maximizing start.
    pub std_error: f64,
    /// Index of the maximizing start in the start list.
    pub worst_start: usize,
    pub per_start: Vec<f64>,
}

fn stability_from_counts(a: f64, theta: f64, n: usize, hits: Vec<usize>) -> StabilityEstimate {
    let per_start: Vec<f64> = hits.iter().map(|&h| h as f64 / n as f64).collect();
    let (worst_start, estimate) =
        per_start
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
    StabilityEstimate {
        a,
        theta,
        n,
        estimate,
        std_error: (estimate * (1.0 - estimate) / n as f64).sqrt(),
        worst_start,
        per_start,
    }
}

fn check_stability_args(a: f64, theta: f64, n: usize) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a must be >= 0, got {a}")));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    if n < MIN_STABILITY_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_STABILITY_SAMPLES,
        });
    }
    Ok(())
}

/// `max_{x in E_i} P_x[hit another well within a * theta]` for a chain.
/// Replica `r` from every start reuses stream `r`, so the estimate is
/// nondecreasing in `a` for a fixed seed.
pub fn chain_short_time_stability(
    gen: &Generator,
    partition: &MetastablePartition,
    well: usize,
    a: f64,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    check_stability_args(a, theta, n)?;
    partition.check_chain(gen)?;
    if well >= partition.n_wells() {
        return Err(Error::InvalidParameter(format!("well {well} out of range")));
    }
    let horizon = a * theta;
    let sampler = JumpSampler::new(gen);
    let starts = partition.well(well);
    let outcomes = map_replicas(n * starts.len(), |r| {
        let (s, rep) = (r as usize / n, r % n as u64);
        if horizon == 0.0 {
            return false;
        }
        let mut rng = replica_rng(seed, rep);
        let hits_target = |state| matches!(partition.project(state), Some(j) if j != well);
        let path = sampler.run(&mut rng, starts[s], horizon, |seg| hits_target(seg.state));
        // the final segment may be cut at the horizon without a stop test
        path.segments
            .last()
            .is_some_and(|seg| hits_target(seg.state))
    });
    let hits = outcomes
        .chunks(n)
        .map(|c| c.iter().filter(|h| **h).count())
        .collect();
    Ok(stability_from_counts(a, theta, n, hits))
}

/// Same for a diffusion, the maximum taken over 32 start points drawn
/// uniformly from the well ball.
pub fn sde_short_time_stability(
    config: &SdeConfig,
    well: usize,
    a: f64,
    theta: f64,
    n: usize,
) -> Result<StabilityEstimate> {
    check_stability_args(a, theta, n)?;
    config.check_well(well)?;
    let starts = sample_ball(config, well, SDE_STABILITY_STARTS);
    let budget = (a * theta / config.dt).floor() as u64;
    let outcomes = map_replicas(n * starts.len(), |r| {
        let (s, rep) = (r as usize / n, r % n as u64);
        let mut rng = replica_rng(config.master_seed, rep);
        match run_until_hit(config, well, &starts[s], rep, budget, &mut rng) {
            Ok(_) => Ok(true),
            Err(Error::Timeout { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<bool>>>()?;
    let hits = outcomes
        .chunks(n)
        .map(|c| c.iter().filter(|h| **h).count())
        .collect();
    Ok(stability_from_counts(a, theta, n, hits))
}

/// Uniform points in the closed ball of `well`, from a stream reserved for
/// start sampling.
pub fn sample_ball(config: &SdeConfig, well: usize, count: usize) -> Vec<Vec<f64>> {
    let w = &config.wells[well];
    let d = w.center.len();
    let mut rng = replica_rng(config.master_seed, u64::MAX - well as u64);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let u: f64 = rng.random();
            let r = w.radius * u.powf(1.0 / d as f64);
            w.center
                .iter()
                .zip(&dir)
                .map(|(c, v)| c + r * v / norm)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheckpoint {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
}

impl MartingaleCheckpoint {
    pub fn centered(&self) -> bool {
        self.mean.abs() <= SE_BAND * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub n: usize,
    pub theta: f64,
    pub start_state: usize,
    pub checkpoints: Vec<MartingaleCheckpoint>,
}

impl MartingaleReport {
    pub fn passes(&self) -> bool {
        self.checkpoints.iter().all(MartingaleCheckpoint::centered)
    }
}

/// Increments `M(t) - M(0)` of
/// `M(t) = phi(xbar(theta t)) - theta int_0^t (L phi)(xbar(theta s)) ds`
/// along the trace process `xbar`, integrals exact on the piecewise
/// constant path.
#[allow(clippy::too_many_arguments)]
pub fn martingale_residual(
    gen: &Generator,
    partition: &MetastablePartition,
    phi: &[f64],
    rhs: &[f64],
    theta: f64,
    checkpoints: &[f64],
    n: usize,
    start_state: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    partition.check_chain(gen)?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { n, min: 2 });
    }
    if checkpoints.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(
            "checkpoints must be finite and >= 0".into(),
        ));
    }
    if partition.project(start_state).is_none() {
        return Err(Error::StartsOutsideWells);
    }
    let residual = poisson_residual(gen, phi, rhs)?;
    if residual > POISSON_TOL {
        return Err(Error::InvalidParameter(format!(
            "phi does not solve the Poisson equation: residual {residual:e}"
        )));
    }
    let l_phi = gen.apply(phi)?;
    let t_max = checkpoints.iter().copied().fold(0.0, f64::max);
    let sampler = JumpSampler::new(gen);
    let target = theta * t_max;
    let increments: Vec<Vec<f64>> = map_replicas(n, |r| {
        let mut rng = replica_rng(seed, r);
        let mut in_wells = 0.0;
        let path = if target > 0.0 {
            sampler.run(&mut rng, start_state, f64::INFINITY, |seg| {
                if partition.project(seg.state).is_some() {
                    in_wells += seg.duration;
                }
                in_wells >= target
            })
        } else {
            Path::default()
        };
        let traced = trace_path(&path, partition).unwrap_or_default();
        let m0 = phi[start_state];
        checkpoints
            .iter()
            .map(|&t| martingale_value(&traced, phi, &l_phi, theta * t, start_state) - m0)
            .collect()
    });
    let checkpoints = checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let xs: Vec<f64> = increments.iter().map(|v| v[k]).collect();
            let s = summarize(&xs).unwrap_or_default();
            MartingaleCheckpoint {
                t,
                mean: s.mean,
                std_error: s.std_error,
            }
        })
        .collect();
    Ok(MartingaleReport {
        n,
        theta,
        start_state,
        checkpoints,
    })
}

/// `phi(x(u)) - int_0^u (L phi)(x(v)) dv` on a trace path, in trace time.
fn martingale_value(traced: &Path, phi: &[f64], l_phi: &[f64], u: f64, start: usize) -> f64 {
    let mut acc = 0.0;
    let mut integral = 0.0;
    let mut state = start;
    for s in &traced.segments {
        state = s.state;
        let take = s.duration.min(u - acc);
        integral += l_phi[s.state] * take;
        acc += s.duration;
        if acc > u {
            break;
        }
    }
    phi[state] - integral
}

/// One grid point: empirical rescaled rates against target rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// Grid parameter (`q` or `eps`).
    pub parameter: f64,
    pub theta: f64,
    pub target: Vec<Vec<f64>>,
    /// `None` where the source well was never occupied.
    pub empirical: Vec<Vec<Option<f64>>>,
    pub std_error: Vec<Vec<Option<f64>>>,
    pub jumps: Vec<Vec<u64>>,
    pub occupation: Vec<f64>,
    /// Off-diagonal cells without data.
    pub missing: Vec<(usize, usize)>,
    /// Largest relative error over off-diagonal cells with data.
    pub max_rel_error: f64,
    /// Standard error of the relative error in the worst cell.
    pub max_rel_error_se: f64,
    pub replicas: usize,
}

impl ConvergencePoint {
    pub fn total_jumps(&self) -> u64 {
        self.jumps.iter().flatten().sum()
    }

    /// Every off-diagonal cell present and within `tol` relative error.
    pub fn within(&self, tol: f64) -> bool {
        self.missing.is_empty() && self.max_rel_error <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceReport {
    /// Error at the last grid point does not exceed the error at the first
    /// by more than three combined standard errors.
    pub fn error_decreases(&self) -> bool {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => {
                let se = a.max_rel_error_se.hypot(b.max_rel_error_se);
                b.max_rel_error <= a.max_rel_error + SE_BAND * se
            }
            _ => true,
        }
    }
}

/// Simulates `n` paths of length `horizon` from `start_state`, projects
/// their trace onto well labels and compares `theta`-rescaled jump rates
/// with `target` cell by cell.
#[allow(clippy::too_many_arguments)]
pub fn limit_identification(
    gen: &Generator,
    partition: &MetastablePartition,
    theta: f64,
    target: &[Vec<f64>],
    horizon: f64,
    n: usize,
    start_state: usize,
    seed: u64,
) -> Result<ConvergencePoint> {
    partition.check_chain(gen)?;
    let k = partition.n_wells();
    if target.len() != k || target.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParameter("target must be K x K".into()));
    }
    for (i, row) in target.iter().enumerate() {
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .sum();
        if row.iter().enumerate().any(|(j, v)| j != i && !(*v >= 0.0))
            || (row[i] != 0.0 && (row[i] + off).abs() > 1e-12 * off.max(1.0))
        {
            return Err(Error::InvalidGenerator(format!(
                "target row {i} is not a generator row"
            )));
        }
    }
    if !(theta > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(
            "theta and horizon must be > 0".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    if partition.project(start_state).is_none() {
        return Err(Error::StartsOutsideWells);
    }
    let sampler = JumpSampler::new(gen);
    let per_replica = map_replicas(n, |r| {
        let mut rng = replica_rng(seed, r);
        let path = sampler.run(&mut rng, start_state, horizon, |_| false);
        let projected = trace_and_project(&path, partition)?;
        let mut est = EmpiricalRates::new(k, theta);
        est.record(&projected)?;
        Ok(est)
    });
    let mut pooled = EmpiricalRates::new(k, theta);
    for est in per_replica {
        pooled.merge(&est?);
    }
    let mut missing = Vec::new();
    let mut max_rel_error = 0.0f64;
    let mut max_rel_error_se = 0.0;
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            match (pooled.rate(i, j), pooled.std_error(i, j)) {
                (Ok(rate), Ok(se)) => {
                    let scale = if target[i][j] > 0.0 {
                        target[i][j]
                    } else {
                        1.0
                    };
                    let err = (rate - target[i][j]).abs() / scale;
                    if err > max_rel_error || (err == max_rel_error && missing.is_empty()) {
                        max_rel_error = err;
                        max_rel_error_se = se / scale;
                    }
                }
                _ => missing.push((i, j)),
            }
        }
    }
    let std_error = (0..k)
        .map(|i| (0..k).map(|j| pooled.std_error(i, j).ok()).collect())
        .collect();
    Ok(ConvergencePoint {
        parameter: f64::NAN,
        theta,
        target: target.to_vec(),
        empirical: pooled.matrix(),
        std_error,
        jumps: pooled.counts.clone(),
        occupation: pooled.occupation.clone(),
        missing,
        max_rel_error,
        max_rel_error_se,
        replicas: n,
    })
}

/// One cell of the Schur-versus-simulation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCell {
    pub from: usize,
    pub to: usize,
    /// Mean jump rate from the Schur complement.
    pub exact: f64,
    pub empirical: f64,
    /// Batch-means standard error of `empirical`.
    pub std_error: f64,
    pub jumps: u64,
}

impl TraceCell {
    /// `|empirical - exact| / std_error`.
    pub fn z(&self) -> f64 {
        (self.empirical - self.exact).abs() / self.std_error
    }
}

/// Compares mean jump rates between wells with projected jump rates of
/// `batches` independent simulated paths (time unit 1), standard errors
/// from the spread between batches.
pub fn trace_consistency(
    gen: &Generator,
    partition: &MetastablePartition,
    batches: usize,
    horizon: f64,
    start_state: usize,
    seed: u64,
) -> Result<Vec<TraceCell>> {
    partition.check_chain(gen)?;
    if batches < 2 {
        return Err(Error::TooFewSamples { n: batches, min: 2 });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    if partition.project(start_state).is_none() {
        return Err(Error::StartsOutsideWells);
    }
    let mu = crate::chain::invariant_measure(gen)?;
    let k = partition.n_wells();
    let sampler = JumpSampler::new(gen);
    let per_batch = map_replicas(batches, |r| {
        let mut rng = replica_rng(seed, r);
        let path = sampler.run(&mut rng, start_state, horizon, |_| false);
        let mut est = EmpiricalRates::new(k, 1.0);
        est.record(&trace_and_project(&path, partition)?)?;
        Ok(est)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let exact = crate::chain::mean_jump_rate(gen, &mu, partition, i, j)?;
            let counts: Vec<f64> = per_batch.iter().map(|e| e.counts[i][j] as f64).collect();
            let times: Vec<f64> = per_batch.iter().map(|e| e.occupation[i]).collect();
            let (empirical, std_error) =
                ratio_estimate(&counts, &times).ok_or(Error::MissingData(i))?;
            cells.push(TraceCell {
                from: i,
                to: j,
                exact,
                empirical,
                std_error,
                jumps: counts.iter().sum::<f64>() as u64,
            });
        }
    }
    Ok(cells)
}

/// `E[Delta(theta t)] / theta` for a chain started at `start_state`.
#[allow(clippy::too_many_arguments)]
pub fn chain_excursion_fraction(
    gen: &Generator,
    partition: &MetastablePartition,
    start_state: usize,
    theta: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<ExcursionEstimate> {
    partition.check_chain(gen)?;
    if !(theta > 0.0 && t > 0.0 && (theta * t).is_finite()) {
        return Err(Error::InvalidParameter(
            "horizon theta * t must be > 0".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    if start_state >= gen.n_states() {
        return Err(Error::InvalidStateSet(format!(
            "start state {start_state} out of range"
        )));
    }
    let sampler = JumpSampler::new(gen);
    let per_replica = map_replicas(n, |r| {
        let mut rng = replica_rng(seed, r);
        let path = sampler.run(&mut rng, start_state, theta * t, |_| false);
        excursion_time(&path, partition) / theta
    });
    let s = summarize(&per_replica).unwrap_or_default();
    Ok(ExcursionEstimate {
        n,
        theta,
        t,
        mean: s.mean,
        std_error: s.std_error,
        per_replica,
    })
}

/// `b` not above `a` beyond three combined standard errors.
pub fn not_above(a: &ExcursionEstimate, b: &ExcursionEstimate) -> bool {
    b.mean <= a.mean + SE_BAND * a.std_error.hypot(b.std_error)
}
