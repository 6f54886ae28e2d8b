//! Euler-Maruyama simulation of `dy = -grad U(y) dt + sqrt(2 eps) dW`,
//! first hitting times between wells, the exponential-law test and the
//! excursion time spent outside every well.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{dist, CriticalKind, PotentialSpec};
use crate::rng::{map_replicas, replica_rng, ReplicaRng};
use crate::stats::{exp_law_test, summarize, KsResult, KS_MIN_SAMPLES};

/// Closed ball around a catalogued minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSet {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl WellSet {
    /// Checks that `center` is a catalogued minimum and that the ball holds
    /// no other catalogued critical point.
    pub fn new(spec: &PotentialSpec, center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: center.len(),
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "well radius must be > 0, got {radius}"
            )));
        }
        let cps = spec.critical_points()?;
        let own = cps
            .iter()
            .find(|c| dist(&c.location, &center) < 1e-8)
            .filter(|c| c.kind == CriticalKind::Minimum)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("{center:?} is not a catalogued minimum"))
            })?;
        if let Some(other) = cps
            .iter()
            .filter(|c| !std::ptr::eq(*c, own))
            .find(|c| dist(&c.location, &center) <= radius)
        {
            return Err(Error::InvalidParameter(format!(
                "well of radius {radius} around {center:?} contains critical point {:?}",
                other.location
            )));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        let r2: f64 = self
            .center
            .iter()
            .zip(x)
            .map(|(c, y)| (c - y) * (c - y))
            .sum();
        r2 <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub spec: PotentialSpec,
    pub eps: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub wells: Vec<WellSet>,
    /// `None`: ten times the Eyring-Kramers escape prediction, in steps.
    pub max_steps: Option<u64>,
}

impl SdeConfig {
    pub fn new(
        spec: PotentialSpec,
        eps: f64,
        dt: f64,
        master_seed: u64,
        wells: Vec<WellSet>,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {eps}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if wells.is_empty() {
            return Err(Error::InvalidParameter("no wells".into()));
        }
        for (i, a) in wells.iter().enumerate() {
            if a.center.len() != spec.dim() {
                return Err(Error::DimensionMismatch {
                    expected: spec.dim(),
                    got: a.center.len(),
                });
            }
            for (j, b) in wells.iter().enumerate().skip(i + 1) {
                if dist(&a.center, &b.center) <= a.radius + b.radius {
                    return Err(Error::InvalidParameter(format!(
                        "wells {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(Self {
            spec,
            eps,
            dt,
            master_seed,
            wells,
            max_steps: None,
        })
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = Some(max_steps);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Discretization sanity: `dt <= 0.01 r^2 / (2 eps)` for the smallest well.
    pub fn warnings(&self) -> Vec<String> {
        let r = self
            .wells
            .iter()
            .map(|w| w.radius)
            .fold(f64::INFINITY, f64::min);
        let limit = 0.01 * r * r / (2.0 * self.eps);
        if self.dt > limit {
            vec![format!(
                "dt = {} exceeds 0.01 r^2 / (2 eps) = {limit:.3e} for the smallest well",
                self.dt
            )]
        } else {
            Vec::new()
        }
    }

    pub fn well_of(&self, x: &[f64]) -> Option<usize> {
        self.wells.iter().position(|w| w.contains(x))
    }

    pub(crate) fn check_well(&self, i: usize) -> Result<()> {
        if i >= self.wells.len() {
            return Err(Error::InvalidParameter(format!(
                "well index {i} out of range for {} wells",
                self.wells.len()
            )));
        }
        Ok(())
    }

    pub fn step_budget(&self, start_well: usize) -> Result<u64> {
        self.check_well(start_well)?;
        if let Some(m) = self.max_steps {
            return Ok(m);
        }
        let t = self
            .spec
            .escape_time_prediction(&self.wells[start_well].center, self.eps)?;
        Ok((10.0 * t / self.dt).ceil() as u64)
    }
}

/// One Euler-Maruyama step `x - grad U(x) dt + sqrt(2 eps dt) noise`.
pub fn em_step(
    x: &[f64],
    spec: &PotentialSpec,
    eps: f64,
    dt: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if noise.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: noise.len(),
        });
    }
    if noise.iter().chain([&eps, &dt]).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("em_step input"));
    }
    let mut g = spec.grad(x)?;
    let sigma = (2.0 * eps * dt).sqrt();
    for ((gi, xi), ni) in g.iter_mut().zip(x).zip(noise) {
        *gi = xi - *gi * dt + sigma * ni;
    }
    Ok(g)
}

/// Scratch state for stepping one trajectory.
struct Walker<'a> {
    spec: &'a PotentialSpec,
    x: Vec<f64>,
    grad: Vec<f64>,
    dt: f64,
    sigma: f64,
}

impl<'a> Walker<'a> {
    fn new(spec: &'a PotentialSpec, x0: &[f64], eps: f64, dt: f64) -> Self {
        Self {
            spec,
            x: x0.to_vec(),
            grad: vec![0.0; x0.len()],
            dt,
            sigma: (2.0 * eps * dt).sqrt(),
        }
    }

    #[inline]
    fn step(&mut self, noise: impl Fn(usize) -> f64) {
        self.spec.grad_into(&self.x, &mut self.grad);
        for (k, (xi, gi)) in self.x.iter_mut().zip(&self.grad).enumerate() {
            *xi += -gi * self.dt + self.sigma * noise(k);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingRecord {
    pub replica: u64,
    pub start_well: usize,
    pub hit_well: usize,
    /// Model time `steps * dt`.
    pub tau: f64,
    pub steps: u64,
    /// Time spent outside every well before the hit (left-point rule).
    pub excursion_time: f64,
}

fn hit_target(config: &SdeConfig, start_well: usize, x: &[f64]) -> Option<usize> {
    config
        .wells
        .iter()
        .enumerate()
        .position(|(j, w)| j != start_well && w.contains(x))
}

/// First entry into any other well, starting at the centre of `start_well`.
/// Noise comes from stream `replica` of the master seed.
pub fn simulate_until_hit(
    config: &SdeConfig,
    start_well: usize,
    replica: u64,
) -> Result<HittingRecord> {
    let budget = config.step_budget(start_well)?;
    let mut rng = replica_rng(config.master_seed, replica);
    let center = &config.wells[start_well].center;
    run_until_hit(config, start_well, center, replica, budget, &mut rng)
}

/// First entry into a well other than `start_well`, from `x0`.
pub(crate) fn run_until_hit(
    config: &SdeConfig,
    start_well: usize,
    x0: &[f64],
    replica: u64,
    budget: u64,
    rng: &mut ReplicaRng,
) -> Result<HittingRecord> {
    let mut w = Walker::new(&config.spec, x0, config.eps, config.dt);
    let record = |hit_well, steps: u64, outside: u64| HittingRecord {
        replica,
        start_well,
        hit_well,
        tau: steps as f64 * config.dt,
        steps,
        excursion_time: outside as f64 * config.dt,
    };
    if let Some(j) = hit_target(config, start_well, &w.x) {
        return Ok(record(j, 0, 0));
    }
    let d = w.x.len();
    let mut noise = vec![0.0; d];
    let mut outside = 0u64;
    for step in 1..=budget {
        if config.well_of(&w.x).is_none() {
            outside += 1;
        }
        for z in noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        w.step(|k| noise[k]);
        if let Some(j) = hit_target(config, start_well, &w.x) {
            return Ok(record(j, step, outside));
        }
    }
    Err(Error::Timeout {
        replica,
        steps: budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionTimeStats {
    /// Replicas requested.
    pub n: usize,
    pub completed: usize,
    pub timeouts: usize,
    pub mean: f64,
    pub sd: f64,
    pub std_error: f64,
    /// Present when at least 30 replicas completed.
    pub ks: Option<KsResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTimeRun {
    pub stats: TransitionTimeStats,
    /// Completed replicas in replica order.
    pub records: Vec<HittingRecord>,
}

fn collect_stats(n: usize, outcomes: Vec<Result<HittingRecord>>) -> Result<TransitionTimeRun> {
    let mut records = Vec::with_capacity(n);
    let mut timeouts = 0;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(Error::Timeout { .. }) => timeouts += 1,
            Err(e) => return Err(e),
        }
    }
    // more than 1% of replicas
    if timeouts * 100 > n {
        return Err(Error::TooManyTimeouts { timeouts, n });
    }
    let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
    let s = summarize(&taus).ok_or(Error::TooManyTimeouts { timeouts, n })?;
    let ks = if taus.len() >= KS_MIN_SAMPLES {
        exp_law_test(&taus).ok()
    } else {
        None
    };
    Ok(TransitionTimeRun {
        stats: TransitionTimeStats {
            n,
            completed: records.len(),
            timeouts,
            mean: s.mean,
            sd: s.sd,
            std_error: s.std_error,
            ks,
        },
        records,
    })
}

/// Mean and dispersion of the transition time over `n` independent replicas.
pub fn mc_transition_time(
    config: &SdeConfig,
    start_well: usize,
    n: usize,
) -> Result<TransitionTimeRun> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let budget = config.step_budget(start_well)?;
    let outcomes = map_replicas(n, |r| {
        let mut rng = replica_rng(config.master_seed, r);
        let center = &config.wells[start_well].center;
        run_until_hit(config, start_well, center, r, budget, &mut rng)
    });
    collect_stats(n, outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtHalvingCheck {
    pub coarse: TransitionTimeRun,
    pub fine: TransitionTimeRun,
    /// `fine.mean - coarse.mean`.
    pub shift: f64,
}

impl DtHalvingCheck {
    /// Shift below one standard error of the coarse estimate.
    pub fn passes(&self) -> bool {
        self.shift.abs() < self.coarse.stats.std_error
    }
}

/// Runs every replica at `dt` and `dt/2` on the same Brownian path: the
/// coarse increment is the sum of two fine increments. The shift in the
/// mean then measures discretization bias instead of sampling noise.
pub fn dt_halving_check(config: &SdeConfig, start_well: usize, n: usize) -> Result<DtHalvingCheck> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let budget = config.step_budget(start_well)?;
    let pairs = map_replicas(n, |r| coupled_pair(config, start_well, r, budget));
    let (coarse, fine): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let coarse = collect_stats(n, coarse)?;
    let fine = collect_stats(n, fine)?;
    let shift = fine.stats.mean - coarse.stats.mean;
    Ok(DtHalvingCheck {
        coarse,
        fine,
        shift,
    })
}

fn coupled_pair(
    config: &SdeConfig,
    start_well: usize,
    replica: u64,
    budget: u64,
) -> (Result<HittingRecord>, Result<HittingRecord>) {
    let dt = config.dt;
    let center = &config.wells[start_well].center;
    let mut coarse = Walker::new(&config.spec, center, config.eps, dt);
    let mut fine = Walker::new(&config.spec, center, config.eps, dt / 2.0);
    let mut rng = replica_rng(config.master_seed, replica);
    let d = center.len();
    let (mut z1, mut z2) = (vec![0.0; d], vec![0.0; d]);
    let mut coarse_out: Option<Result<HittingRecord>> = None;
    let mut fine_out: Option<Result<HittingRecord>> = None;
    let (mut coarse_outside, mut fine_outside) = (0u64, 0u64);
    let mk = |hit_well, steps: u64, outside: u64, h: f64| HittingRecord {
        replica,
        start_well,
        hit_well,
        tau: steps as f64 * h,
        steps,
        excursion_time: outside as f64 * h,
    };
    if let Some(j) = hit_target(config, start_well, &coarse.x) {
        let r = mk(j, 0, 0, dt);
        return (
            Ok(r),
            Ok(HittingRecord {
                excursion_time: 0.0,
                ..r
            }),
        );
    }
    for step in 1..=budget {
        for k in 0..d {
            z1[k] = rng.sample(StandardNormal);
            z2[k] = rng.sample(StandardNormal);
        }
        if fine_out.is_none() {
            for (half, z) in [(0u64, &z1), (1, &z2)] {
                if config.well_of(&fine.x).is_none() {
                    fine_outside += 1;
                }
                fine.step(|k| z[k]);
                if let Some(j) = hit_target(config, start_well, &fine.x) {
                    fine_out = Some(Ok(mk(j, 2 * step - 1 + half, fine_outside, dt / 2.0)));
                    break;
                }
            }
        }
        if coarse_out.is_none() {
            if config.well_of(&coarse.x).is_none() {
                coarse_outside += 1;
            }
            coarse.step(|k| (z1[k] + z2[k]) * std::f64::consts::FRAC_1_SQRT_2);
            if let Some(j) = hit_target(config, start_well, &coarse.x) {
                coarse_out = Some(Ok(mk(j, step, coarse_outside, dt)));
            }
        }
        if coarse_out.is_some() && fine_out.is_some() {
            break;
        }
    }
    let timeout = Error::Timeout {
        replica,
        steps: budget,
    };
    (
        coarse_out.unwrap_or_else(|| Err(timeout.clone())),
        fine_out.unwrap_or(Err(timeout)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionEstimate {
    pub n: usize,
    pub theta: f64,
    pub t: f64,
    /// `E[Delta(theta t)] / theta`.
    pub mean: f64,
    pub std_error: f64,
    /// `Delta(theta t) / theta` per replica.
    pub per_replica: Vec<f64>,
}

/// Monte Carlo estimate of `E[Delta(theta t)] / theta` from the centre of
/// `start_well`, where `Delta` is the time spent outside every well.
pub fn excursion_fraction(
    config: &SdeConfig,
    start_well: usize,
    theta: f64,
    t: f64,
    n: usize,
) -> Result<ExcursionEstimate> {
    config.check_well(start_well)?;
    if !(theta > 0.0 && t > 0.0 && (theta * t).is_finite()) {
        return Err(Error::InvalidParameter(
            "horizon theta * t must be > 0".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let steps = (theta * t / config.dt).round() as u64;
    let center = &config.wells[start_well].center;
    let per_replica = map_replicas(n, |r| {
        let mut rng = replica_rng(config.master_seed, r);
        let mut w = Walker::new(&config.spec, center, config.eps, config.dt);
        let mut noise = vec![0.0; center.len()];
        let mut outside = 0u64;
        for _ in 0..steps {
            if config.well_of(&w.x).is_none() {
                outside += 1;
            }
            for z in noise.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            w.step(|k| noise[k]);
        }
        outside as f64 * config.dt / theta
    });
    let s = summarize(&per_replica).ok_or(Error::InvalidParameter("no replicas".into()))?;
    Ok(ExcursionEstimate {
        n,
        theta,
        t,
        mean: s.mean,
        std_error: s.std_error,
        per_replica,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::gradient_flow;

    fn quartic_config(eps: f64, dt: f64, radius: f64, seed: u64) -> SdeConfig {
        let spec = PotentialSpec::standard_quartic();
        let wells = vec![
            WellSet::new(&spec, vec![-1.0], radius).unwrap(),
            WellSet::new(&spec, vec![1.0], radius).unwrap(),
        ];
        SdeConfig::new(spec, eps, dt, seed, wells).unwrap()
    }

    #[test]
    fn deterministic_step_is_gradient_descent() {
        let q = PotentialSpec::standard_quartic();
        let x = em_step(&[0.5], &q, 0.0, 0.01, &[1.3]).unwrap();
        assert_eq!(x, vec![0.5 - 0.01 * (0.125 - 0.5)]);
        let harmonic = PotentialSpec::separable(1.0, 1.0, vec![1.0]).unwrap();
        // U = y^2/2 in the second coordinate
        let x = em_step(&[0.0, 1.0], &harmonic, 0.3, 0.1, &[0.0, 0.0]).unwrap();
        assert!((x[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn increment_variance_is_two_eps_dt() {
        let q = PotentialSpec::standard_quartic();
        let (eps, dt) = (0.2, 0.01);
        let n = 100_000;
        let mut rng = replica_rng(5, 0);
        let drift = -(0.3f64.powi(3) - 0.3) * dt;
        let incs: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                em_step(&[0.3], &q, eps, dt, &[z]).unwrap()[0] - 0.3 - drift
            })
            .collect();
        let var = incs.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let target = 2.0 * eps * dt;
        // the variance of a squared normal sample is 2 sigma^4
        let se = (2.0f64).sqrt() * target / (n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
    }

    #[test]
    fn zero_noise_never_leaves_the_basin() {
        let q = PotentialSpec::standard_quartic();
        let mut rng = replica_rng(1, 0);
        for _ in 0..100 {
            let x0: f64 = rng.random_range(-1.8..-0.05);
            let mut x = vec![x0];
            for _ in 0..5_000 {
                x = em_step(&x, &q, 0.0, 0.01, &[0.0]).unwrap();
                assert!(x[0] < 0.0);
            }
            let end = gradient_flow(&q, &x, 0.01, 1e-8, 100_000).unwrap().point;
            assert!((end[0] + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn well_validation() {
        let q = PotentialSpec::standard_quartic();
        assert!(WellSet::new(&q, vec![-1.0], 0.99).is_ok());
        assert!(WellSet::new(&q, vec![-1.0], 1.0).is_err());
        assert!(WellSet::new(&q, vec![0.5], 0.1).is_err());
        assert!(WellSet::new(&q, vec![0.0], 0.1).is_err());
        let wells = vec![
            WellSet {
                center: vec![-1.0],
                radius: 1.2,
            },
            WellSet {
                center: vec![1.0],
                radius: 1.2,
            },
        ];
        assert!(SdeConfig::new(q, 0.1, 1e-3, 0, wells).is_err());
    }

    #[test]
    fn dt_sanity_warning() {
        assert!(quartic_config(0.1, 1e-3, 0.2, 0).warnings().is_empty());
        assert_eq!(quartic_config(0.1, 1e-2, 0.2, 0).warnings().len(), 1);
    }

    #[test]
    fn start_inside_target_hits_immediately() {
        let spec = PotentialSpec::standard_quartic();
        let wells = vec![
            WellSet {
                center: vec![-1.0],
                radius: 0.1,
            },
            WellSet {
                center: vec![-0.95],
                radius: 0.2,
            },
        ];
        let config = SdeConfig {
            spec,
            eps: 0.1,
            dt: 1e-3,
            master_seed: 0,
            wells,
            max_steps: Some(10),
        };
        let r = simulate_until_hit(&config, 0, 0).unwrap();
        assert_eq!((r.tau, r.steps, r.hit_well), (0.0, 0, 1));
    }

    #[test]
    fn finds_the_other_well() {
        let config = quartic_config(0.1, 1e-3, 0.2, 42);
        let r = simulate_until_hit(&config, 0, 0).unwrap();
        assert_eq!(r.hit_well, 1);
        assert!(r.tau > 0.0 && r.tau.is_finite());
        assert!(r.excursion_time >= 0.0 && r.excursion_time <= r.tau);
        assert_eq!(r, simulate_until_hit(&config, 0, 0).unwrap());
    }

    #[test]
    fn timeout_contract() {
        let config = quartic_config(1e-4, 1e-3, 0.2, 0).with_max_steps(1);
        assert_eq!(
            simulate_until_hit(&config, 0, 3),
            Err(Error::Timeout {
                replica: 3,
                steps: 1
            })
        );
        assert!(matches!(
            mc_transition_time(&config, 0, 10),
            Err(Error::TooManyTimeouts {
                timeouts: 10,
                n: 10
            })
        ));
        assert!(mc_transition_time(&config, 0, 0).is_err());
    }

    #[test]
    fn default_budget_follows_eyring_kramers() {
        let config = quartic_config(0.1, 1e-3, 0.2, 0);
        let ek = std::f64::consts::PI * 2f64.sqrt() * 2.5f64.exp();
        assert_eq!(
            config.step_budget(0).unwrap(),
            (10.0 * ek / 1e-3).ceil() as u64
        );
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let config = quartic_config(0.15, 2e-3, 0.3, 77);
        let a = mc_transition_time(&config, 0, 40).unwrap();
        let b = mc_transition_time(&config, 0, 40).unwrap();
        assert_eq!(a, b);
        assert!(a.stats.ks.is_some());
        assert!(a.records.windows(2).all(|w| w[0].replica < w[1].replica));
    }

    #[test]
    fn coupled_coarse_path_matches_plain_scheme_at_zero_noise_limit() {
        // with a tiny dt the two discretizations of one Brownian path hit at
        // nearly the same time
        let config = quartic_config(0.15, 2e-4, 0.3, 3);
        let check = dt_halving_check(&config, 0, 8).unwrap();
        for (c, f) in check.coarse.records.iter().zip(&check.fine.records) {
            assert_eq!(c.replica, f.replica);
            assert!(
                (c.tau - f.tau).abs() < 0.05 * c.tau.max(1.0),
                "{} vs {}",
                c.tau,
                f.tau
            );
        }
    }

    #[test]
    fn excursion_contracts() {
        // deep, narrow noise: the path never leaves a wide well
        let config = quartic_config(1e-3, 1e-2, 0.9, 0);
        let e = excursion_fraction(&config, 0, 10.0, 1.0, 4).unwrap();
        assert_eq!(e.mean, 0.0);
        let config = quartic_config(0.1, 1e-3, 0.2, 0);
        let e = excursion_fraction(&config, 1, 5.0, 2.0, 8).unwrap();
        assert!(e.per_replica.iter().all(|v| (0.0..=2.0).contains(v)));
        assert!(excursion_fraction(&config, 0, 0.0, 1.0, 4).is_err());
    }
}
