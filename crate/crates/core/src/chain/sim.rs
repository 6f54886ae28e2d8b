//! Exact simulation of chain paths and the time change that turns them
//! into trace and projected paths.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{Generator, MetastablePartition};
use crate::error::{Error, Result};
use crate::rng::{replica_rng, ReplicaRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub state: usize,
    pub duration: f64,
}

/// Piecewise-constant path: consecutive segments have different states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub segments: Vec<Segment>,
    pub horizon: f64,
}

impl Path {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn jumps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    /// State occupied at time `t` (right-continuous), `None` past the horizon.
    pub fn state_at(&self, t: f64) -> Option<usize> {
        let mut acc = 0.0;
        for s in &self.segments {
            acc += s.duration;
            if t < acc {
                return Some(s.state);
            }
        }
        None
    }

    fn push_merged(&mut self, state: usize, duration: f64) {
        match self.segments.last_mut() {
            Some(last) if last.state == state => last.duration += duration,
            _ => self.segments.push(Segment { state, duration }),
        }
        self.horizon += duration;
    }
}

/// Precomputed exit rates and cumulative jump distributions of a generator.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    exit: Vec<f64>,
    targets: Vec<Vec<(usize, f64)>>,
}

impl JumpSampler {
    pub fn new(gen: &Generator) -> Self {
        let n = gen.n_states();
        let mut exit = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for x in 0..n {
            let total = gen.exit_rate(x);
            let mut acc = 0.0;
            let row: Vec<(usize, f64)> = (0..n)
                .filter(|&y| y != x && gen.rate(x, y) > 0.0)
                .map(|y| {
                    acc += gen.rate(x, y);
                    (y, acc / total)
                })
                .collect();
            exit.push(total);
            targets.push(row);
        }
        Self { exit, targets }
    }

    pub fn n_states(&self) -> usize {
        self.exit.len()
    }

    /// Holding time in `x` and the next state; `None` for a state with no
    /// exit (only possible for a one-state chain).
    pub fn step(&self, rng: &mut ReplicaRng, x: usize) -> Option<(f64, usize)> {
        let total = self.exit[x];
        if total <= 0.0 {
            return None;
        }
        let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
        let u: f64 = rng.random();
        let row = &self.targets[x];
        let next = row
            .iter()
            .find(|(_, c)| u < *c)
            .or(row.last())
            .map(|(y, _)| *y)?;
        Some((hold, next))
    }

    /// Runs from `x0` until `stop` returns true on a completed segment or
    /// until `horizon` elapses; the last segment is truncated at the horizon.
    pub fn run(
        &self,
        rng: &mut ReplicaRng,
        x0: usize,
        horizon: f64,
        mut stop: impl FnMut(&Segment) -> bool,
    ) -> Path {
        let mut path = Path::default();
        if !(horizon > 0.0) {
            return path;
        }
        let mut x = x0;
        let mut t = 0.0;
        loop {
            match self.step(rng, x) {
                Some((hold, next)) if t + hold < horizon => {
                    let seg = Segment {
                        state: x,
                        duration: hold,
                    };
                    path.segments.push(seg);
                    t += hold;
                    if stop(&seg) {
                        break;
                    }
                    x = next;
                }
                _ => {
                    path.segments.push(Segment {
                        state: x,
                        duration: horizon - t,
                    });
                    break;
                }
            }
        }
        path.horizon = path.segments.iter().map(|s| s.duration).sum();
        path
    }
}

/// Exact simulation on `[0, horizon)`; the stream is replica 0 of `seed`.
pub fn simulate_chain(gen: &Generator, x0: usize, seed: u64, horizon: f64) -> Result<Path> {
    if x0 >= gen.n_states() {
        return Err(Error::InvalidStateSet(format!(
            "start state {x0} out of range"
        )));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be >= 0, got {horizon}"
        )));
    }
    let sampler = JumpSampler::new(gen);
    let mut rng = replica_rng(seed, 0);
    Ok(sampler.run(&mut rng, x0, horizon, |_| false))
}

/// Deletes the time spent in `Delta` (the trace process, on original
/// state indices); re-entries to the state just left are merged.
pub fn trace_path(path: &Path, partition: &MetastablePartition) -> Result<Path> {
    if let Some(first) = path.segments.first() {
        if partition.project(first.state).is_none() {
            return Err(Error::StartsOutsideWells);
        }
    }
    let mut out = Path::default();
    for s in &path.segments {
        if partition.project(s.state).is_some() {
            out.push_merged(s.state, s.duration);
        }
    }
    Ok(out)
}

/// Trace path mapped through `Psi`, consecutive equal labels merged. Total
/// time equals the occupation time of `E` over the original horizon.
pub fn trace_and_project(path: &Path, partition: &MetastablePartition) -> Result<Path> {
    let traced = trace_path(path, partition)?;
    let mut out = Path::default();
    for s in &traced.segments {
        let label = partition.project(s.state).unwrap_or_default();
        out.push_merged(label, s.duration);
    }
    Ok(out)
}

/// `Delta(horizon)`: time spent outside every well.
pub fn excursion_time(path: &Path, partition: &MetastablePartition) -> f64 {
    path.segments
        .iter()
        .filter(|s| partition.project(s.state).is_none())
        .map(|s| s.duration)
        .sum()
}

/// Jump counts and occupation times of a projected path, rescaled by
/// `theta` into rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRates {
    pub theta: f64,
    pub counts: Vec<Vec<u64>>,
    pub occupation: Vec<f64>,
}

impl EmpiricalRates {
    pub fn new(n_labels: usize, theta: f64) -> Self {
        Self {
            theta,
            counts: vec![vec![0; n_labels]; n_labels],
            occupation: vec![0.0; n_labels],
        }
    }

    pub fn n_labels(&self) -> usize {
        self.occupation.len()
    }

    pub fn record(&mut self, projected: &Path) -> Result<()> {
        let k = self.n_labels();
        if let Some(s) = projected.segments.iter().find(|s| s.state >= k) {
            return Err(Error::InvalidParameter(format!(
                "label {} out of range for {k} labels",
                s.state
            )));
        }
        for s in &projected.segments {
            self.occupation[s.state] += s.duration;
        }
        for w in projected.segments.windows(2) {
            self.counts[w[0].state][w[1].state] += 1;
        }
        Ok(())
    }

    /// Pools another estimate over the same labels.
    pub fn merge(&mut self, other: &EmpiricalRates) {
        for (a, b) in self.occupation.iter_mut().zip(&other.occupation) {
            *a += b;
        }
        for (ra, rb) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }

    pub fn total_jumps(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `theta * N(i -> j) / occupation(i)`; zero on the diagonal.
    pub fn rate(&self, i: usize, j: usize) -> Result<f64> {
        if self.occupation[i] <= 0.0 {
            return Err(Error::MissingData(i));
        }
        if i == j {
            return Ok(0.0);
        }
        Ok(self.theta * self.counts[i][j] as f64 / self.occupation[i])
    }

    /// Poisson standard error `theta * sqrt(N) / occupation`.
    pub fn std_error(&self, i: usize, j: usize) -> Result<f64> {
        if self.occupation[i] <= 0.0 {
            return Err(Error::MissingData(i));
        }
        if i == j {
            return Ok(0.0);
        }
        Ok(self.theta * (self.counts[i][j] as f64).sqrt() / self.occupation[i])
    }

    /// Full matrix, `None` in rows with no occupation.
    pub fn matrix(&self) -> Vec<Vec<Option<f64>>> {
        let k = self.n_labels();
        (0..k)
            .map(|i| (0..k).map(|j| self.rate(i, j).ok()).collect())
            .collect()
    }
}

pub fn empirical_rates(projected: &Path, theta: f64, n_labels: usize) -> Result<EmpiricalRates> {
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must be > 0, got {theta}"
        )));
    }
    let mut est = EmpiricalRates::new(n_labels, theta);
    est.record(projected)?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::trace_generator;
    use crate::stats::summarize;

    fn seg(state: usize, duration: f64) -> Segment {
        Segment { state, duration }
    }

    fn hand_path() -> Path {
        Path {
            segments: vec![seg(0, 1.0), seg(1, 0.5), seg(2, 1.5)],
            horizon: 3.0,
        }
    }

    #[test]
    fn hand_time_change() {
        let p = MetastablePartition::new(3, vec![vec![0], vec![2]]).unwrap();
        let proj = trace_and_project(&hand_path(), &p).unwrap();
        assert_eq!(proj.segments, vec![seg(0, 1.0), seg(1, 1.5)]);
        assert_eq!(proj.horizon, 2.5);
        assert_eq!(excursion_time(&hand_path(), &p), 0.5);
        let rates = empirical_rates(&proj, 1.0, 2).unwrap();
        assert_eq!(rates.rate(0, 1).unwrap(), 1.0);
        assert_eq!(rates.rate(1, 0).unwrap(), 0.0);
    }

    #[test]
    fn reentry_is_a_continuation() {
        let p = MetastablePartition::new(3, vec![vec![0], vec![2]]).unwrap();
        let path = Path {
            segments: vec![seg(0, 1.0), seg(1, 0.5), seg(0, 2.0)],
            horizon: 3.5,
        };
        let proj = trace_and_project(&path, &p).unwrap();
        assert_eq!(proj.segments, vec![seg(0, 3.0)]);
        let start_in_delta = Path {
            segments: vec![seg(1, 1.0)],
            horizon: 1.0,
        };
        assert_eq!(
            trace_and_project(&start_in_delta, &p),
            Err(Error::StartsOutsideWells)
        );
    }

    #[test]
    fn single_well_path_and_missing_data() {
        let p = MetastablePartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let path = Path {
            segments: vec![seg(0, 1.0), seg(1, 2.0)],
            horizon: 3.0,
        };
        let proj = trace_and_project(&path, &p).unwrap();
        assert_eq!(proj.segments, vec![seg(0, 3.0)]);
        let r = empirical_rates(&proj, 2.0, 2).unwrap();
        assert_eq!(r.rate(0, 1).unwrap(), 0.0);
        assert_eq!(r.rate(1, 0), Err(Error::MissingData(1)));
        assert_eq!(r.matrix()[1], vec![None, None]);
    }

    #[test]
    fn simulation_contract() {
        let g = Generator::symmetric_three_well(0.5).unwrap();
        assert!(simulate_chain(&g, 0, 1, 0.0).unwrap().is_empty());
        let a = simulate_chain(&g, 0, 9, 500.0).unwrap();
        let b = simulate_chain(&g, 0, 9, 500.0).unwrap();
        assert_eq!(a, b);
        assert!((a.horizon - 500.0).abs() < 1e-9);
        assert!(a.segments.iter().all(|s| s.duration > 0.0));
        assert!(a.segments.windows(2).all(|w| w[0].state != w[1].state));
    }

    #[test]
    fn holding_times_have_the_right_mean() {
        let rate = 1.7;
        let g = Generator::two_state(rate, rate).unwrap();
        let path = simulate_chain(&g, 0, 3, 1.2e5 / rate).unwrap();
        let holds: Vec<f64> = path.segments[..path.segments.len() - 1]
            .iter()
            .map(|s| s.duration)
            .collect();
        assert!(holds.len() > 100_000);
        let s = summarize(&holds).unwrap();
        assert!((s.mean - 1.0 / rate).abs() < 3.0 * s.std_error);
    }

    #[test]
    fn simulated_trace_rates_match_schur_complement() {
        let g = Generator::from_off_diagonal(&[
            vec![0.0, 0.7, 0.2, 0.0, 0.3, 0.1],
            vec![0.4, 0.0, 1.1, 0.2, 0.0, 0.0],
            vec![0.0, 0.9, 0.0, 0.5, 0.3, 0.2],
            vec![0.3, 0.0, 0.6, 0.0, 0.8, 0.0],
            vec![0.0, 0.2, 0.0, 1.2, 0.0, 0.6],
            vec![0.5, 0.0, 0.4, 0.0, 0.7, 0.0],
        ])
        .unwrap();
        let e = [0usize, 2, 5];
        let trace = trace_generator(&g, &e).unwrap();
        let p = MetastablePartition::singletons(&e, 6).unwrap();
        let path = simulate_chain(&g, 0, 11, 60_000.0).unwrap();
        let est = empirical_rates(&trace_and_project(&path, &p).unwrap(), 1.0, 3).unwrap();
        assert!(est.total_jumps() > 10_000);
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                let diff = (est.rate(i, j).unwrap() - trace.rate(i, j)).abs();
                assert!(diff < 3.0 * est.std_error(i, j).unwrap(), "cell ({i},{j})");
            }
        }
    }
}
