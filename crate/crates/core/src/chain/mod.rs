//! Finite-state continuous-time Markov chains: generators, invariant
//! measures, metastable partitions and the exact potential theory built on
//! them.

mod potential;
mod sim;
mod trace;

pub use potential::{
    capacity, equilibrium_potential, heuristic_mean_time, mean_hitting_time, mean_hitting_times,
};
pub use sim::{
    empirical_rates, excursion_time, simulate_chain, trace_and_project, trace_path, EmpiricalRates,
    JumpSampler, Path, Segment,
};
pub use trace::{mean_jump_rate, reversible_capacity_identity, trace_generator};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Row sums must vanish to this tolerance, relative to the row's total rate.
pub const ROW_SUM_TOL: f64 = 1e-14;
/// Measures must be normalized to this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Rate matrix of an irreducible continuous-time Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    rates: DMatrix<f64>,
    labels: Vec<String>,
}

impl Generator {
    /// Validates a full rate matrix including its diagonal.
    pub fn from_rates(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidGenerator("empty rate matrix".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidGenerator(format!(
                "row {r} has {} entries, expected {n}",
                rows[r].len()
            )));
        }
        let rates = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                let r = rates[(i, j)];
                if !r.is_finite() {
                    return Err(Error::InvalidGenerator(format!(
                        "rate ({i},{j}) is not finite"
                    )));
                }
                if i != j {
                    if r < 0.0 {
                        return Err(Error::InvalidGenerator(format!(
                            "negative off-diagonal rate ({i},{j}) = {r}"
                        )));
                    }
                    off += r;
                }
            }
            let sum = off + rates[(i, i)];
            if sum.abs() > ROW_SUM_TOL * off.max(1.0) {
                return Err(Error::InvalidGenerator(format!("row {i} sums to {sum:e}")));
            }
        }
        Self::checked(rates)
    }

    /// Builds a generator from off-diagonal rates; diagonal entries of the
    /// input are ignored and replaced by minus the row's total exit rate.
    pub fn from_off_diagonal(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGenerator("rate matrix must be square".into()));
        }
        let mut filled: Vec<Vec<f64>> = rows.to_vec();
        for (i, row) in filled.iter_mut().enumerate() {
            row[i] = 0.0;
            let exit: f64 = row.iter().sum();
            row[i] = -exit;
        }
        Self::from_rates(&filled)
    }

    fn checked(rates: DMatrix<f64>) -> Result<Self> {
        let n = rates.nrows();
        let g = Self {
            rates,
            labels: (0..n).map(|i| i.to_string()).collect(),
        };
        if !g.is_irreducible() {
            return Err(Error::Reducible);
        }
        Ok(g)
    }

    /// Trusted construction: rows are rebalanced so the diagonal is exactly
    /// minus the exit rate and tiny negative round-off is clipped.
    pub(crate) fn from_matrix_unchecked(mut rates: DMatrix<f64>, labels: Vec<String>) -> Self {
        let n = rates.nrows();
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j {
                    if rates[(i, j)] < 0.0 {
                        rates[(i, j)] = 0.0;
                    }
                    off += rates[(i, j)];
                }
            }
            rates[(i, i)] = -off;
        }
        Self { rates, labels }
    }

    /// Two states with rate `a` from the first to the second and `b` back.
    pub fn two_state(a: f64, b: f64) -> Result<Self> {
        Self::from_off_diagonal(&[vec![0.0, a], vec![b, 0.0]])
    }

    /// Three states `1 - 2 - 3` with a shallow middle state: rates
    /// `1->2 = q`, `2->1 = 1`, `2->3 = 1`, `3->2 = q`.
    pub fn symmetric_three_well(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {q}"
            )));
        }
        Self::from_off_diagonal(&[vec![0.0, q, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, q, 0.0]])
    }

    /// Reversible chain with stationary weights `mu` (not necessarily
    /// normalized) and symmetric edge conductances: `r(x,y) = c(x,y) / mu(x)`.
    pub fn reversible(mu: &[f64], conductance: &[Vec<f64>]) -> Result<Self> {
        let n = mu.len();
        if conductance.len() != n || conductance.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: conductance.len(),
            });
        }
        if mu.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        for x in 0..n {
            for y in 0..x {
                if conductance[x][y] != conductance[y][x] {
                    return Err(Error::InvalidParameter(format!(
                        "conductance ({x},{y}) is not symmetric"
                    )));
                }
            }
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|x| (0..n).map(|y| conductance[x][y] / mu[x]).collect())
            .collect();
        Self::from_off_diagonal(&rows)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states() {
            return Err(Error::DimensionMismatch {
                expected: self.n_states(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[(x, y)]
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        -self.rates[(x, x)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rates
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// `(L f)(x) = sum_y r(x, y) (f(y) - f(x))`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_states() {
            return Err(Error::DimensionMismatch {
                expected: self.n_states(),
                got: f.len(),
            });
        }
        let n = self.n_states();
        Ok((0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| y != x)
                    .map(|y| self.rates[(x, y)] * (f[y] - f[x]))
                    .sum()
            })
            .collect())
    }

    fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(x) = stack.pop() {
                for y in 0..n {
                    let r = if forward {
                        self.rates[(x, y)]
                    } else {
                        self.rates[(y, x)]
                    };
                    if y != x && r > 0.0 && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}

/// Probability vector on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure(Vec<f64>);

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "measure weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "measure sums to {total}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.0[x]).sum()
    }
}

/// Unique `mu` with `mu L = 0`, by a direct solve of `L^T mu = 0` with the
/// last equation replaced by the normalization.
pub fn invariant_measure(gen: &Generator) -> Result<Measure> {
    let n = gen.n_states();
    let mut a = gen.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = linalg::solve(a, b, "invariant measure")?;
    let mut w: Vec<f64> = mu.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(Measure(w))
}

/// `max_y |(mu L)(y)|`.
pub fn stationarity_residual(gen: &Generator, mu: &Measure) -> f64 {
    let row = DVector::from_column_slice(mu.weights()).transpose() * gen.matrix();
    row.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Detailed balance `mu(x) r(x,y) = mu(y) r(y,x)` for every pair, with `tol`
/// relative to the larger of the two flows.
pub fn is_reversible(gen: &Generator, mu: &Measure, tol: f64) -> bool {
    let n = gen.n_states();
    let w = mu.weights();
    (0..n).all(|x| {
        (x + 1..n).all(|y| {
            let fxy = w[x] * gen.rate(x, y);
            let fyx = w[y] * gen.rate(y, x);
            (fxy - fyx).abs() <= tol * fxy.max(fyx)
        })
    })
}

/// Validated indicator of a nonempty set of states.
pub(crate) fn state_mask(n: usize, set: &[usize], name: &str) -> Result<Vec<bool>> {
    if set.is_empty() {
        return Err(Error::InvalidStateSet(format!("{name} is empty")));
    }
    let mut mask = vec![false; n];
    for &x in set {
        if x >= n {
            return Err(Error::InvalidStateSet(format!(
                "{name} contains state {x}, chain has {n} states"
            )));
        }
        if mask[x] {
            return Err(Error::InvalidStateSet(format!("{name} repeats state {x}")));
        }
        mask[x] = true;
    }
    Ok(mask)
}

/// Ordered wells `E_1..E_K` and the leftover set `Delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetastablePartition {
    n_states: usize,
    wells: Vec<Vec<usize>>,
    label: Vec<Option<usize>>,
}

impl MetastablePartition {
    pub fn new(n_states: usize, wells: Vec<Vec<usize>>) -> Result<Self> {
        if wells.is_empty() {
            return Err(Error::InvalidPartition("no wells".into()));
        }
        let mut label = vec![None; n_states];
        for (i, well) in wells.iter().enumerate() {
            if well.is_empty() {
                return Err(Error::InvalidPartition(format!("well {i} is empty")));
            }
            for &x in well {
                if x >= n_states {
                    return Err(Error::InvalidPartition(format!(
                        "well {i} contains state {x}, chain has {n_states} states"
                    )));
                }
                if let Some(j) = label[x] {
                    return Err(Error::InvalidPartition(format!(
                        "state {x} belongs to wells {j} and {i}"
                    )));
                }
                label[x] = Some(i);
            }
        }
        Ok(Self {
            n_states,
            wells,
            label,
        })
    }

    /// Every state its own well.
    pub fn singletons(states: &[usize], n_states: usize) -> Result<Self> {
        Self::new(n_states, states.iter().map(|&x| vec![x]).collect())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_wells(&self) -> usize {
        self.wells.len()
    }

    pub fn well(&self, i: usize) -> &[usize] {
        &self.wells[i]
    }

    pub fn wells(&self) -> &[Vec<usize>] {
        &self.wells
    }

    /// `Psi(x)`; `None` on `Delta`.
    pub fn project(&self, x: usize) -> Option<usize> {
        self.label[x]
    }

    /// `E`, in ascending state order.
    pub fn union(&self) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&x| self.label[x].is_some())
            .collect()
    }

    /// `E \ E_i`.
    pub fn others(&self, i: usize) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&x| matches!(self.label[x], Some(j) if j != i))
            .collect()
    }

    pub fn delta(&self) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&x| self.label[x].is_none())
            .collect()
    }

    pub fn check_chain(&self, gen: &Generator) -> Result<()> {
        if gen.n_states() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: gen.n_states(),
                got: self.n_states,
            });
        }
        Ok(())
    }

    fn check_well(&self, i: usize) -> Result<()> {
        if i >= self.n_wells() {
            return Err(Error::InvalidParameter(format!(
                "well index {i} out of range for {} wells",
                self.n_wells()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_validation() {
        assert!(Generator::from_rates(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).is_ok());
        assert!(matches!(
            Generator::from_rates(&[vec![-1.0, 1.0], vec![2.0, -1.0]]),
            Err(Error::InvalidGenerator(_))
        ));
        assert!(matches!(
            Generator::from_off_diagonal(&[vec![0.0, -1.0], vec![1.0, 0.0]]),
            Err(Error::InvalidGenerator(_))
        ));
        assert_eq!(
            Generator::from_off_diagonal(&[vec![0.0, 1.0], vec![0.0, 0.0]]),
            Err(Error::Reducible)
        );
        let g = Generator::symmetric_three_well(0.1).unwrap();
        assert_eq!(g.exit_rate(1), 2.0);
        assert_eq!(g.apply(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn invariant_measures() {
        let mu = invariant_measure(&Generator::two_state(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(mu.weights(), &[0.5, 0.5]);
        let g = Generator::two_state(1.0, 2.0).unwrap();
        let mu = invariant_measure(&g).unwrap();
        assert!((mu.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((mu.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(stationarity_residual(&g, &mu) <= 1e-12);

        let q = 0.1;
        let g = Generator::symmetric_three_well(q).unwrap();
        let mu = invariant_measure(&g).unwrap();
        let expect = [1.0 / (2.0 + q), q / (2.0 + q), 1.0 / (2.0 + q)];
        for (a, b) in mu.weights().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((mu.weights()[0] - 0.47619).abs() < 1e-5);
    }

    #[test]
    fn reversibility() {
        let g = Generator::two_state(0.3, 7.0).unwrap();
        assert!(is_reversible(&g, &invariant_measure(&g).unwrap(), 1e-12));
        let g = Generator::symmetric_three_well(0.1).unwrap();
        assert!(is_reversible(&g, &invariant_measure(&g).unwrap(), 1e-12));
        let cycle = Generator::from_off_diagonal(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let mu = invariant_measure(&cycle).unwrap();
        assert!(!is_reversible(&cycle, &mu, 1e-12));
    }

    #[test]
    fn partition_structure() {
        let p = MetastablePartition::new(5, vec![vec![0, 1], vec![4]]).unwrap();
        assert_eq!(p.union(), vec![0, 1, 4]);
        assert_eq!(p.others(0), vec![4]);
        assert_eq!(p.delta(), vec![2, 3]);
        assert_eq!(p.project(1), Some(0));
        assert_eq!(p.project(2), None);
        assert!(MetastablePartition::new(3, vec![vec![0], vec![0]]).is_err());
        assert!(MetastablePartition::new(3, vec![vec![]]).is_err());
        assert!(MetastablePartition::new(3, vec![vec![3]]).is_err());
    }
}
