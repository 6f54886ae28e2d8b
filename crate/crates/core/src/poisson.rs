//! Test functions for the reduced chain: the Poisson equation
//! `L phi = theta^{-1} a(i) (Lbar f)(i)` on each well (zero off the wells),
//! solved directly and, for reversible chains, by minimizing
//! `1/2 theta D(phi) + sum_i a(i) (Lbar f)(i) int_{E_i} phi dmu`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{is_reversible, Generator, Measure, MetastablePartition, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::linalg;

/// Solvability, residual and identity checks all use this tolerance.
pub const POISSON_TOL: f64 = 1e-10;
/// `nu Lbar = 0` must hold to this tolerance.
pub const INVARIANCE_TOL: f64 = 1e-12;
const REVERSIBILITY_TOL: f64 = 1e-10;

/// Reduction target: time scale, limit chain and test vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSpec {
    partition: MetastablePartition,
    theta: f64,
    nu: Vec<f64>,
    limit: DMatrix<f64>,
    f: Vec<f64>,
}

impl ReductionSpec {
    /// `limit` is the full `K x K` generator of the reduced chain, `nu` its
    /// invariant law.
    pub fn new(
        partition: MetastablePartition,
        theta: f64,
        nu: Vec<f64>,
        limit: &[Vec<f64>],
        f: Vec<f64>,
    ) -> Result<Self> {
        let k = partition.n_wells();
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta must be > 0, got {theta}"
            )));
        }
        for (name, len) in [
            ("nu", nu.len()),
            ("f", f.len()),
            ("limit generator", limit.len()),
        ] {
            if len != k {
                return Err(Error::InvalidParameter(format!(
                    "{name} has length {len}, expected {k} wells"
                )));
            }
        }
        if limit.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidGenerator(
                "limit generator must be K x K".into(),
            ));
        }
        if nu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if (nu.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter("nu must sum to 1".into()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("f"));
        }
        let limit = DMatrix::from_fn(k, k, |i, j| limit[i][j]);
        let mut scale = 1.0f64;
        for i in 0..k {
            let mut off = 0.0;
            for j in 0..k {
                let r = limit[(i, j)];
                if !r.is_finite() {
                    return Err(Error::NonFinite("limit generator"));
                }
                if i != j {
                    if r < 0.0 {
                        return Err(Error::InvalidGenerator(format!(
                            "negative limit rate ({i},{j}) = {r}"
                        )));
                    }
                    off += r;
                }
            }
            scale = scale.max(off);
            if (off + limit[(i, i)]).abs() > 1e-14 * off.max(1.0) {
                return Err(Error::InvalidGenerator(format!(
                    "limit row {i} does not sum to 0"
                )));
            }
        }
        let spec = Self {
            partition,
            theta,
            nu,
            limit,
            f,
        };
        let defect = spec.invariance_defect();
        if defect > INVARIANCE_TOL * scale {
            return Err(Error::InvalidParameter(format!(
                "nu is not invariant for the limit generator: |nu L| = {defect:e}"
            )));
        }
        Ok(spec)
    }

    /// Symmetric three-well reduction: two wells `{0}`, `{2}`, `theta = 1/q`,
    /// `nu = (1/2, 1/2)`, limit rates `1/2` and `f = (0, 1)`.
    pub fn symmetric_three_well(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {q}"
            )));
        }
        Self::new(
            MetastablePartition::new(3, vec![vec![0], vec![2]])?,
            1.0 / q,
            vec![0.5, 0.5],
            &[vec![-0.5, 0.5], vec![0.5, -0.5]],
            vec![0.0, 1.0],
        )
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta must be > 0, got {theta}"
            )));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_f(mut self, f: Vec<f64>) -> Result<Self> {
        if f.len() != self.f.len() || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "f must be a finite K-vector".into(),
            ));
        }
        self.f = f;
        Ok(self)
    }

    pub fn partition(&self) -> &MetastablePartition {
        &self.partition
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn limit(&self) -> &DMatrix<f64> {
        &self.limit
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `max_j |(nu Lbar)(j)|`.
    pub fn invariance_defect(&self) -> f64 {
        let nu_l = DVector::from_column_slice(&self.nu).transpose() * &self.limit;
        nu_l.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(Lbar f)(i)`.
    pub fn limit_applied(&self) -> Vec<f64> {
        (&self.limit * DVector::from_column_slice(&self.f))
            .iter()
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleWeights {
    /// `a(i) = nu(i) / mu(E_i)`.
    pub a: Vec<f64>,
    /// `mu(E_i)`.
    pub well_mass: Vec<f64>,
}

impl ScaleWeights {
    /// `max_i |a(i) - 1|`.
    pub fn drift(&self) -> f64 {
        self.a.iter().fold(0.0, |m, a| m.max((a - 1.0).abs()))
    }
}

pub fn scale_weights(mu: &Measure, spec: &ReductionSpec) -> Result<ScaleWeights> {
    let p = &spec.partition;
    if mu.len() != p.n_states() {
        return Err(Error::DimensionMismatch {
            expected: p.n_states(),
            got: mu.len(),
        });
    }
    let well_mass: Vec<f64> = p.wells().iter().map(|w| mu.mass(w)).collect();
    if let Some(i) = well_mass.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::EmptyWell(i));
    }
    let a = spec.nu.iter().zip(&well_mass).map(|(n, m)| n / m).collect();
    Ok(ScaleWeights { a, well_mass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rhs {
    pub values: Vec<f64>,
    /// `|sum_x rhs(x) mu(x)|`.
    pub defect: f64,
}

/// `rhs(x) = theta^{-1} a(i) (Lbar f)(i)` on `E_i`, zero off the wells.
pub fn build_rhs(weights: &ScaleWeights, spec: &ReductionSpec) -> Result<Rhs> {
    let rhs = build_rhs_unchecked(weights, spec)?;
    if rhs.defect > POISSON_TOL {
        return Err(Error::Solvability {
            defect: rhs.defect,
            tolerance: POISSON_TOL,
        });
    }
    Ok(rhs)
}

fn build_rhs_unchecked(weights: &ScaleWeights, spec: &ReductionSpec) -> Result<Rhs> {
    let p = &spec.partition;
    if weights.a.len() != p.n_wells() || weights.well_mass.len() != p.n_wells() {
        return Err(Error::DimensionMismatch {
            expected: p.n_wells(),
            got: weights.a.len(),
        });
    }
    let lf = spec.limit_applied();
    let per_well: Vec<f64> = (0..p.n_wells())
        .map(|i| weights.a[i] * lf[i] / spec.theta)
        .collect();
    let values = (0..p.n_states())
        .map(|x| p.project(x).map_or(0.0, |i| per_well[i]))
        .collect();
    let defect = per_well
        .iter()
        .zip(&weights.well_mass)
        .map(|(v, m)| v * m)
        .sum::<f64>()
        .abs();
    Ok(Rhs { values, defect })
}

fn check_sizes(gen: &Generator, v: &[f64], mu: &Measure) -> Result<()> {
    let n = gen.n_states();
    for got in [v.len(), mu.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

/// `sum_x mu(x) v(x)`.
pub fn mu_mean(v: &[f64], mu: &Measure) -> f64 {
    v.iter().zip(mu.weights()).map(|(a, b)| a * b).sum()
}

/// `L psi = rhs` with `sum_x psi(x) mu(x) = 0`, by a bordered direct solve.
pub fn solve_poisson(gen: &Generator, rhs: &[f64], mu: &Measure) -> Result<Vec<f64>> {
    check_sizes(gen, rhs, mu)?;
    let defect = mu_mean(rhs, mu).abs();
    if defect > POISSON_TOL {
        return Err(Error::Solvability {
            defect,
            tolerance: POISSON_TOL,
        });
    }
    let n = gen.n_states();
    let l = gen.matrix();
    // [[L, 1], [mu^T, 0]] [psi; s] = [rhs; 0]; s absorbs the solvability defect
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(l);
    for x in 0..n {
        m[(x, n)] = 1.0;
        m[(n, x)] = mu.weights()[x];
    }
    let mut b = DVector::zeros(n + 1);
    b.rows_mut(0, n).copy_from_slice(rhs);
    let sol = linalg::solve(m, b, "bordered Poisson system")?;
    Ok(sol.rows(0, n).iter().copied().collect())
}

/// `max_x |(L psi)(x) - rhs(x)|`.
pub fn poisson_residual(gen: &Generator, psi: &[f64], rhs: &[f64]) -> Result<f64> {
    if rhs.len() != gen.n_states() {
        return Err(Error::DimensionMismatch {
            expected: gen.n_states(),
            got: rhs.len(),
        });
    }
    let lpsi = gen.apply(psi)?;
    Ok(lpsi
        .iter()
        .zip(rhs)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// `D(psi) = sum_x mu(x) psi(x) (-L psi)(x)`.
pub fn dirichlet_form(gen: &Generator, mu: &Measure, psi: &[f64]) -> Result<f64> {
    check_sizes(gen, psi, mu)?;
    let lpsi = gen.apply(psi)?;
    Ok(-psi
        .iter()
        .zip(&lpsi)
        .zip(mu.weights())
        .map(|((p, l), w)| w * p * l)
        .sum::<f64>())
}

/// `sum_i a(i) (Lbar f)(i) int_{E_i} psi dmu`.
pub fn linear_term(
    psi: &[f64],
    mu: &Measure,
    weights: &ScaleWeights,
    spec: &ReductionSpec,
) -> Result<f64> {
    let p = &spec.partition;
    if psi.len() != p.n_states() || mu.len() != p.n_states() {
        return Err(Error::DimensionMismatch {
            expected: p.n_states(),
            got: psi.len(),
        });
    }
    let lf = spec.limit_applied();
    let w = mu.weights();
    Ok((0..p.n_wells())
        .map(|i| {
            let integral: f64 = p.well(i).iter().map(|&x| psi[x] * w[x]).sum();
            weights.a[i] * lf[i] * integral
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalSolution {
    /// Minimizer in the mean-zero gauge.
    pub psi: Vec<f64>,
    /// `theta D(psi)`.
    pub lambda: f64,
    /// `|linear term + lambda|`, which vanishes at the minimizer.
    pub identity_defect: f64,
    pub iterations: u64,
}

/// Minimizes the quadratic functional over mean-zero functions by
/// Jacobi-preconditioned conjugate gradients on `theta M (-L)`, `M = diag(mu)`.
pub fn variational_minimize(
    gen: &Generator,
    mu: &Measure,
    weights: &ScaleWeights,
    spec: &ReductionSpec,
) -> Result<VariationalSolution> {
    let n = gen.n_states();
    spec.partition.check_chain(gen)?;
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len(),
        });
    }
    if !is_reversible(gen, mu, REVERSIBILITY_TOL) {
        return Err(Error::NotReversible);
    }
    let rhs = build_rhs(weights, spec)?;
    let theta = spec.theta;
    let w = mu.weights();
    let l = gen.matrix();
    // symmetric positive semidefinite, kernel = constants
    let a = DMatrix::from_fn(n, n, |x, y| -theta * w[x] * l[(x, y)]);
    // gradient of the linear term; solve A psi = -g
    let mut b = DVector::from_fn(n, |x, _| -theta * w[x] * rhs.values[x]);
    // drop the (within tolerance) component along the kernel
    let shift = b.sum() / n as f64;
    b.add_scalar_mut(-shift);

    let max_iter = 20 * n as u64 + 200;
    let (mut psi, iterations) = pcg(&a, &b, max_iter)?;
    let mean = mu_mean(psi.as_slice(), mu);
    psi.add_scalar_mut(-mean);
    let psi: Vec<f64> = psi.iter().copied().collect();
    let lambda = theta * dirichlet_form(gen, mu, &psi)?;
    let lin = linear_term(&psi, mu, weights, spec)?;
    Ok(VariationalSolution {
        psi,
        lambda,
        identity_defect: (lin + lambda).abs(),
        iterations,
    })
}

fn pcg(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: u64) -> Result<(DVector<f64>, u64)> {
    let n = b.len();
    let inv_diag = DVector::from_fn(n, |i, _| {
        let d = a[(i, i)];
        if d > 0.0 {
            1.0 / d
        } else {
            1.0
        }
    });
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let tol = 1e-15 * b_norm;
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for k in 1..=max_iter {
        let ap = a * &p;
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        // recompute the true residual now and then against drift
        if k % 50 == 0 {
            r = b - a * &x;
        }
        if r.norm() <= tol {
            return Ok((x, k));
        }
        z = r.component_mul(&inv_diag);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = &z + beta * &p;
    }
    // accept a stalled iteration only if it actually reached working precision
    let true_res = (b - a * &x).norm();
    if true_res <= 1e-12 * b_norm {
        return Ok((x, max_iter));
    }
    Err(Error::NoConvergence { steps: max_iter })
}

/// Reference measure for well averages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AverageReference<'a> {
    /// Plain average over the states of each well.
    #[default]
    Counting,
    /// Average weighted by the given measure restricted to the well.
    Weighted(&'a Measure),
}

impl AverageReference<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Counting => "counting",
            Self::Weighted(_) => "weighted",
        }
    }
}

/// Average of `psi` over each well.
pub fn well_averages(
    psi: &[f64],
    partition: &MetastablePartition,
    reference: AverageReference<'_>,
) -> Result<Vec<f64>> {
    if psi.len() != partition.n_states() {
        return Err(Error::DimensionMismatch {
            expected: partition.n_states(),
            got: psi.len(),
        });
    }
    partition
        .wells()
        .iter()
        .enumerate()
        .map(|(i, well)| match reference {
            AverageReference::Counting => {
                Ok(well.iter().map(|&x| psi[x]).sum::<f64>() / well.len() as f64)
            }
            AverageReference::Weighted(mu) => {
                if mu.len() != psi.len() {
                    return Err(Error::DimensionMismatch {
                        expected: psi.len(),
                        got: mu.len(),
                    });
                }
                let mass = mu.mass(well);
                if !(mass > 0.0) {
                    return Err(Error::EmptyWell(i));
                }
                Ok(well.iter().map(|&x| psi[x] * mu.weights()[x]).sum::<f64>() / mass)
            }
        })
        .collect()
}

/// `argmin_c sum_i nu(i) (q(i) + c - f(i))^2`.
pub fn calibrate_constant(q: &[f64], f: &[f64], nu: &[f64]) -> f64 {
    let total: f64 = nu.iter().sum();
    q.iter()
        .zip(f)
        .zip(nu)
        .map(|((q, f), w)| w * (f - q))
        .sum::<f64>()
        / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellFlatness {
    /// `max_{x in E_i} |phi(x) - f(i)|`.
    pub sup: f64,
    /// `(sum_{x in E_i} (phi(x) - f(i))^2 mu(x))^{1/2}`.
    pub l2: f64,
}

pub fn flatness_report(
    phi: &[f64],
    f: &[f64],
    partition: &MetastablePartition,
    mu: &Measure,
) -> Result<Vec<WellFlatness>> {
    if phi.len() != partition.n_states() || mu.len() != partition.n_states() {
        return Err(Error::DimensionMismatch {
            expected: partition.n_states(),
            got: phi.len(),
        });
    }
    if f.len() != partition.n_wells() {
        return Err(Error::DimensionMismatch {
            expected: partition.n_wells(),
            got: f.len(),
        });
    }
    let w = mu.weights();
    Ok(partition
        .wells()
        .iter()
        .zip(f)
        .map(|(well, fi)| {
            let sup = well.iter().fold(0.0f64, |m, &x| m.max((phi[x] - fi).abs()));
            let l2 = well
                .iter()
                .map(|&x| (phi[x] - fi).powi(2) * w[x])
                .sum::<f64>()
                .sqrt();
            WellFlatness { sup, l2 }
        })
        .collect())
}

/// Full pipeline: weights, right-hand side, direct solve, calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub weights: ScaleWeights,
    pub rhs: Rhs,
    /// Mean-zero solution.
    pub psi: Vec<f64>,
    /// Counting-measure well averages of `psi`.
    pub q: Vec<f64>,
    pub c: f64,
    /// `psi + c`.
    pub phi: Vec<f64>,
    /// `theta D(psi)`.
    pub lambda: f64,
    /// `max |L phi - rhs|`.
    pub residual: f64,
    pub flatness: Vec<WellFlatness>,
}

impl PoissonSolution {
    pub fn max_sup_deviation(&self) -> f64 {
        self.flatness.iter().fold(0.0, |m, w| m.max(w.sup))
    }
}

pub fn solve_reduction(
    gen: &Generator,
    mu: &Measure,
    spec: &ReductionSpec,
) -> Result<PoissonSolution> {
    spec.partition.check_chain(gen)?;
    let weights = scale_weights(mu, spec)?;
    let rhs = build_rhs(&weights, spec)?;
    let psi = solve_poisson(gen, &rhs.values, mu)?;
    let q = well_averages(&psi, &spec.partition, AverageReference::Counting)?;
    let c = calibrate_constant(&q, &spec.f, &spec.nu);
    let phi: Vec<f64> = psi.iter().map(|v| v + c).collect();
    let residual = poisson_residual(gen, &phi, &rhs.values)?;
    let lambda = spec.theta * dirichlet_form(gen, mu, &psi)?;
    let flatness = flatness_report(&phi, &spec.f, &spec.partition, mu)?;
    Ok(PoissonSolution {
        weights,
        rhs,
        psi,
        q,
        c,
        phi,
        lambda,
        residual,
        flatness,
    })
}
