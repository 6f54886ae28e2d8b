//! Analytic energy landscapes `U : R^d -> R`, their catalogued critical
//! points, the zero-temperature gradient flow and the Eyring-Kramers
//! predictor for mean transition times.
//!
//! Every family has closed-form derivatives. Critical points come from the
//! family catalogue and are only *classified* here, never searched for.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient norm below which a point counts as critical.
pub const CRITICAL_TOL: f64 = 1e-8;
/// Hessian eigenvalues with smaller magnitude are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

const MAX_DIM: usize = 8;

/// Name + coefficients, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: String,
    pub coefficients: Vec<f64>,
    /// Only read by `polynomial-multiwell`.
    #[serde(default)]
    pub dimension: Option<usize>,
}

/// A catalogued potential family.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `U(x) = a x^4/4 - b x^2/2` on the line.
    QuarticDoubleWell { a: f64, b: f64 },
    /// Quartic double well in the first coordinate, harmonic `k_j x_j^2 / 2`
    /// confinement in the others.
    Separable { a: f64, b: f64, stiffness: Vec<f64> },
    /// `sum_k (a x_k^4/4 - b x_k^2/2)`: `2^d` minima, index-1 saddles on the
    /// coordinate hyperplanes.
    Multiwell { a: f64, b: f64, dim: usize },
}

impl PotentialSpec {
    pub fn quartic(a: f64, b: f64) -> Result<Self> {
        check_ab(a, b)?;
        Ok(Self::QuarticDoubleWell { a, b })
    }

    /// The textbook landscape `x^4/4 - x^2/2`.
    pub fn standard_quartic() -> Self {
        Self::QuarticDoubleWell { a: 1.0, b: 1.0 }
    }

    pub fn separable(a: f64, b: f64, stiffness: Vec<f64>) -> Result<Self> {
        check_ab(a, b)?;
        if stiffness.is_empty() || stiffness.len() + 1 > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "separable-polynomial needs 1..={} stiffness coefficients",
                MAX_DIM - 1
            )));
        }
        if stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::InvalidParameter(
                "stiffness coefficients must be positive".into(),
            ));
        }
        Ok(Self::Separable { a, b, stiffness })
    }

    pub fn multiwell(a: f64, b: f64, dim: usize) -> Result<Self> {
        check_ab(a, b)?;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "polynomial-multiwell dimension must be in 1..={MAX_DIM}"
            )));
        }
        Ok(Self::Multiwell { a, b, dim })
    }

    pub fn from_family(spec: &FamilySpec) -> Result<Self> {
        let c = &spec.coefficients;
        let need = |n: usize| -> Result<()> {
            if c.len() < n {
                Err(Error::InvalidParameter(format!(
                    "family {} needs at least {n} coefficients, got {}",
                    spec.family,
                    c.len()
                )))
            } else {
                Ok(())
            }
        };
        match spec.family.as_str() {
            "quartic-double-well-1d" => {
                need(2)?;
                if c.len() != 2 {
                    return Err(Error::InvalidParameter(
                        "quartic-double-well-1d takes exactly [a, b]".into(),
                    ));
                }
                Self::quartic(c[0], c[1])
            }
            "separable-polynomial" => {
                need(3)?;
                Self::separable(c[0], c[1], c[2..].to_vec())
            }
            "polynomial-multiwell" => {
                need(2)?;
                if c.len() != 2 {
                    return Err(Error::InvalidParameter(
                        "polynomial-multiwell takes exactly [a, b]".into(),
                    ));
                }
                Self::multiwell(c[0], c[1], spec.dimension.unwrap_or(2))
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown potential family {other:?}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::QuarticDoubleWell { .. } => 1,
            Self::Separable { stiffness, .. } => stiffness.len() + 1,
            Self::Multiwell { dim, .. } => *dim,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut g = vec![0.0; x.len()];
        self.grad_into(x, &mut g);
        Ok(g)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let d = self.dim();
        // All catalogued families are coordinate-separable.
        let mut h = DMatrix::zeros(d, d);
        for k in 0..d {
            h[(k, k)] = self.coord_curvature(k, x[k]);
        }
        Ok(h)
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Self::QuarticDoubleWell { a, b } => quartic_value(*a, *b, x[0]),
            Self::Separable { a, b, stiffness } => {
                quartic_value(*a, *b, x[0])
                    + stiffness
                        .iter()
                        .zip(&x[1..])
                        .map(|(k, y)| 0.5 * k * y * y)
                        .sum::<f64>()
            }
            Self::Multiwell { a, b, .. } => x.iter().map(|&y| quartic_value(*a, *b, y)).sum(),
        }
    }

    /// Hot-path gradient without input validation.
    #[inline]
    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::QuarticDoubleWell { a, b } => out[0] = quartic_grad(*a, *b, x[0]),
            Self::Separable { a, b, stiffness } => {
                out[0] = quartic_grad(*a, *b, x[0]);
                for ((o, k), y) in out[1..].iter_mut().zip(stiffness).zip(&x[1..]) {
                    *o = k * y;
                }
            }
            Self::Multiwell { a, b, .. } => {
                for (o, &y) in out.iter_mut().zip(x) {
                    *o = quartic_grad(*a, *b, y);
                }
            }
        }
    }

    fn coord_curvature(&self, k: usize, y: f64) -> f64 {
        match self {
            Self::QuarticDoubleWell { a, b } | Self::Multiwell { a, b, .. } => 3.0 * a * y * y - b,
            Self::Separable { a, b, stiffness } => {
                if k == 0 {
                    3.0 * a * y * y - b
                } else {
                    stiffness[k - 1]
                }
            }
        }
    }

    fn well_offset(&self) -> f64 {
        match self {
            Self::QuarticDoubleWell { a, b }
            | Self::Separable { a, b, .. }
            | Self::Multiwell { a, b, .. } => (b / a).sqrt(),
        }
    }

    /// Catalogued minima and index-1 saddles, minima first.
    pub fn catalogue(&self) -> Vec<Vec<f64>> {
        let s = self.well_offset();
        match self {
            Self::QuarticDoubleWell { .. } => vec![vec![-s], vec![s], vec![0.0]],
            Self::Separable { stiffness, .. } => {
                let pad = |x0: f64| {
                    let mut v = vec![x0];
                    v.extend(std::iter::repeat_n(0.0, stiffness.len()));
                    v
                };
                vec![pad(-s), pad(s), pad(0.0)]
            }
            Self::Multiwell { dim, .. } => {
                let d = *dim;
                let mut out = Vec::new();
                // minima: every sign pattern, ordered by the binary counter
                for mask in 0..(1usize << d) {
                    out.push(
                        (0..d)
                            .map(|k| if mask >> k & 1 == 1 { s } else { -s })
                            .collect(),
                    );
                }
                // saddles: one zero coordinate, signs on the remaining d-1
                for zero in 0..d {
                    for mask in 0..(1usize << (d - 1)) {
                        let mut bit = 0;
                        let mut p = vec![0.0; d];
                        for (k, v) in p.iter_mut().enumerate() {
                            if k == zero {
                                continue;
                            }
                            *v = if mask >> bit & 1 == 1 { s } else { -s };
                            bit += 1;
                        }
                        out.push(p);
                    }
                }
                out
            }
        }
    }

    /// Classified catalogue.
    pub fn critical_points(&self) -> Result<Vec<CriticalPoint>> {
        self.catalogue()
            .into_iter()
            .map(|x| classify_critical_point(self, &x))
            .collect()
    }

    pub fn minima(&self) -> Result<Vec<CriticalPoint>> {
        Ok(self
            .critical_points()?
            .into_iter()
            .filter(|c| c.kind == CriticalKind::Minimum)
            .collect())
    }

    pub fn saddles(&self) -> Result<Vec<CriticalPoint>> {
        Ok(self
            .critical_points()?
            .into_iter()
            .filter(|c| c.kind == CriticalKind::Saddle)
            .collect())
    }

    /// The two minima a saddle connects, found by following the gradient
    /// flow off the saddle along both signs of its unstable direction.
    pub fn saddle_endpoints(&self, saddle: &CriticalPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.hessian(&saddle.location)?;
        let eig = SymmetricEigen::new(h);
        let (k, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(Error::InvalidParameter("empty Hessian".into()))?;
        let v = eig.eigenvectors.column(k);
        let mut ends = Vec::with_capacity(2);
        for sign in [-1.0, 1.0] {
            let x0: Vec<f64> = saddle
                .location
                .iter()
                .zip(v.iter())
                .map(|(x, e)| x + sign * 1e-3 * e)
                .collect();
            ends.push(gradient_flow(self, &x0, 1e-2, 1e-10, 1_000_000)?.point);
        }
        let second = ends.pop().unwrap_or_default();
        let first = ends.pop().unwrap_or_default();
        Ok((first, second))
    }

    /// Eyring-Kramers time to leave the well at `minimum`, combining every
    /// catalogued saddle connected to it as parallel exit channels.
    pub fn escape_time_prediction(&self, minimum: &[f64], eps: f64) -> Result<f64> {
        let m = classify_critical_point(self, minimum)?;
        let u_m = self.value(minimum)?;
        let mut total_rate = 0.0;
        for s in self.saddles()? {
            let (l, r) = self.saddle_endpoints(&s)?;
            if dist(&l, minimum) < 1e-6 || dist(&r, minimum) < 1e-6 {
                let u_s = self.value(&s.location)?;
                total_rate += 1.0 / eyring_kramers_mean_time(&m, &s, u_m, u_s, eps)?;
            }
        }
        if total_rate > 0.0 {
            Ok(1.0 / total_rate)
        } else {
            Err(Error::InvalidParameter(
                "no catalogued saddle connects to this minimum".into(),
            ))
        }
    }
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "quartic coefficients must be positive, got a={a}, b={b}"
        )))
    }
}

#[inline]
fn quartic_value(a: f64, b: f64, y: f64) -> f64 {
    let y2 = y * y;
    0.25 * a * y2 * y2 - 0.5 * b * y2
}

#[inline]
fn quartic_grad(a: f64, b: f64, y: f64) -> f64 {
    a * y * y * y - b * y
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Minimum,
    Saddle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub kind: CriticalKind,
    /// Ascending.
    pub hessian_eigenvalues: Vec<f64>,
    /// `lambda_sigma`: magnitude of the unique negative eigenvalue (saddles only).
    pub negative_eigenvalue: Option<f64>,
}

impl CriticalPoint {
    pub fn hessian_determinant(&self) -> f64 {
        self.hessian_eigenvalues.iter().product()
    }
}

pub fn classify_critical_point(spec: &PotentialSpec, x0: &[f64]) -> Result<CriticalPoint> {
    let g = spec.grad(x0)?;
    let grad_norm = norm(&g);
    if grad_norm > CRITICAL_TOL {
        return Err(Error::NotCritical { grad_norm });
    }
    let h = spec.hessian(x0)?;
    let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    if let Some(&e) = eig.iter().find(|e| e.abs() < DEGENERACY_TOL) {
        return Err(Error::Degenerate { eigenvalue: e });
    }
    let negative = eig.iter().filter(|&&e| e < 0.0).count();
    let (kind, negative_eigenvalue) = match negative {
        0 => (CriticalKind::Minimum, None),
        1 => (CriticalKind::Saddle, Some(-eig[0])),
        n => return Err(Error::NotEyringKramers { negative: n }),
    };
    Ok(CriticalPoint {
        location: x0.to_vec(),
        kind,
        hessian_eigenvalues: eig,
        negative_eigenvalue,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub point: Vec<f64>,
    pub steps: u64,
    /// The start point was itself a critical saddle; the flow did not move.
    pub saddle_start: bool,
}

/// Explicit Euler descent `x <- x - dt grad U(x)` until `|grad U| <= tol`.
pub fn gradient_flow(
    spec: &PotentialSpec,
    x0: &[f64],
    dt: f64,
    tol: f64,
    max_steps: u64,
) -> Result<FlowResult> {
    spec.check_point(x0)?;
    if !(dt > 0.0 && dt.is_finite()) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "gradient flow needs dt > 0 and tol > 0".into(),
        ));
    }
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    spec.grad_into(&x, &mut g);
    if norm(&g) <= tol {
        let saddle_start = matches!(
            classify_critical_point(spec, &x),
            Ok(CriticalPoint {
                kind: CriticalKind::Saddle,
                ..
            })
        );
        return Ok(FlowResult {
            point: x,
            steps: 0,
            saddle_start,
        });
    }
    for step in 1..=max_steps {
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= dt * gi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence { steps: step });
        }
        spec.grad_into(&x, &mut g);
        if norm(&g) <= tol {
            return Ok(FlowResult {
                point: x,
                steps: step,
                saddle_start: false,
            });
        }
    }
    Err(Error::NoConvergence { steps: max_steps })
}

/// Eyring-Kramers prediction
/// `(2 pi / lambda_sigma) sqrt(-det H(sigma) / det H(m)) exp((U(sigma) - U(m)) / eps)`.
pub fn eyring_kramers_mean_time(
    minimum: &CriticalPoint,
    saddle: &CriticalPoint,
    u_min: f64,
    u_saddle: f64,
    eps: f64,
) -> Result<f64> {
    if minimum.kind != CriticalKind::Minimum || saddle.kind != CriticalKind::Saddle {
        return Err(Error::InvalidParameter(
            "expected a (minimum, saddle) pair".into(),
        ));
    }
    if minimum.hessian_eigenvalues.len() != saddle.hessian_eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: minimum.hessian_eigenvalues.len(),
            got: saddle.hessian_eigenvalues.len(),
        });
    }
    for e in minimum
        .hessian_eigenvalues
        .iter()
        .chain(&saddle.hessian_eigenvalues)
    {
        if e.abs() < DEGENERACY_TOL {
            return Err(Error::Degenerate { eigenvalue: *e });
        }
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {eps}"
        )));
    }
    if !(u_saddle > u_min) {
        return Err(Error::InvalidParameter(
            "saddle energy must exceed the minimum's".into(),
        ));
    }
    let lambda = saddle
        .negative_eigenvalue
        .ok_or(Error::NotEyringKramers { negative: 0 })?;
    let prefactor =
        2.0 * PI / lambda * (-saddle.hessian_determinant() / minimum.hessian_determinant()).sqrt();
    Ok(prefactor * ((u_saddle - u_min) / eps).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sep() -> PotentialSpec {
        PotentialSpec::separable(1.0, 1.0, vec![1.0]).unwrap()
    }

    #[test]
    fn hand_values() {
        let q = PotentialSpec::standard_quartic();
        assert_eq!(q.value(&[0.0]).unwrap(), 0.0);
        assert_eq!(q.value(&[1.0]).unwrap(), -0.25);
        assert_eq!(sep().value(&[1.0, 0.0]).unwrap(), -0.25);
        assert_eq!(q.grad(&[1.0]).unwrap(), vec![0.0]);
        assert!((q.grad(&[0.5]).unwrap()[0] + 0.375).abs() < 1e-15);
        assert_eq!(q.hessian(&[1.0]).unwrap()[(0, 0)], 2.0);
        assert_eq!(q.hessian(&[0.0]).unwrap()[(0, 0)], -1.0);
        let h = sep().hessian(&[0.0, 0.0]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn rejects_bad_input() {
        let q = PotentialSpec::standard_quartic();
        assert_eq!(q.value(&[f64::NAN]), Err(Error::NonFinite("point")));
        assert!(matches!(
            q.grad(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PotentialSpec::quartic(-1.0, 1.0).is_err());
        assert!(PotentialSpec::multiwell(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn classification() {
        let q = PotentialSpec::standard_quartic();
        let m = classify_critical_point(&q, &[1.0]).unwrap();
        assert_eq!(m.kind, CriticalKind::Minimum);
        assert_eq!(m.hessian_eigenvalues, vec![2.0]);
        let s = classify_critical_point(&q, &[0.0]).unwrap();
        assert_eq!(s.kind, CriticalKind::Saddle);
        assert_eq!(s.negative_eigenvalue, Some(1.0));
        assert!(matches!(
            classify_critical_point(&q, &[0.5]),
            Err(Error::NotCritical { .. })
        ));
        // origin of the 2D multiwell is a local maximum
        let mw = PotentialSpec::multiwell(1.0, 1.0, 2).unwrap();
        assert_eq!(
            classify_critical_point(&mw, &[0.0, 0.0]),
            Err(Error::NotEyringKramers { negative: 2 })
        );
    }

    #[test]
    fn multiwell_catalogue_is_consistent() {
        let mw = PotentialSpec::multiwell(1.0, 2.0, 3).unwrap();
        let cps = mw.critical_points().unwrap();
        assert_eq!(cps.len(), 8 + 3 * 4);
        assert_eq!(mw.minima().unwrap().len(), 8);
        for s in mw.saddles().unwrap() {
            let (l, r) = mw.saddle_endpoints(&s).unwrap();
            assert!(dist(&l, &r) > 1.0);
            assert!(classify_critical_point(&mw, &l).is_ok());
        }
    }

    #[test]
    fn flow_fixed_points_and_descent() {
        let q = PotentialSpec::standard_quartic();
        let r = gradient_flow(&q, &[0.5], 0.01, 1e-8, 100_000).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-6);
        let r = gradient_flow(&q, &[1.0], 0.01, 1e-8, 10).unwrap();
        assert_eq!(
            (r.point.clone(), r.steps, r.saddle_start),
            (vec![1.0], 0, false)
        );
        let r = gradient_flow(&q, &[0.0], 0.01, 1e-8, 10).unwrap();
        assert_eq!(r.point, vec![0.0]);
        assert!(r.saddle_start);
        assert_eq!(
            gradient_flow(&q, &[0.5], 0.01, 1e-8, 3),
            Err(Error::NoConvergence { steps: 3 })
        );
    }

    #[test]
    fn eyring_kramers_hand_values() {
        let q = PotentialSpec::standard_quartic();
        let m = classify_critical_point(&q, &[-1.0]).unwrap();
        let s = classify_critical_point(&q, &[0.0]).unwrap();
        let t = eyring_kramers_mean_time(&m, &s, -0.25, 0.0, 0.1).unwrap();
        let expect = PI * 2f64.sqrt() * 2.5f64.exp();
        assert!((t - expect).abs() < 1e-12 * expect);
        assert!((t - 54.14).abs() < 0.05);
        // symmetric wells give identical predictions
        let m2 = classify_critical_point(&q, &[1.0]).unwrap();
        assert_eq!(
            t,
            eyring_kramers_mean_time(&m2, &s, -0.25, 0.0, 0.1).unwrap()
        );
        assert_eq!(q.escape_time_prediction(&[-1.0], 0.1).unwrap(), t);

        let sp = sep();
        let m = classify_critical_point(&sp, &[1.0, 0.0]).unwrap();
        let s = classify_critical_point(&sp, &[0.0, 0.0]).unwrap();
        let t = eyring_kramers_mean_time(&m, &s, -0.25, 0.0, 0.25).unwrap();
        assert!((t - 2.0 * PI * 0.5f64.sqrt() * 1f64.exp()).abs() < 1e-12);
        assert!((t - 12.08).abs() < 0.01);

        assert!(eyring_kramers_mean_time(&s, &m, 0.0, -0.25, 0.1).is_err());
        assert!(eyring_kramers_mean_time(&m, &s, -0.25, 0.0, 0.0).is_err());
    }

    #[test]
    fn eyring_kramers_rejects_degenerate_hessian() {
        let q = PotentialSpec::standard_quartic();
        let m = classify_critical_point(&q, &[-1.0]).unwrap();
        let mut s = classify_critical_point(&q, &[0.0]).unwrap();
        s.hessian_eigenvalues = vec![-1e-12];
        assert!(matches!(
            eyring_kramers_mean_time(&m, &s, -0.25, 0.0, 0.1),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn eyring_kramers_monotone_on_grid() {
        let q = PotentialSpec::standard_quartic();
        let m = classify_critical_point(&q, &[-1.0]).unwrap();
        let s = classify_critical_point(&q, &[0.0]).unwrap();
        let eps_grid = [0.05, 0.08, 0.1, 0.15, 0.2, 0.3];
        let barriers = [0.1, 0.2, 0.25, 0.4, 0.8];
        for &b in &barriers {
            let times: Vec<f64> = eps_grid
                .iter()
                .map(|&e| eyring_kramers_mean_time(&m, &s, -b, 0.0, e).unwrap())
                .collect();
            assert!(times.windows(2).all(|w| w[0] > w[1]));
        }
        for &e in &eps_grid {
            let times: Vec<f64> = barriers
                .iter()
                .map(|&b| eyring_kramers_mean_time(&m, &s, -b, 0.0, e).unwrap())
                .collect();
            assert!(times.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
