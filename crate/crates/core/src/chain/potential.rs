use nalgebra::DVector;

use super::{state_mask, Generator, Measure};
use crate::error::{Error, Result};
use crate::linalg;

/// `h(x) = P_x[tau_A < tau_B]`: `h = 1` on `A`, `0` on `B`, harmonic elsewhere.
pub fn equilibrium_potential(gen: &Generator, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
    let n = gen.n_states();
    let in_a = state_mask(n, a, "A")?;
    let in_b = state_mask(n, b, "B")?;
    if in_a.iter().zip(&in_b).any(|(x, y)| *x && *y) {
        return Err(Error::InvalidStateSet("A and B intersect".into()));
    }
    let interior: Vec<usize> = (0..n).filter(|&x| !in_a[x] && !in_b[x]).collect();
    let mut h: Vec<f64> = in_a.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    if interior.is_empty() {
        return Ok(h);
    }
    let m = gen.matrix();
    let l_ii = linalg::submatrix(m, &interior, &interior);
    let rhs = DVector::from_iterator(
        interior.len(),
        interior
            .iter()
            .map(|&x| -a.iter().map(|&y| m[(x, y)]).sum::<f64>()),
    );
    let sol = linalg::solve(l_ii, rhs, "equilibrium potential interior system")?;
    for (k, &x) in interior.iter().enumerate() {
        h[x] = sol[k];
    }
    Ok(h)
}

/// `cap(A, B) = sum_x mu(x) h(x) (-L h)(x)` for the equilibrium potential `h`.
pub fn capacity(gen: &Generator, mu: &Measure, a: &[usize], b: &[usize]) -> Result<f64> {
    if mu.len() != gen.n_states() {
        return Err(Error::DimensionMismatch {
            expected: gen.n_states(),
            got: mu.len(),
        });
    }
    let h = equilibrium_potential(gen, a, b)?;
    let lh = gen.apply(&h)?;
    Ok(mu
        .weights()
        .iter()
        .zip(h.iter().zip(&lh))
        .map(|(w, (hx, lhx))| -w * hx * lhx)
        .sum())
}

/// `u(x) = E_x[tau_A]` for every state: `u = 0` on `A`, `L u = -1` off `A`.
pub fn mean_hitting_times(gen: &Generator, a: &[usize]) -> Result<Vec<f64>> {
    let n = gen.n_states();
    let in_a = state_mask(n, a, "A")?;
    let rest: Vec<usize> = (0..n).filter(|&x| !in_a[x]).collect();
    let mut u = vec![0.0; n];
    if rest.is_empty() {
        return Ok(u);
    }
    let l_rr = linalg::submatrix(gen.matrix(), &rest, &rest);
    let sol = linalg::solve(
        l_rr,
        DVector::from_element(rest.len(), -1.0),
        "mean hitting time system",
    )?;
    for (k, &x) in rest.iter().enumerate() {
        u[x] = sol[k];
    }
    Ok(u)
}

pub fn mean_hitting_time(gen: &Generator, x: usize, a: &[usize]) -> Result<f64> {
    if x >= gen.n_states() {
        return Err(Error::InvalidStateSet(format!("state {x} out of range")));
    }
    Ok(mean_hitting_times(gen, a)?[x])
}

/// `mu(E_i) / cap`, the capacity estimate of the mean escape time from `E_i`.
pub fn heuristic_mean_time(mu: &Measure, cap: f64, well: &[usize]) -> Result<f64> {
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "capacity must be positive, got {cap}"
        )));
    }
    state_mask(mu.len(), well, "E_i")?;
    Ok(mu.mass(well) / cap)
}
