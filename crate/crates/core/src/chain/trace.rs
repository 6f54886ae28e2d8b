use super::{capacity, is_reversible, state_mask, Generator, Measure, MetastablePartition};
use crate::error::{Error, Result};
use crate::linalg;

/// Detailed-balance tolerance used before applying reversible-only formulas.
const REVERSIBILITY_TOL: f64 = 1e-10;

/// Generator of the chain watched only on `E` (time outside `E` deleted):
/// the Schur complement `L_EE - L_ED L_DD^{-1} L_DE` with `D` the complement.
///
/// States of the result are the members of `E` in ascending order.
pub fn trace_generator(gen: &Generator, e: &[usize]) -> Result<Generator> {
    let n = gen.n_states();
    let in_e = state_mask(n, e, "E")?;
    let kept: Vec<usize> = (0..n).filter(|&x| in_e[x]).collect();
    let dropped: Vec<usize> = (0..n).filter(|&x| !in_e[x]).collect();
    let m = gen.matrix();
    let mut schur = linalg::submatrix(m, &kept, &kept);
    if !dropped.is_empty() {
        let l_dd = linalg::submatrix(m, &dropped, &dropped);
        let l_de = linalg::submatrix(m, &dropped, &kept);
        let l_ed = linalg::submatrix(m, &kept, &dropped);
        let x = l_dd
            .lu()
            .solve(&l_de)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("L restricted to the complement of E".into()))?;
        schur -= l_ed * x;
    }
    let labels = kept.iter().map(|&x| gen.labels()[x].clone()).collect();
    Ok(Generator::from_matrix_unchecked(schur, labels))
}

/// Mean jump rate
/// `r(i,j) = mu(E_i)^{-1} sum_{x in E_i, y in E_j} mu(x) rbar(x,y)`
/// with `rbar` the trace rates on `E = union of wells`.
pub fn mean_jump_rate(
    gen: &Generator,
    mu: &Measure,
    partition: &MetastablePartition,
    i: usize,
    j: usize,
) -> Result<f64> {
    partition.check_chain(gen)?;
    partition.check_well(i)?;
    partition.check_well(j)?;
    if i == j {
        return Err(Error::InvalidParameter(
            "mean jump rate needs i != j".into(),
        ));
    }
    let e = partition.union();
    let trace = trace_generator(gen, &e)?;
    // position of each original state inside the traced chain
    let mut pos = vec![usize::MAX; gen.n_states()];
    for (k, &x) in e.iter().enumerate() {
        pos[x] = k;
    }
    let w = mu.weights();
    let mass = mu.mass(partition.well(i));
    if !(mass > 0.0) {
        return Err(Error::EmptyWell(i));
    }
    let flow: f64 = partition
        .well(i)
        .iter()
        .flat_map(|&x| partition.well(j).iter().map(move |&y| (x, y)))
        .map(|(x, y)| w[x] * trace.rate(pos[x], pos[y]))
        .sum();
    Ok(flow / mass)
}

/// `1/2 [cap(E_i, Ebar_i) + cap(E_j, Ebar_j) - cap(E_i u E_j, Ebar_i n Ebar_j)]`,
/// with `cap(., empty) = 0`.
///
/// For reversible chains this equals `mu(E_i) * mean_jump_rate(i, j)`: the
/// flow between the two wells, not the rate. The `1/mu(E_i)` normalization
/// of the mean jump rate does not appear on this side.
pub fn reversible_capacity_identity(
    gen: &Generator,
    mu: &Measure,
    partition: &MetastablePartition,
    i: usize,
    j: usize,
) -> Result<f64> {
    partition.check_chain(gen)?;
    partition.check_well(i)?;
    partition.check_well(j)?;
    if i == j {
        return Err(Error::InvalidParameter(
            "capacity identity needs i != j".into(),
        ));
    }
    if !is_reversible(gen, mu, REVERSIBILITY_TOL) {
        return Err(Error::NotReversible);
    }
    let cap_vs_rest = |k: usize| capacity(gen, mu, partition.well(k), &partition.others(k));
    let mut pair: Vec<usize> = partition.well(i).to_vec();
    pair.extend_from_slice(partition.well(j));
    let rest: Vec<usize> = partition
        .union()
        .into_iter()
        .filter(|&x| !matches!(partition.project(x), Some(k) if k == i || k == j))
        .collect();
    let cap_pair = if rest.is_empty() {
        0.0
    } else {
        capacity(gen, mu, &pair, &rest)?
    };
    Ok(0.5 * (cap_vs_rest(i)? + cap_vs_rest(j)? - cap_pair))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::invariant_measure;

    #[test]
    fn trace_on_everything_is_identity() {
        let g = Generator::symmetric_three_well(0.3).unwrap();
        let t = trace_generator(&g, &[0, 1, 2]).unwrap();
        assert_eq!(t.matrix(), g.matrix());
    }

    #[test]
    fn three_state_trace_rates() {
        let q = 0.1;
        let g = Generator::symmetric_three_well(q).unwrap();
        let t = trace_generator(&g, &[0, 2]).unwrap();
        assert!((t.rate(0, 1) - q / 2.0).abs() < 1e-15);
        assert!((t.rate(1, 0) - q / 2.0).abs() < 1e-15);
        assert_eq!(t.labels(), &["0".to_string(), "2".to_string()]);
    }

    #[test]
    fn three_state_jump_rate_and_identity() {
        let q = 0.1;
        let g = Generator::symmetric_three_well(q).unwrap();
        let mu = invariant_measure(&g).unwrap();
        let p = MetastablePartition::new(3, vec![vec![0], vec![2]]).unwrap();
        let r = mean_jump_rate(&g, &mu, &p, 0, 1).unwrap();
        assert!((r - 0.05).abs() < 1e-15);
        assert!((r / q - 0.5).abs() < 1e-13);
        let rhs = reversible_capacity_identity(&g, &mu, &p, 0, 1).unwrap();
        assert!((rhs - q / (2.0 * (2.0 + q))).abs() < 1e-15);
        assert!((rhs - mu.mass(&[0]) * r).abs() < 1e-15);
        assert!(reversible_capacity_identity(&g, &mu, &p, 1, 1).is_err());
        assert!(mean_jump_rate(&g, &mu, &p, 0, 0).is_err());
    }

    #[test]
    fn non_reversible_rejected() {
        let g = Generator::from_off_diagonal(&[
            vec![0.0, 2.0, 0.1],
            vec![0.1, 0.0, 2.0],
            vec![2.0, 0.1, 0.0],
        ])
        .unwrap();
        let mu = invariant_measure(&g).unwrap();
        let p = MetastablePartition::new(3, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(
            reversible_capacity_identity(&g, &mu, &p, 0, 1),
            Err(Error::NotReversible)
        );
        // the mean jump rate itself needs no reversibility
        assert!(mean_jump_rate(&g, &mu, &p, 0, 1).unwrap() > 0.0);
    }
}
