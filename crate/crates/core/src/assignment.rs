//! Square linear sum assignment (Hungarian method with potentials, O(n³)).

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `assignment` with `assignment[row] = column`.
pub fn solve_min_cost<T: Scalar>(cost: ArrayView2<'_, T>) -> Result<Vec<usize>> {
    let n = cost.nrows();
    if n != cost.ncols() {
        return Err(Error::Input(format!(
            "assignment needs a square cost matrix, got {}x{}",
            n,
            cost.ncols()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Input("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based potentials formulation; column 0 is a virtual sentinel.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = matched_row[col0];
            let mut delta = inf;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn small_known_problem() {
        let cost = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let a = solve_min_cost(cost.view()).unwrap();
        let total: f64 = a.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
        assert_eq!(total, 5.0);
        let mut seen = a.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_min_cost(array![[1.0, 2.0]].view()).is_err());
        assert!(solve_min_cost(array![[f64::NAN]].view()).is_err());
        assert_eq!(solve_min_cost(ndarray::Array2::<f64>::zeros((0, 0)).view()).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn negative_costs() {
        let cost = array![[-1.0, -5.0], [-4.0, -1.0]];
        assert_eq!(solve_min_cost(cost.view()).unwrap(), vec![1, 0]);
    }
}
