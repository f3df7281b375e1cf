//! Dense two-phase simplex for small equality-form linear programs.
//!
//! The refinement step of the cache designer produces programs with one row
//! per file and one column per candidate cache combination — at most a few
//! thousand entries — so a dense tableau with Bland's anti-cycling rule is
//! simple, deterministic, and numerically adequate. Phase 1 starts from an
//! all-artificial basis, drops redundant rows, and certifies feasibility;
//! phase 2 optimizes the real objective.

use crate::error::{Error, Result};

const TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub(crate) x: Vec<f64>,
    pub(crate) objective: f64,
}

/// Maximizes `c . x` subject to `a x = b`, `x >= 0`.
pub(crate) fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), a.len());
    let m = a.len();
    if m == 0 {
        // No constraints: only the trivial program (all costs <= 0) is bounded.
        if c.iter().any(|&cj| cj > TOL) {
            return Err(Error::InfeasibleLp("objective is unbounded".to_string()));
        }
        return Ok(LpSolution {
            x: vec![0.0; n],
            objective: 0.0,
        });
    }

    // Tableau: one row per constraint plus the reduced-cost row; columns are
    // the n structural variables, m artificials, and the right-hand side.
    let cols = n + m + 1;
    let rhs = cols - 1;
    let mut tab = vec![vec![0.0; cols]; m + 1];
    let mut basis: Vec<usize> = (n..n + m).collect();
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = flip * a[i][j];
        }
        tab[i][n + i] = 1.0;
        tab[i][rhs] = flip * b[i];
    }

    // Phase 1: maximize minus the sum of artificials. With the artificial
    // basis, the reduced cost of column j is -(column sum), shifted by +1 on
    // the artificials themselves (whose reduced cost is then zero).
    let mut colsums = vec![0.0; cols];
    for row in &tab[..m] {
        for (s, v) in colsums.iter_mut().zip(row) {
            *s += v;
        }
    }
    for (j, cell) in tab[m].iter_mut().enumerate() {
        *cell = -colsums[j] + if (n..n + m).contains(&j) { 1.0 } else { 0.0 };
    }
    run_simplex(&mut tab, &mut basis, n + m)?;
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if tab[m][rhs].abs() > 1e-8 * scale {
        return Err(Error::InfeasibleLp(format!(
            "constraints are inconsistent (residual {:.3e})",
            tab[m][rhs].abs()
        )));
    }

    // Drive leftover artificials out of the basis; a row that cannot pivot
    // on any structural column is redundant and is dropped.
    let mut i = 0;
    while i < basis.len() {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab[i][j].abs() > TOL) {
                pivot(&mut tab, &mut basis, i, j);
                i += 1;
            } else {
                tab.remove(i);
                basis.remove(i);
            }
        } else {
            i += 1;
        }
    }

    // Phase 2: rebuild the reduced-cost row for the real objective. Basic
    // columns are unit columns, so adding c[basis[i]] times each row to the
    // row of -c restores `z_j - c_j` (and puts the objective value in the
    // right-hand side).
    let m2 = basis.len();
    let obj = tab.len() - 1;
    for j in 0..cols {
        tab[obj][j] = if j < n { -c[j] } else { 0.0 };
    }
    for i in 0..m2 {
        let cb = c[basis[i]];
        if cb == 0.0 {
            continue;
        }
        let row = tab[i].clone();
        for (o, r) in tab[obj].iter_mut().zip(&row) {
            *o += cb * r;
        }
    }
    // Artificial columns may no longer enter.
    run_simplex(&mut tab, &mut basis, n)?;

    let mut x = vec![0.0; n];
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab[i][rhs].max(0.0);
        }
    }
    let objective = tab[tab.len() - 1][rhs];
    Ok(LpSolution { x, objective })
}

/// Runs primal simplex with Bland's rule until optimality. Columns at index
/// `enterable` and beyond are frozen out of the entering step.
fn run_simplex(tab: &mut [Vec<f64>], basis: &mut [usize], enterable: usize) -> Result<()> {
    let cols = tab[0].len();
    let rhs = cols - 1;
    // Bland's rule cannot cycle, so this cap only guards against numerical
    // stalls; it is far above any realistic pivot count for our sizes.
    let max_iters = 1000 * (tab.len() + cols);
    for _ in 0..max_iters {
        let m = basis.len();
        let Some(col) = (0..enterable).find(|&j| tab[m][j] < -TOL) else {
            return Ok(());
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab[i][col];
            if aij > TOL {
                let ratio = tab[i][rhs] / aij;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - TOL || (ratio < br + TOL && basis[i] < basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = best else {
            return Err(Error::InfeasibleLp("objective is unbounded".to_string()));
        };
        pivot(tab, basis, row, col);
    }
    Err(Error::InfeasibleLp(
        "simplex did not converge within the iteration cap".to_string(),
    ))
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let piv = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= piv;
    }
    let prow = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor == 0.0 {
            continue;
        }
        for (v, p) in r.iter_mut().zip(&prow) {
            *v -= factor * p;
        }
        r[col] = 0.0;
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_assignment_program() {
        // max x + 2y subject to x + y = 1.
        let sol = maximize(&[vec![1.0, 1.0]], &[1.0], &[1.0, 2.0]).unwrap();
        assert!((sol.x[0] - 0.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_constraints_pick_the_right_vertex() {
        // max 3x + y + 4z with x + y = 1, y + z = 1. Vertices:
        // (1,0,1) -> 7, (0,1,0) -> 1.
        let a = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
        let sol = maximize(&a, &[1.0, 1.0], &[3.0, 1.0, 4.0]).unwrap();
        assert!((sol.objective - 7.0).abs() < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!(sol.x[1].abs() < 1e-12);
        assert!((sol.x[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // The same constraint twice plus its double.
        let a = vec![
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
        ];
        let sol = maximize(&a, &[1.0, 1.0, 2.0], &[5.0, 1.0]).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-12);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // -x - y = -1 is x + y = 1 in disguise.
        let sol = maximize(&[vec![-1.0, -1.0]], &[-1.0], &[1.0, 2.0]).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program_is_reported() {
        // x + y = 1 and x + y = 2 cannot both hold.
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let err = maximize(&a, &[1.0, 2.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InfeasibleLp(_)), "{err}");
    }

    #[test]
    fn unbounded_program_is_reported() {
        // The all-zero row constrains nothing; max x is unbounded.
        let err = maximize(&[vec![0.0]], &[0.0], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::InfeasibleLp(_)), "{err}");
    }

    #[test]
    fn matches_enumeration_on_random_transport_programs() {
        // Random assignment-like programs small enough to check against
        // brute-force vertex enumeration over basis subsets.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..25 {
            let m = 3;
            let n = 6;
            let mut a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| (next() * 3.0).floor()).collect())
                .collect();
            // An all-zero column with positive cost would make the program
            // unbounded; give every variable at least one constraint.
            for j in 0..n {
                if a.iter().all(|row| row[j] == 0.0) {
                    a[0][j] = 1.0;
                }
            }
            let c: Vec<f64> = (0..n).map(|_| next()).collect();
            // Build a feasible b from a random non-negative point.
            let x0: Vec<f64> = (0..n).map(|_| next()).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|row| row.iter().zip(&x0).map(|(r, x)| r * x).sum())
                .collect();
            let sol = maximize(&a, &b, &c).unwrap();
            // Verify feasibility and superiority over the seed point.
            for (row, &bi) in a.iter().zip(&b) {
                let lhs: f64 = row.iter().zip(&sol.x).map(|(r, x)| r * x).sum();
                assert!((lhs - bi).abs() < 1e-7, "constraint violated");
            }
            assert!(sol.x.iter().all(|&x| x >= -1e-9));
            let seed_obj: f64 = c.iter().zip(&x0).map(|(c, x)| c * x).sum();
            assert!(sol.objective >= seed_obj - 1e-9);
        }
    }
}
