//! A general-purpose two-phase revised simplex for `min c.x` subject to
//! `A x = b`, `x >= 0`.
//!
//! The basis inverse is kept as a dense matrix and updated by elementary row
//! operations; `A` is stored column-wise and sparse. Nothing here knows about
//! transport structure.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

/// Sparse column-major constraint matrix with right-hand side and costs.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    rows: usize,
    columns: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            rows: rhs.len(),
            columns: Vec::new(),
            costs: Vec::new(),
            rhs,
        }
    }

    /// Adds a nonnegative variable; returns its index.
    pub fn add_variable(&mut self, cost: f64, column: Vec<(usize, f64)>) -> usize {
        debug_assert!(column.iter().all(|&(r, _)| r < self.rows));
        self.columns.push(column);
        self.costs.push(cost);
        self.costs.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn variables(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

struct State {
    r: usize,
    /// Row-major `r x r` basis inverse.
    binv: Vec<f64>,
    /// Variable index per basis position; `>= n` means artificial.
    basis: Vec<usize>,
    xb: Vec<f64>,
    is_basic: Vec<bool>,
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let r = lp.rows;
    let n = lp.columns.len();

    // Flip rows so that b >= 0; artificials then start feasible.
    let sign: Vec<f64> = lp
        .rhs
        .iter()
        .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let columns: Vec<Vec<(usize, f64)>> = lp
        .columns
        .iter()
        .map(|col| col.iter().map(|&(row, a)| (row, a * sign[row])).collect())
        .collect();
    let rhs: Vec<f64> = lp.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();

    let mut binv = vec![0.0; r * r];
    for k in 0..r {
        binv[k * r + k] = 1.0;
    }
    let mut state = State {
        r,
        binv,
        basis: (n..n + r).collect(),
        xb: rhs.clone(),
        is_basic: vec![false; n + r],
    };
    for k in 0..r {
        state.is_basic[n + k] = true;
    }

    let mut phase_one_costs = vec![0.0; n + r];
    for c in &mut phase_one_costs[n..] {
        *c = 1.0;
    }
    let mut pivots = run_phase(&mut state, &columns, &phase_one_costs, n, false)?;
    let infeasibility: f64 = state
        .basis
        .iter()
        .zip(&state.xb)
        .filter(|(&v, _)| v >= n)
        .map(|(_, x)| *x)
        .sum();
    let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if infeasibility > FEASIBILITY_TOL * scale {
        return Err(Error::SolverFailure("linear program is infeasible"));
    }

    let mut phase_two_costs = lp.costs.clone();
    phase_two_costs.extend(core::iter::repeat_n(0.0, r));
    pivots += run_phase(&mut state, &columns, &phase_two_costs, n, true)?;

    let mut x = vec![0.0; n];
    for (pos, &var) in state.basis.iter().enumerate() {
        if var < n {
            x[var] = state.xb[pos].max(0.0);
        }
    }

    // Residual check guards against drift in the product-form updates.
    let mut residual = rhs.clone();
    for (j, col) in columns.iter().enumerate() {
        for &(row, a) in col {
            residual[row] -= a * x[j];
        }
    }
    let worst = residual.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if worst > FEASIBILITY_TOL * scale {
        return Err(Error::SolverFailure("basis drifted away from feasibility"));
    }

    let objective = x.iter().zip(&lp.costs).map(|(x, c)| x * c).sum();
    Ok(LpSolution {
        objective,
        x,
        pivots,
    })
}

fn run_phase(
    state: &mut State,
    columns: &[Vec<(usize, f64)>],
    costs: &[f64],
    n: usize,
    phase_two: bool,
) -> Result<usize> {
    let r = state.r;
    let candidates = if phase_two { n } else { n + r };
    let cmax = costs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-11 * (1.0 + cmax);
    let max_pivots = 100 * (n + r) + 10_000;

    let mut y = vec![0.0; r];
    let mut w = vec![0.0; r];
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;

    loop {
        if pivots > max_pivots {
            return Err(Error::SolverFailure("simplex pivot limit reached"));
        }

        // y^T = c_B^T B^{-1}
        y.iter_mut().for_each(|v| *v = 0.0);
        for (pos, &var) in state.basis.iter().enumerate() {
            let cb = costs[var];
            if cb != 0.0 {
                let row = &state.binv[pos * r..(pos + 1) * r];
                for (yk, b) in y.iter_mut().zip(row) {
                    *yk += cb * b;
                }
            }
        }

        let bland = degenerate_run > r;
        let mut entering = usize::MAX;
        let mut best = -tol;
        for (j, &c) in costs.iter().enumerate().take(candidates) {
            if state.is_basic[j] {
                continue;
            }
            let d = c - column_dot(j, n, columns, &y);
            if d < best {
                entering = j;
                if bland {
                    break;
                }
                best = d;
            }
        }
        if entering == usize::MAX {
            return Ok(pivots);
        }

        // w = B^{-1} a_entering
        w.iter_mut().for_each(|v| *v = 0.0);
        for (row, a) in column_entries(entering, n, columns) {
            for (l, wl) in w.iter_mut().enumerate() {
                *wl += state.binv[l * r + row] * a;
            }
        }

        let mut leave = usize::MAX;
        let mut best_ratio = f64::INFINITY;
        for l in 0..r {
            let wl = w[l];
            let artificial = state.basis[l] >= n;
            let ratio = if phase_two && artificial && wl.abs() > PIVOT_TOL {
                // Artificials are pinned at zero in phase two.
                0.0
            } else if wl > PIVOT_TOL {
                state.xb[l].max(0.0) / wl
            } else {
                continue;
            };
            let take = if leave == usize::MAX || ratio < best_ratio {
                true
            } else if ratio == best_ratio {
                if bland {
                    state.basis[l] < state.basis[leave]
                } else {
                    wl.abs() > w[leave].abs()
                }
            } else {
                false
            };
            if take {
                leave = l;
                best_ratio = ratio;
            }
        }
        if leave == usize::MAX {
            return Err(Error::SolverFailure("linear program is unbounded"));
        }

        let theta = best_ratio;
        for (l, &wl) in w.iter().enumerate().take(r) {
            if l != leave {
                state.xb[l] -= theta * wl;
                if state.xb[l] < 0.0 && state.xb[l] > -PIVOT_TOL {
                    state.xb[l] = 0.0;
                }
            }
        }
        state.xb[leave] = theta;

        let pivot = w[leave];
        let (before, rest) = state.binv.split_at_mut(leave * r);
        let (prow, after) = rest.split_at_mut(r);
        prow.iter_mut().for_each(|v| *v /= pivot);
        for (l, row) in before
            .chunks_exact_mut(r)
            .chain(after.chunks_exact_mut(r))
            .enumerate()
        {
            let l = if l < leave { l } else { l + 1 };
            let f = w[l];
            if f != 0.0 {
                for (a, p) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
            }
        }

        state.is_basic[state.basis[leave]] = false;
        state.is_basic[entering] = true;
        state.basis[leave] = entering;

        pivots += 1;
        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }
}

fn column_entries<'a>(
    j: usize,
    n: usize,
    columns: &'a [Vec<(usize, f64)>],
) -> impl Iterator<Item = (usize, f64)> + 'a {
    let (structural, artificial) = if j < n {
        (Some(&columns[j]), None)
    } else {
        (None, Some(j - n))
    };
    structural
        .into_iter()
        .flat_map(|c| c.iter().copied())
        .chain(artificial.map(|row| (row, 1.0)))
}

fn column_dot(j: usize, n: usize, columns: &[Vec<(usize, f64)>], y: &[f64]) -> f64 {
    if j < n {
        columns[j].iter().map(|&(row, a)| y[row] * a).sum()
    } else {
        y[j - n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x0 - 2 x1  s.t. x0 + x1 + s0 = 4, x0 + 3 x1 + s1 = 6
        let mut lp = LinearProgram::new(vec![4.0, 6.0]);
        lp.add_variable(-1.0, vec![(0, 1.0), (1, 1.0)]);
        lp.add_variable(-2.0, vec![(0, 1.0), (1, 3.0)]);
        lp.add_variable(0.0, vec![(0, 1.0)]);
        lp.add_variable(0.0, vec![(1, 1.0)]);
        let sol = solve(&lp).unwrap();
        // Vertex x0 = 3, x1 = 1.
        assert!((sol.objective + 5.0).abs() < 1e-12);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_and_redundant_row() {
        // x0 - x1 = -1, 2 x0 - 2 x1 = -2 (redundant); min x0 + x1.
        let mut lp = LinearProgram::new(vec![-1.0, -2.0]);
        lp.add_variable(1.0, vec![(0, 1.0), (1, 2.0)]);
        lp.add_variable(1.0, vec![(0, -1.0), (1, -2.0)]);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_variable(1.0, vec![(0, -1.0)]);
        assert!(matches!(solve(&lp), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_variable(0.0, vec![(0, 1.0)]);
        lp.add_variable(-1.0, vec![(0, 1.0), (0, -1.0)]);
        assert!(matches!(
            solve(&lp),
            Err(Error::SolverFailure("linear program is unbounded"))
        ));
    }
}
