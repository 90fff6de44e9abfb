//! Network simplex for the dense bipartite transportation problem.
//!
//! The basis is a spanning tree on `n + m` nodes (rows `0..n`, columns
//! `n..n + m`) with exactly `n + m - 1` cells, degenerate zero-flow cells
//! included. Pricing is Dantzig's rule with lowest `(i, j)` tie-breaking;
//! after a run of degenerate pivots it falls back to Bland's rule until the
//! objective moves again, which rules out cycling.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Problems with more cells than this use block pricing.
const FULL_PRICING_LIMIT: usize = 4096;

const NONE: usize = usize::MAX;

pub(crate) struct Basis {
    /// `(row, col, flow)` per basic cell, degenerate cells included.
    pub cells: Vec<(usize, usize, f64)>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

struct Tree {
    n: usize,
    m: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Node adjacency as basis slot indices.
    adj: Vec<Vec<usize>>,
    /// `slot_of[i * m + j]` is the basis slot of cell `(i, j)` or `NONE`.
    slot_of: Vec<usize>,
}

impl Tree {
    fn other(&self, slot: usize, node: usize) -> usize {
        let (i, j) = self.cells[slot];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    fn insert(&mut self, slot: usize, i: usize, j: usize, flow: f64) {
        self.cells[slot] = (i, j);
        self.flow[slot] = flow;
        self.slot_of[i * self.m + j] = slot;
        self.adj[i].push(slot);
        self.adj[self.n + j].push(slot);
    }

    fn remove(&mut self, slot: usize) {
        let (i, j) = self.cells[slot];
        self.slot_of[i * self.m + j] = NONE;
        let n = self.n;
        for node in [i, n + j] {
            let list = &mut self.adj[node];
            let pos = list
                .iter()
                .position(|&s| s == slot)
                .expect("slot in adjacency");
            list.swap_remove(pos);
        }
    }

    /// Potentials with `v[0] = 0` from `u_i + v_j = c_ij` on the tree.
    fn potentials(
        &self,
        cost: &[f64],
        u: &mut [f64],
        v: &mut [f64],
        seen: &mut [bool],
        queue: &mut VecDeque<usize>,
    ) {
        seen.iter_mut().for_each(|s| *s = false);
        let root = self.n;
        v[0] = 0.0;
        seen[root] = true;
        queue.clear();
        queue.push_back(root);
        while let Some(node) = queue.pop_front() {
            for &slot in &self.adj[node] {
                let next = self.other(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.cells[slot];
                let c = cost[i * self.m + j];
                if next < self.n {
                    u[i] = c - v[j];
                } else {
                    v[j] = c - u[i];
                }
                queue.push_back(next);
            }
        }
    }

    /// Slots on the tree path from column node `n + j` to row node `i`.
    fn path(
        &self,
        i: usize,
        j: usize,
        parent: &mut [usize],
        queue: &mut VecDeque<usize>,
    ) -> Vec<usize> {
        parent.iter_mut().for_each(|p| *p = NONE);
        let start = i;
        let goal = self.n + j;
        parent[start] = usize::MAX - 1;
        queue.clear();
        queue.push_back(start);
        'search: while let Some(node) = queue.pop_front() {
            for &slot in &self.adj[node] {
                let next = self.other(slot, node);
                if parent[next] != NONE {
                    continue;
                }
                parent[next] = slot;
                if next == goal {
                    break 'search;
                }
                queue.push_back(next);
            }
        }
        let mut out = Vec::new();
        let mut node = goal;
        while node != start {
            let slot = parent[node];
            out.push(slot);
            node = self.other(slot, node);
        }
        out
    }

    /// Recomputes basic flows from the tree alone by peeling leaves.
    /// Flows determined by the basis alone: peel leaves, each leaf sending
    /// its residual along its only remaining cell.
    fn recompute_flows(&mut self, supply: &[f64], demand: &[f64]) {
        let nodes = self.n + self.m;
        let mut residual: Vec<f64> = supply
            .iter()
            .copied()
            .chain(demand.iter().copied())
            .collect();
        let mut degree: Vec<usize> = self.adj.iter().map(Vec::len).collect();
        let mut done = vec![false; self.cells.len()];
        let mut queue: VecDeque<usize> = (0..nodes).filter(|&k| degree[k] == 1).collect();
        while let Some(node) = queue.pop_front() {
            if degree[node] != 1 {
                continue;
            }
            let slot = match self.adj[node].iter().copied().find(|&s| !done[s]) {
                Some(s) => s,
                None => continue,
            };
            done[slot] = true;
            let flow = residual[node].max(0.0);
            self.flow[slot] = flow;
            let other = self.other(slot, node);
            residual[other] -= flow;
            residual[node] = 0.0;
            degree[node] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                queue.push_back(other);
            }
        }
    }
}

/// Northwest-corner spanning tree.
fn initial_tree(supply: &[f64], demand: &[f64]) -> Tree {
    let (n, m) = (supply.len(), demand.len());
    let mut tree = Tree {
        n,
        m,
        cells: vec![(0, 0); n + m - 1],
        flow: vec![0.0; n + m - 1],
        adj: vec![Vec::new(); n + m],
        slot_of: vec![NONE; n * m],
    };
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    for slot in 0..n + m - 1 {
        let q = a[i].min(b[j]).max(0.0);
        tree.insert(slot, i, j, q);
        a[i] -= q;
        b[j] -= q;
        if i + 1 < n && (j + 1 == m || a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    tree
}

/// Solves `min <C, X>` over nonnegative `X` with row sums `supply` and column
/// sums `demand`. `cost` is row-major `n x m`.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Basis> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptyMeasure);
    }
    debug_assert_eq!(cost.len(), n * m);
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::SolverFailure("non-finite cost"));
    }

    let scale = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * (1.0 + scale);
    let cells = n * m;
    let max_pivots = 50 * cells + 10 * (n + m) + 1000;
    let block = if cells <= FULL_PRICING_LIMIT {
        cells
    } else {
        (libm::sqrt(cells as f64) as usize).max(FULL_PRICING_LIMIT / 8)
    };

    let mut tree = initial_tree(supply, demand);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut seen = vec![false; n + m];
    let mut parent = vec![NONE; n + m];
    let mut queue = VecDeque::with_capacity(n + m);
    let mut cursor = 0usize;
    let mut degenerate_run = 0usize;
    let degenerate_limit = n + m;

    for _ in 0..max_pivots {
        tree.potentials(cost, &mut u, &mut v, &mut seen, &mut queue);

        let bland = degenerate_run > degenerate_limit;
        let entering = if bland {
            price_first(&tree, cost, &u, &v, tol)
        } else {
            price_block(&tree, cost, &u, &v, tol, block, &mut cursor)
        };
        let Some((ei, ej)) = entering else {
            tree.recompute_flows(supply, demand);
            tree.potentials(cost, &mut u, &mut v, &mut seen, &mut queue);
            let cells = tree
                .cells
                .iter()
                .zip(&tree.flow)
                .map(|(&(i, j), &f)| (i, j, f))
                .collect();
            return Ok(Basis {
                cells,
                row_potential: u,
                col_potential: v,
            });
        };

        // Cycle: +entering, then alternating -, + along the path from column ej to row ei.
        let path = tree.path(ei, ej, &mut parent, &mut queue);
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        for &slot in path.iter().step_by(2) {
            let f = tree.flow[slot];
            let better = f < theta || (f == theta && tree.cells[slot] < tree.cells[leaving]);
            if better {
                theta = f;
                leaving = slot;
            }
        }
        if leaving == NONE {
            return Err(Error::SolverFailure("no leaving cell on cycle"));
        }
        for (k, &slot) in path.iter().enumerate() {
            if slot == leaving {
                continue;
            }
            if k % 2 == 0 {
                tree.flow[slot] = (tree.flow[slot] - theta).max(0.0);
            } else {
                tree.flow[slot] += theta;
            }
        }
        tree.remove(leaving);
        tree.insert(leaving, ei, ej, theta);

        if theta > 0.0 {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }
    Err(Error::SolverFailure("pivot limit reached"))
}

#[inline]
fn reduced(cost: &[f64], u: &[f64], v: &[f64], m: usize, i: usize, j: usize) -> f64 {
    cost[i * m + j] - u[i] - v[j]
}

/// Bland: first nonbasic cell in `(i, j)` order with negative reduced cost.
fn price_first(
    tree: &Tree,
    cost: &[f64],
    u: &[f64],
    v: &[f64],
    tol: f64,
) -> Option<(usize, usize)> {
    let m = tree.m;
    (0..tree.n * m)
        .find(|&k| tree.slot_of[k] == NONE && reduced(cost, u, v, m, k / m, k % m) < -tol)
        .map(|k| (k / m, k % m))
}

/// Dantzig over blocks of cells starting at `cursor`; with a single block
/// this is full Dantzig pricing with lowest-index ties.
fn price_block(
    tree: &Tree,
    cost: &[f64],
    u: &[f64],
    v: &[f64],
    tol: f64,
    block: usize,
    cursor: &mut usize,
) -> Option<(usize, usize)> {
    let m = tree.m;
    let total = tree.n * m;
    if block >= total {
        *cursor = 0;
    }
    let mut scanned = 0usize;
    while scanned < total {
        let len = block.min(total - scanned);
        let mut best = -tol;
        let mut best_k = NONE;
        for step in 0..len {
            let k = (*cursor + step) % total;
            if tree.slot_of[k] != NONE {
                continue;
            }
            let r = reduced(cost, u, v, m, k / m, k % m);
            if r < best || (r == best && best_k != NONE && k < best_k) {
                best = r;
                best_k = k;
            }
        }
        *cursor = (*cursor + len) % total;
        scanned += len;
        if best_k != NONE {
            return Some((best_k / m, best_k % m));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(b: &Basis, cost: &[f64], m: usize) -> f64 {
        b.cells.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum()
    }

    #[test]
    fn two_by_two_picks_cheaper_permutation() {
        let cost = [5.0, 1.0, 1.0, 5.0];
        let b = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((value(&b, &cost, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_is_spanning_tree_with_slackness() {
        let supply = [0.2, 0.3, 0.5];
        let demand = [0.1, 0.6, 0.1, 0.2];
        let cost = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0];
        let b = solve(&supply, &demand, &cost).unwrap();
        assert_eq!(b.cells.len(), 3 + 4 - 1);
        assert_eq!(b.col_potential[0], 0.0);
        for &(i, j, _) in &b.cells {
            let r = cost[i * 4 + j] - b.row_potential[i] - b.col_potential[j];
            assert!(r.abs() < 1e-12);
        }
        for i in 0..3 {
            for j in 0..4 {
                assert!(cost[i * 4 + j] - b.row_potential[i] - b.col_potential[j] > -1e-12);
            }
        }
    }

    #[test]
    fn permuted_problem_has_same_value() {
        let supply = [0.25, 0.25, 0.5];
        let demand = [0.4, 0.6];
        let cost = [1.0, 2.0, 3.0, 0.5, 2.0, 2.5];
        let b = solve(&supply, &demand, &cost).unwrap();
        // Swap rows 0 and 2 and the two columns.
        let supply_p = [0.5, 0.25, 0.25];
        let demand_p = [0.6, 0.4];
        let cost_p = [2.5, 2.0, 0.5, 3.0, 2.0, 1.0];
        let bp = solve(&supply_p, &demand_p, &cost_p).unwrap();
        assert!((value(&b, &cost, 2) - value(&bp, &cost_p, 2)).abs() < 1e-15);
    }
}
