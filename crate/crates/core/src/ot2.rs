//! Exact two-marginal optimal transport.
//!
//! The solver is a primal transportation simplex (network simplex on the
//! complete bipartite graph). It starts from the north-west corner basis,
//! prices entering cells by block search and falls back to Bland's rule
//! while pivots stay degenerate. Every returned coupling is a basic
//! solution, so it has at most `n + m − 1` atoms, and the final node
//! potentials certify optimality.
//!
//! Memory note: the cost matrix is dense, `n·m` doubles.

use crate::error::{Error, Result};
use crate::measure::{sq_dist, DiscreteMeasure};
use crate::plan::Coupling;

/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 64;
/// Flows below this are reported as zero.
const FLOW_EPS: f64 = 1e-15;
/// Masses within this are ties in the ratio test.
const TIE_EPS: f64 = 1e-14;

/// A transport problem between two discrete measures with squared
/// Euclidean cost.
#[derive(Debug, Clone)]
pub struct TransportProblem<'a> {
    pub source: &'a DiscreteMeasure,
    pub target: &'a DiscreteMeasure,
    cost: CostMatrix,
}

impl<'a> TransportProblem<'a> {
    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }
}

/// Row-major dense cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Squared Euclidean costs between two packed point sets of dimension `d`.
    pub fn squared_euclidean(src: &[f64], dst: &[f64], d: usize) -> Self {
        let rows = src.len() / d;
        let cols = dst.len() / d;
        Self::from_fn(rows, cols, |i, j| sq_dist(&src[i * d..(i + 1) * d], &dst[j * d..(j + 1) * d]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

/// `c[j][k] = ‖x_j − y_k‖²`.
pub fn build_cost_matrix<'a>(
    source: &'a DiscreteMeasure,
    target: &'a DiscreteMeasure,
) -> Result<TransportProblem<'a>> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let cost = CostMatrix::squared_euclidean(source.points_flat(), target.points_flat(), source.dim());
    Ok(TransportProblem { source, target, cost })
}

/// Optimal basic solution of a transportation problem.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub coupling: Coupling,
    pub cost: f64,
    /// Row potentials `u`.
    pub source_potentials: Vec<f64>,
    /// Column potentials `v`.
    pub target_potentials: Vec<f64>,
    pub iterations: usize,
}

impl TransportSolution {
    /// Largest violation of `u_i + v_j ≤ c_ij` over all cells and of
    /// `u_i + v_j = c_ij` over support cells.
    pub fn dual_violation(&self, cost: &CostMatrix) -> f64 {
        let u = &self.source_potentials;
        let v = &self.target_potentials;
        let mut worst: f64 = 0.0;
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                worst = worst.max(u[i] + v[j] - cost.get(i, j));
            }
        }
        for (i, j, _) in self.coupling.iter() {
            worst = worst.max((u[i] + v[j] - cost.get(i, j)).abs());
        }
        worst
    }

    /// Dual objective `Σ a_i u_i + Σ b_j v_j`.
    pub fn dual_objective(&self, a: &[f64], b: &[f64]) -> f64 {
        let du: f64 = a.iter().zip(&self.source_potentials).map(|(x, y)| x * y).sum();
        let dv: f64 = b.iter().zip(&self.target_potentials).map(|(x, y)| x * y).sum();
        du + dv
    }
}

/// Solves `min ⟨c, π⟩` over couplings of `source` and `target`.
pub fn solve_ot2(problem: &TransportProblem<'_>) -> Result<TransportSolution> {
    solve_transport(problem.source.weights(), problem.target.weights(), &problem.cost)
}

/// `W₂²(μ, ν)`.
pub fn w2_squared(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(solve_ot2(&build_cost_matrix(mu, nu)?)?.cost)
}

/// Transportation simplex on raw supplies, demands and an arbitrary
/// nonnegative cost matrix. Supplies and demands must have (nearly) equal
/// totals; zero entries are allowed.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &CostMatrix) -> Result<TransportSolution> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 || cost.rows() != n || cost.cols() != m {
        return Err(Error::InvalidParameter(format!(
            "transport problem shape {}x{} does not match cost matrix {}x{}",
            n,
            m,
            cost.rows(),
            cost.cols()
        )));
    }
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::InvalidParameter(format!("unbalanced transport problem: {sa} vs {sb}")));
    }
    let mut s = Simplex::new(supply, demand, cost);
    s.run()?;
    Ok(s.into_solution())
}

struct Simplex<'c> {
    n: usize,
    m: usize,
    cost: &'c CostMatrix,
    /// Basic cells as `(row, col)`; always `n + m − 1` of them.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// Tree adjacency over nodes `0..n` (rows) and `n..n+m` (columns),
    /// storing basic cell slots.
    adj: Vec<Vec<usize>>,
    /// Potentials indexed by node; rows first then columns.
    pot: Vec<f64>,
    parent_edge: Vec<usize>,
    parent_node: Vec<usize>,
    depth: Vec<usize>,
    tol: f64,
    block: usize,
    next_cell: usize,
    iterations: usize,
}

impl<'c> Simplex<'c> {
    fn new(a: &[f64], b: &[f64], cost: &'c CostMatrix) -> Self {
        let n = a.len();
        let m = b.len();
        let max_cost = cost.data.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let mut s = Simplex {
            n,
            m,
            cost,
            cells: Vec::with_capacity(n + m - 1),
            flow: Vec::with_capacity(n + m - 1),
            adj: vec![Vec::new(); n + m],
            pot: vec![0.0; n + m],
            parent_edge: vec![usize::MAX; n + m],
            parent_node: vec![usize::MAX; n + m],
            depth: vec![0; n + m],
            tol: 1e-12 * max_cost.max(f64::MIN_POSITIVE),
            block: ((n * m) as f64).sqrt().ceil().max(10.0) as usize,
            next_cell: 0,
            iterations: 0,
        };
        s.north_west_corner(a, b);
        s
    }

    fn north_west_corner(&mut self, a: &[f64], b: &[f64]) {
        let (n, m) = (self.n, self.m);
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0], b[0]);
        loop {
            let x = ra.min(rb).max(0.0);
            self.push_cell(i, j, x);
            ra -= x;
            rb -= x;
            if i + 1 == n && j + 1 == m {
                break;
            }
            if (ra <= rb && i + 1 < n) || j + 1 == m {
                i += 1;
                ra += a[i];
            } else {
                j += 1;
                rb += b[j];
            }
        }
        debug_assert_eq!(self.cells.len(), n + m - 1);
    }

    fn push_cell(&mut self, i: usize, j: usize, x: f64) {
        let slot = self.cells.len();
        self.cells.push((i, j));
        self.flow.push(x);
        self.adj[i].push(slot);
        self.adj[self.n + j].push(slot);
    }

    /// Recomputes potentials and the rooted tree structure from node 0.
    fn refresh_tree(&mut self) {
        let n = self.n;
        let total = n + self.m;
        let mut visited = vec![false; total];
        let mut stack = Vec::with_capacity(total);
        visited[0] = true;
        self.pot[0] = 0.0;
        self.depth[0] = 0;
        self.parent_edge[0] = usize::MAX;
        self.parent_node[0] = usize::MAX;
        stack.push(0);
        while let Some(node) = stack.pop() {
            for &slot in &self.adj[node] {
                let (r, c) = self.cells[slot];
                let other = if node < n { n + c } else { r };
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                let cij = self.cost.get(r, c);
                // u_r + v_c = c_rc
                self.pot[other] = cij - self.pot[node];
                self.depth[other] = self.depth[node] + 1;
                self.parent_edge[other] = slot;
                self.parent_node[other] = node;
                stack.push(other);
            }
        }
        debug_assert!(visited.iter().all(|v| *v), "basis is not a spanning tree");
    }

    #[inline]
    fn reduced_cost(&self, i: usize, j: usize) -> f64 {
        self.cost.get(i, j) - self.pot[i] - self.pot[self.n + j]
    }

    /// Block search: scan cells from `next_cell` in blocks and return the
    /// most negative reduced cost of the first block that has one.
    fn price_block(&mut self) -> Option<(usize, usize)> {
        let total = self.n * self.m;
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut k = self.next_cell;
        while scanned < total {
            let stop = (scanned + self.block).min(total);
            while scanned < stop {
                let (i, j) = (k / self.m, k % self.m);
                let d = self.reduced_cost(i, j);
                if d < -self.tol && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
                scanned += 1;
                k += 1;
                if k == total {
                    k = 0;
                }
            }
            if best.is_some() {
                break;
            }
        }
        self.next_cell = k;
        best.map(|(k, _)| (k / self.m, k % self.m))
    }

    /// Bland's rule: lowest-index cell with negative reduced cost.
    fn price_bland(&self) -> Option<(usize, usize)> {
        for i in 0..self.n {
            for j in 0..self.m {
                if self.reduced_cost(i, j) < -self.tol {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn run(&mut self) -> Result<()> {
        let budget = 50 * (self.n + self.m) * (self.n + self.m);
        let mut degenerate = 0usize;
        loop {
            self.refresh_tree();
            let bland = degenerate >= DEGENERATE_STREAK;
            let entering = if bland { self.price_bland() } else { self.price_block() };
            let Some((ei, ej)) = entering else {
                return Ok(());
            };
            if self.iterations >= budget {
                return Err(Error::NonConvergence { iterations: self.iterations });
            }
            self.iterations += 1;
            let theta = self.pivot(ei, ej);
            if theta <= FLOW_EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    /// Cycle of basic slots closed by entering cell `(i, j)`, starting at
    /// the column side. Odd positions (0-based) of the returned list carry
    /// `+`, even positions `−`.
    fn cycle(&self, i: usize, j: usize) -> Vec<usize> {
        let mut a = i;
        let mut b = self.n + j;
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        while self.depth[a] > self.depth[b] {
            from_row.push(self.parent_edge[a]);
            a = self.parent_node[a];
        }
        while self.depth[b] > self.depth[a] {
            from_col.push(self.parent_edge[b]);
            b = self.parent_node[b];
        }
        while a != b {
            from_row.push(self.parent_edge[a]);
            a = self.parent_node[a];
            from_col.push(self.parent_edge[b]);
            b = self.parent_node[b];
        }
        from_row.reverse();
        from_col.extend(from_row);
        from_col
    }

    /// Performs one pivot and returns the step length.
    fn pivot(&mut self, ei: usize, ej: usize) -> f64 {
        let cyc = self.cycle(ei, ej);
        // minus edges sit at even positions
        let mut leave = usize::MAX;
        let mut theta = f64::INFINITY;
        for (pos, &slot) in cyc.iter().enumerate() {
            if pos % 2 != 0 {
                continue;
            }
            let f = self.flow[slot];
            let idx = self.cell_index(slot);
            if f < theta - TIE_EPS
                || ((f - theta).abs() <= TIE_EPS && idx < self.cell_index(leave))
            {
                theta = f.min(theta);
                leave = slot;
            }
        }
        let theta = theta.max(0.0);
        for (pos, &slot) in cyc.iter().enumerate() {
            if pos % 2 == 0 {
                self.flow[slot] = (self.flow[slot] - theta).max(0.0);
            } else {
                self.flow[slot] += theta;
            }
        }
        // replace the leaving cell by the entering one in place
        let (li, lj) = self.cells[leave];
        let n = self.n;
        self.adj[li].retain(|&s| s != leave);
        self.adj[n + lj].retain(|&s| s != leave);
        self.cells[leave] = (ei, ej);
        self.flow[leave] = theta;
        self.adj[ei].push(leave);
        self.adj[n + ej].push(leave);
        theta
    }

    #[inline]
    fn cell_index(&self, slot: usize) -> usize {
        if slot == usize::MAX {
            return usize::MAX;
        }
        let (i, j) = self.cells[slot];
        i * self.m + j
    }

    fn into_solution(self) -> TransportSolution {
        let atoms: Vec<(usize, usize, f64)> = self
            .cells
            .iter()
            .zip(&self.flow)
            .filter(|(_, f)| **f > FLOW_EPS)
            .map(|(&(i, j), &f)| (i, j, f))
            .collect();
        let cost: f64 = atoms.iter().map(|&(i, j, f)| f * self.cost.get(i, j)).sum();
        let coupling = Coupling::new(atoms).expect("solver atoms are well formed");
        TransportSolution {
            coupling,
            cost,
            source_potentials: self.pot[..self.n].to_vec(),
            target_potentials: self.pot[self.n..].to_vec(),
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|x| vec![*x]).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn cost_matrix_entries() {
        let a = line(&[0.0], &[1.0]);
        let b = line(&[3.0], &[1.0]);
        assert_eq!(build_cost_matrix(&a, &b).unwrap().cost().get(0, 0), 9.0);

        let x = DiscreteMeasure::dirac(vec![-1.0, 0.625]).unwrap();
        let y = DiscreteMeasure::dirac(vec![1.0, 0.625]).unwrap();
        assert_eq!(build_cost_matrix(&x, &y).unwrap().cost().get(0, 0), 4.0);

        let z = line(&[0.0, 1.0, 5.0], &[1.0, 1.0, 1.0]);
        let p = build_cost_matrix(&z, &z).unwrap();
        for k in 0..3 {
            assert_eq!(p.cost().get(k, k), 0.0);
        }
        let q = build_cost_matrix(&z, &a).unwrap();
        assert_eq!(q.cost().transpose(), build_cost_matrix(&a, &z).unwrap().cost().clone());
        assert!(build_cost_matrix(&x, &a).is_err());
    }

    #[test]
    fn identical_measures_give_identity() {
        let mu = line(&[0.0, 1.0, 4.0], &[0.2, 0.5, 0.3]);
        let sol = solve_ot2(&build_cost_matrix(&mu, &mu).unwrap()).unwrap();
        assert_eq!(sol.cost, 0.0);
        let atoms: Vec<_> = sol.coupling.iter().collect();
        assert_eq!(atoms, vec![(0, 0, 0.2), (1, 1, 0.5), (2, 2, 0.3)]);
    }

    #[test]
    fn monotone_coupling_on_the_line() {
        let mu = line(&[0.0, 3.0], &[0.5, 0.5]);
        let nu = line(&[1.0, 2.0], &[0.5, 0.5]);
        let sol = solve_ot2(&build_cost_matrix(&mu, &nu).unwrap()).unwrap();
        assert!((sol.cost - 1.0).abs() < 1e-15);
        let atoms: Vec<_> = sol.coupling.iter().collect();
        assert_eq!(atoms, vec![(0, 0, 0.5), (1, 1, 0.5)]);
    }

    #[test]
    fn barycenter_distance_of_worked_example() {
        let tilde = line(&[4.0 / 3.0, 5.0 / 3.0], &[0.5, 0.5]);
        let hat = line(&[2.0 / 3.0, 7.0 / 3.0], &[0.5, 0.5]);
        assert!((w2_squared(&tilde, &hat).unwrap() - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_order_needs_pivots() {
        // north-west corner starts from the anti-monotone coupling here
        let mu = line(&[0.0, 1.0, 2.0, 3.0], &[0.25; 4]);
        let nu = line(&[3.0, 2.0, 1.0, 0.0], &[0.25; 4]);
        let sol = solve_ot2(&build_cost_matrix(&mu, &nu).unwrap()).unwrap();
        assert!(sol.cost.abs() < 1e-15);
        assert!(sol.iterations > 0);
        assert!(sol.coupling.len() <= 7);
    }

    #[test]
    fn potentials_certify_optimality() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 0.9]],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            vec![vec![0.5, 0.5], vec![0.9, 0.1], vec![0.1, 0.8], vec![0.0, 0.3]],
            vec![0.1, 0.2, 0.3, 0.4],
        )
        .unwrap();
        let p = build_cost_matrix(&mu, &nu).unwrap();
        let sol = solve_ot2(&p).unwrap();
        assert!(sol.dual_violation(p.cost()) < 1e-12);
        let dual = sol.dual_objective(mu.weights(), nu.weights());
        assert!((dual - sol.cost).abs() < 1e-12);
        assert!(sol.coupling.len() <= 3 + 4 - 1);
    }

    #[test]
    fn rejects_unbalanced_and_misshaped_input() {
        let c = CostMatrix::from_fn(2, 2, |i, j| (i + j) as f64);
        assert!(solve_transport(&[0.5, 0.5], &[0.5, 0.6], &c).is_err());
        assert!(solve_transport(&[1.0], &[0.5, 0.5], &c).is_err());
    }

    #[test]
    fn handles_zero_supplies_and_degenerate_ties() {
        let c = CostMatrix::from_fn(3, 3, |i, j| ((i as f64) - (j as f64)).powi(2));
        let sol = solve_transport(&[0.5, 0.0, 0.5], &[0.5, 0.0, 0.5], &c).unwrap();
        assert!(sol.cost.abs() < 1e-15);
        let sol = solve_transport(&[1.0 / 3.0; 3], &[1.0 / 3.0; 3], &c).unwrap();
        assert!(sol.cost.abs() < 1e-15);
    }
}
