//! Dense revised simplex for equality-form LPs with 0/1 constraint columns.
//!
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`, where every column of `A` has at most a
//! fixed number of unit entries. Transportation and multi-marginal transport
//! problems have this shape. The explicit basis inverse is updated by
//! elementary row operations and refactored periodically.

use crate::error::{Error, Result};

/// Pivots between refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 100;
/// Marks an unused entry in a column's row list.
pub const NO_ROW: usize = usize::MAX;
/// Smallest admissible pivot element in the ratio test.
const PIVOT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_rows: usize,
    /// Unit entries per column.
    pub nnz_per_col: usize,
    /// Row indices, `nnz_per_col` per column, packed; shorter columns are
    /// padded with [`NO_ROW`].
    pub col_rows: Vec<usize>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn num_cols(&self) -> usize {
        self.cost.len()
    }

    #[inline]
    fn rows(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.col_rows[j * self.nnz_per_col..(j + 1) * self.nnz_per_col]
            .iter()
            .copied()
            .filter(|&r| r != NO_ROW)
    }
}

/// Optimality certificate of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LpCertificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|cᵀx − bᵀy|`.
    pub duality_gap: f64,
    /// `max_j max(0, −(c_j − a_jᵀy))`.
    pub dual_infeasibility: f64,
    /// `‖Ax − b‖_∞`.
    pub primal_infeasibility: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// `(column, value)` for basic columns with positive value.
    pub support: Vec<(usize, f64)>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub certificate: LpCertificate,
}

/// Solves the LP from a feasible starting basis of `num_rows` columns.
pub fn solve_lp(problem: &LpProblem, basis: Vec<usize>) -> Result<LpSolution> {
    let m = problem.num_rows;
    if basis.len() != m {
        return Err(Error::Lp(format!("basis has {} columns for {} rows", basis.len(), m)));
    }
    let mut s = Revised::new(problem, basis)?;
    s.run()?;
    Ok(s.into_solution())
}

struct Revised<'p> {
    p: &'p LpProblem,
    m: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `B⁻¹`.
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    tol: f64,
    iterations: usize,
    since_refactor: usize,
}

impl<'p> Revised<'p> {
    fn new(p: &'p LpProblem, basis: Vec<usize>) -> Result<Self> {
        let m = p.num_rows;
        let mut is_basic = vec![false; p.num_cols()];
        for &j in &basis {
            if j >= p.num_cols() || is_basic[j] {
                return Err(Error::Lp(format!("invalid basis column {j}")));
            }
            is_basic[j] = true;
        }
        let cmax = p.cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        let mut s = Revised {
            p,
            m,
            basis,
            is_basic,
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            y: vec![0.0; m],
            tol: 1e-11 * cmax,
            iterations: 0,
            since_refactor: 0,
        };
        s.refactor()?;
        if let Some(v) = s.xb.iter().find(|v| **v < -1e-9) {
            return Err(Error::Lp(format!("starting basis is infeasible (value {v})")));
        }
        Ok(s)
    }

    /// Rebuilds `B⁻¹` by Gauss–Jordan elimination with partial pivoting and
    /// recomputes `x_B = B⁻¹ b`.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0_f64; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for r in self.p.rows(j) {
                a[r * m + c] += 1.0;
            }
        }
        let mut inv = vec![0.0_f64; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x * m + col].abs().total_cmp(&a[y * m + col].abs()))
                .unwrap();
            if a[piv * m + col].abs() < 1e-12 {
                return Err(Error::Lp("singular basis".into()));
            }
            if piv != col {
                for k in 0..m {
                    a.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        // inv is now A⁻¹ where A's column c is basis[c]; B⁻¹ row c maps to
        // basic variable c
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&self.p.rhs).map(|(x, b)| x * b).sum();
            self.xb[i] = if v.abs() < 1e-15 { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        self.y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let cb = self.p.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (y, b) in self.y.iter_mut().zip(row) {
                    *y += cb * b;
                }
            }
        }
    }

    #[inline]
    fn reduced_cost(&self, j: usize) -> f64 {
        self.p.cost[j] - self.p.rows(j).map(|r| self.y[r]).sum::<f64>()
    }

    fn price(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.p.num_cols() {
            if self.is_basic[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            if d < -self.tol {
                if bland {
                    return Some(j);
                }
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|b| b.0)
    }

    fn run(&mut self) -> Result<()> {
        let m = self.m;
        let budget = 10_000 + 50 * m * m + 2 * self.p.num_cols();
        let mut degenerate = 0usize;
        let mut col = vec![0.0; m];
        loop {
            self.compute_duals();
            let bland = degenerate > m;
            let Some(q) = self.price(bland) else {
                if self.since_refactor == 0 {
                    return Ok(());
                }
                // confirm optimality on a fresh factorization
                self.refactor()?;
                continue;
            };
            if self.iterations >= budget {
                return Err(Error::NonConvergence { iterations: self.iterations });
            }
            self.iterations += 1;

            // ã = B⁻¹ a_q
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.p.rows(q).map(|r| self.binv[i * m + r]).sum();
            }
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..m {
                if col[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / col[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < theta - TIE_TOL
                                || (ratio <= theta + TIE_TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        theta = if leave.is_none() { ratio } else { ratio.min(theta) };
                        leave = Some(i);
                    }
                }
            }
            let Some(p) = leave else {
                return Err(Error::Lp("problem is unbounded".into()));
            };
            degenerate = if theta <= 1e-14 { degenerate + 1 } else { 0 };

            for i in 0..m {
                if i != p {
                    self.xb[i] -= theta * col[i];
                    if self.xb[i].abs() < 1e-15 {
                        self.xb[i] = 0.0;
                    }
                }
            }
            self.xb[p] = theta;
            let piv = col[p];
            let (before, rest) = self.binv.split_at_mut(p * m);
            let (prow, after) = rest.split_at_mut(m);
            prow.iter_mut().for_each(|v| *v /= piv);
            for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
                let i = if i < p { i } else { i + 1 };
                let f = col[i];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(prow.iter()) {
                        *v -= f * pv;
                    }
                }
            }
            self.is_basic[self.basis[p]] = false;
            self.is_basic[q] = true;
            self.basis[p] = q;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    fn into_solution(self) -> LpSolution {
        let p = self.p;
        let mut support: Vec<(usize, f64)> = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(_, v)| **v > 1e-15)
            .map(|(&j, &v)| (j, v))
            .collect();
        support.sort_by_key(|s| s.0);
        let objective: f64 = support.iter().map(|&(j, v)| p.cost[j] * v).sum();
        let dual_objective: f64 = self.y.iter().zip(&p.rhs).map(|(y, b)| y * b).sum();
        let mut dual_infeasibility: f64 = 0.0;
        for j in 0..p.num_cols() {
            dual_infeasibility = dual_infeasibility.max(-self.reduced_cost(j));
        }
        let mut ax = vec![0.0; self.m];
        for &(j, v) in &support {
            for r in p.rows(j) {
                ax[r] += v;
            }
        }
        let primal_infeasibility =
            ax.iter().zip(&p.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        LpSolution {
            support,
            objective,
            certificate: LpCertificate {
                primal_objective: objective,
                dual_objective,
                duality_gap: (objective - dual_objective).abs(),
                dual_infeasibility,
                primal_infeasibility,
                iterations: self.iterations,
            },
            duals: self.y,
        }
    }
}
