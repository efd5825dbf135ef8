//! Dense two-phase simplex for the small programs solved by the regret oracle.
//!
//! Variables are non-negative. Pivoting follows Bland's rule, which cannot
//! cycle; the programs solved here have at most a few thousand columns.

use thiserror::Error;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("pivot limit of {0} exceeded")]
    PivotLimit(usize),
    #[error("row has {got} coefficients, expected {expected}")]
    Shape { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

/// `maximize cᵀx` subject to row constraints and `x ≥ 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> Result<(), LpError> {
        if coeffs.len() != self.objective.len() {
            return Err(LpError::Shape {
                got: coeffs.len(),
                expected: self.objective.len(),
            });
        }
        self.rows.push((coeffs, rel, rhs));
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1` (rhs last).
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n: usize,
    cols: usize,
    artificial_from: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let m = lp.rows.len();
        let normalized: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let slack_count = normalized.iter().filter(|r| r.1 != Relation::Eq).count();
        let art_count = normalized.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_from = n + slack_count;
        let cols = artificial_from + art_count;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (n, artificial_from);
        for (a, rel, b) in normalized {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(&a);
            row[cols] = b;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            n,
            cols,
            artificial_from,
        }
    }

    /// Reduced-cost row for maximizing `costᵀx` under the current basis.
    fn price(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.cols + 1];
        for (j, &c) in cost.iter().enumerate() {
            obj[j] = -c;
        }
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (o, &r) in obj.iter_mut().zip(row) {
                    *o += cb * r;
                }
            }
        }
        obj
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, e: usize) {
        let piv = self.rows[r][e];
        for x in self.rows[r].iter_mut() {
            *x /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
            }
        }
        let f = obj[e];
        if f != 0.0 {
            for (x, &p) in obj.iter_mut().zip(&pivot_row) {
                *x -= f * p;
            }
        }
        self.basis[r] = e;
    }

    /// Runs simplex iterations over columns `< allowed`.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<(), LpError> {
        let limit = 50 * (self.cols + self.rows.len()) + 1000;
        for _ in 0..limit {
            let Some(e) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(f64, usize, usize)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[e];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some((best, _, bidx)) => ratio < best - EPS || (ratio <= best + EPS && self.basis[i] < bidx),
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(obj, r, e);
        }
        Err(LpError::PivotLimit(limit))
    }

    fn solve(mut self, objective: &[f64]) -> Result<LpSolution, LpError> {
        if self.artificial_from < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().skip(self.artificial_from) {
                *c = -1.0;
            }
            let mut obj = self.price(&phase1);
            self.optimize(&mut obj, self.cols)?;
            if obj[self.cols] < -1e-7 {
                return Err(LpError::Infeasible);
            }
            // drive zero-level artificials out of the basis
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.artificial_from {
                    match (0..self.artificial_from).find(|&j| self.rows[r][j].abs() > EPS) {
                        Some(e) => {
                            self.pivot(&mut obj, r, e);
                            r += 1;
                        }
                        None => {
                            // redundant row
                            self.rows.remove(r);
                            self.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }
        let mut obj = self.price(objective);
        self.optimize(&mut obj, self.artificial_from)?;
        let mut x = vec![0.0; self.n];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n {
                x[b] = row[self.cols];
            }
        }
        let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { objective: value, x })
    }
}
