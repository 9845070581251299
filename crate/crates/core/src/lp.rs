//! Exact rational linear programming.
//!
//! Variables are non-negative; the objective is minimized. The default
//! backend is a dense two-phase simplex with Bland's pivot rule.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    /// A feasibility problem (zero objective) over `num_vars` variables.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram { num_vars, objective: vec![rational::zero(); num_vars], constraints: Vec::new() }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, Rational)>, sense: Sense, rhs: Rational) -> usize {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self.constraints.len() - 1
    }

    /// Checks a point against all rows and the sign constraints.
    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars
            && x.iter().all(|v| !v.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.coeffs.iter().map(|(j, a)| a * &x[*j]).sum();
                match c.sense {
                    Sense::Le => lhs <= c.rhs,
                    Sense::Eq => lhs == c.rhs,
                    Sense::Ge => lhs >= c.rhs,
                }
            })
    }

    pub fn value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub x: Vec<Rational>,
    pub objective: Rational,
    /// One dual per constraint: Le rows ≤ 0, Ge rows ≥ 0 (minimization).
    pub duals: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpResult {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpResult::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// Any exact backend can be plugged in here.
pub trait LpBackend {
    fn solve(&self, lp: &LinearProgram) -> LpResult;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExactSimplex;

impl LpBackend for ExactSimplex {
    fn solve(&self, lp: &LinearProgram) -> LpResult {
        Tableau::new(lp).solve(lp)
    }
}

pub fn solve(lp: &LinearProgram) -> LpResult {
    ExactSimplex.solve(lp)
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Initial basic column of each row (slack or artificial).
    unit_col: Vec<usize>,
    negated: Vec<bool>,
    first_artificial: usize,
    width: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let slacks = lp.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
        let mut negated = vec![false; m];
        let mut senses = Vec::with_capacity(m);
        for (r, c) in lp.constraints.iter().enumerate() {
            let mut sense = c.sense;
            if c.rhs.is_negative() {
                negated[r] = true;
                sense = match sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
            senses.push(sense);
        }
        let artificials = senses.iter().filter(|s| **s != Sense::Le).count();
        let first_artificial = n + slacks;
        let width = first_artificial + artificials;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut unit_col = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for (r, c) in lp.constraints.iter().enumerate() {
            let sign = if negated[r] { -rational::one() } else { rational::one() };
            let mut row = vec![rational::zero(); width + 1];
            for (j, a) in &c.coeffs {
                row[*j] += a * &sign;
            }
            row[width] = &c.rhs * &sign;
            match senses[r] {
                Sense::Le => {
                    row[next_slack] = rational::one();
                    basis.push(next_slack);
                    unit_col.push(next_slack);
                    next_slack += 1;
                }
                Sense::Ge => {
                    row[next_slack] = -rational::one();
                    next_slack += 1;
                    row[next_art] = rational::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
                Sense::Eq => {
                    row[next_art] = rational::one();
                    basis.push(next_art);
                    unit_col.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        Tableau { rows, basis, unit_col, negated, first_artificial, width }
    }

    fn solve(mut self, lp: &LinearProgram) -> LpResult {
        if self.first_artificial < self.width {
            let mut phase1 = vec![rational::zero(); self.width];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = rational::one();
            }
            self.optimize(&phase1, self.width);
            let infeasibility: Rational =
                self.rows.iter().zip(&self.basis).filter(|(_, &b)| b >= self.first_artificial).map(|(r, _)| &r[self.width]).sum();
            if infeasibility.is_positive() {
                return LpResult::Infeasible;
            }
            self.evict_artificials();
        }
        let mut cost = vec![rational::zero(); self.width];
        cost[..lp.num_vars].clone_from_slice(&lp.objective);
        if !self.optimize(&cost, self.first_artificial) {
            return LpResult::Unbounded;
        }
        let mut x = vec![rational::zero(); lp.num_vars];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < lp.num_vars {
                x[b] = self.rows[r][self.width].clone();
            }
        }
        let duals = (0..self.rows.len())
            .map(|r| {
                let col = self.unit_col[r];
                let y: Rational = self.rows.iter().zip(&self.basis).map(|(row, &b)| &cost[b] * &row[col]).sum();
                if self.negated[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let objective = lp.value(&x);
        LpResult::Optimal(LpSolution { x, objective, duals })
    }

    /// Runs simplex with Bland's rule; columns at or beyond `limit` never enter.
    /// Returns false when unbounded.
    fn optimize(&mut self, cost: &[Rational], limit: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let reduced: Rational = &cost[j]
                    - self
                        .rows
                        .iter()
                        .zip(&self.basis)
                        .filter(|(row, _)| !row[j].is_zero())
                        .map(|(row, &b)| &cost[b] * &row[j])
                        .sum::<Rational>();
                if reduced.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return true };
            let mut leaving: Option<(usize, Rational)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[j].is_positive() {
                    continue;
                }
                let ratio = &row[self.width] / &row[j];
                let better = match &leaving {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*k]),
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
            let Some((r, _)) = leaving else { return false };
            self.pivot(r, j);
        }
    }

    /// Pivots zero-valued artificials out of the basis where possible. Rows
    /// where that is impossible are redundant and stay inert.
    fn evict_artificials(&mut self) {
        for r in 0..self.rows.len() {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            if let Some(j) = (0..self.first_artificial).find(|&j| !self.rows[r][j].is_zero()) {
                self.pivot(r, j);
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r || row[j].is_zero() {
                continue;
            }
            let factor = row[j].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &factor * pv;
                }
            }
        }
        self.basis[r] = j;
    }
}
