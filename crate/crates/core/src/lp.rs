//! Dense two-phase simplex over exact scalars.
//!
//! Small and slow by design of its callers: the assignment LP of the seed
//! scheduler, the restricted master of the configuration-LP column
//! generation, and the enumerating configuration-LP oracle. Bland's rule
//! guarantees termination because no arithmetic is rounded.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<S> {
    pub coeffs: Vec<(usize, S)>,
    pub relation: Relation,
    pub rhs: S,
}

/// `min c.x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<S> {
    vars: usize,
    objective: Vec<S>,
    constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub objective: S,
    /// One multiplier per constraint, with `objective = sum(duals[r] * rhs[r])`
    /// and `c - A^T duals >= 0`. Nonpositive on `Le` rows, nonnegative on `Ge`
    /// rows.
    pub duals: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome<S> {
    Optimal(LpSolution<S>),
    Infeasible,
    Unbounded,
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(vars: usize) -> Self {
        LinearProgram {
            vars,
            objective: vec![S::zero(); vars],
            constraints: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn set_objective(&mut self, var: usize, coeff: S) {
        self.objective[var] = coeff;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, S)>, relation: Relation, rhs: S) -> usize {
        debug_assert!(coeffs.iter().all(|(v, _)| *v < self.vars));
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn constraints(&self) -> &[Constraint<S>] {
        &self.constraints
    }

    pub fn solve(&self) -> LpOutcome<S> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    obj: Vec<S>,
    basis: Vec<usize>,
    flipped: Vec<bool>,
    structural: usize,
    art_start: usize,
    width: usize,
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let m = lp.constraints.len();
        let n = lp.vars;
        let slacks = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let art_start = n + slacks;
        let width = art_start + m + 1;
        let mut rows = Vec::with_capacity(m);
        let mut flipped = Vec::with_capacity(m);
        let mut next_slack = n;
        for (r, c) in lp.constraints.iter().enumerate() {
            let flip = c.rhs.is_negative();
            let sign = if flip { -S::one() } else { S::one() };
            let mut row = vec![S::zero(); width];
            for (v, a) in &c.coeffs {
                row[*v] += a.clone() * &sign;
            }
            match c.relation {
                Relation::Le => {
                    row[next_slack] = sign.clone();
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -sign.clone();
                    next_slack += 1;
                }
                Relation::Eq => {}
            }
            row[art_start + r] = S::one();
            row[width - 1] = c.rhs.clone() * &sign;
            rows.push(row);
            flipped.push(flip);
        }
        let basis = (0..m).map(|r| art_start + r).collect();
        Tableau {
            rows,
            obj: vec![S::zero(); width],
            basis,
            flipped,
            structural: n,
            art_start,
            width,
        }
    }

    fn rhs(&self) -> usize {
        self.width - 1
    }

    /// Rebuilds the reduced-cost row for cost vector `cost` (indexed by column).
    fn price(&mut self, cost: &[S]) {
        let rhs = self.rhs();
        let mut obj: Vec<S> = (0..self.width)
            .map(|c| if c < rhs { cost[c].clone() } else { S::zero() })
            .collect();
        for (r, row) in self.rows.iter().enumerate() {
            let cb = &cost[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for (c, a) in row.iter().enumerate() {
                if !a.is_zero() {
                    obj[c] -= a.clone() * cb;
                }
            }
        }
        self.obj = obj;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let piv = self.rows[pr][pc].clone();
        if !piv.is_one() {
            for a in self.rows[pr].iter_mut() {
                if !a.is_zero() {
                    *a /= &piv;
                }
            }
        }
        let prow = self.rows[pr].clone();
        let nz: Vec<usize> = (0..self.width).filter(|&c| !prow[c].is_zero()).collect();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == pr || row[pc].is_zero() {
                continue;
            }
            let f = row[pc].clone();
            for &c in &nz {
                row[c] -= prow[c].clone() * &f;
            }
        }
        if !self.obj[pc].is_zero() {
            let f = self.obj[pc].clone();
            for &c in &nz {
                self.obj[c] -= prow[c].clone() * &f;
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs Bland's rule with entering columns restricted to `< limit`.
    /// Returns false if unbounded.
    fn optimize(&mut self, limit: usize) -> bool {
        let rhs = self.rhs();
        loop {
            let Some(pc) = (0..limit).find(|&c| self.obj[c].is_negative()) else {
                return true;
            };
            let mut best: Option<(usize, S)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[pc].is_positive() {
                    continue;
                }
                let ratio = row[rhs].clone() / &row[pc];
                let better = match &best {
                    None => true,
                    Some((br, b)) => ratio < *b || (ratio == *b && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return false,
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<S>) -> LpOutcome<S> {
        let rhs = self.rhs();
        let m = self.rows.len();

        // Phase 1: minimise the sum of artificials.
        let mut cost = vec![S::zero(); self.width];
        for c in cost.iter_mut().skip(self.art_start).take(m) {
            *c = S::one();
        }
        self.price(&cost);
        self.optimize(self.width - 1);
        if !self.obj[rhs].is_zero() {
            return LpOutcome::Infeasible;
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if self.basis[r] >= self.art_start {
                if let Some(c) = (0..self.art_start).find(|&c| !self.rows[r][c].is_zero()) {
                    self.pivot(r, c);
                }
            }
        }

        // Phase 2 with artificials barred from entering.
        let mut cost = vec![S::zero(); self.width];
        for (c, v) in lp.objective.iter().enumerate() {
            cost[c] = v.clone();
        }
        self.price(&cost);
        if !self.optimize(self.art_start) {
            return LpOutcome::Unbounded;
        }

        let mut x = vec![S::zero(); self.structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.rows[r][rhs].clone();
            }
        }
        let objective = lp
            .objective
            .iter()
            .zip(&x)
            .fold(S::zero(), |acc, (c, v)| acc + c.clone() * v);
        let duals = (0..m)
            .map(|r| {
                let y = -self.obj[self.art_start + r].clone();
                if self.flipped[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        LpOutcome::Optimal(LpSolution {
            x,
            objective,
            duals,
        })
    }
}
