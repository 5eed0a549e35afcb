//! Dense two-phase simplex for the small linear programs used by the solvers.
//!
//! Problems here have a few dozen variables at most, so a dense tableau with
//! Bland's anti-cycling rule is plenty. Variables are nonnegative unless
//! marked free; free variables are split into a positive and negative part.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<S> {
    num_vars: usize,
    free: Vec<bool>,
    objective: Vec<S>,
    rows: Vec<(Vec<S>, Relation, S)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub value: S,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S> {
    Optimal(LpSolution<S>),
    /// `residual` is the phase-one optimum (L1 infeasibility of the best point).
    Infeasible {
        residual: S,
    },
    Unbounded,
    IterationLimit,
}

impl<S: Scalar> LpOutcome<S> {
    pub fn optimal(self) -> Option<LpSolution<S>> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

const MAX_PIVOTS: usize = 100_000;

impl<S: Scalar> LinearProgram<S> {
    /// A minimization over `num_vars` nonnegative variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            free: vec![false; num_vars],
            objective: vec![S::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Sets the (minimized) objective coefficients.
    pub fn set_objective(&mut self, c: Vec<S>) {
        assert_eq!(c.len(), self.num_vars, "objective length");
        self.objective = c;
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<S>, rel: Relation, rhs: S) {
        assert_eq!(coeffs.len(), self.num_vars, "constraint length");
        self.rows.push((coeffs, rel, rhs));
    }

    /// Adds `sum_j coeffs[j] x_j rel rhs` given as sparse `(index, value)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, S)], rel: Relation, rhs: S) {
        let mut row = vec![S::zero(); self.num_vars];
        for &(j, v) in terms {
            row[j] = row[j] + v;
        }
        self.rows.push((row, rel, rhs));
    }

    pub fn solve(&self) -> LpOutcome<S> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<S> {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    cells: Vec<Vec<S>>,
    basis: Vec<usize>,
    /// Column layout: split structural columns, then slacks/surpluses, then artificials.
    col_of_var: Vec<(usize, Option<usize>)>,
    first_artificial: usize,
    width: usize,
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let mut col_of_var = Vec::with_capacity(lp.num_vars);
        let mut next = 0;
        for &is_free in &lp.free {
            if is_free {
                col_of_var.push((next, Some(next + 1)));
                next += 2;
            } else {
                col_of_var.push((next, None));
                next += 1;
            }
        }
        let structural = next;
        let m = lp.rows.len();

        // normalise rhs >= 0
        let rows: Vec<(Vec<S>, Relation, S)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < S::zero() {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|&v| -v).collect(), flipped, -*b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();

        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_slack = structural;
        let first_artificial = first_slack + num_slack;
        let width = first_artificial + num_art;

        let mut cells = vec![vec![S::zero(); width + 1]; m + 1];
        let mut basis = vec![0; m];
        let mut slack = first_slack;
        let mut art = first_artificial;
        for (i, (a, rel, b)) in rows.iter().enumerate() {
            for (j, &v) in a.iter().enumerate() {
                let (pos, neg) = col_of_var[j];
                cells[i][pos] = cells[i][pos] + v;
                if let Some(neg) = neg {
                    cells[i][neg] = cells[i][neg] - v;
                }
            }
            cells[i][width] = *b;
            match rel {
                Relation::Le => {
                    cells[i][slack] = S::one();
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    cells[i][slack] = -S::one();
                    slack += 1;
                    cells[i][art] = S::one();
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    cells[i][art] = S::one();
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self {
            cells,
            basis,
            col_of_var,
            first_artificial,
            width,
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn load_objective(&mut self, costs: &[S]) {
        let m = self.m();
        let w = self.width;
        let mut z = vec![S::zero(); w + 1];
        z[..w].copy_from_slice(&costs[..w]);
        for i in 0..m {
            let cb = costs[self.basis[i]];
            if cb != S::zero() {
                for (zj, &aij) in z.iter_mut().zip(self.cells[i].iter()) {
                    *zj = *zj - cb * aij;
                }
            }
        }
        self.cells[m] = z;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.cells[r][c];
        for v in self.cells[r].iter_mut() {
            *v = *v / piv;
        }
        let pivot_row = self.cells[r].clone();
        for (i, row) in self.cells.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != S::zero() {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v = *v - f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs primal simplex over columns `< col_limit`. Returns `Some(true)` when
    /// optimal, `Some(false)` when unbounded and `None` on the pivot limit.
    fn iterate(&mut self, col_limit: usize) -> Option<bool> {
        let tol = S::lp_tol();
        let m = self.m();
        let w = self.width;
        for _ in 0..MAX_PIVOTS {
            let entering = (0..col_limit).find(|&j| self.cells[m][j] < -tol);
            let Some(c) = entering else {
                return Some(true);
            };
            let mut best: Option<(usize, S)> = None;
            for i in 0..m {
                let a = self.cells[i][c];
                if a > tol {
                    let ratio = self.cells[i][w] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - tol
                                || ((ratio - br).abs() <= tol && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Some(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        None
    }

    fn run(mut self, lp: &LinearProgram<S>) -> LpOutcome<S> {
        let m = self.m();
        let w = self.width;
        let tol = S::lp_tol();

        if self.first_artificial < w {
            let mut phase1 = vec![S::zero(); w];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = S::one();
            }
            self.load_objective(&phase1);
            match self.iterate(w) {
                None => return LpOutcome::IterationLimit,
                Some(false) => return LpOutcome::Unbounded,
                Some(true) => {}
            }
            let residual = -self.cells[m][w];
            if residual > S::payoff_tol() {
                return LpOutcome::Infeasible { residual };
            }
            // drive remaining artificials out of the basis where possible
            for i in 0..m {
                if self.basis[i] >= self.first_artificial {
                    if let Some(c) =
                        (0..self.first_artificial).find(|&j| self.cells[i][j].abs() > tol)
                    {
                        self.pivot(i, c);
                    }
                }
            }
        }

        let mut costs = vec![S::zero(); w];
        for (j, &cj) in lp.objective.iter().enumerate() {
            let (pos, neg) = self.col_of_var[j];
            costs[pos] = cj;
            if let Some(neg) = neg {
                costs[neg] = -cj;
            }
        }
        self.load_objective(&costs);
        match self.iterate(self.first_artificial) {
            None => return LpOutcome::IterationLimit,
            Some(false) => return LpOutcome::Unbounded,
            Some(true) => {}
        }

        let mut col_value = vec![S::zero(); w];
        for i in 0..m {
            col_value[self.basis[i]] = self.cells[i][w];
        }
        let x: Vec<S> = self
            .col_of_var
            .iter()
            .map(|&(pos, neg)| col_value[pos] - neg.map_or(S::zero(), |n| col_value[n]))
            .collect();
        let value = lp
            .objective
            .iter()
            .zip(x.iter())
            .fold(S::zero(), |acc, (&c, &v)| acc + c * v);
        LpOutcome::Optimal(LpSolution { x, value })
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve_linear<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() <= S::lp_tol() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            if f != S::zero() {
                for k in col..n {
                    a[i][k] = a[i][k] - f * a[col][k];
                }
                b[i] = b[i] - f * b[col];
            }
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![-3.0, -5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = lp.solve().optimal().unwrap();
        assert!((sol.value + 36.0_f64).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variables() {
        // min t s.t. t >= x - 1, t >= 1 - x, x free, x = 0.25  -> t = 0.75
        let mut lp = LinearProgram::new(2);
        lp.set_free(0);
        lp.set_free(1);
        lp.set_objective(vec![0.0, 1.0]);
        lp.add_constraint(vec![-1.0, 1.0], Relation::Ge, -1.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 1.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Eq, 0.25);
        let sol = lp.solve().optimal().unwrap();
        assert!((sol.value - 0.75_f64).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), LpOutcome::Infeasible { .. }));

        let mut lp = LinearProgram::new(1);
        lp.set_objective(vec![-1.0_f64]);
        lp.add_constraint(vec![1.0], Relation::Ge, 0.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // x + y = 1 twice, min x  -> 0
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![1.0_f64, 0.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let sol = lp.solve().optimal().unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f32_instance() {
        let mut lp = LinearProgram::<f32>::new(2);
        lp.set_objective(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 2.0], Relation::Ge, 2.0);
        lp.add_constraint(vec![3.0, 1.0], Relation::Ge, 3.0);
        let sol = lp.solve().optimal().unwrap();
        assert!((sol.value - 1.4).abs() < 1e-5);
    }

    #[test]
    fn small_linear_system() {
        let x = solve_linear(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0_f64]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_linear(vec![vec![1.0, 2.0], vec![2.0, 4.0_f64]], vec![1.0, 2.0]).is_none());
    }
}
