//! Small dense LP front end over the `microlp` simplex solver.

use crate::error::{Error, Result};
use microlp::{ComparisonOp, OptimizationDirection, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    pub coef: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `minimize c.x` subject to `rows`, `0 <= x_i <= upper_i`.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpProblem {
    pub fn new(n: usize) -> Self {
        Self { objective: vec![0.0; n], rows: Vec::new(), upper: vec![None; n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coef: Vec<f64>, kind: RowKind, rhs: f64) {
        assert_eq!(coef.len(), self.num_vars(), "row width");
        self.rows.push(LpRow { coef, kind, rhs });
    }
}

/// Solves `problem`; returns an optimal basic solution.
pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = problem
        .objective
        .iter()
        .zip(&problem.upper)
        .map(|(&c, u)| lp.add_var(c, (0.0, u.unwrap_or(f64::INFINITY))))
        .collect();
    for row in &problem.rows {
        let expr: Vec<_> = vars.iter().zip(&row.coef).filter(|p| *p.1 != 0.0).map(|(&v, &c)| (v, c)).collect();
        let op = match row.kind {
            RowKind::Le => ComparisonOp::Le,
            RowKind::Ge => ComparisonOp::Ge,
            RowKind::Eq => ComparisonOp::Eq,
        };
        lp.add_constraint(expr, op, row.rhs);
    }
    let sol = match lp.solve() {
        Ok(outcome) => outcome.into_solution().map_err(|_| Error::Infeasible("LP solve interrupted".into()))?,
        Err(microlp::Error::Infeasible) => return Err(Error::Infeasible("LP infeasible".into())),
        Err(microlp::Error::Unbounded) => return Err(Error::Unbounded),
        Err(e) => return Err(Error::Infeasible(format!("LP failure: {e}"))),
    };
    let x: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v).max(0.0)).collect();
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_variable_lower_bound() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.add_row(vec![1.0], RowKind::Ge, 3.0);
        let s = lp_solve(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn equality_only_system() {
        let mut p = LpProblem::new(2);
        p.add_row(vec![1.0, 1.0], RowKind::Eq, 2.0);
        p.add_row(vec![1.0, -1.0], RowKind::Eq, 0.0);
        let s = lp_solve(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_row(vec![1.0], RowKind::Le, -1.0);
        assert!(matches!(lp_solve(&p), Err(Error::Infeasible(_))));
        let mut p = LpProblem::new(1);
        p.objective[0] = -1.0;
        assert!(matches!(lp_solve(&p), Err(Error::Unbounded)));
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut p = LpProblem::new(2);
        p.objective = vec![-3.0, -5.0];
        p.add_row(vec![1.0, 0.0], RowKind::Le, 4.0);
        p.add_row(vec![0.0, 2.0], RowKind::Le, 12.0);
        p.add_row(vec![3.0, 2.0], RowKind::Le, 18.0);
        let s = lp_solve(&p).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
    }
}
