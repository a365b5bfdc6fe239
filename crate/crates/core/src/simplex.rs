//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems arrive in computational form: minimize `c'x` subject to equality
//! rows `Ax = b` and variable bounds `l <= x <= u` (infinities admitted).
//! Conversion to standard form (shifts, sign flips, free-variable splits and
//! slack rows for finite widths) happens internally.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A linear program in computational form.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    /// Equality rows, each of length `objective.len()`.
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
}

impl LpProblem {
    fn validate(&self) -> Result<()> {
        let p = self.objective.len();
        if p == 0 {
            return Err(Error::InvalidArgument("LP needs at least one variable".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("objective coefficients must be finite".into()));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() {
            return Err(Error::InvalidArgument("equality row/rhs count mismatch".into()));
        }
        if self.eq_matrix.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidArgument("equality row length mismatch".into()));
        }
        if self.var_lower.len() != p || self.var_upper.len() != p {
            return Err(Error::InvalidArgument("bound length mismatch".into()));
        }
        for j in 0..p {
            if self.var_lower[j].is_nan()
                || self.var_upper[j].is_nan()
                || self.var_lower[j] > self.var_upper[j]
            {
                return Err(Error::InvalidArgument(format!(
                    "invalid bounds for variable {j}: [{}, {}]",
                    self.var_lower[j], self.var_upper[j]
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of the solve.
#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;

/// Standard-form program: min cost'y s.t. Ay = b, y >= 0, together with the
/// affine map back to the original variables
/// `x[j] = shift[j] + sum sign * y[col]`.
struct StandardForm {
    a: DMatrix<f64>,
    b: Vec<f64>,
    cost: Vec<f64>,
    /// Per original variable: shift and the (column, sign) terms.
    terms: Vec<(f64, Vec<(usize, f64)>)>,
    n_structural: usize,
}

fn to_standard_form(lp: &LpProblem) -> StandardForm {
    let p = lp.objective.len();
    let mut terms: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(p);
    let mut next_col = 0usize;
    for j in 0..p {
        let (l, u) = (lp.var_lower[j], lp.var_upper[j]);
        if l.is_finite() {
            terms.push((l, vec![(next_col, 1.0)]));
            next_col += 1;
        } else if u.is_finite() {
            terms.push((u, vec![(next_col, -1.0)]));
            next_col += 1;
        } else {
            terms.push((0.0, vec![(next_col, 1.0), (next_col + 1, -1.0)]));
            next_col += 2;
        }
    }

    // width rows y + s = u - l for doubly-finite variables
    let mut width_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..p {
        if lp.var_lower[j].is_finite() && lp.var_upper[j].is_finite() {
            width_rows.push((terms[j].1[0].0, lp.var_upper[j] - lp.var_lower[j]));
        }
    }

    let n_rows = lp.eq_matrix.len() + width_rows.len();
    let n_cols = next_col + width_rows.len();
    let mut a = DMatrix::zeros(n_rows, n_cols);
    let mut b = vec![0.0f64; n_rows];
    let mut cost = vec![0.0f64; n_cols];

    for (i, row) in lp.eq_matrix.iter().enumerate() {
        let mut rhs = lp.eq_rhs[i];
        for j in 0..p {
            let coef = row[j];
            if coef == 0.0 {
                continue;
            }
            rhs -= coef * terms[j].0;
            for &(col, sign) in &terms[j].1 {
                a[(i, col)] += coef * sign;
            }
        }
        b[i] = rhs;
    }
    for (k, &(ycol, width)) in width_rows.iter().enumerate() {
        let i = lp.eq_matrix.len() + k;
        a[(i, ycol)] = 1.0;
        a[(i, next_col + k)] = 1.0;
        b[i] = width;
    }
    for j in 0..p {
        for &(col, sign) in &terms[j].1 {
            cost[col] += lp.objective[j] * sign;
        }
    }

    StandardForm { a, b, cost, terms, n_structural: n_cols }
}

/// Dense tableau: structural rows, then one cost row; last column is the rhs.
struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    n_cols: usize,
    /// Columns allowed to enter the basis (artificials are barred in phase 2).
    enterable: usize,
}

enum StepOutcome {
    Optimal,
    Pivoted,
    Unbounded,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.n_cols)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[(row, col)];
        for j in 0..=self.n_cols {
            self.t[(row, j)] /= piv;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..=self.n_cols {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering = lowest-index enterable column with negative
    /// reduced cost; leaving = min-ratio row with ties to the lowest basis
    /// variable index.
    fn step(&mut self) -> StepOutcome {
        let m = self.rows();
        let cost_row = m;
        let mut entering = None;
        for j in 0..self.enterable {
            if self.t[(cost_row, j)] < -COST_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            return StepOutcome::Optimal;
        };
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = self.t[(i, col)];
            if coef > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / coef;
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || ((ratio - lr).abs() <= PIVOT_TOL && self.basis[i] < self.basis[li])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leaving else {
            return StepOutcome::Unbounded;
        };
        self.pivot(row, col);
        StepOutcome::Pivoted
    }

    fn run(&mut self, max_pivots: usize, phase: &str) -> Result<StepOutcome> {
        for _ in 0..max_pivots {
            match self.step() {
                StepOutcome::Pivoted => continue,
                done => return Ok(done),
            }
        }
        Err(Error::SolverFailure(format!("{phase} pivot limit of {max_pivots} exceeded")))
    }
}

/// Solves the LP by a two-phase dense simplex; optimality is certified by
/// nonnegative reduced costs, infeasibility by a positive phase-1 optimum.
pub fn simplex_solve(lp: &LpProblem) -> Result<LpOutcome> {
    lp.validate()?;
    let sf = to_standard_form(lp);
    let m = sf.a.nrows();
    let n = sf.n_structural;

    if m == 0 {
        return Ok(finish_rowless(lp, &sf));
    }

    // Phase 1: artificial basis, rows sign-fixed so the rhs is nonnegative.
    let n_total = n + m;
    let mut t = DMatrix::zeros(m + 1, n_total + 1);
    for i in 0..m {
        let s = if sf.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = s * sf.a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n_total)] = s * sf.b[i];
    }
    // Cost row for min(sum of artificials), expressed in the nonbasic columns:
    // subtracting every structural row zeroes the basic artificial costs.
    for j in 0..=n_total {
        let mut s = 0.0;
        for i in 0..m {
            s += t[(i, j)];
        }
        t[(m, j)] = -s;
    }
    for j in n..n_total {
        t[(m, j)] = 0.0;
    }

    let mut tab =
        Tableau { t, basis: (n..n_total).collect(), n_cols: n_total, enterable: n_total };
    let max_pivots = 100 * (m + n_total) + 1000;
    match tab.run(max_pivots, "phase-1")? {
        StepOutcome::Unbounded => {
            return Err(Error::SolverFailure(
                "phase-1 reported unbounded; artificial objective is bounded below".into(),
            ))
        }
        StepOutcome::Optimal | StepOutcome::Pivoted => {}
    }
    let scale: f64 = sf.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let phase1_obj = -tab.t[(m, n_total)];
    if phase1_obj > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive leftover artificials out of the basis where possible; rows that
    // cannot pivot are redundant and keep their artificial basic at level zero.
    for i in 0..m {
        if tab.basis[i] >= n {
            for j in 0..n {
                if tab.t[(i, j)].abs() > PIVOT_TOL {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }

    // Phase 2: rebuild the cost row for the true objective; artificials are
    // barred from entering.
    tab.enterable = n;
    for j in 0..n {
        tab.t[(m, j)] = sf.cost[j];
    }
    for j in n..n_total {
        tab.t[(m, j)] = 0.0;
    }
    tab.t[(m, n_total)] = 0.0;
    for i in 0..m {
        let bj = tab.basis[i];
        let c = tab.t[(m, bj)];
        if c != 0.0 {
            for j in 0..=n_total {
                let v = tab.t[(i, j)];
                tab.t[(m, j)] -= c * v;
            }
        }
    }

    match tab.run(max_pivots, "phase-2")? {
        StepOutcome::Unbounded => return Ok(LpOutcome::Unbounded),
        StepOutcome::Optimal | StepOutcome::Pivoted => {}
    }

    let mut ys = vec![0.0f64; n_total];
    for i in 0..m {
        ys[tab.basis[i]] = tab.rhs(i).max(0.0);
    }
    Ok(LpOutcome::Optimal { x: map_back(lp, &sf, &ys), objective: objective_of(lp, &sf, &ys) })
}

fn map_back(lp: &LpProblem, sf: &StandardForm, ys: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0f64; lp.objective.len()];
    for (j, (shift, cols)) in sf.terms.iter().enumerate() {
        let mut v = *shift;
        for &(col, sign) in cols {
            v += sign * ys[col];
        }
        x[j] = v;
    }
    x
}

fn objective_of(lp: &LpProblem, sf: &StandardForm, ys: &[f64]) -> f64 {
    lp.objective.iter().zip(map_back(lp, sf, ys)).map(|(c, v)| c * v).sum()
}

fn finish_rowless(lp: &LpProblem, sf: &StandardForm) -> LpOutcome {
    // Without rows every standard variable minimizes independently at zero; a
    // negative cost coefficient means the program is unbounded below.
    if sf.cost.iter().any(|&c| c < -COST_TOL) {
        return LpOutcome::Unbounded;
    }
    let ys = vec![0.0f64; sf.n_structural];
    LpOutcome::Optimal { x: map_back(lp, sf, &ys), objective: objective_of(lp, sf, &ys) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn optimal(lp: &LpProblem) -> (Vec<f64>, f64) {
        match simplex_solve(lp).unwrap() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn lower_bound_only() {
        // min x s.t. x >= 3
        let lp = LpProblem {
            objective: vec![1.0],
            eq_matrix: vec![],
            eq_rhs: vec![],
            var_lower: vec![3.0],
            var_upper: vec![f64::INFINITY],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 3.0).abs() < 1e-9);
        assert!((obj - 3.0).abs() < 1e-9);
    }

    #[test]
    fn absolute_value_via_slack_rows() {
        // min r  s.t. theta = 5, |theta - 4| <= r  =>  r = 1
        // rows: theta - r + s1 = 4 ; -theta - r + s2 = -4
        let lp = LpProblem {
            objective: vec![1.0, 0.0, 0.0, 0.0],
            eq_matrix: vec![
                vec![-1.0, 1.0, 1.0, 0.0],
                vec![-1.0, -1.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0, 0.0],
            ],
            eq_rhs: vec![4.0, -4.0, 5.0],
            var_lower: vec![0.0, f64::NEG_INFINITY, 0.0, 0.0],
            var_upper: vec![f64::INFINITY; 4],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 1.0).abs() < 1e-9, "r = {}", x[0]);
        assert!((x[1] - 5.0).abs() < 1e-9);
        assert!((obj - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let lp = LpProblem {
            objective: vec![1.0, 1.0],
            eq_matrix: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            eq_rhs: vec![1.0, 2.0],
            var_lower: vec![0.0, 0.0],
            var_upper: vec![f64::INFINITY, f64::INFINITY],
        };
        assert!(matches!(simplex_solve(&lp).unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn detects_unbounded() {
        let lp = LpProblem {
            objective: vec![-1.0],
            eq_matrix: vec![],
            eq_rhs: vec![],
            var_lower: vec![0.0],
            var_upper: vec![f64::INFINITY],
        };
        assert!(matches!(simplex_solve(&lp).unwrap(), LpOutcome::Unbounded));

        let lp = LpProblem {
            objective: vec![-1.0, 0.0],
            eq_matrix: vec![vec![0.0, 1.0]],
            eq_rhs: vec![1.0],
            var_lower: vec![0.0, 0.0],
            var_upper: vec![f64::INFINITY; 2],
        };
        assert!(matches!(simplex_solve(&lp).unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn handles_box_and_free_variables() {
        // min x + y - z  s.t. x + y + z = 4, 0 <= x <= 1, 1 <= y <= 2, z free;
        // raising z costs nothing beyond pushing x, y to their lower bounds.
        let lp = LpProblem {
            objective: vec![1.0, 1.0, -1.0],
            eq_matrix: vec![vec![1.0, 1.0, 1.0]],
            eq_rhs: vec![4.0],
            var_lower: vec![0.0, 1.0, f64::NEG_INFINITY],
            var_upper: vec![1.0, 2.0, f64::INFINITY],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 0.0).abs() < 1e-9);
        assert!((x[1] - 1.0).abs() < 1e-9);
        assert!((x[2] - 3.0).abs() < 1e-9);
        assert!((obj + 2.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounded_variable_without_lower() {
        // min -x s.t. x <= 2  => x = 2
        let lp = LpProblem {
            objective: vec![-1.0],
            eq_matrix: vec![],
            eq_rhs: vec![],
            var_lower: vec![f64::NEG_INFINITY],
            var_upper: vec![2.0],
        };
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 2.0).abs() < 1e-9);
        assert!((obj + 2.0).abs() < 1e-9);
    }

    /// Oracle: enumerate all bases of a standard-form program.
    fn basis_enumeration_optimum(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
        let m = a.len();
        let n = c.len();
        let mut best: Option<f64> = None;
        let mut combo: Vec<usize> = (0..m).collect();
        loop {
            let mut mat = DMatrix::zeros(m, m);
            for (k, &j) in combo.iter().enumerate() {
                for i in 0..m {
                    mat[(i, k)] = a[i][j];
                }
            }
            let rhs = nalgebra::DVector::from_column_slice(b);
            if mat.determinant().abs() > 1e-10 {
                if let Some(sol) = mat.lu().solve(&rhs) {
                    if sol.iter().all(|&v| v >= -1e-9) {
                        let obj: f64 =
                            combo.iter().zip(sol.iter()).map(|(&j, &v)| c[j] * v).sum();
                        best = Some(best.map_or(obj, |cur: f64| cur.min(obj)));
                    }
                }
            }
            // next lexicographic combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if combo[i] + 1 <= n - (m - i) {
                    combo[i] += 1;
                    for k in (i + 1)..m {
                        combo[k] = combo[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_basis_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let mut solved = 0;
        while solved < 50 {
            let m = rng.gen_range(2..=3usize);
            let n = rng.gen_range(m + 1..=6);
            let a: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> =
                a.iter().map(|row| row.iter().zip(&x0).map(|(r, x)| r * x).sum()).collect();
            // nonnegative costs keep the minimum finite
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let Some(oracle) = basis_enumeration_optimum(&a, &b, &c) else {
                continue;
            };
            let lp = LpProblem {
                objective: c.clone(),
                eq_matrix: a.clone(),
                eq_rhs: b.clone(),
                var_lower: vec![0.0; n],
                var_upper: vec![f64::INFINITY; n],
            };
            let (_, obj) = optimal(&lp);
            assert!(
                (obj - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
                "simplex {obj} vs oracle {oracle}"
            );
            solved += 1;
        }
    }
}
