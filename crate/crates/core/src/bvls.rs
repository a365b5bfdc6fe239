//! Bounded-variable least squares by an active-set method.
//!
//! One active-set engine drives two objective forms: the rectangular
//! least-squares form `||Ax - b||^2` (used when the residual must be accurate
//! near zero) and the assembled quadratic form `x'Mx + 2q'x + c` (used by the
//! design search, where `M, q, c` are maintained incrementally). Free
//! subproblems are re-solved from scratch each iteration through a
//! rank-revealing SVD, which keeps degenerate designs and rank-deficient
//! systems on the ordinary path.

use nalgebra::{DMatrix, DVector};

use crate::linearize::QuadraticForm;
use crate::{Error, Result};

/// Per-coordinate constraint status at the solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundStatus {
    Free,
    AtLower,
    AtUpper,
}

/// Solution of a bounded-variable least-squares problem.
#[derive(Clone, Debug)]
pub struct BvlsSolution {
    pub x: DVector<f64>,
    pub residual_norm_sq: f64,
    pub active_set: Vec<BoundStatus>,
    pub iterations: usize,
}

/// A convex quadratic objective the active-set engine can minimize over a box.
pub(crate) trait QuadraticObjective {
    fn dim(&self) -> usize;
    /// Minimizes over the free coordinates with bound coordinates fixed at
    /// their values in `x`; returns the optimal free-coordinate values in the
    /// order of `free`.
    fn solve_free(&self, free: &[usize], x: &DVector<f64>) -> DVector<f64>;
    /// Half-gradient of the objective (`A'(Ax-b)` resp. `Mx + q`).
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn objective(&self, x: &DVector<f64>) -> f64;
    /// Scale entering the Kuhn-Tucker tolerance.
    fn gradient_scale(&self) -> f64;
}

fn svd_min_norm_solve(mat: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax > 0.0 { smax * 1e-12 } else { f64::INFINITY };
    svd.solve(rhs, eps).expect("svd.solve with computed u/v always succeeds")
}

/// `min ||Ax - b||^2` over a box.
pub(crate) struct LeastSquaresObjective<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a DVector<f64>,
}

impl QuadraticObjective for LeastSquaresObjective<'_> {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn solve_free(&self, free: &[usize], x: &DVector<f64>) -> DVector<f64> {
        // rhs = b - A x with free coordinates masked to zero
        let mut masked = x.clone();
        for &j in free {
            masked[j] = 0.0;
        }
        let rhs = self.b - self.a * masked;
        let mut af = DMatrix::zeros(self.a.nrows(), free.len());
        for (fi, &j) in free.iter().enumerate() {
            af.set_column(fi, &self.a.column(j));
        }
        svd_min_norm_solve(af, &rhs)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (self.a * x - self.b)
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        (self.a * x - self.b).norm_squared()
    }

    fn gradient_scale(&self) -> f64 {
        (self.a.transpose() * self.b).amax()
    }
}

/// `min x'Mx + 2q'x + c` over a box, with `u = x` measured from the box center
/// chosen by the caller.
pub(crate) struct GramObjective<'a> {
    pub form: &'a QuadraticForm,
}

impl QuadraticObjective for GramObjective<'_> {
    fn dim(&self) -> usize {
        self.form.b.len()
    }

    fn solve_free(&self, free: &[usize], x: &DVector<f64>) -> DVector<f64> {
        let mut masked = x.clone();
        for &j in free {
            masked[j] = 0.0;
        }
        let coupled = &self.form.m * masked;
        let mut mff = DMatrix::zeros(free.len(), free.len());
        let mut rhs = DVector::zeros(free.len());
        for (fi, &j) in free.iter().enumerate() {
            for (fk, &l) in free.iter().enumerate() {
                mff[(fi, fk)] = self.form.m[(j, l)];
            }
            rhs[fi] = -(self.form.b[j] + coupled[j]);
        }
        svd_min_norm_solve(mff, &rhs)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.form.m * x + &self.form.b
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.form.value_at(x)
    }

    fn gradient_scale(&self) -> f64 {
        self.form.b.amax()
    }
}

fn check_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<()> {
    for j in 0..lower.len() {
        if lower[j].is_nan() || upper[j].is_nan() || lower[j] > upper[j] {
            return Err(Error::InvalidArgument(format!(
                "invalid bounds at coordinate {j}: [{}, {}]",
                lower[j], upper[j]
            )));
        }
    }
    Ok(())
}

pub(crate) fn active_set_optimize<O: QuadraticObjective>(
    obj: &O,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<BoundStatus>, usize)> {
    let p = obj.dim();
    if lower.len() != p || upper.len() != p {
        return Err(Error::InvalidArgument("bound dimension mismatch".into()));
    }
    check_bounds(lower, upper)?;

    let mut status = Vec::with_capacity(p);
    let mut x = DVector::zeros(p);
    for j in 0..p {
        if lower[j].is_finite() {
            status.push(BoundStatus::AtLower);
            x[j] = lower[j];
        } else if upper[j].is_finite() {
            status.push(BoundStatus::AtUpper);
            x[j] = upper[j];
        } else {
            status.push(BoundStatus::Free);
            x[j] = 0.0;
        }
    }

    let ktol = 1e-10 * (1.0 + obj.gradient_scale());
    let max_iter = (10 * p).max(30);
    let mut banned = vec![false; p];
    let mut just_freed: Option<usize> = None;
    let mut iterations = 0;

    loop {
        iterations += 1;
        if iterations > max_iter {
            let g = obj.gradient(&x);
            return Err(Error::SolverFailure(format!(
                "bounded least squares did not converge in {max_iter} iterations \
                 (p = {p}, |grad|_inf = {:.3e}, tol = {:.3e})",
                g.amax(),
                ktol
            )));
        }

        let free: Vec<usize> =
            (0..p).filter(|&j| matches!(status[j], BoundStatus::Free)).collect();
        let z = if free.is_empty() { DVector::zeros(0) } else { obj.solve_free(&free, &x) };

        let infeasible = free
            .iter()
            .enumerate()
            .any(|(fi, &j)| z[fi] < lower[j] || z[fi] > upper[j]);

        if !infeasible {
            for (fi, &j) in free.iter().enumerate() {
                x[j] = z[fi];
            }
            // Kuhn-Tucker check on the bound coordinates; free the worst violator.
            let g = obj.gradient(&x);
            let mut best: Option<(f64, usize)> = None;
            for j in 0..p {
                if banned[j] || lower[j] == upper[j] {
                    continue;
                }
                let viol = match status[j] {
                    BoundStatus::AtLower => -g[j],
                    BoundStatus::AtUpper => g[j],
                    BoundStatus::Free => continue,
                };
                if viol > ktol && best.map_or(true, |(v, _)| viol > v) {
                    best = Some((viol, j));
                }
            }
            just_freed = match best {
                None => return Ok((x, status, iterations)),
                Some((_, j)) => {
                    status[j] = BoundStatus::Free;
                    Some(j)
                }
            };
        } else {
            // Step from x toward z until the first free coordinate hits a bound.
            let mut alpha = 1.0f64;
            for (fi, &j) in free.iter().enumerate() {
                let d = z[fi] - x[j];
                if d < 0.0 && z[fi] < lower[j] {
                    alpha = alpha.min((lower[j] - x[j]) / d);
                } else if d > 0.0 && z[fi] > upper[j] {
                    alpha = alpha.min((upper[j] - x[j]) / d);
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            let stalled = alpha < 1e-14;
            for (fi, &j) in free.iter().enumerate() {
                x[j] += alpha * (z[fi] - x[j]);
                if x[j] <= lower[j] {
                    x[j] = lower[j];
                    status[j] = BoundStatus::AtLower;
                    if stalled && just_freed == Some(j) {
                        banned[j] = true; // float-degenerate free/bind cycle
                    }
                } else if x[j] >= upper[j] {
                    x[j] = upper[j];
                    status[j] = BoundStatus::AtUpper;
                    if stalled && just_freed == Some(j) {
                        banned[j] = true;
                    }
                }
            }
            just_freed = None;
        }
    }
}

/// Solves `min ||Ax - b||^2` subject to `lower <= x <= upper` (infinite bounds
/// admitted). The reported residual is computed directly from the returned
/// point, so values near zero stay accurate.
pub fn bvls(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<BvlsSolution> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "row mismatch: A has {} rows, b has {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() != lower.len() || a.ncols() != upper.len() {
        return Err(Error::InvalidArgument(format!(
            "column mismatch: A has {} columns, bounds have {}/{}",
            a.ncols(),
            lower.len(),
            upper.len()
        )));
    }
    let obj = LeastSquaresObjective { a, b };
    let (x, active_set, iterations) = active_set_optimize(&obj, lower, upper)?;
    let residual_norm_sq = (a * &x - b).norm_squared();
    Ok(BvlsSolution { x, residual_norm_sq, active_set, iterations })
}

/// Minimizes the assembled quadratic form over `lower <= u <= upper` and
/// returns the (clamped nonnegative) optimal value. Hot path of the search.
pub(crate) fn minimize_quadratic_form(
    form: &QuadraticForm,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<f64> {
    let obj = GramObjective { form };
    let (u, _, _) = active_set_optimize(&obj, lower, upper)?;
    Ok(obj.objective(&u).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn interior_optimum() {
        let a = DMatrix::identity(2, 2);
        let b = vecd(&[0.5, 0.5]);
        let sol = bvls(&a, &b, &vecd(&[0.0, 0.0]), &vecd(&[1.0, 1.0])).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-12);
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
        assert!(sol.residual_norm_sq < 1e-20);
    }

    #[test]
    fn clamp_at_upper_bound() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = vecd(&[2.0]);
        let sol = bvls(&a, &b, &vecd(&[0.0]), &vecd(&[1.0])).unwrap();
        assert_eq!(sol.x[0], 1.0);
        assert!((sol.residual_norm_sq - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_set[0], BoundStatus::AtUpper);
    }

    #[test]
    fn infinite_bounds_match_unconstrained_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let lo = vecd(&[f64::NEG_INFINITY; 3]);
            let hi = vecd(&[f64::INFINITY; 3]);
            let sol = bvls(&a, &b, &lo, &hi).unwrap();
            let svd = a.clone().svd(true, true);
            let x = svd.solve(&b, 1e-12).unwrap();
            let direct = (&a * x - &b).norm_squared();
            assert!((sol.residual_norm_sq - direct).abs() < 1e-10 * (1.0 + direct));
        }
    }

    /// Brute-force oracle: enumerate every lower/upper/free pattern, solve the
    /// equality-restricted least squares for each, keep the best feasible.
    fn brute_force_box_lsq(
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        lower: &DVector<f64>,
        upper: &DVector<f64>,
    ) -> f64 {
        let p = a.ncols();
        let mut best = f64::INFINITY;
        let patterns = 3usize.pow(p as u32);
        for code in 0..patterns {
            let mut c = code;
            let mut x = DVector::zeros(p);
            let mut free = Vec::new();
            let mut ok = true;
            for j in 0..p {
                match c % 3 {
                    0 => {
                        if !lower[j].is_finite() {
                            ok = false;
                        }
                        x[j] = lower[j];
                    }
                    1 => {
                        if !upper[j].is_finite() {
                            ok = false;
                        }
                        x[j] = upper[j];
                    }
                    _ => free.push(j),
                }
                c /= 3;
            }
            if !ok {
                continue;
            }
            if !free.is_empty() {
                let obj = LeastSquaresObjective { a, b };
                let z = obj.solve_free(&free, &x);
                let mut feasible = true;
                for (fi, &j) in free.iter().enumerate() {
                    if z[fi] < lower[j] - 1e-9 || z[fi] > upper[j] + 1e-9 {
                        feasible = false;
                        break;
                    }
                    x[j] = z[fi].clamp(lower[j], upper[j]);
                }
                if !feasible {
                    continue;
                }
            }
            best = best.min((a * &x - b).norm_squared());
        }
        best
    }

    #[test]
    fn matches_active_set_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..60 {
            let a = DMatrix::from_fn(6, 4, |_, _| rng.gen_range(-2.0..2.0));
            let b = DVector::from_fn(6, |_, _| rng.gen_range(-2.0..2.0));
            let lo = vecd(&[-1.0; 4]);
            let hi = vecd(&[1.0; 4]);
            let sol = bvls(&a, &b, &lo, &hi).unwrap();
            let oracle = brute_force_box_lsq(&a, &b, &lo, &hi);
            assert!(
                (sol.residual_norm_sq - oracle).abs() <= 1e-8 * (1.0 + oracle),
                "solver {} vs oracle {}",
                sol.residual_norm_sq,
                oracle
            );
        }
    }

    #[test]
    fn kuhn_tucker_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = DMatrix::from_fn(8, 5, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(8, |_, _| rng.gen_range(-2.0..2.0));
            let lo = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..0.0));
            let hi = DVector::from_fn(5, |_, _| rng.gen_range(0.0..1.0));
            let sol = bvls(&a, &b, &lo, &hi).unwrap();
            let g = a.transpose() * (&a * &sol.x - &b);
            let scale = 1e-8 * (1.0 + (a.transpose() * &b).amax());
            for j in 0..5 {
                match sol.active_set[j] {
                    BoundStatus::Free => assert!(g[j].abs() <= scale, "free grad {}", g[j]),
                    BoundStatus::AtLower => {
                        assert_eq!(sol.x[j], lo[j]);
                        assert!(g[j] >= -scale, "lower grad {}", g[j]);
                    }
                    BoundStatus::AtUpper => {
                        assert_eq!(sol.x[j], hi[j]);
                        assert!(g[j] <= scale, "upper grad {}", g[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn optimum_not_beaten_by_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let a = DMatrix::from_fn(7, 4, |_, _| rng.gen_range(-1.5..1.5));
        let b = DVector::from_fn(7, |_, _| rng.gen_range(-1.5..1.5));
        let lo = vecd(&[-0.7, -0.2, -1.0, 0.0]);
        let hi = vecd(&[0.3, 0.9, 0.1, 2.0]);
        let sol = bvls(&a, &b, &lo, &hi).unwrap();
        for _ in 0..1000 {
            let x = DVector::from_fn(4, |j, _| rng.gen_range(lo[j]..=hi[j]));
            let v = (&a * x - &b).norm_squared();
            assert!(sol.residual_norm_sq <= v + 1e-10 * (1.0 + v));
        }
    }

    #[test]
    fn rejects_bad_bounds_and_dims() {
        let a = DMatrix::identity(2, 2);
        let b = vecd(&[1.0, 1.0]);
        assert!(bvls(&a, &b, &vecd(&[1.0, 0.0]), &vecd(&[0.0, 1.0])).is_err());
        assert!(bvls(&a, &b, &vecd(&[0.0]), &vecd(&[1.0])).is_err());
        assert!(bvls(&a, &vecd(&[1.0]), &vecd(&[0.0, 0.0]), &vecd(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn pinned_coordinates_stay_pinned() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = vecd(&[5.0, 0.25]);
        let lo = vecd(&[2.0, 0.0]);
        let hi = vecd(&[2.0, 1.0]);
        let sol = bvls(&a, &b, &lo, &hi).unwrap();
        assert_eq!(sol.x[0], 2.0);
        assert!((sol.x[1] - 0.25).abs() < 1e-12);
        assert!((sol.residual_norm_sq - 9.0).abs() < 1e-10);
    }
}
