//! Evaluation of the linearized distance criterion `delta_r` for fixed designs.

use nalgebra::{DMatrix, DVector};

use crate::bvls::{bvls, minimize_quadratic_form};
use crate::linearize::{linearize, LinearizedPair, LinearizedSpace};
use crate::model::{DiscriminationProblem, ExactDesign};
use crate::{Error, Result};

/// The dilated cuboid confidence set of radius `r` around the stacked nominal
/// vector: componentwise `theta_nom +- r * halfwidth` (infinite for `r = inf`).
#[derive(Clone, Debug)]
pub struct ConfidenceBox {
    pub r: f64,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl ConfidenceBox {
    pub fn from_stacked(theta_nom: &DVector<f64>, halfwidth: &DVector<f64>, r: f64) -> Result<Self> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidArgument(format!("confidence radius must be >= 0, got {r}")));
        }
        let p = theta_nom.len();
        let mut lower = DVector::zeros(p);
        let mut upper = DVector::zeros(p);
        for j in 0..p {
            if r.is_infinite() {
                lower[j] = f64::NEG_INFINITY;
                upper[j] = f64::INFINITY;
            } else {
                lower[j] = theta_nom[j] - r * halfwidth[j];
                upper[j] = theta_nom[j] + r * halfwidth[j];
            }
        }
        Ok(Self { r, lower, upper })
    }

    pub fn from_problem(problem: &DiscriminationProblem, r: f64) -> Result<Self> {
        Self::from_stacked(
            &DVector::from_vec(problem.theta_nom_stacked()),
            &DVector::from_vec(problem.halfwidth_stacked()),
            r,
        )
    }

    /// The box in offset coordinates `u = theta - theta_nom`.
    pub(crate) fn centered(halfwidth: &DVector<f64>, r: f64) -> (DVector<f64>, DVector<f64>) {
        let p = halfwidth.len();
        if r.is_infinite() {
            (
                DVector::from_element(p, f64::NEG_INFINITY),
                DVector::from_element(p, f64::INFINITY),
            )
        } else {
            (halfwidth * -r, halfwidth * r)
        }
    }
}

/// The linearized distance at fixed parameters: the Euclidean norm of
/// `a0 + F0 theta0 - (a1 + F1 theta1)`.
pub fn delta_given_theta(lp: &LinearizedPair, theta0: &[f64], theta1: &[f64]) -> Result<f64> {
    let m = lp.param_dim();
    if theta0.len() != m || theta1.len() != m {
        return Err(Error::InvalidArgument(format!(
            "parameter dimension mismatch: expected {m}, got {}/{}",
            theta0.len(),
            theta1.len()
        )));
    }
    let t0 = DVector::from_column_slice(theta0);
    let t1 = DVector::from_column_slice(theta1);
    let resid = &lp.a0 + &lp.f0 * t0 - (&lp.a1 + &lp.f1 * t1);
    Ok(resid.norm())
}

/// `delta_r` of a design: the infimum of the linearized distance over the
/// dilated confidence cuboids.
///
/// `r = 0` evaluates at the nominal parameters; `0 < r <= inf` solves the
/// box-restricted least-squares problem in the response-difference model.
pub fn delta_r(problem: &DiscriminationProblem, design: &ExactDesign, r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidArgument(format!("confidence radius must be >= 0, got {r}")));
    }
    if r == 0.0 {
        let mut ssq = 0.0;
        for (idx, c) in design.counts() {
            let d = problem.delta_eta(idx)?;
            ssq += c as f64 * d * d;
        }
        return Ok(ssq.sqrt());
    }
    let lp = linearize(problem, design)?;
    let a = lp.difference_matrix();
    let z = lp.difference_rhs();
    let cb = ConfidenceBox::from_problem(problem, r)?;
    let sol = bvls(&a, &z, &cb.lower, &cb.upper)?;
    Ok(sol.residual_norm_sq.sqrt())
}

/// Unrestricted least-squares distance in the response-difference model,
/// computed in closed form through a rank-revealing eigendecomposition of the
/// normal equations (minimum-norm under rank deficiency). Cross-checks the
/// `r = inf` path of [`delta_r`].
pub fn delta_unrestricted(lp: &LinearizedPair) -> f64 {
    let a = lp.difference_matrix();
    let z = lp.difference_rhs();
    let gram = a.transpose() * &a;
    let rhs = a.transpose() * &z;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let cut = if lmax > 0.0 { lmax * 1e-13 } else { f64::INFINITY };
    // theta = V diag(1/lambda on the retained spectrum) V' rhs
    let vt_rhs = eig.eigenvectors.transpose() * rhs;
    let mut scaled = vt_rhs;
    for j in 0..scaled.len() {
        scaled[j] = if eig.eigenvalues[j] > cut { scaled[j] / eig.eigenvalues[j] } else { 0.0 };
    }
    let theta = &eig.eigenvectors * scaled;
    (a * theta - z).norm()
}

/// Criterion evaluator bound to one problem: pre-computes the per-point
/// linearization once and evaluates `delta_r` of candidate count vectors via
/// the assembled quadratic form. The design-search hot path.
#[derive(Clone, Debug)]
pub struct DeltaEvaluator {
    tables: LinearizedSpace,
}

impl DeltaEvaluator {
    pub fn new(problem: &DiscriminationProblem) -> Result<Self> {
        Ok(Self { tables: LinearizedSpace::build(problem)? })
    }

    pub fn tables(&self) -> &LinearizedSpace {
        &self.tables
    }

    pub fn space_len(&self) -> usize {
        self.tables.len()
    }

    /// Offset-coordinate box for radius `r`.
    pub fn bounds(&self, r: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::InvalidArgument(format!("confidence radius must be >= 0, got {r}")));
        }
        Ok(ConfidenceBox::centered(&self.tables.halfwidth, r))
    }

    /// `delta_r` value from an assembled quadratic form.
    pub fn value_of_form(
        &self,
        form: &crate::linearize::QuadraticForm,
        bounds: &(DVector<f64>, DVector<f64>),
        r: f64,
    ) -> Result<f64> {
        if r == 0.0 {
            return Ok(form.c.max(0.0).sqrt());
        }
        Ok(minimize_quadratic_form(form, &bounds.0, &bounds.1)?.sqrt())
    }

    /// `delta_r` of a dense count vector.
    pub fn value_of_counts(&self, counts: &[usize], r: f64) -> Result<f64> {
        let form = self.tables.quadratic_form_from_counts(counts);
        let bounds = self.bounds(r)?;
        self.value_of_form(&form, &bounds, r)
    }

    /// `delta_r` of an exact design via the quadratic-form route.
    pub fn value_of_design(&self, design: &ExactDesign, r: f64) -> Result<f64> {
        let form = self.tables.quadratic_form(design);
        let bounds = self.bounds(r)?;
        self.value_of_form(&form, &bounds, r)
    }
}

/// Response-difference system of a design (`A = [-F0, F1]`, `z = a0 - a1`),
/// exposed for solvers that need the rectangular form.
pub fn difference_system(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let lp = linearize(problem, design)?;
    Ok((lp.difference_matrix(), lp.difference_rhs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_pair, motivating_problem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(
        p: &DiscriminationProblem,
        rng: &mut ChaCha8Rng,
        max_support: usize,
        max_count: usize,
    ) -> ExactDesign {
        let k = rng.gen_range(1..=max_support);
        let counts: Vec<(usize, usize)> = (0..k)
            .map(|_| (rng.gen_range(0..p.space().len()), rng.gen_range(1..=max_count)))
            .collect();
        ExactDesign::from_counts(p.space(), counts).unwrap()
    }

    #[test]
    fn delta_at_nominal_is_root_sum_of_squares() {
        let p = motivating_problem().unwrap();
        let design = ExactDesign::singleton(p.space(), 100, 6).unwrap();
        let lp = linearize(&p, &design).unwrap();
        let v = delta_given_theta(&lp, p.theta_nom(0), p.theta_nom(1)).unwrap();
        assert!((v - 4.782_610_2).abs() < 1e-6);
        assert!((v - delta_r(&p, &design, 0.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_difference_support_gives_zero() {
        // Surfaces coincide at x = 1; a design supported there has delta = 0.
        let p = motivating_problem().unwrap();
        let design = ExactDesign::singleton(p.space(), 0, 3).unwrap();
        assert!(delta_r(&p, &design, 0.0).unwrap() < 1e-12);
        assert!(delta_r(&p, &design, 0.5).unwrap() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = motivating_problem().unwrap();
        let design = ExactDesign::singleton(p.space(), 10, 2).unwrap();
        let lp = linearize(&p, &design).unwrap();
        assert!(delta_given_theta(&lp, &[1.0, 2.0], &[1.0]).is_err());
        assert!(delta_r(&p, &design, -0.5).is_err());
    }

    #[test]
    fn exactly_solvable_system_has_zero_distance() {
        // n = 2m with a full-rank difference matrix: residual vanishes at r = inf.
        let p = motivating_problem().unwrap();
        let design = ExactDesign::from_counts(p.space(), [(20, 1), (90, 1)]).unwrap();
        let lp = linearize(&p, &design).unwrap();
        assert!(delta_unrestricted(&lp) < 1e-10);
        assert!(delta_r(&p, &design, f64::INFINITY).unwrap() < 1e-10);
    }

    #[test]
    fn unrestricted_matches_infinite_radius_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for name in ["motivating", "enzyme"] {
            let p = builtin_pair(name).unwrap();
            for _ in 0..15 {
                let design = random_design(&p, &mut rng, 8, 3);
                let lp = linearize(&p, &design).unwrap();
                let a = delta_unrestricted(&lp);
                let b = delta_r(&p, &design, f64::INFINITY).unwrap();
                assert!((a - b).abs() <= 1e-10 * (1.0 + a), "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn monotone_and_convex_in_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = builtin_pair("motivating").unwrap();
        for _ in 0..5 {
            let design = random_design(&p, &mut rng, 5, 3);
            let rs: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
            let vals: Vec<f64> =
                rs.iter().map(|&r| delta_r(&p, &design, r).unwrap()).collect();
            let scale = 1.0 + vals[0] * vals[0];
            for w in vals.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * scale, "not non-increasing: {w:?}");
            }
            // midpoint convexity of r -> delta_r^2 on the equispaced grid
            for i in 1..(vals.len() - 1) {
                let lhs = vals[i] * vals[i];
                let rhs = 0.5 * (vals[i - 1] * vals[i - 1] + vals[i + 1] * vals[i + 1]);
                assert!(lhs <= rhs + 1e-8 * scale, "not convex at {i}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn squared_value_is_positively_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for name in ["motivating", "enzyme"] {
            let p = builtin_pair(name).unwrap();
            for _ in 0..10 {
                let design = random_design(&p, &mut rng, 4, 2);
                let s = rng.gen_range(2..=5);
                let r = rng.gen_range(0.0..2.0);
                let v1 = delta_r(&p, &design, r).unwrap();
                let vs = delta_r(&p, &design.replicate(s).unwrap(), r).unwrap();
                let lhs = vs * vs;
                let rhs = s as f64 * v1 * v1;
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs), "{name}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn squared_value_is_superadditive_on_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let p = builtin_pair("enzyme").unwrap();
        for _ in 0..10 {
            let d1 = random_design(&p, &mut rng, 4, 2);
            let d2 = random_design(&p, &mut rng, 4, 2);
            let r = rng.gen_range(0.1..3.0);
            let v1 = delta_r(&p, &d1, r).unwrap();
            let v2 = delta_r(&p, &d2, r).unwrap();
            let vc = delta_r(&p, &d1.concat(&d2), r).unwrap();
            assert!(vc * vc >= v1 * v1 + v2 * v2 - 1e-10);
        }
    }

    #[test]
    fn gram_route_agrees_with_direct_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for name in ["motivating", "enzyme"] {
            let p = builtin_pair(name).unwrap();
            let eval = DeltaEvaluator::new(&p).unwrap();
            for _ in 0..10 {
                let design = random_design(&p, &mut rng, 5, 3);
                for r in [0.0, 0.3, 1.0, 5.0, f64::INFINITY] {
                    let direct = delta_r(&p, &design, r).unwrap();
                    let gram = eval.value_of_design(&design, r).unwrap();
                    assert!(
                        (direct - gram).abs() <= 1e-7 * (1.0 + direct) + 1e-7,
                        "{name} r={r}: direct {direct} vs gram {gram}"
                    );
                }
            }
        }
    }
}
