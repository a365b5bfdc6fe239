//! Linearization of a model pair at the nominal parameters, and the quadratic
//! form the criterion takes in the stacked parameter vector.

use nalgebra::{DMatrix, DVector};

use crate::model::{DesignSpace, DiscriminationProblem, ExactDesign};
use crate::Result;

/// The linearized pair for a fixed design: mean surfaces approximated by
/// `F_k theta_k + a_k` around the nominal parameters.
#[derive(Clone, Debug)]
pub struct LinearizedPair {
    /// `n x m` gradient matrix of model 0; row i is the gradient at trial i.
    pub f0: DMatrix<f64>,
    /// `n x m` gradient matrix of model 1.
    pub f1: DMatrix<f64>,
    /// Offset of model 0: nominal means minus `F_0 theta0_nom`.
    pub a0: DVector<f64>,
    /// Offset of model 1.
    pub a1: DVector<f64>,
    /// Stacked nominal vector `(theta0_nom, theta1_nom)` of length `2m`.
    pub theta_nom: DVector<f64>,
}

impl LinearizedPair {
    /// Number of trials.
    pub fn n(&self) -> usize {
        self.f0.nrows()
    }

    /// Parameter dimension of each model.
    pub fn param_dim(&self) -> usize {
        self.f0.ncols()
    }

    /// The response-difference regressor matrix `[-F0, F1]` (n x 2m).
    pub fn difference_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.param_dim());
        let mut a = DMatrix::zeros(n, 2 * m);
        a.view_mut((0, 0), (n, m)).copy_from(&(-&self.f0));
        a.view_mut((0, m), (n, m)).copy_from(&self.f1);
        a
    }

    /// The artificial observations `a0 - a1` of the response-difference model.
    pub fn difference_rhs(&self) -> DVector<f64> {
        &self.a0 - &self.a1
    }
}

/// Coefficients of the criterion as a quadratic in `u = theta - theta_nom`:
/// `delta^2 = u' M u + 2 b' u + c`.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn zeros(p: usize) -> Self {
        Self { m: DMatrix::zeros(p, p), b: DVector::zeros(p), c: 0.0 }
    }

    /// Evaluates the quadratic at the offset `u = theta - theta_nom`.
    pub fn value_at(&self, u: &DVector<f64>) -> f64 {
        (u.transpose() * &self.m * u)[(0, 0)] + 2.0 * self.b.dot(u) + self.c
    }

    /// Componentwise sum (designs add as counting measures).
    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m, b: &self.b + &other.b, c: self.c + other.c }
    }
}

/// Per-point linearization tables over a whole design space: the stacked
/// gradient `(grad eta0, -grad eta1)` and the nominal mean difference at every
/// candidate point. Criterion evaluation and design search are assembled from
/// these without re-evaluating the models.
#[derive(Clone, Debug)]
pub struct LinearizedSpace {
    /// Stacked gradient per space point, each of length `2m`.
    pub gradients: Vec<DVector<f64>>,
    /// Nominal mean difference per space point.
    pub delta_eta: Vec<f64>,
    /// Stacked nominal vector, length `2m`.
    pub theta_nom: DVector<f64>,
    /// Stacked unit half-widths, length `2m`.
    pub halfwidth: DVector<f64>,
}

impl LinearizedSpace {
    /// Evaluates both models' gradients and mean differences on every point of
    /// the problem's design space.
    pub fn build(problem: &DiscriminationProblem) -> Result<Self> {
        let space = problem.space();
        let m = problem.param_dim();
        let mut gradients = Vec::with_capacity(space.len());
        let mut delta_eta = Vec::with_capacity(space.len());
        for i in 0..space.len() {
            let x = space.point(i);
            let g0 = problem.model0().gradient(problem.theta_nom(0), x)?;
            let g1 = problem.model1().gradient(problem.theta_nom(1), x)?;
            let mut g = DVector::zeros(2 * m);
            for j in 0..m {
                g[j] = g0[j];
                g[m + j] = -g1[j];
            }
            gradients.push(g);
            delta_eta.push(problem.delta_eta(i)?);
        }
        Ok(Self {
            gradients,
            delta_eta,
            theta_nom: DVector::from_vec(problem.theta_nom_stacked()),
            halfwidth: DVector::from_vec(problem.halfwidth_stacked()),
        })
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }

    /// Quadratic-form contribution of a single trial at point `idx`.
    pub fn accumulate_point(&self, form: &mut QuadraticForm, idx: usize, scale: f64) {
        let g = &self.gradients[idx];
        let de = self.delta_eta[idx];
        form.m.ger(scale, g, g, 1.0); // rank-one update M += scale * g g'
        form.b.axpy(scale * de, g, 1.0);
        form.c += scale * de * de;
    }

    /// Quadratic form of an exact design (finite sum against the counting measure).
    pub fn quadratic_form(&self, design: &ExactDesign) -> QuadraticForm {
        let p = self.theta_nom.len();
        let mut form = QuadraticForm::zeros(p);
        for (idx, c) in design.counts() {
            self.accumulate_point(&mut form, idx, c as f64);
        }
        form
    }

    /// Quadratic form from a dense count vector (used by the exchange search).
    pub fn quadratic_form_from_counts(&self, counts: &[usize]) -> QuadraticForm {
        let p = self.theta_nom.len();
        let mut form = QuadraticForm::zeros(p);
        for (idx, &c) in counts.iter().enumerate() {
            if c > 0 {
                self.accumulate_point(&mut form, idx, c as f64);
            }
        }
        form
    }

    /// Response-difference system `(A, z)` of a design: `A = [-F0, F1]` rows
    /// expanded per trial and `z = a0 - a1`.
    pub fn difference_system(&self, design: &ExactDesign) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.theta_nom.len();
        let n = design.n();
        let mut a = DMatrix::zeros(n, p);
        let mut z = DVector::zeros(n);
        let mut row = 0;
        for (idx, c) in design.counts() {
            let g = &self.gradients[idx];
            // z_i = (a0 - a1)_i = delta_eta_i - g_i' theta_nom
            let zi = self.delta_eta[idx] - g.dot(&self.theta_nom);
            for _ in 0..c {
                for j in 0..p {
                    a[(row, j)] = -g[j];
                }
                z[row] = zi;
                row += 1;
            }
        }
        (a, z)
    }
}

/// Builds the linearized pair `(F0, a0, F1, a1)` of a design.
pub fn linearize(problem: &DiscriminationProblem, design: &ExactDesign) -> Result<LinearizedPair> {
    linearize_on(problem, problem.space(), design)
}

/// As [`linearize`], over an explicit space (used for all-points designs on
/// alternative grids).
pub fn linearize_on(
    problem: &DiscriminationProblem,
    space: &DesignSpace,
    design: &ExactDesign,
) -> Result<LinearizedPair> {
    let m = problem.param_dim();
    let n = design.n();
    let mut f0 = DMatrix::zeros(n, m);
    let mut f1 = DMatrix::zeros(n, m);
    let mut eta0 = DVector::zeros(n);
    let mut eta1 = DVector::zeros(n);
    let mut row = 0;
    for (idx, c) in design.counts() {
        let x = space.point(idx);
        let g0 = problem.model0().gradient(problem.theta_nom(0), x)?;
        let g1 = problem.model1().gradient(problem.theta_nom(1), x)?;
        let e0 = problem.model0().mean(problem.theta_nom(0), x)?;
        let e1 = problem.model1().mean(problem.theta_nom(1), x)?;
        for _ in 0..c {
            for j in 0..m {
                f0[(row, j)] = g0[j];
                f1[(row, j)] = g1[j];
            }
            eta0[row] = e0;
            eta1[row] = e1;
            row += 1;
        }
    }
    let t0 = DVector::from_column_slice(problem.theta_nom(0));
    let t1 = DVector::from_column_slice(problem.theta_nom(1));
    let a0 = &eta0 - &f0 * &t0;
    let a1 = &eta1 - &f1 * &t1;
    let theta_nom = DVector::from_vec(problem.theta_nom_stacked());
    Ok(LinearizedPair { f0, f1, a0, a1, theta_nom })
}

/// Assembles the quadratic-form components `M, b, c` of a design.
pub fn quadratic_components(
    problem: &DiscriminationProblem,
    design: &ExactDesign,
) -> Result<QuadraticForm> {
    Ok(LinearizedSpace::build(problem)?.quadratic_form(design))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_pair, motivating_problem, DesignSpace, DiscriminationProblem};
    use crate::model::{exponential_model, linear_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_point_problem(x: f64) -> DiscriminationProblem {
        DiscriminationProblem::new(
            linear_model(),
            exponential_model(),
            DesignSpace::line(&[x]).unwrap(),
            vec![std::f64::consts::E],
            vec![1.0],
            vec![1.0],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn linear_model_offset_vanishes() {
        let p = motivating_problem().unwrap();
        let design = ExactDesign::from_counts(p.space(), [(0, 2), (50, 1), (100, 3)]).unwrap();
        let lp = linearize(&p, &design).unwrap();
        assert!(lp.a0.amax() < 1e-14, "a0 = {:?}", lp.a0);
    }

    #[test]
    fn exponential_single_point_hand_values() {
        let e2 = (2.0f64).exp();
        let p = single_point_problem(2.0);
        let design = ExactDesign::singleton(p.space(), 0, 1).unwrap();
        let lp = linearize(&p, &design).unwrap();
        // F1 = x e^{x theta} = 2 e^2 ; a1 = e^2 - 2 e^2 = -e^2
        assert!((lp.f1[(0, 0)] - 2.0 * e2).abs() < 1e-12);
        assert!((lp.a1[0] + e2).abs() < 1e-12);
    }

    #[test]
    fn replicated_points_give_identical_rows() {
        let p = motivating_problem().unwrap();
        let design = ExactDesign::from_counts(p.space(), [(30, 2)]).unwrap();
        let lp = linearize(&p, &design).unwrap();
        assert_eq!(lp.f0.row(0), lp.f0.row(1));
        assert_eq!(lp.f1.row(0), lp.f1.row(1));
        assert_eq!(lp.a0[0], lp.a0[1]);
    }

    #[test]
    fn c_equals_sum_of_squared_differences() {
        let p = motivating_problem().unwrap();
        let design = ExactDesign::singleton(p.space(), 100, 6).unwrap(); // 6 trials at x = 2
        let qf = quadratic_components(&p, &design).unwrap();
        let e = std::f64::consts::E;
        let d = 2.0 * e - e * e;
        assert!((qf.c - 6.0 * d * d).abs() < 1e-10);
        assert!((qf.c - 22.873_360_4).abs() < 1e-6);
    }

    #[test]
    fn components_scale_with_replication() {
        let p = builtin_pair("enzyme").unwrap();
        let design = ExactDesign::from_counts(p.space(), [(100, 1), (700, 1)]).unwrap();
        let qf1 = quadratic_components(&p, &design).unwrap();
        let qf3 = quadratic_components(&p, &design.replicate(3).unwrap()).unwrap();
        assert!(((&qf1.m * 3.0) - &qf3.m).amax() < 1e-12 * qf3.m.amax().max(1.0));
        assert!(((&qf1.b * 3.0) - &qf3.b).amax() < 1e-12 * qf3.b.amax().max(1.0));
        assert!((qf1.c * 3.0 - qf3.c).abs() < 1e-12 * qf3.c.max(1.0));
    }

    #[test]
    fn zero_mean_difference_kills_b_and_c() {
        // The motivating surfaces coincide at x = 1, so a design supported
        // there behaves like an identical pair: b = 0, c = 0.
        let p = motivating_problem().unwrap();
        let design = ExactDesign::singleton(p.space(), 0, 4).unwrap();
        let qf = quadratic_components(&p, &design).unwrap();
        assert!(qf.b.amax() < 1e-12);
        assert!(qf.c.abs() < 1e-12);
    }

    #[test]
    fn residual_norm_matches_quadratic_evaluation() {
        // Eq-by-eq identity between the two expressions of delta^2.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in ["motivating", "enzyme"] {
            let p = builtin_pair(name).unwrap();
            for _ in 0..10 {
                let k = rng.gen_range(1..=4);
                let counts: Vec<(usize, usize)> =
                    (0..k).map(|_| (rng.gen_range(0..p.space().len()), rng.gen_range(1..4))).collect();
                let design = ExactDesign::from_counts(p.space(), counts).unwrap();
                let lp = linearize(&p, &design).unwrap();
                let qf = quadratic_components(&p, &design).unwrap();
                let pdim = 2 * p.param_dim();
                let hw = p.halfwidth_stacked();
                for _ in 0..50 {
                    let u = DVector::from_fn(pdim, |j, _| hw[j] * rng.gen_range(-1.0..1.0));
                    let theta = &lp.theta_nom + &u;
                    let t0 = theta.rows(0, p.param_dim()).into_owned();
                    let t1 = theta.rows(p.param_dim(), p.param_dim()).into_owned();
                    let resid = &lp.a0 + &lp.f0 * &t0 - (&lp.a1 + &lp.f1 * &t1);
                    let direct = resid.norm_squared();
                    let quad = qf.value_at(&u);
                    assert!(
                        (direct - quad).abs() <= 1e-9 * (1.0 + direct),
                        "{name}: direct {direct} vs quadratic {quad}"
                    );
                }
            }
        }
    }

    #[test]
    fn components_are_additive_in_the_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = builtin_pair("motivating").unwrap();
        for _ in 0..20 {
            let mk = |rng: &mut ChaCha8Rng| {
                let k = rng.gen_range(1..=3);
                let counts: Vec<(usize, usize)> =
                    (0..k).map(|_| (rng.gen_range(0..101), rng.gen_range(1..3))).collect();
                ExactDesign::from_counts(p.space(), counts).unwrap()
            };
            let d1 = mk(&mut rng);
            let d2 = mk(&mut rng);
            let qa = quadratic_components(&p, &d1).unwrap();
            let qb = quadratic_components(&p, &d2).unwrap();
            let qc = quadratic_components(&p, &d1.concat(&d2)).unwrap();
            let qsum = qa.add(&qb);
            assert!((&qc.m - &qsum.m).amax() <= 1e-12 * (1.0 + qc.m.amax()));
            assert!((&qc.b - &qsum.b).amax() <= 1e-12 * (1.0 + qc.b.amax()));
            assert!((qc.c - qsum.c).abs() <= 1e-12 * (1.0 + qc.c));
        }
    }

    #[test]
    fn information_matrix_is_gram_of_difference_model() {
        let p = builtin_pair("enzyme").unwrap();
        let design = ExactDesign::from_counts(p.space(), [(5, 2), (300, 1), (1000, 3)]).unwrap();
        let lp = linearize(&p, &design).unwrap();
        let qf = quadratic_components(&p, &design).unwrap();
        let g = {
            // G = [F0, -F1]
            let (n, m) = (lp.n(), lp.param_dim());
            let mut g = DMatrix::zeros(n, 2 * m);
            g.view_mut((0, 0), (n, m)).copy_from(&lp.f0);
            g.view_mut((0, m), (n, m)).copy_from(&(-&lp.f1));
            g
        };
        let gram = g.transpose() * &g;
        assert!((&gram - &qf.m).amax() <= 1e-10 * (1.0 + qf.m.amax()));
    }

    #[test]
    fn psd_and_nonnegative_quadratic() {
        let p = builtin_pair("enzyme").unwrap();
        let design = ExactDesign::from_counts(p.space(), [(17, 1), (901, 2)]).unwrap();
        let qf = quadratic_components(&p, &design).unwrap();
        assert!(qf.c >= 0.0);
        let eig = qf.m.clone().symmetric_eigenvalues();
        let scale = qf.m.amax();
        assert!(eig.iter().all(|&l| l >= -1e-10 * scale), "eigenvalues {eig:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u = DVector::from_fn(6, |_, _| rng.gen_range(-2.0..2.0));
            assert!(qf.value_at(&u) >= -1e-10 * (1.0 + scale));
        }
    }
}
